"""Vibronic Franck-Condon profiles and graph-similarity feature vectors,
both compiled to device jobs and evaluated exactly or by sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .device import NUM_MODES, NUM_SQUEEZERS, ChipSpec, JobSpec, exact_pattern_distribution, sample
from .distributions import PatternDistribution
from .errors import UnencodableGraphError, ValidationError
from .kernels import nearest_unitary, singular_value_decomposition, symmetric_eigendecomposition
from .statistics import as_batch, orbit_probability

Source = Union[PatternDistribution, np.ndarray]

# orthogonality tolerance for rounded Duschinsky matrices
DUSCHINSKY_TOL = 1e-3
# bundled adjacency matrices are rounded to four decimals
ADJACENCY_SYMMETRY_TOL = 1e-3
BLOCK_ZERO_TOL = 1e-12
# eigenvalues of C below this are rounding residue and encode no squeezer
EIGEN_ZERO_TOL = 5e-4

DEMO_ORBITS: tuple[tuple[int, ...], ...] = ((1, 1, 1), (1, 1, 1, 1), (2, 1, 1, 1))


# ---------------------------------------------------------------------------
# vibronic spectra
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VibronicInput:
    """Zero-temperature vibronic transition data.

    ``omega`` and ``omega_prime`` are ground- and excited-state normal-mode
    frequencies in cm^-1; the scaling matrices are their square roots.
    """

    omega: np.ndarray
    omega_prime: np.ndarray
    duschinsky: np.ndarray
    squeezing_r: float
    name: str = ""

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        wp = np.asarray(self.omega_prime, dtype=float)
        U = np.asarray(self.duschinsky, dtype=float)
        if w.shape != (4,) or wp.shape != (4,):
            raise ValidationError("omega and omega_prime need 4 entries each")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(wp))) or np.any(w <= 0) or np.any(wp <= 0):
            raise ValidationError("frequencies must be finite and positive")
        if U.shape != (4, 4) or not np.all(np.isfinite(U)):
            raise ValidationError("duschinsky must be a finite 4x4 matrix")
        dev = np.max(np.abs(U.T @ U - np.eye(4)))
        if dev > DUSCHINSKY_TOL:
            raise ValidationError(f"duschinsky matrix is not orthogonal: max|U^T U - I| = {dev:.3e}")
        U = nearest_unitary(U).real
        r = float(self.squeezing_r)
        if not 0 <= r <= 4:
            raise ValidationError("squeezing_r must lie in [0, 4]")
        for name, val in (("omega", w), ("omega_prime", wp), ("duschinsky", U)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "squeezing_r", r)

    @classmethod
    def from_dict(cls, d: dict) -> "VibronicInput":
        try:
            return cls(d["omega"], d["omega_prime"], d["duschinsky"], d["r"], d.get("name", ""))
        except KeyError as exc:
            raise ValidationError(f"vibronic input missing field {exc}") from None


def vibronic_to_job(inp: VibronicInput, **job_kwargs) -> JobSpec:
    """Interferometer ``U_R`` from the SVD of ``J = Omega' U_D Omega^-1``,
    with only the first squeezer driven at ``inp.squeezing_r``."""
    # scale rows and columns directly so that equal frequencies give exact unit ratios
    J = np.sqrt(inp.omega_prime)[:, None] * inp.duschinsky / np.sqrt(inp.omega)[None, :]
    _, _, UR = singular_value_decomposition(J)
    on = (True,) + (False,) * (NUM_SQUEEZERS - 1)
    return JobSpec(unitary=UR, squeezers_on=on, squeezing=(inp.squeezing_r,) * NUM_SQUEEZERS, **job_kwargs)


def assign_frequency(pattern: Sequence[int], inp: VibronicInput) -> float:
    """``sum omega'_k m_k - sum omega_k n_k``; signal modes 0-3 carry the
    excited-state quanta ``m``, idler modes 4-7 the ground-state quanta ``n``."""
    pattern = np.asarray(pattern)
    if pattern.shape[-1] != NUM_MODES:
        raise ValidationError("pattern must have 8 entries")
    return float(pattern[:4] @ inp.omega_prime - pattern[4:] @ inp.omega)


def _assign_many(patterns: np.ndarray, inp: VibronicInput) -> np.ndarray:
    return patterns[:, :4] @ inp.omega_prime - patterns[:, 4:] @ inp.omega


@dataclass
class FCProfile:
    bins: list[tuple[float, float]]
    broadened: list[tuple[float, float]] = field(default_factory=list)

    @property
    def total_mass(self) -> float:
        return float(sum(m for _, m in self.bins))

    def peak_bins(self, threshold: float) -> set[float]:
        return {w for w, m in self.bins if m > threshold}


def lorentzian_broaden(bins, gamma: float, grid: np.ndarray) -> np.ndarray:
    centers = np.array([w for w, _ in bins], dtype=float)
    masses = np.array([m for _, m in bins], dtype=float)
    if not len(centers):
        return np.zeros_like(grid)
    return (masses[None, :] * gamma**2 / ((grid[:, None] - centers[None, :]) ** 2 + gamma**2)).sum(axis=1)


def franck_condon_profile(
    spec: ChipSpec,
    job: JobSpec,
    inp: VibronicInput,
    bin_width: float = 100.0,
    gamma: float = 100.0,
    exact: bool = True,
    samples: Optional[np.ndarray] = None,
    grid_step: Optional[float] = None,
    workers: int = 1,
) -> FCProfile:
    """Histogram of assigned frequencies, vacuum excluded, plus Lorentzian smoothing.

    With ``exact`` the masses are pattern probabilities; otherwise they are
    shot fractions of ``samples`` (drawn from the job when not given).
    """
    if not bin_width > 0 or not gamma > 0:
        raise ValidationError("bin_width and gamma must be positive")
    if exact:
        dist = exact_pattern_distribution(spec, job)
        patterns, weights = dist.patterns, dist.probs
    else:
        batch = as_batch(sample(spec, job, workers) if samples is None else samples)
        patterns, counts = np.unique(batch, axis=0, return_counts=True)
        weights = counts / max(len(batch), 1)
    keep = (patterns.sum(axis=1) > 0) & (weights > 0)
    idx = np.round(_assign_many(patterns[keep], inp) / bin_width).astype(np.int64)
    mass: dict[int, float] = {}
    for i, w in zip(idx.tolist(), weights[keep].tolist()):
        mass[i] = mass.get(i, 0.0) + w
    bins = [(k * bin_width, mass[k]) for k in sorted(mass)]
    if not bins:
        return FCProfile([], [])
    step = grid_step or bin_width / 10
    lo, hi = bins[0][0] - 5 * gamma, bins[-1][0] + 5 * gamma
    grid = lo + step * np.arange(int(math.floor((hi - lo) / step)) + 1)
    curve = lorentzian_broaden(bins, gamma, grid)
    return FCProfile(bins, list(zip(grid.tolist(), curve.tolist())))


# ---------------------------------------------------------------------------
# graph similarity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GraphInput:
    """Bipartite weighted graph ``A = [[0, C], [C^T, 0]]`` with symmetric 4x4 ``C``."""

    adjacency: np.ndarray
    name: str = ""

    def __post_init__(self):
        A = np.asarray(self.adjacency, dtype=float)
        if A.shape != (NUM_MODES, NUM_MODES) or not np.all(np.isfinite(A)):
            raise ValidationError("adjacency must be a finite 8x8 matrix")
        asym = np.max(np.abs(A - A.T))
        if asym > ADJACENCY_SYMMETRY_TOL:
            raise ValidationError(f"adjacency is not symmetric: max|A - A^T| = {asym:.3e}")
        A = (A + A.T) / 2
        if np.max(np.abs(A[:4, :4])) > BLOCK_ZERO_TOL or np.max(np.abs(A[4:, 4:])) > BLOCK_ZERO_TOL:
            raise ValidationError("adjacency is not bipartite: diagonal blocks must vanish")
        C = A[:4, 4:]
        if np.max(np.abs(C - C.T)) > ADJACENCY_SYMMETRY_TOL:
            raise ValidationError("off-diagonal block C must be symmetric")
        C = (C + C.T) / 2
        A = np.block([[np.zeros((4, 4)), C], [C, np.zeros((4, 4))]])
        A.setflags(write=False)
        object.__setattr__(self, "adjacency", A)

    @property
    def C(self) -> np.ndarray:
        return self.adjacency[:4, 4:]

    @classmethod
    def from_dict(cls, d: dict) -> "GraphInput":
        if "adjacency" not in d:
            raise ValidationError("graph input missing field 'adjacency'")
        return cls(d["adjacency"], d.get("name", ""))


def graph_demo_chip() -> ChipSpec:
    """Single-Schmidt chip with uniform loss and no detector noise, so feature
    vectors depend on the encoded graph alone (a zero graph gives a zero vector)."""
    return ChipSpec.uniform(r=1.0, eta=0.15)


def graph_to_job(inp: GraphInput, zero_tol: float = EIGEN_ZERO_TOL, **job_kwargs) -> JobSpec:
    """Encode ``C = U diag(tanh r) U^T``; negative eigenvalues become column phases ``i``."""
    lam, V = symmetric_eigendecomposition(inp.C)
    if np.any(np.abs(lam) >= 1):
        raise UnencodableGraphError(f"eigenvalue magnitude {np.max(np.abs(lam)):.6g} >= 1 cannot be encoded")
    lam = np.where(np.abs(lam) < zero_tol, 0.0, lam)
    U = V.astype(complex) * np.where(lam < 0, 1j, 1.0)[None, :]
    r = np.arctanh(np.abs(lam))
    return JobSpec(unitary=U, squeezers_on=tuple(r > 0), squeezing=tuple(r.tolist()), **job_kwargs)


def encoded_c_matrix(job: JobSpec) -> np.ndarray:
    r = np.array(job.squeezing) * np.array(job.squeezers_on)
    return job.unitary @ np.diag(np.tanh(r)) @ job.unitary.T


def feature_vector(source: Source, orbits: Sequence[Sequence[int]] = DEMO_ORBITS) -> tuple[float, ...]:
    return tuple(orbit_probability(source, o)[0] for o in orbits)


def _check_perm(perm: Sequence[int]) -> np.ndarray:
    p = np.asarray(perm, dtype=np.int64)
    if p.shape != (4,) or sorted(p.tolist()) != [1, 2, 3, 4]:
        raise ValidationError(f"{list(perm)} is not a permutation of (1, 2, 3, 4)")
    return p - 1


def permutation_matrix(perm: Sequence[int]) -> np.ndarray:
    """8x8 block-diagonal ``P + P`` for a 1-based one-line permutation of the four labels."""
    p = _check_perm(perm)
    P = np.zeros((4, 4))
    P[p, np.arange(4)] = 1.0
    return np.kron(np.eye(2), P)


def permute_graph(inp: GraphInput, perm: Sequence[int]) -> GraphInput:
    P = permutation_matrix(perm)
    return GraphInput(P @ inp.adjacency @ P.T, inp.name)

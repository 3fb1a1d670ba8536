"""The eight-mode chip: four two-mode squeezers on pairs ``(i, i+4)``, two
Schmidt modes per squeezer, per-mode loss ahead of a 4x4 interferometer that
acts on the signal (0-3) and idler (4-7) halves alike, and Poisson excess
noise added at detection.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import convolve2d
from scipy.stats import binom, poisson

from . import gaussian as gc
from .distributions import (
    PatternDistribution,
    convolve,
    enumerate_patterns,
    poisson_pattern_probs,
)
from .errors import CutoffError, FitError, ValidationError
from .kernels import is_unitary, nearest_unitary

NUM_SQUEEZERS = 4
NUM_MODES = 8
SAMPLE_TAIL_LIMIT = 0.01
# per-state tail below which a lower enumeration cutoff is used when sampling
SAMPLE_TAIL_NEGLIGIBLE = 1e-7
SAMPLE_BLOCK = 1 << 16
# rough budget on hafnian dynamic-programming states per exact distribution
WORK_BUDGET = 1e9


def _floats(x, n: int, name: str) -> tuple[float, ...]:
    x = tuple(float(v) for v in x)
    if len(x) != n:
        raise ValidationError(f"{name} must have {n} entries, got {len(x)}")
    if not all(math.isfinite(v) for v in x):
        raise ValidationError(f"{name} has non-finite entries")
    return x


@dataclass(frozen=True)
class ChipSpec:
    squeezing_r1: tuple[float, ...]
    squeezing_r2: tuple[float, ...]
    eta: tuple[float, ...]
    noise_nbar: tuple[float, ...]

    def __post_init__(self):
        r1 = _floats(self.squeezing_r1, NUM_SQUEEZERS, "squeezing_r1")
        r2 = _floats(self.squeezing_r2, NUM_SQUEEZERS, "squeezing_r2")
        eta = _floats(self.eta, NUM_MODES, "eta")
        nbar = _floats(self.noise_nbar, NUM_MODES, "noise_nbar")
        if any(b < 0 or a < b for a, b in zip(r1, r2)):
            raise ValidationError("squeezing must satisfy r1 >= r2 >= 0")
        if any(not 0 < e <= 1 for e in eta):
            raise ValidationError("transmissivities must lie in (0, 1]")
        if any(n < 0 for n in nbar):
            raise ValidationError("noise means must be non-negative")
        for name, val in (("squeezing_r1", r1), ("squeezing_r2", r2), ("eta", eta), ("noise_nbar", nbar)):
            object.__setattr__(self, name, val)

    @classmethod
    def default(cls) -> "ChipSpec":
        """Fitted parameters of the demonstrated device (bundled data file)."""
        text = resources.files("photonchip.data").joinpath("default_chip.json").read_text("utf-8")
        return cls.from_dict(json.loads(text))

    @classmethod
    def uniform(cls, r: float = 1.0, eta: float = 1.0, nbar: float = 0.0, r2: float = 0.0) -> "ChipSpec":
        """Identical squeezers, uniform loss and noise; single Schmidt mode unless ``r2`` is set."""
        return cls((r,) * 4, (r2,) * 4, (eta,) * 8, (nbar,) * 8)

    def to_dict(self) -> dict:
        return {
            "squeezing_r1": list(self.squeezing_r1),
            "squeezing_r2": list(self.squeezing_r2),
            "eta": list(self.eta),
            "noise_nbar": list(self.noise_nbar),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChipSpec":
        try:
            return cls(d["squeezing_r1"], d["squeezing_r2"], d["eta"], d["noise_nbar"])
        except KeyError as exc:
            raise ValidationError(f"chip spec missing field {exc}") from None


def encode_complex_matrix(U) -> list:
    U = np.asarray(U, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in U]


def decode_complex_matrix(rows) -> np.ndarray:
    try:
        arr = np.asarray(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError("matrix must be nested arrays of [re, im] pairs") from exc
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ValidationError("matrix must be nested arrays of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


@dataclass(frozen=True, eq=False)
class JobSpec:
    """A run request.

    ``squeezing`` optionally overrides the dominant Schmidt-mode squeezing of
    each squeezer; the secondary mode is rescaled by the same factor, as both
    Schmidt amplitudes are proportional to the pump amplitude.
    """

    unitary: np.ndarray = field(default_factory=lambda: np.eye(4, dtype=complex))
    squeezers_on: tuple[bool, ...] = (True, True, True, True)
    shots: int = 1000
    total_cutoff: int = 8
    seed: int = 0
    squeezing: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        U = np.array(self.unitary, dtype=complex)
        if U.shape != (4, 4) or not np.all(np.isfinite(U)):
            raise ValidationError(f"unitary must be a finite 4x4 matrix, got shape {U.shape}")
        if not is_unitary(U, 1e-6):
            if not is_unitary(U, 1e-3):
                dev = np.max(np.abs(U.conj().T @ U - np.eye(4)))
                raise ValidationError(f"unitary invariant violated: max|U^dag U - I| = {dev:.3e} > 1e-3")
            U = nearest_unitary(U)
        U.setflags(write=False)
        object.__setattr__(self, "unitary", U)
        on = tuple(bool(x) for x in self.squeezers_on)
        if len(on) != NUM_SQUEEZERS:
            raise ValidationError("squeezers_on must have 4 entries")
        object.__setattr__(self, "squeezers_on", on)
        if int(self.shots) != self.shots or self.shots < 0:
            raise ValidationError("shots must be a non-negative integer")
        if int(self.total_cutoff) != self.total_cutoff or self.total_cutoff < 1:
            raise ValidationError("total_cutoff must be a positive integer")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be an integer in [0, 2**64)")
        if self.squeezing is not None:
            sq = _floats(self.squeezing, NUM_SQUEEZERS, "squeezing")
            if any(v < 0 or v > 4 for v in sq):
                raise ValidationError("squeezing overrides must lie in [0, 4]")
            object.__setattr__(self, "squeezing", sq)

    def to_dict(self) -> dict:
        return {
            "unitary": encode_complex_matrix(self.unitary),
            "squeezers_on": list(self.squeezers_on),
            "shots": int(self.shots),
            "total_cutoff": int(self.total_cutoff),
            "seed": int(self.seed),
            "squeezing": None if self.squeezing is None else list(self.squeezing),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "JobSpec":
        try:
            U = decode_complex_matrix(d["unitary"])
            return cls(
                unitary=U,
                squeezers_on=d["squeezers_on"],
                shots=d["shots"],
                total_cutoff=d["total_cutoff"],
                seed=d["seed"],
                squeezing=d.get("squeezing"),
            )
        except KeyError as exc:
            raise ValidationError(f"job spec missing field {exc}") from None


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from None


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def squeezing_levels(spec: ChipSpec, job: JobSpec) -> tuple[np.ndarray, np.ndarray]:
    """Effective ``(r1, r2)`` per squeezer with switched-off squeezers zeroed."""
    r1 = np.array(spec.squeezing_r1)
    r2 = np.array(spec.squeezing_r2)
    if job.squeezing is not None:
        target = np.array(job.squeezing)
        ratio = np.divide(r2, r1, out=np.zeros(4), where=r1 > 0)
        r1, r2 = target, target * ratio
    on = np.array(job.squeezers_on)
    return np.where(on, r1, 0.0), np.where(on, r2, 0.0)


def build_schmidt_states(spec: ChipSpec, job: JobSpec) -> tuple[gc.GaussianState, gc.GaussianState]:
    """The two independent 8-mode Gaussian states, one per Schmidt mode."""
    states = []
    for r in squeezing_levels(spec, job):
        s = gc.vacuum(NUM_MODES)
        for i in range(NUM_SQUEEZERS):
            if r[i] != 0:
                s = gc.apply_two_mode_squeezing(s, i, i + 4, r[i])
        for m in range(NUM_MODES):
            if spec.eta[m] != 1.0:
                s = gc.apply_loss(s, m, spec.eta[m])
        s = gc.apply_interferometer(s, job.unitary, [0, 1, 2, 3])
        s = gc.apply_interferometer(s, job.unitary, [4, 5, 6, 7])
        states.append(s)
    return states[0], states[1]


def _active_modes(state: gc.GaussianState, tol: float = 1e-14) -> np.ndarray:
    M = state.num_modes
    dev = np.abs(state.sigma - 0.5 * np.eye(2 * M))
    per_mode = dev[:M].max(axis=1) + dev[M:].max(axis=1)
    return np.flatnonzero(per_mode > tol)


def _marginal(state: gc.GaussianState, modes: np.ndarray) -> gc.GaussianState:
    M = state.num_modes
    idx = np.r_[modes, modes + M]
    return gc.GaussianState(len(modes), state.sigma[np.ix_(idx, idx)])


def _dp_work(patterns: np.ndarray) -> float:
    return float(np.sum(np.prod((patterns + 1.0) ** 2, axis=1)))


@lru_cache(maxsize=32)
def _cached_probs(sigma_bytes: bytes, n: int, cutoff: int) -> np.ndarray:
    sigma = np.frombuffer(sigma_bytes, dtype=complex).reshape(2 * n, 2 * n)
    state = gc.GaussianState(n, sigma)
    probs = gc.pattern_probabilities(state, enumerate_patterns(n, cutoff))
    probs.setflags(write=False)
    return probs


def state_pattern_probs(state: gc.GaussianState, modes: np.ndarray, cutoff: int) -> np.ndarray:
    """Fock probabilities of ``state`` restricted to ``modes`` (others assumed vacuum),
    over :func:`enumerate_patterns` ``(len(modes), cutoff)``."""
    patterns = enumerate_patterns(len(modes), cutoff)
    if len(modes) == 0:
        return np.ones(1)
    sub = _marginal(state, modes)
    if np.allclose(sub.sigma, 0.5 * np.eye(2 * len(modes)), atol=1e-15, rtol=0):
        out = np.zeros(len(patterns))
        out[0] = 1.0
        return out
    if _dp_work(patterns) > WORK_BUDGET:
        raise CutoffError(
            f"cutoff {cutoff} over {len(modes)} active modes exceeds the exact-enumeration budget; "
            "lower total_cutoff"
        )
    return _cached_probs(np.ascontiguousarray(sub.sigma).tobytes(), len(modes), int(cutoff))


def _active_union(spec: ChipSpec, states) -> np.ndarray:
    act = set(np.flatnonzero(np.array(spec.noise_nbar) > 0))
    for s in states:
        act |= set(_active_modes(s))
    return np.array(sorted(act), dtype=np.int64)


def exact_pattern_distribution(spec: ChipSpec, job: JobSpec, cutoff: Optional[int] = None) -> PatternDistribution:
    """Exact joint distribution of all patterns with at most ``job.total_cutoff`` photons.

    ``Pr(S) = sum over S = S1 + S2 + N of Pr1(S1) Pr2(S2) prod_i Poisson(N_i; nbar_i)``.
    Modes that stay in vacuum and carry no noise are left out of the
    enumeration and filled with zeros.
    """
    cutoff = job.total_cutoff if cutoff is None else int(cutoff)
    states = build_schmidt_states(spec, job)
    modes = _active_union(spec, states)
    patterns = enumerate_patterns(max(len(modes), 1), cutoff)
    if len(modes) == 0:
        dist = PatternDistribution(np.zeros((1, NUM_MODES), np.int64), np.ones(1), cutoff, 0.0)
        return dist
    p1 = state_pattern_probs(states[0], modes, cutoff)
    p2 = state_pattern_probs(states[1], modes, cutoff)
    probs = convolve(p1, p2, patterns, cutoff)
    nbar = np.array(spec.noise_nbar)[modes]
    if np.any(nbar > 0):
        probs = convolve(probs, poisson_pattern_probs(patterns, nbar), patterns, cutoff)
    tail = max(0.0, 1.0 - float(probs.sum()))
    return PatternDistribution(patterns, probs, cutoff, tail).embed(modes, NUM_MODES)


def total_photon_distribution(spec: ChipSpec, job: JobSpec) -> list[tuple[int, float]]:
    dist = exact_pattern_distribution(spec, job)
    return list(enumerate(dist.total_photon_marginal().tolist()))


def _inverse_cdf_table(probs: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probs / probs.sum())
    cdf[-1] = 1.0
    return cdf


def _sample_block(block, n, cdfs, pattern_tables, nbar, seed):
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), block]))
    out = np.zeros((n, NUM_MODES), dtype=np.int64)
    for cdf, table in zip(cdfs, pattern_tables):
        if cdf is None:
            continue
        out += table[np.searchsorted(cdf, rng.random(n), side="right")]
    out += rng.poisson(nbar, size=(n, NUM_MODES))
    return out


def sample(spec: ChipSpec, job: JobSpec, workers: int = 1) -> np.ndarray:
    """Draw ``job.shots`` patterns (an ``(shots, 8)`` integer array).

    Each Schmidt state is sampled by inverse CDF from its exact distribution
    truncated at ``job.total_cutoff`` and renormalised (a state whose mass
    above a lower cutoff is below 1e-7 is enumerated only up to that cutoff;
    tail masses come from the total-photon generating function, which
    is cheap to evaluate); Poisson noise is added
    per mode.  Shots are produced in fixed blocks with seeds derived from
    ``(seed, block index)``, so output is independent of ``workers``.

    Raises
    ------
    CutoffError
        If either Schmidt state leaves 1% or more of its probability above the cutoff.
    """
    states = build_schmidt_states(spec, job)
    cdfs, tables = [], []
    for state in states:
        modes = _active_modes(state)
        if len(modes) == 0:
            cdfs.append(None)
            tables.append(None)
            continue
        tails = 1.0 - np.cumsum(gc.total_photon_pmf(state, job.total_cutoff))
        if tails[-1] >= SAMPLE_TAIL_LIMIT:
            raise CutoffError(
                f"truncated tail mass {tails[-1]:.4f} >= {SAMPLE_TAIL_LIMIT} at total_cutoff "
                f"{job.total_cutoff}; increase total_cutoff"
            )
        # a weakly squeezed state needs fewer photons than the job allows
        cutoff = job.total_cutoff
        if tails[-1] < SAMPLE_TAIL_NEGLIGIBLE:
            cutoff = int(np.argmax(tails < SAMPLE_TAIL_NEGLIGIBLE))
        probs = state_pattern_probs(state, modes, cutoff)
        table = np.zeros((len(probs), NUM_MODES), dtype=np.int64)
        table[:, modes] = enumerate_patterns(len(modes), cutoff)
        cdfs.append(_inverse_cdf_table(probs))
        tables.append(table)
    nbar = np.array(spec.noise_nbar)
    sizes = [min(SAMPLE_BLOCK, job.shots - start) for start in range(0, job.shots, SAMPLE_BLOCK)]
    if not sizes:
        return np.zeros((0, NUM_MODES), dtype=np.int64)
    args = [(b, n, cdfs, tables, nbar, job.seed) for b, n in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            blocks = list(pool.map(lambda a: _sample_block(*a), args))
    else:
        blocks = [_sample_block(*a) for a in args]
    return np.concatenate(blocks)


# ---------------------------------------------------------------------------
# parameter fitting from single-squeezer histograms
# ---------------------------------------------------------------------------


class SqueezerFit(NamedTuple):
    r1: float
    r2: float
    eta: float
    nbar: float


def pair_histogram(samples: np.ndarray, mode_a: int, mode_b: int, cutoff: int = 8) -> np.ndarray:
    """2-D count histogram of ``(n_a, n_b)``; events beyond ``cutoff`` in either mode are dropped."""
    samples = np.asarray(samples)
    a, b = samples[:, mode_a], samples[:, mode_b]
    keep = (a <= cutoff) & (b <= cutoff)
    H = np.zeros((cutoff + 1, cutoff + 1))
    np.add.at(H, (a[keep], b[keep]), 1)
    return H


def lossy_tmsv_joint(r: float, eta: float, cutoff: int) -> np.ndarray:
    """Joint photon-number distribution of a TMSV after equal loss on both arms.

    Binomial thinning of the perfectly correlated ``Pr(n, n) = tanh^2n r / cosh^2 r``.
    """
    if r == 0:
        out = np.zeros((cutoff + 1, cutoff + 1))
        out[0, 0] = 1.0
        return out
    lam = math.tanh(r) ** 2
    nmax = max(cutoff, int(math.ceil(math.log(1e-14) / math.log(lam))) if lam < 1 else 4000)
    nmax = min(nmax, 4000)
    n = np.arange(nmax + 1)
    pn = (1 - lam) * lam**n
    k = np.arange(cutoff + 1)
    B = binom.pmf(k[:, None], n[None, :], eta)
    return (B * pn) @ B.T


def squeezer_model_histogram(r1: float, r2: float, eta: float, nbar: float, cutoff: int = 8) -> np.ndarray:
    """Model probability of ``(n_signal, n_idler)`` for one squeezer with two
    Schmidt modes, equal loss and Poisson noise on both arms (window ``<= cutoff``)."""
    P = convolve2d(lossy_tmsv_joint(r1, eta, cutoff), lossy_tmsv_joint(r2, eta, cutoff))[: cutoff + 1, : cutoff + 1]
    noise = poisson.pmf(np.arange(cutoff + 1), nbar)
    return convolve2d(P, np.outer(noise, noise))[: cutoff + 1, : cutoff + 1]


def fit_squeezer_model(histogram) -> SqueezerFit:
    """Fit ``(r1, r2, eta, nbar)`` to a 2-D signal/idler count histogram.

    Bounded least squares on Poisson-deviance residuals (equivalently, maximum
    likelihood of the window-conditional multinomial).
    """
    H = np.asarray(histogram, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or np.any(H < 0):
        raise FitError("histogram must be a square array of non-negative counts")
    N = H.sum()
    if N == 0 or H.sum() == H[0, 0]:
        raise FitError("degenerate histogram: all counts in the (0, 0) bin")
    cutoff = H.shape[0] - 1
    k = np.arange(cutoff + 1)
    pa, pb = H.sum(axis=1) / N, H.sum(axis=0) / N
    ma, mb = pa @ k, pb @ k
    va, vb = pa @ k**2 - ma**2, pb @ k**2 - mb**2
    cab = (H / N * np.outer(k, k)).sum() - ma * mb
    nrf = (va + vb - 2 * cab) / max(ma + mb, 1e-12)
    eta0 = float(np.clip(1 - nrf, 0.02, 0.99))
    s0 = max(0.5 * (ma + mb) / eta0, 1e-3)

    def residuals(theta):
        r1, r2, eta, nbar = theta
        P = squeezer_model_histogram(r1, r2, eta, nbar, cutoff)
        E = N * P / P.sum()
        E = np.maximum(E, 1e-300)
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(H > 0, H * np.log(H / E), 0.0)
        dev = np.maximum(2 * (E - H + term), 0.0)
        return (np.sign(H - E) * np.sqrt(dev)).ravel()

    lo = [0.0, 0.0, 1e-3, 0.0]
    hi = [3.0, 3.0, 1.0, 2.0]
    best = None
    for frac in (0.9, 0.7, 0.98):
        x0 = [math.asinh(math.sqrt(frac * s0)), math.asinh(math.sqrt((1 - frac) * s0)), eta0, 0.01]
        x0 = np.clip(x0, np.array(lo) + 1e-9, np.array(hi) - 1e-9)
        res = least_squares(residuals, x0, bounds=(lo, hi), x_scale=[0.1, 0.1, 0.01, 0.01],
                            xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=2000)
        if best is None or res.cost < best.cost:
            best = res
    if not best.success:
        raise FitError(f"least squares did not converge: {best.message}")
    r1, r2, eta, nbar = best.x
    if r2 > r1:
        r1, r2 = r2, r1
    return SqueezerFit(float(r1), float(r2), float(eta), float(nbar))

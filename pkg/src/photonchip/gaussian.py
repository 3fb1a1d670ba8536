"""Zero-mean Gaussian states in the creation/annihilation basis.

The covariance matrix ``sigma`` is ordered ``(a_1..a_M, a_1^dag..a_M^dag)`` with
``sigma_jk = <{xi_j, xi_k^dag}>/2``, so the vacuum is ``I/2``.  Fock
probabilities follow from ``Q = sigma + I/2`` and ``A = X (I - Q^-1)``::

    Pr(S) = Haf(A_S) / (sqrt(det Q) * prod(s_i!))

where ``A_S`` repeats rows/columns ``i`` and ``i + M`` ``s_i`` times each.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import gammaln

from .errors import ValidationError
from .kernels import _haf_multiset, is_unitary, permanent, repeat_rows_cols

HERMITIAN_TOL = 1e-10
CLAMP_TOL = 1e-9
MAX_FOCK_PHOTONS = 12


class ProbabilityClampWarning(RuntimeWarning):
    """A slightly negative probability (roundoff) was clamped to zero."""


@dataclass(frozen=True, eq=False)
class GaussianState:
    num_modes: int
    sigma: np.ndarray

    def __post_init__(self):
        sigma = np.array(self.sigma, dtype=complex)
        M = self.num_modes
        if M < 1:
            raise ValidationError("a Gaussian state needs at least one mode")
        if sigma.shape != (2 * M, 2 * M):
            raise ValidationError(f"covariance must be {2 * M}x{2 * M}, got {sigma.shape}")
        if not np.all(np.isfinite(sigma)):
            raise ValidationError("covariance has non-finite entries")
        if np.max(np.abs(sigma - sigma.conj().T)) > HERMITIAN_TOL:
            raise ValidationError("covariance is not Hermitian")
        sigma = 0.5 * (sigma + sigma.conj().T)
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)

    @property
    def Q(self) -> np.ndarray:
        return self.sigma + 0.5 * np.eye(2 * self.num_modes)

    def normal_order(self) -> tuple[np.ndarray, np.ndarray]:
        """``(N, Mm)`` with ``N_ij = <a_i^dag a_j>`` and ``Mm_ij = <a_i a_j>``."""
        M = self.num_modes
        N = self.sigma[M:, M:] - 0.5 * np.eye(M)
        Mm = self.sigma[:M, M:]
        return N, Mm

    def symplectic_eigenvalues(self) -> np.ndarray:
        M = self.num_modes
        Z = np.diag(np.r_[np.ones(M), -np.ones(M)])
        ev = np.sort(np.abs(np.linalg.eigvals(Z @ self.sigma)))
        return ev[::2]

    def is_physical(self, tol: float = 1e-9) -> bool:
        return bool(np.all(self.symplectic_eigenvalues() >= 0.5 - tol))


def _check_mode(state: GaussianState, mode: int) -> int:
    if not 0 <= int(mode) < state.num_modes:
        raise ValidationError(f"mode {mode} out of range for {state.num_modes} modes")
    return int(mode)


def vacuum(M: int) -> GaussianState:
    if M < 1:
        raise ValidationError("vacuum needs at least one mode")
    return GaussianState(M, 0.5 * np.eye(2 * M))


def apply_two_mode_squeezing(state: GaussianState, mode_a: int, mode_b: int, r: float) -> GaussianState:
    """Apply ``S2(r) = exp(r (a^dag b^dag - a b))`` to modes ``mode_a``, ``mode_b``."""
    a, b = _check_mode(state, mode_a), _check_mode(state, mode_b)
    if a == b:
        raise ValidationError("two-mode squeezing needs two distinct modes")
    if not np.isfinite(r) or abs(r) > 4:
        raise ValidationError(f"squeezing parameter {r} outside the supported range |r| <= 4")
    M = state.num_modes
    ch, sh = math.cosh(r), math.sinh(r)
    T = np.eye(2 * M)
    T[a, a] = T[b, b] = T[M + a, M + a] = T[M + b, M + b] = ch
    # a -> ch a + sh b^dag and b -> ch b + sh a^dag (plus conjugates)
    T[a, M + b] = T[b, M + a] = T[M + a, b] = T[M + b, a] = sh
    return GaussianState(M, T @ state.sigma @ T.T)


def apply_interferometer(state: GaussianState, U, modes: Sequence[int]) -> GaussianState:
    """Passive linear optics ``a_out = U a_in`` on the listed modes."""
    U = np.asarray(U, dtype=complex)
    modes = [_check_mode(state, m) for m in modes]
    if len(set(modes)) != len(modes):
        raise ValidationError("interferometer modes must be distinct")
    if U.shape != (len(modes), len(modes)):
        raise ValidationError(f"unitary shape {U.shape} does not match {len(modes)} modes")
    if not is_unitary(U, 1e-8):
        raise ValidationError("interferometer matrix is not unitary to 1e-8")
    M = state.num_modes
    T = np.eye(2 * M, dtype=complex)
    idx = np.array(modes)
    T[np.ix_(idx, idx)] = U
    T[np.ix_(idx + M, idx + M)] = U.conj()
    return GaussianState(M, T @ state.sigma @ T.conj().T)


def apply_loss(state: GaussianState, mode: int, eta: float) -> GaussianState:
    """Pure-loss channel with transmissivity ``eta`` on one mode."""
    mode = _check_mode(state, mode)
    if not 0.0 <= eta <= 1.0:
        raise ValidationError(f"transmissivity {eta} outside [0, 1]")
    M = state.num_modes
    g = np.ones(2 * M)
    g[mode] = g[M + mode] = math.sqrt(eta)
    sigma = g[:, None] * state.sigma * g[None, :] + np.diag(0.5 * (1 - g**2))
    return GaussianState(M, sigma)


def q_factors(state: GaussianState) -> tuple[np.ndarray, float]:
    """Return ``(A, sqrt(det Q))`` for the probability formula."""
    M = state.num_modes
    Q = state.Q
    try:
        factor = cho_factor(Q, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValidationError("Q = sigma + I/2 is not positive definite") from exc
    sqrt_det = float(np.prod(np.abs(np.diag(factor[0]))))
    Qinv = cho_solve(factor, np.eye(2 * M, dtype=complex))
    X = np.block([[np.zeros((M, M)), np.eye(M)], [np.eye(M), np.zeros((M, M))]])
    A = X @ (np.eye(2 * M) - Qinv)
    return 0.5 * (A + A.T), sqrt_det


@numba.njit(cache=True)
def _pattern_hafnians(A, patterns):
    n_pat, M = patterns.shape
    out = np.empty(n_pat, np.complex128)
    for p in range(n_pat):
        cnt = 0
        for i in range(M):
            if patterns[p, i] > 0:
                cnt += 1
        idx = np.empty(2 * cnt, np.int64)
        reps = np.empty(2 * cnt, np.int64)
        k = 0
        for i in range(M):
            if patterns[p, i] > 0:
                idx[k] = i
                idx[k + cnt] = i + M
                reps[k] = patterns[p, i]
                reps[k + cnt] = patterns[p, i]
                k += 1
        if cnt == 0:
            out[p] = 1.0
            continue
        sub = np.empty((2 * cnt, 2 * cnt), np.complex128)
        for u in range(2 * cnt):
            for w in range(2 * cnt):
                sub[u, w] = A[idx[u], idx[w]]
        out[p] = _haf_multiset(sub, reps)
    return out


def _clamp(probs: np.ndarray) -> np.ndarray:
    if np.any(probs < -CLAMP_TOL):
        raise ValidationError(
            f"negative probability {probs.min():.3e} below -{CLAMP_TOL:g}: invalid state"
        )
    if np.any(probs < 0):
        warnings.warn("clamped roundoff-negative probabilities to zero", ProbabilityClampWarning)
        probs = np.where(probs < 0, 0.0, probs)
    return probs


def fock_probabilities(state: GaussianState, patterns) -> np.ndarray:
    """Vectorised :func:`fock_probability` over an ``(n, M)`` array of patterns."""
    patterns = np.atleast_2d(np.asarray(patterns, dtype=np.int64))
    if patterns.shape[1] != state.num_modes:
        raise ValidationError(
            f"pattern length {patterns.shape[1]} does not match {state.num_modes} modes"
        )
    if np.any(patterns < 0):
        raise ValidationError("photon numbers must be non-negative")
    if patterns.size and patterns.sum(axis=1).max() > MAX_FOCK_PHOTONS:
        raise ValidationError(f"patterns limited to {MAX_FOCK_PHOTONS} photons in total")
    return pattern_probabilities(state, patterns)


def pattern_probabilities(state: GaussianState, patterns: np.ndarray) -> np.ndarray:
    """Unchecked core of :func:`fock_probabilities` for an ``(n, M)`` int64 array;
    no photon-number bound, the caller controls the cost."""
    A, sqrt_det = q_factors(state)
    hafs = _pattern_hafnians(np.ascontiguousarray(A), np.ascontiguousarray(patterns))
    log_fact = np.sum([[math.lgamma(k + 1) for k in row] for row in patterns], axis=1) if len(patterns) else np.zeros(0)
    probs = hafs.real * np.exp(-np.asarray(log_fact, dtype=float)) / sqrt_det
    return _clamp(probs)


def fock_probability(state: GaussianState, S: Sequence[int]) -> float:
    """Probability of detecting photon-number pattern ``S``."""
    return float(fock_probabilities(state, [list(S)])[0])


def pure_state_c_matrix(U, r: Sequence[float]) -> np.ndarray:
    """``C = U diag(tanh r) U^T`` for two-mode squeezers followed by ``U`` on both halves."""
    U = np.asarray(U, dtype=complex)
    r = np.asarray(r, dtype=float)
    if U.ndim != 2 or U.shape[0] != U.shape[1] or U.shape[0] != len(r):
        raise ValidationError("unitary and squeezing vector sizes disagree")
    if not is_unitary(U, 1e-8):
        raise ValidationError("C-matrix construction needs a unitary")
    if not np.all(np.isfinite(r)):
        raise ValidationError("squeezing parameters must be finite")
    return (U * np.tanh(r)) @ U.T


def pure_q_det_sqrt(r: Sequence[float]) -> float:
    """``sqrt(det Q)`` for lossless two-mode squeezers: ``prod(cosh(r)^2)``."""
    return float(np.prod(np.cosh(np.asarray(r, dtype=float)) ** 2))


def pure_pattern_probability(C, s: Sequence[int], t: Sequence[int], q_det_sqrt: float) -> float:
    """``|Per(C_{s,t})|^2 / (sqrt(det Q) prod(s!) prod(t!))``.

    Rows of ``C`` are indexed by the first-half pattern ``s`` and columns by
    the second-half pattern ``t``.  Unequal totals give zero.
    """
    s = np.asarray(s, dtype=np.int64)
    t = np.asarray(t, dtype=np.int64)
    if s.sum() != t.sum():
        return 0.0
    sub = repeat_rows_cols(C, s, t)
    per = permanent(sub)
    norm = q_det_sqrt * np.prod([math.factorial(int(k)) for k in s]) * np.prod(
        [math.factorial(int(k)) for k in t]
    )
    return float(abs(per) ** 2 / norm)


def photon_moments(state: GaussianState) -> tuple[np.ndarray, np.ndarray]:
    """Mean photon numbers and their covariance matrix, from Wick's theorem.

    ``cov(n_c, n_d) = |<c^dag d>|^2 + |<c d>|^2 + delta_cd <n_c>``.
    """
    N, Mm = state.normal_order()
    means = np.real(np.diag(N)).copy()
    cov = np.abs(N) ** 2 + np.abs(Mm) ** 2 + np.diag(means)
    return means, cov


def total_photon_pmf(state: GaussianState, nmax: int) -> np.ndarray:
    """``Pr(N = n)`` for the total photon number, ``n = 0..nmax``.

    Series coefficients of the generating function
    ``<z^N> = det(I + (1 - z)(sigma - I/2))^(-1/2) = prod_j (1 + mu_j - mu_j z)^(-1/2)``
    over the eigenvalues ``mu_j`` of ``sigma - I/2``.
    """
    if nmax < 0:
        raise ValidationError("nmax must be non-negative")
    mu = np.linalg.eigvalsh(state.sigma - 0.5 * np.eye(2 * state.num_modes))
    k = np.arange(nmax + 1)
    # (1 - q z)^(-1/2) = sum_k C(2k, k) / 4^k q^k z^k
    coef = np.exp(gammaln(2 * k + 1) - 2 * gammaln(k + 1) - k * math.log(4))
    out = np.zeros(nmax + 1)
    out[0] = 1.0
    for m in mu:
        if abs(m) < 1e-15:
            continue
        q = m / (1 + m)
        series = coef * q**k / math.sqrt(1 + m)
        out = np.convolve(out, series)[: nmax + 1]
    return out

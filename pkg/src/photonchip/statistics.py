"""Sample- and distribution-level statistics: NRF, g2, Schmidt number, total
variation distance, orbits and the two-squeezer interference sweep.

Error bars follow the batch procedure used for the device data: the sample
set is split into 8 equal sub-batches (remainder dropped), the statistic is
evaluated on each, and the standard deviation of those 8 values is reported.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

import numpy as np
from scipy.optimize import curve_fit

from .device import ChipSpec, JobSpec, sample
from .distributions import PatternDistribution, enumerate_patterns
from .errors import OutOfModelError, UndefinedStatisticError, ValidationError

N_SUBBATCHES = 8

SIX_PHOTON_ORBITS: tuple[tuple[int, ...], ...] = (
    (1, 1, 1, 1, 1, 1),
    (2, 1, 1, 1, 1),
    (3, 1, 1, 1),
    (2, 2, 1, 1),
    (4, 1, 1),
    (3, 2, 1),
    (5, 1),
    (2, 2, 2),
    (4, 2),
    (3, 3),
    (6,),
)

Source = Union[PatternDistribution, np.ndarray]


def as_batch(samples) -> np.ndarray:
    batch = np.asarray(samples)
    if batch.ndim != 2:
        raise ValidationError("a sample batch must be a 2-D array (shots x modes)")
    return batch.astype(np.int64, copy=False)


def _batched(stat: Callable[[np.ndarray], float], batch: np.ndarray) -> tuple[float, float]:
    value = stat(batch)
    size = len(batch) // N_SUBBATCHES
    if size < 2:
        return value, float("nan")
    subs = []
    for k in range(N_SUBBATCHES):
        try:
            subs.append(stat(batch[k * size : (k + 1) * size]))
        except UndefinedStatisticError:
            return value, float("nan")
    return value, float(np.std(subs, ddof=1))


def _nrf_value(a: np.ndarray, b: np.ndarray) -> float:
    mean_total = np.mean(a + b)
    if mean_total <= 0:
        raise UndefinedStatisticError("NRF undefined: zero mean photon number")
    return float(np.var(a - b, ddof=1) / mean_total)


def nrf(batch, mode_a: int, mode_b: int) -> tuple[float, float]:
    """Noise reduction factor ``Var(n_a - n_b) / <n_a + n_b>`` with its batch error."""
    batch = as_batch(batch)
    if len(batch) < 2:
        raise UndefinedStatisticError("NRF needs at least two samples")
    return _batched(lambda b: _nrf_value(b[:, mode_a], b[:, mode_b]), batch)


def _g2_value(n: np.ndarray) -> float:
    mean = n.mean()
    if mean <= 0:
        raise UndefinedStatisticError("g2 undefined: zero mean photon number")
    return float((np.mean(n.astype(float) ** 2) - mean) / mean**2)


def g2(batch, mode: int) -> tuple[float, float]:
    """Unheralded second-order correlation ``(<n^2> - <n>) / <n>^2``."""
    batch = as_batch(batch)
    if len(batch) == 0:
        raise UndefinedStatisticError("g2 needs samples")
    return _batched(lambda b: _g2_value(b[:, mode]), batch)


def schmidt_number(g2_value: float) -> float:
    """Effective number of Schmidt modes ``K = 1 / (g2 - 1)``."""
    if g2_value <= 1:
        raise OutOfModelError(f"g2 = {g2_value} <= 1 is outside the Schmidt-mode model (noise dominated)")
    if g2_value > 2 + 1e-12:
        raise OutOfModelError(f"g2 = {g2_value} > 2 is outside the Schmidt-mode model")
    return 1.0 / (g2_value - 1.0)


def tvd(P: Mapping, Q: Mapping) -> float:
    """Total variation distance ``sum |P - Q| / 2``; missing keys count as zero."""
    keys = set(P) | set(Q)
    return 0.5 * float(sum(abs(P.get(k, 0.0) - Q.get(k, 0.0)) for k in keys))


def orbit_of(S: Sequence[int]) -> tuple[int, ...]:
    """Sorted non-increasing photon counts with zeros removed, e.g. (1,0,2,1) -> (2,1,1)."""
    return tuple(sorted((int(x) for x in S if x > 0), reverse=True))


def _orbit_mask(patterns: np.ndarray, orbit: Sequence[int]) -> np.ndarray:
    orbit = tuple(orbit)
    width = patterns.shape[1]
    if len(orbit) > width:
        return np.zeros(len(patterns), dtype=bool)
    target = np.zeros(width, dtype=np.int64)
    target[: len(orbit)] = orbit
    return np.all(-np.sort(-patterns, axis=1) == target, axis=1)


def orbit_probability(source: Source, orbit: Sequence[int]) -> tuple[float, float]:
    """Probability of the orbit; ``(value, 0.0)`` for exact distributions,
    ``(fraction, binomial stderr)`` for sample batches."""
    if isinstance(source, PatternDistribution):
        if sum(orbit) > source.cutoff:
            raise ValidationError("orbit total exceeds the distribution cutoff")
        return float(source.probs[_orbit_mask(source.patterns, orbit)].sum()), 0.0
    batch = as_batch(source)
    if len(batch) == 0:
        return 0.0, 0.0
    p = float(_orbit_mask(batch, orbit).mean())
    return p, math.sqrt(p * (1 - p) / len(batch))


def orbit_patterns(orbit: Sequence[int], M: int) -> list[tuple[int, ...]]:
    """All length-``M`` patterns in the orbit, in descending lexicographic order."""
    padded = tuple(orbit) + (0,) * (M - len(orbit))
    return sorted(set(itertools.permutations(padded)), reverse=True)


def orbit_histogram_sixphoton(source: Source, M: int = 8) -> list[tuple[tuple[int, ...], tuple[int, ...], float]]:
    """Six-photon pattern probabilities grouped by orbit, most spread-out orbit first.

    Returns ``(orbit, pattern, probability)`` rows; batches give the fraction
    of all shots landing on each pattern.
    """
    if isinstance(source, PatternDistribution):
        lookup = {p: q for p, q in source.restrict_total(6).as_dict().items()}
        norm = 1.0
    else:
        batch = as_batch(source)
        six = batch[batch.sum(axis=1) == 6] if len(batch) else batch
        lookup = {}
        for row in map(tuple, six.tolist()):
            lookup[row] = lookup.get(row, 0) + 1
        norm = max(len(batch), 1)
    rows = []
    for orbit in SIX_PHOTON_ORBITS:
        for pattern in orbit_patterns(orbit, M):
            rows.append((orbit, pattern, lookup.get(pattern, 0.0) / norm))
    return rows


def six_photon_conditional(source: Source, M: int = 8) -> dict[tuple[int, ...], float]:
    """Distribution over six-photon patterns conditioned on six detected photons."""
    rows = orbit_histogram_sixphoton(source, M)
    total = sum(p for _, _, p in rows)
    if total == 0:
        return {}
    return {pat: p / total for _, pat, p in rows}


# ---------------------------------------------------------------------------
# two-squeezer interference
# ---------------------------------------------------------------------------


def beamsplitter_unitary(theta: float, phi: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, np.exp(1j * phi) * s], [-np.exp(-1j * phi) * s, c]])


def embed_pair_unitary(pair: tuple[int, int], theta: float, phi: float) -> np.ndarray:
    k, l = pair
    U = np.eye(4, dtype=complex)
    U[np.ix_([k, l], [k, l])] = beamsplitter_unitary(theta, phi)
    return U


def nrf_model(phi, n: float, eta: float, phi0: float = 0.0, theta: float = math.pi / 2):
    """Closed-form ``(same-squeezer, cross-squeezer)`` NRFs for two identical
    single-mode squeezers under uniform loss; ``n`` is the detected mean photon number."""
    osc = (eta + n) * math.sin(theta) ** 2 * np.sin(np.asarray(phi) - phi0) ** 2
    return 1 - eta + osc, 1 + n - osc


@dataclass
class SweepResult:
    phis: np.ndarray
    traces: np.ndarray  # (4, n_phi): nrf_11, nrf_22, nrf_12, nrf_21
    stderrs: np.ndarray
    n: float
    eta: float
    phi0: float
    n_err: float
    eta_err: float
    phi0_err: float

    TRACE_NAMES = ("nrf_11", "nrf_22", "nrf_12", "nrf_21")


def _check_pair(pair) -> tuple[int, int]:
    k, l = (int(x) for x in pair)
    if k == l or not (0 <= k < 4 and 0 <= l < 4):
        raise ValidationError(f"invalid squeezer pair {pair}: need two distinct indices in 0..3")
    return k, l


def fit_interference(phis, traces, stderrs, theta: float = math.pi / 2):
    """Joint least-squares fit of the four traces with shared ``(n, eta, phi0)``.

    Returns ``(params, errors)`` with one-sigma errors from the covariance.
    """
    phis = np.asarray(phis, dtype=float)
    y = np.asarray(traces, dtype=float).ravel()
    sig = np.asarray(stderrs, dtype=float).ravel()
    sig = np.where(np.isfinite(sig) & (sig > 0), sig, np.nanmedian(sig[sig > 0]) if np.any(sig > 0) else 1.0)

    def model(_, n, eta, phi0):
        same, cross = nrf_model(phis, n, eta, phi0, theta)
        return np.concatenate([same, same, cross, cross])

    # coarse scan for the offset phase, then a local fit
    amp = max(float(np.ptp(traces[0])), 1e-3)
    n0 = max(float(np.mean(traces[2]) - 1 + amp / 2), 1e-3)
    eta0 = float(np.clip(1 - np.min(traces[0]), 1e-3, 1.0))
    grid = np.linspace(0, math.pi, 64, endpoint=False)
    costs = [np.sum(((model(None, n0, eta0, g) - y) / sig) ** 2) for g in grid]
    p0 = [n0, eta0, grid[int(np.argmin(costs))]]
    popt, pcov = curve_fit(model, None, y, p0=p0, sigma=sig, absolute_sigma=True, maxfev=20000)
    errs = np.sqrt(np.diag(pcov))
    return popt, errs


def interference_sweep(
    spec: ChipSpec,
    pair: tuple[int, int],
    phis: Sequence[float],
    shots: int,
    seed: int = 0,
    theta: float = math.pi / 2,
    cutoff: int = 10,
    workers: int = 1,
) -> SweepResult:
    """Simulate and fit the four NRF traces of a two-squeezer phase sweep."""
    k, l = _check_pair(pair)
    phis = np.asarray(phis, dtype=float)
    on = tuple(i in (k, l) for i in range(4))
    mode_pairs = [(k, k + 4), (l, l + 4), (k, l + 4), (l, k + 4)]
    traces = np.zeros((4, len(phis)))
    errs = np.zeros((4, len(phis)))
    for i, phi in enumerate(phis):
        job = JobSpec(
            unitary=embed_pair_unitary((k, l), theta, phi),
            squeezers_on=on,
            shots=shots,
            total_cutoff=cutoff,
            seed=(int(seed) * 1_000_003 + i) % 2**64,
        )
        batch = sample(spec, job, workers=workers)
        for j, (a, b) in enumerate(mode_pairs):
            traces[j, i], errs[j, i] = nrf(batch, a, b)
    (n, eta, phi0), (dn, deta, dphi0) = fit_interference(phis, traces, errs, theta)
    phi0 = (phi0 + math.pi / 2) % math.pi - math.pi / 2
    return SweepResult(
        phis, traces, errs, float(n), float(eta), float(phi0), float(dn), float(deta), float(dphi0)
    )

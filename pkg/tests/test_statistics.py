import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from photonchip.device import ChipSpec, JobSpec, exact_pattern_distribution, sample
from photonchip.distributions import PatternDistribution
from photonchip.errors import OutOfModelError, UndefinedStatisticError, ValidationError
from photonchip.kernels import is_unitary
from photonchip.statistics import (
    SIX_PHOTON_ORBITS,
    beamsplitter_unitary,
    embed_pair_unitary,
    fit_interference,
    g2,
    interference_sweep,
    nrf,
    nrf_model,
    orbit_histogram_sixphoton,
    orbit_of,
    orbit_patterns,
    orbit_probability,
    schmidt_number,
    six_photon_conditional,
    tvd,
)

ONLY0 = (True, False, False, False)


def two_mode_dist(pairs):
    pats = np.array([p for p, _ in pairs], dtype=np.int64)
    return PatternDistribution(pats, np.array([q for _, q in pairs]), cutoff=4, tail_mass=0.0)


# --- NRF and g2 --------------------------------------------------------------------


def test_nrf_limits(rng):
    n = rng.poisson(1.5, size=10_000)
    v, e = nrf(np.c_[n, n], 0, 1)
    assert v == 0 and e == 0
    batch = rng.poisson(1.0, size=(200_000, 2))
    v, e = nrf(batch, 0, 1)
    assert abs(v - 1) < 3 * e
    with pytest.raises(UndefinedStatisticError):
        nrf(np.zeros((100, 2), dtype=int), 0, 1)


def test_g2_thermal_and_two_modes(rng):
    nbar = 0.8
    thermal = rng.geometric(1 / (1 + nbar), size=400_000) - 1
    v, e = g2(thermal[:, None], 0)
    assert abs(v - 2) < 3 * e
    two = (rng.geometric(1 / (1 + nbar), size=(400_000, 2)) - 1).sum(axis=1)
    v, e = g2(two[:, None], 0)
    assert abs(v - 1.5) < 3 * e
    with pytest.raises(UndefinedStatisticError):
        g2(np.zeros((100, 1), dtype=int), 0)


def test_batch_error_is_subbatch_std():
    batch = np.arange(80).reshape(-1, 1) % 5
    _, e = g2(batch, 0)
    subs = [g2(batch[k * 10 : (k + 1) * 10], 0)[0] for k in range(8)]
    assert e == pytest.approx(np.std(subs, ddof=1))


def test_schmidt_number():
    assert schmidt_number(2.0) == pytest.approx(1)
    assert schmidt_number(1.5) == pytest.approx(2)
    assert schmidt_number(1.81) == pytest.approx(1.2346, abs=1e-4)
    for bad in (1.0, 0.9, 2.5):
        with pytest.raises(OutOfModelError):
            schmidt_number(bad)


@pytest.mark.slow
def test_nrf_lossless_and_lossy_tmsv():
    for eta, target in ((1.0, 0.0), (0.15, 0.85)):
        spec = ChipSpec.uniform(r=1.0, eta=eta)
        batch = sample(spec, JobSpec(squeezers_on=ONLY0, shots=100_000, seed=4, total_cutoff=30))
        v, e = nrf(batch, 0, 4)
        assert abs(v - target) <= max(3 * e, 1e-12)


@pytest.mark.slow
def test_g2_loss_invariance():
    out = []
    for eta in (0.3, 0.15):
        spec = ChipSpec.uniform(r=1.0, eta=eta, r2=0.4)
        batch = sample(spec, JobSpec(squeezers_on=ONLY0, shots=200_000, seed=5, total_cutoff=30))
        out.append(g2(batch, 0))
    (a, ea), (b, eb) = out
    assert abs(a - b) < 3 * math.hypot(ea, eb)


# --- TVD and orbits ---------------------------------------------------------------


def test_tvd_examples():
    P = {(0,): 0.5, (1,): 0.5}
    assert tvd(P, P) == 0
    assert tvd({(0,): 1.0}, {(1,): 1.0}) == 1
    assert tvd(P, {(0,): 0.75, (1,): 0.25}) == pytest.approx(0.25)


@given(st.integers(0, 2**32 - 1))
def test_tvd_metric_properties(seed):
    rng = np.random.default_rng(seed)
    P, Q, R = ({k: v for k, v in enumerate(rng.dirichlet(np.ones(6)))} for _ in range(3))
    assert tvd(P, Q) == pytest.approx(tvd(Q, P))
    assert tvd(P, R) <= tvd(P, Q) + tvd(Q, R) + 1e-12
    assert 0 <= tvd(P, Q) <= 1


def test_orbit_of_examples():
    assert orbit_of((1, 0, 0, 0, 2, 0, 1, 0)) == (2, 1, 1)
    assert orbit_of((0,) * 8) == ()
    assert orbit_of((3, 1, 1, 1, 0, 0, 0, 0)) == (3, 1, 1, 1)


@given(st.lists(st.integers(0, 4), min_size=8, max_size=8), st.permutations(range(8)))
def test_orbit_of_permutation_invariant(S, perm):
    assert orbit_of(S) == orbit_of([S[i] for i in perm])


def test_orbit_probability_examples():
    vac = two_mode_dist([((0, 0), 1.0)])
    assert orbit_probability(vac, (1,)) == (0.0, 0.0)
    uni = two_mode_dist([((1, 0), 0.5), ((0, 1), 0.5)])
    assert orbit_probability(uni, (1,))[0] == pytest.approx(1)
    r = 0.7
    dist = exact_pattern_distribution(ChipSpec.uniform(r=r), JobSpec(squeezers_on=ONLY0, total_cutoff=6))
    assert orbit_probability(dist, (1, 1))[0] == pytest.approx(math.tanh(r) ** 2 / math.cosh(r) ** 2)
    with pytest.raises(ValidationError):
        orbit_probability(dist, (4, 3))
    batch = np.array([[1, 1], [2, 0], [0, 0], [1, 1]])
    v, e = orbit_probability(batch, (1, 1))
    assert v == 0.5 and e == pytest.approx(math.sqrt(0.25 / 4))


def test_six_photon_orbit_layout():
    assert len(SIX_PHOTON_ORBITS) == 11
    assert all(sum(o) == 6 for o in SIX_PHOTON_ORBITS)
    pats = orbit_patterns((2, 1), 3)
    assert pats == sorted(pats, reverse=True) and len(pats) == 6
    rows = orbit_histogram_sixphoton(np.zeros((0, 8), dtype=int))
    assert len(rows) == sum(len(orbit_patterns(o, 8)) for o in SIX_PHOTON_ORBITS)
    assert all(p == 0 for *_, p in rows)
    assert six_photon_conditional(np.zeros((0, 8), dtype=int)) == {}


def test_orbit_histogram_consistent_with_orbit_probability(default_chip):
    dist = exact_pattern_distribution(default_chip, JobSpec(total_cutoff=6))
    rows = orbit_histogram_sixphoton(dist)
    for orbit in SIX_PHOTON_ORBITS:
        total = sum(p for o, _, p in rows if o == orbit)
        assert total == pytest.approx(orbit_probability(dist, orbit)[0], abs=1e-15)
    cond = six_photon_conditional(dist)
    assert sum(cond.values()) == pytest.approx(1)


def test_orbit_histogram_counts_batch():
    batch = np.array([[6, 0, 0, 0, 0, 0, 0, 0], [1, 1, 1, 1, 1, 1, 0, 0], [0] * 8, [1] * 8])
    rows = {pat: p for _, pat, p in orbit_histogram_sixphoton(batch)}
    assert rows[(6, 0, 0, 0, 0, 0, 0, 0)] == 0.25
    assert rows[(1, 1, 1, 1, 1, 1, 0, 0)] == 0.25


# --- interference ------------------------------------------------------------------


def test_embedded_unitaries():
    for phi in (0.0, 0.4, 2.0):
        assert is_unitary(beamsplitter_unitary(math.pi / 2, phi), 1e-12)
        U = embed_pair_unitary((1, 3), math.pi / 2, phi)
        assert is_unitary(U, 1e-12) and U[0, 0] == 1 and U[2, 2] == 1


def test_nrf_model_values():
    same, cross = nrf_model(0.0, n=0.2, eta=0.15)
    assert same == pytest.approx(0.85) and cross == pytest.approx(1.2)
    same, cross = nrf_model(math.pi / 2, n=0.2, eta=0.15)
    assert same == pytest.approx(1.2) and cross == pytest.approx(0.85)


def test_fit_interference_noiseless_traces():
    phis = np.linspace(0, math.pi, 40, endpoint=False)
    same, cross = nrf_model(phis, 0.2, 0.12, 0.3)
    traces = np.array([same, same, cross, cross])
    (n, eta, phi0), _ = fit_interference(phis, traces, np.full_like(traces, 0.01))
    assert n == pytest.approx(0.2, abs=1e-6) and eta == pytest.approx(0.12, abs=1e-6)
    wrapped = (phi0 - 0.3 + math.pi / 2) % math.pi - math.pi / 2
    assert wrapped == pytest.approx(0, abs=1e-6)


def test_interference_invalid_pair():
    with pytest.raises(ValidationError):
        interference_sweep(ChipSpec.uniform(), (0, 0), [0.0], 10)
    with pytest.raises(ValidationError):
        interference_sweep(ChipSpec.uniform(), (0, 4), [0.0], 10)


@pytest.mark.slow
def test_interference_sweep_small():
    eta, r = 0.2, 0.8
    spec = ChipSpec.uniform(r=r, eta=eta)
    phis = np.linspace(0, math.pi, 12, endpoint=False)
    res = interference_sweep(spec, (1, 3), phis, shots=100_000, seed=3)
    n = eta * math.sinh(r) ** 2
    assert abs(res.n - n) < 3 * res.n_err
    assert abs(res.eta - eta) < 3 * res.eta_err
    same, cross = nrf_model(phis, n, eta)
    expect = np.array([same, same, cross, cross])
    assert np.all(np.abs(res.traces - expect) < 3 * res.stderrs)

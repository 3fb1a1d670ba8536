import math

import numpy as np
import pytest
from scipy.stats import poisson

from photonchip import data
from photonchip import gaussian as gc
from photonchip.device import (
    ChipSpec,
    JobSpec,
    build_schmidt_states,
    dump_json,
    exact_pattern_distribution,
    fit_squeezer_model,
    load_json,
    lossy_tmsv_joint,
    pair_histogram,
    sample,
    squeezer_model_histogram,
    squeezing_levels,
    total_photon_distribution,
)
from photonchip.distributions import enumerate_patterns
from photonchip.errors import CutoffError, FitError, ValidationError
from photonchip.kernels import is_unitary

OFF = (False,) * 4
ONLY0 = (True, False, False, False)


def noiseless(eta=1.0, r=1.0, r2=0.0):
    return ChipSpec.uniform(r=r, eta=eta, nbar=0.0, r2=r2)


def total_pmf_oracle(spec, job, nmax):
    """Total-photon distribution from the Gaussian generating function plus Poisson noise."""
    pmf = np.zeros(nmax + 1)
    pmf[0] = 1
    for s in build_schmidt_states(spec, job):
        pmf = np.convolve(pmf, gc.total_photon_pmf(s, nmax))[: nmax + 1]
    return np.convolve(pmf, poisson.pmf(np.arange(nmax + 1), sum(spec.noise_nbar)))[: nmax + 1]


# --- specs ---------------------------------------------------------------------


def test_default_chip_matches_tables(default_chip):
    assert default_chip.eta == (0.154, 0.120, 0.173, 0.139, 0.152, 0.128, 0.197, 0.170)
    assert default_chip.noise_nbar == (0.0205, 0.0091, 0.0131, 0.0193, 0.0223, 0.0175, 0.0158, 0.0187)
    assert default_chip.squeezing_r1 == (1.162, 1.101, 1.050, 1.005)
    assert default_chip.squeezing_r2 == (0.345, 0.367, 0.393, 0.336)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(eta=(0.0,) * 8),
        dict(eta=(1.1,) * 8),
        dict(noise_nbar=(-0.1,) * 8),
        dict(squeezing_r2=(2.0,) * 4),
        dict(eta=(0.5,) * 7),
    ],
)
def test_chip_validation(default_chip, kwargs):
    d = default_chip.to_dict()
    d.update({k: list(v) for k, v in kwargs.items()})
    with pytest.raises(ValidationError):
        ChipSpec.from_dict(d)


def test_spec_json_round_trip(tmp_path, default_chip, U1):
    dump_json(default_chip.to_dict(), tmp_path / "chip.json")
    assert ChipSpec.from_dict(load_json(tmp_path / "chip.json")) == default_chip
    job = JobSpec(unitary=U1, squeezers_on=ONLY0, shots=10, total_cutoff=6, seed=2**63, squeezing=(1, 1, 1, 1))
    dump_json(job.to_dict(), tmp_path / "job.json")
    back = JobSpec.from_dict(load_json(tmp_path / "job.json"))
    assert np.array_equal(back.unitary, job.unitary)
    assert back.to_dict() == job.to_dict()
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ValidationError):
        load_json(tmp_path / "bad.json")


def test_job_unitary_projection(U1):
    job = JobSpec(unitary=U1)
    assert is_unitary(job.unitary, 1e-12)
    assert np.max(np.abs(job.unitary - U1)) < 1e-3
    bad = np.eye(4)
    bad[0, 1] = 0.5
    with pytest.raises(ValidationError, match="unitary"):
        JobSpec(unitary=bad)


@pytest.mark.parametrize(
    "kwargs", [dict(shots=-1), dict(total_cutoff=0), dict(seed=-1), dict(seed=2**64), dict(squeezing=(5, 0, 0, 0))]
)
def test_job_validation(kwargs):
    with pytest.raises(ValidationError):
        JobSpec(**kwargs)


def test_squeezing_override_scales_secondary(default_chip):
    r1, r2 = squeezing_levels(default_chip, JobSpec(squeezing=(0.5,) * 4, squeezers_on=(True, True, False, True)))
    assert np.allclose(r1, [0.5, 0.5, 0, 0.5])
    assert r2[0] == pytest.approx(0.5 * 0.345 / 1.162)
    assert r2[2] == 0


# --- states --------------------------------------------------------------------


def test_schmidt_states_all_off(default_chip):
    for s in build_schmidt_states(default_chip, JobSpec(squeezers_on=OFF)):
        assert np.allclose(s.sigma, np.eye(16) / 2)


def test_schmidt_states_locality(default_chip):
    s1, _ = build_schmidt_states(default_chip, JobSpec(squeezers_on=ONLY0))
    dev = np.abs(s1.sigma - np.eye(16) / 2) > 1e-14
    touched = {i % 8 for i in np.flatnonzero(dev.any(axis=1))}
    assert touched == {0, 4}


def test_default_mode0_mean(default_chip):
    s1, s2 = build_schmidt_states(default_chip, JobSpec())
    mean0 = gc.photon_moments(s1)[0][0] + gc.photon_moments(s2)[0][0]
    assert mean0 == pytest.approx(0.154 * (math.sinh(1.162) ** 2 + math.sinh(0.345) ** 2), rel=1e-12)


# --- exact distributions -------------------------------------------------------------


def test_exact_vacuum_cases(default_chip):
    dist = exact_pattern_distribution(noiseless(), JobSpec(squeezers_on=OFF))
    assert dist.prob((0,) * 8) == 1.0
    noisy_off = exact_pattern_distribution(default_chip, JobSpec(squeezers_on=OFF, total_cutoff=4))
    assert noisy_off.prob((0,) * 8) == pytest.approx(math.exp(-sum(default_chip.noise_nbar)), rel=1e-12)
    assert noisy_off.prob((0,) * 8) == pytest.approx(0.8726, abs=1e-4)


def test_single_tmsv_total_distribution():
    spec = noiseless(r=1.0)
    tot = dict(total_photon_distribution(spec, JobSpec(squeezers_on=ONLY0, total_cutoff=8)))
    for n in range(9):
        expected = math.tanh(1) ** n / math.cosh(1) ** 2 if n % 2 == 0 else 0.0
        assert tot[n] == pytest.approx(expected, abs=1e-12)


def test_lossy_noisy_pair_matches_analytic_model():
    eta, r1, r2, nbar = 0.3, 0.9, 0.3, 0.05
    spec = ChipSpec((r1,) * 4, (r2,) * 4, (eta,) * 8, (nbar, 0, 0, 0, nbar, 0, 0, 0))
    dist = exact_pattern_distribution(spec, JobSpec(squeezers_on=ONLY0, total_cutoff=8))
    model = squeezer_model_histogram(r1, r2, eta, nbar, cutoff=8)
    for pat, p in dist.as_dict().items():
        assert p == pytest.approx(model[pat[0], pat[4]], abs=1e-12)


def test_exact_total_marginal_matches_generating_function(default_chip, U1):
    for U in (np.eye(4), U1):
        job = JobSpec(unitary=U, total_cutoff=6)
        dist = exact_pattern_distribution(default_chip, job)
        assert np.allclose(dist.total_photon_marginal(), total_pmf_oracle(default_chip, job, 6), atol=1e-12)
        assert dist.tail_mass == pytest.approx(1 - total_pmf_oracle(default_chip, job, 6).sum(), abs=1e-12)


def test_default_total_marginal_shape(default_chip):
    tot = exact_pattern_distribution(default_chip, JobSpec(total_cutoff=6)).total_photon_marginal()
    mode = int(np.argmax(tot))
    assert np.all(np.diff(tot[mode:]) < 0)
    assert tot[1] > 0 and tot[3] > 0


def test_loss_commutes_with_uniform_interferometer(U1):
    eta, r = 0.4, 0.7
    spec = noiseless(eta=eta, r=r)
    job = JobSpec(unitary=U1, squeezers_on=(True, True, False, False), total_cutoff=4)
    dist = exact_pattern_distribution(spec, job)
    s = gc.vacuum(8)
    for i in (0, 1):
        s = gc.apply_two_mode_squeezing(s, i, i + 4, r)
    s = gc.apply_interferometer(gc.apply_interferometer(s, job.unitary, range(4)), job.unitary, range(4, 8))
    for m in range(8):
        s = gc.apply_loss(s, m, eta)
    pats = enumerate_patterns(8, 4)
    after = gc.fock_probabilities(s, pats)
    lookup = dist.as_dict()
    ours = np.array([lookup.get(tuple(p), 0.0) for p in pats.tolist()])
    assert 0.5 * np.abs(after - ours).sum() < 1e-9


def test_signal_idler_symmetry():
    dist = exact_pattern_distribution(ChipSpec.uniform(r=1.0, eta=0.3, nbar=0.01, r2=0.3), JobSpec(total_cutoff=6))
    pats, p = dist.patterns, dist.probs
    for i in range(4):
        a = np.bincount(pats[:, i], weights=p, minlength=7)
        b = np.bincount(pats[:, i + 4], weights=p, minlength=7)
        assert np.allclose(a, b, atol=1e-13)


def test_cutoff_budget_refusal(default_chip):
    with pytest.raises(CutoffError):
        exact_pattern_distribution(default_chip, JobSpec(total_cutoff=12))


# --- sampling --------------------------------------------------------------------


def test_sampler_trivial_and_deterministic(default_chip):
    assert not sample(noiseless(), JobSpec(squeezers_on=OFF, shots=500)).any()
    assert sample(default_chip, JobSpec(shots=0)).shape == (0, 8)
    job = JobSpec(shots=70_000, seed=11)
    a, b = sample(default_chip, job), sample(default_chip, job, workers=3)
    assert a.shape == (70_000, 8) and a.dtype == np.int64
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample(default_chip, JobSpec(shots=70_000, seed=12)))


def test_sampler_tail_guard(default_chip):
    with pytest.raises(CutoffError, match="increase total_cutoff"):
        sample(default_chip, JobSpec(total_cutoff=6, shots=10))


def _tvd_with_overflow(dist, batch):
    keys, counts = np.unique(batch, axis=0, return_counts=True)
    emp = {tuple(k): c / len(batch) for k, c in zip(keys.tolist(), counts)}
    exact = dist.as_dict()
    over_emp = sum(v for k, v in emp.items() if sum(k) > dist.cutoff)
    inside = sum(abs(exact.get(k, 0) - emp.get(k, 0)) for k in set(exact) | {k for k in emp if sum(k) <= dist.cutoff})
    return 0.5 * (inside + abs(dist.tail_mass - over_emp))


def _tvd_floor(dist, shots, rng, reps=20):
    p = np.append(dist.probs, dist.tail_mass)
    p = p / p.sum()
    vals = [0.5 * np.abs(rng.multinomial(shots, p) / shots - p).sum() for _ in range(reps)]
    return np.mean(vals), np.std(vals, ddof=1)


@pytest.mark.slow
def test_sampler_tvd_below_0p02(default_chip):
    job = JobSpec(shots=100_000, seed=1)
    dist = exact_pattern_distribution(default_chip, job)
    observed = _tvd_with_overflow(dist, sample(default_chip, job))
    assert observed < 0.02


@pytest.mark.slow
def test_sampler_tvd_at_multinomial_floor(default_chip):
    job = JobSpec(shots=100_000, seed=1)
    dist = exact_pattern_distribution(default_chip, job)
    observed = _tvd_with_overflow(dist, sample(default_chip, job))
    mean, sd = _tvd_floor(dist, job.shots, np.random.default_rng(0))
    assert abs(observed - mean) < 5 * sd + 0.003


@pytest.mark.slow
def test_sampler_total_photon_marginal(default_chip):
    job = JobSpec(shots=100_000, seed=2)
    tot = exact_pattern_distribution(default_chip, job).total_photon_marginal()
    emp = np.bincount(sample(default_chip, job).sum(axis=1), minlength=30)[: len(tot)] / job.shots
    assert 0.5 * np.abs(emp - tot).sum() < 0.02


@pytest.mark.slow
def test_sample_means_match_moments(default_chip):
    job = JobSpec(shots=100_000, seed=3, total_cutoff=10)
    batch = sample(default_chip, job)
    expected = sum(gc.photon_moments(s)[0] for s in build_schmidt_states(default_chip, job))
    expected = expected + np.array(default_chip.noise_nbar)
    se = batch.std(axis=0, ddof=1) / math.sqrt(len(batch))
    assert np.all(np.abs(batch.mean(axis=0) - expected) < 3 * se)


# --- squeezer model fit --------------------------------------------------------------


def test_lossy_tmsv_joint_lossless():
    P = lossy_tmsv_joint(0.8, 1.0, 6)
    assert np.allclose(np.diag(P), [math.tanh(0.8) ** (2 * n) / math.cosh(0.8) ** 2 for n in range(7)])
    assert np.allclose(P - np.diag(np.diag(P)), 0)


@pytest.mark.parametrize("theta", [(1.1, 0.35, 0.15, 0.02), (1.162, 0.345, 0.154, 0.0205), (0.8, 0.2, 0.3, 0.05)])
def test_fit_exact_histogram(theta):
    fit = fit_squeezer_model(squeezer_model_histogram(*theta) * 1e6)
    assert np.allclose(fit, theta, rtol=1e-4, atol=1e-6)


def test_fit_noiseless_lossless_boundary():
    fit = fit_squeezer_model(squeezer_model_histogram(1.0, 0.0, 1.0, 0.0) * 1e6)
    assert fit.eta == pytest.approx(1.0, abs=1e-6)
    assert fit.nbar == pytest.approx(0.0, abs=1e-6)
    assert fit.r1 == pytest.approx(1.0, abs=1e-5)


def test_fit_degenerate():
    H = np.zeros((9, 9))
    H[0, 0] = 100
    with pytest.raises(FitError):
        fit_squeezer_model(H)
    with pytest.raises(FitError):
        fit_squeezer_model(np.zeros((9, 9)))


def _fit_from_samples(spec, seed):
    job = JobSpec(shots=10**6, seed=seed, squeezers_on=ONLY0, total_cutoff=24)
    return fit_squeezer_model(pair_histogram(sample(spec, job), 0, 4))


def _cramer_rao(theta, shots):
    def probs(t):
        P = squeezer_model_histogram(*t)
        return (P / P.sum()).ravel()

    theta = np.asarray(theta, dtype=float)
    p0 = probs(theta)
    J = np.array([(probs(theta + h) - probs(theta - h)) / (2 * 1e-6) for h in np.eye(4) * 1e-6])
    return np.sqrt(np.diag(np.linalg.inv(shots * (J / p0) @ J.T)))


@pytest.mark.slow
def test_fit_recovers_parameters_within_5_percent():
    theta = (1.1, 0.35, 0.15, 0.02)
    fit = _fit_from_samples(ChipSpec.uniform(r=1.1, r2=0.35, eta=0.15, nbar=0.02), seed=1)
    assert np.all(np.abs(np.array(fit) - theta) <= 0.05 * np.array(theta))


@pytest.mark.slow
def test_fit_within_information_bound():
    theta = (1.1, 0.35, 0.15, 0.02)
    sigma = _cramer_rao(theta, 10**6)
    fit = _fit_from_samples(ChipSpec.uniform(r=1.1, r2=0.35, eta=0.15, nbar=0.02), seed=1)
    assert np.all(np.abs(np.array(fit) - theta) < 3 * sigma)
    assert abs(fit.r1 - 1.1) < 0.05 * 1.1 and abs(fit.eta - 0.15) < 0.05 * 0.15


@pytest.mark.slow
def test_fit_default_pair_round_trip(default_chip):
    fit = _fit_from_samples(default_chip, seed=2)
    eta = 0.5 * (default_chip.eta[0] + default_chip.eta[4])
    nbar = 0.5 * (default_chip.noise_nbar[0] + default_chip.noise_nbar[4])
    theta = (1.162, 0.345, eta, nbar)
    sigma = _cramer_rao(theta, 10**6)
    assert np.all(np.abs(np.array(fit) - theta) < 3 * sigma + np.array([0, 0, 0.002, 0.002]))


def test_pair_histogram():
    s = np.array([[1, 0, 0, 0, 1, 0, 0, 0], [0, 0, 0, 0, 9, 0, 0, 0], [2, 0, 0, 0, 0, 0, 0, 0]])
    H = pair_histogram(s, 0, 4, cutoff=8)
    assert H.sum() == 2 and H[1, 1] == 1 and H[2, 0] == 1

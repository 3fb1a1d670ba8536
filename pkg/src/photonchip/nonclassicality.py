"""Classical-simulability test for a lossy, noisy squeezed-light sampler.

A device with per-mode transmissivity ``eta``, single-mode squeezing ``r`` and
excess-click probability ``p`` is efficiently simulable to error ``eps`` by
classical states when::

    sum_i ln((x_i + 1/x_i) / 2) < eps^2 / 4,
    x_i = sqrt((eta_i exp(-2 r_i) + 1 - eta_i) / (1 - 2 p_i))

The smallest ``eps`` satisfying the bound, ``eps0 = 2 sqrt(lhs)``, measures
the distance of the output from the nearest classical state.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .device import NUM_SQUEEZERS, ChipSpec
from .errors import ValidationError


@dataclass(frozen=True)
class NoiseModelParams:
    eta: tuple[float, ...]
    r: tuple[float, ...]
    p_dark: tuple[float, ...]

    def __post_init__(self):
        eta, r, p = (tuple(float(v) for v in x) for x in (self.eta, self.r, self.p_dark))
        if not len(eta) == len(r) == len(p) or not eta:
            raise ValidationError("eta, r and p_dark must be non-empty and of equal length")
        if any(not 0 <= e <= 1 for e in eta):
            raise ValidationError("transmissivities must lie in [0, 1]")
        if any(v < 0 or not math.isfinite(v) for v in r):
            raise ValidationError("squeezing levels must be finite and non-negative")
        if any(not 0 <= v < 0.5 for v in p):
            raise ValidationError("excess-click probabilities must lie in [0, 0.5)")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "p_dark", p)


def x_factor(eta: float, r: float, p_dark: float) -> float:
    if not 0 <= p_dark < 0.5:
        raise ValidationError(f"p_dark = {p_dark} must lie in [0, 0.5)")
    if not 0 <= eta <= 1:
        raise ValidationError(f"eta = {eta} must lie in [0, 1]")
    return math.sqrt((eta * math.exp(-2 * r) + 1 - eta) / (1 - 2 * p_dark))


def classicality_lhs(params: NoiseModelParams) -> float:
    x = np.array([x_factor(e, r, p) for e, r, p in zip(params.eta, params.r, params.p_dark)])
    return float(np.sum(np.log((x + 1 / x) / 2)))


@dataclass(frozen=True)
class TestReport:
    lhs: float
    rhs: float
    epsilon: float
    epsilon0: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "epsilon": self.epsilon,
            "epsilon0": self.epsilon0,
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def passes_test(params: NoiseModelParams, epsilon: float) -> TestReport:
    """The device is non-classical at error ``epsilon`` when ``lhs >= epsilon**2 / 4``."""
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive")
    lhs = classicality_lhs(params)
    rhs = epsilon**2 / 4
    return TestReport(lhs, rhs, float(epsilon), 2 * math.sqrt(lhs), lhs >= rhs)


def dark_click_probability(nbar: float) -> float:
    """At-least-one-photon probability of Poisson noise with mean ``nbar``."""
    return -math.expm1(-nbar)


def chip_params_to_test_model(spec: ChipSpec) -> NoiseModelParams:
    """Per detected mode: the pair's dominant-Schmidt squeezing, the mode's
    transmissivity, and the threshold-detector click probability of its noise."""
    r = tuple(spec.squeezing_r1[m % NUM_SQUEEZERS] for m in range(8))
    p = tuple(dark_click_probability(n) for n in spec.noise_nbar)
    return NoiseModelParams(spec.eta, r, p)

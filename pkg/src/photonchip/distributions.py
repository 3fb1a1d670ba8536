"""Photon-number pattern distributions truncated at a total-photon cutoff."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np
from scipy.stats import poisson

from .errors import ValidationError


@lru_cache(maxsize=64)
def _enumerate(M: int, cutoff: int) -> np.ndarray:
    rows = []
    for total in range(cutoff + 1):
        for comb in itertools.combinations_with_replacement(range(M), total):
            rows.append(np.bincount(comb, minlength=M))
    out = np.array(rows, dtype=np.int64).reshape(-1, M)
    out.setflags(write=False)
    return out


def enumerate_patterns(M: int, cutoff: int) -> np.ndarray:
    """All length-``M`` patterns with at most ``cutoff`` photons, ordered by total."""
    if M < 1 or cutoff < 0:
        raise ValidationError("need M >= 1 and cutoff >= 0")
    return _enumerate(int(M), int(cutoff))


def pattern_keys(patterns: np.ndarray, cutoff: int) -> np.ndarray:
    """Mixed-radix integer keys; digit-wise sums of patterns within the cutoff never carry."""
    patterns = np.asarray(patterns, dtype=np.int64)
    base = (cutoff + 1) ** np.arange(patterns.shape[1], dtype=np.int64)
    return patterns @ base


@dataclass(eq=False)
class PatternDistribution:
    """Probabilities of every pattern with total photon number <= ``cutoff``.

    ``tail_mass`` is the probability carried by patterns above the cutoff
    (``1 - probs.sum()`` for exact distributions).
    """

    patterns: np.ndarray
    probs: np.ndarray
    cutoff: int
    tail_mass: float

    @property
    def num_modes(self) -> int:
        return self.patterns.shape[1]

    @property
    def totals(self) -> np.ndarray:
        return self.patterns.sum(axis=1)

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(x) for x in p): float(q) for p, q in zip(self.patterns, self.probs)}

    def prob(self, pattern: Iterable[int]) -> float:
        pattern = np.asarray(list(pattern), dtype=np.int64)
        if pattern.sum() > self.cutoff:
            raise ValidationError("pattern lies above the distribution cutoff")
        key = pattern_keys(pattern[None, :], self.cutoff)[0]
        keys = pattern_keys(self.patterns, self.cutoff)
        hit = np.flatnonzero(keys == key)
        return float(self.probs[hit[0]]) if hit.size else 0.0

    def total_photon_marginal(self) -> np.ndarray:
        return np.bincount(self.totals, weights=self.probs, minlength=self.cutoff + 1)

    def restrict_total(self, total: int) -> "PatternDistribution":
        sel = self.totals == total
        return PatternDistribution(self.patterns[sel], self.probs[sel], self.cutoff, self.tail_mass)

    def embed(self, modes: np.ndarray, M: int) -> "PatternDistribution":
        """Lift a distribution on a subset of modes into ``M`` modes (others vacuum)."""
        full = np.zeros((len(self.patterns), M), dtype=np.int64)
        full[:, modes] = self.patterns
        return PatternDistribution(full, self.probs, self.cutoff, self.tail_mass)


def convolve(p: np.ndarray, q: np.ndarray, patterns: np.ndarray, cutoff: int) -> np.ndarray:
    """Distribution of ``S1 + S2`` for independent ``S1 ~ p`` and ``S2 ~ q``.

    ``p`` and ``q`` are probability vectors over the same ``patterns`` table
    (as returned by :func:`enumerate_patterns`); the result is on that table too.
    """
    keys = pattern_keys(patterns, cutoff)
    order = np.argsort(keys)
    sorted_keys = keys[order]
    totals = patterns.sum(axis=1)
    out = np.zeros(len(patterns))
    nz_p = np.flatnonzero(p)
    nz_q = np.flatnonzero(q)
    for t1 in np.unique(totals[nz_p]):
        i = nz_p[totals[nz_p] == t1]
        j = nz_q[totals[nz_q] <= cutoff - t1]
        if not j.size:
            continue
        ksum = (keys[i][:, None] + keys[j][None, :]).ravel()
        w = (p[i][:, None] * q[j][None, :]).ravel()
        pos = order[np.searchsorted(sorted_keys, ksum)]
        out += np.bincount(pos, weights=w, minlength=len(patterns))
    return out


def poisson_pattern_probs(patterns: np.ndarray, nbar: np.ndarray) -> np.ndarray:
    """Independent per-mode Poisson probabilities for each pattern."""
    nbar = np.asarray(nbar, dtype=float)
    return np.prod(poisson.pmf(patterns, nbar[None, :]), axis=1)

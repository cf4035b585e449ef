"""Sign patterns at worst-case perturbations, growth counts, shattering and Sauer-type bounds."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError
from .normkit import ExponentLike, as_exponent, c2_const
from .perturb import (RELU, NetParams, PerturbSpec, SearchBudget, SignPattern,
                      net_adversarial_exact_r2, net_adversarial_exact_r2_batch, net_adversarial_search)
from .rademacher import Sample

SAUER_MAX_N = 60


def sign_pattern(net: NetParams, x, y: float, pert: PerturbSpec,
                 budget: SearchBudget = SearchBudget()) -> SignPattern:
    """(P, Z, N) split of the neurons at the worst-case perturbation of x."""
    if pert.r.value == 2.0:
        return net_adversarial_exact_r2(net, x, y, pert.eps).pattern
    return net_adversarial_search(net, x, y, pert, budget).pattern


def pattern_codes(sample: Sample, net: NetParams, pert: PerturbSpec,
                  budget: SearchBudget = SearchBudget()) -> list:
    """Pattern code of every sample point, in sample order."""
    if pert.r.value == 2.0:
        return list(net_adversarial_exact_r2_batch(net, sample.X, sample.y, pert.eps).codes)
    return [net_adversarial_search(net, sample.X[:, i], sample.y[i], pert, budget).pattern.code
            for i in range(sample.m)]


@dataclass
class PartitionSummary:
    """Sample points grouped by the sign pattern they induce."""

    parts: dict  # pattern code -> sorted list of sample indices

    @property
    def patterns(self) -> dict:
        return {code: len(idx) for code, idx in self.parts.items()}

    @property
    def pi(self) -> int:
        return len(self.parts)

    def canonical(self) -> tuple:
        """Hashable encoding of the labelled partition, independent of insertion order."""
        return tuple(sorted((code, tuple(idx)) for code, idx in self.parts.items()))

    def to_dict(self) -> dict:
        return {"pi": self.pi, "patterns": self.patterns,
                "parts": {code: list(idx) for code, idx in sorted(self.parts.items())}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def summarise_codes(codes: Sequence[str]) -> PartitionSummary:
    parts: dict = {}
    for i, code in enumerate(codes):
        parts.setdefault(code, []).append(i)
    return PartitionSummary(parts)


def growth_function(sample: Sample, net: NetParams, pert: PerturbSpec,
                    budget: SearchBudget = SearchBudget()) -> PartitionSummary:
    return summarise_codes(pattern_codes(sample, net, pert, budget))


def positive_sets(codes: Iterable[str]) -> tuple:
    """(distinct P-sets among codes with Z empty, number of codes excluded for a nonempty Z)."""
    sets, excluded = set(), 0
    for code in codes:
        pat = SignPattern.from_code(code)
        if pat.Z:
            excluded += 1
        else:
            sets.add(frozenset(pat.P))
    return sets, excluded


def shatters(sets: Iterable[frozenset], subset: Sequence[int]) -> bool:
    """True when the traces of `sets` on `subset` give every subset of it."""
    sub = frozenset(subset)
    traces = {s & sub for s in sets}
    return len(traces) == 2 ** len(sub)


def largest_shattered(sets: Iterable[frozenset], n: int) -> int:
    """Size of the largest subset of range(n) shattered by `sets` (brute force)."""
    sets = list(sets)
    best = 0
    for k in range(1, n + 1):
        if len(sets) < 2 ** k:
            break
        if any(shatters(sets, c) for c in itertools.combinations(range(n), k)):
            best = k
        else:
            break  # subsets of a shattered set are shattered, so sizes are contiguous
    return best


def is_adversarially_shattered(sample: Sample, net: NetParams, pert: PerturbSpec,
                               budget: SearchBudget = SearchBudget()) -> bool:
    """Every subset of the neurons occurs as the positive set of some point with Z empty."""
    if sample.m < 2 ** net.n:
        return False
    sets, _ = positive_sets(pattern_codes(sample, net, pert, budget))
    return len(sets) == 2 ** net.n


def sauer_bound(n: int, t: int) -> int:
    """sum_{i <= t} C(n, i), exactly."""
    if n < 0 or t < 0:
        raise ValueError("n and t must be >= 0")
    if n > SAUER_MAX_N:
        raise OverflowError(f"n = {n} exceeds the supported {SAUER_MAX_N}")
    return sum(math.comb(n, i) for i in range(min(t, n) + 1))


def orthogonal_capacity_bound(tau: float, p: ExponentLike, X_norm_p_inf: float, eps: float,
                              w_min: float) -> float:
    """Largest shatterable sample size for orthogonal weights: 4 tau^2 c2(p*)^2 ||X||^2 / (eps w_min)^2."""
    p = as_exponent(p)
    if min(tau, X_norm_p_inf, eps, w_min) <= 0:
        raise ValueError("all inputs must be > 0")
    if p.inv == 1:
        raise DomainError("needs p > 1")
    c2 = c2_const(p.dual().value)
    return 4 * tau ** 2 * c2 ** 2 * X_norm_p_inf ** 2 / (eps ** 2 * w_min ** 2)


@dataclass
class ShatterStats:
    """Partition counts over a finite candidate set; both are lower estimates of the suprema."""

    c_star_estimate: int
    pi_star: int
    candidates: int
    summaries: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"c_star_estimate": self.c_star_estimate, "pi_star": self.pi_star,
                "candidates": self.candidates, "lower_estimates": True}


def partition_stats(sample: Sample, pert: PerturbSpec, candidates: Sequence[NetParams],
                    budget: SearchBudget = SearchBudget()) -> ShatterStats:
    if not candidates:
        raise ValueError("candidates must be non-empty")
    summaries = [growth_function(sample, net, pert, budget) for net in candidates]
    distinct = {s.canonical() for s in summaries}
    return ShatterStats(len(distinct), max(s.pi for s in summaries), len(candidates), summaries)

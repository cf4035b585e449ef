"""Closed-form complexity bounds and the robust margin generalization bound.

The clean Rademacher terms can be taken either from the analytic linear bound
(``mode="analytic"``) or from a Monte Carlo estimate (``mode="mc"``).
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, HypothesisViolated
from .normkit import (as_exponent, c1_const, c2_const, group_norm, lp_norm, norm_ratio_factor,
                      norm_ratio_sup)
from .perturb import PerturbSpec
from .rademacher import (LinearFamilySpec, NetFamilySpec, Sample, relu_lower_direction,
                         standard_linear_complexity)

MODES = ("analytic", "mc")
VARIANTS = ("infty_norm", "two_norm")


@dataclass
class BoundReport:
    name: str
    value: float
    components: dict = field(default_factory=dict)
    inputs_digest: str = ""

    def __getitem__(self, key):
        return self.components[key]

    def to_dict(self) -> dict:
        out = {"name": self.name, "value": self.value, "inputs_digest": self.inputs_digest}
        out.update(self.components)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def inputs_digest(sample: Sample, *specs, **extra) -> str:
    h = hashlib.sha256(sample.digest().encode())
    for s in specs:
        h.update(json.dumps(s.to_dict() if hasattr(s, "to_dict") else s, sort_keys=True).encode())
    h.update(json.dumps(extra, sort_keys=True, default=str).encode())
    return h.hexdigest()


def _pert_dict(pert: PerturbSpec) -> dict:
    return {"r": pert.r.to_json(), "eps": pert.eps}


def dimension_factor(p, r, d: int) -> float:
    """max(1, d^(1 - 1/p - 1/r))."""
    return norm_ratio_factor(p, r, d)


# ---------------------------------------------------------------- linear class

def _linear_rc_values(X: np.ndarray, p, W: float):
    """(case-selected bound, classical bound or None) for the clean linear class."""
    p = as_exponent(p)
    d, m = X.shape
    q = p.dual().value
    feature_norms = lp_norm(X.T, 2, axis=0)  # 2-norm of each feature across the sample
    if p.inv == 1:
        new = W / m * math.sqrt(2 * math.log(2 * d)) * float(feature_norms.max())
        classical = W * math.sqrt(2 * math.log(2 * d) / m) * float(np.abs(X).max())
    elif p.value <= 2:
        new = math.sqrt(2.0) * W / m * math.exp((math.lgamma((q + 1) / 2) - 0.5 * math.log(math.pi)) / q) \
            * float(lp_norm(feature_norms, q))
        classical = W / m * c1_const(q) * group_norm(X, q, 2)
    else:
        new = W / m * float(lp_norm(feature_norms, q))
        classical = None
    return new, classical


def linear_rc_bounds(sample: Sample, spec: LinearFamilySpec) -> BoundReport:
    """Bound on the clean Rademacher complexity of {x -> <w, x> : ||w||_p <= W}.

    For p <= 2 the classical bound is reported alongside, with a flag telling which is smaller.
    """
    new, classical = _linear_rc_values(sample.X, spec.p, spec.W)
    comps = {"new_bound": new}
    if classical is not None:
        comps["classical_bound"] = classical
        # the two coincide at p = 2, so ties up to rounding count as not larger
        comps["new_is_smaller"] = bool(new <= classical * (1 + 1e-12))
    return BoundReport("linear_rc", new, comps, inputs_digest(sample, spec))


def clean_linear_term(sample: Sample, spec: LinearFamilySpec, mode: str = "analytic",
                      draws: int = 2000, seed: int = 0, workers: int = 1) -> float:
    if mode == "analytic":
        return _linear_rc_values(sample.X, spec.p, spec.W)[0]
    if mode == "mc":
        return standard_linear_complexity(sample, spec, draws, seed, workers).mean
    raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def adversarial_linear_bounds(sample: Sample, spec: LinearFamilySpec, pert: PerturbSpec,
                              mode: str = "analytic", draws: int = 2000, seed: int = 0,
                              clean: Optional[float] = None, workers: int = 1) -> BoundReport:
    """Upper and lower bounds on the adversarial complexity of the linear class.

    `clean` overrides the clean complexity term; otherwise it comes from `mode`.
    """
    if clean is None:
        clean = clean_linear_term(sample, spec, mode, draws, seed, workers)
    factor = dimension_factor(spec.p, pert.r, sample.d)
    root_m = math.sqrt(sample.m)
    dim_upper = pert.eps * spec.W * factor / (2 * root_m)
    dim_lower = pert.eps * spec.W * factor / (2 * math.sqrt(2) * root_m)
    upper = clean + dim_upper
    lower = max(clean, dim_lower)
    comps = {"clean_term": clean, "dimension_term": dim_upper, "lower_dimension_term": dim_lower,
             "upper": upper, "lower": lower, "dimension_factor": factor}
    digest = inputs_digest(sample, spec, _pert_dict(pert), mode=mode, draws=draws, seed=seed)
    return BoundReport("adversarial_linear", upper, comps, digest)


# ---------------------------------------------------------------- single ReLU unit

def pruned_indices(sample: Sample, pert: PerturbSpec) -> np.ndarray:
    """Indices with y = -1, or y = +1 and ||x||_r > eps; the others never contribute."""
    norms = lp_norm(sample.X, pert.r, axis=0)
    return np.flatnonzero((sample.y < 0) | (norms > pert.eps))


def relu_bounds(sample: Sample, spec: LinearFamilySpec, pert: PerturbSpec, delta_refine: float = 0.0,
                mode: str = "analytic", draws: int = 2000, seed: int = 0, workers: int = 1) -> BoundReport:
    """Upper bound, best-found lower bound and the margin-refined lower bound for a single ReLU.

    The clean term is the linear complexity on the pruned subset, normalised by its own size.
    The lower bound is attained at a concrete unit direction, so it is valid however coarse the
    direction search is.
    """
    if delta_refine < 0:
        raise ValueError("delta_refine must be >= 0")
    m, d = sample.m, sample.d
    eps = pert.eps
    keep = pruned_indices(sample, pert)
    clean = 0.0
    if keep.size:
        clean = clean_linear_term(sample.subset(keep), spec, mode, draws, seed, workers)
    ratio = norm_ratio_sup(spec.p, pert.r, d)
    dim = eps * spec.W * ratio.value / (2 * math.sqrt(m))
    upper = clean + dim

    best, s_best = relu_lower_direction(sample, spec.p, pert.r, eps, seed)
    lower = spec.W / (2 * math.sqrt(2) * m) * best

    s_star = ratio.witness
    dual_norm = float(lp_norm(s_star, pert.r.dual()))
    y = sample.y
    margin = s_star @ sample.X - (1 + delta_refine * y) * y * eps * dual_norm
    t_delta = int(np.count_nonzero(margin > 0))
    pre = spec.W * delta_refine * eps / (2 * math.sqrt(2) * m) * dual_norm
    comps = {"clean_term": clean, "dimension_term": dim, "upper": upper, "lower": lower,
             "pruned_size": int(keep.size), "refined_lower": pre * math.sqrt(t_delta),
             "refined_lower_as_printed": pre * t_delta, "refined_set_size": t_delta,
             "delta": float(delta_refine)}
    digest = inputs_digest(sample, spec, _pert_dict(pert), mode=mode, draws=draws, seed=seed,
                           delta=delta_refine)
    return BoundReport("relu", upper, comps, digest)


# ---------------------------------------------------------------- one-hidden-layer networks

def _log_term(d: int, n: int, log_arg: float) -> float:
    return 1.0 + math.sqrt(d * (n + 1) * math.log(log_arg))


def net_lipschitz_bound(sample: Sample, spec: NetFamilySpec, pert: PerturbSpec) -> BoundReport:
    """Covering-number bound for networks with a Lipschitz activation vanishing at 0.

    Three log constants are reported: 36 (the value), 9m and 36m.
    """
    act = spec.activation
    if abs(float(act(np.zeros(1))[0])) > 0:
        raise DomainError("activation must vanish at 0")
    d, m, n = sample.d, sample.m, spec.n
    x_norm = group_norm(sample.X, pert.r, math.inf)
    scale = spec.lipschitz * spec.W * spec.Lambda * dimension_factor(spec.p, pert.r, d) \
        * (x_norm + pert.eps) / math.sqrt(m)
    log_term = _log_term(d, n, 36.0)
    comps = {"scale": scale, "log_term": log_term, "x_norm_r_inf": x_norm,
             "log36": scale * log_term,
             "log9m": scale * _log_term(d, n, 9.0 * m),
             "log36m": scale * _log_term(d, n, 36.0 * m)}
    return BoundReport("net_lipschitz", scale * log_term, comps, inputs_digest(sample, spec, _pert_dict(pert)))


def k_const(p, d: int) -> float:
    """Expected dual norm constant: sqrt(2 log 2d) for p = 1, c2(p*) for 1 < p <= 2, 1 for p >= 2."""
    p = as_exponent(p)
    if p.inv == 1:
        return math.sqrt(2 * math.log(2 * d))
    if p.value < 2:
        return c2_const(p.dual().value)
    return 1.0


def check_norm_hypothesis(sample: Sample, pert: PerturbSpec) -> None:
    norms = lp_norm(sample.X, pert.r, axis=0)
    bad = np.flatnonzero(norms < pert.eps)
    if bad.size:
        raise HypothesisViolated(
            f"points {bad.tolist()} violate ||x_i||_r >= eps (eps={pert.eps})", bad.tolist())


def net_shatter_bound(sample: Sample, spec: NetFamilySpec, pert: PerturbSpec, c_star: int,
                      pi_star: int, variant: str = "infty_norm") -> BoundReport:
    """Partition-based bound for ReLU networks, using C* partitions with at most Pi* parts.

    Needs 1 < r < inf and every point to satisfy ||x_i||_r >= eps.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    if spec.activation.name != "relu":
        raise DomainError("the partition bound is for ReLU networks")
    rv = pert.r.value
    if not (1 < rv < math.inf):
        raise DomainError("the partition bound needs 1 < r < inf")
    if c_star < 1 or pi_star < 1:
        raise ValueError("c_star and pi_star must be >= 1")
    check_norm_hypothesis(sample, pert)
    d, m = sample.d, sample.m
    q = spec.p.dual()
    K = k_const(spec.p, d)
    if variant == "infty_norm":
        x_norm = group_norm(sample.X.T, math.inf, q)
        multiplier = c_star * math.sqrt(pi_star)
    else:
        x_norm = max(1.0, math.exp((float(q.inv) - 0.5) * math.log(m))) * group_norm(sample.X, q, 2)
        multiplier = float(c_star * pi_star)
    scale = spec.W * spec.Lambda * dimension_factor(spec.p, pert.r, d) * (K * x_norm + pert.eps) / math.sqrt(m)
    comps = {"scale": scale, "multiplier": multiplier, "K": K, "x_norm": x_norm,
             "c_star": int(c_star), "pi_star": int(pi_star), "variant": variant,
             "partition_counts_are_lower_estimates": True}
    digest = inputs_digest(sample, spec, _pert_dict(pert), c_star=c_star, pi_star=pi_star, variant=variant)
    return BoundReport("net_shatter", scale * multiplier, comps, digest)


# ---------------------------------------------------------------- generalization

@dataclass(frozen=True)
class MarginBoundInputs:
    rho: float
    delta: float
    loss_cap: float
    complexity: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be > 0")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.loss_cap < 0 or self.complexity < 0:
            raise ValueError("loss_cap and complexity must be >= 0")


def margin_loss(x, rho: float):
    """Ramp loss: 1 for x <= 0, 0 for x >= rho, linear in between."""
    out = np.clip(1.0 - np.asarray(x, dtype=float) / rho, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def robust_margin_bound(empirical_margin_risk: float, inputs: MarginBoundInputs, m: int) -> float:
    if m < 1:
        raise ValueError("m must be >= 1")
    confidence = 3 * inputs.loss_cap * math.sqrt(math.log(2 / inputs.delta) / (2 * m))
    return empirical_margin_risk + 2 / inputs.rho * inputs.complexity + confidence


def covering_size_log(R: float, eps: float, d: int) -> float:
    if R <= 0 or eps <= 0:
        raise ValueError("R and eps must be > 0")
    return d * math.log(3 * R / eps)


def covering_size_bound(R: float, eps: float, d: int) -> float:
    """(3R/eps)^d, evaluated through its logarithm (inf when it overflows)."""
    lg = covering_size_log(R, eps, d)
    return math.exp(lg) if lg < 709.0 else math.inf

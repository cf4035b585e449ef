"""Worst-case input perturbations for linear, single-ReLU and one-hidden-layer networks.

Perturbations are written x + eps*s with ||s||_r <= 1.  For networks the label is folded
into the output weights, so every solver minimises sum_j (y u_j) rho(w_j . (x + eps s)).
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import BudgetExceeded, DegenerateDual, DomainError, NoFeasiblePattern, OptimalityViolation
from .normkit import Exponent, ExponentLike, _witness_rows, as_exponent, lp_norm
from .seeding import rng

TAU_ZERO = 1e-9
RANK_TOL = 1e-10
SQRT_CLAMP = 1e-12
TIE_TOL = 1e-12
MAX_NEURONS = 12
# the exact solver squares ||x|| / eps, so the ratio must stay well inside float range
MAX_SCALE_RATIO = 1e150


@dataclass(frozen=True)
class PerturbSpec:
    r: Exponent
    eps: float

    def __init__(self, r: ExponentLike, eps: float):
        eps = float(eps)
        if not (eps >= 0 and math.isfinite(eps)):
            raise ValueError(f"eps must be a finite non-negative number, got {eps}")
        object.__setattr__(self, "r", as_exponent(r))
        object.__setattr__(self, "eps", eps)

    @property
    def rstar(self) -> Exponent:
        return self.r.dual()


@dataclass(frozen=True)
class Activation:
    name: str = "relu"
    alpha: float = 0.0

    def __post_init__(self):
        if self.name not in ("relu", "leaky_relu", "tanh"):
            raise ValueError(f"unknown activation {self.name!r}")
        if self.name == "leaky_relu" and not self.alpha >= 0:
            raise ValueError("leaky_relu slope must be non-negative")

    @property
    def lipschitz(self) -> float:
        return max(1.0, self.alpha) if self.name == "leaky_relu" else 1.0

    def __call__(self, z):
        if self.name == "relu":
            return np.maximum(z, 0.0)
        if self.name == "leaky_relu":
            return np.where(z > 0, z, self.alpha * z)
        return np.tanh(z)

    def deriv(self, z):
        if self.name == "relu":
            return (z > 0).astype(float)
        if self.name == "leaky_relu":
            return np.where(z > 0, 1.0, self.alpha)
        return 1.0 / np.cosh(z) ** 2

    def __str__(self) -> str:
        return f"leaky_relu({self.alpha:g})" if self.name == "leaky_relu" else self.name

    @classmethod
    def parse(cls, text: str) -> "Activation":
        text = text.strip().lower()
        if text.startswith("leaky_relu"):
            arg = text[len("leaky_relu"):].strip("()") or "0.01"
            return cls("leaky_relu", float(arg))
        return cls(text)


RELU = Activation("relu")


@dataclass(frozen=True)
class NetParams:
    """One hidden layer: x -> sum_j u_j rho(w_j . x), with W holding the w_j as columns."""

    W: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=float, ndmin=2)
        u = np.array(self.u, dtype=float).reshape(-1)
        if W.ndim != 2 or W.shape[1] != u.size or u.size < 1:
            raise ValueError(f"W must be d x n with n = len(u) >= 1, got {W.shape} and {u.shape}")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(u))):
            raise ValueError("network parameters must be finite")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "u", u)

    @property
    def d(self) -> int:
        return self.W.shape[0]

    @property
    def n(self) -> int:
        return self.W.shape[1]

    def scaled(self, a: float, b: float) -> "NetParams":
        return NetParams(self.W * a, self.u * b)

    def to_dict(self) -> dict:
        return {"W": self.W.tolist(), "u": self.u.tolist()}


# pattern digits in neuron order
_N, _Z, _P = "0", "1", "2"


@dataclass(frozen=True)
class SignPattern:
    P: tuple
    Z: tuple
    N: tuple

    @property
    def n(self) -> int:
        return len(self.P) + len(self.Z) + len(self.N)

    @property
    def code(self) -> str:
        digits = [""] * self.n
        for j in self.P:
            digits[j] = _P
        for j in self.Z:
            digits[j] = _Z
        for j in self.N:
            digits[j] = _N
        return "".join(digits)

    @classmethod
    def from_code(cls, code: str) -> "SignPattern":
        return cls(tuple(i for i, c in enumerate(code) if c == _P),
                   tuple(i for i, c in enumerate(code) if c == _Z),
                   tuple(i for i, c in enumerate(code) if c == _N))

    @classmethod
    def from_arguments(cls, args, tau: float = TAU_ZERO) -> "SignPattern":
        return cls.from_code(pattern_code(args, tau))

    def __str__(self) -> str:
        return self.code


def pattern_code(args, tau: float = TAU_ZERO) -> str:
    args = np.asarray(args, dtype=float)
    return "".join(_P if a > tau else (_N if a < -tau else _Z) for a in args)


class Method(str, enum.Enum):
    CLOSED_FORM = "closed_form"
    ENUMERATION_R2 = "enumeration_r2"
    SEARCH = "search"


@dataclass
class PerturbResult:
    value: float
    s_star: np.ndarray
    pattern: SignPattern
    on_sphere: bool
    method: Method

    def to_dict(self) -> dict:
        return {"value": self.value, "s_star": self.s_star.tolist(), "pattern": self.pattern.code,
                "on_sphere": self.on_sphere, "method": self.method.value}


# ---------------------------------------------------------------- closed forms

def linear_adversarial_margin(w, x, y: float, spec: PerturbSpec) -> float:
    """Worst-case margin y<w, x + delta> over ||delta||_r <= eps."""
    w = np.asarray(w, dtype=float)
    return float(y * np.dot(w, x) - spec.eps * lp_norm(w, spec.rstar))


def relu_adversarial_margin(w, x, y: float, spec: PerturbSpec) -> float:
    """Worst-case value of y * relu(<w, x + delta>) over ||delta||_r <= eps."""
    w = np.asarray(w, dtype=float)
    return float(y * max(0.0, float(np.dot(w, x)) - spec.eps * y * lp_norm(w, spec.rstar)))


def net_objective(net: NetParams, x, y: float, eps: float, s, activation: Activation = RELU):
    """y * sum_j u_j rho(w_j . (x + eps s)); `s` may carry leading batch axes."""
    z = np.asarray(x, dtype=float) + eps * np.asarray(s, dtype=float)
    return (activation(z @ net.W) * (y * net.u)).sum(axis=-1)


# ---------------------------------------------------------------- exact solver, r = 2

def _span_basis(WZ: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the column span, via pivoted QR."""
    if WZ.shape[1] == 0:
        return np.zeros((WZ.shape[0], 0))
    Q, R, _ = scipy.linalg.qr(WZ, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > RANK_TOL * max(1.0, diag[0])))
    return Q[:, :rank]


def _subset_indicators(k: int) -> np.ndarray:
    # row b marks the members of subset number b (bit j <-> element j)
    return ((np.arange(2 ** k)[:, None] >> np.arange(k)[None, :]) & 1).astype(float)


def _push_to_sphere(base: np.ndarray, direction: np.ndarray) -> Optional[np.ndarray]:
    """Point base + t*direction with unit 2-norm and the largest t, if it exists."""
    a = float(direction @ direction)
    if a == 0.0:
        return None
    b = float(base @ direction)
    c = float(base @ base) - 1.0
    disc = b * b - a * c
    if disc < 0:
        return None
    t = (-b + math.sqrt(disc)) / a
    return base + t * direction


def _zero_level_candidates(W, fold_row, x, eps) -> list:
    """Feasible points where every term with positive weight is inactive.

    Writing s = -x/eps + v, the ReLU arguments are eps * w_j . v, so the question is whether
    the ball of radius 1 around x/eps meets the polyhedral cone {v : w_j . v <= 0}.
    Projecting onto the cone (an NNLS problem by Moreau decomposition) settles it.
    """
    d = W.shape[0]
    c0 = x / eps
    s0 = -c0
    active = fold_row > 0
    out = []
    if np.any(active):
        WA = W[:, active]
        lam, _ = scipy.optimize.nnls(WA, c0)
        polar = WA @ lam
    else:
        polar = np.zeros(d)
    v = c0 - polar
    s_in = -polar
    if s_in @ s_in <= 1.0 + 1e-12:
        out.append(s_in)
        pushed = _push_to_sphere(s0, v)
        if pushed is not None:
            out.append(pushed)
        # directions orthogonal to every w_j leave all arguments unchanged
        if W.shape[1] < d:
            null = scipy.linalg.null_space(W.T)
            if null.shape[1]:
                pushed = _push_to_sphere(s_in, null[:, 0])
                if pushed is not None:
                    out.append(pushed)
    return out


@dataclass
class BatchResult:
    values: np.ndarray
    S: np.ndarray
    codes: list
    on_sphere: np.ndarray


def net_adversarial_exact_r2_batch(net: NetParams, X, y, eps: float,
                                   max_neurons: int = MAX_NEURONS) -> BatchResult:
    """Exact minimisers over the Euclidean ball for the points in the columns of X."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.broadcast_to(np.asarray(y, dtype=float), (X.shape[1],))
    Xr = X.T
    m, d = Xr.shape
    n = net.n
    if net.d != d:
        raise ValueError("input dimension does not match the network")
    if n > max_neurons:
        raise BudgetExceeded(f"{n} neurons exceed the enumeration cap of {max_neurons}")
    W, u = net.W, net.u
    fold = y[:, None] * u[None, :]
    if eps > 0 and m and float(np.abs(Xr).max()) > MAX_SCALE_RATIO * eps:
        raise DomainError(f"eps = {eps!r} is too small relative to the data for the exact solver; "
                          "use eps = 0 for the unperturbed patterns")

    def values_at(S):
        return (np.maximum((Xr + eps * S) @ W, 0.0) * fold).sum(axis=-1)

    if eps == 0.0:
        S = np.zeros((m, d))
        args = Xr @ W
        return BatchResult(values_at(S), S, [pattern_code(a) for a in args], np.zeros(m, dtype=bool))

    best_val = np.full(m, np.inf)
    # every candidate is kept per point: (value, not on sphere, code, s)
    cands = [[] for _ in range(m)]

    for zsize in range(0, min(d, n) + 1):
        for Z in itertools.combinations(range(n), zsize):
            Q = _span_basis(W[:, list(Z)])
            PZx = (Xr @ Q) @ Q.T
            arg = 1.0 - (PZx * PZx).sum(axis=1) / eps ** 2
            ok = arg >= -SQRT_CLAMP
            if not np.any(ok):
                continue
            c = np.sqrt(np.maximum(arg, 0.0))
            rest = [j for j in range(n) if j not in Z]
            ind = _subset_indicators(len(rest))
            G = ind @ (u[rest][:, None] * W[:, rest].T)
            G = G - (G @ Q) @ Q.T
            gnorm = np.linalg.norm(G, axis=1)
            scale = np.abs(u[rest]) @ np.linalg.norm(W[:, rest], axis=0) if rest else 0.0
            keep = gnorm > 1e-12 * max(scale, 1e-300)
            if not np.any(keep):
                continue
            ind, D = ind[keep], G[keep] / gnorm[keep, None]
            # y flips the descent direction for negatively labelled points
            S = -(c[None, :, None] * y[None, :, None] * D[:, None, :] + PZx[None] / eps)
            A = (Xr[None] + eps * S) @ W
            assigned = np.full((len(ind), n), -1.0)
            assigned[:, rest] = np.where(ind > 0, 1.0, -1.0)
            assigned[:, list(Z)] = 0.0
            tau = TAU_ZERO
            cons = np.where(assigned[:, None, :] > 0, A >= -tau,
                            np.where(assigned[:, None, :] < 0, A <= tau, np.abs(A) <= tau)).all(axis=-1)
            norm_ok = np.abs(np.linalg.norm(S, axis=-1) - 1.0) <= 1e-9
            feas = cons & norm_ok & ok[None, :]
            vals = (np.maximum(A, 0.0) * fold[None]).sum(axis=-1)
            for b, i in zip(*np.nonzero(feas)):
                cands[i].append((vals[b, i], S[b, i]))
                best_val[i] = min(best_val[i], vals[b, i])

    for i in range(m):
        if best_val[i] > -TIE_TOL:
            x = Xr[i]
            if x @ x <= eps ** 2:
                cands[i].append((None, -x / eps))
            for s in _zero_level_candidates(W, fold[i], x, eps):
                cands[i].append((None, s))

    values = np.empty(m)
    S_out = np.empty((m, d))
    codes, sphere = [], np.zeros(m, dtype=bool)
    for i in range(m):
        if not cands[i]:
            raise NoFeasiblePattern(f"no feasible sign pattern for point {i}")
        ranked = []
        for _, s in cands[i]:
            v = float((np.maximum((Xr[i] + eps * s) @ W, 0.0) * fold[i]).sum())
            on = abs(float(np.linalg.norm(s)) - 1.0) <= 1e-9
            code = pattern_code((Xr[i] + eps * s) @ W)
            ranked.append((v, on, code, s))
        vmin = min(r[0] for r in ranked)
        tol = TIE_TOL * (1.0 + abs(vmin))
        ties = [r for r in ranked if r[0] <= vmin + tol]
        v, on, code, s = min(ties, key=lambda r: (not r[1], r[2]))
        values[i], S_out[i], sphere[i] = v, s, on
        codes.append(code)
    return BatchResult(values, S_out, codes, sphere)


def net_adversarial_exact_r2(net: NetParams, x, y: float, eps: float,
                             max_neurons: int = MAX_NEURONS) -> PerturbResult:
    """Exact worst-case perturbation of a ReLU network in the Euclidean ball."""
    res = net_adversarial_exact_r2_batch(net, np.asarray(x, dtype=float)[:, None], [y], eps, max_neurons)
    method = Method.CLOSED_FORM if eps == 0 else Method.ENUMERATION_R2
    return PerturbResult(float(res.values[0]), res.S[0].copy(), SignPattern.from_code(res.codes[0]),
                         bool(res.on_sphere[0]), method)


# ---------------------------------------------------------------- search, general r

@dataclass(frozen=True)
class SearchBudget:
    restarts: int = 32
    steps: int = 500
    step_scale: float = 0.1
    seed: int = 0
    polish: bool = True


def sample_r_ball(d: int, r: ExponentLike, count: int, seed: int) -> np.ndarray:
    """`count` points of the unit r-ball in R^d, one per row.

    Directions come from i.i.d. coordinates with density proportional to exp(-|t|^r),
    normalised to the r-sphere; scaling by U^(1/d) then makes the points uniform in the ball.
    """
    if count < 1 or d < 1:
        raise ValueError("count and d must be positive")
    rv = as_exponent(r).value
    g = rng(seed, "r-ball")
    if math.isinf(rv):
        return g.uniform(-1.0, 1.0, size=(count, d))
    mag = g.gamma(1.0 / rv, 1.0, size=(count, d)) ** (1.0 / rv)
    G = mag * np.where(g.random((count, d)) < 0.5, -1.0, 1.0)
    nrm = lp_norm(G, rv, axis=1)
    nrm = np.where(nrm > 0, nrm, 1.0)
    radius = g.random(count) ** (1.0 / d)
    out = G / nrm[:, None] * radius[:, None]
    # guard the last ulp
    over = lp_norm(out, rv, axis=1)
    return out / np.maximum(over, 1.0)[:, None]


def sample_r_sphere(d: int, r: ExponentLike, count: int, seed: int) -> np.ndarray:
    pts = sample_r_ball(d, r, count, seed)
    nrm = lp_norm(pts, r, axis=1)
    return pts / np.where(nrm > 0, nrm, 1.0)[:, None]


def _radial_project(S: np.ndarray, r: float) -> np.ndarray:
    nrm = lp_norm(S, r, axis=-1)
    return S / np.maximum(nrm, 1.0)[..., None]


def search_batch(net: NetParams, Xr: np.ndarray, y: np.ndarray, eps: float, r: float,
                 activation: Activation = RELU, restarts: int = 8, steps: int = 150,
                 step_scale: float = 0.1, seed: int = 0, keep_all: bool = False):
    """Projected subgradient descent for many points at once.

    Xr holds points as rows.  Returns (values, S) with the best value and perturbation found
    per point (or every restart's best when keep_all).  Starts: -x/eps when inside the
    ball, the dual witness of each w_j signed to lower that neuron's term, the witness of
    the aggregate weight, then seeded sphere samples.
    """
    m, d = Xr.shape
    W, u = net.W, net.u
    fold = y[:, None] * u[None, :]
    wit = _witness_rows(W.T, r)
    # push each neuron towards lowering its own term, then along the aggregate direction
    own = -np.sign(fold)[:, :, None] * wit[None]
    agg = -_witness_rows(fold @ W.T, r)[:, None, :]
    fill = max(restarts - net.n - 1, 0)
    parts = [own, agg]
    if fill:
        parts.append(sample_r_sphere(d, r, fill, seed)[None].repeat(m, axis=0))
    inside = lp_norm(Xr, r, axis=1) <= eps
    centre = np.where(inside[:, None], -Xr / eps, agg[:, 0])
    S = np.concatenate([centre[:, None]] + parts, axis=1)

    def evaluate(S):
        A = (Xr[:, None, :] + eps * S) @ W
        return (activation(A) * fold[:, None, :]).sum(-1), A

    vals, A = evaluate(S)
    best_v, best_s = vals.copy(), S.copy()
    for k in range(1, steps + 1):
        grad = (activation.deriv(A) * fold[:, None, :]) @ W.T
        gn = np.linalg.norm(grad, axis=-1, keepdims=True)
        S = _radial_project(S - (step_scale / math.sqrt(k)) * grad / np.where(gn > 0, gn, 1.0), r)
        vals, A = evaluate(S)
        better = vals < best_v
        best_v = np.where(better, vals, best_v)
        best_s = np.where(better[..., None], S, best_s)
    if keep_all:
        return best_v, best_s
    i = np.argmin(best_v, axis=1)
    return best_v[np.arange(m), i], best_s[np.arange(m), i]


def _polish_cells(net, x, fold, eps, r, s_start, max_flips=4):
    """Minimise exactly over the closed linear pieces touching `s_start`.

    Inside a piece (fixed active set) the ReLU objective is linear in s, so each piece
    is a convex program over the r-ball.
    """
    W = net.W
    A = (x + eps * s_start) @ W
    scale = np.linalg.norm(W, axis=0) * (np.linalg.norm(x) + eps)
    amb = np.flatnonzero(np.abs(A) <= 1e-4 * np.maximum(scale, 1e-12))[:max_flips]
    base_pos = A > 0
    out = []
    for bits in itertools.product([False, True], repeat=len(amb)):
        pos = base_pos.copy()
        pos[amb] = bits
        sgn = np.where(pos, 1.0, -1.0)
        g = eps * (W[:, pos] @ fold[pos])
        cons = [{"type": "ineq", "fun": lambda s, sg=sgn: sg * ((x + eps * s) @ W),
                 "jac": lambda s, sg=sgn: sg[:, None] * eps * W.T}]
        bounds = None
        if math.isinf(r):
            bounds = [(-1.0, 1.0)] * len(x)
        else:
            cons.append({"type": "ineq", "fun": lambda s: 1.0 - np.sum(np.abs(s) ** r),
                         "jac": lambda s: -r * np.sign(s) * np.abs(s) ** (r - 1.0)})
        try:
            sol = scipy.optimize.minimize(lambda s, g=g: float(g @ s), s_start, jac=lambda s, g=g: g,
                                          method="SLSQP", constraints=cons, bounds=bounds,
                                          options={"ftol": 1e-15, "maxiter": 300})
        except (ValueError, np.linalg.LinAlgError):
            continue
        s = np.asarray(sol.x, dtype=float)
        if np.all(np.isfinite(s)):
            out.append(_radial_project(s, r))
    return out


def net_adversarial_search(net: NetParams, x, y: float, spec: PerturbSpec,
                           budget: SearchBudget = SearchBudget(),
                           activation: Activation = RELU) -> PerturbResult:
    """Best perturbation found by multi-start projected subgradient descent.

    For ReLU networks the best iterates are refined by solving the convex problems on the
    adjacent linear pieces.  The value is an upper bound on the true minimum.
    """
    x = np.asarray(x, dtype=float)
    r, eps = spec.r.value, spec.eps
    if eps == 0.0:
        s = np.zeros_like(x)
        v = float(net_objective(net, x, y, 0.0, s, activation))
        return PerturbResult(v, s, SignPattern.from_arguments(x @ net.W), False, Method.SEARCH)
    vals, S = search_batch(net, x[None], np.array([float(y)]), eps, r, activation, budget.restarts,
                           budget.steps, budget.step_scale, budget.seed, keep_all=True)
    vals, S = vals[0], S[0]
    order = np.argsort(vals, kind="stable")
    best_v, best_s = float(vals[order[0]]), S[order[0]]
    if budget.polish and activation.name == "relu" and r > 1:
        fold = y * net.u
        seen = set()
        for k in order:
            code = pattern_code((x + eps * S[k]) @ net.W, 1e-6)
            if code in seen:
                continue
            seen.add(code)
            for s in _polish_cells(net, x, fold, eps, r, S[k]):
                v = float(net_objective(net, x, y, eps, s))
                if v < best_v:
                    best_v, best_s = v, s
            if len(seen) >= 3:
                break
    on = abs(float(lp_norm(best_s, r)) - 1.0) <= 1e-8
    code = pattern_code((x + eps * best_s) @ net.W)
    return PerturbResult(best_v, best_s, SignPattern.from_code(code), on, Method.SEARCH)


# ---------------------------------------------------------------- optimality checks

@dataclass
class NecessaryConditionReport:
    lam: float
    t: np.ndarray
    residual: float
    constraint_defect: float

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "t": self.t.tolist(), "residual": self.residual,
                "constraint_defect": self.constraint_defect}


def verify_necessary_condition(net: NetParams, x, y: float, s, pattern: SignPattern,
                               spec: PerturbSpec) -> NecessaryConditionReport:
    """Stationarity defect of s for the given pattern.

    Solves for lambda >= 0 and t in [0,1]^|Z| minimising
    || eps*(sum_P u_j w_j + sum_Z t_j u_j w_j) + lambda * sgn(s)|s|^(r-1) ||_2
    (labels folded into u) and reports that minimum with the constraint defects.
    """
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    r, eps = spec.r.value, spec.eps
    if not (1.0 < r < math.inf):
        raise ValueError("the stationarity check needs 1 < r < inf")
    if eps <= 0:
        raise ValueError("the stationarity check needs eps > 0")
    W = net.W
    fold = y * net.u
    P, Z = list(pattern.P), list(pattern.Z)
    g = eps * (W[:, P] @ fold[P]) if P else np.zeros_like(x)
    B = eps * W[:, Z] * fold[Z][None, :]
    q = np.sign(s) * np.abs(s) ** (r - 1.0)
    M = np.column_stack([B, q])
    lo = np.zeros(M.shape[1])
    hi = np.concatenate([np.ones(len(Z)), [np.inf]])
    sol = scipy.optimize.lsq_linear(M, -g, bounds=(lo, hi), method="bvls", tol=1e-14)
    coef = sol.x
    resid_vec = g + M @ coef
    residual = float(np.linalg.norm(resid_vec))
    if r < 2 and residual > 1e-8:
        zero = np.abs(s) <= 1e-15
        if np.any(zero) and np.linalg.norm(resid_vec[zero]) >= 0.5 * residual:
            raise DegenerateDual("r-norm gradient vanishes at a zero coordinate that the residual needs")
    Q = _span_basis(W[:, Z])
    PZx = Q @ (Q.T @ x)
    sphere_defect = abs(float(lp_norm(s, r)) - 1.0)
    if not P:
        nz = np.linalg.norm(PZx)
        target = -PZx / nz if nz > 0 else s
        defect = sphere_defect + float(np.linalg.norm(s - target))
    else:
        defect = sphere_defect + float(np.linalg.norm(Q @ (Q.T @ s) + PZx / eps))
    return NecessaryConditionReport(float(coef[-1]), coef[:-1].copy(), residual, defect)


class SphereClass(str, enum.Enum):
    MUST_BE_ON_SPHERE = "must_be_on_sphere"
    SPHERE_OR_CENTER = "sphere_or_center"


def check_sphere_optimality(result: PerturbResult, x, spec: PerturbSpec, n: int, d: int) -> SphereClass:
    """Classify where the optimum must lie and check the result sits there."""
    x = np.asarray(x, dtype=float)
    eps, r = spec.eps, spec.r.value
    if eps <= 0:
        raise ValueError("sphere optimality needs eps > 0")
    on = abs(float(lp_norm(result.s_star, r)) - 1.0) <= 1e-8
    if lp_norm(x, r) >= eps or n < d:
        if not on:
            raise OptimalityViolation("optimum must lie on the unit sphere but ||s||_r != 1")
        return SphereClass.MUST_BE_ON_SPHERE
    if not (on or np.linalg.norm(result.s_star + x / eps) <= 1e-8):
        raise OptimalityViolation("optimum is neither on the sphere nor at -x/eps")
    return SphereClass.SPHERE_OR_CENTER

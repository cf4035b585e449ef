"""Monte Carlo estimates of standard and adversarial empirical Rademacher complexities.

Every estimator evaluates, for each sign draw sigma, the supremum over the hypothesis class
and averages over draws.  Draw i uses signs keyed by (seed, i) and draws are processed in
fixed-size chunks, so results do not depend on the number of workers.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .normkit import Exponent, ExponentLike, _witness_rows, as_exponent, lp_norm
from .perturb import (RELU, Activation, NetParams, PerturbSpec, net_adversarial_exact_r2_batch,
                      search_batch)
from .seeding import rademacher_signs, rng

CHUNK = 250


@dataclass(frozen=True)
class Sample:
    """Points x_i as the columns of X (d x m) with labels y_i in {-1, +1}."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float, ndmin=2)
        y = np.array(self.y, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[1] != y.size:
            raise ValueError(f"X must be d x m with m = len(y); got {X.shape} and {y.size} labels")
        if y.size < 1:
            raise ValueError("sample must contain at least one point")
        if not np.all(np.isfinite(X)):
            raise ValueError("sample features must be finite")
        if not np.all(np.abs(y) == 1):
            raise ValueError("labels must be -1 or +1")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def d(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Sample":
        idx = np.asarray(idx, dtype=int)
        return Sample(self.X[:, idx], self.y[idx])

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray(self.X.shape, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.X, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.y, dtype="<f8").tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class LinearFamilySpec:
    p: Exponent
    W: float

    def __init__(self, p: ExponentLike, W: float = 1.0):
        if not (float(W) > 0 and math.isfinite(float(W))):
            raise ValueError("W must be positive")
        object.__setattr__(self, "p", as_exponent(p))
        object.__setattr__(self, "W", float(W))

    def to_dict(self) -> dict:
        return {"p": self.p.to_json(), "W": self.W}


@dataclass(frozen=True)
class NetFamilySpec:
    p: Exponent
    W: float
    Lambda: float
    n: int
    activation: Activation = RELU

    def __init__(self, p: ExponentLike, W: float = 1.0, Lambda: float = 1.0, n: int = 1,
                 activation: Activation = RELU):
        if not (float(W) > 0 and float(Lambda) > 0):
            raise ValueError("W and Lambda must be positive")
        if int(n) < 1:
            raise ValueError("n must be >= 1")
        if isinstance(activation, str):
            activation = Activation.parse(activation)
        object.__setattr__(self, "p", as_exponent(p))
        object.__setattr__(self, "W", float(W))
        object.__setattr__(self, "Lambda", float(Lambda))
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "activation", activation)

    @property
    def lipschitz(self) -> float:
        return self.activation.lipschitz

    def to_dict(self) -> dict:
        return {"p": self.p.to_json(), "W": self.W, "Lambda": self.Lambda, "n": self.n,
                "activation": str(self.activation)}


@dataclass
class Estimate:
    mean: float
    std_err: float
    draws: int
    seed: int
    inner_method: str
    per_draw: np.ndarray = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std_err": self.std_err, "draws": self.draws,
                "seed": self.seed, "inner_method": self.inner_method}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _summarise(values: np.ndarray, seed: int, method: str) -> Estimate:
    draws = values.size
    se = float(values.std(ddof=1) / math.sqrt(draws)) if draws > 1 else 0.0
    return Estimate(float(values.mean()), se, draws, int(seed), method, values)


def map_draws(fn: Callable[[np.ndarray, int], np.ndarray], m: int, draws: int, seed: int,
              workers: int = 1) -> np.ndarray:
    """Apply fn(signs, first_draw_index) to fixed chunks of draws and concatenate in order."""
    if draws < 1:
        raise ValueError("draws must be >= 1")
    chunks = [(a, min(a + CHUNK, draws)) for a in range(0, draws, CHUNK)]

    def job(ab):
        return np.asarray(fn(rademacher_signs(seed, m, ab[0], ab[1]), ab[0]), dtype=float)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(job, chunks))
    else:
        parts = [job(c) for c in chunks]
    return np.concatenate(parts)


# ---------------------------------------------------------------- direction machinery

def normalize_rows(V: np.ndarray, p: float) -> np.ndarray:
    nrm = lp_norm(V, p, axis=-1)
    return V / np.where(nrm > 0, nrm, 1.0)[..., None]


def start_directions(d: int, p: float, count: int, seed: int, label: str) -> np.ndarray:
    """Seeded unit-p directions; row j depends only on (seed, label, j)."""
    out = np.empty((count, d))
    for j in range(count):
        out[j] = rng(seed, label, j).standard_normal(d)
    return normalize_rows(out, p)


def structural_directions(d: int, p: float) -> np.ndarray:
    eye = np.eye(d)
    flat = np.full((1, d), 1.0)
    return normalize_rows(np.concatenate([eye, -eye, flat, -flat]), p)


def sphere_ascent(f: Callable, S: np.ndarray, p: float, iters: int = 150, step: float = 0.2,
                  degree: float = 1.0):
    """Monotone ascent on the unit p-sphere, independently for every start in S (..., d).

    `f(S)` returns (values, gradients) of an objective positively homogeneous of the given
    degree.  By Euler's identity, grad F - degree * F * grad||w||_p is the gradient of
    F(v) / ||v||_p^degree, which is invariant under rescaling; a step along it is
    retracted radially and kept only if it improves.  The step grows on success and
    shrinks on failure.
    """
    pd = 1.0 if math.isinf(p) else (math.inf if p == 1.0 else p / (p - 1.0))

    def tangent(S, V, G):
        return G - degree * V[..., None] * _witness_rows(S, pd)

    V, G = f(S)
    T = tangent(S, V, G)
    eta = np.full(V.shape, step)
    for _ in range(iters):
        tn = np.linalg.norm(T, axis=-1, keepdims=True)
        trial = normalize_rows(S + eta[..., None] * T / np.where(tn > 0, tn, 1.0), p)
        VT, GT = f(trial)
        up = VT > V
        S = np.where(up[..., None], trial, S)
        V = np.where(up, VT, V)
        T = np.where(up[..., None], tangent(trial, VT, GT), T)
        eta = np.where(up, np.minimum(eta * 1.5, 1.0), np.maximum(eta * 0.5, 1e-12))
    return V, S


# ---------------------------------------------------------------- linear family

def _sorted_desc(A):
    return -np.sort(-A, axis=-1)


def _level_sum(A, c):
    """t >= 0 with sum_j (a_j - t)_+ = c row-wise (0 when sum a <= c)."""
    As = _sorted_desc(A)
    k = np.arange(1, A.shape[-1] + 1)
    T = (np.cumsum(As, axis=-1) - c[:, None]) / k
    valid = As > T
    rho = A.shape[-1] - 1 - np.argmax(valid[:, ::-1], axis=-1)
    t = T[np.arange(A.shape[0]), rho]
    return np.where(A.sum(-1) > c, np.maximum(t, 0.0), 0.0)


def _level_sq(A, c):
    """t >= 0 with ||(a - t)_+||_2 = c row-wise (0 when ||a||_2 <= c)."""
    As = _sorted_desc(A)
    k = np.arange(1, A.shape[-1] + 1)
    S1 = np.cumsum(As, axis=-1)
    S2 = np.cumsum(As * As, axis=-1)
    H = S2 - 2 * As * S1 + k * As * As
    cnt = np.sum(H <= (c * c)[:, None], axis=-1)
    rows = np.arange(A.shape[0])
    kk = np.maximum(cnt, 1)
    s1, s2 = S1[rows, kk - 1], S2[rows, kk - 1]
    disc = np.maximum(s1 * s1 - kk * (s2 - c * c), 0.0)
    t = (s1 - np.sqrt(disc)) / kk
    return np.where(np.sqrt(S2[:, -1]) > c, np.maximum(t, 0.0), 0.0)


def _level_capped_sq(A, c):
    """t with ||min(a, t)||_2 = c row-wise (max a when ||a||_2 <= c)."""
    As = np.sort(A, axis=-1)
    d = A.shape[-1]
    k = np.arange(1, d + 1)
    S2 = np.cumsum(As * As, axis=-1)
    F = S2 + (d - k) * As * As
    cnt = np.sum(F <= (c * c)[:, None], axis=-1)
    rows = np.arange(A.shape[0])
    below = np.where(cnt > 0, S2[rows, np.maximum(cnt - 1, 0)], 0.0)
    rem = np.maximum(d - cnt, 1)
    t = np.sqrt(np.maximum(c * c - below, 0.0) / rem)
    return np.where(cnt >= d, As[:, -1], t)


def linear_sup_closed(U: np.ndarray, c: np.ndarray, p: Exponent, r: Exponent) -> Optional[np.ndarray]:
    """sup over ||w||_p <= 1 of <w, u> - c ||w||_{r*} row-wise, or None without a closed form.

    Uses sup = inf_{||z||_r <= 1} ||u - c z||_{p*} for c > 0 and
    sup = sup_{||z||_r <= 1} ||u + |c| z||_{p*} for c < 0.
    """
    ps, rv = p.dual().value, r.value
    A = np.abs(U)
    d = U.shape[-1]
    out = np.empty(U.shape[0])
    neg, zero, pos = c < 0, c == 0, c > 0
    out[zero] = lp_norm(A[zero], ps, axis=-1)
    if np.any(neg):
        a, An = -c[neg], A[neg]
        if math.isinf(rv):
            out[neg] = lp_norm(An + a[:, None], ps, axis=-1)
        elif rv == 1.0:
            bumped = An[:, None, :] + a[:, None, None] * np.eye(d)[None]
            out[neg] = lp_norm(bumped, ps, axis=-1).max(axis=-1)
        elif rv == 2.0 and ps == 2.0:
            out[neg] = lp_norm(An, 2, axis=-1) + a
        elif rv == 2.0 and math.isinf(ps):
            out[neg] = An.max(axis=-1) + a
        elif rv == 2.0 and ps == 1.0:
            out[neg] = An.sum(axis=-1) + a * math.sqrt(d)
        else:
            return None
    if np.any(pos):
        a, Ap = c[pos], A[pos]
        if math.isinf(rv):
            out[pos] = lp_norm(np.maximum(Ap - a[:, None], 0.0), ps, axis=-1)
        elif rv == 1.0 and ps == 2.0:
            t = _level_sum(Ap, a)
            out[pos] = np.where(Ap.sum(-1) > a, lp_norm(np.minimum(Ap, t[:, None]), 2, axis=-1), 0.0)
        elif rv == 1.0 and ps == 1.0:
            out[pos] = np.maximum(Ap.sum(-1) - a, 0.0)
        elif rv == 1.0 and math.isinf(ps):
            out[pos] = _level_sum(Ap, a)
        elif rv == 2.0 and ps == 2.0:
            out[pos] = np.maximum(lp_norm(Ap, 2, axis=-1) - a, 0.0)
        elif rv == 2.0 and math.isinf(ps):
            out[pos] = _level_sq(Ap, a)
        elif rv == 2.0 and ps == 1.0:
            t = _level_capped_sq(Ap, a)
            out[pos] = np.maximum(Ap.sum(-1) - np.minimum(Ap, t[:, None]).sum(-1), 0.0)
        else:
            return None
    return out


def linear_sup_search(U: np.ndarray, c: np.ndarray, p: Exponent, r: Exponent,
                      restarts: int = 8, iters: int = 150, seed: int = 0):
    """Direction search for the same supremum; returns (values, best directions)."""
    pv, rv = p.value, r.value
    B, d = U.shape
    fixed = np.concatenate([structural_directions(d, pv), start_directions(d, pv, restarts, seed, "linear-start")])
    wit = _witness_rows(U, pv)
    S = np.concatenate([wit[:, None], -wit[:, None], np.broadcast_to(fixed, (B,) + fixed.shape)], axis=1)

    def f(S):
        val = (S * U[:, None, :]).sum(-1) - c[:, None] * lp_norm(S, r.dual(), axis=-1)
        grad = U[:, None, :] - c[:, None, None] * _witness_rows(S, rv)
        return val, grad

    V, S = sphere_ascent(f, S, pv, iters)
    k = np.argmax(V, axis=1)
    best = V[np.arange(B), k]
    return np.maximum(best, 0.0), S[np.arange(B), k]


def linear_sup(U, c, p: Exponent, r: Exponent, restarts: int = 8, seed: int = 0):
    """Returns (values, method) for sup over the unit p-ball of <w,u> - c||w||_{r*}."""
    out = linear_sup_closed(U, c, p, r)
    if out is not None:
        return out, "closed"
    return linear_sup_search(U, c, p, r, restarts, seed=seed)[0], "direction_search"


def estimate_linear(sample: Sample, spec: LinearFamilySpec, pert: PerturbSpec, draws: int = 2000,
                    seed: int = 0, workers: int = 1, restarts: int = 8) -> Estimate:
    """Adversarial complexity of {x -> <w, x> : ||w||_p <= W}; eps = 0 gives the standard one.

    Per draw the value is (W/m) * sup_{||w||_p <= 1} <w, sum_i sigma_i y_i x_i> - eps (sum_i sigma_i) ||w||_{r*}.
    """
    X, y, m = sample.X, sample.y, sample.m
    eps = pert.eps
    methods = set()

    def fn(sig, start):
        U = (sig * y) @ X.T
        c = eps * sig.sum(axis=1)
        vals, how = linear_sup(U, c, spec.p, pert.r, restarts, seed)
        methods.add(how)
        return spec.W / m * vals

    values = map_draws(fn, m, draws, seed, workers)
    return _summarise(values, seed, "direction_search" if "direction_search" in methods else "closed")


def standard_linear_complexity(sample: Sample, spec: LinearFamilySpec, draws: int = 2000,
                               seed: int = 0, workers: int = 1) -> Estimate:
    return estimate_linear(sample, spec, PerturbSpec(2, 0.0), draws, seed, workers)


# ---------------------------------------------------------------- single ReLU family

def relu_lower_direction(sample: Sample, p: ExponentLike, r: ExponentLike, eps: float,
                         seed: int = 0, restarts: int = 16, iters: int = 200):
    """Best found unit-p direction s for ||(<s, x_i> - eps y_i ||s||_{r*})_+||_2.

    Returns (value, s).  Any s gives a valid value, so under-resolution only loosens it.
    """
    p, r = as_exponent(p), as_exponent(r)
    pv, rv = p.value, r.value
    Xr, y = sample.X.T, sample.y
    d = sample.d
    wit = _witness_rows(Xr, pv)
    S = np.concatenate([wit, -wit, structural_directions(d, pv),
                        start_directions(d, pv, restarts, seed, "relu-lower-start")])

    def f(S):
        nrm = lp_norm(S, r.dual(), axis=-1)
        a = np.maximum(S @ Xr.T - eps * y[None, :] * nrm[:, None], 0.0)
        grad = 2 * (a @ Xr - eps * (a @ y)[:, None] * _witness_rows(S, rv))
        return (a * a).sum(-1), grad

    V, S = sphere_ascent(f, S, pv, iters, degree=2.0)
    k = int(np.argmax(V))
    return math.sqrt(max(V[k], 0.0)), S[k]


def relu_draw_values(sample: Sample, spec: LinearFamilySpec, pert: PerturbSpec, draws: int = 2000,
                     seed: int = 0, workers: int = 1, restarts: int = 8, iters: int = 60):
    """Per-draw values and maximising unit directions for the single-ReLU family."""
    p, r = spec.p, pert.r
    pv, rv = p.value, r.value
    Xr, y, m, d = sample.X.T, sample.y, sample.m, sample.d
    eps = pert.eps
    _, s_low = relu_lower_direction(sample, p, r, eps, seed)
    fixed = np.concatenate([s_low[None], -s_low[None], structural_directions(d, pv),
                            start_directions(d, pv, restarts, seed, "relu-start")])
    dirs_out = []

    def fn(sig, start):
        B = sig.shape[0]
        own = _witness_rows(sig @ Xr, pv)
        pos = _witness_rows(np.maximum(sig, 0.0) @ Xr, pv)
        S = np.concatenate([own[:, None], pos[:, None], np.broadcast_to(fixed, (B,) + fixed.shape)], axis=1)

        def f(S):
            nrm = lp_norm(S, r.dual(), axis=-1)
            arg = S @ Xr.T - eps * y * nrm[..., None]
            act = (arg > 0) * sig[:, None, :]
            val = (np.maximum(arg, 0.0) * sig[:, None, :]).sum(-1)
            grad = act @ Xr - eps * (act @ y)[..., None] * _witness_rows(S, rv)
            return val, grad

        V, S = sphere_ascent(f, S, pv, iters)
        k = np.argmax(V, axis=1)
        best = V[np.arange(B), k]
        dirs = S[np.arange(B), k]
        dirs_out.append((start, np.where((best > 0)[:, None], dirs, 0.0)))
        return spec.W / m * np.maximum(best, 0.0)

    values = map_draws(fn, m, draws, seed, workers)
    dirs_out.sort(key=lambda t: t[0])
    return values, np.concatenate([dd for _, dd in dirs_out])


def estimate_relu(sample: Sample, spec: LinearFamilySpec, pert: PerturbSpec, draws: int = 2000,
                  seed: int = 0, workers: int = 1, restarts: int = 8) -> Estimate:
    """Adversarial complexity of {(x, y) -> y relu(<w, x>) : ||w||_p <= W}, a lower estimate.

    Per draw: (W/m) sup over unit-p directions s of sum_i sigma_i (<s, x_i> - y_i eps ||s||_{r*})_+.
    """
    values, _ = relu_draw_values(sample, spec, pert, draws, seed, workers, restarts)
    return _summarise(values, seed, "direction_search")


# ---------------------------------------------------------------- one-hidden-layer networks

def project_l1_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto {||v||_1 <= radius}."""
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    t = _level_sum(a[None], np.array([radius]))[0]
    return np.sign(v) * np.maximum(a - t, 0.0)


def project_p_ball_columns(W: np.ndarray, p: float, radius: float) -> np.ndarray:
    """Columns mapped into the p-ball: exact projection for p in {1, 2, inf}, radial otherwise."""
    if math.isinf(p):
        return np.clip(W, -radius, radius)
    if p == 1.0:
        return np.column_stack([project_l1_ball(W[:, j], radius) for j in range(W.shape[1])])
    nrm = lp_norm(W, p, axis=0)
    return W * (radius / np.maximum(nrm, radius))[None, :]


def inner_values(net: NetParams, sample: Sample, pert: PerturbSpec, activation: Activation = RELU,
                 search_restarts: int = 6, search_steps: int = 80, seed: int = 0):
    """Worst-case value of y_i f(x_i + delta) per point and the perturbed points attaining it."""
    Xr, y = sample.X.T, sample.y
    eps, rv = pert.eps, pert.r.value
    if eps == 0.0:
        Z = Xr
        vals = y * (activation(Z @ net.W) @ net.u)
        return vals, Z
    if activation.name == "relu" and rv == 2.0:
        res = net_adversarial_exact_r2_batch(net, sample.X, y, eps)
        return res.values, Xr + eps * res.S
    vals, S = search_batch(net, Xr, y, eps, rv, activation, search_restarts, search_steps, seed=seed)
    return vals, Xr + eps * S


def random_net(d: int, spec: NetFamilySpec, seed: int, index: int, label: str = "net-pool") -> NetParams:
    """Seeded network on the boundary of the parameter balls."""
    g = rng(seed, label, index)
    W = g.standard_normal((d, spec.n))
    W = W / lp_norm(W, spec.p, axis=0)[None, :] * spec.W
    u = g.standard_normal(spec.n)
    u = u / np.abs(u).sum() * spec.Lambda
    return NetParams(W, u)


def estimate_net(sample: Sample, spec: NetFamilySpec, pert: PerturbSpec, draws: int = 2000,
                 seed: int = 0, restarts: int = 1, pool: int = 64, steps: int = 5,
                 workers: int = 1) -> Estimate:
    """Adversarial complexity of one-hidden-layer networks with ||w_j||_p <= W, ||u||_1 <= Lambda.

    A seeded pool of networks is scored on every draw, then the best `restarts` pool members
    are improved by projected ascent where the gradient is taken at the worst-case perturbed
    points.  The reported value is the best network found per draw (at least 0).  With an
    exact inner solver (ReLU with r = 2, or eps = 0) every per-draw value is attained by a
    feasible network, so the mean underestimates the supremum.
    """
    act = spec.activation
    Xr, y, m, d = sample.X.T, sample.y, sample.m, sample.d
    pv = spec.p.value
    nets = [random_net(d, spec, seed, k) for k in range(pool)]
    cache = [inner_values(net, sample, pert, act, seed=seed) for net in nets]
    A = np.array([v for v, _ in cache])

    def objective(net):
        vals, Z = inner_values(net, sample, pert, act, seed=seed)
        return vals, Z

    def refine(sig, k):
        net = nets[k]
        vals, Z = cache[k]
        best = float(sig @ vals) / m
        eta = 0.2
        sy = sig * y
        for _ in range(steps):
            H = Z @ net.W
            gu = (sy @ act(H)) / m
            gW = Z.T @ (sy[:, None] * act.deriv(H) * net.u[None, :]) / m
            gn = math.sqrt(float(np.sum(gu * gu) + np.sum(gW * gW)))
            if gn == 0.0:
                break
            W_new = project_p_ball_columns(net.W + eta * spec.W * gW / gn, pv, spec.W)
            u_new = project_l1_ball(net.u + eta * spec.Lambda * gu / gn, spec.Lambda)
            trial = NetParams(W_new, u_new)
            tv, tZ = objective(trial)
            val = float(sig @ tv) / m
            if val > best:
                best, net, vals, Z = val, trial, tv, tZ
                eta = min(eta * 1.5, 1.0)
            else:
                eta *= 0.5
        return best

    def fn(sig, start):
        scores = (sig[:, None, :] * A[None, :, :]).sum(-1) / m
        out = np.empty(sig.shape[0])
        for b in range(sig.shape[0]):
            order = np.argsort(-scores[b], kind="stable")
            best = float(scores[b, order[0]])
            for k in order[:restarts]:
                best = max(best, refine(sig[b], int(k)))
            out[b] = max(best, 0.0)
        return out

    values = map_draws(fn, m, draws, seed, workers)
    return _summarise(values, seed, "param_search")

"""Acceptance checks shared by the ``verify`` command and the test suite.

Each check returns a CheckResult; summaries hold only deterministic numbers (no timings).
"""
from __future__ import annotations

import csv
import itertools
import math
import os
import tempfile
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bounds import (adversarial_linear_bounds, net_lipschitz_bound, net_shatter_bound,
                     pruned_indices, relu_bounds)
from .data import generate_sample, write_sample
from .figures import write_figures
from .normkit import (_witness_rows, as_exponent, c1_const, c2_const, check_group_norm_inequalities,
                      dual_witness, lp_norm, norm_ratio_factor, norm_ratio_sup)
from .perturb import (NetParams, PerturbSpec, SearchBudget, check_sphere_optimality,
                      linear_adversarial_margin, net_adversarial_exact_r2,
                      net_adversarial_exact_r2_batch, net_adversarial_search, net_objective,
                      sample_r_ball, sample_r_sphere, verify_necessary_condition)
from .rademacher import (LinearFamilySpec, NetFamilySpec, Sample, _summarise, estimate_linear,
                         estimate_net, estimate_relu, random_net, relu_draw_values, sphere_ascent)
from .seeding import rng
from .shatter import partition_stats, positive_sets, sauer_bound, shatters

EXPONENTS = (1, 1.5, 2, 3, "inf")


@dataclass
class CheckResult:
    number: int
    title: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} [{self.number:2d}] {self.title}: {self.detail}"


# ---------------------------------------------------------------- norms and constants

def _ball_ascent(S: np.ndarray, p, r, iters: int = 200) -> np.ndarray:
    """Local ascent of ||w||_{r*} over the unit p-ball from each row of S."""
    p, r = as_exponent(p), as_exponent(r)
    rs = r.dual()
    if p.is_inf:
        for _ in range(50):
            S = np.clip(S + 0.5 * _witness_rows(S, r.value), -1.0, 1.0)
        return lp_norm(S, rs, axis=-1)
    V, _ = sphere_ascent(lambda T: (lp_norm(T, rs, axis=-1), _witness_rows(T, r.value)), S, p.value, iters)
    return V


def check_norm_ratio(seed: int = 0, samples: int = 100_000) -> CheckResult:
    worst_witness = worst_search = 0.0
    exceed = 0
    for i, (p, r) in enumerate(itertools.product(EXPONENTS, EXPONENTS)):
        rs = as_exponent(r).dual()
        for d in (2, 5, 10):
            law = norm_ratio_factor(p, r, d)
            wit = norm_ratio_sup(p, r, d).witness
            worst_witness = max(worst_witness, abs(float(lp_norm(wit, p)) - 1.0),
                                abs(float(lp_norm(wit, rs)) - law))
            S = sample_r_sphere(d, p, samples, seed * 1000 + i * 10 + d)
            vals = lp_norm(S, rs, axis=1)
            exceed += int(np.count_nonzero(vals > law * (1 + 1e-9)))
            top = S[np.argsort(-vals, kind="stable")[:32]]
            found = max(float(vals.max()), float(_ball_ascent(top, p, r).max()))
            worst_search = max(worst_search, abs(found - law))
    ok = worst_witness <= 1e-9 and worst_search <= 1e-3 and exceed == 0
    return CheckResult(1, "norm-ratio law", ok,
                       f"witness error {worst_witness:.2e} (tol 1e-9), search error {worst_search:.2e} "
                       f"(tol 1e-3), samples above the law {exceed}")


def check_group_norms(seed: int = 0, matrices: int = 100) -> CheckResult:
    g = rng(seed, "group-norm-matrices")
    failures = 0
    checked = 0
    for _ in range(matrices):
        d, m = int(g.integers(1, 9)), int(g.integers(1, 9))
        M = g.standard_normal((d, m))
        for p, q in itertools.product(EXPONENTS, EXPONENTS):
            rep = check_group_norm_inequalities(M, p, q)
            checked += 1
            failures += int(not all(rep.holds))
    worst_eq = 0.0
    for d, m in itertools.product(range(1, 9), range(1, 9)):
        k = min(d, m)
        block = np.zeros((d, m))
        block[np.arange(k), np.arange(k)] = 1.0
        for p, q in itertools.product(EXPONENTS, EXPONENTS):
            ones = check_group_norm_inequalities(np.ones((d, m)), p, q)
            worst_eq = max(worst_eq, abs(ones.norm_m_qp - ones.norm_mt_pq) / ones.norm_mt_pq)
            rep = check_group_norm_inequalities(block, p, q)
            tight = rep.ratio_lower if as_exponent(q) <= as_exponent(p) else rep.ratio_upper
            worst_eq = max(worst_eq, abs(rep.norm_m_qp - tight * rep.norm_mt_pq) / rep.norm_m_qp)
    ok = failures == 0 and worst_eq <= 1e-12
    return CheckResult(2, "group-norm chains", ok,
                       f"{failures}/{checked} chain failures, worst equality-case gap {worst_eq:.2e} (tol 1e-12)")


def _constant_row_ok(q: float, c1: float, c2: float, lo: float, hi: float) -> bool:
    return lo <= c2 <= hi and c2 <= c1 * (1 + 1e-12)


def check_constants(seed: int = 0) -> CheckResult:
    grid = (2, 2.5, 3, 5, 10, 20, 50)
    bad = [q for q in grid if not _constant_row_ok(q, c1_const(q), c2_const(q), math.exp(-0.5) * math.sqrt(q),
                                                   math.exp(-0.5) * math.sqrt(q + 1))]
    at_two = max(abs(c1_const(2.0) - 1.0), abs(c2_const(2.0) - 1.0))
    ok = not bad and at_two <= 1e-12
    return CheckResult(3, "constant envelopes", ok,
                       f"rows violating the envelope {bad}, |c(2) - 1| = {at_two:.1e}")


def check_figures(seed: int = 0) -> CheckResult:
    with tempfile.TemporaryDirectory() as tmp:
        write_figures("all", tmp, seed)
        with open(os.path.join(tmp, "constants.csv")) as fh:
            const = list(csv.DictReader(fh))
        with open(os.path.join(tmp, "norm_comparison.csv")) as fh:
            comp = list(csv.DictReader(fh))
    bad_rows = 0
    two_gap = math.inf
    for row in const:
        q, c1, c2, lo, hi = (float(row[k]) for k in ("pstar", "c1", "c2", "c2_lower", "c2_upper"))
        bad_rows += int(not _constant_row_ok(q, c1, c2, lo, hi))
        if q == 2.0:
            two_gap = max(abs(c1 - 1.0), abs(c2 - 1.0))
    order_bad = 0
    eq_gap = 0.0
    for row in comp:
        q = float(row["pstar"])
        if row["matrix"] != "identity" or q < 2:
            continue
        a, b = float(row["norm_xt_2_pstar"]), float(row["norm_x_pstar_2"])
        order_bad += int(a > b * (1 + 1e-12))
        k = 4.0 ** (0.5 - 1.0 / q)  # min(m, d)^(1/2 - 1/p*)
        eq_gap = max(eq_gap, abs(b - k * a) / b)
    ok = bad_rows == 0 and two_gap <= 1e-12 and order_bad == 0 and eq_gap <= 1e-12
    return CheckResult(11, "figure data", ok,
                       f"{len(const)} constant rows ({bad_rows} bad, |c(2) - 1| = {two_gap:.1e}); identity rows: "
                       f"{order_bad} order violations, ratio-bound equality gap {eq_gap:.1e}")


# ---------------------------------------------------------------- perturbations

def check_linear_perturbation(seed: int = 0, instances: int = 200, samples: int = 100_000) -> CheckResult:
    worst_gap = 0.0
    beaten = 0
    for i in range(instances):
        g = rng(seed, "linear-perturbation", i)
        d = int(g.integers(1, 6))
        r = ("1", "2", "3", "inf")[i % 4]
        w, x = g.standard_normal(d), g.standard_normal(d)
        y = float(g.choice([-1.0, 1.0]))
        spec = PerturbSpec(r, float(g.uniform(0.05, 1.5)))
        closed = linear_adversarial_margin(w, x, y, spec)
        S = sample_r_ball(d, r, samples, seed * 100_000 + i)
        vals = y * ((x[None, :] + spec.eps * S) @ w)
        s_w = -y * dual_witness(w, r)
        cand = y * float(w @ (x + spec.eps * s_w))
        tol = 1e-9 * (1 + abs(closed))
        beaten += int(vals.min() < closed - tol)
        worst_gap = max(worst_gap, abs(min(float(vals.min()), cand) - closed))
    ok = worst_gap <= 1e-9 and beaten == 0
    return CheckResult(4, "closed-form linear perturbation", ok,
                       f"{instances} instances, worst gap {worst_gap:.2e} (tol 1e-9), instances beaten by a sample {beaten}")


def relu_instance(seed: int, i: int):
    g = rng(seed, "relu-instance", i)
    n, d = int(g.integers(1, 5)), int(g.integers(1, 4))
    net = NetParams(g.standard_normal((d, n)), g.standard_normal(n))
    x = g.standard_normal(d) * float(g.uniform(0.2, 1.5))
    y = float(g.choice([-1.0, 1.0]))
    return net, x, y, float(g.uniform(0.1, 1.5))


def check_relu_exact(seed: int = 0, instances: int = 100, samples: int = 20_000) -> CheckResult:
    oracle_fail = search_gap_fail = sphere_fail = 0
    worst_search = worst_resid = 0.0
    for i in range(instances):
        net, x, y, eps = relu_instance(seed, i)
        spec = PerturbSpec(2, eps)
        res = net_adversarial_exact_r2(net, x, y, eps)
        S = sample_r_ball(net.d, 2, samples, seed * 1000 + i)
        oracle = net_objective(net, x, y, eps, S)
        oracle_fail += int(res.value > float(np.min(oracle)) + 1e-12 * (1 + abs(res.value)))
        found = net_adversarial_search(net, x, y, spec, SearchBudget(seed=i))
        gap = abs(found.value - res.value)
        worst_search = max(worst_search, gap)
        search_gap_fail += int(gap > 1e-6)
        if np.linalg.norm(x) >= eps or net.n < net.d:
            sphere_fail += int(abs(float(np.linalg.norm(res.s_star)) - 1.0) > 1e-8)
            check_sphere_optimality(res, x, spec, net.n, net.d)
        rep = verify_necessary_condition(net, x, y, res.s_star, res.pattern, spec)
        worst_resid = max(worst_resid, rep.residual)
    ok = oracle_fail == 0 and search_gap_fail == 0 and sphere_fail == 0 and worst_resid <= 1e-8
    return CheckResult(6, "exact ReLU solver", ok,
                       f"{instances} instances: beaten by oracle {oracle_fail}, search gap > 1e-6 {search_gap_fail} "
                       f"(worst {worst_search:.1e}), off-sphere {sphere_fail}, worst residual {worst_resid:.1e}")


# ---------------------------------------------------------------- complexity sandwiches

def check_linear_sandwich(seed: int = 0, draws: int = 2000) -> CheckResult:
    sample = generate_sample(5, 50, "gaussian", seed)
    spec_grid = list(itertools.product((1, 2, "inf"), (1, 2, "inf"), (0.05, 0.2)))
    failures = []
    for p, r, eps in spec_grid:
        spec, pert = LinearFamilySpec(p, 1.0), PerturbSpec(r, eps)
        est = estimate_linear(sample, spec, pert, draws, seed)
        rep = adversarial_linear_bounds(sample, spec, pert, mode="mc", draws=draws, seed=seed)
        lo = rep["lower"] - 3 * est.std_err - 1e-3
        hi = rep["upper"] + 3 * est.std_err
        if not lo <= est.mean <= hi:
            failures.append(f"p={p} r={r} eps={eps}")
    return CheckResult(5, "linear sandwich", not failures,
                       f"{len(spec_grid) - len(failures)}/{len(spec_grid)} configurations inside"
                       + (f"; outside: {', '.join(failures)}" if failures else ""))


def relu_reference_sample(seed: int = 0, eps: float = 0.1) -> Sample:
    """Gaussian d=4, m=40 sample where six positive points are shrunk to norm eps/2."""
    base = generate_sample(4, 40, "gaussian", seed)
    X = base.X.copy()
    pos = np.flatnonzero(base.y > 0)[:6]
    X[:, pos] *= 0.5 * eps / np.linalg.norm(X[:, pos], axis=0)
    return Sample(X, base.y)


def check_relu_sandwich(seed: int = 0, draws: int = 2000) -> CheckResult:
    eps = 0.1
    sample = relu_reference_sample(seed, eps)
    spec, pert = LinearFamilySpec(2, 1.0), PerturbSpec(2, eps)
    values, dirs = relu_draw_values(sample, spec, pert, draws, seed)
    est = _summarise(values, seed, "direction_search")
    rep = relu_bounds(sample, spec, pert, mode="mc", draws=draws, seed=seed)
    inside = rep["lower"] - 3 * est.std_err <= est.mean <= rep["upper"] + 3 * est.std_err
    pruned = np.setdiff1d(np.arange(sample.m), pruned_indices(sample, pert))
    args = dirs @ sample.X[:, pruned] - eps * sample.y[pruned] * lp_norm(dirs, pert.rstar, axis=1)[:, None]
    contributing = int(np.count_nonzero(args > 0))
    ok = inside and contributing == 0 and pruned.size > 0
    return CheckResult(7, "ReLU sandwich", ok,
                       f"lower {rep['lower']:.6f} <= estimate {est.mean:.6f} (SE {est.std_err:.6f}) <= upper "
                       f"{rep['upper']:.6f}: {inside}; pruned points {pruned.size}, nonzero contributions {contributing}")


NET_ACTIVATIONS = ("relu", "leaky_relu(0.1)", "tanh")


def check_net_domination(seed: int = 0, draws: int = 1000, workers: int = 1) -> CheckResult:
    sample = generate_sample(3, 30, "gaussian", seed)
    pert = PerturbSpec(2, 0.1)
    failures = []
    total = 0
    for act, n in itertools.product(NET_ACTIVATIONS, (2, 4)):
        spec = NetFamilySpec(2, 1.0, 1.0, n, act)
        est = estimate_net(sample, spec, pert, draws, seed, workers=workers)
        rep = net_lipschitz_bound(sample, spec, pert)
        for variant in ("log36", "log9m", "log36m"):
            total += 1
            if est.mean > rep[variant] + 3 * est.std_err:
                failures.append(f"{act} n={n} {variant}")
    return CheckResult(8, "network Lipschitz-bound domination", not failures,
                       f"{total - len(failures)}/{total} comparisons dominated"
                       + (f"; failing: {', '.join(failures)}" if failures else ""))


def shatter_reference_sample(seed: int = 0, eps: float = 0.1) -> Sample:
    base = generate_sample(3, 30, "gaussian", seed)
    norms = np.linalg.norm(base.X, axis=0)
    return Sample(base.X * np.maximum(1.0, eps / norms), base.y)


def check_shatter_domination(seed: int = 0, draws: int = 1000, candidates: int = 50,
                             workers: int = 1) -> CheckResult:
    eps = 0.1
    sample = shatter_reference_sample(seed, eps)
    spec, pert = NetFamilySpec(2, 1.0, 1.0, 2, "relu"), PerturbSpec(2, eps)
    nets = [random_net(sample.d, spec, seed, k, "shatter-candidates") for k in range(candidates)]
    stats = partition_stats(sample, pert, nets)
    est = estimate_net(sample, spec, pert, draws, seed, workers=workers)
    parts = []
    ok = True
    for variant in ("infty_norm", "two_norm"):
        rep = net_shatter_bound(sample, spec, pert, stats.c_star_estimate, stats.pi_star, variant)
        dominated = est.mean <= rep.value + 3 * est.std_err
        ok &= dominated
        parts.append(f"{variant} bound {rep.value:.4f} ({'ok' if dominated else 'violated'})")
    return CheckResult(9, "partition-bound domination", ok,
                       f"C* {stats.c_star_estimate}, Pi* {stats.pi_star}, estimate {est.mean:.4f} "
                       f"(SE {est.std_err:.4f}); " + ", ".join(parts))


# ---------------------------------------------------------------- counting

def crafted_patterns(seed: int, n: int, m: int, trial: int) -> list:
    """Pattern codes of m crafted points for a random n-neuron net with d = n."""
    g = rng(seed, "sauer-instance", n, m, trial)
    W = g.standard_normal((n, n)) + 2.0 * np.eye(n)
    net = NetParams(W, g.choice([-1.0, 1.0], size=n) * g.uniform(0.5, 1.5, size=n))
    Zc = g.choice([-1.0, 1.0], size=(n, m)) * g.uniform(0.5, 2.0, size=(n, m))
    X = np.linalg.solve(W.T, Zc)  # w_j . x_i = Zc[j, i]
    y = g.choice([-1.0, 1.0], size=m)
    eps = 0.05 * float(np.min(np.linalg.norm(X, axis=0)))
    return list(net_adversarial_exact_r2_batch(net, X, y, eps).codes)


def check_sauer(seed: int = 0, trials: int = 4) -> CheckResult:
    checks = violations = instances = excluded = 0
    for n, m, trial in itertools.product(range(1, 6), range(1, 7), range(trials)):
        codes = crafted_patterns(seed, n, m, trial)
        sets, dropped = positive_sets(codes)
        excluded += dropped
        instances += 1
        pi = len(sets)
        for t in range(n + 1):
            if t + 1 <= n and any(shatters(sets, c) for c in itertools.combinations(range(n), t + 1)):
                continue
            checks += 1
            violations += int(pi > sauer_bound(n, t))
    return CheckResult(10, "Sauer counting", violations == 0,
                       f"{instances} instances, {checks} (instance, t) checks, {violations} violations, "
                       f"{excluded} points with nonempty Z excluded")


# ---------------------------------------------------------------- determinism

def _reports(seed: int, workers: int, tmpdir: str) -> list:
    out = []
    path = os.path.join(tmpdir, f"sample-{workers}.csv")
    sample = generate_sample(3, 24, "gaussian", seed)
    write_sample(path, sample)
    with open(path, "rb") as fh:
        out.append(fh.read().decode())
    lin, pert = LinearFamilySpec(2), PerturbSpec("inf", 0.1)
    out.append(estimate_linear(sample, lin, pert, 600, seed, workers).to_json())
    out.append(estimate_linear(sample, LinearFamilySpec(1.5), PerturbSpec(3, 0.1), 300, seed, workers).to_json())
    out.append(estimate_relu(sample, lin, PerturbSpec(2, 0.1), 300, seed, workers).to_json())
    net_spec = NetFamilySpec(2, 1, 1, 2, "relu")
    est = estimate_net(sample, net_spec, PerturbSpec(2, 0.1), 260, seed, workers=workers)
    out.append(est.to_json())
    out.append(est.per_draw.tobytes().hex())
    out.append(adversarial_linear_bounds(sample, lin, pert, mode="mc", draws=300, seed=seed,
                                         workers=workers).to_json())
    out.append(relu_bounds(sample, lin, PerturbSpec(2, 0.1), 0.5, seed=seed).to_json())
    return out


def check_determinism(seed: int = 0) -> CheckResult:
    with tempfile.TemporaryDirectory() as tmp:
        first = _reports(seed, 1, tmp)
        second = _reports(seed, 1, tmp)
        parallel = _reports(seed, 8, tmp)
    same_runs = first == second
    same_workers = first == parallel
    return CheckResult(12, "determinism", same_runs and same_workers,
                       f"{len(first)} artefacts; identical across runs: {same_runs}, "
                       f"identical for 1 and 8 workers: {same_workers}")


CHECKS: dict = {
    1: check_norm_ratio, 2: check_group_norms, 3: check_constants, 4: check_linear_perturbation,
    5: check_linear_sandwich, 6: check_relu_exact, 7: check_relu_sandwich, 8: check_net_domination,
    9: check_shatter_domination, 10: check_sauer, 11: check_figures, 12: check_determinism,
}

SUITES = {
    "norms": (1, 2, 3, 11),
    "perturb": (4, 6),
    "sandwich": (5, 7, 8, 9),
    "shatter": (10,),
    "all": tuple(range(1, 13)),
}


def run_suite(suite: str = "all", seed: int = 0, report: Callable[[str], None] = print) -> list:
    if suite not in SUITES:
        raise ValueError(f"suite must be one of {sorted(SUITES)}, got {suite!r}")
    results = []
    for k in SUITES[suite]:
        res = CHECKS[k](seed)
        report(res.line())
        results.append(res)
    return results

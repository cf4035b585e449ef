"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 invalid input, 3 data violating a bound's hypothesis.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .bounds import (MODES, VARIANTS, adversarial_linear_bounds, check_norm_hypothesis,
                     linear_rc_bounds, net_lipschitz_bound, net_shatter_bound, relu_bounds)
from .data import DISTRIBUTIONS, generate_sample, read_sample, write_sample
from .errors import HypothesisViolated
from .figures import write_figures
from .normkit import as_exponent
from .perturb import (Activation, NetParams, PerturbSpec, SearchBudget, net_adversarial_exact_r2,
                      net_adversarial_search)
from .rademacher import (LinearFamilySpec, NetFamilySpec, estimate_linear, estimate_net,
                         estimate_relu, random_net)
from .shatter import growth_function, partition_stats
from .verify import SUITES, run_suite


class UsageError(ValueError):
    pass


def _exponent(text: str):
    try:
        return as_exponent(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_family(p: argparse.ArgumentParser, families: Sequence[str]) -> None:
    p.add_argument("--input", help="sample CSV (label,f1,...,fd)")
    p.add_argument("--family", choices=families, default=families[0])
    p.add_argument("--p", type=_exponent, default=as_exponent(2), help="weight norm order (accepts inf)")
    p.add_argument("--r", type=_exponent, default=as_exponent(2), help="perturbation norm order (accepts inf)")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--W", type=float, default=1.0)
    p.add_argument("--lambda", dest="Lambda", type=float, default=1.0)
    p.add_argument("--n", type=int, default=2, help="hidden units")
    p.add_argument("--activation", default="relu", help="relu, leaky_relu(alpha) or tanh")
    p.add_argument("--draws", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="write the JSON report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="advrad", description="Adversarial Rademacher complexity toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="JSON file of flag values; explicit flags take precedence")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a synthetic sample CSV")
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--distribution", choices=DISTRIBUTIONS, default="gaussian")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    e = sub.add_parser("estimate", help="Monte Carlo complexity estimate")
    _add_family(e, ("linear", "relu", "net"))

    b = sub.add_parser("bounds", help="evaluate a complexity bound")
    _add_family(b, ("linear", "linear-rc", "relu", "net-lipschitz", "net-shatter"))
    b.add_argument("--mode", choices=MODES, default="analytic", help="source of the clean complexity term")
    b.add_argument("--delta", type=float, default=0.0, help="margin for the refined ReLU lower bound")
    b.add_argument("--variant", choices=VARIANTS, default="infty_norm")
    b.add_argument("--candidates", type=int, default=50, help="candidate nets for the partition counts")
    b.add_argument("--c-star", dest="c_star", type=int, help="use this C* instead of counting")
    b.add_argument("--pi-star", dest="pi_star", type=int, help="use this Pi* instead of counting")

    pt = sub.add_parser("perturb", help="worst-case perturbation of one sample point")
    _add_family(pt, ("net",))
    pt.add_argument("--index", type=int, default=0, help="sample point to perturb")
    pt.add_argument("--net", help="JSON file with W (d x n) and u; default is a seeded random net")
    pt.add_argument("--method", choices=("auto", "exact", "search"), default="auto")

    sh = sub.add_parser("shatter", help="sign-pattern partitions over seeded candidate nets")
    _add_family(sh, ("net",))
    sh.add_argument("--candidates", type=int, default=50)

    f = sub.add_parser("figures", help="write plot data as CSV")
    f.add_argument("--which", choices=("norm_comparison", "constants", "all"), default="all")
    f.add_argument("--out", required=True, help="output directory")
    f.add_argument("--seed", type=int, default=0)

    v = sub.add_parser("verify", help="run acceptance checks")
    v.add_argument("--suite", choices=sorted(SUITES), default="all")
    v.add_argument("--seed", type=int, default=0)
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"{args.config}: cannot read config: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError(f"{args.config}: config must be a JSON object")
        known = vars(args)
        unknown = sorted(k for k in cfg if k not in known)
        if unknown:
            raise UsageError(f"{args.config}: unknown keys {unknown}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        converted = {}
        for action in sub._actions:
            if action.dest in cfg:
                val = cfg[action.dest]
                if action.type is not None and not isinstance(val, bool):
                    val = action.type(str(val))
                converted[action.dest] = val
        sub.set_defaults(**converted)
        args = parser.parse_args(argv)
    return args


def _validate(args) -> None:
    checks = [("draws", lambda v: v >= 2, "must be >= 2"), ("workers", lambda v: v >= 1, "must be >= 1"),
              ("eps", lambda v: v >= 0 and math.isfinite(v), "must be a finite number >= 0"),
              ("W", lambda v: v > 0, "must be > 0"), ("Lambda", lambda v: v > 0, "must be > 0"),
              ("n", lambda v: v >= 1, "must be >= 1"), ("d", lambda v: v >= 1, "must be >= 1"),
              ("m", lambda v: v >= 1, "must be >= 1"), ("delta", lambda v: v >= 0, "must be >= 0"),
              ("candidates", lambda v: v >= 1, "must be >= 1")]
    for name, ok, msg in checks:
        if hasattr(args, name) and getattr(args, name) is not None and not ok(getattr(args, name)):
            raise UsageError(f"--{name.lower()} {msg}")
    if getattr(args, "activation", None) is not None:
        args.activation = Activation.parse(args.activation)
    if hasattr(args, "input") and args.command not in ("gen", "figures", "verify") and not args.input:
        raise UsageError("--input is required")


def _emit(report: dict, out: Optional[str]) -> None:
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _params(args, keys) -> dict:
    out = {}
    for k in keys:
        v = getattr(args, k)
        out[k] = v.to_json() if hasattr(v, "to_json") else (str(v) if isinstance(v, Activation) else v)
    return out


def _net_spec(args) -> NetFamilySpec:
    return NetFamilySpec(args.p, args.W, args.Lambda, args.n, args.activation)


def cmd_gen(args) -> int:
    sample = generate_sample(args.d, args.m, args.distribution, args.seed)
    write_sample(args.out, sample)
    return 0


def cmd_estimate(args) -> int:
    sample = read_sample(args.input)
    pert = PerturbSpec(args.r, args.eps)
    if args.family == "linear":
        est = estimate_linear(sample, LinearFamilySpec(args.p, args.W), pert, args.draws, args.seed, args.workers)
        keys = ["family", "p", "r", "eps", "W", "draws", "seed"]
    elif args.family == "relu":
        est = estimate_relu(sample, LinearFamilySpec(args.p, args.W), pert, args.draws, args.seed, args.workers)
        keys = ["family", "p", "r", "eps", "W", "draws", "seed"]
    else:
        est = estimate_net(sample, _net_spec(args), pert, args.draws, args.seed, workers=args.workers)
        keys = ["family", "p", "r", "eps", "W", "Lambda", "n", "activation", "draws", "seed"]
    _emit({"command": "estimate", "params": _params(args, keys), "seed": args.seed,
           "inputs_digest": sample.digest(), "estimate": est.to_dict()}, args.out)
    return 0


def cmd_bounds(args) -> int:
    sample = read_sample(args.input)
    pert = PerturbSpec(args.r, args.eps)
    lin = LinearFamilySpec(args.p, args.W)
    keys = ["family", "p", "r", "eps", "W", "seed"]
    extra = {}
    if args.family == "linear":
        rep = adversarial_linear_bounds(sample, lin, pert, args.mode, args.draws, args.seed, workers=args.workers)
        keys += ["mode", "draws"]
    elif args.family == "linear-rc":
        rep = linear_rc_bounds(sample, lin)
    elif args.family == "relu":
        rep = relu_bounds(sample, lin, pert, args.delta, args.mode, args.draws, args.seed, args.workers)
        keys += ["mode", "draws", "delta"]
    elif args.family == "net-lipschitz":
        rep = net_lipschitz_bound(sample, _net_spec(args), pert)
        keys += ["Lambda", "n", "activation"]
    else:
        spec = _net_spec(args)
        keys += ["Lambda", "n", "activation", "variant", "candidates"]
        c_star, pi_star = args.c_star, args.pi_star
        if c_star is None or pi_star is None:
            check_norm_hypothesis(sample, pert)
            nets = [random_net(sample.d, spec, args.seed, k, "shatter-candidates") for k in range(args.candidates)]
            stats = partition_stats(sample, pert, nets)
            extra["partition_stats"] = stats.to_dict()
            c_star = stats.c_star_estimate if c_star is None else c_star
            pi_star = stats.pi_star if pi_star is None else pi_star
        rep = net_shatter_bound(sample, spec, pert, c_star, pi_star, args.variant)
    report = {"command": "bounds", "params": _params(args, keys), "seed": args.seed,
              "inputs_digest": rep.inputs_digest, "report": rep.to_dict()}
    report.update(extra)
    _emit(report, args.out)
    return 0


def _load_net(path: str) -> NetParams:
    try:
        with open(path) as fh:
            obj = json.load(fh)
        return NetParams(np.asarray(obj["W"], dtype=float), np.asarray(obj["u"], dtype=float))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise UsageError(f"{path}: not a network file with W and u: {exc}") from None


def cmd_perturb(args) -> int:
    sample = read_sample(args.input)
    if not 0 <= args.index < sample.m:
        raise UsageError(f"--index must lie in [0, {sample.m})")
    net = _load_net(args.net) if args.net else random_net(sample.d, _net_spec(args), args.seed, 0, "cli-net")
    if net.d != sample.d:
        raise UsageError("network input dimension does not match the sample")
    pert = PerturbSpec(args.r, args.eps)
    x, y = sample.X[:, args.index], float(sample.y[args.index])
    exact_ok = args.activation.name == "relu" and pert.r.value == 2.0
    if args.method == "exact" and not exact_ok:
        raise UsageError("the exact solver needs relu and r = 2")
    if args.method == "exact" or (args.method == "auto" and exact_ok):
        res = net_adversarial_exact_r2(net, x, y, pert.eps)
    else:
        res = net_adversarial_search(net, x, y, pert, SearchBudget(seed=args.seed), args.activation)
    _emit({"command": "perturb", "params": _params(args, ["r", "eps", "index", "activation", "method", "seed"]),
           "seed": args.seed, "inputs_digest": sample.digest(), "net": net.to_dict(),
           "result": res.to_dict()}, args.out)
    return 0


def cmd_shatter(args) -> int:
    sample = read_sample(args.input)
    spec, pert = _net_spec(args), PerturbSpec(args.r, args.eps)
    nets = [random_net(sample.d, spec, args.seed, k, "shatter-candidates") for k in range(args.candidates)]
    stats = partition_stats(sample, pert, nets, SearchBudget(seed=args.seed))
    _emit({"command": "shatter",
           "params": _params(args, ["p", "r", "eps", "W", "Lambda", "n", "candidates", "seed"]),
           "seed": args.seed, "inputs_digest": sample.digest(), "stats": stats.to_dict(),
           "first_candidate": stats.summaries[0].to_dict()}, args.out)
    return 0


def cmd_figures(args) -> int:
    for path in write_figures(args.which, args.out, args.seed):
        print(path)
    return 0


def cmd_verify(args) -> int:
    results = run_suite(args.suite, args.seed)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


COMMANDS = {"gen": cmd_gen, "estimate": cmd_estimate, "bounds": cmd_bounds, "perturb": cmd_perturb,
            "shatter": cmd_shatter, "figures": cmd_figures, "verify": cmd_verify}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
        _validate(args)
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else 2
    except HypothesisViolated as exc:
        print(f"advrad: hypothesis violated: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        name = getattr(exc, "filename", None)
        print(f"advrad: {name + ': ' if name else ''}{exc.strerror or exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"advrad: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

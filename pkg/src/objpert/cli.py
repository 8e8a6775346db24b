"""Command-line entry point: ``objpert <subcommand> [options]``.

Usage errors (bad flags, unreadable or malformed config) exit with 1 and
runtime failures exit with 2. Every subcommand accepts ``--config FILE`` whose ``key = value``
lines supply option defaults (keys are option names with ``-`` or ``_``);
explicit flags win. ``run`` reads an experiment config instead (see
:mod:`objpert.experiment`).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .audit import (
    audit_dp,
    estimate_stability,
    mapping_sweep,
    objdisc_sampler,
    stability_bound,
    tie_rate,
    toy_neighbor_pairs,
)
from .core import ContinuousSpace, Dataset, DiscreteSpace, PrivacyBudget
from .data import IngestSpec, ingest_csv, read_written_csv, synth_halfspace, write_csv
from .experiment import ConfigError, ExperimentConfig, parse_bool, read_config_file, run_experiment
from .mechanisms import (
    BoxLinearOracle,
    LinearLosses,
    bound_objdisc,
    bound_objsamp,
    bound_rspm,
    separator_candidate,
    verify_separator,
)
from .noise import RngStream, gaussian_vector
from .oracles import MipInstance, write_mps


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _strings(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _onoff(text: str) -> bool:
    try:
        return parse_bool(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- subcommands

def cmd_run(args) -> int:
    overrides = dict(kv.split("=", 1) for kv in args.set or [])
    overrides = {k.strip().replace("-", "_"): v.strip() for k, v in overrides.items()}
    for key in ("seed", "reps", "oracle", "out_dir", "mechanisms", "epsilons"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = str(value)
    if args.timing is not None:
        overrides["timing"] = "on" if args.timing else "off"
    if args.force:
        overrides["on_inexact"] = "warn"
    base = read_config_file(args.config) if args.config else {}
    cfg = ExperimentConfig.from_mapping({**base, **overrides})
    res = run_experiment(cfg)
    for row in res.summary:
        print(f"{row['mechanism']:8s} eps={row['epsilon']:<6g} mean_acc={row['mean_acc']:.4f} "
              f"sd={row['sd_acc']:.4f} n={row['n_runs']}")
    inexact = sum(not r["exact"] for r in res.records)
    if inexact:
        print(f"WARNING: {inexact} runs used non-certified oracle solutions; "
              "their privacy guarantee does not hold", file=sys.stderr)
    print(f"wrote {res.out_dir}")
    return 0


def _toy_pair(name: str) -> tuple[Dataset, Dataset]:
    pairs = toy_neighbor_pairs()
    if name not in pairs:
        raise UsageError(f"unknown pair {name!r}; choose from {sorted(pairs)}")
    return pairs[name]


def cmd_audit(args) -> int:
    rng = RngStream(args.seed, 0)
    if args.check == "dp":
        budget = PrivacyBudget(args.eps, args.delta)
        space = DiscreteSpace(1, 1.0, 1.0, 1.0)
        if args.data:
            a, b = read_written_csv(args.data), read_written_csv(args.neighbor)
            space = DiscreteSpace(a.dim, args.tau, args.bound, args.radius)
        else:
            a, b = _toy_pair(args.pair)
        sampler = objdisc_sampler(space, budget, sigma=args.sigma)
        report = audit_dp(sampler, a, b, budget, args.trials, rng)
        payload = report.to_dict()
    elif args.check == "mapping":
        res = mapping_sweep(args.trials, None, rng)
        payload = {k: vars(v) for k, v in res.items()}
    elif args.check == "ties":
        a, _ = _toy_pair(args.pair)
        space = DiscreteSpace(1, 1.0, 1.0, 1.0)
        sigma = args.sigma if args.sigma is not None else 1.0
        payload = {"tie_rate": tie_rate(a, space, sigma, args.trials, rng), "trials": args.trials}
    else:
        gen = rng.generator()
        box = ContinuousSpace.cube(args.d, 1.0)
        data = LinearLosses.random(args.n, box, gen)
        other = LinearLosses.random(1, box, gen)
        nb = data.neighbor(0, other.A[0], other.b[0])
        G = max(data.lipschitz_l1, nb.lipschitz_l1)
        est = estimate_stability(data, nb, BoxLinearOracle(box), args.rate, args.trials,
                                 RngStream(args.seed, 1), args.d, vectorized=True)
        payload = {"mean": est.mean, "half_width": est.half_width, "trials": est.trials, "rate": args.rate,
                   "bound": stability_bound(args.rate, G, args.d, box.diameter_linf)}
    _emit(json.dumps(payload, sort_keys=True, indent=2) + "\n", args.out)
    return 0


def cmd_bounds(args) -> int:
    if args.mechanism == "objdisc":
        value = bound_objdisc(args.G, args.D, args.d, args.tau, args.eps, args.delta, args.beta, args.n)
        print(float(f"{value:.6g}"))
    elif args.mechanism == "objsamp":
        value = bound_objsamp(args.d, args.n, args.D2, args.Dinf, args.G, args.eps, args.delta, args.beta,
                              args.alpha, double_sqrt_term=args.double_sqrt)
        print(float(f"{value:.6g}"))
    else:
        value = bound_rspm(args.m_sep, args.eps, args.delta, args.beta, args.n)
        print(f"{float(f'{value:.6g}')} (up to constants)")
    return 0


def cmd_synth(args) -> int:
    res = synth_halfspace(args.n, args.d, args.margin, args.noise, args.seed)
    write_csv(res.dataset, args.out)
    info = {"n": args.n, "d": args.d, "w_star": res.w_star.tolist(), "planted_loss": res.planted_loss}
    if args.meta:
        Path(args.meta).write_text(json.dumps(info, sort_keys=True) + "\n")
    print(json.dumps(info, sort_keys=True))
    return 0


def cmd_ingest(args) -> int:
    spec = IngestSpec(args.csv, args.label, args.positive, _strings(args.categorical or ""),
                      _strings(args.numeric or ""), bool(args.balance),
                      _strings(args.features) if args.features else None, args.seed)
    res = ingest_csv(spec)
    write_csv(res.dataset, args.out, feature_names=res.feature_names)
    print(json.dumps({"n": res.dataset.n, "d": res.dim, "features": res.feature_names}))
    return 0


def cmd_export_mps(args) -> int:
    data = read_written_csv(args.data)
    d = data.dim
    space = DiscreteSpace(d, args.tau, args.bound if args.bound is not None else math.floor(math.sqrt(d)),
                          args.radius if args.radius is not None else math.sqrt(d))
    eta = weights = None
    if args.mode == "weighted":
        weights = _floats(args.weights) if args.weights else np.ones(data.n)
    elif args.eta:
        eta = _floats(args.eta)
    else:
        dim = d + 1 if args.mode == "normalized" else d
        eta = gaussian_vector(dim, args.sigma, RngStream(args.seed, 0))
    inst = MipInstance(data, space, args.mode, eta=eta, weights=weights)
    write_mps(inst, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_verify_separator(args) -> int:
    bound = args.bound if args.bound is not None else 1.0
    space = DiscreteSpace(args.d, args.tau, bound, args.radius if args.radius is not None else bound * math.sqrt(args.d))
    sep = separator_candidate(args.d, args.tau, bound)
    bad = verify_separator(sep, space)
    if bad is None:
        out = {"verdict": "pass", "size": len(sep), "points": len(space.points())}
    else:
        out = {"verdict": "counterexample", "size": len(sep), "w": bad[0].tolist(), "w_prime": bad[1].tolist()}
    print(json.dumps(out, sort_keys=True))
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value file supplying option defaults")
    common.add_argument("--seed", type=int, help="master seed (default 0)")

    p = _Parser(prog="objpert", description="Oracle-efficient private optimization by objective perturbation.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", parents=[common], help="run an accuracy-vs-epsilon experiment")
    r.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    r.add_argument("--out-dir", dest="out_dir")
    r.add_argument("--reps", type=int)
    r.add_argument("--oracle", choices=["exhaustive", "bnb"])
    r.add_argument("--mechanisms", help="comma list of objdisc, objsamp, rspm")
    r.add_argument("--epsilons", help="comma list, strictly increasing")
    r.add_argument("--timing", type=_onoff, help="record wall-clock times (on/off, default off)")
    r.add_argument("--force", action="store_true",
                   help="keep runs whose oracle could not certify optimality (warns instead of failing)")
    r.set_defaults(func=cmd_run, config_is_experiment=True)

    a = sub.add_parser("audit", parents=[common], help="empirical privacy and stability checks")
    a.add_argument("--check", choices=["dp", "mapping", "ties", "stability"], default="dp")
    a.add_argument("--pair", default="flip-label", help="built-in neighbor pair (dp, ties)")
    a.add_argument("--data", help="dataset CSV (x0.., y) instead of a built-in pair")
    a.add_argument("--neighbor", help="neighbor dataset CSV")
    a.add_argument("--tau", type=float, default=1.0)
    a.add_argument("--bound", type=float, default=1.0)
    a.add_argument("--radius", type=float, default=1.0)
    a.add_argument("--eps", type=float, default=1.0)
    a.add_argument("--delta", type=float, default=1 / 36)
    a.add_argument("--sigma", type=float, help="override the noise scale (0 gives a non-private mechanism)")
    a.add_argument("--trials", type=int, default=100_000)
    a.add_argument("--rate", type=float, default=0.01, help="exponential rate (stability)")
    a.add_argument("--d", type=int, default=2)
    a.add_argument("--n", type=int, default=20)
    a.add_argument("--out", help="write the JSON report here instead of stdout")
    a.set_defaults(func=cmd_audit)

    b = sub.add_parser("bounds", parents=[common], help="evaluate a utility bound")
    b.add_argument("--mechanism", choices=["objdisc", "objsamp", "rspm"], required=True)
    for name, kind in [("G", float), ("D", float), ("d", int), ("tau", float), ("eps", float),
                       ("delta", float), ("beta", float), ("n", int), ("D2", float), ("Dinf", float),
                       ("alpha", float), ("m-sep", int)]:
        b.add_argument(f"--{name}", type=kind)
    b.add_argument("--double-sqrt", type=_onoff, default=False, help="use 2*sqrt(BE) in the objsamp bound")
    b.set_defaults(func=cmd_bounds, alpha=0.0, beta=0.05, tau=1.0)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic halfspace dataset")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--margin", type=float, default=0.0)
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--out", default="synth.csv")
    s.add_argument("--meta", help="also write the planted vector as JSON")
    s.set_defaults(func=cmd_synth)

    i = sub.add_parser("ingest", parents=[common], help="one-hot encode and balance a labeled CSV")
    i.add_argument("--csv", required=True)
    i.add_argument("--label", required=True)
    i.add_argument("--positive", required=True)
    i.add_argument("--categorical")
    i.add_argument("--numeric")
    i.add_argument("--features")
    i.add_argument("--balance", type=_onoff, nargs="?", const=True, default=False)
    i.add_argument("--out", default="ingested.csv")
    i.set_defaults(func=cmd_ingest)

    e = sub.add_parser("export-mps", parents=[common], help="write the oracle MIP in MPS format")
    e.add_argument("--data", required=True, help="dataset CSV (x0.., y)")
    e.add_argument("--mode", choices=["normalized", "linear", "weighted"], default="normalized")
    e.add_argument("--eta", help="comma list; drawn from N(0, sigma^2) when omitted")
    e.add_argument("--sigma", type=float, default=0.0)
    e.add_argument("--weights", help="comma list (weighted mode; default all ones)")
    e.add_argument("--tau", type=float, default=1.0)
    e.add_argument("--bound", type=float)
    e.add_argument("--radius", type=float)
    e.add_argument("--out", default="instance.mps")
    e.set_defaults(func=cmd_export_mps)

    v = sub.add_parser("verify-separator", parents=[common], help="check the threshold separator on a grid")
    v.add_argument("--d", type=int, required=True)
    v.add_argument("--tau", type=float, default=1.0)
    v.add_argument("--bound", type=float)
    v.add_argument("--radius", type=float)
    v.set_defaults(func=cmd_verify_separator)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv: list[str], args) -> argparse.Namespace:
    """Re-parse with the config file's values installed as subcommand defaults."""
    values = read_config_file(args.config)
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    dests = {a.dest: a for a in subparser._actions}
    unknown = sorted(k for k in values if k not in dests or k in ("config", "help"))
    if unknown:
        raise UsageError(f"unknown config keys for {args.command}: {unknown}")
    subparser.set_defaults(**values)
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config and not getattr(args, "config_is_experiment", False):
            args = _apply_config(parser, argv, args)
        if args.seed is None:
            args.seed = 0 if args.command != "run" else None
        if args.command == "bounds":
            _require_bounds_args(args)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"objpert: config error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except Exception as exc:
        print(f"objpert: error: {exc}", file=sys.stderr)
        return 2


def _require_bounds_args(args) -> None:
    need = {
        "objdisc": ["G", "D", "d", "eps", "delta", "n"],
        "objsamp": ["d", "n", "D2", "Dinf", "G", "eps", "delta"],
        "rspm": ["m_sep", "eps", "delta", "n"],
    }[args.mechanism]
    missing = [k for k in need if getattr(args, k) is None]
    if missing:
        raise UsageError(f"bounds --mechanism {args.mechanism} needs " + ", ".join(f"--{k.replace('_', '-')}" for k in missing))


if __name__ == "__main__":
    sys.exit(main())

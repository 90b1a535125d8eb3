"""
Command line entry point.

``causalbounds <bounds|sample|mab|cb|bench|report> [flags]``.  Exit codes:
0 on success, 2 for configuration errors, 3 for numerical failures.
"""
import argparse
import json
import os
import sys

import numpy as np

from . import fixtures, harness
from .effects import EffectQuery, SingularStratumError
from .hit_and_run import ChainError, run_chains
from .lp import InfeasibleError, IterationLimitError, sequential_lp_sample
from .polytope import PolytopeError, product_init

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise harness.ConfigError(f"file {path!r} does not exist") from None
    except json.JSONDecodeError as exc:
        raise harness.ConfigError(f"{path}: invalid JSON ({exc})") from None


def _polytope_env(source):
    """``source`` is a JSON path or a built-in instance name."""
    if source in fixtures.builtin_names():
        return {"instance": source}
    return _load_json(source)


def _out(args, name):
    path = name
    if args.out_dir and not os.path.isabs(path):
        path = os.path.join(args.out_dir, path)
    return path


def _load_polytope(source, epsilon=None):
    env = harness.resolve_env(_polytope_env(source))
    if source == "pocb_table3":
        env["normalize_tol"] = 1e-3
    if epsilon is not None:
        env["epsilon"] = epsilon
    return harness._polytope(env)


def cmd_bounds(args):
    env = _polytope_env(args.polytope)
    algorithm = {"restarts": args.restarts, "out": os.path.basename(args.out),
                 "frechet": args.frechet}
    if args.query:
        q = _load_json(args.query)
        algorithm["queries"] = q if isinstance(q, list) else [q]
    out_dir = os.path.dirname(_out(args, args.out)) or "."
    if args.action == "sweep":
        algorithm["eps"] = args.eps
        cfg = harness.ExperimentConfig("eps_sweep", T=args.steps, seed=args.seed, env=env,
                                       algorithm=algorithm, out_dir=out_dir,
                                       threads=args.threads)
    else:
        cfg = harness.ExperimentConfig("bounds", T=args.steps, seed=args.seed, env=env,
                                       algorithm=algorithm, out_dir=out_dir,
                                       threads=args.threads)
    res = harness.run_experiment(cfg)
    for label, b in res["bounds"].items():
        print(f"{label}\t[{b.lower:.4f}, {b.upper:.4f}]")
    return res


def cmd_sample(args):
    poly = _load_polytope(args.polytope)
    out = _out(args, args.out)
    if args.method == "hit-and-run":
        init = product_init(poly.grid, poly.marginal_ayw, poly.marginal_u, poly.kappa)
        S = run_chains(poly, init, args.steps, chains=args.chains, seed=args.seed,
                       threads=args.threads, burn_in=args.burn_in, thin=args.thin)
    else:
        rng = np.random.default_rng(args.seed)
        S = np.array([sequential_lp_sample(poly, rng) for _ in range(args.samples)])
    harness.write_samples(out, S, poly.grid)
    print(f"wrote {len(S)} samples to {out}")


def _config(args, kind):
    d = _load_json(args.config) if args.config else {"kind": kind}
    d.setdefault("kind", kind)
    if d["kind"] != kind:
        raise harness.ConfigError(f"kind: expected {kind!r}, got {d['kind']!r}")
    out_dir = args.out_dir or os.path.dirname(args.out) or "."
    return harness.ExperimentConfig.from_dict(d, seed=args.seed, out_dir=out_dir,
                                              threads=args.threads)


def _print_summary(files):
    for path in files:
        if path.endswith("regret_summary.csv"):
            with open(path) as fh:
                sys.stdout.write(fh.read())


def cmd_mab(args):
    cfg = _config(args, "mab")
    cfg.algorithm.setdefault("out", os.path.basename(args.out))
    res = harness.run_experiment(cfg)
    _print_summary(res["files"])


def cmd_cb(args):
    cfg = _config(args, "cb")
    cfg.algorithm.setdefault("out", os.path.basename(args.out))
    if args.mode:
        variant = "falcon" if (args.mode == "full" and args.unpruned) else args.mode
        cfg.algorithm["variants"] = [variant]
    res = harness.run_experiment(cfg)
    _print_summary(res["files"])


def cmd_bench(args):
    cfg = harness.ExperimentConfig("bench_sampler", seed=args.seed,
                                   out_dir=args.out_dir or ".",
                                   algorithm={"sizes": args.sizes, "seconds": args.seconds})
    res = harness.run_experiment(cfg)
    with open(res["files"][0]) as fh:
        sys.stdout.write(fh.read())


def cmd_report(args):
    rows = harness.report(args.results, _out(args, args.out) if args.out else None)
    print(",".join(harness.SUMMARY_HEADER))
    for r in rows:
        print(",".join(str(v) for v in r))


def build_parser():
    p = argparse.ArgumentParser(prog="causalbounds", description=__doc__.strip().splitlines()[0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--threads", type=int, default=1)
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bounds", help="causal-effect bounds on a POCB polytope")
    b.add_argument("action", choices=["compute", "sweep"])
    b.add_argument("--polytope", required=True, help="JSON file or built-in instance name")
    b.add_argument("--query", help="JSON query or list of queries")
    b.add_argument("--steps", type=int, default=2000)
    b.add_argument("--restarts", type=int, default=50)
    b.add_argument("--frechet", action="store_true", help="also report the marginal-only baseline")
    b.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.05, 0.02, 0.01, 0.0])
    b.add_argument("--out", default="bounds.csv")
    b.set_defaults(func=cmd_bounds)

    s = sub.add_parser("sample", help="draw densities from a polytope")
    s.add_argument("method", choices=["hit-and-run", "seq-lp"])
    s.add_argument("--polytope", required=True)
    s.add_argument("--steps", type=int, default=10000)
    s.add_argument("--burn-in", type=int, default=None)
    s.add_argument("--thin", type=int, default=1)
    s.add_argument("--chains", type=int, default=1)
    s.add_argument("--samples", type=int, default=10)
    s.add_argument("--out", default="samples.csv")
    s.set_defaults(func=cmd_sample)

    m = sub.add_parser("mab", help="multi-armed bandit simulation")
    m.add_argument("action", choices=["run"])
    m.add_argument("--config")
    m.add_argument("--out", default="results.csv")
    m.set_defaults(func=cmd_mab)

    c = sub.add_parser("cb", help="contextual bandit simulation")
    c.add_argument("action", choices=["run"])
    c.add_argument("--config")
    c.add_argument("--mode", choices=["lp", "box", "full"])
    c.add_argument("--unpruned", action="store_true",
                   help="with --mode full, fit over the unpruned class")
    c.add_argument("--out", default="results.csv")
    c.set_defaults(func=cmd_cb)

    k = sub.add_parser("bench", help="sampler throughput table")
    k.add_argument("--sizes", type=int, nargs="+", default=[2, 3, 4])
    k.add_argument("--seconds", type=float, default=2.0)
    k.set_defaults(func=cmd_bench)

    r = sub.add_parser("report", help="regret summary from a raw results CSV")
    r.add_argument("--results", required=True)
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (harness.ConfigError, PolytopeError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (InfeasibleError, SingularStratumError)):
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ChainError, IterationLimitError, ZeroDivisionError, RuntimeError,
            FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""
Experiment configuration, drivers and CSV output.

Every driver takes an :class:`ExperimentConfig` and writes its raw table and a
summary table into ``cfg.out_dir``.  All randomness flows from ``cfg.seed``
through numpy ``Generator`` objects built on PCG64, seeded by
``(seed, counter)`` tuples.
"""
import csv
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import fixtures
from .bounds import bounds_accelerated, frechet_only_bounds
from .contextual import ContextBoundTable, LinearFunctionClass, run_contextual
from .effects import EffectQuery
from .hit_and_run import run_chain
from .lp import sequential_lp_sample
from .mab import ArmBoundSet, run_mab
from .polytope import GridSpec, build_pocb_constraints, check_feasible, polytope_from_dict, relax

KINDS = ("bounds", "eps_sweep", "mab", "cb", "bench_sampler", "negative_transfer", "limiting")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    """What to run and where to write it.

    Attributes
    ----------
    kind : str
        One of ``bounds``, ``eps_sweep``, ``mab``, ``cb``, ``bench_sampler``,
        ``negative_transfer`` or ``limiting``.
    T : int
        Horizon, or chain length for the bound experiments.
    trials : int
    seed : int
    env : dict
        Environment payload, or ``{"instance": name}`` for a built-in.
    algorithm : dict
        Algorithm options.
    out_dir : str
    threads : int
    """

    kind: str
    T: int = 10000
    trials: int = 50
    seed: int = 0
    env: dict = field(default_factory=dict)
    algorithm: dict = field(default_factory=dict)
    out_dir: str = "."
    threads: int = 1

    def __post_init__(self):
        errors = []
        if self.kind not in KINDS:
            errors.append(f"kind: must be one of {KINDS}, got {self.kind!r}")
        for name in ("T", "trials", "threads"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                errors.append(f"{name}: must be an integer >= 1, got {v!r}")
        if not isinstance(self.env, dict):
            errors.append("env: must be an object")
        if not isinstance(self.algorithm, dict):
            errors.append("algorithm: must be an object")
        for key in ("polytope_file",):
            path = self.env.get(key) if isinstance(self.env, dict) else None
            if path is not None and not os.path.exists(path):
                errors.append(f"env.{key}: file {path!r} does not exist")
        if errors:
            raise ConfigError("; ".join(errors))

    @classmethod
    def from_dict(cls, d, **overrides):
        known = {"kind", "T", "trials", "seed", "env", "algorithm", "out_dir", "threads"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        if "kind" not in d:
            raise ConfigError("kind: missing")
        args = dict(d)
        args.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**args)


def resolve_env(env, default=None):
    """Expand ``{"instance": name}`` into the built-in payload."""
    env = dict(env or {})
    name = env.pop("instance", None)
    if name is None and not env and default is not None:
        name = default
    if name is not None:
        try:
            base = fixtures.builtin_instance(name)
        except KeyError as exc:
            raise ConfigError(f"env.instance: {exc.args[0]}") from None
        base.update(env)
        env = base
    return env


def write_csv(path, header, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def summarize(values):
    """Mean, sample SD, median, min and max."""
    v = np.asarray(values, dtype=float)
    sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return {"mean": float(v.mean()), "sd": sd, "median": float(np.median(v)),
            "min": float(v.min()), "max": float(v.max())}


SUMMARY_HEADER = ["algorithm", "mean", "sd", "median", "min", "max"]


def _summary_row(label, values):
    s = summarize(values)
    return [label] + [repr(s[k]) for k in ("mean", "sd", "median", "min", "max")]


def _record_steps(T, every):
    steps = list(range(every, T + 1, every))
    if not steps or steps[-1] != T:
        steps.append(T)
    return steps


def _trajectory_rows(label, regret, every):
    rows = []
    for t in _record_steps(regret.shape[1], every):
        for k in range(regret.shape[0]):
            rows.append([k, label, t, repr(float(regret[k, t - 1]))])
    return rows


def _polytope(env):
    if "polytope_file" in env:
        import json

        with open(env["polytope_file"]) as fh:
            env = {**json.load(fh), **{k: v for k, v in env.items() if k != "polytope_file"}}
    try:
        return polytope_from_dict(env, normalize_tol=env.get("normalize_tol", 1e-9))
    except KeyError as exc:
        raise ConfigError(f"env: missing field {exc}") from None


def _queries(alg, grid):
    qs = alg.get("queries")
    if qs is None:
        return [EffectQuery("mean_do_a", a) for a in range(grid.n_a)]
    return [EffectQuery.from_dict(q) for q in qs]


def run_bounds(cfg):
    env = resolve_env(cfg.env, "pocb_table3")
    if "normalize_tol" not in env and cfg.env.get("instance", "pocb_table3") == "pocb_table3":
        env["normalize_tol"] = 1e-3
    poly = _polytope(env)
    alg = cfg.algorithm
    restarts = alg.get("restarts", 50)
    rows, out = [], {}
    for i, q in enumerate(_queries(alg, poly.grid)):
        t0 = time.perf_counter()
        b = bounds_accelerated(poly, q, T=cfg.T, rng=np.random.default_rng([cfg.seed, i]),
                               restarts=restarts)
        ms = 1000 * (time.perf_counter() - t0)
        rows.append([q.label(), repr(b.lower), repr(b.upper), repr(b.err), b.provenance,
                     f"{ms:.1f}"])
        out[q.label()] = b
        if alg.get("frechet", False) and q.kind != "mean_do_a_given_w":
            t0 = time.perf_counter()
            fb = frechet_only_bounds(poly.grid, poly.marginal_ayw, poly.marginal_u, q,
                                     T=cfg.T, rng=np.random.default_rng([cfg.seed, 1000 + i]),
                                     restarts=restarts)
            ms = 1000 * (time.perf_counter() - t0)
            label = "frechet:" + q.label()
            rows.append([label, repr(fb.lower), repr(fb.upper), repr(fb.err), fb.provenance,
                         f"{ms:.1f}"])
            out[label] = fb
    path = write_csv(os.path.join(cfg.out_dir, alg.get("out", "bounds.csv")),
                     ["query", "l", "h", "err", "provenance", "wall_ms"], rows)
    return {"bounds": out, "files": [path]}


def run_eps_sweep(cfg):
    env = resolve_env(cfg.env, "pocb_table3")
    env.setdefault("normalize_tol", 1e-3)
    poly = _polytope(env)
    alg = cfg.algorithm
    eps_list = alg.get("eps", [0.1, 0.05, 0.02, 0.01, 0.0])
    rows, out = [], {}
    for qi, q in enumerate(_queries(alg, poly.grid)):
        for eps in eps_list:
            b = bounds_accelerated(relax(poly, eps), q, T=cfg.T,
                                   rng=np.random.default_rng([cfg.seed, qi]),
                                   restarts=alg.get("restarts", 50))
            rows.append([q.label(), repr(float(eps)), repr(b.lower), repr(b.upper)])
            out[(q.label(), float(eps))] = b
    path = write_csv(os.path.join(cfg.out_dir, "eps_sweep.csv"), ["query", "eps", "l", "h"], rows)
    return {"bounds": out, "files": [path]}


def _mab_env(cfg):
    env = resolve_env(cfg.env, "mab_table4")
    try:
        means = np.asarray(env["means"], dtype=float)
    except KeyError:
        raise ConfigError("env.means: missing") from None
    bounds = None
    if "lower" in env and "upper" in env:
        bounds = ArmBoundSet(env["lower"], env["upper"], env.get("eps"))
    return env, means, bounds


def run_mab_experiment(cfg):
    env, means, bounds = _mab_env(cfg)
    alg = cfg.algorithm
    names = alg.get("algorithms", ["plain_ucb", "alg3", "alg4"])
    delta = alg.get("delta", 0.1)
    every = alg.get("record_every", 100)
    raw, pulls_rows, summary, results = [], [], [], {}
    for name in names:
        r = run_mab(means, bounds, name, T=cfg.T, trials=cfg.trials, seed=cfg.seed,
                    delta=delta, sigma=env.get("sigma", 0.1), threads=cfg.threads)
        results[name] = r
        raw += _trajectory_rows(name, r.regret, every)
        fr = r.final_regret
        for a in range(means.size):
            pulls_rows.append([name, a, repr(float(r.pulls[:, a].mean())),
                               repr(float(r.pulls[:, a].std(ddof=1) if cfg.trials > 1 else 0.0)),
                               repr(float(fr.mean())),
                               repr(float(fr.std(ddof=1) if cfg.trials > 1 else 0.0))])
        summary.append(_summary_row(name, fr))
    out = alg.get("out", "results.csv")
    files = [
        write_csv(os.path.join(cfg.out_dir, out), ["trial", "algorithm", "t", "cumulative_regret"], raw),
        write_csv(os.path.join(cfg.out_dir, "summary.csv"),
                  ["algorithm", "arm", "mean_pulls", "sd_pulls", "mean_regret", "sd_regret"],
                  pulls_rows),
        write_csv(os.path.join(cfg.out_dir, "regret_summary.csv"), SUMMARY_HEADER, summary),
    ]
    return {"results": results, "files": files}


def _cb_class(env):
    try:
        return LinearFunctionClass(np.array(env["features"], dtype=float),
                                   ContextBoundTable(env["lower"], env["upper"]))
    except KeyError as exc:
        raise ConfigError(f"env: missing field {exc}") from None


CB_VARIANTS = {
    "lp": ("lp", True),
    "box": ("box", True),
    "full": ("full", True),
    "falcon": ("full", False),
}


def run_cb_experiment(cfg):
    env = resolve_env(cfg.env, "cb_contexts")
    fclass = _cb_class(env)
    alg = cfg.algorithm
    variants = alg.get("variants", ["lp", "box", "full", "falcon"])
    every = alg.get("record_every", 100)
    raw, summary, results = [], [], {}
    for v in variants:
        if v not in CB_VARIANTS:
            raise ConfigError(f"algorithm.variants: unknown variant {v!r}")
        mode, pruned = CB_VARIANTS[v]
        diam = env.get("diam_pruned") if pruned else env.get("diam_full")
        r = run_contextual(fclass, mode, T=cfg.T, trials=cfg.trials, seed=cfg.seed,
                           eta=env.get("eta", 1.0), delta=env.get("delta", 0.1),
                           sigma=env.get("sigma", 0.1), prune_class=pruned, diam=diam,
                           threads=cfg.threads)
        results[v] = r
        raw += _trajectory_rows(v, r.regret, every)
        summary.append(_summary_row(v, r.regret[:, -1]))
    out = alg.get("out", "results.csv")
    files = [
        write_csv(os.path.join(cfg.out_dir, out), ["trial", "algorithm", "t", "cumulative_regret"], raw),
        write_csv(os.path.join(cfg.out_dir, "regret_summary.csv"), SUMMARY_HEADER, summary),
    ]
    return {"results": results, "files": files}


def bench_polytope(n, rng):
    """POCB polytope with ``n`` levels per variable and random marginals."""
    grid = GridSpec(n, n, n, n)
    m_ayw = rng.dirichlet(np.full(n ** 3, 5.0))
    m_u = rng.dirichlet(np.full(n, 5.0))
    return build_pocb_constraints(grid, m_ayw, m_u)


def bench_samplers(n, seconds=1.0, seed=0, max_lp_samples=None, tol=1e-9):
    """Valid samples per second for hit-and-run and sequential LP.

    Returns
    -------
    dict
        ``{sampler: (samples, seconds, valid_fraction)}``.
    """
    rng = np.random.default_rng([seed, n])
    poly = bench_polytope(n, rng)
    p0 = np.outer(poly.marginal_ayw, poly.marginal_u).ravel()
    out = {}
    steps, elapsed, valid, total = 256, 0.0, 0, 0
    while elapsed < seconds:
        t0 = time.perf_counter()
        S = run_chain(poly, p0, steps, burn_in=0, rng=rng)
        elapsed += time.perf_counter() - t0
        valid += sum(bool(check_feasible(s, poly, tol)) for s in S[:: max(1, steps // 64)])
        total += len(S[:: max(1, steps // 64)])
        p0 = S[-1]
        out_n = out.get("hit_and_run", (0, 0, 0))[0] + S.shape[0]
        out["hit_and_run"] = (out_n, elapsed, valid / total)
        steps *= 2
    elapsed, valid, count = 0.0, 0, 0
    while elapsed < seconds and (max_lp_samples is None or count < max_lp_samples):
        t0 = time.perf_counter()
        p = sequential_lp_sample(poly, rng)
        elapsed += time.perf_counter() - t0
        count += 1
        valid += bool(check_feasible(p, poly, tol))
    out["sequential_lp"] = (count, elapsed, valid / count)
    return out


def run_bench(cfg):
    alg = cfg.algorithm
    rows, out = [], {}
    for n in alg.get("sizes", [2, 3, 4]):
        res = bench_samplers(n, alg.get("seconds", 2.0), cfg.seed, alg.get("max_lp_samples"))
        for name, (count, secs, frac) in res.items():
            rate = count / secs if secs > 0 else float("inf")
            rows.append([n, name, count, f"{secs:.4f}", repr(rate), repr(frac)])
        out[n] = res
    path = write_csv(os.path.join(cfg.out_dir, "bench.csv"),
                     ["n", "sampler", "samples", "seconds", "samples_per_second",
                      "valid_fraction"], rows)
    return {"bench": out, "files": [path]}


def run_negative_transfer(cfg):
    env = resolve_env(cfg.env, "negative_transfer")
    means = np.asarray(env["means"], dtype=float)
    prior = np.asarray(env["prior_means"], dtype=float)
    alg = cfg.algorithm
    test_arms = alg.get("test_arms", [3, 4])
    rows, out = [], {}
    for arm in test_arms:
        for count in env["test_counts"]:
            counts = np.full(means.size, float(env["base_count"]))
            counts[arm] = count
            r = run_mab(means, None, "warm_ucb", T=cfg.T, trials=cfg.trials, seed=cfg.seed,
                        delta=alg.get("delta", 0.1), sigma=env.get("sigma", 0.1),
                        threads=cfg.threads, prior_means=prior, prior_counts=counts)
            fr = r.final_regret
            rows.append([arm, count, repr(float(r.pulls[:, arm].mean())),
                         repr(float(fr.mean())), repr(float(fr.std(ddof=1) if cfg.trials > 1 else 0.0))])
            out[(arm, count)] = r
    path = write_csv(os.path.join(cfg.out_dir, "negative_transfer.csv"),
                     ["test_arm", "offline_count", "mean_pulls", "mean_regret", "sd_regret"], rows)
    return {"results": out, "files": [path]}


def run_limiting(cfg):
    env, means, bounds = _mab_env(cfg)
    alg = cfg.algorithm
    eps_list = alg.get("eps", [0.001, 0.01, 0.02, 0.04, 0.06, 0.08, 0.1, 1.0])
    rows, out = [], {}
    for eps in eps_list:
        b = ArmBoundSet(bounds.lower, bounds.upper, eps)
        r = run_mab(means, b, "alg4", T=cfg.T, trials=cfg.trials, seed=cfg.seed,
                    delta=alg.get("delta", 0.1), sigma=env.get("sigma", 0.1),
                    threads=cfg.threads)
        out[float(eps)] = r
        rows.append(_summary_row(repr(float(eps)), r.final_regret))
    path = write_csv(os.path.join(cfg.out_dir, "limiting.csv"),
                     ["eps", "mean", "sd", "median", "min", "max"], rows)
    return {"results": out, "files": [path]}


DRIVERS = {
    "bounds": run_bounds,
    "eps_sweep": run_eps_sweep,
    "mab": run_mab_experiment,
    "cb": run_cb_experiment,
    "bench_sampler": run_bench,
    "negative_transfer": run_negative_transfer,
    "limiting": run_limiting,
}


def run_experiment(cfg):
    """Dispatch ``cfg`` to its driver; returns results and written files."""
    return DRIVERS[cfg.kind](cfg)


def read_trajectories(path):
    """Final cumulative regret per (algorithm, trial) from a raw results CSV."""
    final = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["algorithm"], int(row["trial"]))
            t = int(row["t"])
            if key not in final or t > final[key][0]:
                final[key] = (t, float(row["cumulative_regret"]))
    by_alg = {}
    for (alg, _), (_, v) in final.items():
        by_alg.setdefault(alg, []).append(v)
    return by_alg


def report(path, out=None):
    """Recompute the regret summary from a raw results CSV."""
    by_alg = read_trajectories(path)
    rows = [_summary_row(a, v) for a, v in by_alg.items()]
    if out:
        write_csv(out, SUMMARY_HEADER, rows)
    return rows


def write_samples(path, samples, grid):
    """Sample dump: a grid metadata row, a header row, then one row per sample."""
    samples = np.atleast_2d(samples)
    meta = ["# grid"] + [f"{k}={v}" for k, v in grid.to_dict().items() if k != "y_values"]
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(meta)
        w.writerow([f"cell_{i}" for i in range(samples.shape[1])])
        w.writerows([[repr(float(v)) for v in row] for row in samples])
    return path


def read_samples(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(v) for v in r] for r in rows[2:]]).reshape(-1, len(rows[1]))

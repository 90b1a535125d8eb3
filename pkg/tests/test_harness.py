import csv
import json

import numpy as np
import pytest

from causalbounds import fixtures
from causalbounds.cli import main
from causalbounds.harness import (ConfigError, ExperimentConfig, read_samples, report,
                                  run_experiment, summarize)


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_builtin_pocb_instance():
    d = fixtures.builtin_instance("pocb_table3")
    assert d["marginal_ayw"] == [0.2328, 0.1784, 0.1351, 0.1467, 0.0304, 0.1183, 0.0149, 0.1433]
    assert d["marginal_u"] == [0.9, 0.1]


def test_builtin_mab_instance():
    d = fixtures.builtin_instance("mab_table4")
    assert d["means"] == [0.3, 0.4, 0.5, 0.7, 0.7, 0.8]
    assert d["lower"] == [0.25, 0.35, 0.45, 0.55, 0.65, 0.75]
    assert d["upper"] == [0.50, 0.60, 0.70, 0.78, 0.85, 0.90]


def test_builtin_cb_instance():
    d = fixtures.builtin_instance("cb_contexts")
    assert np.shape(d["features"]) == (11, 5, 2)
    assert np.shape(d["lower"]) == np.shape(d["upper"]) == (11, 5)


def test_builtin_negative_transfer_priors():
    assert fixtures.builtin_instance("negative_transfer")["prior_means"] == [
        0.5, 0.6, 0.7, 0.78, 0.85, 0.75]


def test_unknown_builtin():
    with pytest.raises(KeyError, match="unknown instance"):
        fixtures.builtin_instance("nope")


@pytest.mark.parametrize("name", fixtures.builtin_names())
def test_fixture_round_trip(name):
    d = fixtures.builtin_instance(name)
    back = json.loads(json.dumps(d))
    assert back == d
    assert json.dumps(back) == json.dumps(d)


def test_builtin_copies_are_independent():
    d = fixtures.builtin_instance("mab_table4")
    d["means"][0] = 99
    assert fixtures.builtin_instance("mab_table4")["means"][0] == 0.3


def test_config_validation_messages(tmp_path):
    with pytest.raises(ConfigError, match="T: must be"):
        ExperimentConfig("mab", T=0)
    with pytest.raises(ConfigError, match="trials: must be"):
        ExperimentConfig("mab", trials=0)
    with pytest.raises(ConfigError, match="kind"):
        ExperimentConfig("poker")
    with pytest.raises(ConfigError, match="polytope_file"):
        ExperimentConfig("bounds", env={"polytope_file": str(tmp_path / "missing.json")})
    with pytest.raises(ConfigError, match="unknown config fields"):
        ExperimentConfig.from_dict({"kind": "mab", "horizon": 5})


def test_mab_summary_layout(tmp_path):
    cfg = ExperimentConfig("mab", T=200, trials=3, out_dir=str(tmp_path),
                           env={"instance": "mab_table4"})
    res = run_experiment(cfg)
    summ = rows(tmp_path / "regret_summary.csv")
    assert [r["algorithm"] for r in summ] == ["plain_ucb", "alg3", "alg4"]
    assert set(summ[0]) == {"algorithm", "mean", "sd", "median", "min", "max"}
    per_arm = rows(tmp_path / "summary.csv")
    assert len(per_arm) == 18
    assert set(per_arm[0]) == {"algorithm", "arm", "mean_pulls", "sd_pulls", "mean_regret",
                               "sd_regret"}
    raw = rows(tmp_path / "results.csv")
    assert set(raw[0]) == {"trial", "algorithm", "t", "cumulative_regret"}
    assert len(res["files"]) == 3


def test_summary_recomputed_from_raw(tmp_path):
    cfg = ExperimentConfig("mab", T=250, trials=4, out_dir=str(tmp_path),
                           algorithm={"record_every": 40})
    run_experiment(cfg)
    emitted = {r["algorithm"]: r for r in rows(tmp_path / "regret_summary.csv")}
    for r in report(tmp_path / "results.csv"):
        for k, v in zip(["mean", "sd", "median", "min", "max"], r[1:]):
            assert abs(float(v) - float(emitted[r[0]][k])) <= 1e-12


def test_single_trial_single_step(tmp_path):
    for kind in ("mab", "cb"):
        out = tmp_path / kind
        res = run_experiment(ExperimentConfig(kind, T=1, trials=1, out_dir=str(out)))
        raw = rows(out / "results.csv")
        assert {r["t"] for r in raw} == {"1"}
        summ = rows(out / "regret_summary.csv")
        assert all(float(r["sd"]) == 0.0 for r in summ)
        assert res["files"]


def test_cb_variants_and_summary(tmp_path):
    cfg = ExperimentConfig("cb", T=200, trials=2, out_dir=str(tmp_path))
    run_experiment(cfg)
    assert [r["algorithm"] for r in rows(tmp_path / "regret_summary.csv")] == [
        "lp", "box", "full", "falcon"]


def test_bench_table(tmp_path):
    cfg = ExperimentConfig("bench_sampler", out_dir=str(tmp_path),
                           algorithm={"sizes": [2, 3, 4], "seconds": 0.05, "max_lp_samples": 1})
    run_experiment(cfg)
    table = rows(tmp_path / "bench.csv")
    assert [(r["n"], r["sampler"]) for r in table] == [
        (str(n), s) for n in (2, 3, 4) for s in ("hit_and_run", "sequential_lp")]
    assert all(float(r["valid_fraction"]) == 1.0 for r in table)


def test_negative_transfer_and_limiting(tmp_path):
    env = fixtures.builtin_instance("negative_transfer")
    env["test_counts"] = [100, 3000]
    run_experiment(ExperimentConfig("negative_transfer", T=300, trials=2, env=env,
                                    out_dir=str(tmp_path)))
    assert len(rows(tmp_path / "negative_transfer.csv")) == 4
    run_experiment(ExperimentConfig("limiting", T=300, trials=2, out_dir=str(tmp_path),
                                    algorithm={"eps": [0.001, 1.0]}))
    assert [r["eps"] for r in rows(tmp_path / "limiting.csv")] == ["0.001", "1.0"]


def test_summarize():
    s = summarize([1.0, 2.0, 6.0])
    assert s == {"mean": 3.0, "sd": pytest.approx(np.std([1, 2, 6], ddof=1)), "median": 2.0,
                 "min": 1.0, "max": 6.0}


def test_cli_sample_round_trip(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["--seed", "3", "sample", "hit-and-run", "--polytope", "pocb_table3",
                 "--steps", "200", "--burn-in", "50", "--thin", "5", "--chains", "2",
                 "--out", str(out)]) == 0
    S = read_samples(out)
    assert S.shape == (60, 16)
    with open(out) as fh:
        assert fh.readline().startswith("# grid")
    assert main(["sample", "seq-lp", "--polytope", "pocb_table3", "--samples", "2",
                 "--out", str(tmp_path / "l.csv")]) == 0


def test_cli_bounds(tmp_path):
    q = tmp_path / "q.json"
    q.write_text(json.dumps({"kind": "mean_do_a", "a": 1}))
    assert main(["--out-dir", str(tmp_path), "bounds", "compute", "--polytope", "pocb_table3",
                 "--query", str(q), "--steps", "300", "--restarts", "2"]) == 0
    (row,) = rows(tmp_path / "bounds.csv")
    assert row["query"] == "mean_do_a(a=1)" and float(row["l"]) < float(row["h"])
    assert set(row) == {"query", "l", "h", "err", "provenance", "wall_ms"}


def test_cli_mab_cb_report(tmp_path):
    cfg = tmp_path / "m.json"
    cfg.write_text(json.dumps({"kind": "mab", "T": 50, "trials": 2}))
    assert main(["--out-dir", str(tmp_path), "mab", "run", "--config", str(cfg)]) == 0
    cb = tmp_path / "c.json"
    cb.write_text(json.dumps({"kind": "cb", "T": 50, "trials": 2}))
    out = tmp_path / "cb"
    assert main(["--out-dir", str(out), "cb", "run", "--config", str(cb), "--mode", "full",
                 "--unpruned"]) == 0
    assert [r["algorithm"] for r in rows(out / "regret_summary.csv")] == ["falcon"]
    assert main(["report", "--results", str(tmp_path / "results.csv")]) == 0


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"kind": "mab", "T": 0}))
    assert main(["mab", "run", "--config", str(bad)]) == 2
    assert main(["mab", "run", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["cb", "run", "--config", str(bad)]) == 2
    q = tmp_path / "q.json"
    q.write_text(json.dumps({"kind": "mean_do_a", "a": 7}))
    assert main(["--out-dir", str(tmp_path), "bounds", "compute", "--polytope", "pocb_table3",
                 "--query", str(q)]) == 2
    # context w = 1 carries no mass: the conditional effect is undefined
    poly = {"grid": {"n_a": 2, "n_y": 2, "n_w": 2, "n_u": 2},
            "marginal_ayw": [0.25, 0, 0.25, 0, 0.25, 0, 0.25, 0], "marginal_u": [0.5, 0.5]}
    pf = tmp_path / "p.json"
    pf.write_text(json.dumps(poly))
    q.write_text(json.dumps({"kind": "mean_do_a_given_w", "a": 0, "w": 1}))
    assert main(["--out-dir", str(tmp_path), "bounds", "compute", "--polytope", str(pf),
                 "--query", str(q), "--steps", "50", "--restarts", "1"]) == 3

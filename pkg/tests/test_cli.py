"""CLI contract tests: exit codes, artifacts, determinism."""

import json
import os

import numpy as np
import pytest

from asyncfed.cli import main


def write_config(tmp_path, **overrides):
    config = {
        "mode": "async_periodic",
        "policy": "random",
        "seed": 5,
        "n_devices": 4,
        "max_scheduled": 2,
        "t_min": 1.0,
        "t_max": 4.0,
        "period": 1.0,
        "horizon_ticks": 12,
        "symbols_per_round": 400,
        "task": {"kind": "quadratic", "dim": 4, "center_spread": 1.0},
    }
    config.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return str(path)


def run_cli(*argv):
    return main(list(argv))


class TestRun:
    def test_minimal_run_writes_artifacts(self, tmp_path):
        cfg = write_config(tmp_path)
        out = str(tmp_path / "out")
        assert run_cli("run", "--config", cfg, "--out", out) == 0
        run_dir = os.path.join(out, "run-0001")
        for name in ("rounds.csv", "summary.json", "manifest.json"):
            assert os.path.exists(os.path.join(run_dir, name))
        manifest = json.loads(open(os.path.join(run_dir, "manifest.json")).read())
        assert len(manifest["hash"]) == 64

    def test_override_echoed_in_summary(self, tmp_path):
        cfg = write_config(tmp_path)
        out = str(tmp_path / "out")
        assert run_cli("run", "--config", cfg, "--out", out,
                       "--override", "gamma=0.5") == 0
        summary = json.loads(
            open(os.path.join(out, "run-0001", "summary.json")).read())
        assert summary["config"]["gamma"] == 0.5

    def test_reruns_never_overwrite(self, tmp_path):
        cfg = write_config(tmp_path)
        out = str(tmp_path / "out")
        run_cli("run", "--config", cfg, "--out", out)
        run_cli("run", "--config", cfg, "--out", out)
        assert os.path.isdir(os.path.join(out, "run-0001"))
        assert os.path.isdir(os.path.join(out, "run-0002"))

    def test_determinism_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path)
        out = str(tmp_path / "out")
        run_cli("run", "--config", cfg, "--out", out)
        run_cli("run", "--config", cfg, "--out", out)
        a = open(os.path.join(out, "run-0001", "rounds.csv"), "rb").read()
        b = open(os.path.join(out, "run-0002", "rounds.csv"), "rb").read()
        assert a == b

    def test_unknown_key_exits_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, nonsense=3)
        assert run_cli("run", "--config", cfg, "--out", str(tmp_path / "o")) == 2
        assert "nonsense" in capsys.readouterr().err

    def test_invalid_json_exits_2(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert run_cli("run", "--config", str(path),
                       "--out", str(tmp_path / "o")) == 2

    def test_missing_subcommand_exits_2(self, capsys):
        assert run_cli() == 2

    def test_env_var_output_root(self, tmp_path, monkeypatch):
        cfg = write_config(tmp_path)
        monkeypatch.setenv("FEDASYNC_OUT", str(tmp_path / "envout"))
        assert run_cli("run", "--config", cfg) == 0
        assert os.path.isdir(tmp_path / "envout" / "run-0001")

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg = write_config(tmp_path)
        out = str(tmp_path / "out")
        run_cli("run", "--config", cfg, "--out", out, "--seed", "99")
        summary = json.loads(
            open(os.path.join(out, "run-0001", "summary.json")).read())
        assert summary["seed"] == 99

    def test_labeled_runs_emit_partition_manifest(self, tmp_path):
        cfg = write_config(
            tmp_path, horizon_ticks=4,
            task={"kind": "classification", "classes": 4, "features": 3,
                  "train_size": 200, "test_size": 40, "partition": "noniid"})
        out = str(tmp_path / "out")
        assert run_cli("run", "--config", cfg, "--out", out) == 0
        run_dir = os.path.join(out, "run-0001")
        partition = json.loads(open(os.path.join(run_dir, "partition.json")).read())
        devices = partition["devices"]
        assert len(devices) == 4
        assert sum(sum(v["histogram"]) for v in devices.values()) == 200
        # every JSON artifact carries the manifest hash
        manifest = json.loads(open(os.path.join(run_dir, "manifest.json")).read())
        summary = json.loads(open(os.path.join(run_dir, "summary.json")).read())
        assert partition["manifest_hash"] == manifest["hash"]
        assert summary["manifest_hash"] == manifest["hash"]


SMALL_VERIFY = [
    "--override", "trace_seeds=2", "--override", "trace_ticks=500",
    "--override", "inequality_trials=60", "--override", "variance_samples=15000",
    "--override", "unbiased_draws=15000", "--override", "unbiased_vectors=6",
]


class TestVerify:
    def test_default_checks_pass(self, tmp_path, capsys):
        out = str(tmp_path / "out")
        assert run_cli("verify", "--out", out, *SMALL_VERIFY) == 0
        report = json.loads(
            open(os.path.join(out, "verify-0001", "verification.json")).read())
        assert report["pass"] is True
        assert {"name", "pass", "lhs", "rhs", "margin"} <= set(report["checks"][0])
        assert "pass" in capsys.readouterr().out

    def test_bias_injection_fails(self, tmp_path):
        out = str(tmp_path / "out")
        code = run_cli("verify", "--out", out, *SMALL_VERIFY,
                       "--override", "quantizer_bias=0.05",
                       "--override", "trace_ticks=60")
        assert code == 1

    def test_classification_task_rejected(self, tmp_path):
        cfg = tmp_path / "verify.json"
        cfg.write_text(json.dumps({"task": {"kind": "classification"}}))
        assert run_cli("verify", "--config", str(cfg),
                       "--out", str(tmp_path / "o")) == 2


class TestSweep:
    def test_gamma_sweep(self, tmp_path):
        cfg = write_config(tmp_path, horizon_ticks=6)
        out = str(tmp_path / "out")
        assert run_cli("sweep", "--config", cfg, "--out", out,
                       "--axis", "gamma", "--values", "0.5,1,2") == 0
        sweep_dir = os.path.join(out, "sweep-0001")
        points = [d for d in os.listdir(sweep_dir) if d.startswith("gamma=")]
        assert len(points) == 3
        lines = open(os.path.join(sweep_dir, "sweep.csv")).read().splitlines()
        assert lines[0].split(",")[0] == "gamma"
        assert len(lines) == 1 + 3 * 6
        meta = json.loads(open(os.path.join(sweep_dir, "sweep.json")).read())
        assert [p["value"] for p in meta["points"]] == [0.5, 1, 2]

    def test_policy_sweep_all_five(self, tmp_path):
        cfg = write_config(
            tmp_path, horizon_ticks=5, n_devices=6, max_scheduled=2,
            task={"kind": "classification", "classes": 3, "features": 3,
                  "train_size": 90, "test_size": 30, "partition": "iid"})
        out = str(tmp_path / "out")
        assert run_cli("sweep", "--config", cfg, "--out", out, "--jobs", "2",
                       "--axis", "policy",
                       "--values", "random,bc,bcbn2,age,proposed") == 0
        sweep_dir = os.path.join(out, "sweep-0001")
        assert len([d for d in os.listdir(sweep_dir)
                    if d.startswith("policy=")]) == 5

    def test_period_sweep_dotted_axis(self, tmp_path):
        cfg = write_config(tmp_path, horizon_ticks=4)
        out = str(tmp_path / "out")
        assert run_cli("sweep", "--config", cfg, "--out", out,
                       "--axis", "period", "--values", "4.0,2.0,1.0,0.5") == 0

    def test_unknown_axis_exits_2(self, tmp_path):
        cfg = write_config(tmp_path)
        assert run_cli("sweep", "--config", cfg, "--out", str(tmp_path / "o"),
                       "--axis", "wrongkey", "--values", "1,2") == 2


def oracle_instances(count, pool_range=(2, 13), r_range=(1, 7), seed=0):
    rng = np.random.default_rng(seed)
    instances = []
    for _ in range(count):
        pool = int(rng.integers(*pool_range))
        width = int(rng.integers(2, 9))
        instances.append({
            "histograms": rng.integers(0, 12, size=(pool, width)).tolist(),
            "capacities": rng.uniform(0.5, 4.0, size=pool).tolist(),
            "max_scheduled": int(rng.integers(*r_range)),
        })
    return instances


class TestOracle:
    def test_small_instances_all_equal(self, tmp_path):
        path = tmp_path / "instances.json"
        path.write_text(json.dumps(oracle_instances(30)))
        out = str(tmp_path / "out")
        assert run_cli("oracle", "--instances", str(path), "--out", out) == 0
        report = json.loads(
            open(os.path.join(out, "oracle-0001", "oracle.json")).read())
        assert report["equal"] is True
        assert len(report["instances"]) == 30

    def test_single_candidate_trivially_equal(self, tmp_path):
        path = tmp_path / "one.json"
        path.write_text(json.dumps([{
            "histograms": [[3, 1, 2]],
            "capacities": [1.0],
            "max_scheduled": 1,
        }]))
        assert run_cli("oracle", "--instances", str(path),
                       "--out", str(tmp_path / "o")) == 0

    def test_oversized_instance_exits_2(self, tmp_path):
        rng = np.random.default_rng(1)
        path = tmp_path / "big.json"
        path.write_text(json.dumps([{
            "histograms": rng.integers(0, 5, size=(44, 4)).tolist(),
            "capacities": [1.0] * 44,
            "max_scheduled": 22,
        }]))
        assert run_cli("oracle", "--instances", str(path),
                       "--out", str(tmp_path / "o")) == 2

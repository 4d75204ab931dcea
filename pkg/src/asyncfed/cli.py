"""Command-line entry point.

Subcommands: ``run`` executes one configured simulation, ``verify``
runs the numerical verification suite, ``sweep`` repeats a run across a
list of values for one config key, and ``oracle`` compares the
label-variance policy against exhaustive enumeration on instance files.

Exit codes: 0 success, 1 a verification or comparison check failed,
2 usage or configuration error.  Every invocation writes into a fresh
``run-NNNN`` directory below the output root (``--out``, the
``FEDASYNC_OUT`` environment variable, or ``./runs``); reruns never
overwrite existing artifacts.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .analysis import run_verification
from .partition import Shard, partition_manifest
from .scheduling import (OracleSizeError, ScheduleContext, label_variance,
                         capacity_prefilter, oracle_min_label_variance, schedule)
from .simulation import (CSV_FIXED_COLUMNS, ConfigError, SimConfig, Simulator,
                         rng_stream, rounds_csv_lines, run_summary)

__all__ = ["main"]

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return data


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_overrides(data: dict, overrides) -> dict:
    out = json.loads(json.dumps(data))  # deep copy
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        target = out
        parts = key.split(".")
        for part in parts[:-1]:
            target = target.setdefault(part, {})
            if not isinstance(target, dict):
                raise ConfigError(f"override path {key!r} crosses a non-object")
        target[parts[-1]] = _parse_value(raw)
    return out


def _output_root(args) -> str:
    return args.out or os.environ.get("FEDASYNC_OUT") or "runs"


def _fresh_run_dir(root: str, prefix: str) -> str:
    os.makedirs(root, exist_ok=True)
    index = 1
    while True:
        path = os.path.join(root, f"{prefix}-{index:04d}")
        try:
            os.makedirs(path)
            return path
        except FileExistsError:
            index += 1


def _config_hash(cfg_dict: dict, seed: int) -> str:
    canonical = json.dumps({"config": cfg_dict, "seed": seed}, sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


def _manifest(cfg_dict: dict, seed: int, artifacts: dict, started: float) -> dict:
    return {
        "hash": _config_hash(cfg_dict, seed),
        "seed": seed,
        "config": cfg_dict,
        "artifacts": artifacts,
        "started_unix": started,
        "finished_unix": time.time(),
    }


def _write_json(path: str, payload: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _execute_run(cfg: SimConfig, run_dir: str) -> dict:
    started = time.time()
    run_hash = _config_hash(cfg.to_dict(), cfg.seed)
    sim = Simulator(cfg)
    records = sim.run()
    lines = rounds_csv_lines(records, cfg.max_scheduled)
    rounds_path = os.path.join(run_dir, "rounds.csv")
    with open(rounds_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    summary = run_summary(cfg, records)
    summary["manifest_hash"] = run_hash
    summary_path = os.path.join(run_dir, "summary.json")
    _write_json(summary_path, summary)
    artifacts = {"rounds": rounds_path, "summary": summary_path}
    if hasattr(sim.task, "shards"):
        shards_path = os.path.join(run_dir, "partition.json")
        shards = [Shard(k, idx) for k, idx in enumerate(sim.task.shards)]
        _write_json(shards_path, {
            "manifest_hash": run_hash,
            "devices": partition_manifest(shards, sim.task.labels,
                                          sim.task.n_classes),
        })
        artifacts["partition"] = shards_path
    manifest = _manifest(cfg.to_dict(), cfg.seed, artifacts, started)
    _write_json(os.path.join(run_dir, "manifest.json"), manifest)
    return summary


def cmd_run(args) -> int:
    data = _apply_overrides(_load_config(args.config), args.override)
    if args.seed is not None:
        data["seed"] = args.seed
    cfg = SimConfig.from_dict(data)
    run_dir = _fresh_run_dir(_output_root(args), "run")
    summary = _execute_run(cfg, run_dir)
    print(f"run complete: {run_dir} (final loss {summary['final_loss']:.6g})")
    return EXIT_OK


def cmd_verify(args) -> int:
    data = _apply_overrides(_load_config(args.config) if args.config else {},
                            args.override)
    if args.seed is not None:
        data["seed"] = args.seed
    task_kind = data.pop("task", {}).get("kind", "quadratic")
    if task_kind != "quadratic":
        raise ConfigError("verification requires a quadratic task")
    try:
        report = run_verification(data)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    report["manifest_hash"] = _config_hash(data, int(data.get("seed", 0)))
    run_dir = _fresh_run_dir(_output_root(args), "verify")
    _write_json(os.path.join(run_dir, "verification.json"), report)
    for check in report["checks"]:
        state = "pass" if check["pass"] else "FAIL"
        print(f"{state}  {check['name']}  lhs={check['lhs']:.6g} rhs={check['rhs']:.6g}")
    print(f"report: {run_dir}/verification.json")
    return EXIT_OK if report["pass"] else EXIT_CHECK_FAILED


def cmd_sweep(args) -> int:
    base = _apply_overrides(_load_config(args.config), args.override)
    if args.seed is not None:
        base["seed"] = args.seed
    values = [_parse_value(v) for v in args.values.split(",")]
    if not values:
        raise ConfigError("sweep needs at least one value")
    sweep_dir = _fresh_run_dir(_output_root(args), "sweep")
    base_seed = int(base.get("seed", 0))

    def one_point(item):
        index, value = item
        data = _apply_overrides(base, [f"{args.axis}={json.dumps(value)}"])
        data["seed"] = base_seed + index
        cfg = SimConfig.from_dict(data)
        point_dir = os.path.join(sweep_dir, f"{args.axis.replace('.', '_')}={value}")
        os.makedirs(point_dir)
        records = Simulator(cfg).run()
        lines = rounds_csv_lines(records, cfg.max_scheduled)
        with open(os.path.join(point_dir, "rounds.csv"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        summary = run_summary(cfg, records)
        summary["manifest_hash"] = _config_hash(cfg.to_dict(), cfg.seed)
        _write_json(os.path.join(point_dir, "summary.json"), summary)
        _write_json(os.path.join(point_dir, "manifest.json"),
                    _manifest(cfg.to_dict(), cfg.seed, {"rounds": "rounds.csv"},
                              time.time()))
        return value, cfg, records, summary

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(one_point, enumerate(values)))

    axis_column = args.axis.split(".")[-1]
    # fixed round columns already carry mode/policy; avoid a duplicate header
    prepend_axis = axis_column not in CSV_FIXED_COLUMNS
    header = ([axis_column] if prepend_axis else []) + ["seed"] + CSV_FIXED_COLUMNS
    rows = [",".join(header)]
    for value, cfg, records, _ in results:
        for line in rounds_csv_lines(records, cfg.max_scheduled)[1:]:
            fixed = line.split(",")[: len(CSV_FIXED_COLUMNS)]
            lead = [str(value)] if prepend_axis else []
            rows.append(",".join(lead + [str(cfg.seed)] + fixed))
    with open(os.path.join(sweep_dir, "sweep.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(rows) + "\n")
    _write_json(os.path.join(sweep_dir, "sweep.json"), {
        "axis": args.axis,
        "points": [{"value": v, "seed": c.seed, "final_loss": s["final_loss"],
                    "final_accuracy": s["final_accuracy"]}
                   for v, c, _, s in results],
    })
    print(f"sweep complete: {sweep_dir} ({len(results)} points)")
    return EXIT_OK


def cmd_oracle(args) -> int:
    try:
        with open(args.instances, "r", encoding="utf-8") as fh:
            instances = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read instance file: {exc}") from exc
    if not isinstance(instances, list) or not instances:
        raise ConfigError("instance file must hold a nonempty JSON list")
    rng = rng_stream(args.seed or 0, "oracle")
    results, all_equal = [], True
    for i, inst in enumerate(instances):
        hists = {k: np.asarray(h, dtype=int)
                 for k, h in enumerate(inst["histograms"])}
        caps = {k: float(c) for k, c in enumerate(inst["capacities"])}
        if len(hists) != len(caps):
            raise ConfigError(f"instance {i}: histogram/capacity count mismatch")
        ctx = ScheduleContext(
            ready=tuple(hists), capacities=caps,
            max_scheduled=int(inst["max_scheduled"]),
            population=int(inst.get("population", 2 * len(hists))),
            histograms=hists)
        chosen = schedule("proposed", ctx, rng)
        pool = capacity_prefilter(ctx)
        best = oracle_min_label_variance({k: hists[k] for k in pool}, len(chosen))
        policy_score = label_variance([hists[k] for k in chosen])
        oracle_score = label_variance([hists[k] for k in best])
        equal = abs(policy_score - oracle_score) <= 1e-9
        all_equal = all_equal and equal
        results.append({"instance": i, "policy_variance": policy_score,
                        "oracle_variance": oracle_score, "equal": equal})
    run_dir = _fresh_run_dir(_output_root(args), "oracle")
    _write_json(os.path.join(run_dir, "oracle.json"),
                {"equal": all_equal, "instances": results})
    print(f"oracle comparison: {'all equal' if all_equal else 'MISMATCH'} "
          f"({len(results)} instances), report in {run_dir}")
    return EXIT_OK if all_equal else EXIT_CHECK_FAILED


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asyncfed",
        description="Asynchronous federated learning simulator over a "
                    "rate-limited wireless uplink")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="JSON run config")
        else:
            p.add_argument("--config", help="JSON config (optional)")
        p.add_argument("--out", help="output root (default $FEDASYNC_OUT or ./runs)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--override", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable, dotted paths ok)")

    p_run = sub.add_parser("run", help="execute one simulation")
    common(p_run)
    p_run.set_defaults(handler=cmd_run)

    p_verify = sub.add_parser("verify", help="run the numerical verification suite")
    common(p_verify, needs_config=False)
    p_verify.set_defaults(handler=cmd_verify)

    p_sweep = sub.add_parser("sweep", help="run one config across an axis of values")
    common(p_sweep)
    p_sweep.add_argument("--axis", required=True, help="config key to sweep")
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated list of values")
    p_sweep.add_argument("--jobs", type=int, default=1,
                         help="concurrent sweep points")
    p_sweep.set_defaults(handler=cmd_sweep)

    p_oracle = sub.add_parser("oracle",
                              help="compare the label-variance policy to the "
                                   "exhaustive oracle")
    p_oracle.add_argument("--instances", required=True, help="JSON instance file")
    p_oracle.add_argument("--out", help="output root")
    p_oracle.add_argument("--seed", type=int, help="rng seed for the policy")
    p_oracle.set_defaults(handler=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.handler(args)
    except OracleSizeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyError as exc:
        print(f"config error: missing key {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Deterministic event loop for the three training protocols.

``async_periodic`` aggregates every fixed wall-clock period from
whichever devices have finished local training; ``sync_fedavg`` waits
for the slowest device each round; ``fedasync`` folds every device
completion into the global model immediately.  All three are normalized
to the same uplink budget per unit time (the symbol block recurs every
period whether or not anyone transmits), so their records are directly
comparable.

Every source of randomness draws from its own named generator stream
derived from the run seed, which makes whole traces bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from . import phy
from .aggregation import AgeTracker, age_weights, aggregate_async, aggregate_sync, fedasync_step
from .partition import partition_iid, partition_noniid
from .scheduling import POLICIES, ScheduleContext, schedule, update_staleness
from .tasks import (ClassificationTask, global_loss, load_csv_dataset,
                    random_quadratic_task)
from .training import TrainerConfig, local_train

__all__ = ["ConfigError", "SimConfig", "RoundRecord", "Simulator",
           "run", "rng_stream", "build_task", "CSV_FIXED_COLUMNS",
           "rounds_csv_lines", "run_summary"]

MODES = ("async_periodic", "sync_fedavg", "fedasync")
_TIME_EPS = 1e-9


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending key."""


def rng_stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for one named randomness source."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, *name.encode()]
    return np.random.default_rng(np.random.SeedSequence(entropy))


@dataclass(frozen=True)
class SimConfig:
    """Flat run configuration; see README for the JSON schema."""

    mode: str = "async_periodic"
    policy: str = "random"
    seed: int = 0
    n_devices: int = 8
    max_scheduled: int = 2
    t_min: float = 1.0
    t_max: float = 4.0
    period: float | None = None          # defaults to t_max / 4
    horizon_ticks: int | None = 200
    horizon_time: float | None = None
    symbols_per_round: int = 2000
    snr_db: float = 13.0
    fading: str = "rayleigh"
    levels: int = 4
    local_steps: int = 1
    batch_size: int | None = None
    reg_coeff: float = 0.02
    lr_kind: str = "sim"
    lr_alpha1: float = 0.01
    lr_kappa0: float = 50.0
    lr_beta: float | None = None
    lr_kappa: float | None = None
    lr_value: float | None = None
    gamma: float = 1.0
    alpha_filter: float = 0.4
    fedasync_operand: str = "model"
    redraw_durations: bool = False
    init_scale: float = 0.0
    task_seed: int | None = None         # defaults to seed; fixes the task across seeds
    task: dict = field(default_factory=lambda: {"kind": "quadratic"})

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
        try:
            cfg = cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def tick_period(self) -> float:
        return self.t_max / 4.0 if self.period is None else self.period

    @property
    def wallclock_horizon(self) -> float:
        if self.horizon_time is not None:
            return float(self.horizon_time)
        return self.horizon_ticks * self.tick_period

    def validate(self):
        checks = [
            (self.mode in MODES, "mode"),
            (self.policy in POLICIES, "policy"),
            (self.n_devices >= 1, "n_devices"),
            (1 <= self.max_scheduled <= self.n_devices, "max_scheduled"),
            (0 < self.t_min <= self.t_max, "t_min/t_max"),
            (self.tick_period > 0, "period"),
            (self.symbols_per_round >= self.max_scheduled, "symbols_per_round"),
            (self.levels >= 1, "levels"),
            (self.fading in ("rayleigh", "none"), "fading"),
            (self.gamma > 0, "gamma"),
            (0 < self.alpha_filter <= 1, "alpha_filter"),
            (self.fedasync_operand in ("model", "update"), "fedasync_operand"),
            (self.init_scale >= 0, "init_scale"),
            (isinstance(self.task, dict) and "kind" in self.task, "task"),
        ]
        for ok, key in checks:
            if not ok:
                raise ConfigError(f"invalid value for config key {key!r}")
        if self.horizon_time is None and self.horizon_ticks is None:
            raise ConfigError("invalid value for config key 'horizon_ticks'")
        if (self.horizon_time or 0) < 0 or (self.horizon_ticks or 1) < 1:
            raise ConfigError("invalid value for config key 'horizon_ticks'")
        if self.wallclock_horizon <= 0:
            raise ConfigError("invalid value for config key 'horizon_time'")
        self.trainer_config()  # surfaces lr/batch validation errors

    def trainer_config(self, reg_coeff: float | None = None) -> TrainerConfig:
        try:
            return TrainerConfig(
                local_steps=self.local_steps,
                reg_coeff=self.reg_coeff if reg_coeff is None else reg_coeff,
                batch_size=self.batch_size,
                lr_kind=self.lr_kind,
                lr_alpha1=self.lr_alpha1,
                lr_kappa0=self.lr_kappa0,
                lr_beta=self.lr_beta,
                lr_kappa=self.lr_kappa,
                lr_value=self.lr_value,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def build_task(cfg: SimConfig):
    """Construct the configured task from the run's named rng streams."""
    spec = dict(cfg.task)
    kind = spec.pop("kind")
    task_seed = cfg.seed if cfg.task_seed is None else cfg.task_seed
    rng = rng_stream(task_seed, "task")
    if kind == "quadratic":
        params = {
            "n_devices": cfg.n_devices,
            "dim": spec.pop("dim", 8),
            "curvature_range": tuple(spec.pop("curvature_range", (1.0, 1.0))),
            "center_spread": spec.pop("center_spread", 1.0),
            "center_offset": spec.pop("center_offset", 0.0),
            "shard_size": spec.pop("shard_size", 1),
            "scale_jitter": spec.pop("scale_jitter", 0.0),
        }
        if spec:
            raise ConfigError(f"unknown task key {sorted(spec)[0]!r}")
        return random_quadratic_task(rng, **params)
    if kind == "classification":
        n_classes = spec.pop("classes", 10)
        features = spec.pop("features", 8)
        train_size = spec.pop("train_size", 2000)
        test_size = spec.pop("test_size", 500)
        spread = spec.pop("cluster_spread", 2.0)
        noise = spec.pop("noise", 1.0)
        how = spec.pop("partition", "iid")
        csv_path = spec.pop("csv_path", None)
        csv_test_path = spec.pop("csv_test_path", None)
        if spec:
            raise ConfigError(f"unknown task key {sorted(spec)[0]!r}")
        part_seed = task_seed
        if csv_path is not None:
            x, y = load_csv_dataset(csv_path)
            n_classes = int(y.max()) + 1
            x_test = y_test = None
            if csv_test_path is not None:
                x_test, y_test = load_csv_dataset(csv_test_path)
        else:
            x, y, x_test, y_test = _cluster_train_test(rng, n_classes, features,
                                                       train_size, test_size,
                                                       spread, noise)
        part_rng = rng_stream(part_seed, "partition")
        if how == "iid":
            shards = partition_iid(y.size, cfg.n_devices, part_rng)
        elif how == "noniid":
            shards = partition_noniid(y, cfg.n_devices, part_rng)
        else:
            raise ConfigError(f"unknown task partition {how!r}")
        return ClassificationTask(x, y, n_classes, shards, x_test, y_test)
    raise ConfigError(f"unknown task kind {kind!r}")


def _cluster_train_test(rng, n_classes, features, train_size, test_size, spread, noise):
    """Train and test splits drawn around one shared set of class means."""
    means = rng.normal(0.0, spread, size=(n_classes, features))
    y = rng.permuted(np.resize(np.arange(n_classes), train_size))
    x = means[y] + rng.normal(0.0, noise, size=(train_size, features))
    y_test = rng.permuted(np.resize(np.arange(n_classes), test_size))
    x_test = means[y_test] + rng.normal(0.0, noise, size=(test_size, features))
    return x, y, x_test, y_test


@dataclass(frozen=True)
class RoundRecord:
    """One emitted metrics row per aggregation opportunity."""

    t: int
    wallclock: float
    mode: str
    policy: str
    ready: tuple
    scheduled: tuple
    ages: tuple
    capacities: tuple
    symbols: tuple
    retained: tuple
    weights: tuple
    loss: float
    accuracy: float | None
    bits_used: int
    symbols_used: int
    cum_bits: int
    cum_symbols: int
    max_age: int
    age_diversity: int


class _Device:
    __slots__ = ("duration", "busy_until", "anchor", "update", "update_norm2")

    def __init__(self, duration: float):
        self.duration = duration
        self.busy_until = 0.0
        self.anchor = None
        self.update = None
        self.update_norm2 = 0.0


class Simulator:
    """Owns the task, device fleet and server state for one run."""

    def __init__(self, cfg: SimConfig):
        cfg.validate()
        self.cfg = cfg
        self.task = build_task(cfg)
        if self.task.n_devices != cfg.n_devices:
            raise ConfigError("task device count does not match n_devices")
        if cfg.policy == "proposed" and not hasattr(self.task, "label_histogram"):
            raise ConfigError("proposed policy needs a labeled task")
        self.dim = self.task.dim
        self.histograms = None
        if hasattr(self.task, "label_histogram"):
            self.histograms = {k: self.task.label_histogram(k)
                               for k in range(cfg.n_devices)}
        self._duration_rng = rng_stream(cfg.seed, "durations")
        self._channel_rng = rng_stream(cfg.seed, "channel")
        self._schedule_rng = rng_stream(cfg.seed, "schedule")
        self._train_rngs = [rng_stream(cfg.seed, f"train:{k}")
                            for k in range(cfg.n_devices)]
        self._compress_rngs = [rng_stream(cfg.seed, f"compress:{k}")
                               for k in range(cfg.n_devices)]
        init_rng = rng_stream(cfg.seed, "init")
        self.theta = (cfg.init_scale * init_rng.standard_normal(self.dim)
                      if cfg.init_scale > 0 else np.zeros(self.dim))
        self.devices = [_Device(self._draw_duration()) for _ in range(cfg.n_devices)]
        self.tracker = AgeTracker(cfg.n_devices)
        self.staleness = {k: 0 for k in range(cfg.n_devices)}
        self.history = {1: self.theta.copy()}
        self._history_depth = math.ceil(cfg.t_max / cfg.tick_period) + 2
        self.cum_bits = 0
        self.cum_symbols = 0

    # -- device helpers ------------------------------------------------

    def _draw_duration(self) -> float:
        return float(self._duration_rng.uniform(self.cfg.t_min, self.cfg.t_max))

    def _start_training(self, k: int, now: float, anchor_round: int,
                        trainer: TrainerConfig):
        dev = self.devices[k]
        dev.anchor = self.theta.copy()
        if self.cfg.redraw_durations:
            dev.duration = self._draw_duration()
        dev.busy_until = now + dev.duration
        dev.update = local_train(self.task, k, dev.anchor, trainer,
                                 anchor_round, self._train_rngs[k])
        dev.update_norm2 = float(dev.update @ dev.update)

    def _transmit(self, k: int, budget_bits: float):
        """Compress one pending update through the wire codec.

        Returns the reconstructed update, retained count and bits spent.
        A retained count of zero sends nothing at all.
        """
        cfg = self.cfg
        retained = phy.max_sparsity(self.dim, cfg.levels, budget_bits)
        if retained == 0:
            return np.zeros(self.dim), 0, 0
        rng = self._compress_rngs[k]
        sparse, indices = phy.sparsify(self.devices[k].update, retained, rng)
        compressed = phy.quantize(sparse, indices, cfg.levels, rng)
        message = phy.encode(compressed)
        received = phy.decode(message, self.dim, cfg.levels, retained)
        return phy.reconstruct(received), retained, message.length

    def _evaluate(self, theta) -> tuple[float, float | None]:
        return global_loss(self.task, theta), self.task.test_accuracy(theta)

    def _context(self, ready) -> ScheduleContext:
        capacities = {}
        for k in ready:
            draw = phy.draw_channel(self._channel_rng, self.cfg.snr_db,
                                    fading=self.cfg.fading)
            capacities[k] = draw.capacity
        norms = {k: self.devices[k].update_norm2 for k in ready}
        return ScheduleContext(
            ready=tuple(ready),
            capacities=capacities,
            max_scheduled=self.cfg.max_scheduled,
            population=self.cfg.n_devices,
            histograms=self.histograms,
            update_norms=norms,
            staleness=self.staleness,
        )

    # -- protocol engines ----------------------------------------------

    def run(self) -> list[RoundRecord]:
        mode = self.cfg.mode
        if mode == "async_periodic":
            return self._run_async()
        if mode == "sync_fedavg":
            return self._run_sync()
        return self._run_fedasync()

    def _record(self, t, wallclock, scheduled, ctx, alloc, retained, weights,
                ages, bits_used, symbols_used, symbols_budget) -> RoundRecord:
        self.cum_bits += bits_used
        self.cum_symbols += symbols_budget
        loss, accuracy = self._evaluate(self.theta)
        ages = tuple(int(a) for a in ages)
        return RoundRecord(
            t=t,
            wallclock=wallclock,
            mode=self.cfg.mode,
            policy=self.cfg.policy,
            ready=tuple(ctx.ready) if ctx else (),
            scheduled=tuple(scheduled),
            ages=ages,
            capacities=tuple(round(ctx.capacities[k], 12) for k in scheduled) if ctx else (),
            symbols=tuple(int(n) for n in alloc),
            retained=tuple(int(r) for r in retained),
            weights=tuple(float(w) for w in weights),
            loss=loss,
            accuracy=accuracy,
            bits_used=bits_used,
            symbols_used=symbols_used,
            cum_bits=self.cum_bits,
            cum_symbols=self.cum_symbols,
            max_age=max(ages, default=0),
            age_diversity=len(set(ages)),
        )

    def _run_async(self) -> list[RoundRecord]:
        cfg = self.cfg
        period = cfg.tick_period
        ticks = (cfg.horizon_ticks if cfg.horizon_time is None
                 else int(cfg.horizon_time / period + _TIME_EPS))
        trainer = cfg.trainer_config()
        for k in range(cfg.n_devices):
            self._start_training(k, 0.0, 1, trainer)
        records = []
        age_cap = math.ceil(cfg.t_max / period)
        for t in range(1, ticks + 1):
            now = t * period
            ready = [k for k, dev in enumerate(self.devices)
                     if dev.busy_until <= now + _TIME_EPS]
            if not ready:
                self.staleness = update_staleness(self.staleness, ())
                self.history[t + 1] = self.theta.copy()
                self._prune_history(t + 1)
                records.append(self._record(t, now, (), None, (), (), (), (),
                                            0, 0, cfg.symbols_per_round))
                continue
            ctx = self._context(ready)
            scheduled = schedule(cfg.policy, ctx, self._schedule_rng)
            alloc = phy.allocate_symbols([ctx.capacities[k] for k in scheduled],
                                         cfg.symbols_per_round)
            updates, retained_counts, bits_used = [], [], 0
            bases = []
            for k, n_k in zip(scheduled, alloc.counts):
                version = self.tracker.anchor_version(k)
                base = self.history[version]
                if not np.array_equal(self.devices[k].anchor, base):
                    raise AssertionError("device anchor diverged from server history")
                bases.append(base)
                received, retained, bits = self._transmit(k, n_k * ctx.capacities[k])
                updates.append(received)
                retained_counts.append(retained)
                bits_used += bits
            ages = self.tracker.ages(t)[list(scheduled)]
            if ages.size and ages.max() > age_cap:
                raise AssertionError("update age exceeded its structural bound")
            weights = age_weights(self.task.shard_sizes[list(scheduled)], ages,
                                  cfg.gamma)
            self.theta = aggregate_async(np.array(bases), np.array(updates), weights)
            records.append(self._record(
                t, now, scheduled, ctx, alloc.counts, retained_counts, weights,
                ages, bits_used, int(alloc.counts.sum()), cfg.symbols_per_round))
            self.staleness = update_staleness(self.staleness, scheduled)
            self.tracker.record_broadcast(ready, t)
            for k in ready:
                self._start_training(k, now, t + 1, trainer)
            self.history[t + 1] = self.theta.copy()
            self._prune_history(t + 1)
        return records

    def _prune_history(self, latest: int):
        for version in [v for v in self.history if v < latest - self._history_depth]:
            del self.history[version]

    def _run_sync(self) -> list[RoundRecord]:
        cfg = self.cfg
        rounds = int(self.cfg.wallclock_horizon / cfg.t_max + _TIME_EPS)
        budget = int(cfg.symbols_per_round * cfg.t_max / cfg.tick_period + _TIME_EPS)
        trainer = cfg.trainer_config(reg_coeff=0.0)  # plain local SGD each round
        records = []
        everyone = list(range(cfg.n_devices))
        for t in range(1, rounds + 1):
            for k in everyone:
                self._start_training(k, (t - 1) * cfg.t_max, t, trainer)
            ctx = self._context(everyone)
            scheduled = schedule(cfg.policy, ctx, self._schedule_rng)
            alloc = phy.allocate_symbols([ctx.capacities[k] for k in scheduled], budget)
            updates, retained_counts, bits_used = [], [], 0
            for k, n_k in zip(scheduled, alloc.counts):
                received, retained, bits = self._transmit(k, n_k * ctx.capacities[k])
                updates.append(received)
                retained_counts.append(retained)
                bits_used += bits
            sizes = self.task.shard_sizes[list(scheduled)]
            self.theta = aggregate_sync(self.theta, np.array(updates), sizes)
            weights = sizes / sizes.sum()
            records.append(self._record(
                t, t * cfg.t_max, scheduled, ctx, alloc.counts, retained_counts,
                weights, np.zeros(len(scheduled), dtype=int), bits_used,
                int(alloc.counts.sum()), budget))
            self.staleness = update_staleness(self.staleness, scheduled)
        return records

    def _run_fedasync(self) -> list[RoundRecord]:
        cfg = self.cfg
        horizon = self.cfg.wallclock_horizon
        trainer = cfg.trainer_config()
        events = []
        for k, dev in enumerate(self.devices):
            completions = int(horizon / dev.duration + _TIME_EPS)
            events.extend((j * dev.duration, k) for j in range(1, completions + 1))
        events.sort(key=lambda e: (e[0], e[1]))
        if not events:
            return []
        total_symbols = int(cfg.symbols_per_round * horizon / cfg.tick_period + _TIME_EPS)
        base, extra = divmod(total_symbols, len(events))
        for k in range(cfg.n_devices):
            self._start_training(k, 0.0, 1, trainer)
        records = []
        for i, (when, k) in enumerate(events):
            symbols = base + (1 if i < extra else 0)
            draw = phy.draw_channel(self._channel_rng, cfg.snr_db, fading=cfg.fading)
            received, retained, bits = self._transmit(k, symbols * draw.capacity)
            if cfg.fedasync_operand == "model":
                incoming = self.devices[k].anchor + received
            else:
                incoming = received
            self.theta = fedasync_step(self.theta, incoming, cfg.alpha_filter)
            ctx = ScheduleContext(ready=(k,), capacities={k: draw.capacity},
                                  max_scheduled=cfg.max_scheduled,
                                  population=cfg.n_devices)
            records.append(self._record(
                i + 1, when, (k,), ctx, (symbols,), (retained,), (1.0,), (0,),
                bits, symbols, symbols))
            self._start_training(k, when, i + 2, trainer)
        return records


def run(cfg: SimConfig) -> list[RoundRecord]:
    """Run one configured simulation and return its round records."""
    return Simulator(cfg).run()


CSV_FIXED_COLUMNS = [
    "t", "wallclock", "mode", "policy", "ready_count", "scheduled_count",
    "max_age", "age_diversity", "loss", "accuracy",
    "bits_used", "symbols_used", "cum_bits", "cum_symbols",
]

_SLOT_FIELDS = ["device", "age", "capacity", "symbols", "retained", "weight"]


def rounds_csv_lines(records, max_slots: int) -> list[str]:
    """Render records as CSV lines with a fixed, documented schema."""
    header = list(CSV_FIXED_COLUMNS)
    for i in range(max_slots):
        header.extend(f"slot{i}_{name}" for name in _SLOT_FIELDS)
    lines = [",".join(header)]
    for rec in records:
        row = [
            str(rec.t), repr(float(rec.wallclock)), rec.mode, rec.policy,
            str(len(rec.ready)), str(len(rec.scheduled)),
            str(rec.max_age), str(rec.age_diversity),
            repr(float(rec.loss)),
            "" if rec.accuracy is None else repr(float(rec.accuracy)),
            str(rec.bits_used), str(rec.symbols_used),
            str(rec.cum_bits), str(rec.cum_symbols),
        ]
        for i in range(max_slots):
            if i < len(rec.scheduled):
                row.extend([
                    str(rec.scheduled[i]), str(rec.ages[i]),
                    repr(float(rec.capacities[i])), str(rec.symbols[i]),
                    str(rec.retained[i]), repr(float(rec.weights[i])),
                ])
            else:
                row.extend([""] * len(_SLOT_FIELDS))
        lines.append(",".join(row))
    return lines


def run_summary(cfg: SimConfig, records) -> dict:
    """Aggregate run outcome for summary.json."""
    last = records[-1] if records else None
    horizon = cfg.wallclock_horizon
    return {
        "mode": cfg.mode,
        "policy": cfg.policy,
        "seed": cfg.seed,
        "rounds": len(records),
        "final_loss": None if last is None else last.loss,
        "final_accuracy": None if last is None else last.accuracy,
        "cum_bits": 0 if last is None else last.cum_bits,
        "cum_symbols": 0 if last is None else last.cum_symbols,
        "wallclock_end": 0.0 if last is None else last.wallclock,
        "horizon_time": horizon,
        "symbol_rate": (0.0 if last is None else last.cum_symbols / horizon),
        "nominal_symbol_rate": cfg.symbols_per_round / cfg.tick_period,
        "config": cfg.to_dict(),
    }

"""Numerical verification of the convergence theory.

This module evaluates the optimality-gap bound for the periodic-
aggregation protocol on quadratic tasks with known constants, and checks
the two supporting inequalities (a per-step contraction of the distance
to the optimum, and a variance bound on the compressed stochastic
update) plus the smoothness gap inequality by direct evaluation.

One pitfall is documented rather than hidden: choosing the learning-rate
offset ``kappa`` exactly at its threshold value makes the transient term
of the bound a 0/0 expression.  ``derive_constants`` therefore applies a
small strict slack above the threshold by default; passing
``kappa_slack=1.0`` reproduces the literal threshold, in which case
``optimality_gap_bound`` raises.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import phy
from .partition import heterogeneity
from .simulation import SimConfig, Simulator, build_task, rng_stream
from .tasks import random_quadratic_task

__all__ = [
    "ConvergenceConstants",
    "kappa_threshold",
    "derive_constants",
    "estimate_min_retained",
    "fit_second_moment",
    "transient_term",
    "optimality_gap_bound",
    "check_descent_contraction",
    "check_update_variance",
    "check_smoothness_gap",
    "check_quantizer_unbiased",
    "check_quantizer_variance",
    "check_sparsified_mean",
    "quantizer_law",
    "bound_trace_experiment",
    "run_verification",
]


@dataclass(frozen=True)
class ConvergenceConstants:
    """Constants entering the optimality-gap bound.

    ``second_moment_offset`` and ``second_moment_slope`` bound the
    expected squared stochastic gradient by offset + slope * ||grad||^2.
    ``age_diversity_bound`` caps the number of distinct update ages ever
    aggregated together.  ``min_retained`` is the guaranteed number of
    coordinates surviving sparsification.
    """

    smoothness: float
    strong_convexity: float
    dim: int
    levels: int
    min_retained: int
    second_moment_offset: float
    second_moment_slope: float
    age_diversity_bound: int
    optima_gap_bound: float
    loss_gap_bound: float
    lr_beta: float
    lr_kappa: float

    def __post_init__(self):
        if self.min_retained < 1:
            raise ValueError("min_retained must be >= 1 (bound infeasible)")
        if self.lr_beta * self.strong_convexity * self.min_retained <= self.dim:
            raise ValueError("lr_beta must exceed dim / (strong_convexity * min_retained)")
        if self.lr_kappa <= 0:
            raise ValueError("lr_kappa must be positive")
        if self.learning_rate(1) > 1 / (4 * self.smoothness) + 1e-12:
            raise ValueError("initial learning rate exceeds 1/(4L)")

    @property
    def heterogeneity_term(self) -> float:
        return 2.0 * (self.optima_gap_bound + self.loss_gap_bound)

    @property
    def variance_amplification(self) -> float:
        return 4.0 * (1.0 + self.dim / (4.0 * self.levels ** 2))

    def learning_rate(self, round_index: int) -> float:
        return self.lr_beta / (round_index + self.lr_kappa)

    def as_dict(self) -> dict:
        out = {
            "smoothness": self.smoothness,
            "strong_convexity": self.strong_convexity,
            "dim": self.dim,
            "levels": self.levels,
            "min_retained": self.min_retained,
            "second_moment_offset": self.second_moment_offset,
            "second_moment_slope": self.second_moment_slope,
            "age_diversity_bound": self.age_diversity_bound,
            "optima_gap_bound": self.optima_gap_bound,
            "loss_gap_bound": self.loss_gap_bound,
            "lr_beta": self.lr_beta,
            "lr_kappa": self.lr_kappa,
            "heterogeneity_term": self.heterogeneity_term,
            "variance_amplification": self.variance_amplification,
        }
        return out


def kappa_threshold(smoothness: float, strong_convexity: float, dim: int,
                    slope: float, amplification: float, beta: float,
                    min_retained: int) -> float:
    """Smallest admissible learning-rate offset for a given beta."""
    margin = beta * strong_convexity * min_retained - dim
    if margin <= 0:
        raise ValueError("beta too small for the retained-coordinate floor")
    return max(dim * smoothness ** 2 * slope * amplification * beta ** 2 / margin,
               4.0 * smoothness * beta - 1.0,
               1.0)


def estimate_min_retained(dim: int, levels: int, snr_db: float, n_symbols: int,
                          n_links: int, rng, draws: int = 2000,
                          fading: str = "rayleigh") -> int:
    """Smallest retained count seen over a seeded channel Monte Carlo.

    Each draw realizes the scheduled links' channels, splits the symbol
    block with equalized bit budgets, and records the sparsity every
    budget supports.  Deterministic channels need a single draw.
    """
    if fading == "none":
        draws = 1
    worst = dim
    for _ in range(draws):
        caps = [phy.draw_channel(rng, snr_db, fading=fading).capacity
                for _ in range(n_links)]
        alloc = phy.allocate_symbols(caps, n_symbols)
        for n_k, c_k in zip(alloc.counts, caps):
            worst = min(worst, phy.max_sparsity(dim, levels, n_k * c_k))
            if worst == 0:
                return 0
    return worst


def fit_second_moment(task, thetas, batch_size: int | None, rng,
                      draws: int = 200) -> tuple[float, float]:
    """Envelope constants for the stochastic-gradient second moment.

    Full-batch gradients are exact, giving (0, 1).  Otherwise the
    expected squared mini-batch gradient is estimated by Monte Carlo at
    each sampled model and enveloped by offset + slope * ||grad||^2 with
    slope >= 1 and offset at least the largest residual.
    """
    if batch_size is None:
        return 0.0, 1.0
    xs, ys = [], []
    for theta in thetas:
        for k in range(task.n_devices):
            shard = int(task.shard_sizes[k])
            if batch_size >= shard:
                continue
            exact = task.local_gradient(k, theta)
            second = 0.0
            for _ in range(draws):
                batch = rng.choice(shard, size=batch_size, replace=False)
                g = task.local_gradient(k, theta, batch)
                second += float(g @ g)
            xs.append(float(exact @ exact))
            ys.append(second / draws)
    if not xs:
        return 0.0, 1.0
    xs, ys = np.array(xs), np.array(ys)
    slope = max(1.0, float((xs @ ys) / (xs @ xs)) if xs.any() else 1.0)
    offset = max(0.0, float((ys - slope * xs).max()))
    return offset, slope


def derive_constants(task, *, levels: int, period_ratio: float,
                     min_retained: int | None = None,
                     snr_db: float = 13.0, n_symbols: int | None = None,
                     n_links: int | None = None, fading: str = "rayleigh",
                     channel_draws: int = 2000,
                     batch_size: int | None = None,
                     second_moment_thetas: int = 20,
                     beta_factor: float = 1.05,
                     kappa_slack: float = 1.05,
                     seed: int = 0) -> ConvergenceConstants:
    """Derive bound constants for a quadratic task and channel setup.

    ``beta_factor`` scales the learning-rate numerator above its minimum
    feasible value.  ``kappa_slack`` multiplies the binding threshold
    term strictly above the degenerate point (see module docstring).
    """
    if not hasattr(task, "global_optimum"):
        raise TypeError("constants require a task with closed-form optima")
    smoothness = task.smoothness
    strong = task.strong_convexity
    dim = task.dim
    rng = rng_stream(seed, "constants")
    if min_retained is None:
        if n_symbols is None or n_links is None:
            raise ValueError("need n_symbols and n_links to estimate min_retained")
        min_retained = estimate_min_retained(dim, levels, snr_db, n_symbols,
                                             n_links, rng, channel_draws, fading)
    if min_retained < 1:
        raise ValueError("channel budget too small: min retained count is 0")
    thetas = [rng.normal(0.0, 1.0, size=dim) for _ in range(second_moment_thetas)]
    offset, slope = fit_second_moment(task, thetas, batch_size, rng)
    report = heterogeneity(task, rng=rng_stream(seed, "subsets"))
    if beta_factor <= 1.0:
        raise ValueError("beta_factor must exceed 1")
    beta = beta_factor * dim / (strong * min_retained)
    amplification = 4.0 * (1.0 + dim / (4.0 * levels ** 2))
    margin = beta * strong * min_retained - dim
    binding = dim * smoothness ** 2 * slope * amplification * beta ** 2 / margin
    kappa = max(kappa_slack * binding, 4.0 * smoothness * beta - 1.0, 1.0)
    return ConvergenceConstants(
        smoothness=smoothness,
        strong_convexity=strong,
        dim=dim,
        levels=levels,
        min_retained=int(min_retained),
        second_moment_offset=offset,
        second_moment_slope=slope,
        age_diversity_bound=math.ceil(period_ratio) + 1,
        optima_gap_bound=report.optima_gap_bound,
        loss_gap_bound=report.loss_gap_bound,
        lr_beta=beta,
        lr_kappa=kappa,
    )


def transient_term(const: ConvergenceConstants) -> float:
    """Scale of the decaying part of the gap bound.

    Raises when the denominator is not positive, which happens exactly
    when the learning-rate offset sits at (or below) its threshold.
    """
    c3 = const.variance_amplification
    l2c2 = const.smoothness ** 2 * const.second_moment_slope
    a = const.heterogeneity_term
    numerator = (const.lr_beta ** 2 * c3
                 * (const.second_moment_offset / 2.0
                    + a * l2c2 / const.strong_convexity)
                 + l2c2 * c3 * const.lr_beta ** 3 * a)
    denominator = ((const.strong_convexity * const.lr_beta * const.min_retained
                    / const.dim - 1.0)
                   - l2c2 * c3 * const.lr_beta ** 2 / const.lr_kappa)
    if denominator <= 0:
        raise ValueError(
            "nonpositive transient denominator: lr_kappa sits at or below its "
            "threshold, derive constants with kappa_slack > 1")
    return numerator / denominator


def optimality_gap_bound(t: int, const: ConvergenceConstants,
                         initial_gap: float) -> float:
    """Upper bound on the expected loss gap after aggregation round t.

    ``initial_gap`` is the squared distance of the first model from the
    optimum.  The bound decays like 1/t toward a floor proportional to
    the heterogeneity term; with homogeneous data the floor is zero.
    """
    if t < 1:
        raise ValueError("round index starts at 1")
    if initial_gap < 0:
        raise ValueError("initial gap must be nonnegative")
    lm_half = const.smoothness * const.age_diversity_bound / 2.0
    transient = transient_term(const) + (const.lr_kappa + 1.0) * initial_gap
    return (lm_half * transient / (t + const.lr_kappa + 1.0)
            + lm_half * const.lr_beta * const.heterogeneity_term)


@dataclass(frozen=True)
class CheckResult:
    name: str
    holds: bool
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def as_dict(self) -> dict:
        return {"name": self.name, "pass": bool(self.holds),
                "lhs": self.lhs, "rhs": self.rhs, "margin": self.margin}


def check_descent_contraction(task, theta_bar, alpha: float, subset, weights,
                              retained: int, const: ConvergenceConstants) -> CheckResult:
    """One-step contraction of the distance to the optimum.

    With every member of the subset sharing the model ``theta_bar``, the
    deterministic averaged step must shrink the squared distance by at
    least the strong-convexity factor, up to the heterogeneity term.
    Requires ``alpha <= 1/(4L)``.
    """
    if alpha > 1 / (4 * const.smoothness) + 1e-12:
        raise ValueError("alpha exceeds 1/(4L)")
    theta_bar = np.asarray(theta_bar, dtype=float)
    weights = np.asarray(weights, dtype=float)
    members = list(subset)
    theta_star, _ = task.global_optimum()
    ratio = retained / task.dim
    mean_grad = ratio * sum(
        w * task.local_gradient(k, theta_bar) for k, w in zip(members, weights))
    lhs = float(np.sum((theta_bar - theta_star - alpha * mean_grad) ** 2))
    dist2 = float(np.sum((theta_bar - theta_star) ** 2))
    rhs = ((1.0 - const.strong_convexity * alpha * ratio) * dist2
           + alpha * retained * const.heterogeneity_term / task.dim)
    return CheckResult("descent_contraction", lhs <= rhs + 1e-9 * (1 + abs(rhs)),
                       lhs, rhs)


def quantizer_law(values: np.ndarray, levels: int, rng, draws: int) -> np.ndarray:
    """Vectorized draws from the random quantizer's reconstruction law.

    Mirrors ``phy.quantize`` exactly, including the 32-bit norm rounding
    and the single uniform draw per retained coordinate; a dedicated
    test pins the two code paths to each other draw for draw.  Returns a
    (draws, len(values)) matrix of reconstructed vectors.
    """
    values = np.asarray(values, dtype=float)
    norm = float(np.float32(np.linalg.norm(values)))
    if norm == 0.0:
        return np.zeros((draws, values.size))
    scaled = levels * np.abs(values) / norm
    floors = np.clip(np.floor(scaled), 0, levels)
    frac = np.clip(scaled - floors, 0.0, 1.0)
    ups = rng.random((draws, values.size)) < frac
    codes = np.minimum(floors + ups, levels)
    return norm * np.sign(values) * codes / levels


def _sparsify_masks(dim: int, retained: int, rng, draws: int) -> np.ndarray:
    """Boolean masks of uniformly random retained subsets, one per row."""
    order = np.argpartition(rng.random((draws, dim)), retained - 1, axis=1)
    masks = np.zeros((draws, dim), dtype=bool)
    np.put_along_axis(masks, order[:, :retained], True, axis=1)
    return masks


def _compressed_update_draws(task, k: int, theta_bar, retained: int, levels: int,
                             rng, draws: int, batch_size: int | None) -> np.ndarray:
    """Vectorized mini-batch + sparsify + quantize draws for one device."""
    exact = task.local_gradient(k, theta_bar)
    shard = int(task.shard_sizes[k])
    if batch_size is None or batch_size >= shard:
        factors = np.ones(draws)
    else:
        scales = getattr(task, "sample_scales", None)
        if scales is None:
            raise TypeError("mini-batch variance check needs a quadratic task")
        picks = np.argpartition(rng.random((draws, shard)), batch_size - 1,
                                axis=1)[:, :batch_size]
        factors = scales[k][picks].mean(axis=1)
    masks = _sparsify_masks(task.dim, retained, rng, draws)
    gradients = factors[:, None] * exact[None, :] * masks
    norms = np.linalg.norm(gradients, axis=1).astype(np.float32).astype(float)
    out = np.zeros_like(gradients)
    nz = norms > 0
    scaled = levels * np.abs(gradients[nz]) / norms[nz, None]
    floors = np.clip(np.floor(scaled), 0, levels)
    frac = np.clip(scaled - floors, 0.0, 1.0)
    ups = rng.random(scaled.shape) < frac
    codes = np.minimum(floors + ups, levels)
    out[nz] = norms[nz, None] * np.sign(gradients[nz]) * codes / levels
    return out


def check_update_variance(task, theta_bar, subset, weights, retained: int,
                          const: ConvergenceConstants, rng,
                          batch_size: int | None = None,
                          samples: int = 100_000) -> CheckResult:
    """Monte Carlo variance of the compressed averaged update vs its bound.

    Randomness spans mini-batch choice, sparsification mask and
    quantizer draws.  The check passes when the estimate stays below the
    bound plus three standard errors.
    """
    if samples < 10_000:
        raise ValueError("need at least 1e4 samples for a stable estimate")
    theta_bar = np.asarray(theta_bar, dtype=float)
    weights = np.asarray(weights, dtype=float)
    members = list(subset)
    theta_star, _ = task.global_optimum()
    ratio = retained / task.dim
    mean_grad = ratio * sum(
        w * task.local_gradient(k, theta_bar) for k, w in zip(members, weights))
    agg = np.zeros((samples, task.dim))
    for k, w in zip(members, weights):
        agg += w * _compressed_update_draws(task, k, theta_bar, retained,
                                            const.levels, rng, samples, batch_size)
    sq_errors = np.sum((agg - mean_grad) ** 2, axis=1)
    estimate = float(sq_errors.mean())
    stderr = float(sq_errors.std(ddof=1) / math.sqrt(samples))
    l2c2 = const.smoothness ** 2 * const.second_moment_slope
    dist2 = float(np.sum((theta_bar - theta_star) ** 2))
    bound = const.variance_amplification * (
        l2c2 * dist2 + const.second_moment_offset / 2.0
        + const.heterogeneity_term * l2c2 / const.strong_convexity)
    return CheckResult("update_variance", estimate <= bound + 3 * stderr,
                       estimate, bound + 3 * stderr)


def check_smoothness_gap(task, thetas) -> CheckResult:
    """Squared gradient never exceeds 2L times the loss gap to the minimum."""
    worst_lhs, worst_rhs = 0.0, 0.0
    worst_margin = math.inf
    holds = True
    twol = 2.0 * task.smoothness
    for theta in thetas:
        for k in range(task.n_devices):
            g = task.local_gradient(k, theta)
            lhs = float(g @ g)
            rhs = twol * (task.local_loss(k, theta) - task.local_optimum(k)[1])
            ok = lhs <= rhs + 1e-9 * (1 + abs(rhs))
            holds = holds and ok
            if rhs - lhs < worst_margin:
                worst_margin, worst_lhs, worst_rhs = rhs - lhs, lhs, rhs
    return CheckResult("smoothness_gap", holds, worst_lhs, worst_rhs)


def check_quantizer_unbiased(rng, dim: int = 16, levels: int = 4,
                             n_vectors: int = 50, draws: int = 100_000,
                             bias: float = 0.0) -> CheckResult:
    """Per-coordinate quantizer mean within 4 standard errors of the input.

    ``bias`` forwards the quantizer's fault-injection knob so a corrupted
    rounding law demonstrably fails this check.
    """
    worst_z = 0.0
    for _ in range(n_vectors):
        vec = rng.normal(0.0, 1.0, size=dim)
        if bias:
            norm = float(np.float32(np.linalg.norm(vec)))
            scaled = levels * np.abs(vec) / norm
            floors = np.clip(np.floor(scaled), 0, levels)
            frac = np.clip(np.clip(scaled - floors, 0.0, 1.0) + bias, 0.0, 1.0)
            ups = rng.random((draws, dim)) < frac
            codes = np.minimum(floors + ups, levels)
            recon = norm * np.sign(vec) * codes / levels
        else:
            recon = quantizer_law(vec, levels, rng, draws)
        mean = recon.mean(axis=0)
        stderr = np.maximum(recon.std(axis=0, ddof=1) / math.sqrt(draws), 1e-15)
        worst_z = max(worst_z, float(np.max(np.abs(mean - vec) / stderr)))
    return CheckResult("quantizer_unbiased", worst_z <= 4.0, worst_z, 4.0)


def check_quantizer_variance(rng, dim: int = 16, levels: int = 4,
                             n_vectors: int = 50, draws: int = 100_000) -> CheckResult:
    """Quantizer mean squared error within its closed-form ceiling."""
    holds = True
    worst_lhs, worst_rhs = 0.0, 0.0
    worst_margin = math.inf
    for _ in range(n_vectors):
        vec = rng.normal(0.0, 1.0, size=dim)
        sq = np.sum((quantizer_law(vec, levels, rng, draws) - vec) ** 2, axis=1)
        estimate = float(sq.mean())
        stderr = float(sq.std(ddof=1) / math.sqrt(draws))
        bound = dim * float(vec @ vec) / (4 * levels ** 2)
        ok = estimate <= bound + 3 * stderr
        holds = holds and ok
        if bound + 3 * stderr - estimate < worst_margin:
            worst_margin = bound + 3 * stderr - estimate
            worst_lhs, worst_rhs = estimate, bound + 3 * stderr
    return CheckResult("quantizer_variance", holds, worst_lhs, worst_rhs)


def check_sparsified_mean(rng, dim: int = 8, retained: int = 3, levels: int = 4,
                          draws: int = 100_000) -> CheckResult:
    """Sparsify-then-quantize averages to retained/dim times the input."""
    vec = rng.normal(0.0, 1.0, size=dim)
    masks = _sparsify_masks(dim, retained, rng, draws)
    gradients = vec[None, :] * masks
    norms = np.linalg.norm(gradients, axis=1).astype(np.float32).astype(float)
    norms = np.where(norms == 0, 1.0, norms)  # zero rows quantize to zero anyway
    scaled = levels * np.abs(gradients) / norms[:, None]
    floors = np.clip(np.floor(scaled), 0, levels)
    frac = np.clip(scaled - floors, 0.0, 1.0)
    ups = rng.random(scaled.shape) < frac
    codes = np.minimum(floors + ups, levels)
    recon = norms[:, None] * np.sign(gradients) * codes / levels
    mean = recon.mean(axis=0)
    stderr = np.maximum(recon.std(axis=0, ddof=1) / math.sqrt(draws), 1e-15)
    target = retained / dim * vec
    worst_z = float(np.max(np.abs(mean - target) / stderr))
    return CheckResult("sparsified_mean", worst_z <= 4.0, worst_z, 4.0)


def bound_trace_experiment(*, dim: int = 8, n_devices: int = 8, seeds: int = 20,
                           ticks: int = 500, n_symbols: int = 256,
                           levels: int = 4, center_spread: float = 1.0,
                           curvature_range=(0.5, 2.0), identical: bool = False,
                           seed: int = 0, beta_factor: float = 1.05,
                           kappa_slack: float = 1.05) -> dict:
    """Compare seed-averaged loss gaps on a quadratic run to the bound.

    Runs the periodic protocol with full participation (every device
    finishes within one period), single-step full-batch training, the
    theory learning rate, and deterministic unit-gain channels so the
    retained-coordinate floor is exact.  ``identical=True`` makes all
    devices share one quadratic, the homogeneous case whose bound decays
    to zero.
    """
    task_spec = {
        "kind": "quadratic",
        "dim": dim,
        "curvature_range": [1.0, 1.0] if identical else list(curvature_range),
        "center_spread": 0.0 if identical else center_spread,
        "center_offset": 1.0 if identical else 0.0,
        "shard_size": 4,
    }
    base = SimConfig(
        mode="async_periodic", policy="random", n_devices=n_devices,
        max_scheduled=n_devices, t_min=1.0, t_max=1.0, period=1.0,
        horizon_ticks=ticks, symbols_per_round=n_symbols, snr_db=13.0,
        fading="none", levels=levels, local_steps=1, batch_size=None,
        reg_coeff=0.02, seed=seed, task=task_spec,
    )
    probe_task = build_task(base)
    const = derive_constants(
        probe_task, levels=levels, period_ratio=base.t_max / base.tick_period,
        snr_db=base.snr_db, n_symbols=n_symbols, n_links=n_devices,
        fading="none", batch_size=None, beta_factor=beta_factor,
        kappa_slack=kappa_slack, seed=seed)
    theta_star, f_star = probe_task.global_optimum()
    initial_gap = float(theta_star @ theta_star)  # runs start at zero

    cfg = replace(base, lr_kind="theory", lr_beta=const.lr_beta,
                  lr_kappa=const.lr_kappa, task_seed=seed)
    gaps = np.zeros(ticks)
    for s in range(seeds):
        records = Simulator(replace(cfg, seed=seed + 1000 + s)).run()
        gaps += np.array([rec.loss for rec in records]) - f_star
    gaps /= seeds
    bounds = np.array([optimality_gap_bound(t, const, initial_gap)
                       for t in range(1, ticks + 1)])
    violations = int(np.sum(gaps > bounds))
    decay_ratio = float(gaps[ticks - 1] / gaps[9]) if ticks >= 10 and gaps[9] > 0 else 0.0
    return {
        "ticks": ticks,
        "seeds": seeds,
        "identical": identical,
        "mean_gaps": gaps,
        "bounds": bounds,
        "violations": violations,
        "decay_ratio": decay_ratio,
        "constants": const,
        "initial_gap": initial_gap,
    }


def run_verification(options: dict | None = None) -> dict:
    """Run every verification check and assemble a JSON-ready report."""
    opts = dict(options or {})
    seed = int(opts.pop("seed", 0))
    quantizer_bias = float(opts.pop("quantizer_bias", 0.0))
    inequality_trials = int(opts.pop("inequality_trials", 1000))
    variance_samples = int(opts.pop("variance_samples", 100_000))
    unbiased_draws = int(opts.pop("unbiased_draws", 100_000))
    unbiased_vectors = int(opts.pop("unbiased_vectors", 50))
    trace_seeds = int(opts.pop("trace_seeds", 20))
    trace_ticks = int(opts.pop("trace_ticks", 500))
    if opts:
        raise ValueError(f"unknown verification option {sorted(opts)[0]!r}")

    rng = rng_stream(seed, "verify")
    task_rng = rng_stream(seed, "verify-task")
    task = random_quadratic_task(task_rng, n_devices=8, dim=8,
                                 curvature_range=(0.5, 2.0), center_spread=1.0,
                                 shard_size=4)
    const = derive_constants(task, levels=4, period_ratio=4.0, min_retained=4,
                             batch_size=None, seed=seed)

    checks: list[CheckResult] = []

    checks.append(check_smoothness_gap(
        task, [rng.normal(0.0, 2.0, size=task.dim) for _ in range(inequality_trials)]))

    contraction_ok = True
    worst = None
    for _ in range(inequality_trials):
        theta_bar = rng.normal(0.0, 2.0, size=task.dim)
        size = int(rng.integers(1, task.n_devices + 1))
        subset = np.sort(rng.choice(task.n_devices, size=size, replace=False))
        sizes = task.shard_sizes[subset].astype(float)
        weights = sizes / sizes.sum()
        alpha = float(rng.uniform(0.0, 1.0)) / (4 * const.smoothness)
        alpha = max(alpha, 1e-6)
        retained = int(rng.integers(1, task.dim + 1))
        res = check_descent_contraction(task, theta_bar, alpha, subset, weights,
                                        retained, const)
        contraction_ok = contraction_ok and res.holds
        if worst is None or res.margin < worst.margin:
            worst = res
    checks.append(CheckResult("descent_contraction", contraction_ok,
                              worst.lhs, worst.rhs))

    subset = np.arange(task.n_devices)
    weights = task.data_weights
    checks.append(check_update_variance(
        task, rng.normal(0.0, 1.0, size=task.dim), subset, weights,
        retained=4, const=const, rng=rng, samples=variance_samples))

    checks.append(check_quantizer_unbiased(
        rng, n_vectors=unbiased_vectors, draws=unbiased_draws, bias=quantizer_bias))
    checks.append(check_quantizer_variance(
        rng, n_vectors=10, draws=max(10_000, unbiased_draws // 10)))
    checks.append(check_sparsified_mean(rng, draws=max(10_000, unbiased_draws // 2)))

    trace_constants = {}
    for identical in (False, True):
        trace = bound_trace_experiment(identical=identical, seeds=trace_seeds,
                                       ticks=trace_ticks, seed=seed)
        name = "homogeneous" if identical else "heterogeneous"
        trace_constants[name] = trace["constants"].as_dict()
        checks.append(CheckResult(
            f"gap_bound_{name}", trace["violations"] == 0,
            float(trace["mean_gaps"].max()), float(trace["bounds"].max())))
        if identical:
            checks.append(CheckResult("gap_decay", trace["decay_ratio"] < 0.1,
                                      trace["decay_ratio"], 0.1))

    return {
        "pass": all(c.holds for c in checks),
        "seed": seed,
        "checks": [c.as_dict() for c in checks],
        "inequality_constants": const.as_dict(),
        "trace_constants": trace_constants,
        "note": ("expectations are seed-averaged Monte Carlo proxies with "
                 "3-4 standard-error margins; see README for details"),
    }

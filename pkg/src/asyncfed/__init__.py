"""Asynchronous federated learning over a rate-limited wireless uplink.

A deterministic simulator and policy library: periodic aggregation of
whichever devices finished local training, channel-aware device
scheduling, sparsified and randomly quantized update transport under
per-round bit budgets, age-aware aggregation weighting, and a numerical
verifier for the protocol's convergence bound.
"""

from .aggregation import (AgeTracker, age_weights, aggregate_async,
                          aggregate_sync, fedasync_step)
from .analysis import (ConvergenceConstants, bound_trace_experiment,
                       check_descent_contraction, check_quantizer_unbiased,
                       check_quantizer_variance, check_smoothness_gap,
                       check_sparsified_mean, check_update_variance,
                       derive_constants, estimate_min_retained,
                       fit_second_moment, kappa_threshold,
                       optimality_gap_bound, quantizer_law, run_verification,
                       transient_term)
from .partition import (HeterogeneityReport, Shard, default_subset_family,
                        heterogeneity, label_histogram, partition_iid,
                        partition_manifest, partition_noniid)
from .phy import (BitString, ChannelDraw, CompressedUpdate, SymbolAllocation,
                  allocate_symbols, decode, draw_channel, encode,
                  encoded_bit_length, index_bit_length, level_bit_length,
                  max_sparsity, quantize, reconstruct, sparsify, subset_rank,
                  subset_unrank)
from .scheduling import (EXHAUSTIVE_SEARCH_LIMIT, POLICIES, OracleSizeError,
                         ScheduleContext, capacity_prefilter, label_variance,
                         oracle_min_label_variance, schedule, update_staleness)
from .simulation import (CSV_FIXED_COLUMNS, ConfigError, RoundRecord,
                         SimConfig, Simulator, build_task, rng_stream,
                         rounds_csv_lines, run, run_summary)
from .tasks import (ClassificationTask, QuadraticTask, global_loss, gradient,
                    load_csv_dataset, make_cluster_dataset, quadratic_optimum,
                    random_quadratic_task)
from .training import TrainerConfig, local_train, regularized_loss

__version__ = "0.1.0"

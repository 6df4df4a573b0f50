"""Federated local AMSGrad with client-adaptive learning rates.

A deterministic simulator and analysis toolkit for communication-
efficient federated optimization where every client runs AMSGrad
locally — per-coordinate learning rates adapted on-client — and the
server periodically averages parameters and moment estimates. Includes
momentum-restart and max-aggregation protocol variants, growing
local-interval schedules, FedAvg/FedAdam baselines, convergence-bound
evaluators, and trajectory audits.
"""

from .audit import AuditFinding, run_audits
from .baselines import ServerAdamState, fedadam_round, fedavg_round, init_server_adam
from .errors import (AuditError, ConfigError, DimensionMismatchError,
                     DomainError, NumericError)
from .federation import (AggregationMode, FixedInterval, LogAdaptiveInterval,
                         RoundRecord, RunConfig, ServerState, TrainingResult,
                         VhatAggregation, aggregate, broadcast, init_server,
                         interval, run_training, select_clients)
from .harness import (CSV_HEADER, ExperimentResult, RoundMetrics, SweepEntry,
                      csv_text, interval_study, iters_to_loss,
                      quadratic_threshold, rounds_to_loss, run_experiment,
                      speedup_sweep, write_csv)
from .objectives import (GradientOracle, HetQuadratic, ObjectiveSpec,
                         Partition, SyntheticLogistic, TinyMLP,
                         dirichlet_partition, global_grad, global_loss,
                         load_delimited, make_oracles, measure_heterogeneity,
                         quadratic_minimizer, smoothness_constant)
from .optimizer import (HyperParams, LocalOptState, amsgrad_step,
                        init_local_state, run_local_steps, sgd_step)
from .theory import (BoundBreakdown, TheoryInputs, check_z_identity,
                     lambert_w0, rounds_to_epsilon, schedule_iterations,
                     step_size_cap, theorem1_bound, theorem2_bound,
                     theory_step_size)

__version__ = "0.1.0"

__all__ = [
    "AggregationMode", "AuditError", "AuditFinding", "BoundBreakdown",
    "ConfigError", "CSV_HEADER", "DimensionMismatchError", "DomainError",
    "ExperimentResult", "FixedInterval", "GradientOracle", "HetQuadratic",
    "HyperParams", "LocalOptState", "LogAdaptiveInterval", "NumericError",
    "ObjectiveSpec", "Partition", "RoundMetrics", "RoundRecord", "RunConfig",
    "ServerAdamState", "ServerState", "SweepEntry", "SyntheticLogistic",
    "TheoryInputs", "TinyMLP", "TrainingResult", "VhatAggregation",
    "aggregate", "amsgrad_step", "broadcast", "check_z_identity", "csv_text",
    "dirichlet_partition", "fedadam_round", "fedavg_round", "global_grad",
    "global_loss", "init_local_state", "init_server", "init_server_adam",
    "interval", "interval_study", "iters_to_loss", "lambert_w0",
    "load_delimited", "make_oracles", "measure_heterogeneity",
    "quadratic_minimizer", "quadratic_threshold", "rounds_to_epsilon",
    "rounds_to_loss", "run_audits", "run_experiment", "run_local_steps",
    "run_training", "schedule_iterations", "select_clients", "sgd_step",
    "smoothness_constant", "speedup_sweep", "step_size_cap",
    "theorem1_bound", "theorem2_bound", "theory_step_size", "write_csv",
]

"""Federation engine: partitioning, client/server steps, rounds and the full driver."""

from .client import ClientState, local_train, mlp_loss, zo_opt_client
from .driver import (
    GRAD_STEP_TAU_PRESET,
    ExperimentConfig,
    build_clients,
    RunResult,
    final_accuracies,
    pivot_sweep,
    run_zowarmup,
    seed_configs,
    summarize,
)
from .partition import HIGH, LOW, assign_resources, dirichlet_partition, dirichlet_partition_indices
from .rounds import (PROTOCOLS, WARMUP, ZO, RoundPlan, RoundResult, apply_zo_update, hybrid_round, round_seeds,
                     warmup_round, zo_round)
from .server import ServerOptState, fedavg_aggregate, server_step

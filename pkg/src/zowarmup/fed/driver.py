"""End-to-end two-phase training runs and multi-seed sweeps."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Sequence

import numpy as np

from .. import nn
from ..data import Dataset, SyntheticDatasetSpec, generate_synthetic
from ..errors import ConfigError, NumericError
from ..metrics import MetricsRecord
from ..rng import SeedStream
from ..zopt import PerturbSpec
from .client import ClientState, mlp_loss
from .partition import HIGH, assign_resources, dirichlet_partition
from .rounds import PROTOCOLS, WARMUP, ZO, RoundPlan, hybrid_round, warmup_round, zo_round
from .server import ServerOptState

# (grad steps -> tau) pairs; the tau has to shrink as clients take more local ZO steps
GRAD_STEP_TAU_PRESET = {1: 0.75, 2: 0.25, 4: 0.1, 6: 0.01}

PHASE2_MODES = ("lo_only", "hi_plus_lo")


@dataclass(frozen=True)
class ExperimentConfig:
    """Every knob of a run. Defaults are the desk-scale reference setting."""

    # federation
    num_clients: int = 20
    dirichlet_alpha: float = 0.1
    hi_fraction: float = 0.1
    warmup_participation: float = 1.0
    zo_participation: float = 1.0
    # schedule
    pivot: int = 60
    total_rounds: int = 150
    phase2_mode: str = "lo_only"
    # warm-up phase
    eta_c_hi: float = 0.05
    eta_s: float = 1.0
    local_epochs: int = 3
    warmup_batch_size: int = 64
    # zeroth-order phase
    seeds_per_client: int = 3
    distribution: str = "rademacher"
    tau: float = 0.75
    epsilon: float = 1e-4
    eta_c_zo: float = 1e-3
    eta_s_zo: float = 1.0
    zo_grad_steps: int = 1
    aggregation: str = "sum"
    zo_protocol: str = "seed"
    # server optimizer (both phases)
    server_opt: str = "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    # model
    hidden_widths: tuple[int, ...] = (64,)
    # data
    num_classes: int = 8
    samples_per_class: int = 300
    input_dim: int = 32
    class_separation: float = 2.5
    noise_std: float = 1.0
    data_seed: int = 0
    # reproducibility
    master_seed: int = 0
    record_wall_time: bool = False

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(h) for h in self.hidden_widths))
        self.validate()

    def validate(self):
        def need(cond, name, msg):
            if not cond:
                raise ConfigError(msg, field=name)

        need(self.num_clients >= 1, "num_clients", "must be at least 1")
        need(self.dirichlet_alpha > 0, "dirichlet_alpha", "must be positive")
        need(0.0 <= self.hi_fraction <= 1.0, "hi_fraction", "must lie in [0, 1]")
        need(0.0 < self.warmup_participation <= 1.0, "warmup_participation", "must lie in (0, 1]")
        need(0.0 < self.zo_participation <= 1.0, "zo_participation", "must lie in (0, 1]")
        need(self.total_rounds >= 0, "total_rounds", "must be non-negative")
        need(0 <= self.pivot <= self.total_rounds, "pivot", "must lie in [0, total_rounds]")
        need(self.phase2_mode in PHASE2_MODES, "phase2_mode", f"must be one of {PHASE2_MODES}")
        need(self.eta_c_hi > 0, "eta_c_hi", "must be positive")
        need(self.eta_c_zo > 0, "eta_c_zo", "must be positive")
        need(self.local_epochs >= 0, "local_epochs", "must be non-negative")
        need(self.warmup_batch_size >= 1, "warmup_batch_size", "must be positive")
        need(self.seeds_per_client >= 1, "seeds_per_client", "must be at least 1")
        need(self.zo_grad_steps >= 1, "zo_grad_steps", "must be at least 1")
        need(self.aggregation in ("sum", "mean"), "aggregation", "must be 'sum' or 'mean'")
        need(self.zo_protocol in PROTOCOLS, "zo_protocol", f"must be one of {PROTOCOLS}")
        need(self.zo_protocol == "seed" or self.phase2_mode == "lo_only", "zo_protocol",
             "the full-vector exchange is only available with phase2_mode = lo_only")
        need(all(h >= 1 for h in self.hidden_widths), "hidden_widths", "must be positive")
        need(self.master_seed >= 0, "master_seed", "must be non-negative")
        self.perturb_spec()
        self.server_state(self.eta_s)
        self.server_state(self.eta_s_zo)
        self.dataset_spec()
        if self.pivot > 0 and self.num_high == 0:
            raise ConfigError("warm-up rounds requested but no client is high resource", field="hi_fraction")

    @property
    def num_high(self) -> int:
        return int(math.floor(self.hi_fraction * self.num_clients + 0.5))

    def perturb_spec(self) -> PerturbSpec:
        return PerturbSpec(self.distribution, self.tau, self.epsilon)

    def server_state(self, eta) -> ServerOptState:
        return ServerOptState(self.server_opt, eta, self.beta1, self.beta2, self.adam_eps)

    def mlp_spec(self, input_dim: int | None = None, num_classes: int | None = None) -> nn.MlpSpec:
        return nn.MlpSpec((input_dim or self.input_dim, *self.hidden_widths, num_classes or self.num_classes))

    def dataset_spec(self) -> SyntheticDatasetSpec:
        return SyntheticDatasetSpec(self.num_classes, self.samples_per_class, self.input_dim,
                                    self.class_separation, self.noise_std, self.data_seed)

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class RunResult:
    weights: np.ndarray
    metrics: list[MetricsRecord]
    clients: list[ClientState] = field(repr=False, default_factory=list)

    @property
    def final_accuracy(self) -> float:
        return self.metrics[-1].eval_accuracy if self.metrics else float("nan")


def _sample(ids: Sequence[int], fraction: float, stream: SeedStream) -> tuple[int, ...]:
    if fraction >= 1.0 or not ids:
        return tuple(ids)
    size = max(1, int(math.floor(fraction * len(ids) + 0.5)))
    chosen = stream.generator().choice(len(ids), size=size, replace=False)
    return tuple(sorted(ids[int(i)] for i in chosen))


def build_clients(config: ExperimentConfig, train: nn.Batch, root: SeedStream) -> list[ClientState]:
    shards = dirichlet_partition(train.features, train.labels, config.num_clients, config.dirichlet_alpha,
                                 root.spawn("partition"))
    classes = assign_resources(config.num_clients, config.hi_fraction, root.spawn("resources"))
    return [ClientState(k, classes[k], shards[k], np.empty(0), root.spawn("client", k))
            for k in range(config.num_clients)]


def run_zowarmup(config: ExperimentConfig, dataset: Dataset | None = None,
                 on_round: Callable[[MetricsRecord], None] | None = None) -> RunResult:
    """Warm up on high-resource clients for ``pivot`` rounds, then train everyone zeroth-order.

    ``pivot == total_rounds`` is the high-resource-only baseline; ``pivot == 0``
    trains zeroth-order from the random initialisation.
    """
    config.validate()
    if dataset is None:
        dataset = generate_synthetic(config.dataset_spec())
    mlp = config.mlp_spec(dataset.train.features.shape[1], dataset.num_classes)
    root = SeedStream(config.master_seed)
    clients = build_clients(config, dataset.train, root)
    w = nn.init_params(mlp, root.spawn("init"))
    high = [c.id for c in clients if c.resource_class == HIGH]
    everyone = [c.id for c in clients]
    spec = config.perturb_spec()
    loss_fn = mlp_loss(mlp)
    warm_server = config.server_state(config.eta_s)
    zo_server = config.server_state(config.eta_s_zo)
    # plain SGD with a unit rate is the literal client-side update; skip the no-op multiply
    if zo_server.kind == "sgd" and zo_server.eta_s == 1.0:
        zo_server = None
    run_seed = root.spawn("seeds").key

    metrics = []
    for t in range(config.total_rounds):
        started = time.perf_counter()
        try:
            if t < config.pivot:
                plan = RoundPlan(t, WARMUP, _sample(high, config.warmup_participation,
                                                    root.spawn("sample", t)))
                result = warmup_round(clients, plan, w, mlp=mlp, eta_c=config.eta_c_hi,
                                      epochs=config.local_epochs, batch_size=config.warmup_batch_size,
                                      server=warm_server)
            else:
                if t == config.pivot:
                    for client in clients:
                        client.model = w.copy()
                plan = RoundPlan(t, ZO, _sample(everyone, config.zo_participation, root.spawn("sample", t)),
                                 config.seeds_per_client)
                if config.phase2_mode == "lo_only":
                    result = zo_round(clients, plan, spec, config.eta_c_zo, config.aggregation,
                                      run_seed=run_seed, loss_fn=loss_fn, grad_steps=config.zo_grad_steps,
                                      protocol=config.zo_protocol, server=zo_server, w_global=w)
                else:
                    result = hybrid_round(clients, plan, spec, mlp=mlp, run_seed=run_seed, loss_fn=loss_fn,
                                          eta_c_hi=config.eta_c_hi, epochs=config.local_epochs,
                                          batch_size=config.warmup_batch_size, eta_c_zo=config.eta_c_zo,
                                          mode=config.aggregation, grad_steps=config.zo_grad_steps,
                                          server=zo_server)
            w = result.weights
            accuracy, eval_loss = nn.evaluate(mlp, w, dataset.eval)
        except NumericError as exc:
            if exc.round_index is None:
                raise NumericError(str(exc), round_index=t) from exc
            raise
        elapsed = (time.perf_counter() - started) * 1e3 if config.record_wall_time else None
        record = MetricsRecord(t, plan.phase, accuracy, eval_loss, result.uplink_total, result.downlink_total,
                               len(plan.participants), elapsed)
        metrics.append(record)
        if on_round is not None:
            on_round(record)
    return RunResult(w, metrics, clients)


def _final_accuracy(args) -> float:
    config, dataset, tolerate = args
    try:
        return run_zowarmup(config, dataset).final_accuracy
    except NumericError:
        if tolerate:
            return float("nan")
        raise


def seed_configs(config: ExperimentConfig, seeds: int) -> list[ExperimentConfig]:
    return [config.with_(master_seed=config.master_seed + i) for i in range(seeds)]


def final_accuracies(configs: Sequence[ExperimentConfig], dataset: Dataset | None = None,
                     jobs: int = 1, tolerate_divergence: bool = False) -> list[float]:
    """Final eval accuracy of each run; runs share nothing, so ``jobs > 1`` gives the same numbers.

    With ``tolerate_divergence`` a run that hits a numeric error scores ``nan`` instead of raising.
    """
    work = [(c, dataset, tolerate_divergence) for c in configs]
    if jobs <= 1:
        return [_final_accuracy(item) for item in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_final_accuracy, work))


def summarize(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std(ddof=1)) if arr.size > 1 else 0.0


def pivot_sweep(config: ExperimentConfig, dataset: Dataset | None, pivots: Sequence[int], seeds: int = 1,
                jobs: int = 1) -> list[tuple[int, float, float]]:
    """Mean and standard deviation of final accuracy per pivot at fixed total rounds."""
    rows = []
    for pivot in pivots:
        accs = final_accuracies(seed_configs(config.with_(pivot=int(pivot)), seeds), dataset, jobs)
        rows.append((int(pivot), *summarize(accs)))
    return rows

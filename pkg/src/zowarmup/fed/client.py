"""Client-side state and local computation for both training phases."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .. import nn
from ..errors import ConfigError
from ..nn import Batch, MlpSpec
from ..rng import SeedStream
from ..zopt import DeltaLossRecord, PerturbSpec, aggregate_estimates, delta_loss, sample_direction, zo_sgd_step

LossFn = Callable[[np.ndarray, Batch], float]


@dataclass
class ClientState:
    id: int
    resource_class: str
    shard: Batch
    model: np.ndarray
    stream: SeedStream

    @property
    def num_samples(self) -> int:
        return len(self.shard)


def mlp_loss(spec: MlpSpec) -> LossFn:
    def evaluate(w, batch):
        return nn.loss(spec, w, batch)
    return evaluate


def local_train(client: ClientState, w_global: np.ndarray, eta_c: float, epochs: int, batch_size: int,
                *, mlp: MlpSpec, round_index: int = 0) -> np.ndarray:
    """Run ``epochs`` of mini-batch SGD from ``w_global`` on the client's shard.

    The traversal order of every epoch is drawn from the client's own stream,
    keyed by round and epoch, so the result does not depend on what other
    clients did or in which order they ran.
    """
    if epochs < 0:
        raise ConfigError(f"local epochs must be non-negative, got {epochs}", field="local_epochs")
    if batch_size < 1:
        raise ConfigError(f"batch size must be positive, got {batch_size}", field="warmup_batch_size")
    w = np.array(w_global, dtype=np.float64, copy=True)
    n = client.num_samples
    for epoch in range(epochs):
        order = client.stream.spawn("warmup", round_index, epoch).generator().permutation(n)
        for start in range(0, n, batch_size):
            batch = client.shard.take(order[start:start + batch_size])
            w -= eta_c * nn.backward(mlp, w, batch)
    return w


def zo_opt_client(client: ClientState, seeds: Sequence[int], spec: PerturbSpec, grad_steps: int = 1,
                  *, loss_fn: LossFn, eta: float = 0.0, mode: str = "sum",
                  round_index: int = 0) -> list[DeltaLossRecord]:
    """Loss differences for each seed handed to this client.

    With ``grad_steps == 1`` every seed is evaluated on the whole shard with
    the model perturbed in place. With more steps the seeds are split into
    ``grad_steps`` equal groups, the shard into as many chunks, and the client
    applies its own zeroth-order step (rate ``eta``) between chunks.
    """
    if grad_steps < 1:
        raise ConfigError(f"grad_steps must be at least 1, got {grad_steps}", field="zo_grad_steps")
    if len(seeds) == 0 or len(seeds) % grad_steps:
        raise ConfigError(f"{len(seeds)} seeds cannot be split over {grad_steps} gradient steps")
    per_step = len(seeds) // grad_steps

    if grad_steps == 1:
        w = client.model
        chunks = [client.shard]
    else:
        n = client.num_samples
        if grad_steps > n:
            raise ConfigError(f"client {client.id} has {n} samples, fewer than {grad_steps} steps",
                              field="zo_grad_steps")
        w = client.model.copy()
        order = client.stream.spawn("zo-chunks", round_index).generator().permutation(n)
        chunks = [client.shard.take(np.sort(part)) for part in np.array_split(order, grad_steps)]

    records = []
    for step, chunk in enumerate(chunks):
        step_records = []
        for seed in seeds[step * per_step:(step + 1) * per_step]:
            z = sample_direction(seed, w.shape[0], spec)
            diff = delta_loss(lambda v: loss_fn(v, chunk), w, z, spec.epsilon)
            step_records.append(DeltaLossRecord(int(seed), diff))
        records.extend(step_records)
        if step < grad_steps - 1:
            w = zo_sgd_step(w, aggregate_estimates(step_records, w.shape[0], spec, mode), eta)
    return records

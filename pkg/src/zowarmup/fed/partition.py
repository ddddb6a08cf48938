"""Label-skewed client partitions and resource-class assignment."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError
from ..nn import Batch
from ..rng import SeedStream

HIGH = "high"
LOW = "low"


def _largest_remainder(total: int, weights: np.ndarray) -> np.ndarray:
    target = weights * total
    counts = np.floor(target).astype(np.int64)
    short = total - int(counts.sum())
    if short > 0:
        # stable sort keeps ties in client-id order
        order = np.argsort(-(target - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def _capped_allocation(total: int, proportions: np.ndarray, room: np.ndarray) -> np.ndarray:
    """Split ``total`` items by ``proportions`` without exceeding ``room`` per client."""
    counts = np.zeros(len(proportions), dtype=np.int64)
    remaining = total
    while remaining > 0:
        free = room - counts
        active = free > 0
        weights = np.where(active, proportions, 0.0)
        if weights.sum() <= 0.0:
            weights = active.astype(np.float64)
        weights = weights / weights.sum()
        alloc = np.minimum(_largest_remainder(remaining, weights), free)
        counts += alloc
        remaining -= int(alloc.sum())
    return counts


def dirichlet_partition_indices(labels: np.ndarray, num_clients: int, alpha: float,
                                stream: SeedStream) -> list[np.ndarray]:
    """Per-client sample indices with class proportions drawn from Dir(alpha).

    Shard sizes are capped at ``ceil(n / K)`` while classes are dealt out, so
    clients end up with (nearly) equal amounts of data but skewed labels.
    Any client left empty is topped up from the largest shard.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    if n == 0:
        raise ConfigError("cannot partition an empty dataset")
    if num_clients < 1:
        raise ConfigError(f"need at least one client, got {num_clients}", field="num_clients")
    if num_clients > n:
        raise ConfigError(f"{num_clients} clients but only {n} samples", field="num_clients")
    if not alpha > 0:
        raise ConfigError(f"Dirichlet concentration must be positive, got {alpha}", field="dirichlet_alpha")

    gen = stream.generator()
    capacity = math.ceil(n / num_clients)
    room = np.full(num_clients, capacity, dtype=np.int64)
    shards = [[] for _ in range(num_clients)]

    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        members = members[gen.permutation(members.shape[0])]
        proportions = gen.dirichlet(np.full(num_clients, float(alpha)))
        counts = _capped_allocation(members.shape[0], proportions, room)
        room -= counts
        start = 0
        for client, count in enumerate(counts):
            shards[client].extend(members[start:start + count].tolist())
            start += count

    while True:
        sizes = [len(s) for s in shards]
        empty = [k for k, size in enumerate(sizes) if size == 0]
        if not empty:
            break
        donor = int(np.argmax(sizes))
        shards[empty[0]].append(shards[donor].pop())

    return [np.array(sorted(s), dtype=np.int64) for s in shards]


def dirichlet_partition(features: np.ndarray, labels: np.ndarray, num_clients: int, alpha: float,
                        stream: SeedStream) -> list[Batch]:
    parts = dirichlet_partition_indices(labels, num_clients, alpha, stream)
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    return [Batch(features[idx], labels[idx]) for idx in parts]


def assign_resources(num_clients: int, hi_fraction: float, stream: SeedStream) -> list[str]:
    """Mark ``round(hi_fraction * K)`` clients, chosen uniformly, as high resource."""
    if not 0.0 <= hi_fraction <= 1.0:
        raise ConfigError(f"high-resource fraction must lie in [0, 1], got {hi_fraction}",
                          field="hi_fraction")
    num_high = int(math.floor(hi_fraction * num_clients + 0.5))
    chosen = stream.generator().permutation(num_clients)[:num_high]
    classes = [LOW] * num_clients
    for k in chosen:
        classes[int(k)] = HIGH
    return classes

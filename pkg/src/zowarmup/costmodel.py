"""Per-client, per-round communication and memory accounting.

All byte counts use 4-byte words, the convention under which every weight,
gradient entry, loss difference and seed costs 32 bits. ``strict64`` mode
instead prices loss differences and seeds at 8 bytes each and also counts the
seed that travels with every loss difference on the down-link.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from .errors import ConfigError
from .nn import ModelDescriptor

WORD_BYTES = 4
FIRST_ORDER = "first_order"
ZERO_ORDER = "zero_order"
ACCOUNTING_MODES = ("word32", "strict64")


def comm_full(param_count: int) -> int:
    """Bytes to ship a full weight or gradient vector."""
    if param_count < 1:
        raise ConfigError(f"parameter count must be positive, got {param_count}")
    return WORD_BYTES * int(param_count)


def comm_zo(seeds_per_client: int, participants: int = 1, direction: str = "up",
            accounting: str = "word32") -> int:
    """Bytes for the seed/loss-difference exchange.

    Up-link: one loss difference per seed. Down-link: the full list of
    ``seeds_per_client * participants`` entries broadcast to every client.
    """
    if seeds_per_client < 1 or participants < 1:
        raise ConfigError("seeds per client and participant count must be positive")
    if accounting not in ACCOUNTING_MODES:
        raise ConfigError(f"unknown accounting mode {accounting!r}")
    if direction == "up":
        return (8 if accounting == "strict64" else WORD_BYTES) * seeds_per_client
    if direction == "down":
        per_entry = 16 if accounting == "strict64" else WORD_BYTES
        return per_entry * seeds_per_client * participants
    raise ConfigError(f"direction must be 'up' or 'down', got {direction!r}")


def _check_batch(batch_size):
    if batch_size < 1:
        raise ConfigError(f"batch size must be positive, got {batch_size}")


def mem_full(desc: ModelDescriptor, batch_size: int) -> int:
    """Backprop footprint: weights, gradients and every layer output for the batch."""
    _check_batch(batch_size)
    return WORD_BYTES * (2 * desc.param_count + batch_size * sum(desc.activation_sizes))


def mem_zo(desc: ModelDescriptor, batch_size: int) -> int:
    """Forward-only footprint: weights, a saved copy and the largest layer output."""
    _check_batch(batch_size)
    return WORD_BYTES * (2 * desc.param_count + batch_size * max(desc.activation_sizes))


def resnet18_descriptor(num_classes: int = 10, input_size: int = 32, stem: str = "cifar") -> ModelDescriptor:
    """Layer outputs of a ResNet18, one entry per leaf module as a summary tool lists them.

    ``stem="cifar"`` uses the 3x3 stride-1 first convolution without max
    pooling that is standard for 32x32 inputs; ``stem="imagenet"`` uses the
    7x7 stride-2 convolution followed by 3x3 stride-2 max pooling.
    """
    if stem not in ("cifar", "imagenet"):
        raise ConfigError(f"unknown ResNet stem {stem!r}")
    outputs = []
    params = 0

    def conv(c_in, c_out, k, size):
        nonlocal params
        params += c_in * c_out * k * k
        outputs.append((c_out, size, size))

    def bn(c, size):
        nonlocal params
        params += 2 * c
        outputs.append((c, size, size))

    size = input_size
    if stem == "cifar":
        conv(3, 64, 3, size)
    else:
        size = (size + 2 * 3 - 7) // 2 + 1
        conv(3, 64, 7, size)
    bn(64, size)
    outputs.append((64, size, size))  # relu
    if stem == "imagenet":
        size = (size + 2 - 3) // 2 + 1
        outputs.append((64, size, size))  # maxpool

    c_in = 64
    for c_out, stride in ((64, 1), (128, 2), (256, 2), (512, 2)):
        for block in range(2):
            s = stride if block == 0 else 1
            out_size = (size - 1) // s + 1
            conv(c_in, c_out, 3, out_size)
            bn(c_out, out_size)
            outputs.append((c_out, out_size, out_size))  # relu
            conv(c_out, c_out, 3, out_size)
            bn(c_out, out_size)
            if s != 1 or c_in != c_out:
                conv(c_in, c_out, 1, out_size)
                bn(c_out, out_size)
            outputs.append((c_out, out_size, out_size))  # relu after the residual add
            c_in, size = c_out, out_size

    outputs.append((512, 1, 1))  # global average pool
    params += 512 * num_classes + num_classes
    outputs.append((num_classes, 1, 1))
    return ModelDescriptor(param_count=params, layer_outputs=tuple(outputs))


@dataclass(frozen=True)
class CostReport:
    method: str
    round_index: int
    uplink_bytes_per_client: int
    downlink_bytes_per_client: int
    peak_memory_bytes_per_client: int
    accounting: str = "word32"

    def __post_init__(self):
        if self.method not in (FIRST_ORDER, ZERO_ORDER):
            raise ConfigError(f"unknown method {self.method!r}")
        for name in ("uplink_bytes_per_client", "downlink_bytes_per_client", "peak_memory_bytes_per_client"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


def first_order_report(desc: ModelDescriptor, batch_size: int, round_index: int = 0) -> CostReport:
    return CostReport(
        method=FIRST_ORDER,
        round_index=round_index,
        uplink_bytes_per_client=comm_full(desc.param_count),
        downlink_bytes_per_client=comm_full(desc.param_count),
        peak_memory_bytes_per_client=mem_full(desc, batch_size),
    )


def zero_order_report(desc: ModelDescriptor, batch_size: int, seeds_per_client: int, participants: int,
                      round_index: int = 0, accounting: str = "word32") -> CostReport:
    return CostReport(
        method=ZERO_ORDER,
        round_index=round_index,
        uplink_bytes_per_client=comm_zo(seeds_per_client, participants, "up", accounting),
        downlink_bytes_per_client=comm_zo(seeds_per_client, participants, "down", accounting),
        peak_memory_bytes_per_client=mem_zo(desc, batch_size),
        accounting=accounting,
    )


def comparison(desc: ModelDescriptor, fo_batch_size: int, zo_batch_size: int, seeds_per_client: int,
               participants: int, accounting: str = "word32") -> dict:
    """First- vs zeroth-order footprint for one client and one round, in bytes and MB."""
    fo = first_order_report(desc, fo_batch_size)
    zo = zero_order_report(desc, zo_batch_size, seeds_per_client, participants, accounting=accounting)
    return {
        "param_count": desc.param_count,
        "word_bytes": WORD_BYTES,
        "simulation_dtype": "float64",
        "first_order": {**fo.to_dict(), "batch_size": fo_batch_size},
        "zero_order": {**zo.to_dict(), "batch_size": zo_batch_size,
                       "seeds_per_client": seeds_per_client, "participants": participants},
        "memory_ratio": fo.peak_memory_bytes_per_client / zo.peak_memory_bytes_per_client,
    }


def dumps(report) -> str:
    if isinstance(report, CostReport):
        report = report.to_dict()
    return json.dumps(report, indent=2, sort_keys=True)

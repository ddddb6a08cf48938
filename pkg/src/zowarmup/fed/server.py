"""Server-side aggregation and optimizer steps."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ConfigError, ProtocolError

SERVER_KINDS = ("sgd", "adam")


@dataclass
class ServerOptState:
    """Server optimizer applied to a pseudo-gradient.

    ``sgd`` returns ``w - eta_s * g``; with ``eta_s = 1`` and the pseudo-gradient
    ``w - w_avg`` that is plain FedAvg. ``adam`` is bias-corrected Adam
    (FedAdam when fed averaged client deltas).
    """

    kind: str = "sgd"
    eta_s: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    first_moment: np.ndarray | None = field(default=None, repr=False)
    second_moment: np.ndarray | None = field(default=None, repr=False)
    step_count: int = 0

    def __post_init__(self):
        if self.kind not in SERVER_KINDS:
            raise ConfigError(f"unknown server optimizer {self.kind!r}", field="server_opt")
        if not self.eta_s > 0:
            raise ConfigError(f"server learning rate must be positive, got {self.eta_s}", field="eta_s")
        for name in ("beta1", "beta2"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {value}", field=name)


def server_step(opt: ServerOptState, w: np.ndarray, pseudo_gradient: np.ndarray) -> np.ndarray:
    if np.shape(w) != np.shape(pseudo_gradient):
        raise ConfigError("weights and pseudo-gradient differ in shape")
    opt.step_count += 1
    if opt.kind == "sgd":
        return w - opt.eta_s * pseudo_gradient

    if opt.first_moment is None:
        opt.first_moment = np.zeros_like(w)
        opt.second_moment = np.zeros_like(w)
    g = pseudo_gradient
    opt.first_moment = opt.beta1 * opt.first_moment + (1.0 - opt.beta1) * g
    opt.second_moment = opt.beta2 * opt.second_moment + (1.0 - opt.beta2) * (g * g)
    m_hat = opt.first_moment / (1.0 - opt.beta1 ** opt.step_count)
    v_hat = opt.second_moment / (1.0 - opt.beta2 ** opt.step_count)
    return w - opt.eta_s * m_hat / (np.sqrt(v_hat) + opt.eps)


def fedavg_aggregate(updates: Sequence[tuple[np.ndarray, int]]) -> np.ndarray:
    """Sample-weighted average of client models.

    Computed as ``w_1 + sum_k (n_k / n) (w_k - w_1)`` over the updates in the
    order given (callers pass ascending client id). The implicit weight of
    ``w_1`` makes the weights sum to one exactly, so averaging identical
    models returns that model bit for bit.
    """
    if len(updates) == 0:
        raise ProtocolError("no client updates to aggregate")
    first, _ = updates[0]
    first = np.asarray(first, dtype=np.float64)
    total = 0
    for w, n_k in updates:
        if np.shape(w) != first.shape:
            raise ConfigError(f"client update has shape {np.shape(w)}, expected {first.shape}")
        if n_k < 0:
            raise ConfigError(f"negative sample count {n_k}")
        total += int(n_k)
    if total == 0:
        raise ProtocolError("client updates carry zero samples in total")
    result = first.copy()
    for w, n_k in updates[1:]:
        result += (n_k / total) * (np.asarray(w, dtype=np.float64) - first)
    return result

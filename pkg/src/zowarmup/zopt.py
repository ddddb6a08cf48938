"""Zeroth-order gradient estimation with seed-regenerated perturbations.

A perturbation direction is never stored or transmitted: it is rebuilt from
its 64-bit seed whenever needed. The scalar loss difference along that
direction is the only quantity a client has to report.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple

import numpy as np

from .errors import ConfigError, NumericError, ProtocolError
from .rng import SeedStream

GAUSSIAN = "gaussian"
RADEMACHER = "rademacher"
KINDS = (GAUSSIAN, RADEMACHER)


@dataclass(frozen=True)
class PerturbSpec:
    """Direction distribution and SPSA step.

    ``tau`` scales Rademacher entries to ``+-tau``; Gaussian directions are
    always standard normal and ignore it. The effective finite-difference
    step along a Rademacher coordinate is therefore ``tau * epsilon``.
    """

    kind: str = RADEMACHER
    tau: float = 0.75
    epsilon: float = 1e-4

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown perturbation kind {self.kind!r}", field="distribution")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError(f"tau must lie in (0, 1], got {self.tau}", field="tau")
        if not self.epsilon > 0.0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}", field="epsilon")


class DeltaLossRecord(NamedTuple):
    seed: int
    delta_loss: float


def sample_direction(seed: int, d: int, spec: PerturbSpec) -> np.ndarray:
    if d < 1:
        raise ConfigError(f"direction dimension must be positive, got {d}")
    stream = SeedStream(seed)
    if spec.kind == RADEMACHER:
        u = stream.uniform(d)
        return np.where(u < 0.5, spec.tau, -spec.tau)
    return stream.normal(d)


def delta_loss(evaluate: Callable[[np.ndarray], float], w: np.ndarray, z: np.ndarray,
               epsilon: float) -> float:
    """``L(w + eps z) - L(w - eps z)`` using two evaluations.

    ``w`` is perturbed in place and restored from a saved copy, so it is
    bit-identical to its input state on return (also when an error is raised).
    """
    if not epsilon > 0.0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    saved = w.copy()
    step = epsilon * z
    try:
        np.add(saved, step, out=w)
        plus = float(evaluate(w))
        if not np.isfinite(plus):
            raise NumericError("loss at w + epsilon*z is not finite")
        np.subtract(saved, step, out=w)
        minus = float(evaluate(w))
        if not np.isfinite(minus):
            raise NumericError("loss at w - epsilon*z is not finite")
    finally:
        w[...] = saved
    return plus - minus


def spsa_estimate(delta: float, z: np.ndarray, epsilon: float) -> np.ndarray:
    if not epsilon > 0.0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    return (delta / (2.0 * epsilon)) * z


def aggregate_estimates(records: Iterable[DeltaLossRecord], d: int, spec: PerturbSpec,
                        mode: str = "sum") -> np.ndarray:
    """Rebuild every direction from its seed and combine the SPSA estimates.

    Records are accumulated strictly in the order given, which makes the
    result bit-reproducible for a fixed record list.
    """
    if mode not in ("sum", "mean"):
        raise ConfigError(f"aggregation mode must be 'sum' or 'mean', got {mode!r}", field="aggregation")
    total = np.zeros(d)
    count = 0
    for seed, delta in records:
        total += spsa_estimate(delta, sample_direction(seed, d, spec), spec.epsilon)
        count += 1
    if count == 0:
        raise ProtocolError("cannot aggregate an empty record list")
    if mode == "mean":
        total /= count
    return total


def zo_sgd_step(w: np.ndarray, g_hat: np.ndarray, eta: float) -> np.ndarray:
    if np.shape(w) != np.shape(g_hat):
        raise ConfigError(f"weights {np.shape(w)} and estimate {np.shape(g_hat)} differ in shape")
    return w - eta * g_hat

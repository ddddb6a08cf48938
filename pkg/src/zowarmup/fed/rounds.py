"""One federated round of each phase.

Warm-up rounds run local SGD on high-resource clients and average the
results. Zeroth-order rounds run the seed exchange: the server hands out
seeds, clients answer with one loss difference per seed, the server
broadcasts the full ``(seed, loss difference)`` list and every client
rebuilds the same update from it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import costmodel
from ..errors import ConfigError, NumericError, ProtocolError
from ..nn import MlpSpec
from ..rng import perturbation_seed
from ..zopt import DeltaLossRecord, PerturbSpec, aggregate_estimates, sample_direction, spsa_estimate, zo_sgd_step
from .client import ClientState, LossFn, local_train, zo_opt_client
from .server import ServerOptState, fedavg_aggregate, server_step

WARMUP = "warmup"
ZO = "zo"
PROTOCOLS = ("seed", "full")


@dataclass(frozen=True)
class RoundPlan:
    round_index: int
    phase: str
    participants: tuple[int, ...]
    seeds_per_client: int = 0

    def __post_init__(self):
        object.__setattr__(self, "participants", tuple(sorted(int(p) for p in self.participants)))
        if self.phase not in (WARMUP, ZO):
            raise ConfigError(f"unknown phase {self.phase!r}")
        if len(set(self.participants)) != len(self.participants):
            raise ConfigError("participant list contains duplicates")
        if self.phase == ZO and self.seeds_per_client < 1:
            raise ConfigError("zeroth-order rounds need at least one seed per client", field="S")


@dataclass
class RoundResult:
    weights: np.ndarray
    uplink: dict[int, int] = field(default_factory=dict)
    downlink: dict[int, int] = field(default_factory=dict)
    records: list[DeltaLossRecord] = field(default_factory=list)

    @property
    def uplink_total(self) -> int:
        return sum(self.uplink.values())

    @property
    def downlink_total(self) -> int:
        return sum(self.downlink.values())


def _check_finite(w, round_index):
    if not np.all(np.isfinite(w)):
        raise NumericError("model weights became non-finite", round_index=round_index)


def warmup_round(clients: Sequence[ClientState], plan: RoundPlan, w_global: np.ndarray, *, mlp: MlpSpec,
                 eta_c: float, epochs: int, batch_size: int,
                 server: ServerOptState | None = None) -> RoundResult:
    """Local SGD on the planned (high-resource) clients, then weighted averaging."""
    if plan.phase != WARMUP:
        raise ConfigError("warmup_round needs a warm-up plan")
    if not plan.participants:
        raise ProtocolError(f"round {plan.round_index}: no warm-up participants")
    updates = []
    for cid in plan.participants:
        client = clients[cid]
        local = local_train(client, w_global, eta_c, epochs, batch_size, mlp=mlp, round_index=plan.round_index)
        updates.append((local, client.num_samples))
    w_avg = fedavg_aggregate(updates)
    w_new = w_avg if server is None else server_step(server, w_global, w_global - w_avg)
    _check_finite(w_new, plan.round_index)

    words = costmodel.comm_full(w_global.shape[0])
    result = RoundResult(w_new)
    for cid in plan.participants:
        clients[cid].model = w_new.copy()
        result.uplink[cid] = words
        result.downlink[cid] = words
    return result


def round_seeds(run_seed: int, plan: RoundPlan, grad_steps: int = 1) -> dict[int, list[int]]:
    """Seeds the server hands to each participant, checked for collisions."""
    count = plan.seeds_per_client * grad_steps
    seeds = {cid: [perturbation_seed(run_seed, plan.round_index, cid, s) for s in range(count)]
             for cid in plan.participants}
    flat = [s for group in seeds.values() for s in group]
    if len(set(flat)) != len(flat):
        raise ProtocolError(f"round {plan.round_index}: seed derivation produced a collision")
    return seeds


def collect_records(clients: Sequence[ClientState], plan: RoundPlan, spec: PerturbSpec, *, run_seed: int,
                    loss_fn: LossFn, grad_steps: int = 1, eta: float = 0.0,
                    mode: str = "sum") -> dict[int, list[DeltaLossRecord]]:
    seeds = round_seeds(run_seed, plan, grad_steps)
    return {cid: zo_opt_client(clients[cid], seeds[cid], spec, grad_steps, loss_fn=loss_fn, eta=eta,
                               mode=mode, round_index=plan.round_index)
            for cid in plan.participants}


def apply_zo_update(w: np.ndarray, records: Sequence[DeltaLossRecord], spec: PerturbSpec, eta: float,
                    mode: str = "sum", server: ServerOptState | None = None) -> np.ndarray:
    """The update each client rebuilds from the broadcast record list."""
    g_hat = aggregate_estimates(records, w.shape[0], spec, mode)
    if server is None:
        return zo_sgd_step(w, g_hat, eta)
    return server_step(server, w, eta * g_hat)


def zo_round(clients: Sequence[ClientState], plan: RoundPlan, spec: PerturbSpec, eta_c_zo: float,
             mode: str = "sum", *, run_seed: int, loss_fn: LossFn, grad_steps: int = 1,
             protocol: str = "seed", server: ServerOptState | None = None,
             w_global: np.ndarray | None = None) -> RoundResult:
    """Seed-exchange zeroth-order round; every client ends with the same model.

    ``protocol="full"`` is the reference exchange in which clients ship their
    estimate vectors instead of scalars. It sums the same vectors in the same
    order and therefore lands on bit-identical weights.

    All clients apply the broadcast update, high-resource ones included, so
    the federation stays synchronised. The update is a pure function of the
    pre-round weights and the record list, so it is computed once and copied
    to each client.
    """
    if plan.phase != ZO:
        raise ConfigError("zo_round needs a zeroth-order plan")
    if protocol not in PROTOCOLS:
        raise ConfigError(f"unknown protocol {protocol!r}")
    if not plan.participants:
        raise ProtocolError(f"round {plan.round_index}: no zeroth-order participants")
    w = (clients[plan.participants[0]].model if w_global is None else w_global).copy()
    d = w.shape[0]

    uploads = collect_records(clients, plan, spec, run_seed=run_seed, loss_fn=loss_fn,
                              grad_steps=grad_steps, eta=eta_c_zo, mode=mode)
    records = [rec for cid in plan.participants for rec in uploads[cid]]
    if not records:
        raise ProtocolError(f"round {plan.round_index}: no records uploaded")
    for rec in records:
        if not np.isfinite(rec.delta_loss):
            raise NumericError(f"non-finite loss difference for seed {rec.seed}", round_index=plan.round_index)

    result = RoundResult(w, records=records)
    if protocol == "seed":
        w_new = apply_zo_update(w, records, spec, eta_c_zo, mode, server)
        for cid in plan.participants:
            result.uplink[cid] = costmodel.comm_zo(len(uploads[cid]), 1, "up")
        down = costmodel.comm_zo(plan.seeds_per_client * grad_steps, len(plan.participants), "down")
    else:
        shipped = {cid: [spsa_estimate(rec.delta_loss, sample_direction(rec.seed, d, spec), spec.epsilon)
                         for rec in uploads[cid]]
                   for cid in plan.participants}
        g_hat = np.zeros(d)
        for cid in plan.participants:
            for vector in shipped[cid]:
                g_hat += vector
        if mode == "mean":
            g_hat /= len(records)
        w_new = zo_sgd_step(w, g_hat, eta_c_zo) if server is None else server_step(server, w, eta_c_zo * g_hat)
        for cid in plan.participants:
            result.uplink[cid] = costmodel.comm_full(d) * len(uploads[cid])
        down = costmodel.comm_full(d)
    _check_finite(w_new, plan.round_index)

    result.weights = w_new
    for client in clients:
        client.model = w_new.copy()
        result.downlink[client.id] = down
    return result


def hybrid_round(clients: Sequence[ClientState], plan: RoundPlan, spec: PerturbSpec, *, mlp: MlpSpec,
                 run_seed: int, loss_fn: LossFn, eta_c_hi: float, epochs: int, batch_size: int,
                 eta_c_zo: float, mode: str = "sum", grad_steps: int = 1,
                 server: ServerOptState | None = None) -> RoundResult:
    """Second-phase round in which high-resource clients keep training first-order.

    High-resource participants run local SGD and are averaged into one
    candidate; low-resource participants run the seed exchange, giving a
    second candidate. The new model is the sample-weighted average of the two.
    """
    w = clients[plan.participants[0]].model.copy()
    d = w.shape[0]
    high = [cid for cid in plan.participants if clients[cid].resource_class == "high"]
    low = [cid for cid in plan.participants if clients[cid].resource_class != "high"]
    result = RoundResult(w)
    candidates = []

    if high:
        locals_ = [(local_train(clients[cid], w, eta_c_hi, epochs, batch_size, mlp=mlp,
                                round_index=plan.round_index), clients[cid].num_samples) for cid in high]
        candidates.append((fedavg_aggregate(locals_), sum(n for _, n in locals_)))
        for cid in high:
            result.uplink[cid] = costmodel.comm_full(d)
    if low:
        low_plan = RoundPlan(plan.round_index, ZO, tuple(low), plan.seeds_per_client)
        uploads = collect_records(clients, low_plan, spec, run_seed=run_seed, loss_fn=loss_fn,
                                  grad_steps=grad_steps, eta=eta_c_zo, mode=mode)
        records = [rec for cid in low for rec in uploads[cid]]
        result.records = records
        w_lo = apply_zo_update(w, records, spec, eta_c_zo, mode, server)
        candidates.append((w_lo, sum(clients[cid].num_samples for cid in low)))
        for cid in low:
            result.uplink[cid] = costmodel.comm_zo(len(uploads[cid]), 1, "up")

    w_new = fedavg_aggregate(candidates)
    _check_finite(w_new, plan.round_index)
    result.weights = w_new
    zo_down = costmodel.comm_zo(plan.seeds_per_client * grad_steps, len(low), "down") if low else 0
    for client in clients:
        client.model = w_new.copy()
        result.downlink[client.id] = (costmodel.comm_full(d) if client.resource_class == "high" else 0) + \
            (zo_down if client.resource_class != "high" else 0)
    return result

"""
Seed exchange in one zeroth-order round
=======================================

Each client perturbs the shared model along a few random directions and
reports, per direction, the seed that generated it and the loss difference
it measured. Those scalars are all anyone has to send.
"""

# %%
from zowarmup import costmodel, nn
from zowarmup.data import generate_synthetic
from zowarmup.fed import ExperimentConfig, build_clients, round_seeds, zo_round
from zowarmup.fed.client import mlp_loss
from zowarmup.fed.rounds import ZO, RoundPlan
from zowarmup.rng import SeedStream
from zowarmup.zopt import aggregate_estimates

config = ExperimentConfig(num_clients=4, hi_fraction=0.25, pivot=0, total_rounds=1, hidden_widths=(16,),
                          num_classes=4, samples_per_class=60, input_dim=8)
data = generate_synthetic(config.dataset_spec())
mlp = config.mlp_spec()
root = SeedStream(config.master_seed)
clients = build_clients(config, data.train, root)
w = nn.init_params(mlp, root.spawn("init"))
for c in clients:
    c.model = w.copy()
print("parameters:", w.size, " shard sizes:", [c.num_samples for c in clients])

# %% [markdown]
# The seeds for a round come from the run seed, the round index and the
# client id, so the server and every client can list them independently.

# %%
plan = RoundPlan(0, ZO, (0, 1, 2, 3), seeds_per_client=3)
seeds = round_seeds(run_seed=7, plan=plan, grad_steps=1)
for cid, s in seeds.items():
    print(cid, [hex(x)[:10] for x in s])

# %%
result = zo_round(clients, plan, config.perturb_spec(), eta_c_zo=1e-3, run_seed=7, loss_fn=mlp_loss(mlp))
for rec in result.records[:4]:
    print(f"seed {rec.seed:>20}  delta loss {rec.delta_loss:+.3e}")
print("uplink per client:", result.uplink[0], "bytes; a full model would be", costmodel.comm_full(w.size))
print("downlink per client:", result.downlink[0], "bytes")

# %% [markdown]
# Anyone holding the broadcast list rebuilds the same update by regenerating
# the directions from the seeds.

# %%
g_hat = aggregate_estimates(result.records, w.size, config.perturb_spec())
rebuilt = w - 1e-3 * g_hat
print("rebuilt update matches the round result:", rebuilt.tobytes() == result.weights.tobytes())
print("all clients agree:", all(c.model.tobytes() == result.weights.tobytes() for c in clients))

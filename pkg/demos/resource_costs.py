"""
What one round costs a client
=============================

Bytes sent and peak memory for a full-gradient round against a
zeroth-order round, for ResNet18 on 32x32 inputs and for the desk MLP.
"""

# %%
from zowarmup import costmodel, nn
from zowarmup.fed import ExperimentConfig

resnet = costmodel.resnet18_descriptor()
print("ResNet18 parameters:", resnet.param_count)
print(f"full model exchange: {costmodel.comm_full(resnet.param_count) / 1e6:.1f} MB")
print(f"seed exchange, S=3:  {costmodel.comm_zo(3)} bytes up, "
      f"{costmodel.comm_zo(3, participants=100, direction='down')} bytes down with 100 clients")

# %%
for bs in (16, 64, 256):
    full = costmodel.mem_full(resnet, bs) / 1e6
    zo = costmodel.mem_zo(resnet, bs) / 1e6
    print(f"batch {bs:>3}: backprop {full:7.1f} MB   two forward passes {zo:6.1f} MB")

# %% [markdown]
# The zeroth-order figure keeps the weights plus their perturbed copy and
# only the largest single activation, since nothing is stored for a
# backward pass.

# %%
desk = nn.descriptor_of(ExperimentConfig().mlp_spec())
print(costmodel.dumps(costmodel.comparison(desk, 64, 108, 3, 20)))

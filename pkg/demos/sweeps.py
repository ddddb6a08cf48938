"""
Where to switch, and how many directions
========================================

Final accuracy as a function of the pivot round, the number of seeds per
client, and the number of local zeroth-order steps. Each point averages a
few independent runs; expect this script to take a couple of minutes.
"""

# %%
from zowarmup.fed import ExperimentConfig
from zowarmup.harness import format_table, sweep

config = ExperimentConfig()
print(format_table("pivot", sweep(config, None, "pivot", ["0", "25", "50", "100", "150"], seeds=3)))

# %%
print(format_table("S", sweep(config, None, "S", ["1", "3"], seeds=3)))

# %% [markdown]
# More local steps need a smaller tau to stay stable, and still end up worse
# than a single step over the whole shard.

# %%
print(format_table("grad_steps", sweep(config, None, "grad_steps", ["1", "2", "6"], seeds=3)))

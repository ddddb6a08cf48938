"""
Rademacher against Gaussian directions
======================================

On a quadratic the two-point estimate along z equals z z^T g exactly, so
all of its spread comes from the direction distribution.
"""

# %%
import numpy as np

from zowarmup.zopt import GAUSSIAN, RADEMACHER, PerturbSpec, delta_loss, sample_direction, spsa_estimate

d = 6
rng = np.random.default_rng(0)
m = rng.normal(size=(d, d))
A = m @ m.T / d + np.eye(d)
loss = lambda w: 0.5 * float(w @ A @ w)
w = rng.normal(size=d)
g = A @ w


def estimates(spec, n=5000):
    out = []
    for seed in range(n):
        z = sample_direction(seed, d, spec)
        out.append(spsa_estimate(delta_loss(loss, w, z, spec.epsilon), z, spec.epsilon))
    return np.array(out)


# %%
rad = estimates(PerturbSpec(RADEMACHER, tau=1.0, epsilon=1e-3))
gau = estimates(PerturbSpec(GAUSSIAN, epsilon=1e-3))
print("gradient      ", np.round(g, 3))
print("rademacher var", np.round(rad.var(axis=0), 3))
print("gaussian var  ", np.round(gau.var(axis=0), 3))

# %% [markdown]
# Scaling Rademacher entries to +-tau shrinks the estimate towards zero by
# tau squared, which acts like a smaller learning rate with lower variance.

# %%
for tau in (1.0, 0.75, 0.5, 0.25):
    est = estimates(PerturbSpec(RADEMACHER, tau=tau, epsilon=1e-3), 2000)
    ratio = est.mean(axis=0) @ g / (g @ g)
    print(f"tau {tau:.2f}: mean estimate / g = {ratio:.3f} (tau^2 = {tau * tau:.3f}), "
          f"total var {est.var(axis=0).sum():.3f}")

"""End-to-end acceptance checks, one summary line per check.

Run alone with ``pytest tests/test_acceptance.py``; the PASS/FAIL lines are
repeated in the ``acceptance`` section of the terminal summary.
"""

import time
from functools import lru_cache
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zowarmup import costmodel, nn
from zowarmup.config import load_config
from zowarmup.fed import GRAD_STEP_TAU_PRESET, ExperimentConfig, final_accuracies, run_zowarmup, seed_configs
from zowarmup.harness import run_to_directory
from zowarmup.nn import Batch, MlpSpec
from zowarmup.zopt import GAUSSIAN, RADEMACHER, PerturbSpec, delta_loss, sample_direction, spsa_estimate

MB = 1e6
DESK = ExperimentConfig()


class Quadratic:
    def __init__(self, d, seed):
        rng = np.random.default_rng(seed)
        m = rng.normal(size=(d, d))
        self.A = m @ m.T / d + np.eye(d)
        self.b = rng.normal(size=d)

    def __call__(self, w):
        return 0.5 * float(w @ self.A @ w) + float(self.b @ w)

    def grad(self, w):
        return self.A @ w + self.b


def spsa_samples(quad, w, spec, n, first_seed=0):
    return np.stack([
        spsa_estimate(delta_loss(quad, w, z, spec.epsilon), z, spec.epsilon)
        for z in (sample_direction(seed, w.shape[0], spec) for seed in range(first_seed, first_seed + n))
    ])


@lru_cache(maxsize=None)
def mean_accuracy(config: ExperimentConfig, seeds: int) -> float:
    return float(np.mean(final_accuracies(seed_configs(config, seeds))))


def test_seed_exchange_matches_full_vector_exchange(verdict):
    config = ExperimentConfig(num_clients=8, hi_fraction=0.125, pivot=0, total_rounds=10, seeds_per_client=3,
                              hidden_widths=(28,), input_dim=32, num_classes=8, samples_per_class=100)
    d = nn.parameter_count(config.mlp_spec())
    started = time.perf_counter()
    seed = run_zowarmup(config)
    full = run_zowarmup(config.with_(zo_protocol="full"))
    elapsed = time.perf_counter() - started
    same_weights = seed.weights.tobytes() == full.weights.tobytes()
    same_curve = [(r.eval_accuracy, r.eval_loss) for r in seed.metrics] == \
                 [(r.eval_accuracy, r.eval_loss) for r in full.metrics]
    cheaper = seed.metrics[-1].uplink_bytes < full.metrics[-1].uplink_bytes
    verdict("1 seed exchange is bit-identical to full-vector exchange",
            same_weights and same_curve and cheaper and elapsed < 10,
            f"d={d}, 10 rounds, identical={same_weights and same_curve}, {elapsed:.2f}s")


def test_spsa_exactness_and_unbiasedness(verdict):
    started = time.perf_counter()
    d = 10
    quad = Quadratic(d, 0)
    w = np.random.default_rng(1).normal(size=d)
    g = quad.grad(w)
    # a quadratic has no curvature error, so a unit step avoids cancellation in the difference
    exact = PerturbSpec(RADEMACHER, tau=0.75, epsilon=1.0)
    worst = 0.0
    for seed in range(50):
        z = sample_direction(seed, d, exact)
        estimate = spsa_estimate(delta_loss(quad, w, z, 1.0), z, 1.0)
        worst = max(worst, float(np.max(np.abs(estimate - z * (z @ g)) / np.abs(z * (z @ g)))))
    samples = spsa_samples(quad, w, PerturbSpec(RADEMACHER, tau=1.0, epsilon=1e-3), 10_000)
    stderr = samples.std(axis=0, ddof=1) / np.sqrt(len(samples))
    z_scores = np.abs(samples.mean(axis=0) - g) / stderr
    elapsed = time.perf_counter() - started
    verdict("2 SPSA estimate is exact on quadratics and unbiased",
            worst < 1e-12 and np.all(z_scores < 3) and elapsed < 5,
            f"max rel err {worst:.1e}, max |z-score| {z_scores.max():.2f}, {elapsed:.2f}s")


def test_rademacher_variance_below_gaussian(verdict):
    started = time.perf_counter()
    d = 6
    quad = Quadratic(d, 2)
    # a point whose gradient has equal-magnitude entries; per coordinate the variances are
    # |g|^2 - g_i^2 (Rademacher) and |g|^2 + g_i^2 (Gaussian), so the expected ratio is 5/7
    target = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])
    w = np.linalg.solve(quad.A, target - quad.b)
    rademacher = spsa_samples(quad, w, PerturbSpec(RADEMACHER, tau=1.0, epsilon=1e-3), 10_000).var(axis=0, ddof=1)
    gaussian = spsa_samples(quad, w, PerturbSpec(GAUSSIAN, epsilon=1e-3), 10_000, 10_000).var(axis=0, ddof=1)
    elapsed = time.perf_counter() - started
    verdict("3 Rademacher estimate variance is below Gaussian in every coordinate",
            bool(np.all(rademacher < gaussian)) and elapsed < 5,
            f"max ratio {np.max(rademacher / gaussian):.3f}, {elapsed:.2f}s")


def test_backprop_matches_finite_differences(verdict):
    started = time.perf_counter()
    h = 1e-5
    worst = 0.0
    for case in range(100):
        rng = np.random.default_rng(1000 + case)
        widths = [int(v) for v in rng.integers(1, 9, size=int(rng.integers(2, 5)))]
        widths[-1] = max(widths[-1], 2)
        spec = MlpSpec(tuple(widths))
        w = rng.normal(size=nn.parameter_count(spec))
        n = int(rng.integers(1, 9))
        batch = Batch(rng.normal(size=(n, widths[0])), rng.integers(0, widths[-1], size=n))
        analytic = nn.backward(spec, w, batch)
        numeric = np.empty_like(w)
        for i in range(w.shape[0]):
            up, down = w.copy(), w.copy()
            up[i] += h
            down[i] -= h
            numeric[i] = (nn.loss(spec, up, batch) - nn.loss(spec, down, batch)) / (2 * h)
        scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-3)
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / scale)))
    elapsed = time.perf_counter() - started
    verdict("4 backprop matches central differences on 100 random networks",
            worst < 1e-4 and elapsed < 10, f"max rel err {worst:.1e}, {elapsed:.2f}s")


def test_cost_model_communication(verdict):
    full = costmodel.comm_full(11_175_000) / MB
    verdict("5a full-model exchange is 44.7 MB within 2%", abs(full - 44.7) <= 0.02 * 44.7, f"{full:.2f} MB")
    up = costmodel.comm_zo(3)
    verdict("5b zeroth-order uplink with S=3 is 12 bytes", up == 12, f"{up} bytes")


def test_cost_model_first_order_memory(verdict):
    value = costmodel.mem_full(costmodel.resnet18_descriptor(), 64) / MB
    verdict("5c ResNet18 first-order memory is 533.2 MB within 5%", abs(value - 533.2) <= 0.05 * 533.2,
            f"{value:.1f} MB ({100 * (value / 533.2 - 1):+.1f}%)")


def test_cost_model_zeroth_order_memory(verdict):
    value = costmodel.mem_zo(costmodel.resnet18_descriptor(), 64) / MB
    verdict("5d ResNet18 zeroth-order memory is 89.4 MB within 5%", abs(value - 89.4) <= 0.05 * 89.4,
            f"{value:.1f} MB ({100 * (value / 89.4 - 1):+.1f}%)")


descriptors = st.builds(
    nn.ModelDescriptor,
    param_count=st.integers(1, 10**9),
    layer_outputs=st.lists(st.tuples(st.integers(1, 4096), st.integers(1, 256), st.integers(1, 256)),
                           min_size=1, max_size=30).map(tuple),
)


def test_cost_model_memory_ordering(verdict):
    started = time.perf_counter()
    violations = []

    @settings(max_examples=1000, deadline=None, database=None)
    @given(descriptors, st.integers(1, 512))
    def check(desc, batch_size):
        if costmodel.mem_zo(desc, batch_size) > costmodel.mem_full(desc, batch_size):
            violations.append((desc, batch_size))

    check()
    elapsed = time.perf_counter() - started
    verdict("5e zeroth-order memory never exceeds first-order on 1000 descriptors", not violations,
            f"{len(violations)} violations, {elapsed:.2f}s")


@pytest.mark.slow
def test_warmup_beats_high_resource_only(verdict):
    ours = mean_accuracy(DESK, 5)
    baseline = mean_accuracy(DESK.with_(pivot=DESK.total_rounds), 5)
    verdict("6 two-phase training beats high-resource-only", ours > baseline,
            f"{ours:.3f} vs {baseline:.3f} (5 seeds)")


@pytest.mark.slow
def test_single_step_beats_six_steps(verdict):
    one = mean_accuracy(DESK.with_(zo_grad_steps=1, tau=GRAD_STEP_TAU_PRESET[1]), 5)
    six = mean_accuracy(DESK.with_(zo_grad_steps=6, tau=GRAD_STEP_TAU_PRESET[6]), 5)
    verdict("7 one local zeroth-order step is at least as good as six", one >= six,
            f"{one:.3f} vs {six:.3f} (5 seeds)")


@pytest.mark.slow
def test_more_seeds_per_client_help(verdict):
    s1 = mean_accuracy(DESK.with_(seeds_per_client=1), 3)
    s3 = mean_accuracy(DESK.with_(seeds_per_client=3), 3)
    verdict("8 accuracy does not drop from S=1 to S=3", s3 >= s1, f"S=1 {s1:.3f}, S=3 {s3:.3f} (3 seeds)")


@pytest.mark.slow
def test_pivot_has_interior_maximum(verdict):
    means = {p: mean_accuracy(DESK.with_(pivot=p), 3) for p in (0, 25, 50, 100, 150)}
    interior = max((25, 50, 100), key=means.get)
    passed = means[interior] >= means[0] and means[interior] >= means[150]
    curve = ", ".join(f"{p}: {m:.3f}" for p, m in means.items())
    verdict("9 some interior pivot is at least as good as both endpoints", passed, f"{curve} (3 seeds)")


@pytest.mark.slow
def test_replay_is_byte_identical(verdict, tmp_path):
    configs = resources.files("zowarmup") / "configs"
    identical = []
    for name in ("smoke", "reference"):
        run = load_config(configs / f"{name}.cfg")
        run_to_directory(run, tmp_path / name / "a")
        run_to_directory(run, tmp_path / name / "b")
        identical.append((tmp_path / name / "a" / "metrics.jsonl").read_bytes()
                         == (tmp_path / name / "b" / "metrics.jsonl").read_bytes())
    verdict("10 replays produce byte-identical metrics files", all(identical),
            f"smoke and reference configs: {identical}")

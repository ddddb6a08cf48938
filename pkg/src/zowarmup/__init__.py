"""Two-phase federated training with first-order warm-up and seed-exchange zeroth-order updates."""

from . import costmodel, nn, zopt
from .data import Dataset, SyntheticDatasetSpec, generate_synthetic
from .errors import ConfigError, NumericError, ProtocolError, ZOWarmUpError
from .fed import ExperimentConfig, pivot_sweep, run_zowarmup
from .metrics import MetricsRecord
from .rng import SeedStream

__version__ = "0.1.0"

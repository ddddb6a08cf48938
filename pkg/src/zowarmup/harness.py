"""Run orchestration behind the command line: output files, sweeps and the learning-rate grid."""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import costmodel, nn
from .config import RunConfig
from .data import Dataset, generate_synthetic, read_binary
from .errors import ConfigError
from .fed.driver import (GRAD_STEP_TAU_PRESET, ExperimentConfig, RunResult, final_accuracies, run_zowarmup,
                         seed_configs, summarize)
from .metrics import append_jsonl, write_curve_csv
from .zopt import GAUSSIAN, RADEMACHER

OUTPUT_ENV = "ZOWARMUP_OUTPUT_DIR"
SWEEP_AXES = ("pivot", "S", "tau", "split", "grad_steps", "distribution")

# learning-rate grids searched by `grid`, per server optimizer
SGD_GRID = {
    "eta_s": (1.0, 0.5, 0.1),
    "eta_c_hi": (5e-1, 1e-1, 5e-2, 1e-2, 5e-3, 1e-3, 5e-4, 1e-4),
    "eta_s_zo": (0.5, 0.1, 0.05, 0.01),
    "eta_c_zo": (1e-1, 5e-2, 1e-2, 5e-3, 1e-3, 5e-4, 1e-4, 5e-5, 1e-5, 5e-6, 1e-6),
}
ADAM_GRID = {
    "eta_s": (5e-3, 1e-3, 5e-4, 1e-4, 5e-5, 1e-5, 5e-6, 1e-6),
    "eta_c_hi": (1e-1, 5e-2, 1e-2, 5e-3, 1e-3, 5e-4, 1e-4, 5e-5, 1e-5, 5e-6, 1e-6),
    "eta_s_zo": (5e-3, 1e-3, 5e-4, 1e-4, 5e-5, 1e-5, 5e-6, 1e-6),
    "eta_c_zo": (1e-1, 5e-2, 1e-2, 5e-3, 1e-3, 5e-4, 1e-4, 5e-5, 1e-5, 5e-6, 1e-6),
}


def output_dir(explicit=None, name="run") -> Path:
    if explicit:
        return Path(explicit)
    base = os.environ.get(OUTPUT_ENV)
    return Path(base) if base else Path("zowarmup-out") / name


def load_dataset(run: RunConfig) -> Dataset:
    if run.train_file is None and run.eval_file is None:
        return generate_synthetic(run.experiment.dataset_spec())
    if run.train_file is None or run.eval_file is None:
        raise ConfigError("train_file and eval_file must be given together",
                          field="eval_file" if run.eval_file is None else "train_file")
    train, train_classes = read_binary(run.train_file)
    held_out, eval_classes = read_binary(run.eval_file)
    if train.features.shape[1] != held_out.features.shape[1]:
        raise ConfigError("train and eval feature widths differ", field="eval_file")
    return Dataset(train, held_out, max(train_classes, eval_classes))


def zo_batch_size(result: RunResult, grad_steps: int) -> int:
    """Largest per-step ZO batch in the federation: a client's whole shard split over its steps."""
    largest = max((c.num_samples for c in result.clients), default=1)
    return max(1, math.ceil(largest / grad_steps))


def cost_summary(config: ExperimentConfig, dataset: Dataset, result: RunResult) -> dict:
    mlp = config.mlp_spec(dataset.train.features.shape[1], dataset.num_classes)
    participants = max((r.participants for r in result.metrics if r.phase == "zo"), default=config.num_clients)
    report = costmodel.comparison(nn.descriptor_of(mlp), config.warmup_batch_size,
                                  zo_batch_size(result, config.zo_grad_steps), config.seeds_per_client,
                                  participants)
    report["measured"] = {
        "uplink_bytes_total": sum(r.uplink_bytes for r in result.metrics),
        "downlink_bytes_total": sum(r.downlink_bytes for r in result.metrics),
        "rounds": len(result.metrics),
    }
    return report


def run_to_directory(run: RunConfig, out: Path) -> RunResult:
    """Execute one run, streaming metrics.jsonl and writing curve.csv, cost_report.json, final_weights.npy."""
    config = run.experiment
    dataset = load_dataset(run)
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.jsonl"
    metrics_path.write_bytes(b"")
    result = run_zowarmup(config, dataset, on_round=lambda record: append_jsonl(metrics_path, record))
    write_curve_csv(out / "curve.csv", result.metrics)
    (out / "cost_report.json").write_text(costmodel.dumps(cost_summary(config, dataset, result)) + "\n")
    np.save(out / "final_weights.npy", result.weights)
    return result


def parse_split(text: str) -> float:
    """``"10/90"`` (high/low percent) or a plain fraction -> high-resource fraction."""
    text = str(text).strip()
    if "/" in text:
        hi, lo = (float(p) for p in text.split("/", 1))
        if hi < 0 or lo < 0 or hi + lo <= 0:
            raise ConfigError(f"bad split {text!r}", field="split")
        return hi / (hi + lo)
    return float(text)


def axis_changes(axis: str, value: str) -> dict:
    """Config changes that set one sweep axis to ``value``."""
    try:
        if axis == "pivot":
            return {"pivot": int(value)}
        if axis == "S":
            return {"seeds_per_client": int(value)}
        if axis == "tau":
            return {"tau": float(value)}
        if axis == "split":
            return {"hi_fraction": parse_split(value)}
        if axis == "grad_steps":
            steps = int(value)
            changes = {"zo_grad_steps": steps}
            if steps in GRAD_STEP_TAU_PRESET:
                changes["tau"] = GRAD_STEP_TAU_PRESET[steps]
            return changes
        if axis == "distribution":
            name = str(value).lower()
            if name not in (GAUSSIAN, RADEMACHER):
                raise ValueError(value)
            return {"distribution": name}
    except ValueError:
        raise ConfigError(f"bad value {value!r} for axis {axis}", field=axis) from None
    raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}", field="axis")


@dataclass(frozen=True)
class SweepRow:
    value: str
    mean: float
    std: float
    accuracies: tuple[float, ...]


def sweep(config: ExperimentConfig, dataset: Dataset | None, axis: str, values: Sequence[str], seeds: int,
          jobs: int = 1) -> list[SweepRow]:
    """Cross product of ``values`` and ``seeds`` independent runs; one summary row per value."""
    if seeds < 1:
        raise ConfigError("must be at least 1", field="seeds")
    grid = [config.with_(**axis_changes(axis, v)) for v in values]
    runs = [c for point in grid for c in seed_configs(point, seeds)]
    accs = final_accuracies(runs, dataset, jobs)
    rows = []
    for i, value in enumerate(values):
        chunk = tuple(accs[i * seeds:(i + 1) * seeds])
        rows.append(SweepRow(str(value), *summarize(chunk), chunk))
    return rows


def write_sweep_csv(path, axis: str, rows: Sequence[SweepRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([axis, "mean_accuracy", "std_accuracy", "seeds", "accuracies"])
        for row in rows:
            writer.writerow([row.value, repr(row.mean), repr(row.std), len(row.accuracies),
                             " ".join(repr(a) for a in row.accuracies)])


def format_table(axis: str, rows: Sequence[SweepRow]) -> str:
    """Percent accuracy as ``mean(std)``, one line per swept value."""
    width = max([len(axis)] + [len(r.value) for r in rows])
    lines = [f"{axis:<{width}}  accuracy %"]
    lines += [f"{r.value:<{width}}  {100 * r.mean:.1f}({100 * r.std:.1f})" for r in rows]
    return "\n".join(lines)


def default_grid(config: ExperimentConfig, names: Sequence[str] | None = None) -> dict:
    table = ADAM_GRID if config.server_opt == "adam" else SGD_GRID
    names = list(table) if not names else list(names)
    unknown = [n for n in names if n not in table]
    if unknown:
        raise ConfigError(f"no grid for {unknown}; choose from {list(table)}", field="params")
    return {n: table[n] for n in names}


def grid_search(config: ExperimentConfig, dataset: Dataset | None, grid: dict, seeds: int = 1,
                jobs: int = 1) -> list[tuple[dict, float, float]]:
    """Every cell of the product grid, sorted best first by mean final accuracy."""
    names = list(grid)
    cells = [dict(zip(names, combo)) for combo in itertools.product(*(grid[n] for n in names))]
    runs = [c for cell in cells for c in seed_configs(config.with_(**cell), seeds)]
    accs = final_accuracies(runs, dataset, jobs, tolerate_divergence=True)
    scored = []
    for i, cell in enumerate(cells):
        mean, std = summarize(accs[i * seeds:(i + 1) * seeds])
        # diverged runs report nan accuracy; rank them last
        scored.append((cell, mean, std))
    scored.sort(key=lambda item: -item[1] if not math.isnan(item[1]) else math.inf)
    return scored


def write_grid_csv(path, scored) -> None:
    if not scored:
        return
    names = list(scored[0][0])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names + ["mean_accuracy", "std_accuracy"])
        for cell, mean, std in scored:
            writer.writerow([repr(cell[n]) for n in names] + [repr(mean), repr(std)])


def descriptor_from_json(data: dict) -> nn.ModelDescriptor:
    """``{"param_count", "layer_outputs"}``, ``{"mlp": [widths]}`` or ``{"resnet18": {kwargs}}``."""
    if not isinstance(data, dict):
        raise ConfigError("descriptor file must hold a JSON object")
    if "resnet18" in data:
        return costmodel.resnet18_descriptor(**(data["resnet18"] or {}))
    if "mlp" in data:
        return nn.descriptor_of(nn.MlpSpec(tuple(data["mlp"])))
    try:
        outputs = tuple(tuple(int(v) for v in triple) for triple in data["layer_outputs"])
        return nn.ModelDescriptor(int(data["param_count"]), outputs)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"descriptor needs param_count and layer_outputs ({exc})") from None


def load_descriptor(path) -> nn.ModelDescriptor:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"descriptor file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}", line=exc.lineno) from None
    return descriptor_from_json(data)

"""Flat ``key = value`` experiment configuration files.

One setting per line, ``#`` starts a comment, blank lines are ignored.
Tuples (``hidden_widths``) are comma separated. Keys other than the
:class:`ExperimentConfig` fields are the harness keys ``train_file`` and
``eval_file`` (binary datasets, paths relative to the config file).
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .fed.driver import ExperimentConfig

HARNESS_KEYS = ("train_file", "eval_file")
_TYPES = typing.get_type_hints(ExperimentConfig)


@dataclass(frozen=True)
class RunConfig:
    experiment: ExperimentConfig
    train_file: Path | None = None
    eval_file: Path | None = None
    source: Path | None = field(default=None, compare=False)


def _convert(key, raw, line):
    kind = _TYPES[key]
    try:
        if kind is bool:
            lowered = raw.lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return lowered in ("true", "1", "yes")
        if kind is int:
            value = float(raw)
            if not value.is_integer():
                raise ValueError(raw)
            return int(value)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        # tuple[int, ...]
        return tuple(int(part) for part in raw.split(",") if part.strip())
    except ValueError:
        name = getattr(kind, "__name__", str(kind))
        raise ConfigError(f"cannot read {raw!r} as {name}", field=key, line=line) from None


def parse_config(text: str, source: Path | None = None) -> RunConfig:
    values = {}
    harness = {}
    seen = {}
    for number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"expected 'key = value', got {content!r}", line=number)
        key, raw = (part.strip() for part in content.split("=", 1))
        if not key or not raw:
            raise ConfigError("empty key or value", field=key or None, line=number)
        if key in seen:
            raise ConfigError(f"duplicate setting (first on line {seen[key]})", field=key, line=number)
        seen[key] = number
        if key in HARNESS_KEYS:
            path = Path(raw)
            if source is not None and not path.is_absolute():
                path = source.parent / path
            harness[key] = path
        elif key in _TYPES:
            values[key] = _convert(key, raw, number)
        else:
            raise ConfigError("unknown setting", field=key, line=number)
    try:
        experiment = ExperimentConfig(**values)
    except ConfigError as exc:
        if exc.field in seen and exc.line is None:
            raise ConfigError(str(exc).split(": ", 1)[-1], field=exc.field, line=seen[exc.field]) from None
        raise
    for key, path in harness.items():
        if not path.is_file():
            raise ConfigError(f"file not found: {path}", field=key, line=seen[key])
    return RunConfig(experiment, harness.get("train_file"), harness.get("eval_file"), source)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, path)


def format_config(config: ExperimentConfig) -> str:
    """Serialise every field, in declaration order, in the same flat format."""
    lines = []
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            value = str(value).lower()
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"

"""Per-round metrics records and their JSON-lines / CSV serialisation."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, fields
from typing import Iterable

FIELDS = ("round_index", "phase", "eval_accuracy", "eval_loss", "uplink_bytes", "downlink_bytes",
          "participants", "wall_time_ms")


@dataclass(frozen=True)
class MetricsRecord:
    """State after one round. Byte counts are round totals over all clients.

    ``wall_time_ms`` is ``None`` unless wall-clock recording was requested,
    which keeps metrics files byte-identical across replays by default.
    """

    round_index: int
    phase: str
    eval_accuracy: float
    eval_loss: float
    uplink_bytes: int
    downlink_bytes: int
    participants: int
    wall_time_ms: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=False, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "MetricsRecord":
        data = json.loads(line)
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown metrics fields {sorted(unknown)}")
        return cls(**data)


def write_jsonl(path, records: Iterable[MetricsRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(record.to_json() + "\n")


def append_jsonl(path, record: MetricsRecord) -> None:
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        fh.write(record.to_json() + "\n")


def read_jsonl(path) -> list[MetricsRecord]:
    with open(path, encoding="utf-8") as fh:
        return [MetricsRecord.from_json(line) for line in fh if line.strip()]


def write_curve_csv(path, records: Iterable[MetricsRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["round_index", "phase", "eval_accuracy", "eval_loss"])
        for r in records:
            writer.writerow([r.round_index, r.phase, repr(r.eval_accuracy), repr(r.eval_loss)])

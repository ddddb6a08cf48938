import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from zowarmup.metrics import MetricsRecord, append_jsonl, read_jsonl, write_curve_csv, write_jsonl

records = st.builds(
    MetricsRecord,
    round_index=st.integers(0, 10**6),
    phase=st.sampled_from(["warmup", "zo"]),
    eval_accuracy=st.floats(0.0, 1.0),
    eval_loss=st.floats(0.0, 1e6),
    uplink_bytes=st.integers(0, 2**62),
    downlink_bytes=st.integers(0, 2**62),
    participants=st.integers(0, 10**4),
    wall_time_ms=st.none() | st.floats(0.0, 1e7),
)


@given(records)
def test_json_round_trip_is_lossless(record):
    assert MetricsRecord.from_json(record.to_json()) == record


def test_jsonl_append_and_read(tmp_path):
    path = tmp_path / "m.jsonl"
    first = [MetricsRecord(0, "warmup", 0.5, 1.25, 10, 10, 2)]
    write_jsonl(path, first)
    extra = MetricsRecord(1, "zo", 0.625, 1.0, 12, 24, 2, 3.5)
    append_jsonl(path, extra)
    assert read_jsonl(path) == first + [extra]
    assert path.read_text().count("\n") == 2


def test_unknown_fields_are_rejected():
    with pytest.raises(ValueError, match="unknown"):
        MetricsRecord.from_json('{"round_index":0,"phase":"zo","eval_accuracy":1,"eval_loss":0,'
                                '"uplink_bytes":0,"downlink_bytes":0,"participants":1,"extra":1}')


def test_curve_csv(tmp_path):
    path = tmp_path / "curve.csv"
    write_curve_csv(path, [MetricsRecord(0, "zo", 1 / 3, math.pi, 0, 0, 1)])
    header, row = path.read_text().splitlines()
    assert header == "round_index,phase,eval_accuracy,eval_loss"
    assert float(row.split(",")[2]) == 1 / 3

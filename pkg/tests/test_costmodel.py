import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zowarmup import costmodel
from zowarmup.costmodel import comm_full, comm_zo, mem_full, mem_zo, resnet18_descriptor
from zowarmup.errors import ConfigError
from zowarmup.nn import ModelDescriptor, MlpSpec, descriptor_of

MB = 1e6


def test_comm_full_examples():
    assert comm_full(1) == 4
    assert comm_full(101_770) == 407_080
    assert comm_full(11_175_000) / MB == pytest.approx(44.7, rel=0.02)
    with pytest.raises(ConfigError):
        comm_full(0)


def test_comm_zo_examples():
    assert comm_zo(3, direction="up") == 12
    assert comm_zo(3, direction="up") / MB == pytest.approx(1.2e-5)
    assert comm_zo(1, 1, "down") == 4
    assert comm_zo(3, 50, "down") == 600
    assert comm_zo(3, 50, "up", accounting="strict64") == 24
    assert comm_zo(3, 50, "down", accounting="strict64") == 2400
    with pytest.raises(ConfigError):
        comm_zo(3, 1, "sideways")


def test_zo_uplink_does_not_depend_on_model_size():
    assert len({costmodel.zero_order_report(ModelDescriptor(p, ((1, 1, 1),)), 1, 3, 10).uplink_bytes_per_client
                for p in (10, 10**4, 10**7)}) == 1


def test_mem_hand_counts():
    desc = descriptor_of(MlpSpec((2, 2)))
    assert mem_full(desc, 1) == 56
    assert mem_zo(desc, 1) == 56
    deep = ModelDescriptor(100, ((8, 2, 2), (3, 1, 1)))
    assert mem_full(deep, 2) - mem_full(deep, 1) == 4 * (32 + 3)
    assert mem_zo(deep, 5) == 4 * (200 + 5 * 32)


def test_resnet18_descriptor_counts():
    # parameter and activation totals cross-checked against forward hooks on torchvision's resnet18
    cifar = resnet18_descriptor(stem="cifar")
    assert cifar.param_count == 11_173_962
    assert sum(cifar.activation_sizes) == 1_786_378
    assert max(cifar.activation_sizes) == 64 * 32 * 32
    imagenet = resnet18_descriptor(stem="imagenet")
    assert imagenet.param_count == 11_181_642
    assert sum(imagenet.activation_sizes) == 153_098


@settings(max_examples=200, deadline=None)
@given(p=st.integers(1, 10**8), outs=st.lists(st.tuples(*[st.integers(1, 512)] * 3), min_size=1, max_size=30),
       bs=st.integers(1, 1024))
def test_mem_zo_never_exceeds_mem_full(p, outs, bs):
    desc = ModelDescriptor(p, tuple(outs))
    assert mem_zo(desc, bs) <= mem_full(desc, bs)
    if len(outs) == 1:
        assert mem_zo(desc, bs) == mem_full(desc, bs)


def test_report_shapes_and_json():
    desc = descriptor_of(MlpSpec((32, 64, 8)))
    report = costmodel.comparison(desc, 64, 64, 3, 20)
    assert report["zero_order"]["uplink_bytes_per_client"] == 12
    assert report["first_order"]["uplink_bytes_per_client"] == 4 * desc.param_count
    assert report["memory_ratio"] >= 1.0
    assert '"method": "zero_order"' in costmodel.dumps(report)
    with pytest.raises(ConfigError):
        costmodel.CostReport("second_order", 0, 1, 1, 1)

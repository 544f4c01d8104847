from __future__ import annotations

import pytest

from faultlab import (
    BitFlip,
    FaultInjector,
    HeadDropout,
    SeededRng,
    WeightCorruption,
    build_toy_model,
    parse_fault_spec,
)
from faultlab.errors import TargetingError


def fresh():
    model = build_toy_model(
        "causal_lm", n_layers=2, n_heads=2, d_model=16, d_ff=32,
        vocab_size=64, max_seq_len=32, n_classes=None, seed=9,
    )
    return model, FaultInjector(model)


def test_clean_at_start():
    _, injector = fresh()
    assert injector.verify_clean() is True
    assert injector.active_receipts == ()


def test_inject_and_revert_all_restores_cleanliness():
    model, injector = fresh()
    h0 = model.param_bytes_hash()
    injector.inject(BitFlip(severity=0.5), SeededRng(1).child("a"))
    injector.inject(HeadDropout(layer_idx=0, severity=1.0), SeededRng(1).child("b"))
    assert len(injector.active_receipts) == 2
    assert injector.verify_clean() is False
    injector.revert_all()
    assert injector.active_receipts == ()
    assert injector.verify_clean() is True
    assert model.param_bytes_hash() == h0


def test_revert_all_is_lifo():
    model, injector = fresh()
    order = []

    class Watcher:
        def __init__(self, tag):
            self.tag = tag

        def __call__(self, t):
            return t

    # two faults stacking weight noise on the same scope: reverting must
    # unwind in reverse order to land exactly on the original bytes
    h0 = model.param_bytes_hash()
    injector.inject(WeightCorruption(corruption_rate=1.0), SeededRng(2).child("x"))
    injector.inject(WeightCorruption(corruption_rate=1.0), SeededRng(3).child("y"))
    injector.revert_all()
    assert model.param_bytes_hash() == h0


def test_verify_clean_detects_param_drift():
    model, injector = fresh()
    model.params["wte"].data[0] += 1.0
    assert injector.verify_clean() is False


def test_verify_clean_detects_leftover_hook():
    model, injector = fresh()
    model.install_hook("layer_output", 0, lambda t: t)
    assert injector.verify_clean() is False


def test_failed_inject_leaves_model_clean():
    model, injector = fresh()
    with pytest.raises(TargetingError):
        injector.inject(
            parse_fault_spec("head_dropout(layer=99,severity=0.5)"),
            SeededRng(1).child("z"),
        )
    assert injector.verify_clean() is True
    assert injector.active_receipts == ()


def test_fault_ids_are_sequential():
    _, injector = fresh()
    a = injector.inject(BitFlip(severity=0.1), SeededRng(1).child("a"))
    b = injector.inject(BitFlip(severity=0.1, layer_scope=0), SeededRng(1).child("b"))
    assert b == a + 1
    injector.revert_all()

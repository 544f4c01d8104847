from __future__ import annotations

import sys

import pytest

from faultlab import (
    FaultInjector,
    Tokenizer,
    batch,
    build_margin_classifier,
    build_toy_model,
    make_margin_dataset,
)


@pytest.fixture(scope="session")
def tiny_classifier():
    """2-layer, d_model=16 random classifier (read-only across tests)."""
    return build_toy_model(
        "classifier", n_layers=2, n_heads=2, d_model=16, d_ff=32,
        vocab_size=258, max_seq_len=32, n_classes=2, seed=7,
    )


@pytest.fixture(scope="session")
def tiny_lm():
    """2-layer, d_model=16 random causal LM (read-only across tests)."""
    return build_toy_model(
        "causal_lm", n_layers=2, n_heads=2, d_model=16, d_ff=32,
        vocab_size=64, max_seq_len=32, n_classes=None, seed=9,
    )


@pytest.fixture()
def margin_model():
    """Fresh handcrafted wide-margin classifier (tests may mutate it)."""
    return build_margin_classifier()


@pytest.fixture()
def margin_injector(margin_model):
    return FaultInjector(margin_model)


@pytest.fixture(scope="session")
def byte_tokenizer():
    return Tokenizer.byte_level()


@pytest.fixture(scope="session")
def margin_batches(byte_tokenizer):
    dataset = make_margin_dataset(40, seed=3)
    return batch(dataset, 16, byte_tokenizer)


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance verdicts where capture cannot swallow them."""
    module = sys.modules.get("tests.test_acceptance")
    verdicts = getattr(module, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed in verdicts:
        terminalreporter.write_line(f"[acceptance] {name}: {'PASS' if passed else 'FAIL'}")

"""Small deterministic models and datasets for tests, demos, and `make-toy`.

Every builder is a pure function of its seed: parameter tensors are filled
from per-parameter RNG streams keyed by the parameter's canonical path, so
two models built with the same arguments are bitwise identical regardless
of construction order or platform.
"""

from __future__ import annotations

import json
import os

from .data import ClassificationDataset, ClassificationRecord
from .model import ModelConfig, TransformerModel, expected_param_shapes
from .rng import SeededRng
from .tensor import Tensor

__all__ = [
    "build_toy_model",
    "build_uniform_lm",
    "build_margin_classifier",
    "margin_label",
    "make_margin_dataset",
    "make_lm_lines",
    "write_classification_jsonl",
    "write_text_lines",
    "make_toy_files",
]


def _init_params(config: ModelConfig, seed: int, init_scale: float) -> dict[str, Tensor]:
    """Random parameters, one child stream per parameter path."""
    root = SeededRng(seed)
    params: dict[str, Tensor] = {}
    for path, shape in expected_param_shapes(config).items():
        size = 1
        for dim in shape:
            size *= dim
        rng = root.child(path)
        is_ln = path.endswith(("ln1.weight", "ln2.weight", "ln_f.weight"))
        if is_ln:
            tensor = rng.gaussian(size, mu=1.0, sigma=init_scale)
        else:
            tensor = rng.gaussian(size, mu=0.0, sigma=init_scale)
        params[path] = tensor.reshape(shape)
    return params


def build_toy_model(
    arch: str = "classifier",
    *,
    n_layers: int = 2,
    n_heads: int = 2,
    d_model: int = 16,
    d_ff: int = 32,
    vocab_size: int = 258,
    max_seq_len: int = 32,
    n_classes: int | None = 2,
    seed: int = 7,
    init_scale: float = 0.02,
) -> TransformerModel:
    """Random toy transformer; layer norms are initialized near identity."""
    config = ModelConfig(
        arch=arch,
        n_layers=n_layers,
        n_heads=n_heads,
        d_model=d_model,
        d_ff=d_ff,
        vocab_size=vocab_size,
        max_seq_len=max_seq_len,
        n_classes=n_classes if arch == "classifier" else None,
    )
    return TransformerModel(config, _init_params(config, seed, init_scale))


def build_uniform_lm(
    vocab_size: int = 256,
    *,
    n_layers: int = 1,
    n_heads: int = 2,
    d_model: int = 16,
    max_seq_len: int = 32,
    seed: int = 7,
) -> TransformerModel:
    """Causal LM whose output head is all zeros, so every next-token
    distribution is exactly uniform over the vocabulary."""
    config = ModelConfig(
        arch="causal_lm",
        n_layers=n_layers,
        n_heads=n_heads,
        d_model=d_model,
        d_ff=2 * d_model,
        vocab_size=vocab_size,
        max_seq_len=max_seq_len,
    )
    params = _init_params(config, seed, 0.02)
    params["lm_head.weight"] = Tensor.zeros((d_model, vocab_size))
    params["lm_head.bias"] = Tensor.zeros((vocab_size,))
    return TransformerModel(config, params)


#: Byte value at which the margin classifier's separating feature flips sign.
_MARGIN_SPLIT = ord("n")


def margin_label(text: str) -> int:
    """Ground-truth rule for the margin classifier: 1 when the first byte
    of the text is >= ``ord('n')``, else 0."""
    first = text.encode("utf-8")[0]
    return 1 if first >= _MARGIN_SPLIT else 0


def build_margin_classifier(
    seed: int = 11,
    *,
    n_layers: int = 2,
    d_model: int = 32,
    max_seq_len: int = 16,
) -> TransformerModel:
    """Handcrafted byte-level classifier with a wide decision margin.

    All block weights are zero, so the residual stream carries the first
    token's embedding straight to the head.  Embedding feature 0 is +0.5 or
    -0.5 following ``margin_label`` of the token's byte, the remaining
    features are noise, and the head reads feature 0 with weight ±1.5.  On
    any dataset labelled by ``margin_label`` the clean model scores 1.0.
    """
    vocab_size = 258  # byte-level tokenizer: pad, unk, then the 256 bytes
    config = ModelConfig(
        arch="classifier",
        n_layers=n_layers,
        n_heads=4,
        d_model=d_model,
        d_ff=2 * d_model,
        vocab_size=vocab_size,
        max_seq_len=max_seq_len,
        n_classes=2,
    )
    params: dict[str, Tensor] = {}
    for path, shape in expected_param_shapes(config).items():
        if path.endswith(("ln1.weight", "ln2.weight", "ln_f.weight")):
            params[path] = Tensor.full(shape, 1.0)
        else:
            params[path] = Tensor.zeros(shape)

    wte = SeededRng(seed).child("wte").gaussian(vocab_size * d_model, mu=0.0, sigma=0.4)
    wte = wte.reshape((vocab_size, d_model))
    for token_id in range(vocab_size):
        byte = token_id - 2  # ids 0/1 are pad/unk; give them the negative side
        wte.data[token_id * d_model] = 0.5 if byte >= _MARGIN_SPLIT else -0.5
    params["wte"] = wte

    head = Tensor.zeros((d_model, 2))
    head.data[0] = -1.5  # feature 0 -> class 0
    head.data[1] = 1.5  # feature 0 -> class 1
    params["cls_head.weight"] = head
    return TransformerModel(config, params)


_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def _random_word(rng: SeededRng) -> str:
    length = 3 + rng.randint_below(6)
    return "".join(_LETTERS[rng.randint_below(26)] for _ in range(length))


def make_margin_dataset(n: int, seed: int = 3) -> ClassificationDataset:
    """Random lowercase words labelled by ``margin_label``."""
    rng = SeededRng(seed).child("margin_data")
    records = []
    for _ in range(n):
        word = _random_word(rng)
        records.append(ClassificationRecord(text=word, label=margin_label(word)))
    return ClassificationDataset(records)


def make_lm_lines(n: int, seed: int = 5) -> list[str]:
    """Random multi-word lines for language-model evaluation fixtures."""
    rng = SeededRng(seed).child("lm_data")
    lines = []
    for _ in range(n):
        words = 3 + rng.randint_below(6)
        lines.append(" ".join(_random_word(rng) for _ in range(words)))
    return lines


def write_classification_jsonl(path: str, dataset: ClassificationDataset) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in dataset.records:
            fh.write(json.dumps({"text": record.text, "label": record.label}) + "\n")


def write_text_lines(path: str, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")


def make_toy_files(out_dir: str, task: str, seed: int = 7) -> dict[str, str]:
    """Write a ready-to-run toy checkpoint plus a matching dataset file.

    ``task`` is 'classify' (margin classifier + labelled words) or 'lm'
    (random causal LM + text lines).  Returns the written paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    if task == "classify":
        model = build_margin_classifier(seed=seed)
        ckpt = os.path.join(out_dir, "toy_classifier.ckpt")
        data = os.path.join(out_dir, "toy_classify.jsonl")
        model.save(ckpt)
        write_classification_jsonl(data, make_margin_dataset(200, seed=seed))
    elif task == "lm":
        model = build_toy_model(
            "causal_lm", n_layers=2, n_heads=2, d_model=16, d_ff=32,
            vocab_size=258, max_seq_len=64, n_classes=None, seed=seed,
        )
        ckpt = os.path.join(out_dir, "toy_lm.ckpt")
        data = os.path.join(out_dir, "toy_lm.txt")
        model.save(ckpt)
        write_text_lines(data, make_lm_lines(100, seed=seed))
    else:
        raise ValueError(f"task must be 'classify' or 'lm', got {task!r}")
    return {"checkpoint": ckpt, "dataset": data}

"""GPT-2 state-dict and config mapping to faultlab's canonical layout.

Name mapping (source names shown after stripping any ``transformer.``
prefix; ``{i}`` is the block index):

================================  ==================================
source                            target
================================  ==================================
``wte.weight``                    ``wte``
``wpe.weight``                    ``wpe``
``h.{i}.ln_1.{w,b}``              ``layers.{i}.ln1.{w,b}``
``h.{i}.attn.c_attn.{w,b}``       ``layers.{i}.attn.qkv.{w,b}``
``h.{i}.attn.c_proj.{w,b}``       ``layers.{i}.attn.proj.{w,b}``
``h.{i}.ln_2.{w,b}``              ``layers.{i}.ln2.{w,b}``
``h.{i}.mlp.c_fc.{w,b}``          ``layers.{i}.mlp.fc.{w,b}``
``h.{i}.mlp.c_proj.{w,b}``        ``layers.{i}.mlp.proj.{w,b}``
``ln_f.{w,b}``                    ``ln_f.{w,b}``
``lm_head.weight`` (or tied wte)  ``lm_head.weight`` (transposed)
================================  ==================================

GPT-2's Conv1D modules already store weights ``[in, out]``, which is the
target's plain-matmul layout, so block weights copy through untouched.
The only transpose is the LM head: the source ties it to the token
embedding, ``[vocab, d_model]``, while the target stores ``[d_model,
vocab]``.  GPT-2 has no LM-head bias, so one is synthesized as zeros.

The per-block causal-mask buffers ``h.{i}.attn.bias`` /
``h.{i}.attn.masked_bias`` carry no learned state and are skipped.
"""

from __future__ import annotations

import re

import numpy as np

from .errors import ConvertError

_SKIP = re.compile(r"^h\.\d+\.attn\.(bias|masked_bias)$")
_BLOCK_KEY = re.compile(r"^h\.(\d+)\.(.+)$")

_TOP_LEVEL = {
    "wte.weight": "wte",
    "wpe.weight": "wpe",
    "ln_f.weight": "ln_f.weight",
    "ln_f.bias": "ln_f.bias",
}

_BLOCK_SUFFIX = {
    "ln_1.weight": "ln1.weight",
    "ln_1.bias": "ln1.bias",
    "attn.c_attn.weight": "attn.qkv.weight",
    "attn.c_attn.bias": "attn.qkv.bias",
    "attn.c_proj.weight": "attn.proj.weight",
    "attn.c_proj.bias": "attn.proj.bias",
    "ln_2.weight": "ln2.weight",
    "ln_2.bias": "ln2.bias",
    "mlp.c_fc.weight": "mlp.fc.weight",
    "mlp.c_fc.bias": "mlp.fc.bias",
    "mlp.c_proj.weight": "mlp.proj.weight",
    "mlp.c_proj.bias": "mlp.proj.bias",
}

#: tanh-approximation GELU names; the target runtime computes exactly this
_SUPPORTED_ACTIVATIONS = ("gelu_new", "gelu_pytorch_tanh")


def map_config(source: dict) -> dict:
    """Translate a GPT-2 ``config.json`` dict into the target config block."""
    model_type = source.get("model_type")
    if model_type is not None and model_type != "gpt2":
        raise ConvertError(
            f"unsupported model_type {model_type!r}: only the gpt2 architecture converts"
        )
    missing = [k for k in ("n_layer", "n_head", "n_embd", "n_positions", "vocab_size") if k not in source]
    if missing:
        raise ConvertError(f"source config is missing required keys: {', '.join(missing)}")

    activation = source.get("activation_function", "gelu_new")
    if activation not in _SUPPORTED_ACTIVATIONS:
        raise ConvertError(
            f"unsupported activation_function {activation!r}: the target runtime computes"
            f" the tanh-approximation GELU ({' / '.join(_SUPPORTED_ACTIVATIONS)})"
        )
    if source.get("scale_attn_by_inverse_layer_idx"):
        raise ConvertError(
            "scale_attn_by_inverse_layer_idx=true changes attention math the target"
            " runtime does not implement"
        )

    n_inner = source.get("n_inner")
    return {
        "arch": "causal_lm",
        "n_layers": int(source["n_layer"]),
        "n_heads": int(source["n_head"]),
        "d_model": int(source["n_embd"]),
        "d_ff": int(n_inner) if n_inner is not None else 4 * int(source["n_embd"]),
        "vocab_size": int(source["vocab_size"]),
        "max_seq_len": int(source["n_positions"]),
        "layer_norm_eps": float(source.get("layer_norm_epsilon", 1e-5)),
    }


def target_shapes(config: dict) -> dict[str, tuple[int, ...]]:
    """Every canonical parameter path the config requires, with its shape."""
    d = config["d_model"]
    ff = config["d_ff"]
    vocab = config["vocab_size"]
    shapes: dict[str, tuple[int, ...]] = {
        "wte": (vocab, d),
        "wpe": (config["max_seq_len"], d),
        "ln_f.weight": (d,),
        "ln_f.bias": (d,),
        "lm_head.weight": (d, vocab),
        "lm_head.bias": (vocab,),
    }
    for i in range(config["n_layers"]):
        p = f"layers.{i}."
        shapes[p + "ln1.weight"] = (d,)
        shapes[p + "ln1.bias"] = (d,)
        shapes[p + "attn.qkv.weight"] = (d, 3 * d)
        shapes[p + "attn.qkv.bias"] = (3 * d,)
        shapes[p + "attn.proj.weight"] = (d, d)
        shapes[p + "attn.proj.bias"] = (d,)
        shapes[p + "ln2.weight"] = (d,)
        shapes[p + "ln2.bias"] = (d,)
        shapes[p + "mlp.fc.weight"] = (d, ff)
        shapes[p + "mlp.fc.bias"] = (ff,)
        shapes[p + "mlp.proj.weight"] = (ff, d)
        shapes[p + "mlp.proj.bias"] = (d,)
    return shapes


def plan_tensors(state: dict[str, np.ndarray], config: dict) -> tuple[dict[str, np.ndarray], list[str]]:
    """Map a source state dict onto canonical paths; returns (tensors, notes).

    Fails loudly: unknown source names, a missing canonical path, or a
    shape mismatch each abort the conversion — no partial checkpoints.
    """
    tensors: dict[str, np.ndarray] = {}
    notes: list[str] = []
    unmapped: list[str] = []

    def put(target: str, arr: np.ndarray, source_name: str) -> None:
        if target in tensors:
            raise ConvertError(f"{source_name!r} maps to {target!r}, which is already filled")
        tensors[target] = arr

    for name, arr in state.items():
        key = name.removeprefix("transformer.")
        if _SKIP.match(key):
            continue
        if key in _TOP_LEVEL:
            put(_TOP_LEVEL[key], arr, name)
            continue
        if key == "lm_head.weight":
            put("lm_head.weight", arr.T, name)
            continue
        if key == "lm_head.bias":
            put("lm_head.bias", arr, name)
            continue
        m = _BLOCK_KEY.match(key)
        if m and m.group(2) in _BLOCK_SUFFIX:
            put(f"layers.{m.group(1)}.{_BLOCK_SUFFIX[m.group(2)]}", arr, name)
            continue
        unmapped.append(name)

    if unmapped:
        raise ConvertError(
            "source tensors with no mapping rule: " + ", ".join(sorted(unmapped))
        )

    if "lm_head.weight" not in tensors:
        if "wte" not in tensors:
            raise ConvertError("source has neither lm_head.weight nor wte.weight to tie it to")
        tensors["lm_head.weight"] = tensors["wte"].T
        notes.append("lm_head.weight tied to the token embedding (transposed copy)")
    if "lm_head.bias" not in tensors:
        tensors["lm_head.bias"] = np.zeros(config["vocab_size"], dtype=np.float32)
        notes.append("lm_head.bias synthesized as zeros (source has none)")

    expected = target_shapes(config)
    missing = sorted(set(expected) - set(tensors))
    if missing:
        raise ConvertError("canonical paths missing from the source: " + ", ".join(missing))
    extra = sorted(set(tensors) - set(expected))
    if extra:
        raise ConvertError(
            "mapped tensors the config does not expect (block index beyond"
            f" n_layers={config['n_layers']}?): " + ", ".join(extra)
        )
    bad_shapes = [
        f"{name}: got {tuple(tensors[name].shape)}, want {expected[name]}"
        for name in sorted(expected)
        if tuple(tensors[name].shape) != expected[name]
    ]
    if bad_shapes:
        raise ConvertError("shape mismatch after mapping: " + "; ".join(bad_shapes))

    return tensors, notes

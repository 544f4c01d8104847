"""Deterministic transformer forward passes for two variants — causal
language model and sequence classifier — with named parameters and the hook
sites where faults attach.

Architecture: learned token + absolute position embeddings, pre-LN residual
blocks (x += Attn(LN1(x)); x += MLP(LN2(x))), tanh-approximation GELU, final
LayerNorm, then a linear head.  Attention masks are additive (0 for visible,
-1e9 for hidden).  The classifier pools the first token's hidden state.

Hook sites per layer index ``i``:

- ``mask``: transforms the additive [seq, seq] mask before it is added to
  attention scores (one call per example per layer).
- ``attn_scores``: transforms the stacked post-mask pre-softmax scores
  [n_heads, seq, seq] (one call per example per layer).
- ``attn_head_output``: transforms the stacked per-head context
  [n_heads, seq, d_head] before heads are concatenated.
- ``layer_output``: transforms the [rows, d_model] hidden state after the
  block's second residual.

At most one callback may occupy a site.  Callbacks receive a tensor and
must return a tensor of the same shape; they must not mutate their input
in place (the model may reuse it), but the model may mutate the returned
tensor.  Installing identity callbacks everywhere leaves forward outputs
bitwise unchanged: the staged computation runs identically with or without
hooks.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from array import array
from dataclasses import dataclass, field
from typing import Callable, Sequence

from . import checkpoint as checkpoint_io
from .backend import kernels
from .errors import (
    DimensionError,
    SequenceTooLongError,
    SnapshotMismatchError,
    SiteOccupiedError,
    StructureError,
    TargetingError,
    VocabRangeError,
)
from .tensor import Tensor

__all__ = [
    "ModelConfig",
    "TransformerModel",
    "HookHandle",
    "LayerHandle",
    "ParamSnapshot",
    "HOOK_SITES",
    "MASK_HIDDEN",
    "expected_param_shapes",
    "resolve_layers",
    "scoped_param_paths",
    "snapshot_params",
    "restore_params",
]

HOOK_SITES = ("layer_output", "attn_scores", "attn_head_output", "mask")

#: Additive mask value for a hidden (non-attendable) position.
MASK_HIDDEN = -1e9

_instance_tokens = itertools.count(1)


@dataclass(frozen=True)
class ModelConfig:
    """Architecture description shared by checkpoints and model construction."""

    arch: str
    n_layers: int
    n_heads: int
    d_model: int
    d_ff: int
    vocab_size: int
    max_seq_len: int
    n_classes: int | None = None
    layer_norm_eps: float = 1e-5

    def __post_init__(self):
        if self.arch not in ("causal_lm", "classifier"):
            raise StructureError(f"arch must be 'causal_lm' or 'classifier', got {self.arch!r}")
        for name in ("n_layers", "n_heads", "d_model", "d_ff", "vocab_size", "max_seq_len"):
            if getattr(self, name) < 1:
                raise StructureError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.d_model % self.n_heads != 0:
            raise StructureError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}"
            )
        if self.arch == "classifier":
            if self.n_classes is None or self.n_classes < 1:
                raise StructureError("classifier arch requires n_classes >= 1")
        if self.layer_norm_eps <= 0:
            raise StructureError("layer_norm_eps must be positive")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    def to_dict(self) -> dict:
        out = {
            "arch": self.arch,
            "n_layers": self.n_layers,
            "n_heads": self.n_heads,
            "d_model": self.d_model,
            "d_ff": self.d_ff,
            "vocab_size": self.vocab_size,
            "max_seq_len": self.max_seq_len,
            "layer_norm_eps": self.layer_norm_eps,
        }
        if self.n_classes is not None:
            out["n_classes"] = self.n_classes
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        try:
            return cls(
                arch=d["arch"],
                n_layers=int(d["n_layers"]),
                n_heads=int(d["n_heads"]),
                d_model=int(d["d_model"]),
                d_ff=int(d["d_ff"]),
                vocab_size=int(d["vocab_size"]),
                max_seq_len=int(d["max_seq_len"]),
                n_classes=int(d["n_classes"]) if d.get("n_classes") is not None else None,
                layer_norm_eps=float(d.get("layer_norm_eps", 1e-5)),
            )
        except KeyError as exc:
            raise StructureError(f"config missing required field {exc.args[0]!r}") from None


def expected_param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Canonical parameter paths and their shapes for a config.

    Weight matrices are stored [in, out]: y = x @ W + b.
    """
    d, dff = config.d_model, config.d_ff
    shapes: dict[str, tuple[int, ...]] = {
        "wte": (config.vocab_size, d),
        "wpe": (config.max_seq_len, d),
        "ln_f.weight": (d,),
        "ln_f.bias": (d,),
    }
    for i in range(config.n_layers):
        p = f"layers.{i}."
        shapes[p + "ln1.weight"] = (d,)
        shapes[p + "ln1.bias"] = (d,)
        shapes[p + "attn.qkv.weight"] = (d, 3 * d)
        shapes[p + "attn.qkv.bias"] = (3 * d,)
        shapes[p + "attn.proj.weight"] = (d, d)
        shapes[p + "attn.proj.bias"] = (d,)
        shapes[p + "ln2.weight"] = (d,)
        shapes[p + "ln2.bias"] = (d,)
        shapes[p + "mlp.fc.weight"] = (d, dff)
        shapes[p + "mlp.fc.bias"] = (dff,)
        shapes[p + "mlp.proj.weight"] = (dff, d)
        shapes[p + "mlp.proj.bias"] = (d,)
    if config.arch == "causal_lm":
        shapes["lm_head.weight"] = (d, config.vocab_size)
        shapes["lm_head.bias"] = (config.vocab_size,)
    else:
        shapes["cls_head.weight"] = (d, config.n_classes)
        shapes["cls_head.bias"] = (config.n_classes,)
    return shapes


@dataclass(frozen=True)
class HookHandle:
    site: str
    layer_idx: int
    token: int


@dataclass(frozen=True)
class LayerHandle:
    index: int
    param_paths: tuple[str, ...]


@dataclass
class ParamSnapshot:
    """Exact byte images of a set of parameter tensors."""

    scope: object
    shapes: dict[str, tuple[int, ...]] = field(default_factory=dict)
    blobs: dict[str, bytes] = field(default_factory=dict)


class TransformerModel:
    """Named parameter tree + config + hook registry."""

    def __init__(self, config: ModelConfig, params: dict[str, Tensor]):
        expected = expected_param_shapes(config)
        missing = sorted(set(expected) - set(params))
        extra = sorted(set(params) - set(expected))
        if missing or extra:
            parts = []
            if missing:
                parts.append(f"missing parameters: {', '.join(missing)}")
            if extra:
                parts.append(f"unexpected parameters: {', '.join(extra)}")
            raise StructureError("; ".join(parts))
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise StructureError(
                    f"parameter {name!r} has shape {params[name].shape}, expected {shape}"
                )
        self.config = config
        self.params = params
        self._hooks: dict[tuple[str, int], tuple[int, Callable[[Tensor], Tensor]]] = {}
        self._hook_tokens = itertools.count(1)
        self._mask_cache: dict[tuple, Tensor] = {}
        self.instance_token = next(_instance_tokens)

    # -- persistence ------------------------------------------------------

    @classmethod
    def from_checkpoint(cls, path: str) -> "TransformerModel":
        tensors, config = checkpoint_io.load_checkpoint(path)
        return cls(ModelConfig.from_dict(config), tensors)

    def save(self, path: str) -> None:
        checkpoint_io.save_checkpoint(self.params, self.config.to_dict(), path)

    # -- hooks -------------------------------------------------------------

    def install_hook(self, site: str, layer_idx: int, fn: Callable[[Tensor], Tensor]) -> HookHandle:
        if site not in HOOK_SITES:
            raise StructureError(f"unknown hook site {site!r}; valid sites: {HOOK_SITES}")
        if not 0 <= layer_idx < self.config.n_layers:
            raise TargetingError(
                f"layer index {layer_idx} out of range for {self.config.n_layers}-layer model"
            )
        key = (site, layer_idx)
        if key in self._hooks:
            raise SiteOccupiedError(f"hook site {site}({layer_idx}) already occupied")
        token = next(self._hook_tokens)
        self._hooks[key] = (token, fn)
        return HookHandle(site, layer_idx, token)

    def remove_hook(self, handle: HookHandle) -> None:
        key = (handle.site, handle.layer_idx)
        entry = self._hooks.get(key)
        if entry is None or entry[0] != handle.token:
            raise StructureError(f"hook {handle} is not installed")
        del self._hooks[key]

    def hook_count(self) -> int:
        return len(self._hooks)

    def _run_hook(self, site: str, layer_idx: int, t: Tensor) -> Tensor:
        entry = self._hooks.get((site, layer_idx))
        if entry is None:
            return t
        out = entry[1](t)
        if not isinstance(out, Tensor) or out.shape != t.shape:
            raise StructureError(
                f"hook at {site}({layer_idx}) must return a tensor of shape {t.shape}"
            )
        return out

    # -- forward -------------------------------------------------------------

    def _check_inputs(
        self, token_ids: Sequence[Sequence[int]], marks: Sequence[Sequence[int]] | None
    ) -> tuple[int, int]:
        if not token_ids:
            raise DimensionError("empty batch")
        seq = len(token_ids[0])
        if seq == 0:
            raise DimensionError("empty sequence")
        if seq > self.config.max_seq_len:
            raise SequenceTooLongError(
                f"sequence length {seq} exceeds max_seq_len {self.config.max_seq_len}"
            )
        for row in token_ids:
            if len(row) != seq:
                raise DimensionError("all sequences in a batch must share one length (pad first)")
            for tid in row:
                if not 0 <= tid < self.config.vocab_size:
                    raise VocabRangeError(
                        f"token id {tid} out of range for vocab_size {self.config.vocab_size}"
                    )
        if marks is not None:
            if len(marks) != len(token_ids) or any(len(m) != seq for m in marks):
                raise DimensionError("attention marks must match the token id batch shape")
        return len(token_ids), seq

    def _base_mask(self, seq: int, causal: bool, mark_row: tuple[int, ...] | None) -> Tensor:
        key = (seq, causal, mark_row)
        cached = self._mask_cache.get(key)
        if cached is not None:
            return cached
        vals = []
        for q in range(seq):
            for k in range(seq):
                hidden = (causal and k > q) or (mark_row is not None and not mark_row[k])
                vals.append(MASK_HIDDEN if hidden else 0.0)
        t = Tensor((seq, seq), array("f", vals))
        self._mask_cache[key] = t
        return t

    def _forward_hidden(
        self,
        token_ids: Sequence[Sequence[int]],
        marks: Sequence[Sequence[int]] | None,
        causal: bool,
    ) -> Tensor:
        """Run the block stack; returns post-final-LN hidden state [B*S, d]."""
        cfg = self.config
        batch, seq = self._check_inputs(token_ids, marks)
        d, n_heads, d_head = cfg.d_model, cfg.n_heads, cfg.d_head

        flat_ids = array("q", [tid for row in token_ids for tid in row])
        positions = array("q", [p for _ in range(batch) for p in range(seq)])
        x = Tensor(
            (batch * seq, d),
            kernels.embed_rows(self.params["wte"].data, self.params["wpe"].data, d, flat_ids, positions),
        )

        base_masks = [
            self._base_mask(seq, causal, tuple(marks[b]) if marks is not None else None)
            for b in range(batch)
        ]
        scale = 1.0 / math.sqrt(d_head)

        for i in range(cfg.n_layers):
            p = f"layers.{i}."
            h1 = Tensor(
                x.shape,
                kernels.layer_norm(
                    x.data, batch * seq, d,
                    self.params[p + "ln1.weight"].data,
                    self.params[p + "ln1.bias"].data,
                    cfg.layer_norm_eps,
                ),
            )
            qkv = kernels.mm(h1.data, self.params[p + "attn.qkv.weight"].data, batch * seq, d, 3 * d)
            kernels.add_rowvec_inplace(qkv, batch * seq, 3 * d, self.params[p + "attn.qkv.bias"].data)

            ctx = array("f", bytes(4 * batch * seq * d))
            for b in range(batch):
                mask_b = self._run_hook("mask", i, base_masks[b])
                if mask_b.shape != (seq, seq):
                    raise StructureError(
                        f"mask hook at layer {i} returned shape {mask_b.shape}, expected {(seq, seq)}"
                    )
                scores = array("f", bytes(4 * n_heads * seq * seq))
                for h in range(n_heads):
                    q_h = kernels.extract_cols(qkv, b * seq, seq, 3 * d, h * d_head, d_head)
                    k_h = kernels.extract_cols(qkv, b * seq, seq, 3 * d, d + h * d_head, d_head)
                    s_h = kernels.mm_nt(q_h, k_h, seq, d_head, seq, scale)
                    kernels.add_inplace(s_h, mask_b.data)
                    scores[h * seq * seq : (h + 1) * seq * seq] = s_h
                scores_t = self._run_hook("attn_scores", i, Tensor((n_heads, seq, seq), scores))
                kernels.softmax_rows(scores_t.data, n_heads * seq, seq)
                heads = array("f", bytes(4 * n_heads * seq * d_head))
                for h in range(n_heads):
                    probs_h = scores_t.data[h * seq * seq : (h + 1) * seq * seq]
                    v_h = kernels.extract_cols(qkv, b * seq, seq, 3 * d, 2 * d + h * d_head, d_head)
                    heads[h * seq * d_head : (h + 1) * seq * d_head] = kernels.mm(
                        probs_h, v_h, seq, seq, d_head
                    )
                heads_t = self._run_hook("attn_head_output", i, Tensor((n_heads, seq, d_head), heads))
                for h in range(n_heads):
                    kernels.write_cols(
                        ctx, b * seq, seq, d, h * d_head,
                        heads_t.data[h * seq * d_head : (h + 1) * seq * d_head], d_head,
                    )

            attn_out = kernels.mm(ctx, self.params[p + "attn.proj.weight"].data, batch * seq, d, d)
            kernels.add_rowvec_inplace(attn_out, batch * seq, d, self.params[p + "attn.proj.bias"].data)
            kernels.add_inplace(x.data, attn_out)

            h2 = kernels.layer_norm(
                x.data, batch * seq, d,
                self.params[p + "ln2.weight"].data,
                self.params[p + "ln2.bias"].data,
                cfg.layer_norm_eps,
            )
            ff = kernels.mm(h2, self.params[p + "mlp.fc.weight"].data, batch * seq, d, cfg.d_ff)
            kernels.add_rowvec_inplace(ff, batch * seq, cfg.d_ff, self.params[p + "mlp.fc.bias"].data)
            ff = kernels.gelu(ff)
            ff = kernels.mm(ff, self.params[p + "mlp.proj.weight"].data, batch * seq, cfg.d_ff, d)
            kernels.add_rowvec_inplace(ff, batch * seq, d, self.params[p + "mlp.proj.bias"].data)
            kernels.add_inplace(x.data, ff)

            x = self._run_hook("layer_output", i, x)

        hidden = kernels.layer_norm(
            x.data, batch * seq, d,
            self.params["ln_f.weight"].data,
            self.params["ln_f.bias"].data,
            cfg.layer_norm_eps,
        )
        return Tensor((batch * seq, d), hidden)

    def forward_logits(
        self,
        token_ids: Sequence[Sequence[int]],
        marks: Sequence[Sequence[int]] | None = None,
    ) -> Tensor:
        """Next-token logits [batch, seq, vocab] under the causal mask."""
        if self.config.arch != "causal_lm":
            raise StructureError(f"forward_logits requires arch=causal_lm, model is {self.config.arch}")
        batch, seq = len(token_ids), len(token_ids[0]) if token_ids else 0
        hidden = self._forward_hidden(token_ids, marks, causal=True)
        d, vocab = self.config.d_model, self.config.vocab_size
        logits = kernels.mm(hidden.data, self.params["lm_head.weight"].data, batch * seq, d, vocab)
        kernels.add_rowvec_inplace(logits, batch * seq, vocab, self.params["lm_head.bias"].data)
        return Tensor((batch, seq, vocab), logits)

    def forward_classify(
        self,
        token_ids: Sequence[Sequence[int]],
        marks: Sequence[Sequence[int]] | None = None,
    ) -> Tensor:
        """Class logits [batch, n_classes] from the first token's hidden state."""
        if self.config.arch != "classifier":
            raise StructureError(f"forward_classify requires arch=classifier, model is {self.config.arch}")
        batch = len(token_ids)
        seq = len(token_ids[0]) if token_ids else 0
        hidden = self._forward_hidden(token_ids, marks, causal=False)
        d, n_classes = self.config.d_model, self.config.n_classes
        pooled = array("f", bytes(4 * batch * d))
        for b in range(batch):
            pooled[b * d : (b + 1) * d] = hidden.data[b * seq * d : b * seq * d + d]
        logits = kernels.mm(pooled, self.params["cls_head.weight"].data, batch, d, n_classes)
        kernels.add_rowvec_inplace(logits, batch, n_classes, self.params["cls_head.bias"].data)
        return Tensor((batch, n_classes), logits)

    def greedy_generate(self, prompt_ids: Sequence[int], max_new_tokens: int) -> list[int]:
        """Greedy (temperature-0) continuation; argmax ties pick the lowest id."""
        ids = list(prompt_ids)
        for _ in range(max_new_tokens):
            if len(ids) >= self.config.max_seq_len:
                break
            logits = self.forward_logits([ids])
            vocab = self.config.vocab_size
            row = logits.data[(len(ids) - 1) * vocab : len(ids) * vocab]
            best, best_v = 0, row[0]
            for j in range(1, vocab):
                if row[j] > best_v:
                    best, best_v = j, row[j]
            ids.append(best)
        return ids

    # -- integrity ------------------------------------------------------------

    def param_bytes_hash(self) -> str:
        """SHA-256 over all parameter bytes in sorted canonical-path order."""
        h = hashlib.sha256()
        for name in sorted(self.params):
            h.update(name.encode("utf-8"))
            h.update(b"\0")
            h.update(self.params[name].data.tobytes())
        return h.hexdigest()

    def clone(self) -> "TransformerModel":
        """Independent deep copy of config + parameters (hooks not cloned)."""
        return TransformerModel(self.config, {k: v.copy() for k, v in self.params.items()})


def resolve_layers(model: TransformerModel) -> list[LayerHandle]:
    """Ordered per-block handles found by scanning canonical path prefixes."""
    by_index: dict[int, list[str]] = {}
    for name in model.params:
        if name.startswith("layers."):
            parts = name.split(".")
            try:
                idx = int(parts[1])
            except (IndexError, ValueError):
                raise StructureError(f"malformed layer parameter path {name!r}") from None
            by_index.setdefault(idx, []).append(name)
    expected = set(range(model.config.n_layers))
    missing = sorted(expected - set(by_index))
    if missing:
        raise StructureError(f"layer index {missing[0]} missing from parameter tree")
    unexpected = sorted(set(by_index) - expected)
    if unexpected:
        raise StructureError(f"unexpected layer index {unexpected[0]} in parameter tree")
    return [
        LayerHandle(index=i, param_paths=tuple(sorted(by_index[i])))
        for i in range(model.config.n_layers)
    ]


def scoped_param_paths(model: TransformerModel, scope) -> list[str]:
    """Parameter paths selected by a fault scope: 'all' or a layer index."""
    if scope == "all":
        paths = sorted(model.params)
    else:
        idx = int(scope)
        if not 0 <= idx < model.config.n_layers:
            raise TargetingError(
                f"layer index {idx} out of range for {model.config.n_layers}-layer model"
            )
        prefix = f"layers.{idx}."
        paths = sorted(p for p in model.params if p.startswith(prefix))
    if not paths:
        raise TargetingError(f"fault scope {scope!r} matched no parameters")
    return paths


def snapshot_params(model: TransformerModel, scope="all") -> ParamSnapshot:
    """Exact byte images of all tensors in scope."""
    snap = ParamSnapshot(scope=scope)
    for path in scoped_param_paths(model, scope):
        t = model.params[path]
        snap.shapes[path] = t.shape
        snap.blobs[path] = t.data.tobytes()
    return snap


def restore_params(model: TransformerModel, snap: ParamSnapshot) -> None:
    """Restore every snapshotted tensor to its exact prior bit pattern."""
    for path, shape in snap.shapes.items():
        t = model.params.get(path)
        if t is None or t.shape != shape:
            have = None if t is None else t.shape
            raise SnapshotMismatchError(
                f"snapshot tensor {path!r} with shape {shape} does not match model (has {have})"
            )
        if len(snap.blobs[path]) != 4 * t.size:
            raise SnapshotMismatchError(
                f"snapshot blob for {path!r} holds {len(snap.blobs[path])} bytes,"
                f" expected {4 * t.size}"
            )
    for path, blob in snap.blobs.items():
        buf = array("f")
        buf.frombytes(blob)
        model.params[path].data[:] = buf

"""Fault taxonomy: declarative specs, application procedures, exact-undo receipts.

Six variants, all reversible and all exact no-ops at severity/rate 0:

- ``BitFlip``: per scoped weight, with probability ``severity``, flip one
  uniformly chosen mantissa bit (binary32 positions 0-22); sign and exponent
  are never touched.
- ``WeightCorruption``: per scoped weight, with probability
  ``corruption_rate``, add N(0, sigma^2) noise; sigma is either a fixed value
  or each tensor's own standard deviation (``tensor_std``, the default, which
  keeps the rate comparable across layers of different magnitude).
- ``ActivationFault``: a layer-output hook; kinds ``zero`` (each feature
  channel zeroed with probability severity), ``noise`` (additive N(0, sigma^2)
  on each channel with probability severity), ``clamp`` (clip to ±bound·(1−severity);
  severity 0 installs no clipping).
- ``AttentionMaskFault``: a mask-site hook adding N(0, severity^2) noise to the
  additive attention mask; already-hidden entries are kept at or below -1e8, so
  corruption never unhides masked positions.
- ``HeadDropout``: an attention-head-output hook zeroing each head's context
  with probability severity.
- ``LayerFault``: inference-time dropout on a block's output — each feature
  channel zeroed with probability severity, survivors scaled by 1/(1−severity);
  severity 1 zeroes the whole output (no rescale).

Hook-based faults sample their random pattern once at apply time over the
feature/head dimension (a persistent fault, fixed for the trial), so repeated
forward passes see the same corruption.  Weight faults snapshot the scoped
tensors so ``revert`` restores them bit-exactly.
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass, field

from .backend import kernels
from .errors import (
    DoubleRevertError,
    ForeignReceiptError,
    InvalidSpecError,
    TargetingError,
)
from .model import (
    HookHandle,
    ParamSnapshot,
    TransformerModel,
    restore_params,
    scoped_param_paths,
    snapshot_params,
)
from .rng import SeededRng
from .tensor import Tensor

__all__ = [
    "BitFlip",
    "WeightCorruption",
    "ActivationFault",
    "AttentionMaskFault",
    "HeadDropout",
    "LayerFault",
    "FaultReceipt",
    "FAULT_VARIANTS",
    "apply_fault",
    "apply_bitflip",
    "apply_weight_corruption",
    "apply_activation_fault",
    "apply_attention_mask_fault",
    "apply_head_dropout",
    "apply_layer_fault",
    "revert",
]

#: Additive-mask values at or below this are treated as hidden positions.
_MASK_FLOOR = -1e8


def _fmt(x: float) -> str:
    return repr(float(x))


def _check_prob(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise InvalidSpecError(f"{name} must be in [0, 1], got {value}")


def _check_nonneg(name: str, value: float) -> None:
    if value < 0.0:
        raise InvalidSpecError(f"{name} must be >= 0, got {value}")


def _check_scope(scope) -> None:
    if scope == "all":
        return
    if isinstance(scope, bool) or not isinstance(scope, int) or scope < 0:
        raise InvalidSpecError(f"layer scope must be 'all' or a layer index, got {scope!r}")


def _check_layer_idx(idx) -> None:
    if isinstance(idx, bool) or not isinstance(idx, int) or idx < 0:
        raise InvalidSpecError(f"layer index must be a non-negative integer, got {idx!r}")


@dataclass(frozen=True)
class BitFlip:
    """Mantissa-only single-bit flips on scoped weights."""

    severity: float
    layer_scope: object = "all"

    name = "bitflip"

    def __post_init__(self):
        _check_prob("severity", self.severity)
        _check_scope(self.layer_scope)

    @property
    def layer(self):
        return self.layer_scope

    def canonical(self) -> str:
        return f"bitflip(layer={self.layer_scope},severity={_fmt(self.severity)})"


@dataclass(frozen=True)
class WeightCorruption:
    """Additive gaussian noise on scoped weights with probability corruption_rate."""

    corruption_rate: float
    layer_scope: object = "all"
    sigma_mode: object = "tensor_std"

    name = "weight_corruption"

    def __post_init__(self):
        _check_prob("corruption_rate", self.corruption_rate)
        _check_scope(self.layer_scope)
        if self.sigma_mode != "tensor_std":
            if not isinstance(self.sigma_mode, (int, float)) or isinstance(self.sigma_mode, bool):
                raise InvalidSpecError(
                    f"sigma_mode must be 'tensor_std' or a fixed sigma, got {self.sigma_mode!r}"
                )
            _check_nonneg("sigma", float(self.sigma_mode))
            object.__setattr__(self, "sigma_mode", float(self.sigma_mode))

    @property
    def layer(self):
        return self.layer_scope

    def canonical(self) -> str:
        sigma = "tensor_std" if self.sigma_mode == "tensor_std" else _fmt(self.sigma_mode)
        return (
            f"weight_corruption(layer={self.layer_scope},"
            f"rate={_fmt(self.corruption_rate)},sigma={sigma})"
        )


@dataclass(frozen=True)
class ActivationFault:
    """Layer-output corruption: kind is 'zero', 'noise', or 'clamp'."""

    layer_idx: int
    kind: str
    severity: float
    sigma: float | None = None
    bound: float | None = None

    name = "activation"

    def __post_init__(self):
        _check_layer_idx(self.layer_idx)
        _check_prob("severity", self.severity)
        if self.kind not in ("zero", "noise", "clamp"):
            raise InvalidSpecError(f"activation kind must be zero|noise|clamp, got {self.kind!r}")
        if self.kind == "noise":
            if self.sigma is None:
                raise InvalidSpecError("activation kind=noise requires sigma")
            _check_nonneg("sigma", self.sigma)
            if self.bound is not None:
                raise InvalidSpecError("bound is only valid for kind=clamp")
        elif self.kind == "clamp":
            if self.bound is None or self.bound <= 0:
                raise InvalidSpecError("activation kind=clamp requires bound > 0")
            if self.sigma is not None:
                raise InvalidSpecError("sigma is only valid for kind=noise")
        else:
            if self.sigma is not None or self.bound is not None:
                raise InvalidSpecError("kind=zero takes no sigma/bound parameters")

    @property
    def layer(self):
        return self.layer_idx

    def canonical(self) -> str:
        base = f"activation(layer={self.layer_idx},kind={self.kind},severity={_fmt(self.severity)}"
        if self.kind == "noise":
            base += f",sigma={_fmt(self.sigma)}"
        elif self.kind == "clamp":
            base += f",bound={_fmt(self.bound)}"
        return base + ")"


@dataclass(frozen=True)
class AttentionMaskFault:
    """Gaussian noise (sigma = severity) on a layer's additive attention mask."""

    layer_idx: int
    severity: float

    name = "mask_noise"

    def __post_init__(self):
        _check_layer_idx(self.layer_idx)
        _check_nonneg("severity", self.severity)

    @property
    def layer(self):
        return self.layer_idx

    def canonical(self) -> str:
        return f"mask_noise(layer={self.layer_idx},severity={_fmt(self.severity)})"


@dataclass(frozen=True)
class HeadDropout:
    """Zero each attention head's context with probability severity."""

    layer_idx: int
    severity: float

    name = "head_dropout"

    def __post_init__(self):
        _check_layer_idx(self.layer_idx)
        _check_prob("severity", self.severity)

    @property
    def layer(self):
        return self.layer_idx

    def canonical(self) -> str:
        return f"head_dropout(layer={self.layer_idx},severity={_fmt(self.severity)})"


@dataclass(frozen=True)
class LayerFault:
    """Inference-time dropout on a block's output (inverted-dropout rescale)."""

    layer_idx: int
    severity: float

    name = "layer_dropout"

    def __post_init__(self):
        _check_layer_idx(self.layer_idx)
        _check_prob("severity", self.severity)

    @property
    def layer(self):
        return self.layer_idx

    def canonical(self) -> str:
        return f"layer_dropout(layer={self.layer_idx},severity={_fmt(self.severity)})"


FAULT_VARIANTS = (
    BitFlip,
    WeightCorruption,
    ActivationFault,
    AttentionMaskFault,
    HeadDropout,
    LayerFault,
)


@dataclass
class FaultReceipt:
    """Exact-undo record for one applied fault.

    ``count`` is the number of affected elements; its unit is
    variant-specific (weights modified, feature channels selected, heads
    dropped, or mask entries perturbed — the latter grows lazily as mask
    shapes are first seen).
    """

    fault_id: str
    rng_label: str
    model_token: int
    snapshot: ParamSnapshot | None = None
    hook_handles: list[HookHandle] = field(default_factory=list)
    count: int = 0
    consumed: bool = False


def _identity_hook(t: Tensor) -> Tensor:
    return t


def _new_receipt(spec, model: TransformerModel, rng: SeededRng) -> FaultReceipt:
    return FaultReceipt(
        fault_id=spec.canonical(),
        rng_label=f"seed={rng.seed}",
        model_token=model.instance_token,
    )


def _check_hook_layer(model: TransformerModel, layer_idx: int) -> None:
    if not 0 <= layer_idx < model.config.n_layers:
        raise TargetingError(
            f"layer index {layer_idx} out of range for {model.config.n_layers}-layer model"
        )


def apply_bitflip(model: TransformerModel, spec: BitFlip, rng: SeededRng) -> FaultReceipt:
    """Flip one random mantissa bit per selected weight across the scope."""
    paths = scoped_param_paths(model, spec.layer_scope)
    receipt = _new_receipt(spec, model, rng)
    receipt.snapshot = snapshot_params(model, spec.layer_scope)
    if spec.severity > 0.0:
        for path in paths:
            receipt.count += rng.bitflip_mantissa_array(model.params[path].data, spec.severity)
    return receipt


def apply_weight_corruption(
    model: TransformerModel, spec: WeightCorruption, rng: SeededRng
) -> FaultReceipt:
    """Add gaussian noise to selected weights across the scope."""
    paths = scoped_param_paths(model, spec.layer_scope)
    receipt = _new_receipt(spec, model, rng)
    receipt.snapshot = snapshot_params(model, spec.layer_scope)
    if spec.corruption_rate > 0.0:
        for path in paths:
            data = model.params[path].data
            sigma = (
                kernels.tensor_std(data)
                if spec.sigma_mode == "tensor_std"
                else float(spec.sigma_mode)
            )
            if sigma == 0.0:
                continue  # zero noise is an exact no-op; skip to keep bits identical
            receipt.count += rng.corrupt_gaussian_array(data, spec.corruption_rate, sigma)
    return receipt


def _feature_selection(rng: SeededRng, d: int, probability: float) -> tuple[array, int]:
    sel = array("b", bytes(d))
    count = 0
    for j in range(d):
        if rng.uniform() < probability:
            sel[j] = 1
            count += 1
    return sel, count


def _checked_cols(t: Tensor, d: int, site: str) -> int:
    if not t.shape or t.shape[-1] != d:
        raise TargetingError(
            f"{site} hook expected last dimension {d}, got tensor shape {t.shape}"
        )
    return t.size // d


def apply_activation_fault(
    model: TransformerModel, spec: ActivationFault, rng: SeededRng
) -> FaultReceipt:
    """Install a layer-output hook for zero / noise / clamp corruption."""
    _check_hook_layer(model, spec.layer_idx)
    receipt = _new_receipt(spec, model, rng)
    d = model.config.d_model

    if spec.severity == 0.0 or (spec.kind == "noise" and spec.sigma == 0.0):
        hook = _identity_hook
    elif spec.kind == "zero":
        sel, receipt.count = _feature_selection(rng, d, spec.severity)

        def hook(t: Tensor) -> Tensor:
            rows = _checked_cols(t, d, "layer_output")
            out = t.copy()
            kernels.zero_cols_inplace(out.data, rows, d, sel)
            return out

    elif spec.kind == "noise":
        sel, receipt.count = _feature_selection(rng, d, spec.severity)
        noise = array("f", bytes(4 * d))
        draws = rng.gaussian(receipt.count, 0.0, spec.sigma)
        k = 0
        for j in range(d):
            if sel[j]:
                noise[j] = draws.data[k]
                k += 1

        def hook(t: Tensor) -> Tensor:
            rows = _checked_cols(t, d, "layer_output")
            out = t.copy()
            kernels.add_rowvec_sel_inplace(out.data, rows, d, noise, sel)
            return out

    else:  # clamp
        bound = spec.bound * (1.0 - spec.severity)

        def hook(t: Tensor) -> Tensor:
            out = t.copy()
            kernels.clip_inplace(out.data, -bound, bound)
            return out

        receipt.count = 0  # affected count depends on activations, not the pattern

    receipt.hook_handles.append(model.install_hook("layer_output", spec.layer_idx, hook))
    return receipt


def apply_attention_mask_fault(
    model: TransformerModel, spec: AttentionMaskFault, rng: SeededRng
) -> FaultReceipt:
    """Install a mask-site hook adding static gaussian noise to the mask."""
    _check_hook_layer(model, spec.layer_idx)
    receipt = _new_receipt(spec, model, rng)

    if spec.severity == 0.0:
        hook = _identity_hook
    else:
        noise_rng = rng.child("mask_noise")
        noise_by_shape: dict[tuple[int, ...], Tensor] = {}
        transformed: dict[tuple, Tensor] = {}

        def hook(mask_t: Tensor) -> Tensor:
            tkey = (mask_t.shape, mask_t.data.tobytes())
            out = transformed.get(tkey)
            if out is not None:
                return out
            noise = noise_by_shape.get(mask_t.shape)
            if noise is None:
                noise = noise_rng.gaussian(mask_t.size, 0.0, spec.severity)
                noise_by_shape[mask_t.shape] = noise
                receipt.count += mask_t.size
            out = mask_t.copy()
            kernels.add_inplace(out.data, noise.data)
            for i, orig in enumerate(mask_t.data):
                if orig <= _MASK_FLOOR and out.data[i] > _MASK_FLOOR:
                    out.data[i] = _MASK_FLOOR
            transformed[tkey] = out
            return out

    receipt.hook_handles.append(model.install_hook("mask", spec.layer_idx, hook))
    return receipt


def apply_head_dropout(model: TransformerModel, spec: HeadDropout, rng: SeededRng) -> FaultReceipt:
    """Install a head-output hook zeroing a fixed random subset of heads."""
    _check_hook_layer(model, spec.layer_idx)
    receipt = _new_receipt(spec, model, rng)
    n_heads = model.config.n_heads

    if spec.severity == 0.0:
        hook = _identity_hook
    else:
        dropped = [rng.uniform() < spec.severity for _ in range(n_heads)]
        receipt.count = sum(dropped)
        if receipt.count == 0:
            hook = _identity_hook
        else:

            def hook(t: Tensor) -> Tensor:
                if t.ndim != 3 or t.shape[0] != n_heads:
                    raise TargetingError(
                        f"attn_head_output hook expected [{n_heads}, seq, d_head], got {t.shape}"
                    )
                per_head = t.shape[1] * t.shape[2]
                out = t.copy()
                for h in range(n_heads):
                    if dropped[h]:
                        out.data[h * per_head : (h + 1) * per_head] = array(
                            "f", bytes(4 * per_head)
                        )
                return out

    receipt.hook_handles.append(model.install_hook("attn_head_output", spec.layer_idx, hook))
    return receipt


def apply_layer_fault(model: TransformerModel, spec: LayerFault, rng: SeededRng) -> FaultReceipt:
    """Install a layer-output hook applying inference-time dropout."""
    _check_hook_layer(model, spec.layer_idx)
    receipt = _new_receipt(spec, model, rng)
    d = model.config.d_model

    if spec.severity == 0.0:
        hook = _identity_hook
    elif spec.severity == 1.0:
        receipt.count = d

        def hook(t: Tensor) -> Tensor:
            return Tensor(t.shape)  # all zeros, no rescale

    else:
        sel, receipt.count = _feature_selection(rng, d, spec.severity)
        scale = 1.0 / (1.0 - spec.severity)
        weights = array("f", [0.0 if sel[j] else scale for j in range(d)])

        def hook(t: Tensor) -> Tensor:
            rows = _checked_cols(t, d, "layer_output")
            out = t.copy()
            kernels.mul_rowvec_inplace(out.data, rows, d, weights)
            return out

    receipt.hook_handles.append(model.install_hook("layer_output", spec.layer_idx, hook))
    return receipt


_APPLY = {
    BitFlip: apply_bitflip,
    WeightCorruption: apply_weight_corruption,
    ActivationFault: apply_activation_fault,
    AttentionMaskFault: apply_attention_mask_fault,
    HeadDropout: apply_head_dropout,
    LayerFault: apply_layer_fault,
}


def apply_fault(model: TransformerModel, spec, rng: SeededRng) -> FaultReceipt:
    """Dispatch a spec to its apply operation; the model is untouched on error."""
    fn = _APPLY.get(type(spec))
    if fn is None:
        raise InvalidSpecError(f"unknown fault spec type {type(spec).__name__}")
    return fn(model, spec, rng)


def revert(model: TransformerModel, receipt: FaultReceipt) -> None:
    """Undo one applied fault: remove its hooks, restore its weight bytes."""
    if receipt.consumed:
        raise DoubleRevertError(f"receipt for {receipt.fault_id} already reverted")
    if receipt.model_token != model.instance_token:
        raise ForeignReceiptError(
            f"receipt for {receipt.fault_id} belongs to a different model instance"
        )
    for handle in reversed(receipt.hook_handles):
        model.remove_hook(handle)
    if receipt.snapshot is not None:
        restore_params(model, receipt.snapshot)
    receipt.consumed = True

"""Canonical text form for fault specs: ``name(key=value,...)``.

Grammar (documented in ``docs/fault_grammar.md``)::

    spec   := name "(" [ pair ("," pair)* ] ")"
    pair   := key "=" value
    name   := ident
    key    := ident
    value  := number | ident
    ident  := [A-Za-z_][A-Za-z0-9_]*
    number := optional sign, digits, optional fraction/exponent

Whitespace is allowed between tokens.  Keys may appear in any order; the
canonical printed form (``spec.canonical()``) uses a fixed order and
round-trips: ``parse_fault_spec(spec.canonical()) == spec``.
"""

from __future__ import annotations

import re

from .errors import SpecParseError
from .faults import (
    ActivationFault,
    AttentionMaskFault,
    BitFlip,
    HeadDropout,
    LayerFault,
    WeightCorruption,
)

__all__ = ["parse_fault_spec", "format_fault_spec", "GRAMMAR_HELP"]

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<number>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
    r"|(?P<punct>[(),=]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            bad = text[pos:].strip().split()[0]
            raise SpecParseError(f"unexpected token {bad!r} at position {pos} in {text!r}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self, kind: str, value: str | None = None):
        tok = self.peek()
        if tok is None:
            raise SpecParseError(f"unexpected end of spec in {self.text!r}")
        if tok[0] != kind or (value is not None and tok[1] != value):
            raise SpecParseError(
                f"unexpected token {tok[1]!r} at position {tok[2]} in {self.text!r}"
            )
        self.i += 1
        return tok

    def parse(self) -> tuple[str, dict[str, tuple[str, str]]]:
        name = self.take("ident")[1]
        self.take("punct", "(")
        pairs: dict[str, tuple[str, str]] = {}
        tok = self.peek()
        if tok is not None and tok[1] == ")":
            self.take("punct", ")")
        else:
            while True:
                key = self.take("ident")[1]
                self.take("punct", "=")
                vtok = self.peek()
                if vtok is None or vtok[0] not in ("ident", "number"):
                    bad = "end of spec" if vtok is None else repr(vtok[1])
                    raise SpecParseError(f"expected a value after {key!r}=, got {bad} in {self.text!r}")
                self.i += 1
                if key in pairs:
                    raise SpecParseError(f"duplicate key {key!r} in {self.text!r}")
                pairs[key] = (vtok[0], vtok[1])
                tok = self.take("punct")
                if tok[1] == ")":
                    break
                if tok[1] != ",":
                    raise SpecParseError(
                        f"unexpected token {tok[1]!r} at position {tok[2]} in {self.text!r}"
                    )
        if self.peek() is not None:
            tok = self.peek()
            raise SpecParseError(
                f"unexpected token {tok[1]!r} after spec in {self.text!r}"
            )
        return name, pairs


def _pop_layer_scope(name: str, pairs: dict, text: str):
    if "layer" not in pairs:
        return "all"
    kind, raw = pairs.pop("layer")
    if kind == "ident":
        if raw == "all":
            return "all"
        raise SpecParseError(f"layer must be an integer or 'all', got {raw!r} in {text!r}")
    if "." in raw or "e" in raw or "E" in raw or raw.startswith(("-", "+")):
        raise SpecParseError(f"layer must be an integer or 'all', got {raw!r} in {text!r}")
    return int(raw)


def _pop_layer_idx(pairs: dict, text: str) -> int:
    if "layer" not in pairs:
        raise SpecParseError(f"missing required key 'layer' in {text!r}")
    kind, raw = pairs.pop("layer")
    if kind != "number" or "." in raw or "e" in raw or "E" in raw or raw.startswith(("-", "+")):
        raise SpecParseError(f"layer must be a non-negative integer, got {raw!r} in {text!r}")
    return int(raw)


def _pop_float(pairs: dict, key: str, text: str) -> float:
    if key not in pairs:
        raise SpecParseError(f"missing required key {key!r} in {text!r}")
    kind, raw = pairs.pop(key)
    if kind != "number":
        raise SpecParseError(f"{key} must be a number, got {raw!r} in {text!r}")
    return float(raw)


def _reject_leftovers(name: str, pairs: dict, text: str) -> None:
    if pairs:
        key = sorted(pairs)[0]
        raise SpecParseError(f"unknown key {key!r} for fault {name!r} in {text!r}")


def parse_fault_spec(text: str):
    """Parse the canonical text form into a fault spec value."""
    name, pairs = _Parser(text).parse()

    if name == "bitflip":
        scope = _pop_layer_scope(name, pairs, text)
        severity = _pop_float(pairs, "severity", text)
        _reject_leftovers(name, pairs, text)
        return BitFlip(layer_scope=scope, severity=severity)

    if name == "weight_corruption":
        scope = _pop_layer_scope(name, pairs, text)
        rate = _pop_float(pairs, "rate", text)
        sigma_mode: object = "tensor_std"
        if "sigma" in pairs:
            kind, raw = pairs.pop("sigma")
            if kind == "ident":
                if raw != "tensor_std":
                    raise SpecParseError(
                        f"sigma must be 'tensor_std' or a number, got {raw!r} in {text!r}"
                    )
            else:
                sigma_mode = float(raw)
        _reject_leftovers(name, pairs, text)
        return WeightCorruption(layer_scope=scope, corruption_rate=rate, sigma_mode=sigma_mode)

    if name == "activation":
        layer = _pop_layer_idx(pairs, text)
        if "kind" not in pairs:
            raise SpecParseError(f"missing required key 'kind' in {text!r}")
        kkind, kraw = pairs.pop("kind")
        if kkind != "ident" or kraw not in ("zero", "noise", "clamp"):
            raise SpecParseError(f"kind must be zero|noise|clamp, got {kraw!r} in {text!r}")
        severity = _pop_float(pairs, "severity", text)
        sigma = _pop_float(pairs, "sigma", text) if kraw == "noise" else None
        bound = _pop_float(pairs, "bound", text) if kraw == "clamp" else None
        _reject_leftovers(name, pairs, text)
        return ActivationFault(layer_idx=layer, kind=kraw, severity=severity, sigma=sigma, bound=bound)

    if name == "mask_noise":
        layer = _pop_layer_idx(pairs, text)
        severity = _pop_float(pairs, "severity", text)
        _reject_leftovers(name, pairs, text)
        return AttentionMaskFault(layer_idx=layer, severity=severity)

    if name == "head_dropout":
        layer = _pop_layer_idx(pairs, text)
        severity = _pop_float(pairs, "severity", text)
        _reject_leftovers(name, pairs, text)
        return HeadDropout(layer_idx=layer, severity=severity)

    if name == "layer_dropout":
        layer = _pop_layer_idx(pairs, text)
        severity = _pop_float(pairs, "severity", text)
        _reject_leftovers(name, pairs, text)
        return LayerFault(layer_idx=layer, severity=severity)

    raise SpecParseError(f"unknown fault variant {name!r} in {text!r}")


def format_fault_spec(spec) -> str:
    """The canonical text form (same as ``spec.canonical()``)."""
    return spec.canonical()


GRAMMAR_HELP = """\
Fault spec grammar: name(key=value,...)

bitflip(layer=all|N,severity=P)
    With probability P per scoped weight, flip one uniformly chosen
    mantissa bit (binary32 bits 0-22). Sign/exponent never change.
    severity=0 is an exact no-op.

weight_corruption(layer=all|N,rate=P,sigma=tensor_std|S)
    With probability P per scoped weight, add N(0, sigma^2) noise.
    sigma=tensor_std (default) uses each tensor's own std. rate=0 or
    sigma=0 is an exact no-op.

activation(layer=N,kind=zero,severity=P)
activation(layer=N,kind=noise,severity=P,sigma=S)
activation(layer=N,kind=clamp,severity=P,bound=B)
    Layer-output corruption. zero: each feature channel zeroed with
    probability P. noise: additive N(0, S^2) on channels selected with
    probability P. clamp: clip activations to +/- B*(1-P). severity=0
    is an exact no-op.

mask_noise(layer=N,severity=S)
    Add N(0, S^2) noise to the additive attention mask; already-hidden
    entries stay hidden (never unmasked). severity=0 is an exact no-op.

head_dropout(layer=N,severity=P)
    Zero each attention head's context with probability P (pattern fixed
    per trial). severity=0 is an exact no-op; severity=1 zeroes all heads.

layer_dropout(layer=N,severity=P)
    Inference-time dropout on the block output: each feature channel
    zeroed with probability P, survivors scaled by 1/(1-P); severity=1
    zeroes the output entirely (no rescale). severity=0 is an exact no-op.
"""

"""Named-tensor checkpoint container.

On-disk layout (documented byte-exactly in ``docs/checkpoint_format.md``;
this is the wire contract consumed and produced by external converters):

1. 8 magic bytes ``FLTLAB01``
2. 8-byte little-endian unsigned header length ``H``
3. ``H`` bytes of UTF-8 JSON: ``{"version": 1, "config": {...},
   "tensors": {name: {"dtype": "f32", "shape": [...], "offset": o,
   "length": l}}}``
4. raw payload: little-endian IEEE-754 binary32 tensor data

Saves are canonical: tensors are laid out contiguously in sorted-name
order and the header JSON uses sorted keys and no whitespace, so saving
the same map twice produces byte-identical files.
"""

from __future__ import annotations

import json
import os
import sys
from array import array
from dataclasses import dataclass, field
from typing import Any

from .errors import (
    BadMagicError,
    CheckpointError,
    HeaderError,
    OverlappingTensorsError,
    ShapeLengthMismatchError,
    TruncatedPayloadError,
    UnknownDtypeError,
)
from .tensor import Tensor

__all__ = ["MAGIC", "save_checkpoint", "load_checkpoint", "validate", "ValidationReport"]

MAGIC = b"FLTLAB01"
_DTYPE = "f32"
_ITEMSIZE = 4


def _prod(dims) -> int:
    p = 1
    for d in dims:
        p *= d
    return p


def _canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_checkpoint(tensors: dict[str, Tensor], config: dict, path: str) -> None:
    """Write a checkpoint that round-trips bit-exactly through load_checkpoint."""
    table: dict[str, dict] = {}
    offset = 0
    names = sorted(tensors)
    for name in names:
        t = tensors[name]
        length = _ITEMSIZE * t.size
        table[name] = {
            "dtype": _DTYPE,
            "shape": list(t.shape),
            "offset": offset,
            "length": length,
        }
        offset += length
    header = _canonical_json({"version": 1, "config": config, "tensors": table})
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        for name in names:
            data = tensors[name].data
            if sys.byteorder == "big":  # on-disk format is little-endian
                data = array("f", data)
                data.byteswap()
            fh.write(data.tobytes())


def _read_header(fh) -> tuple[dict, int]:
    """Parse magic + header; returns (header dict, payload start offset)."""
    magic = fh.read(len(MAGIC))
    if magic != MAGIC:
        raise BadMagicError(
            f"not a checkpoint file: expected magic {MAGIC!r}, got {magic!r}"
        )
    raw_len = fh.read(8)
    if len(raw_len) != 8:
        raise HeaderError("file ends before the 8-byte header length")
    header_len = int.from_bytes(raw_len, "little")
    raw_header = fh.read(header_len)
    if len(raw_header) != header_len:
        raise HeaderError(
            f"header declared {header_len} bytes but file holds {len(raw_header)}"
        )

    def reject_duplicates(pairs):
        seen = set()
        for key, _ in pairs:
            if key in seen:
                raise HeaderError(f"duplicate key in header: {key!r}")
            seen.add(key)
        return dict(pairs)

    try:
        header = json.loads(raw_header.decode("utf-8"), object_pairs_hook=reject_duplicates)
    except HeaderError:
        raise
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise HeaderError(f"header is not valid UTF-8 JSON: {exc}") from exc
    if not isinstance(header, dict):
        raise HeaderError("header must be a JSON object")
    if header.get("version") != 1:
        raise HeaderError(f"unsupported checkpoint version {header.get('version')!r}")
    if not isinstance(header.get("config"), dict):
        raise HeaderError("header must carry a 'config' object")
    if not isinstance(header.get("tensors"), dict):
        raise HeaderError("header must carry a 'tensors' table")
    return header, len(MAGIC) + 8 + header_len


def _check_entry(name: str, entry: Any) -> tuple[tuple[int, ...], int, int]:
    """Validate one tensor-table entry; returns (shape, offset, length)."""
    if not name or any(not part for part in name.split(".")):
        raise HeaderError(f"tensor name {name!r} is not a nonempty dot-separated path")
    if not isinstance(entry, dict):
        raise HeaderError(f"tensor entry for {name!r} must be an object")
    dtype = entry.get("dtype")
    if dtype != _DTYPE:
        raise UnknownDtypeError(f"tensor {name!r} has unsupported dtype {dtype!r}")
    shape = entry.get("shape")
    if not isinstance(shape, list) or any(
        not isinstance(d, int) or d < 0 for d in shape
    ):
        raise HeaderError(f"tensor {name!r} has invalid shape {shape!r}")
    offset, length = entry.get("offset"), entry.get("length")
    if not isinstance(offset, int) or not isinstance(length, int) or offset < 0 or length < 0:
        raise HeaderError(f"tensor {name!r} has invalid offset/length")
    expected = _ITEMSIZE * _prod(shape)
    if length != expected:
        raise ShapeLengthMismatchError(
            f"tensor {name!r}: shape {shape} implies {expected} bytes, header claims {length}"
        )
    return tuple(shape), offset, length


def _check_overlaps(spans: list[tuple[int, int, str]]) -> None:
    live = sorted(s for s in spans if s[1] > s[0])  # zero-length never overlaps
    max_end, max_name = -1, ""
    for start, end, name in live:
        if start < max_end:
            raise OverlappingTensorsError(
                f"tensors {max_name!r} and {name!r} overlap in the payload"
            )
        if end > max_end:
            max_end, max_name = end, name


def load_checkpoint(path: str) -> tuple[dict[str, Tensor], dict]:
    """Load (tensor map, config) with exact bit patterns from the payload."""
    with open(path, "rb") as fh:
        header, payload_start = _read_header(fh)
        payload_size = os.fstat(fh.fileno()).st_size - payload_start
        spans = []
        entries: dict[str, tuple[tuple[int, ...], int, int]] = {}
        for name, entry in header["tensors"].items():
            shape, offset, length = _check_entry(name, entry)
            if offset + length > payload_size:
                raise TruncatedPayloadError(
                    f"tensor {name!r} needs payload bytes [{offset}, {offset + length})"
                    f" but only {payload_size} are present"
                )
            entries[name] = (shape, offset, length)
            spans.append((offset, offset + length, name))
        _check_overlaps(spans)
        tensors: dict[str, Tensor] = {}
        for name, (shape, offset, length) in entries.items():
            fh.seek(payload_start + offset)
            raw = fh.read(length)
            if len(raw) != length:
                raise TruncatedPayloadError(f"payload truncated while reading {name!r}")
            buf = array("f")
            buf.frombytes(raw)
            if sys.byteorder == "big":
                buf.byteswap()
            tensors[name] = Tensor(shape, buf)
    return tensors, header["config"]


@dataclass
class ValidationReport:
    """Findings from a non-destructive structural check of a checkpoint file."""

    path: str
    findings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings


def validate(path: str) -> ValidationReport:
    """List every header inconsistency without materializing tensors."""
    report = ValidationReport(path=path)
    try:
        with open(path, "rb") as fh:
            header, payload_start = _read_header(fh)
            payload_size = os.fstat(fh.fileno()).st_size - payload_start
    except OSError as exc:
        report.findings.append(f"unreadable: {exc}")
        return report
    except CheckpointError as exc:
        report.findings.append(str(exc))
        return report
    spans = []
    for name, entry in header["tensors"].items():
        try:
            _, offset, length = _check_entry(name, entry)
        except CheckpointError as exc:
            report.findings.append(str(exc))
            # still check geometry when the offsets are readable, so one bad
            # dtype does not mask an overlap
            if not isinstance(entry, dict):
                continue
            offset, length = entry.get("offset"), entry.get("length")
            if (
                not isinstance(offset, int)
                or not isinstance(length, int)
                or offset < 0
                or length < 0
            ):
                continue
        if offset + length > payload_size:
            report.findings.append(
                f"tensor {name!r} extends past end of payload"
                f" ({offset + length} > {payload_size})"
            )
        spans.append((offset, offset + length, name))
    try:
        _check_overlaps(spans)
    except OverlappingTensorsError as exc:
        report.findings.append(str(exc))
    return report

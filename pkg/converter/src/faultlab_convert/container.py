"""Writer for the FLTLAB01 checkpoint container.

Implemented from the documented wire format (faultlab repo,
``docs/checkpoint_format.md``), not from faultlab's own writer, and
emits the canonical form byte for byte:

- magic ``b"FLTLAB01"``, then an 8-byte little-endian header length,
  then a UTF-8 JSON header, then a packed little-endian float32 payload
- header = ``{"version": 1, "config": {...}, "tensors": {...}}`` with
  sorted keys and no whitespace
- tensors laid out contiguously in sorted-name order; each table entry
  holds ``dtype`` ("f32"), ``shape``, and ``offset``/``length`` relative
  to the payload start
"""

from __future__ import annotations

import json

import numpy as np

from .errors import ConvertError

MAGIC = b"FLTLAB01"
_ITEMSIZE = 4


def write_checkpoint(tensors: dict[str, np.ndarray], config: dict, path: str) -> None:
    """Write a canonical checkpoint file; tensors are cast to float32."""
    for name in tensors:
        if not name or any(not part for part in name.split(".")):
            raise ConvertError(f"tensor name {name!r} is not a nonempty dot-separated path")

    names = sorted(tensors)
    arrays: dict[str, np.ndarray] = {}
    table: dict[str, dict] = {}
    offset = 0
    for name in names:
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        length = _ITEMSIZE * arr.size
        arrays[name] = arr
        table[name] = {
            "dtype": "f32",
            "shape": list(arr.shape),
            "offset": offset,
            "length": length,
        }
        offset += length

    header = json.dumps(
        {"version": 1, "config": config, "tensors": table},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")

    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        for name in names:
            fh.write(arrays[name].tobytes())

"""Kernel backend selection.

Two interchangeable kernel modules exist: a compiled extension
(``faultlab._kernels_c``) and a pure-Python fallback
(``faultlab._kernels_py``).  Both perform identical floating-point
operations in identical order, so results are bit-for-bit equal on the
same platform; the compiled one is just faster.

Selection happens once at import time, controlled by the
``FAULTLAB_BACKEND`` environment variable:

- ``auto`` (default): compiled if importable, else pure Python
- ``c``: compiled, raising if unavailable
- ``py``: pure Python unconditionally
"""

from __future__ import annotations

import os

from .errors import FaultlabError


class BackendError(FaultlabError):
    """Requested kernel backend is unavailable or unknown."""


def _select():
    choice = os.environ.get("FAULTLAB_BACKEND", "auto").strip().lower()
    if choice not in ("auto", "c", "py"):
        raise BackendError(
            f"FAULTLAB_BACKEND must be 'auto', 'c' or 'py', got {choice!r}"
        )
    if choice == "py":
        from . import _kernels_py

        return _kernels_py
    try:
        from . import _kernels_c  # type: ignore[attr-defined]

        return _kernels_c
    except ImportError:
        if choice == "c":
            raise BackendError(
                "compiled kernel backend requested via FAULTLAB_BACKEND=c "
                "but faultlab._kernels_c is not importable (build the "
                "extension or use FAULTLAB_BACKEND=py)"
            ) from None
        from . import _kernels_py

        return _kernels_py


kernels = _select()

#: Name of the active backend: "c" or "python".
BACKEND_NAME: str = kernels.BACKEND_NAME

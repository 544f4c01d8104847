"""Dense row-major binary32 tensors and the math ops used by the model.

Values are stored flat in an ``array('f')`` (IEEE-754 binary32), shapes are
tuples.  All arithmetic delegates to the selected kernel backend, which
accumulates in binary64 and stores binary32, so results are bit-identical
across backends.
"""

from __future__ import annotations

from array import array
from typing import Iterable, Sequence

from .backend import kernels
from .errors import DimensionError

__all__ = ["Tensor", "matmul", "matmul_nt", "softmax_lastdim", "layer_norm", "gelu"]


def _prod(dims: Sequence[int]) -> int:
    p = 1
    for d in dims:
        p *= d
    return p


class Tensor:
    """A shape plus a flat row-major ``array('f')`` buffer."""

    __slots__ = ("shape", "data")

    def __init__(self, shape: Sequence[int], data: array | Iterable[float] | None = None):
        shape = tuple(int(d) for d in shape)
        if any(d < 0 for d in shape):
            raise DimensionError(f"negative dimension in shape {shape}")
        n = _prod(shape)
        if data is None:
            buf = array("f", bytes(4 * n))
        elif isinstance(data, array) and data.typecode == "f":
            buf = data
        else:
            buf = array("f", data)
        if len(buf) != n:
            raise DimensionError(
                f"shape {shape} implies {n} elements, got {len(buf)}"
            )
        self.shape = shape
        self.data = buf

    # -- constructors ---------------------------------------------------

    @classmethod
    def zeros(cls, shape: Sequence[int]) -> "Tensor":
        return cls(shape)

    @classmethod
    def full(cls, shape: Sequence[int], value: float) -> "Tensor":
        n = _prod(tuple(shape))
        return cls(shape, array("f", [value] * n))

    @classmethod
    def from_nested(cls, nested) -> "Tensor":
        """Build from a (possibly nested) list of numbers."""
        shape: list[int] = []
        probe = nested
        while isinstance(probe, (list, tuple)):
            shape.append(len(probe))
            probe = probe[0] if probe else 0.0
        flat: list[float] = []

        def walk(node, depth):
            if depth == len(shape):
                flat.append(float(node))
                return
            if len(node) != shape[depth]:
                raise DimensionError("ragged nested list")
            for item in node:
                walk(item, depth + 1)

        walk(nested, 0)
        return cls(shape, array("f", flat))

    # -- basics ---------------------------------------------------------

    @property
    def size(self) -> int:
        return len(self.data)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    def copy(self) -> "Tensor":
        return Tensor(self.shape, array("f", self.data))

    def reshape(self, shape: Sequence[int]) -> "Tensor":
        """A new view-copy with the same elements and a different shape."""
        shape = tuple(int(d) for d in shape)
        if _prod(shape) != self.size:
            raise DimensionError(f"cannot reshape {self.shape} to {shape}")
        return Tensor(shape, array("f", self.data))

    def item(self) -> float:
        if self.size != 1:
            raise DimensionError(f"item() on tensor of size {self.size}")
        return self.data[0]

    def tolist(self):
        """Nested lists mirroring the shape."""

        def build(dim: int, off: int, stride: int):
            if dim == len(self.shape):
                return self.data[off]
            n = self.shape[dim]
            inner = stride // n
            return [build(dim + 1, off + i * inner, inner) for i in range(n)]

        return build(0, 0, self.size) if self.shape else self.data[0]

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Tensor)
            and self.shape == other.shape
            and self.data.tobytes() == other.data.tobytes()
        )

    def __hash__(self):  # pragma: no cover - tensors are mutable
        return NotImplemented


def _last_dim(x: Tensor) -> int:
    if not x.shape:
        raise DimensionError("operation requires at least one dimension")
    return x.shape[-1]


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-D matrix product c[i][j] = sum_t a[i][t] * b[t][j]."""
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul needs 2-D tensors, got {a.shape} and {b.shape}")
    m, k = a.shape
    k2, n = b.shape
    if k != k2:
        raise DimensionError(f"inner dimensions differ: {a.shape} @ {b.shape}")
    return Tensor((m, n), kernels.mm(a.data, b.data, m, k, n))


def matmul_nt(a: Tensor, b: Tensor, scale: float = 1.0) -> Tensor:
    """c = (a @ b^T) * scale for 2-D a[m,k], b[n,k]."""
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul_nt needs 2-D tensors, got {a.shape} and {b.shape}")
    m, k = a.shape
    n, k2 = b.shape
    if k != k2:
        raise DimensionError(f"inner dimensions differ: {a.shape} @ {b.shape}^T")
    return Tensor((m, n), kernels.mm_nt(a.data, b.data, m, k, n, scale))


def softmax_lastdim(x: Tensor) -> Tensor:
    """Stabilized softmax over the last dimension.

    Each slice becomes exp(x - max) normalized to sum 1; a slice that is
    entirely -inf becomes uniform.
    """
    cols = _last_dim(x)
    if cols < 1:
        raise DimensionError("softmax over an empty last dimension")
    out = x.copy()
    kernels.softmax_rows(out.data, out.size // cols, cols)
    return out


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float) -> Tensor:
    """Per-slice (x - mean) / sqrt(pop_var + eps) * gamma + beta."""
    cols = _last_dim(x)
    if gamma.shape != (cols,) or beta.shape != (cols,):
        raise DimensionError(
            f"gamma/beta shapes {gamma.shape}/{beta.shape} do not match last dim {cols}"
        )
    data = kernels.layer_norm(x.data, x.size // cols, cols, gamma.data, beta.data, eps)
    return Tensor(x.shape, data)


def gelu(x: Tensor) -> Tensor:
    """Elementwise tanh-approximation GELU: 0.5x(1+tanh(sqrt(2/pi)(x+0.044715x^3)))."""
    return Tensor(x.shape, kernels.gelu(x.data))

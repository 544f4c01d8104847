"""Pure-Python kernel backend.

Mirror of ``faultlab._kernels_c``: every kernel here performs the same
floating-point operations in the same order as the compiled version
(accumulate in binary64, store binary32), so the two backends produce
bit-identical results on the same platform.  Keep the two files in sync —
any change to one must be ported to the other.

All dense buffers are ``array('f')`` (IEEE-754 binary32, native layout);
random state is a 64-bit unsigned integer threaded through explicitly.
"""

from __future__ import annotations

import math
import struct
from array import array

BACKEND_NAME = "python"

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV_2_53 = 2.0 ** -53
_TWO_PI = 2.0 * math.pi
_GELU_C = math.sqrt(2.0 / math.pi)


def _f32(n):
    return array("f", bytes(4 * n))


# --- RNG core (splitmix64) ---------------------------------------------------

def splitmix64_next(state):
    """One step of splitmix64. Returns (output, new_state)."""
    state = (state + _GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31), state


def mix64(x):
    """splitmix64 output function applied once to x (stream derivation)."""
    out, _ = splitmix64_next(x & _MASK64)
    return out


def fill_gaussian(state, out, mu, sigma):
    """Fill `out` with N(mu, sigma^2) draws via Box-Muller pairs.

    Each pair consumes exactly two raw u64s; an odd tail discards the sine
    half. Returns the new state.
    """
    n = len(out)
    i = 0
    while i < n:
        z1, state = splitmix64_next(state)
        z2, state = splitmix64_next(state)
        u1 = ((z1 >> 11) + 1) * _INV_2_53  # (0, 1]
        u2 = (z2 >> 11) * _INV_2_53        # [0, 1)
        r = math.sqrt(-2.0 * math.log(u1))
        t = _TWO_PI * u2
        out[i] = mu + sigma * (r * math.cos(t))
        i += 1
        if i < n:
            out[i] = mu + sigma * (r * math.sin(t))
            i += 1
    return state


# --- dense math --------------------------------------------------------------

def mm(a, b, m, k, n):
    """c[m,n] = a[m,k] @ b[k,n]; per-cell accumulation in t-ascending order."""
    out = _f32(m * n)
    row = [0.0] * n
    for i in range(m):
        for j in range(n):
            row[j] = 0.0
        abase = i * k
        for t in range(k):
            av = a[abase + t]
            bbase = t * n
            for j in range(n):
                row[j] += av * b[bbase + j]
        obase = i * n
        for j in range(n):
            out[obase + j] = row[j]
    return out


def mm_nt(a, b, m, k, n, scale):
    """c[m,n] = (a[m,k] @ b[n,k]^T) * scale."""
    out = _f32(m * n)
    for i in range(m):
        abase = i * k
        obase = i * n
        for j in range(n):
            bbase = j * k
            acc = 0.0
            for t in range(k):
                acc += a[abase + t] * b[bbase + t]
            out[obase + j] = acc * scale
    return out


def softmax_rows(x, rows, cols):
    """Row-wise stabilized softmax, in place. An all -inf row becomes
    uniform; NaNs propagate."""
    es = [0.0] * cols
    for r in range(rows):
        base = r * cols
        mx = x[base]
        for j in range(1, cols):
            v = x[base + j]
            if v > mx:
                mx = v
        if mx == float("-inf"):
            u = 1.0 / cols
            for j in range(cols):
                x[base + j] = u
            continue
        s = 0.0
        for j in range(cols):
            e = math.exp(x[base + j] - mx)
            es[j] = e
            s += e
        inv = 1.0 / s
        for j in range(cols):
            x[base + j] = es[j] * inv
    return x


def layer_norm(x, rows, cols, gamma, beta, eps):
    """Per-row (x - mean) / sqrt(pop_var + eps) * gamma + beta."""
    out = _f32(rows * cols)
    for r in range(rows):
        base = r * cols
        s = 0.0
        for j in range(cols):
            s += x[base + j]
        mean = s / cols
        v = 0.0
        for j in range(cols):
            d = x[base + j] - mean
            v += d * d
        inv = 1.0 / math.sqrt(v / cols + eps)
        for j in range(cols):
            out[base + j] = (x[base + j] - mean) * inv * gamma[j] + beta[j]
    return out


def gelu(x):
    """Elementwise tanh-approximation GELU."""
    n = len(x)
    out = _f32(n)
    for i in range(n):
        v = x[i]
        out[i] = 0.5 * v * (1.0 + math.tanh(_GELU_C * (v + 0.044715 * (v * v * v))))
    return out


def add_inplace(x, y):
    for i in range(len(x)):
        x[i] = x[i] + y[i]
    return x


def add_rowvec_inplace(x, rows, cols, vec):
    for r in range(rows):
        base = r * cols
        for j in range(cols):
            x[base + j] = x[base + j] + vec[j]
    return x


def mul_rowvec_inplace(x, rows, cols, vec):
    for r in range(rows):
        base = r * cols
        for j in range(cols):
            x[base + j] = x[base + j] * vec[j]
    return x


def add_rowvec_sel_inplace(x, rows, cols, vec, sel):
    """x[:, j] += vec[j] only where sel[j]; unselected columns untouched
    (bit-exact identity there)."""
    for r in range(rows):
        base = r * cols
        for j in range(cols):
            if sel[j]:
                x[base + j] = x[base + j] + vec[j]
    return x


def zero_cols_inplace(x, rows, cols, sel):
    """x[:, j] = 0 where sel[j]; unselected columns untouched."""
    for r in range(rows):
        base = r * cols
        for j in range(cols):
            if sel[j]:
                x[base + j] = 0.0
    return x


def clip_inplace(x, lo, hi):
    """Clamp to [lo, hi]; NaNs pass through untouched."""
    for i in range(len(x)):
        v = x[i]
        if v < lo:
            x[i] = lo
        elif v > hi:
            x[i] = hi
    return x


def extract_cols(src, row_off, rows, row_stride, col_off, ncols):
    """Copy src[row_off : row_off+rows, col_off : col_off+ncols] (row-major
    with the given stride) into a fresh [rows, ncols] buffer."""
    out = _f32(rows * ncols)
    for r in range(rows):
        sbase = (row_off + r) * row_stride + col_off
        out[r * ncols:(r + 1) * ncols] = src[sbase:sbase + ncols]
    return out


def write_cols(dst, row_off, rows, row_stride, col_off, src, ncols):
    """Inverse of extract_cols: scatter src[rows, ncols] into dst columns."""
    for r in range(rows):
        dbase = (row_off + r) * row_stride + col_off
        dst[dbase:dbase + ncols] = src[r * ncols:(r + 1) * ncols]
    return dst


def embed_rows(wte, wpe, d, ids, positions):
    """out[r] = wte[ids[r]] + wpe[positions[r]], row by row."""
    n = len(ids)
    out = _f32(n * d)
    for r in range(n):
        tbase = ids[r] * d
        pbase = positions[r] * d
        obase = r * d
        for j in range(d):
            out[obase + j] = wte[tbase + j] + wpe[pbase + j]
    return out


def tensor_std(x):
    """Population standard deviation, two-pass in binary64."""
    n = len(x)
    if n == 0:
        return 0.0
    s = 0.0
    for i in range(n):
        s += x[i]
    mean = s / n
    v = 0.0
    for i in range(n):
        d = x[i] - mean
        v += d * d
    return math.sqrt(v / n)


# --- fault kernels -----------------------------------------------------------

def corrupt_gaussian(data, state, rate, sigma):
    """Each element independently, with probability `rate`, gets additive
    N(0, sigma^2) noise. One u64 per element for the Bernoulli draw, plus a
    Box-Muller pair (cosine half used) per corrupted element.
    Returns (count, new_state).
    """
    count = 0
    for i in range(len(data)):
        z, state = splitmix64_next(state)
        if (z >> 11) * _INV_2_53 < rate:
            z1, state = splitmix64_next(state)
            z2, state = splitmix64_next(state)
            u1 = ((z1 >> 11) + 1) * _INV_2_53
            u2 = (z2 >> 11) * _INV_2_53
            r = math.sqrt(-2.0 * math.log(u1))
            data[i] = data[i] + sigma * (r * math.cos(_TWO_PI * u2))
            count += 1
    return count, state


def bitflip_mantissa(data, state, severity):
    """Each element independently, with probability `severity`, flips one
    uniformly chosen mantissa bit (positions 0-22) of its binary32
    representation. Sign and exponent fields are never touched.
    Returns (count, new_state).
    """
    count = 0
    for i in range(len(data)):
        z, state = splitmix64_next(state)
        if (z >> 11) * _INV_2_53 < severity:
            z2, state = splitmix64_next(state)
            bit = z2 % 23
            (u,) = struct.unpack("<I", struct.pack("<f", data[i]))
            (v,) = struct.unpack("<f", struct.pack("<I", u ^ (1 << bit)))
            data[i] = v
            count += 1
    return count, state

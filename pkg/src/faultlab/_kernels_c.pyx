# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel backend.

Mirror of ``faultlab._kernels_py``: same operations, same order, accumulate
in binary64 and store binary32, so both backends are bit-identical on the
same platform.  Built with -ffp-contract=off so no FMA fusion changes
rounding.  Keep the two files in sync.
"""

from cpython cimport array
from libc.math cimport M_PI, INFINITY, sqrt, log, exp, cos, sin, tanh
from libc.stdlib cimport malloc, free

import array

BACKEND_NAME = "c"

cdef array.array _F32_TEMPLATE = array.array("f", [])

cdef extern from *:
    """
    #include <stdint.h>
    static const uint64_t SM64_GAMMA = 0x9E3779B97F4A7C15ULL;
    static const uint64_t SM64_MIX1  = 0xBF58476D1CE4E5B9ULL;
    static const uint64_t SM64_MIX2  = 0x94D049BB133111EBULL;
    static inline uint64_t sm64_next(uint64_t *state) {
        uint64_t z = (*state += SM64_GAMMA);
        z = (z ^ (z >> 30)) * SM64_MIX1;
        z = (z ^ (z >> 27)) * SM64_MIX2;
        return z ^ (z >> 31);
    }
    """
    unsigned long long sm64_next(unsigned long long* state) nogil

cdef double INV_2_53 = 2.0 ** -53
cdef double TWO_PI = 2.0 * M_PI
cdef double GELU_C = sqrt(2.0 / M_PI)

cdef inline array.array _f32(Py_ssize_t n):
    return array.clone(_F32_TEMPLATE, n, zero=False)


# --- RNG core (splitmix64) ---------------------------------------------------

def splitmix64_next(state):
    """One step of splitmix64. Returns (output, new_state)."""
    cdef unsigned long long s = state
    cdef unsigned long long z = sm64_next(&s)
    return z, s


def mix64(x):
    """splitmix64 output function applied once to x (stream derivation)."""
    cdef unsigned long long s = x
    return sm64_next(&s)


def fill_gaussian(state, out, double mu, double sigma):
    """Fill `out` with N(mu, sigma^2) draws via Box-Muller pairs.

    Each pair consumes exactly two raw u64s; an odd tail discards the sine
    half. Returns the new state.
    """
    cdef float[::1] o = out
    cdef unsigned long long s = state
    cdef Py_ssize_t n = o.shape[0]
    cdef Py_ssize_t i = 0
    cdef unsigned long long z1, z2
    cdef double u1, u2, r, t
    with nogil:
        while i < n:
            z1 = sm64_next(&s)
            z2 = sm64_next(&s)
            u1 = (<double> ((z1 >> 11) + 1)) * INV_2_53
            u2 = (<double> (z2 >> 11)) * INV_2_53
            r = sqrt(-2.0 * log(u1))
            t = TWO_PI * u2
            o[i] = <float> (mu + sigma * (r * cos(t)))
            i += 1
            if i < n:
                o[i] = <float> (mu + sigma * (r * sin(t)))
                i += 1
    return s


# --- dense math --------------------------------------------------------------

def mm(a, b, Py_ssize_t m, Py_ssize_t k, Py_ssize_t n):
    """c[m,n] = a[m,k] @ b[k,n]; per-cell accumulation in t-ascending order."""
    cdef float[::1] av = a
    cdef float[::1] bv = b
    out = _f32(m * n)
    cdef float[::1] ov = out
    cdef double* row = <double*> malloc(n * sizeof(double))
    if row == NULL:
        raise MemoryError()
    cdef Py_ssize_t i, j, t, abase, bbase, obase
    cdef double aval
    try:
        with nogil:
            for i in range(m):
                for j in range(n):
                    row[j] = 0.0
                abase = i * k
                for t in range(k):
                    aval = av[abase + t]
                    bbase = t * n
                    for j in range(n):
                        row[j] += aval * bv[bbase + j]
                obase = i * n
                for j in range(n):
                    ov[obase + j] = <float> row[j]
    finally:
        free(row)
    return out


def mm_nt(a, b, Py_ssize_t m, Py_ssize_t k, Py_ssize_t n, double scale):
    """c[m,n] = (a[m,k] @ b[n,k]^T) * scale."""
    cdef float[::1] av = a
    cdef float[::1] bv = b
    out = _f32(m * n)
    cdef float[::1] ov = out
    cdef Py_ssize_t i, j, t, abase, bbase, obase
    cdef double acc
    with nogil:
        for i in range(m):
            abase = i * k
            obase = i * n
            for j in range(n):
                bbase = j * k
                acc = 0.0
                for t in range(k):
                    acc += (<double> av[abase + t]) * bv[bbase + t]
                ov[obase + j] = <float> (acc * scale)
    return out


def softmax_rows(x, Py_ssize_t rows, Py_ssize_t cols):
    """Row-wise stabilized softmax, in place. An all -inf row becomes
    uniform; NaNs propagate."""
    cdef float[::1] xv = x
    cdef double* es = <double*> malloc(cols * sizeof(double))
    if es == NULL:
        raise MemoryError()
    cdef Py_ssize_t r, j, base
    cdef double mx, v, s, inv, u, e
    try:
        with nogil:
            for r in range(rows):
                base = r * cols
                mx = xv[base]
                for j in range(1, cols):
                    v = xv[base + j]
                    if v > mx:
                        mx = v
                if mx == -INFINITY:
                    u = 1.0 / (<double> cols)
                    for j in range(cols):
                        xv[base + j] = <float> u
                    continue
                s = 0.0
                for j in range(cols):
                    e = exp(xv[base + j] - mx)
                    es[j] = e
                    s += e
                inv = 1.0 / s
                for j in range(cols):
                    xv[base + j] = <float> (es[j] * inv)
    finally:
        free(es)
    return x


def layer_norm(x, Py_ssize_t rows, Py_ssize_t cols, gamma, beta, double eps):
    """Per-row (x - mean) / sqrt(pop_var + eps) * gamma + beta."""
    cdef float[::1] xv = x
    cdef float[::1] gv = gamma
    cdef float[::1] bv = beta
    out = _f32(rows * cols)
    cdef float[::1] ov = out
    cdef Py_ssize_t r, j, base
    cdef double s, mean, v, d, inv
    with nogil:
        for r in range(rows):
            base = r * cols
            s = 0.0
            for j in range(cols):
                s += xv[base + j]
            mean = s / (<double> cols)
            v = 0.0
            for j in range(cols):
                d = xv[base + j] - mean
                v += d * d
            inv = 1.0 / sqrt(v / (<double> cols) + eps)
            for j in range(cols):
                ov[base + j] = <float> ((xv[base + j] - mean) * inv * gv[j] + bv[j])
    return out


def gelu(x):
    """Elementwise tanh-approximation GELU."""
    cdef float[::1] xv = x
    cdef Py_ssize_t n = xv.shape[0]
    out = _f32(n)
    cdef float[::1] ov = out
    cdef Py_ssize_t i
    cdef double v
    with nogil:
        for i in range(n):
            v = xv[i]
            ov[i] = <float> (0.5 * v * (1.0 + tanh(GELU_C * (v + 0.044715 * (v * v * v)))))
    return out


def add_inplace(x, y):
    cdef float[::1] xv = x
    cdef float[::1] yv = y
    cdef Py_ssize_t i, n = xv.shape[0]
    with nogil:
        for i in range(n):
            xv[i] = <float> ((<double> xv[i]) + (<double> yv[i]))
    return x


def add_rowvec_inplace(x, Py_ssize_t rows, Py_ssize_t cols, vec):
    cdef float[::1] xv = x
    cdef float[::1] vv = vec
    cdef Py_ssize_t r, j, base
    with nogil:
        for r in range(rows):
            base = r * cols
            for j in range(cols):
                xv[base + j] = <float> ((<double> xv[base + j]) + (<double> vv[j]))
    return x


def mul_rowvec_inplace(x, Py_ssize_t rows, Py_ssize_t cols, vec):
    cdef float[::1] xv = x
    cdef float[::1] vv = vec
    cdef Py_ssize_t r, j, base
    with nogil:
        for r in range(rows):
            base = r * cols
            for j in range(cols):
                xv[base + j] = <float> ((<double> xv[base + j]) * (<double> vv[j]))
    return x


def add_rowvec_sel_inplace(x, Py_ssize_t rows, Py_ssize_t cols, vec, sel):
    """x[:, j] += vec[j] only where sel[j]; unselected columns untouched
    (bit-exact identity there)."""
    cdef float[::1] xv = x
    cdef float[::1] vv = vec
    cdef signed char[::1] sv = sel
    cdef Py_ssize_t r, j, base
    with nogil:
        for r in range(rows):
            base = r * cols
            for j in range(cols):
                if sv[j]:
                    xv[base + j] = <float> ((<double> xv[base + j]) + (<double> vv[j]))
    return x


def zero_cols_inplace(x, Py_ssize_t rows, Py_ssize_t cols, sel):
    """x[:, j] = 0 where sel[j]; unselected columns untouched."""
    cdef float[::1] xv = x
    cdef signed char[::1] sv = sel
    cdef Py_ssize_t r, j, base
    with nogil:
        for r in range(rows):
            base = r * cols
            for j in range(cols):
                if sv[j]:
                    xv[base + j] = 0.0
    return x


def clip_inplace(x, double lo, double hi):
    """Clamp to [lo, hi]; NaNs pass through untouched."""
    cdef float[::1] xv = x
    cdef Py_ssize_t i, n = xv.shape[0]
    cdef double v
    with nogil:
        for i in range(n):
            v = xv[i]
            if v < lo:
                xv[i] = <float> lo
            elif v > hi:
                xv[i] = <float> hi
    return x


def extract_cols(src, Py_ssize_t row_off, Py_ssize_t rows, Py_ssize_t row_stride,
                 Py_ssize_t col_off, Py_ssize_t ncols):
    """Copy src[row_off : row_off+rows, col_off : col_off+ncols] (row-major
    with the given stride) into a fresh [rows, ncols] buffer."""
    cdef float[::1] sv = src
    out = _f32(rows * ncols)
    cdef float[::1] ov = out
    cdef Py_ssize_t r, j, sbase, obase
    with nogil:
        for r in range(rows):
            sbase = (row_off + r) * row_stride + col_off
            obase = r * ncols
            for j in range(ncols):
                ov[obase + j] = sv[sbase + j]
    return out


def write_cols(dst, Py_ssize_t row_off, Py_ssize_t rows, Py_ssize_t row_stride,
               Py_ssize_t col_off, src, Py_ssize_t ncols):
    """Inverse of extract_cols: scatter src[rows, ncols] into dst columns."""
    cdef float[::1] dv = dst
    cdef float[::1] sv = src
    cdef Py_ssize_t r, j, dbase, sbase
    with nogil:
        for r in range(rows):
            dbase = (row_off + r) * row_stride + col_off
            sbase = r * ncols
            for j in range(ncols):
                dv[dbase + j] = sv[sbase + j]
    return dst


def embed_rows(wte, wpe, Py_ssize_t d, ids, positions):
    """out[r] = wte[ids[r]] + wpe[positions[r]], row by row."""
    cdef float[::1] tv = wte
    cdef float[::1] pv = wpe
    cdef long long[::1] iv = ids
    cdef long long[::1] posv = positions
    cdef Py_ssize_t n = iv.shape[0]
    out = _f32(n * d)
    cdef float[::1] ov = out
    cdef Py_ssize_t r, j, tbase, pbase, obase
    with nogil:
        for r in range(n):
            tbase = (<Py_ssize_t> iv[r]) * d
            pbase = (<Py_ssize_t> posv[r]) * d
            obase = r * d
            for j in range(d):
                ov[obase + j] = <float> ((<double> tv[tbase + j]) + (<double> pv[pbase + j]))
    return out


def tensor_std(x):
    """Population standard deviation, two-pass in binary64."""
    cdef float[::1] xv = x
    cdef Py_ssize_t i, n = xv.shape[0]
    if n == 0:
        return 0.0
    cdef double s = 0.0, mean, v = 0.0, d
    with nogil:
        for i in range(n):
            s += xv[i]
        mean = s / (<double> n)
        for i in range(n):
            d = xv[i] - mean
            v += d * d
    return sqrt(v / (<double> n))


# --- fault kernels -----------------------------------------------------------

def corrupt_gaussian(data, state, double rate, double sigma):
    """Each element independently, with probability `rate`, gets additive
    N(0, sigma^2) noise. One u64 per element for the Bernoulli draw, plus a
    Box-Muller pair (cosine half used) per corrupted element.
    Returns (count, new_state).
    """
    cdef float[::1] dv = data
    cdef unsigned long long s = state
    cdef Py_ssize_t i, n = dv.shape[0]
    cdef unsigned long long z, z1, z2
    cdef double u1, u2, r
    cdef long long count = 0
    with nogil:
        for i in range(n):
            z = sm64_next(&s)
            if (<double> (z >> 11)) * INV_2_53 < rate:
                z1 = sm64_next(&s)
                z2 = sm64_next(&s)
                u1 = (<double> ((z1 >> 11) + 1)) * INV_2_53
                u2 = (<double> (z2 >> 11)) * INV_2_53
                r = sqrt(-2.0 * log(u1))
                dv[i] = <float> ((<double> dv[i]) + sigma * (r * cos(TWO_PI * u2)))
                count += 1
    return count, s


def bitflip_mantissa(data, state, double severity):
    """Each element independently, with probability `severity`, flips one
    uniformly chosen mantissa bit (positions 0-22) of its binary32
    representation. Sign and exponent fields are never touched.
    Returns (count, new_state).
    """
    cdef float[::1] dv = data
    cdef unsigned long long s = state
    cdef Py_ssize_t i, n = dv.shape[0]
    cdef unsigned long long z, z2
    cdef unsigned int bit
    cdef unsigned int* bits
    cdef long long count = 0
    if n == 0:
        return 0, s
    bits = <unsigned int*> &dv[0]
    with nogil:
        for i in range(n):
            z = sm64_next(&s)
            if (<double> (z >> 11)) * INV_2_53 < severity:
                z2 = sm64_next(&s)
                bit = <unsigned int> (z2 % 23)
                bits[i] = bits[i] ^ ((<unsigned int> 1) << bit)
                count += 1
    return count, s

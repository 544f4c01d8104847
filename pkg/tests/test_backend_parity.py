"""Bit-for-bit agreement between the compiled and pure-Python kernel backends.

Every kernel is driven with identical inputs through both modules and the
output buffers are compared as raw bytes.  A subprocess check confirms a
full forward pass hashes identically under FAULTLAB_BACKEND=py and =c.
"""

import math
import os
import subprocess
import sys
from array import array

import pytest

from faultlab import _kernels_py as pyk
from faultlab.rng import SeededRng

ck = pytest.importorskip(
    "faultlab._kernels_c", reason="compiled kernel backend not built"
)


def rand_f32(n: int, seed: int, sigma: float = 1.0) -> array:
    return array("f", SeededRng(seed).gaussian(n, mu=0.0, sigma=sigma).data)


def paired(n: int, seed: int):
    a = rand_f32(n, seed)
    return a, array("f", a)


def test_backend_names_differ():
    assert pyk.BACKEND_NAME == "python"
    assert ck.BACKEND_NAME == "c"


def test_splitmix64_parity():
    for state in (0, 1, 42, 2**63, 2**64 - 1):
        assert pyk.splitmix64_next(state) == ck.splitmix64_next(state)
        assert pyk.mix64(state) == ck.mix64(state)


def test_fill_gaussian_parity():
    a, b = array("f", bytes(4 * 1001)), array("f", bytes(4 * 1001))
    sa = pyk.fill_gaussian(12345, a, 0.5, 2.0)
    sb = ck.fill_gaussian(12345, b, 0.5, 2.0)
    assert sa == sb
    assert a.tobytes() == b.tobytes()


def test_mm_parity():
    m, k, n = 7, 13, 5
    a, b = rand_f32(m * k, 1), rand_f32(k * n, 2)
    assert pyk.mm(a, b, m, k, n).tobytes() == ck.mm(a, b, m, k, n).tobytes()


def test_mm_nt_parity():
    m, k, n = 6, 9, 8
    a, b = rand_f32(m * k, 3), rand_f32(n * k, 4)
    scale = 1.0 / math.sqrt(k)
    assert (
        pyk.mm_nt(a, b, m, k, n, scale).tobytes()
        == ck.mm_nt(a, b, m, k, n, scale).tobytes()
    )


def test_softmax_rows_parity():
    a, b = paired(5 * 11, 5)
    # one all -inf row and one partial -inf row
    for j in range(11):
        a[j] = b[j] = float("-inf")
    a[11] = b[11] = float("-inf")
    pyk.softmax_rows(a, 5, 11)
    ck.softmax_rows(b, 5, 11)
    assert a.tobytes() == b.tobytes()


def test_layer_norm_parity():
    x, x2 = paired(4 * 16, 6)
    gamma, beta = rand_f32(16, 7), rand_f32(16, 8)
    out_py = pyk.layer_norm(x, 4, 16, gamma, beta, 1e-5)
    out_c = ck.layer_norm(x2, 4, 16, gamma, beta, 1e-5)
    assert out_py.tobytes() == out_c.tobytes()


def test_gelu_parity():
    a, b = paired(257, 9)
    assert pyk.gelu(a).tobytes() == ck.gelu(b).tobytes()


def test_elementwise_inplace_parity():
    a, b = paired(6 * 10, 10)
    vec = rand_f32(10, 11)
    y = rand_f32(6 * 10, 12)
    sel = array("b", [1, 0, 1, 1, 0, 0, 1, 0, 1, 1])

    pyk.add_inplace(a, y), ck.add_inplace(b, y)
    assert a.tobytes() == b.tobytes()
    pyk.add_rowvec_inplace(a, 6, 10, vec), ck.add_rowvec_inplace(b, 6, 10, vec)
    assert a.tobytes() == b.tobytes()
    pyk.mul_rowvec_inplace(a, 6, 10, vec), ck.mul_rowvec_inplace(b, 6, 10, vec)
    assert a.tobytes() == b.tobytes()
    pyk.add_rowvec_sel_inplace(a, 6, 10, vec, sel), ck.add_rowvec_sel_inplace(b, 6, 10, vec, sel)
    assert a.tobytes() == b.tobytes()
    pyk.zero_cols_inplace(a, 6, 10, sel), ck.zero_cols_inplace(b, 6, 10, sel)
    assert a.tobytes() == b.tobytes()
    pyk.clip_inplace(a, -0.5, 0.5), ck.clip_inplace(b, -0.5, 0.5)
    assert a.tobytes() == b.tobytes()


def test_extract_write_embed_parity():
    src = rand_f32(8 * 12, 13)
    out_py = pyk.extract_cols(src, 2, 4, 12, 3, 5)
    out_c = ck.extract_cols(src, 2, 4, 12, 3, 5)
    assert out_py.tobytes() == out_c.tobytes()

    dst_a, dst_b = paired(8 * 12, 14)
    pyk.write_cols(dst_a, 2, 4, 12, 3, out_py, 5)
    ck.write_cols(dst_b, 2, 4, 12, 3, out_c, 5)
    assert dst_a.tobytes() == dst_b.tobytes()

    wte, wpe = rand_f32(20 * 6, 15), rand_f32(10 * 6, 16)
    ids = array("q", [0, 3, 19, 7])
    pos = array("q", [0, 1, 2, 3])
    assert (
        pyk.embed_rows(wte, wpe, 6, ids, pos).tobytes()
        == ck.embed_rows(wte, wpe, 6, ids, pos).tobytes()
    )


def test_tensor_std_parity():
    x = rand_f32(999, 17, sigma=3.0)
    assert pyk.tensor_std(x) == ck.tensor_std(x)
    assert pyk.tensor_std(array("f", [])) == ck.tensor_std(array("f", [])) == 0.0


def test_fault_kernel_parity():
    a, b = paired(5000, 18)
    ca, sa = pyk.corrupt_gaussian(a, 777, 0.25, 0.1)
    cb, sb = ck.corrupt_gaussian(b, 777, 0.25, 0.1)
    assert (ca, sa) == (cb, sb)
    assert a.tobytes() == b.tobytes()

    fa, fb = paired(5000, 19)
    ca, sa = pyk.bitflip_mantissa(fa, 333, 0.5)
    cb, sb = ck.bitflip_mantissa(fb, 333, 0.5)
    assert (ca, sa) == (cb, sb)
    assert fa.tobytes() == fb.tobytes()


_FORWARD_DIGEST = r"""
import hashlib
from faultlab import BACKEND_NAME, build_toy_model, build_margin_classifier

lm = build_toy_model(arch="causal_lm", n_layers=2, d_model=16, n_heads=4, seed=7)
cls = build_margin_classifier()
ids = [[3, 5, 7, 11, 2], [4, 4, 9, 2, 2]]
marks = [[1, 1, 1, 1, 1], [1, 1, 1, 0, 0]]
h = hashlib.sha256()
h.update(lm.forward_logits(ids, marks).data.tobytes())
h.update(cls.forward_classify(ids, marks).data.tobytes())
print(BACKEND_NAME, h.hexdigest())
"""


def test_full_forward_hash_matches_across_backends():
    digests = {}
    for backend in ("py", "c"):
        env = dict(os.environ, FAULTLAB_BACKEND=backend)
        proc = subprocess.run(
            [sys.executable, "-c", _FORWARD_DIGEST],
            capture_output=True, text=True, env=env, check=True,
        )
        name, digest = proc.stdout.split()
        digests[backend] = digest
        assert name == ("python" if backend == "py" else "c")
    assert digests["py"] == digests["c"]


def test_backend_env_rejects_unknown(tmp_path):
    env = dict(os.environ, FAULTLAB_BACKEND="cuda")
    proc = subprocess.run(
        [sys.executable, "-c", "import faultlab"],
        capture_output=True, text=True, env=env,
    )
    assert proc.returncode != 0
    assert "FAULTLAB_BACKEND" in proc.stderr

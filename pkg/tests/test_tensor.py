from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faultlab import Tensor, gelu, layer_norm, matmul, matmul_nt, softmax_lastdim
from faultlab.errors import DimensionError

from .oracles import ref_gelu, ref_layer_norm, ref_matmul, ref_softmax

F32_REL = 1e-6


def close(a, b, tol=1e-5):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def test_tensor_construction_and_views():
    t = Tensor.from_nested([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    assert t.shape == (3, 2)
    assert t.size == 6
    assert t.ndim == 2
    assert t.tolist() == [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]
    r = t.reshape((2, 3))
    assert r.shape == (2, 3)
    assert list(r.data) == list(t.data)
    with pytest.raises(DimensionError):
        t.reshape((4, 2))


def test_tensor_zeros_full_item_eq():
    z = Tensor.zeros((2, 2))
    assert z.tolist() == [[0.0, 0.0], [0.0, 0.0]]
    f = Tensor.full((3,), 1.5)
    assert f.tolist() == [1.5, 1.5, 1.5]
    assert Tensor.full((1,), 2.0).item() == 2.0
    assert Tensor.from_nested([1.0, 2.0]) == Tensor.from_nested([1.0, 2.0])
    assert Tensor.from_nested([1.0, 2.0]) != Tensor.from_nested([2.0, 1.0])
    assert Tensor.from_nested([1.0, 2.0]) != Tensor.from_nested([[1.0, 2.0]])


def test_tensor_shape_data_mismatch():
    with pytest.raises(DimensionError):
        Tensor((2, 3), [0.0] * 5)


def test_copy_is_independent():
    t = Tensor.from_nested([1.0, 2.0])
    c = t.copy()
    c.data[0] = 9.0
    assert t.data[0] == 1.0


def test_matmul_matches_reference():
    a = [[0.5, -1.25, 2.0], [3.5, 0.125, -0.75]]
    b = [[1.0, 0.5], [-2.0, 0.25], [0.375, -1.5]]
    got = matmul(Tensor.from_nested(a), Tensor.from_nested(b))
    want = ref_matmul(a, b)
    assert got.shape == (2, 2)
    for i in range(2):
        for j in range(2):
            assert close(got.tolist()[i][j], want[i][j])


def test_matmul_dimension_errors():
    a = Tensor.zeros((2, 3))
    with pytest.raises(DimensionError):
        matmul(a, Tensor.zeros((4, 2)))
    with pytest.raises(DimensionError):
        matmul(a, Tensor.zeros((3,)))


def test_matmul_nt_matches_reference():
    a = [[1.0, 2.0, 3.0], [0.5, -0.5, 0.25]]
    b = [[2.0, 0.0, -1.0], [1.5, 1.0, 0.5]]
    bt = [[b[j][i] for j in range(2)] for i in range(3)]
    got = matmul_nt(Tensor.from_nested(a), Tensor.from_nested(b), scale=0.5)
    want = ref_matmul(a, bt)
    for i in range(2):
        for j in range(2):
            assert close(got.tolist()[i][j], want[i][j] * 0.5)


def test_softmax_matches_reference_and_handles_all_masked():
    row = [0.5, -1.0, 3.25, 0.0]
    got = softmax_lastdim(Tensor.from_nested([row]))
    want = ref_softmax(row)
    for g, w in zip(got.tolist()[0], want):
        assert close(g, w)
    masked = softmax_lastdim(Tensor.from_nested([[-math.inf] * 4]))
    assert masked.tolist()[0] == [0.25, 0.25, 0.25, 0.25]


def test_softmax_propagates_nan():
    got = softmax_lastdim(Tensor.from_nested([[0.0, math.nan, 1.0]]))
    assert any(math.isnan(v) for v in got.tolist()[0])


def test_layer_norm_matches_reference():
    row = [1.0, -2.0, 0.5, 4.0]
    gamma = [1.1, 0.9, 1.0, 1.2]
    beta = [0.1, -0.1, 0.0, 0.2]
    got = layer_norm(
        Tensor.from_nested([row]),
        Tensor.from_nested(gamma),
        Tensor.from_nested(beta),
        eps=1e-5,
    )
    want = ref_layer_norm(row, gamma, beta, 1e-5)
    for g, w in zip(got.tolist()[0], want):
        assert close(g, w)


def test_layer_norm_shape_check():
    with pytest.raises(DimensionError):
        layer_norm(Tensor.zeros((2, 4)), Tensor.zeros((3,)), Tensor.zeros((4,)), eps=1e-5)


def test_gelu_matches_reference():
    xs = [-3.0, -1.0, -0.5, 0.0, 0.5, 1.0, 3.0]
    got = gelu(Tensor.from_nested(xs)).tolist()
    for g, x in zip(got, xs):
        assert close(g, ref_gelu(x))
    assert gelu(Tensor.from_nested([0.0])).tolist() == [0.0]


@given(
    st.lists(
        st.floats(min_value=-20, max_value=20, allow_nan=False),
        min_size=2,
        max_size=8,
    )
)
@settings(max_examples=50, deadline=None)
def test_softmax_rows_sum_to_one(row):
    got = softmax_lastdim(Tensor.from_nested([row])).tolist()[0]
    assert all(v >= 0.0 for v in got)
    assert abs(sum(got) - 1.0) < 1e-5


@given(
    st.lists(
        st.floats(min_value=-10, max_value=10, allow_nan=False),
        min_size=2,
        max_size=8,
    )
)
@settings(max_examples=50, deadline=None)
def test_layer_norm_normalizes(row):
    n = len(row)
    got = layer_norm(
        Tensor.from_nested([row]),
        Tensor.full((n,), 1.0),
        Tensor.zeros((n,)),
        eps=1e-5,
    ).tolist()[0]
    assert abs(sum(got) / n) < 1e-4

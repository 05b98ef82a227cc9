import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tbasis.exceptions import BadPermutation, FormatError, SizeMismatch
from tbasis.tensor import (
    as_tensor,
    contract,
    dtf_bytes,
    dtf_from_bytes,
    frobenius,
    inverse_permutation,
    permute,
    read_dtf,
    reshape,
    write_dtf,
)

from conftest import naive_contract, rel


def test_reshape_relabels_row_major():
    t = np.arange(24, dtype=float).reshape(4, 6)
    out = reshape(t, [2, 2, 6])
    for i in range(4):
        for j in range(6):
            assert out[i // 2, i % 2, j] == t[i, j]


def test_reshape_flatten_keeps_order():
    t = np.arange(6, dtype=float).reshape(2, 3)
    assert reshape(t, [6]).tolist() == [0, 1, 2, 3, 4, 5]


def test_reshape_size_mismatch():
    with pytest.raises(SizeMismatch):
        reshape(np.zeros((2, 3)), [4])


def test_permute_identity_is_bitwise(rng):
    t = rng.standard_normal((2, 3, 4))
    assert np.array_equal(permute(t, (0, 1, 2)), t)


def test_permute_transpose(rng):
    t = rng.standard_normal((2, 3))
    out = permute(t, (1, 0))
    assert out.shape == (3, 2)
    for i in range(2):
        for j in range(3):
            assert out[j, i] == t[i, j]


def test_permute_exhaustive_three_modes(rng):
    # 1-based (3, 1, 2) is (2, 0, 1) here
    t = rng.standard_normal((2, 3, 4))
    out = permute(t, (2, 0, 1))
    assert out.shape == (4, 2, 3)
    for a in range(4):
        for b in range(2):
            for c in range(3):
                assert out[a, b, c] == t[b, c, a]


@pytest.mark.parametrize("perm", [(0, 0, 1), (0, 1), (0, 1, 3)])
def test_permute_rejects_non_bijection(perm):
    with pytest.raises(BadPermutation):
        permute(np.zeros((2, 3, 4)), perm)


def test_contract_matrix_vector(rng):
    A = rng.standard_normal((2, 3))
    v = rng.standard_normal(3)
    np.testing.assert_allclose(contract(A, v, [(1, 0)]), A @ v, rtol=1e-14)


def test_contract_with_unit_scalar_is_identity(rng):
    a = rng.standard_normal((2, 3))
    out = contract(a, np.ones(1), [])
    assert out.shape == (2, 3, 1)
    assert np.array_equal(out[..., 0], a)


def test_contract_against_loops(rng):
    a = rng.standard_normal((2, 3, 2))
    b = rng.standard_normal((2, 4, 2))
    out = contract(a, b, [(2, 0)])
    assert out.shape == (2, 3, 4, 2)
    assert rel(out, naive_contract(a, b, [(2, 0)])) <= 1e-12


def test_contract_size_mismatch():
    with pytest.raises(SizeMismatch):
        contract(np.zeros((2, 3)), np.zeros((4, 2)), [(1, 0)])


def test_frobenius_values():
    assert frobenius(np.zeros((3, 3))) == 0.0
    assert frobenius(np.array([3.0])) == 3.0
    assert frobenius(np.array([[1.0, 2.0], [3.0, 4.0]])) == pytest.approx(math.sqrt(30), rel=1e-15)


small_shapes = st.lists(st.integers(1, 4), min_size=1, max_size=4)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_contract_matches_loops_property(data):
    shape_a = data.draw(small_shapes)
    k = data.draw(st.integers(0, len(shape_a)))
    pairs_a = data.draw(st.permutations(range(len(shape_a))))[:k]
    free_b = data.draw(st.lists(st.integers(1, 3), max_size=2))
    shape_b = [shape_a[i] for i in pairs_a] + free_b
    order = data.draw(st.permutations(range(len(shape_b))))
    shape_b = [shape_b[i] for i in order]
    pos_b = [order.index(m) for m in range(k)]
    elems = st.floats(-2, 2, allow_nan=False)
    a = data.draw(arrays(np.float64, tuple(shape_a), elements=elems))
    b = data.draw(arrays(np.float64, tuple(shape_b), elements=elems))
    axes = list(zip(pairs_a, pos_b))
    got = contract(a, b, axes)
    want = naive_contract(a, b, axes)
    assert got.shape == want.shape
    assert np.linalg.norm(got - want) <= 1e-12 * np.linalg.norm(want) + 1e-15


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3)), elements=st.floats(-5, 5)), st.floats(-3, 3))
def test_contract_bilinear(a, lam):
    b = np.linspace(-1, 1, a.shape[2] * 2).reshape(a.shape[2], 2)
    lhs = contract(lam * a, b, [(2, 0)])
    rhs = lam * contract(a, b, [(2, 0)])
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(rhs) + 1e-300


@settings(max_examples=30, deadline=None)
@given(st.data())
def test_permute_inverse_roundtrip(data):
    shape = data.draw(small_shapes)
    perm = data.draw(st.permutations(range(len(shape))))
    t = data.draw(arrays(np.float64, tuple(shape), elements=st.floats(-1e6, 1e6)))
    back = permute(permute(t, perm), inverse_permutation(perm))
    assert np.array_equal(back, t)


def test_reshape_preserves_frobenius(rng):
    t = rng.standard_normal((4, 6))
    assert frobenius(reshape(t, (3, 8))) == frobenius(t)


def test_dtf_roundtrip_and_layout():
    t = np.arange(6, dtype=float).reshape(2, 3)
    raw = dtf_bytes(t)
    assert raw[:4] == b"DTF1"
    assert int.from_bytes(raw[4:8], "little") == 2
    assert int.from_bytes(raw[8:16], "little") == 2
    assert int.from_bytes(raw[16:24], "little") == 3
    assert np.frombuffer(raw[24:], "<f8").tolist() == [0, 1, 2, 3, 4, 5]
    assert np.array_equal(dtf_from_bytes(raw), t)


def test_dtf_stream_of_blocks(rng):
    a, b = rng.standard_normal((3,)), rng.standard_normal((2, 2, 2))
    buf = io.BytesIO()
    write_dtf(buf, a)
    write_dtf(buf, b)
    buf.seek(0)
    assert np.array_equal(read_dtf(buf), a)
    assert np.array_equal(read_dtf(buf), b)


@pytest.mark.parametrize("raw", [b"XXXX", b"DTF1\x01\x00\x00\x00", dtf_bytes(np.ones(3))[:-1]])
def test_dtf_rejects_malformed(raw):
    with pytest.raises(FormatError):
        dtf_from_bytes(raw)


def test_as_tensor_copies():
    src = np.ones(4)
    t = as_tensor(src, (2, 2))
    src[0] = 5
    assert t[0, 0] == 1.0

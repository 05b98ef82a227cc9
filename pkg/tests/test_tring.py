import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tbasis.exceptions import BadConfig, IndexOutOfRange, ShapeMismatch
from tbasis.tensor import contract
from tbasis.tring import (
    TRCores,
    pairing_plan,
    random_tr,
    tr_assemble_pairwise,
    tr_entry,
    tr_entry_loops,
    tr_param_count,
    tr_reconstruct,
)

from conftest import rel


def test_single_core_is_slice_trace(rng):
    core = rng.standard_normal((3, 5, 3))
    tr = TRCores((core,))
    for i in range(5):
        assert tr_entry(tr, (i,)) == pytest.approx(np.trace(core[:, i, :]), rel=1e-13)
    np.testing.assert_allclose(tr_reconstruct(tr), np.trace(core, axis1=0, axis2=2), rtol=1e-13)


def test_all_ones_counts_paths():
    R, d = 3, 4
    tr = TRCores(tuple(np.ones((R, 2, R)) for _ in range(d)))
    assert tr_entry(tr, (0, 1, 0, 1)) == R**d
    assert np.all(tr_reconstruct(tr) == R**d)


def test_entry_matches_contraction_chain(rng):
    tr = random_tr((2, 3, 4), 2, rng)
    c1, c2, c3 = tr.cores
    full = contract(contract(c1, c2, [(2, 0)]), c3, [(3, 0)])
    full = np.trace(full, axis1=0, axis2=4)
    for idx in itertools.product(range(2), range(3), range(4)):
        assert tr_entry(tr, idx) == pytest.approx(full[idx], rel=1e-12)


def test_vectorized_entry_matches_pure_loops(rng):
    tr = random_tr((3, 2, 4), 3, rng, adapters=True)
    for idx in [(0, 0, 0), (2, 1, 3), (1, 0, 2)]:
        assert tr_entry(tr, idx) == pytest.approx(tr_entry_loops(tr, idx), rel=1e-12)


def test_entry_index_errors(rng):
    tr = random_tr((2, 3), 2, rng)
    with pytest.raises(IndexOutOfRange):
        tr_entry(tr, (0, 3))
    with pytest.raises(IndexOutOfRange):
        tr_entry(tr, (0,))


def test_small_ring_count_example(rng):
    shape = (16, 32, 3, 3)
    tr = random_tr(shape, 2, rng)
    assert tr_reconstruct(tr).shape == shape
    assert tr_reconstruct(tr).size == 4608
    assert sum(c.size for c in tr.cores) == 216
    assert tr_param_count(shape, 2) == 216


def test_rank_one_is_outer_product(rng):
    vecs = [rng.standard_normal(n) for n in (2, 3, 4)]
    tr = TRCores(tuple(v.reshape(1, -1, 1) for v in vecs))
    np.testing.assert_allclose(tr_reconstruct(tr), np.einsum("i,j,k->ijk", *vecs), rtol=1e-14)


def test_reconstruct_matches_entries(rng):
    tr = random_tr((4, 4, 4, 4), 3, rng)
    full = tr_reconstruct(tr)
    for idx in itertools.product(range(4), repeat=4):
        assert full[idx] == pytest.approx(tr_entry(tr, idx), rel=1e-11, abs=1e-12)


def test_pairwise_two_cores(rng):
    tr = random_tr((3, 5), 2, rng)
    assert rel(tr_assemble_pairwise(tr), tr_reconstruct(tr)) <= 1e-12


def test_pairing_plan_odd():
    assert pairing_plan(5) == [[(0, 1), (2, 3), (4,)], [(0, 1), (2,)]]
    assert pairing_plan(2) == []
    assert pairing_plan(4) == [[(0, 1), (2, 3)]]


def test_pairwise_five_cores(rng):
    tr = random_tr((2, 3, 2, 3, 2), 2, rng)
    assert rel(tr_assemble_pairwise(tr), tr_reconstruct(tr)) <= 1e-12


def test_pairwise_eight_cores_with_adapters(rng):
    tr = random_tr((4,) * 8, 2, rng, adapters=True)
    full = tr_assemble_pairwise(tr)
    for _ in range(50):
        idx = tuple(rng.integers(0, 4, size=8))
        assert full[idx] == pytest.approx(tr_entry(tr, idx), rel=1e-11, abs=1e-12)


def test_param_count_examples():
    assert tr_param_count((16, 32, 3, 3), 2) == 216
    assert tr_param_count((5, 7, 2), 1) == 14
    assert tr_param_count((9, 9, 9, 9, 9), 8) == 2880


def test_invariants_rejected():
    with pytest.raises(BadConfig):
        TRCores(())
    with pytest.raises(ShapeMismatch):
        TRCores((np.ones((2, 3, 2)), np.ones((3, 3, 3))))
    with pytest.raises(BadConfig):
        TRCores((np.ones((2, 3, 2)),), (np.array([1.0, -1.0]),))
    with pytest.raises(ShapeMismatch):
        TRCores((np.ones((2, 3, 2)),), (np.ones(2), np.ones(2)))


ring_shapes = st.lists(st.integers(1, 4), min_size=1, max_size=5)


@settings(max_examples=40, deadline=None)
@given(ring_shapes, st.integers(1, 3), st.integers(0, 2**32 - 1), st.booleans())
def test_three_evaluators_agree(shape, R, seed, adapters):
    tr = random_tr(shape, R, np.random.default_rng(seed), adapters=adapters)
    full = tr_reconstruct(tr)
    assert rel(tr_assemble_pairwise(tr), full) <= 1e-12
    want = np.array([tr_entry(tr, idx) for idx in np.ndindex(*shape)]).reshape(shape)
    assert rel(full, want) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=2, max_size=5), st.integers(1, 3), st.integers(0, 2**32 - 1), st.data())
def test_cyclic_shift_rolls_modes(shape, R, seed, data):
    tr = random_tr(shape, R, np.random.default_rng(seed), adapters=True)
    s = data.draw(st.integers(1, len(shape) - 1))
    rolled = tr_reconstruct(tr.roll(s))
    expect = np.transpose(tr_reconstruct(tr), [(k + s) % len(shape) for k in range(len(shape))])
    assert rel(rolled, expect) <= 1e-12


def test_scaling_one_core(rng):
    tr = random_tr((3, 4, 2), 2, rng)
    cores = list(tr.cores)
    cores[1] = 2.5 * cores[1]
    assert rel(tr_reconstruct(TRCores(tuple(cores))), 2.5 * tr_reconstruct(tr)) <= 1e-12


def test_identity_adapters_change_nothing(rng):
    tr = random_tr((3, 4, 2), 3, rng)
    with_ones = TRCores(tr.cores, tuple(np.ones(3) for _ in range(3)))
    assert np.array_equal(tr_reconstruct(with_ones), tr_reconstruct(tr))
    assert np.array_equal(tr_assemble_pairwise(with_ones), tr_assemble_pairwise(tr))

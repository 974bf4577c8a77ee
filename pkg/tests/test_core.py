import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdefinetti.core import (
    DensityMatrix,
    DimensionError,
    InvalidStateError,
    Operator,
    PureState,
    SymmetricState,
    bell_state,
    ghz_state,
    is_permutation_symmetric,
    occupation_basis,
    partial_trace,
    permutation_conjugate,
    product_state,
    random_state,
    reduce_to,
    rng_for,
    symmetric_dimension,
    symmetric_projector,
    symmetric_subspace,
    tensor_product,
)


def ket_projector(d, i):
    m = np.zeros((d, d), dtype=complex)
    m[i, i] = 1
    return Operator(m, (d,))


def test_tensor_identity():
    out = tensor_product(Operator(np.eye(2), (2,)), Operator(np.eye(2), (2,)))
    assert out.factor_dims == (2, 2)
    assert np.array_equal(out.data, np.eye(4))


def test_tensor_computational_basis():
    out = tensor_product(ket_projector(2, 0), ket_projector(2, 1))
    assert np.array_equal(out.data, np.diag([0, 1, 0, 0]).astype(complex))


def test_tensor_index_formula():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    B = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    out = tensor_product(Operator(A, (2,)), Operator(B, (2,))).data
    for i, j, k, l in itertools.product(range(2), repeat=4):
        assert abs(out[i * 2 + k, j * 2 + l] - A[i, j] * B[k, l]) <= 1e-14


def test_tensor_acts_on_product_vectors():
    rng = np.random.default_rng(4)
    A, B = rng.normal(size=(3, 3)), rng.normal(size=(2, 2))
    u, v = rng.normal(size=3), rng.normal(size=2)
    out = tensor_product(Operator(A, (3,)), Operator(B, (2,))).data
    assert np.allclose(out @ np.kron(u, v), np.kron(A @ u, B @ v), atol=1e-12)


def test_partial_trace_product():
    g = random_state("mixed-hs", (2,), 1)
    rho = random_state("mixed-hs", (3,), 2)
    out = partial_trace(tensor_product(g, rho), [1])
    assert np.allclose(out.data, g.data, atol=1e-12)


def test_partial_trace_bell():
    out = partial_trace(bell_state(), [1])
    assert np.allclose(out.data, np.eye(2) / 2, atol=1e-14)


def test_partial_trace_summation_oracle():
    g = random_state("mixed-hs", (2, 2, 2), 5)
    t = g.data.reshape(2, 2, 2, 2, 2, 2)
    oracle = np.zeros((2, 2), dtype=complex)
    for i, ip, j, k in itertools.product(range(2), repeat=4):
        oracle[i, ip] += t[i, j, k, ip, j, k]
    assert np.allclose(partial_trace(g, [1, 2]).data, oracle, atol=1e-12)


def test_partial_trace_out_of_range():
    with pytest.raises(IndexError):
        partial_trace(bell_state(), [2])


def test_partial_trace_composes():
    g = random_state("mixed-hs", (2, 3, 2), 6)
    once = partial_trace(g, [1, 2])
    twice = partial_trace(partial_trace(g, [1]), [1])
    assert np.max(np.abs(once.data - twice.data)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), subset=st.sets(st.integers(0, 2), max_size=2))
def test_partial_trace_preserves_trace(seed, subset):
    g = Operator(np.random.default_rng(seed).normal(size=(12, 12)), (2, 3, 2))
    out = partial_trace(g, sorted(subset)) if subset else g
    assert abs(out.trace() - g.trace()) <= 1e-12


def test_permutation_identity_and_swap():
    g = random_state("mixed-hs", (2,), 1)
    rho = random_state("mixed-hs", (2,), 2)
    gr = tensor_product(g, rho)
    assert np.allclose(permutation_conjugate(gr, (0, 1)).data, gr.data)
    assert np.allclose(permutation_conjugate(gr, (1, 0)).data, tensor_product(rho, g).data, atol=1e-14)


def test_permutation_group_law():
    g = random_state("mixed-hs", (2, 2, 2), 9)
    cyc = (1, 2, 0)
    once = permutation_conjugate(g, cyc)
    back = permutation_conjugate(permutation_conjugate(once, cyc), cyc)
    assert np.max(np.abs(back.data - g.data)) <= 1e-12
    assert np.max(np.abs(once.data - g.data)) > 1e-3


def test_permutation_on_product_vectors():
    rng = np.random.default_rng(2)
    us = [rng.normal(size=2) for _ in range(3)]
    sigma = (2, 0, 1)
    v = np.kron(np.kron(us[0], us[1]), us[2])
    op = Operator(np.outer(v, v), (2, 2, 2))
    w = np.kron(np.kron(us[sigma[0]], us[sigma[1]]), us[sigma[2]])
    assert np.allclose(permutation_conjugate(op, sigma).data, np.outer(w, w), atol=1e-14)


def test_permutation_unequal_dims():
    with pytest.raises(DimensionError):
        permutation_conjugate(Operator(np.eye(6), (2, 3)), (1, 0))


@pytest.mark.parametrize("d,n,dim", [(2, 2, 3), (2, 3, 4), (3, 4, 15), (4, 3, 20)])
def test_symmetric_dimension(d, n, dim):
    basis = symmetric_subspace(d, n)
    assert basis.dim == dim == symmetric_dimension(d, n)
    W = basis.isometry
    assert np.max(np.abs(W.conj().T @ W - np.eye(dim))) <= 1e-12


def test_symmetric_two_qubit_triplet():
    basis = symmetric_subspace(2, 2)
    assert [tuple(r) for r in basis.occupations] == [(2, 0), (1, 1), (0, 2)]
    assert np.allclose(basis.isometry[:, 1], np.array([0, 1, 1, 0]) / math.sqrt(2))


def test_multiset_enumeration_oracle():
    occ = occupation_basis(3, 4)
    multisets = set(itertools.combinations_with_replacement(range(3), 4))
    from_occ = {tuple(sorted(sum(([i] * n for i, n in enumerate(row)), []))) for row in occ}
    assert from_occ == multisets and len(occ) == 15


def test_symmetric_projector_commutes_with_swaps():
    d, n = 2, 3
    P = Operator(symmetric_projector(d, n), (d,) * n)
    for j in range(n - 1):
        sigma = list(range(n))
        sigma[j], sigma[j + 1] = sigma[j + 1], sigma[j]
        assert np.max(np.abs(permutation_conjugate(P, sigma).data - P.data)) <= 1e-12


def test_symmetric_subspace_cap():
    with pytest.raises(OverflowError):
        occupation_basis(30, 30, cap=200_000)


@pytest.mark.parametrize("kind", ["pure-haar", "mixed-hs"])
def test_random_state_valid(kind):
    g = random_state(kind, (2, 2), 11)
    assert abs(g.trace() - 1) <= 1e-12
    ev = np.linalg.eigvalsh(g.data)
    assert ev.min() >= -1e-10
    if kind == "pure-haar":
        assert np.sum(ev > 1e-10) == 1


def test_random_state_deterministic():
    a = random_state("mixed-hs", (4,), 123)
    b = random_state("mixed-hs", (4,), 123)
    assert np.array_equal(a.data, b.data)
    c = random_state("symmetric-pure", (2, 2, 2), rng_for(5, 1))
    d = random_state("symmetric-pure", (2, 2, 2), rng_for(5, 1))
    assert np.array_equal(c.data, d.data)
    assert isinstance(c, SymmetricState)


def test_symmetric_reductions_agree():
    g = random_state("symmetric-pure", (2, 2, 2, 2), 7)
    ref = reduce_to(g, [0, 1])
    for keep in itertools.combinations(range(4), 2):
        assert np.max(np.abs(reduce_to(g, keep).data - ref.data)) <= 1e-10
    assert np.allclose(g.reduced(2).data, ref.data, atol=1e-12)


def test_invalid_states_rejected():
    with pytest.raises(InvalidStateError):
        DensityMatrix(np.diag([0.5, 0.6]), (2,))
    with pytest.raises(InvalidStateError):
        DensityMatrix(np.diag([1.5, -0.5]), (2,))
    with pytest.raises(InvalidStateError):
        SymmetricState(tensor_product(ket_projector(2, 0), ket_projector(2, 1)).data, (2, 2))
    with pytest.raises(InvalidStateError):
        PureState(np.array([1.0, 1.0]), (2,))


def test_operator_shape_checked():
    with pytest.raises(DimensionError):
        Operator(np.eye(3), (2,))


def test_symmetric_examples():
    assert is_permutation_symmetric(ghz_state(2, 3))
    assert is_permutation_symmetric(product_state(random_state("mixed-hs", (3,), 0), 3))

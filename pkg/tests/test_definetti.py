import math
from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_povm, random_projective
from qdefinetti.core import (
    DimensionError,
    PureState,
    SymmetricState,
    ghz_state,
    product_state,
    psi_to_symmetric_state,
    random_state,
    random_symmetric_pure,
    symmetric_subspace,
    tensor_power,
)
from qdefinetti.definetti import (
    Budget,
    _ChainTerm,
    build_tilde,
    chain_measured_state,
    check_info_bound,
    check_trace_norm_bound,
    decompose_by_measurement,
    definetti_check,
    fock_localization,
    greedy_measurement_chain,
    info_rhs,
    localization_weight,
    product_measurement,
    projected_definetti,
    reference_rhs,
    trace_norm_rhs,
    trivial_ensemble,
    weight_factor_holds,
)
from qdefinetti.information import conditional_mutual_information, mutual_information
from qdefinetti.measurements import Measurement, measured_distribution, partial_measurement, tensor_all

LN2 = math.log(2)
SMALL = Budget(3, 2, 60)


def sym_state(d, N, seed):
    return psi_to_symmetric_state(random_symmetric_pure(d, N, seed))


def product_pure(u, N):
    u = np.asarray(u, dtype=complex) / np.linalg.norm(u)
    return PureState(reduce(np.kron, [u] * N), (len(u),) * N)


def test_ghz_computational_ensemble():
    g = ghz_state(2, 4)
    ens = decompose_by_measurement(g, tensor_all([Measurement.computational(2)] * 2), 2)
    assert np.allclose(ens.weights, [0.5, 0.5], atol=1e-15)
    assert np.allclose(ens.k_body[0].data, np.diag([1, 0, 0, 0]), atol=1e-15)
    assert np.allclose(ens.k_body[1].data, np.diag([0, 0, 0, 1]), atol=1e-15)
    tilde = build_tilde(ens, 2)
    assert np.allclose(tilde.data, np.diag([0.5, 0, 0, 0.5]), atol=1e-15)


def test_product_state_conditionals_equal_one_body():
    rng = np.random.default_rng(0)
    gamma = random_state("mixed-hs", (2,), rng)
    g = product_state(gamma, 4)
    e = product_measurement([random_povm(2, 3, rng) for _ in range(2)])
    ens = decompose_by_measurement(g, e, 2)
    for rho in ens.one_body:
        assert np.max(np.abs(rho.data - gamma.data)) <= 1e-12


def test_pruning_drops_impossible_outcomes():
    g = product_state(random_state("pure-haar", (2,), 1), 3)
    ens = decompose_by_measurement(g, tensor_all([Measurement.computational(2)] * 2), 1)
    assert len(ens) == 4
    zero = SymmetricState(np.diag([1.0, 0, 0, 0, 0, 0, 0, 0]), (2, 2, 2))
    ens = decompose_by_measurement(zero, tensor_all([Measurement.computational(2)] * 2), 1)
    assert len(ens) == 1 and ens.weights[0] == 1.0


def test_decomposition_errors():
    g = sym_state(2, 3, 3)
    with pytest.raises(DimensionError):
        decompose_by_measurement(g, Measurement.computational(2), 1)
    with pytest.raises(ValueError):
        decompose_by_measurement(g, Measurement.computational(1), 3)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.sampled_from([1, 2]))
def test_decomposition_reconstruction(seed, k):
    rng = np.random.default_rng(seed)
    g = sym_state(2, 3, rng)
    e = product_measurement([random_povm(2, 3, rng) for _ in range(3 - k)])
    ens = decompose_by_measurement(g, e, k)
    assert abs(ens.weights.sum() - 1) <= 1e-10
    assert np.max(np.abs(ens.mixture() - g.reduced(k).data)) <= 1e-10
    for st_k in ens.k_body:
        assert isinstance(st_k, SymmetricState)


def test_tilde_single_outcome():
    gamma = random_state("mixed-hs", (3,), 4)
    g = product_state(gamma, 3)
    ens = trivial_ensemble(g, 2)
    assert np.allclose(build_tilde(ens, 2).data, tensor_power(gamma, 2).data, atol=1e-12)
    assert np.allclose(build_tilde(ens, 3).data, g.data, atol=1e-12)


def test_tilde_is_symmetric_state():
    rng = np.random.default_rng(5)
    g = sym_state(2, 4, rng)
    ens = decompose_by_measurement(g, product_measurement([random_projective(2, rng)] * 2), 2)
    for k in (1, 2, 3):
        assert isinstance(build_tilde(ens, k), SymmetricState)


def test_bound_values():
    assert trace_norm_rhs(2, 6, 2) == pytest.approx(math.sqrt(2 * LN2 / 5), abs=1e-15)
    assert trace_norm_rhs(2, 6, 2) == pytest.approx(0.526554, abs=1e-6)
    assert info_rhs(2, 6, 2) == pytest.approx(LN2 / 5, abs=1e-15)
    assert info_rhs(2, 6, 2) == pytest.approx(0.138629, abs=1e-6)
    assert trace_norm_rhs(2, 6, 1) == 0.0
    assert reference_rhs(2, 6, 2) == pytest.approx(8 * LN2 / 4)


def test_chain_term_matches_generic_cmi():
    rng = np.random.default_rng(6)
    g = sym_state(2, 4, rng).reduced(3)
    lam_c = random_projective(2, rng)
    lam_b = random_povm(2, 2, rng)
    term = _ChainTerm(g.data, 2, 1, lam_c)
    measured = partial_measurement(lam_b, 1, partial_measurement(lam_c, 2, g))
    oracle = conditional_mutual_information(measured, [[0], [1], [2]])
    assert abs(term([lam_b]) - oracle) <= 1e-10
    last = _ChainTerm(g.reduced(2).data, 2, 1, None)
    oracle2 = mutual_information(partial_measurement(lam_b, 1, g.reduced(2)), [[0], [1]])
    assert abs(last([lam_b]) - oracle2) <= 1e-10


def test_chain_total_equals_measured_mutual_information():
    g = sym_state(2, 3, 7)
    chain = greedy_measurement_chain(g, 2, seed=1, budget=SMALL)
    assert sorted(chain.terms) == [1, 2]
    nu = chain_measured_state(g, chain)
    assert abs(chain.total - mutual_information(nu, [[0], [1, 2]])) <= 1e-9


def test_chain_product_state_is_zero():
    g = product_state(random_state("mixed-hs", (2,), 8), 4)
    chain = greedy_measurement_chain(g, 2, seed=0, budget=SMALL)
    assert max(abs(v) for v in chain.terms.values()) <= 1e-10


def test_chain_ghz_cap():
    chain = greedy_measurement_chain(ghz_state(2, 4), 2, seed=0, budget=SMALL)
    assert chain.total <= 2 * LN2 + 1e-9
    assert chain.total == pytest.approx(LN2, abs=1e-6)


def test_chain_deterministic():
    g = sym_state(2, 4, 9)
    a = greedy_measurement_chain(g, 2, seed=3, budget=SMALL)
    b = greedy_measurement_chain(g, 2, seed=3, budget=SMALL)
    assert a.terms == b.terms


def test_chain_rejects_small_k():
    with pytest.raises(ValueError):
        greedy_measurement_chain(sym_state(2, 3, 0), 1)


def test_marginal_consistency():
    rng = np.random.default_rng(10)
    g = sym_state(2, 5, rng)
    ens = decompose_by_measurement(g, product_measurement([random_projective(2, rng)] * 3), 2)
    lams = [random_povm(2, 3, rng), random_povm(2, 2, rng)]
    for gk, g1 in zip(ens.k_body, ens.one_body):
        p = measured_distribution(lams, gk).real
        marginals = np.outer(p.sum(axis=1), p.sum(axis=0))
        direct = measured_distribution(lams, tensor_power(g1, 2)).real
        assert np.max(np.abs(marginals - direct)) <= 1e-10


def test_product_state_zero_error():
    g = product_state(random_state("mixed-hs", (2,), 11), 4)
    chk = definetti_check(g, 2, SMALL, seed=0)
    assert chk.trace.lhs_lower_bound <= 1e-10
    assert chk.info.lhs_lower_bound <= 1e-10
    assert chk.passed


def test_check_wrappers_and_bridge():
    g = sym_state(2, 4, 12)
    chk = definetti_check(g, 2, SMALL, seed=1)
    assert chk.passed
    assert chk.trace.lhs_lower_bound**2 <= 2 * chk.trace.extras["info_at_trace_optimum"] + 1e-9
    assert chk.info.lhs_lower_bound >= chk.trace.extras["info_at_trace_optimum"]
    tr = check_trace_norm_bound(g, 2, SMALL, seed=1)
    info = check_info_bound(g, 2, SMALL, seed=1)
    assert tr.lhs_lower_bound == chk.trace.lhs_lower_bound
    assert info.lhs_lower_bound == chk.info.lhs_lower_bound
    assert info.extras["pinsker_bridge_ok"]


def test_ghz_computational_check_records_ensemble():
    chk = definetti_check(ghz_state(2, 4), 2, SMALL, ensemble="computational")
    assert np.allclose(chk.ensemble.weights, [0.5, 0.5])
    assert chk.trace.lhs_lower_bound <= 1e-12


def test_k1_uses_k2_chain():
    g = sym_state(2, 3, 13)
    chk = definetti_check(g, 1, SMALL, seed=0)
    assert chk.trace.rhs_bound == 0.0
    assert chk.ensemble.measurement.dim == 4
    assert np.max(np.abs(chk.ensemble.mixture() - g.reduced(1).data)) <= 1e-10


def test_budget_monotone_on_fixed_ensemble():
    g = sym_state(2, 4, 14)
    small = definetti_check(g, 2, Budget(2, 2, 60), seed=4, ensemble="computational")
    large = definetti_check(g, 2, Budget(5, 2, 60), seed=4, ensemble="computational")
    assert large.trace.lhs_lower_bound >= small.trace.lhs_lower_bound
    assert large.info.lhs_lower_bound >= small.info.lhs_lower_bound - 1e-15


def test_localization_full_projector():
    psi = random_symmetric_pure(2, 3, 15)
    sec = fock_localization(psi, np.eye(2))
    assert sec.weights[3] == pytest.approx(1.0, abs=1e-12)
    rho = np.outer(psi.vector, psi.vector.conj())
    assert np.max(np.abs(sec.embed(sec.sector_states[3].data, 3) - rho)) <= 1e-12


def test_localization_product_in_range():
    u = np.array([1.0, 1.0j, 0.0]) / math.sqrt(2)
    P = np.outer(u, u.conj()) + np.diag([0, 0, 1.0])
    sec = fock_localization(product_pure(u, 3), P)
    assert sec.weights[3] == pytest.approx(1.0, abs=1e-12)
    assert np.sum(sec.weights[:3]) <= 1e-12


def test_localization_occupation_oracle():
    psi = random_symmetric_pure(2, 3, 16)
    sec = fock_localization(psi, np.diag([1.0, 0.0]))
    basis = symmetric_subspace(2, 3)
    amps = basis.isometry.T @ psi.vector
    expected = np.zeros(4)
    for a, occ in zip(amps, basis.occupations):
        expected[occ[0]] += abs(a) ** 2
    assert np.max(np.abs(sec.weights - expected)) <= 1e-12
    for k in (1, 2):
        assert sec.residual(k, np.diag([1.0, 0.0])) <= 1e-10


def random_projector(d, rank, rng):
    V = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))[0][:, :rank]
    return V @ V.conj().T


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.sampled_from([3, 4, 5]), d=st.sampled_from([2, 3]))
def test_localization_identity(seed, N, d):
    rng = np.random.default_rng(seed)
    psi = random_symmetric_pure(d, N, rng)
    P = random_projector(d, int(rng.integers(1, d + 1)), rng)
    sec = fock_localization(psi, P)
    assert abs(sec.weights.sum() - 1) <= 1e-10
    assert sec.weights.min() >= -1e-12
    for k in (1, 2):
        assert sec.residual(k, P) <= 1e-10


def test_localization_rejects_non_projector():
    with pytest.raises(ValueError):
        fock_localization(random_symmetric_pure(2, 3, 0), np.diag([1.0, 0.5]))


@pytest.mark.parametrize("N", range(2, 13))
def test_weight_factor_enumeration(N):
    assert weight_factor_holds(N, 2)
    for ell in range(2, N + 1):
        assert localization_weight(N, ell, 2) / math.sqrt(ell) <= 1 / math.sqrt(N) + 1e-15


def test_projected_rank_one_degenerate():
    psi = random_symmetric_pure(2, 6, 17)
    P = random_projector(2, 1, np.random.default_rng(18))
    res = projected_definetti(psi, P, budget=SMALL)
    assert res.rhs_bound == 0.0
    assert res.lhs_lower_bound <= 1e-9
    assert res.extras["dim_P"] == 1
    assert res.passed


def test_projected_full_product():
    psi = product_pure([0.6, 0.8j], 4)
    res = projected_definetti(psi, np.eye(2), budget=SMALL)
    assert res.lhs_lower_bound <= 1e-10
    assert res.passed


def test_projected_random_passes():
    rng = np.random.default_rng(19)
    psi = random_symmetric_pure(3, 4, rng)
    res = projected_definetti(psi, random_projector(3, 2, rng), budget=SMALL, seed=2)
    assert res.passed
    assert res.extras["fitted_C"] == pytest.approx(res.lhs_lower_bound / res.extras["reference"])


def test_projected_requires_k2():
    with pytest.raises(ValueError):
        projected_definetti(random_symmetric_pure(2, 3, 0), np.eye(2), k=3)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_povm, random_unitary
from qdefinetti.core import (
    DensityMatrix,
    basis_projector,
    bell_state,
    ghz_state,
    partial_trace,
    product_state,
    random_state,
    random_symmetric_pure,
    psi_to_symmetric_state,
    tensor_product,
)
from qdefinetti.information import (
    araki_lieb_gap,
    bipartite_to_multipartite_terms,
    chain_rule_check,
    classical_relative_entropy,
    conditional_mutual_information,
    multipartite_mutual_information,
    mutual_information,
    pinsker_gap,
    relative_entropy,
    von_neumann_entropy,
)
from qdefinetti.measurements import Measurement, apply_measurement, partial_measurement, tensor_all

LN2 = math.log(2)


def diag(*p):
    return DensityMatrix(np.diag(p), (len(p),))


def test_entropy_values():
    assert von_neumann_entropy(basis_projector(3, 1)) == 0
    assert von_neumann_entropy(DensityMatrix(np.eye(2) / 2, (2,))) == pytest.approx(0.6931471805599453, abs=1e-15)
    assert von_neumann_entropy(diag(0.75, 0.25)) == pytest.approx(0.5623351446188083, abs=1e-15)


def test_entropy_of_rotated_state():
    rng = np.random.default_rng(0)
    V = random_unitary(3, rng)
    p = np.array([0.5, 0.3, 0.2])
    rho = DensityMatrix((V * p) @ V.conj().T, (3,))
    assert von_neumann_entropy(rho) == pytest.approx(-np.sum(p * np.log(p)), abs=1e-12)


def test_relative_entropy_values():
    rho = random_state("mixed-hs", (2,), 1)
    assert relative_entropy(rho, rho).value == pytest.approx(0, abs=1e-12)
    assert relative_entropy(basis_projector(2, 0), DensityMatrix(np.eye(2) / 2, (2,))).value == pytest.approx(LN2, abs=1e-15)
    val = relative_entropy(diag(0.9, 0.1), diag(0.5, 0.5)).value
    assert val == pytest.approx(0.9 * math.log(1.8) + 0.1 * math.log(0.2), abs=1e-15)
    assert val == pytest.approx(0.368064, abs=1e-6)


def test_relative_entropy_support_failure():
    rep = relative_entropy(diag(0.5, 0.5), basis_projector(2, 0))
    assert not rep.support_ok and rep.value == np.inf
    rep = relative_entropy(basis_projector(2, 0), diag(1.0, 0.0))
    assert rep.support_ok and rep.value == pytest.approx(0.0, abs=1e-12)


def test_relative_entropy_noncommuting_oracle():
    rng = np.random.default_rng(2)
    for _ in range(10):
        g, gp = random_state("mixed-hs", (3,), rng), random_state("mixed-hs", (3,), rng)
        wg, vg = np.linalg.eigh(g.data)
        wp, vp = np.linalg.eigh(gp.data)
        log_g = (vg * np.log(wg)) @ vg.conj().T
        log_p = (vp * np.log(wp)) @ vp.conj().T
        oracle = np.trace(g.data @ (log_g - log_p)).real
        assert relative_entropy(g, gp).value == pytest.approx(oracle, abs=1e-10)


def test_classical_relative_entropy():
    assert classical_relative_entropy([1, 0], [0.5, 0.5]) == pytest.approx(LN2)
    assert classical_relative_entropy([0.5, 0.5], [1, 0]) == np.inf


def test_mutual_information_examples():
    assert mutual_information(bell_state(), [[0], [1]]) == pytest.approx(2 * LN2, abs=1e-12)
    prod = tensor_product(random_state("mixed-hs", (2,), 3), random_state("mixed-hs", (3,), 4))
    assert abs(mutual_information(prod, [[0], [1]])) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_mutual_information_dual_forms(seed):
    g = random_state("mixed-hs", (2, 2), seed)
    a = mutual_information(g, [[0], [1]], method="entropy")
    b = mutual_information(g, [[0], [1]], method="relative")
    assert abs(a - b) <= 1e-10
    assert -1e-10 <= a <= 2 * LN2 + 1e-9


def test_mutual_information_cap_unequal_dims():
    rng = np.random.default_rng(5)
    for _ in range(20):
        g = random_state("pure-haar", (2, 3), rng)
        assert mutual_information(g, [[0], [1]]) <= 2 * LN2 + 1e-9


def test_multipartite_examples():
    assert multipartite_mutual_information(ghz_state(2, 3)) == pytest.approx(3 * LN2, abs=1e-12)
    assert abs(multipartite_mutual_information(product_state(random_state("mixed-hs", (2,), 6), 3))) <= 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_multipartite_telescoping(seed):
    g = random_state("mixed-hs", (2, 2, 2), seed)
    direct = multipartite_mutual_information(g)
    assert abs(sum(bipartite_to_multipartite_terms(g)) - direct) <= 1e-10
    assert abs(multipartite_mutual_information(g, method="relative") - direct) <= 1e-10


def test_cmi_product_zero():
    g = tensor_product(*(random_state("mixed-hs", (2,), s) for s in range(3)))
    assert abs(conditional_mutual_information(g, [[0], [1], [2]])) <= 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_cmi_dual_forms(seed):
    g = random_state("mixed-hs", (2, 2, 2), seed)
    a = conditional_mutual_information(g, [[0], [1], [2]])
    b = conditional_mutual_information(g, [[0], [1], [2]], method="relative")
    assert abs(a - b) <= 1e-10


def classical_register_ensemble(rng, n_out=3):
    p = rng.dirichlet(np.ones(n_out))
    blocks = [random_state("mixed-hs", (2, 2), rng) for _ in range(n_out)]
    data = np.zeros((4 * n_out, 4 * n_out), dtype=complex)
    t = data.reshape(4, n_out, 4, n_out)
    for j in range(n_out):
        t[:, j, :, j] = p[j] * blocks[j].data
    return p, blocks, DensityMatrix(t.reshape(4 * n_out, 4 * n_out), (2, 2, n_out))


def test_cmi_classical_register_identity():
    rng = np.random.default_rng(7)
    for _ in range(20):
        p, blocks, g = classical_register_ensemble(rng)
        lhs = conditional_mutual_information(g, [[0], [1], [2]])
        rhs = sum(pj * mutual_information(b, [[0], [1]]) for pj, b in zip(p, blocks))
        assert abs(lhs - rhs) <= 1e-10


def test_chain_rule_examples():
    assert chain_rule_check(product_state(random_state("mixed-hs", (2,), 8), 3), 2) <= 1e-12
    assert chain_rule_check(random_state("mixed-hs", (2, 2, 2), 9), 2) <= 1e-10
    sym = psi_to_symmetric_state(random_symmetric_pure(2, 4, 10))
    for k in (2, 3, 4):
        assert chain_rule_check(sym, k) <= 1e-10
    with pytest.raises(ValueError):
        chain_rule_check(sym, 1)


def test_pure_state_marginal_entropies_agree():
    g = random_state("pure-haar", (2, 3), 11)
    assert araki_lieb_gap(g) >= -1e-10
    s1 = von_neumann_entropy(partial_trace(g, [1]))
    s2 = von_neumann_entropy(partial_trace(g, [0]))
    assert abs(s1 - s2) <= 1e-10


def test_pinsker_values():
    rho = random_state("mixed-hs", (2,), 12)
    assert abs(pinsker_gap((rho, rho))) <= 1e-12
    gap = pinsker_gap((diag(1.0, 0.0), diag(0.5, 0.5)))
    assert gap == pytest.approx(2 * LN2 - 1, abs=1e-15)
    assert gap == pytest.approx(0.386294, abs=1e-6)
    assert pinsker_gap((diag(0.5, 0.5), diag(1.0, 0.0))) == np.inf


def test_pinsker_computational_200_seeds():
    comp = [Measurement.computational(2)]
    gaps = [
        pinsker_gap((random_state("mixed-hs", (2,), 2 * s), random_state("mixed-hs", (2,), 2 * s + 1)), comp)
        for s in range(200)
    ]
    assert min(gaps) >= -1e-9


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_ssa_and_araki_lieb(seed):
    g = random_state("mixed-hs", (2, 2, 2), seed)
    assert conditional_mutual_information(g, [[0], [1], [2]]) >= -1e-9
    assert araki_lieb_gap(partial_trace(g, [2])) >= -1e-9


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_monotone_under_local_measurements(seed):
    rng = np.random.default_rng(seed)
    g, gp = random_state("mixed-hs", (2, 2), rng), random_state("mixed-hs", (2, 2), rng)
    lam = tensor_all([random_povm(2, 3, rng), random_povm(2, 2, rng)])
    before = relative_entropy(g, gp).value
    after = relative_entropy(apply_measurement(lam, g), apply_measurement(lam, gp)).value
    assert after <= before + 1e-9


def test_local_measurement_decreases_mutual_information():
    rng = np.random.default_rng(13)
    for _ in range(20):
        g = random_state("mixed-hs", (2, 2), rng)
        measured = partial_measurement(random_povm(2, 3, rng), 1, g)
        assert mutual_information(measured, [[0], [1]]) <= mutual_information(g, [[0], [1]]) + 1e-9

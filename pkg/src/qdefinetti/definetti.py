"""Measurement-based de Finetti construction and its quantitative checks.

Party indices are 0-based. For an N-party symmetric state the first ``k``
parties are kept and parties ``k..N-1`` are measured by the ensemble
measurement. The greedy chain selects single-party measurements for the
slots ``N-1, N-2, ..., k-1`` in that order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    EQ_TOL,
    PSD_TOL,
    DensityMatrix,
    DimensionError,
    Operator,
    PureState,
    SymmetricState,
    _hermitize,
    occupation_basis,
    partial_trace,
    symmetric_subspace,
    tensor_power,
)
from .measurements import (
    Budget,
    Measurement,
    MeasurementFamily,
    measured_trace_norm,
    optimize_local_measurements,
    partial_measurement,
    tensor_all,
)

PRUNE_TOL = 1e-14
PASS_SLACK = 1e-9


@dataclass(eq=False)
class DeFinettiEnsemble:
    """Weights ``p_mu`` and conditional states of a measured symmetric state."""

    weights: np.ndarray
    one_body: list[DensityMatrix]
    k_body: list[SymmetricState]
    k: int
    measurement: Measurement | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < -1e-12) or abs(w.sum() - 1.0) > 1e-10:
            raise ValueError("ensemble weights must be a probability vector")
        self.weights = w

    def __len__(self):
        return len(self.weights)

    def mixture(self) -> np.ndarray:
        """``sum_mu p_mu Gamma_mu^(k)``."""
        return sum(p * g.data for p, g in zip(self.weights, self.k_body))


@dataclass
class BoundCheckResult:
    lhs_lower_bound: float
    rhs_bound: float
    restarts: int = 0
    evaluations: int = 0
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.lhs_lower_bound <= self.rhs_bound + PASS_SLACK)


def _conditional_blocks(gamma: np.ndarray, kept_dim: int, elements: np.ndarray) -> np.ndarray:
    """``tr_rest[(1 x M_mu) gamma]`` for every element of a measurement on the
    trailing factors. Returns shape ``(n_mu, kept_dim, kept_dim)``."""
    rest = gamma.shape[0] // kept_dim
    t = gamma.reshape(kept_dim, rest, kept_dim, rest)
    return np.einsum("mac,icja->mij", elements, t)


def decompose_by_measurement(gamma: SymmetricState, e: Measurement, k: int) -> DeFinettiEnsemble:
    """Measure parties ``k..N-1`` of ``gamma`` with ``e`` and condition on the outcome.

    Outcomes with probability below ``PRUNE_TOL`` are dropped and the
    remaining weights renormalized.
    """
    N, d = gamma.n_parties, gamma.local_dim
    if not 1 <= k < N:
        raise ValueError(f"need 1 <= k < N, got k={k}, N={N}")
    if e.dim != d ** (N - k):
        raise DimensionError(f"measurement dim {e.dim} != d^(N-k) = {d ** (N - k)}")
    blocks = _conditional_blocks(gamma.data, d**k, e.elements)
    p = np.real(np.einsum("mii->m", blocks))
    keep = p >= PRUNE_TOL
    p, blocks = p[keep], blocks[keep]
    k_body, one_body = [], []
    for pm, b in zip(p, blocks):
        st = SymmetricState(_hermitize(b / pm), (d,) * k)
        k_body.append(st)
        one_body.append(st.reduced(1) if k > 1 else st)
    one_body = [DensityMatrix(o.data, o.factor_dims) for o in one_body]
    return DeFinettiEnsemble(p / p.sum(), one_body, k_body, k, e)


def product_measurement(lambdas: Sequence[Measurement]) -> Measurement:
    return tensor_all(list(lambdas))


def trivial_ensemble(gamma: SymmetricState, k: int) -> DeFinettiEnsemble:
    """The one-outcome ensemble ``{(1, gamma^(1))}`` (nothing measured)."""
    gk = gamma.reduced(k)
    g1 = gamma.reduced(1)
    return DeFinettiEnsemble(np.ones(1), [DensityMatrix(g1.data, g1.factor_dims)], [gk], k)


def build_tilde(ens: DeFinettiEnsemble, k: int) -> SymmetricState:
    """``sum_mu p_mu (Gamma_mu^(1))^{x k}``."""
    if k < 1:
        raise ValueError("k >= 1 required")
    acc = sum(p * tensor_power(g, k).data for p, g in zip(ens.weights, ens.one_body))
    d = ens.one_body[0].dim
    return SymmetricState(_hermitize(acc), (d,) * k)


# -- greedy measurement chain ---------------------------------------------------


def _unnormalized_entropy(blocks: np.ndarray) -> np.ndarray:
    """``p S(sigma / p)`` for a stack of positive blocks of trace ``p``."""
    if blocks.shape[-1] == 2:
        a = blocks[..., 0, 0].real
        b = blocks[..., 1, 1].real
        half = 0.5 * (a + b)
        rad = np.sqrt(0.25 * (a - b) ** 2 + np.abs(blocks[..., 0, 1]) ** 2)
        lam = np.stack([half - rad, half + rad], axis=-1)
    else:
        lam = np.linalg.eigvalsh(blocks)
    lam = np.clip(lam, 0.0, None)
    p = lam.sum(axis=-1)
    return p * np.log(np.maximum(p, 1e-300)) - np.sum(lam * np.log(np.maximum(lam, 1e-300)), axis=-1)


class _ChainTerm:
    """``I(A : B | C)`` for ``B`` measured by a candidate and ``C`` already measured.

    ``A`` is the first ``n_a`` parties of ``gamma``, ``B`` the next one and
    ``C`` the remaining parties measured with ``c_measurement`` (or absent).
    """

    def __init__(self, gamma: np.ndarray, d: int, n_a: int, c_measurement: Measurement | None):
        self.d = d
        self.da = d**n_a
        dab = self.da * d
        if c_measurement is None:
            blocks = gamma.reshape(1, dab, dab)
        else:
            blocks = _conditional_blocks(gamma, dab, c_measurement.elements)
        self.blocks = blocks.reshape(-1, self.da, d, self.da, d)
        a_blocks = np.einsum("cxuyu->cxy", self.blocks)
        self.base = float(np.sum(_unnormalized_entropy(a_blocks)))

    def __call__(self, lambdas: Sequence[Measurement]) -> float:
        M = lambdas[0].elements
        sig = np.einsum("buw,cxwyu->cbxy", M, self.blocks)
        sig = 0.5 * (sig + np.conj(np.swapaxes(sig, -1, -2)))
        return self.base - float(np.sum(_unnormalized_entropy(sig)))


@dataclass
class GreedyChain:
    """Greedily chosen measurements ``slot -> Measurement`` (slots ``N-1`` down
    to ``k-1``) and the conditional information term realized at each slot."""

    k: int
    n_parties: int
    measurements: dict[int, Measurement]
    terms: dict[int, float]
    evaluations: int = 0

    @property
    def total(self) -> float:
        return float(sum(self.terms.values()))

    def ordered(self) -> list[Measurement]:
        """Measurements for slots ``k-1 .. N-1`` in party order."""
        return [self.measurements[s] for s in range(self.k - 1, self.n_parties)]


def greedy_measurement_chain(
    gamma: SymmetricState,
    k: int,
    family: MeasurementFamily | None = None,
    seed: int = 0,
    budget: Budget | None = None,
) -> GreedyChain:
    """Pick ``Lambda_{N-1}`` to maximize the last chain-rule term, then
    ``Lambda_{N-2}`` given it, and so on down to slot ``k-1``.

    The term for slot ``s`` is ``I(0..k-2 : s | s+1..N-1)`` of the state with
    parties ``s..N-1`` measured. By permutation symmetry it is evaluated on
    the reduced state of the first ``k-1 + N-s`` parties.
    """
    N, d = gamma.n_parties, gamma.local_dim
    if not 2 <= k <= N:
        raise ValueError(f"need 2 <= k <= N, got k={k}, N={N}")
    family = family or MeasurementFamily("projective-unitary", d)
    budget = budget or Budget()
    chosen: dict[int, Measurement] = {}
    terms: dict[int, float] = {}
    n_eval = 0
    for s in range(N - 1, k - 2, -1):
        m = k - 1 + N - s
        red = gamma.reduced(m).data
        later = [chosen[t] for t in range(s + 1, N)]
        cmeas = tensor_all(later) if later else None
        term = _ChainTerm(red, d, k - 1, cmeas)
        res = optimize_local_measurements(term, family, k=1, seed=seed * 1009 + s, budget=budget)
        chosen[s] = res.measurements[0]
        terms[s] = res.value
        n_eval += res.evaluations
    return GreedyChain(k, N, chosen, terms, n_eval)


def chain_measured_state(gamma: SymmetricState, chain: GreedyChain) -> Operator:
    """``1^{k-1} x Lambda_{k-1} x ... x Lambda_{N-1}`` applied to ``gamma``."""
    out: Operator = gamma
    for s in range(chain.k - 1, chain.n_parties):
        out = partial_measurement(chain.measurements[s], s, out)
    return out


def ensemble_measurement_from_chain(chain: GreedyChain, slot: int) -> Measurement:
    """Measurement on parties ``k..N-1`` associated with a chain term.

    Slot ``s`` measures ``N-1-s`` parties with ``Lambda_{s+1..N-1}`` and traces
    out the remaining ``s-k+1`` parties.
    """
    k, N = chain.k, chain.n_parties
    d = chain.measurements[slot].dim
    parts = [Measurement.trivial(d)] * (slot - k + 1) + [chain.measurements[t] for t in range(slot + 1, N)]
    return tensor_all(parts)


# -- bound checks -----------------------------------------------------------


def trace_norm_rhs(d: int, N: int, k: int) -> float:
    return math.sqrt(2 * (k - 1) ** 2 * math.log(d) / (N - k + 1))


def info_rhs(d: int, N: int, k: int) -> float:
    return (k - 1) ** 2 * math.log(d) / (N - k + 1)


def reference_rhs(d: int, N: int, k: int) -> float:
    """The squared-norm curve ``2 k^2 ln d / (N - k)`` of the inf-sup form."""
    return 2 * k**2 * math.log(d) / (N - k) if N > k else math.inf


def _product_elements(lambdas: Sequence[Measurement]) -> np.ndarray:
    return tensor_all(list(lambdas)).elements


class _MeasuredEnsemble:
    """Fast evaluation of measured quantities of an ensemble under ``L_k``."""

    def __init__(self, ens: DeFinettiEnsemble, gamma_k: np.ndarray):
        self.weights = ens.weights
        self.k = ens.k
        self.kstack = np.stack([g.data for g in ens.k_body])
        self.ostack = np.stack([g.data for g in ens.one_body])
        tilde = sum(p * tensor_power(g, ens.k).data for p, g in zip(ens.weights, ens.one_body))
        self.delta = gamma_k - tilde

    def trace_objective(self, lambdas: Sequence[Measurement]) -> float:
        els = _product_elements(lambdas)
        p = np.einsum("oba,ab->o", els, self.delta).real
        return float(np.sum(np.abs(p)))

    def info_objective(self, lambdas: Sequence[Measurement]) -> float:
        """``sum_mu p_mu H(L Gamma_mu^(k), L (Gamma_mu^(1))^{x k})``."""
        els = _product_elements(lambdas)
        P = np.einsum("oba,nab->no", els, self.kstack).real
        Q = None
        for lam in lambdas:
            q = np.einsum("oba,nab->no", lam.elements, self.ostack).real
            Q = q if Q is None else (Q[:, :, None] * q[:, None, :]).reshape(q.shape[0], -1)
        P = np.clip(P, 0.0, None)
        Q = np.clip(Q, 0.0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(P > 0, P * (np.log(np.where(P > 0, P, 1.0)) - np.log(np.where(Q > 0, Q, 1.0))), 0.0)
        if np.any((P > 1e-10) & (Q < 1e-12)):
            return math.inf
        return float(np.sum(self.weights * np.clip(terms.sum(axis=1), 0.0, None)))


@dataclass
class DeFinettiCheck:
    """Both bound checks evaluated on one ensemble and shared measurements."""

    trace: BoundCheckResult
    info: BoundCheckResult
    ensemble: DeFinettiEnsemble
    chain: GreedyChain | None
    selected_slot: int | None
    pinsker_bridge_ok: bool

    @property
    def passed(self) -> bool:
        return self.trace.passed and self.info.passed and self.pinsker_bridge_ok


def _select_ensemble(gamma: SymmetricState, k: int, family, seed, budget, ensemble: str):
    N = gamma.n_parties
    if ensemble == "computational":
        e = tensor_all([Measurement.computational(gamma.local_dim)] * (N - k))
        return decompose_by_measurement(gamma, e, k), None, None
    if ensemble != "greedy":
        raise ValueError(f"unknown ensemble construction {ensemble!r}")
    if k == 1:
        # the chain needs k >= 2; condition on the full greedy chain for k = 2
        chain = greedy_measurement_chain(gamma, 2, family, seed, budget)
        e = tensor_all([chain.measurements[t] for t in range(1, N)])
        return decompose_by_measurement(gamma, e, 1), chain, 0
    chain = greedy_measurement_chain(gamma, k, family, seed, budget)
    slot = min(chain.terms, key=lambda s: (chain.terms[s], s))
    if slot == N - 1 and k < N:
        # nothing measured: every party beyond k is traced out
        e = tensor_all([Measurement.trivial(gamma.local_dim)] * (N - k))
    else:
        e = ensemble_measurement_from_chain(chain, slot)
    return decompose_by_measurement(gamma, e, k), chain, slot


def definetti_check(
    gamma: SymmetricState,
    k: int,
    budget: Budget | None = None,
    seed: int = 0,
    family: MeasurementFamily | None = None,
    ensemble: str = "greedy",
) -> DeFinettiCheck:
    """Build the ensemble and lower-bound both sides' suprema over ``L_k``.

    The ensemble measurement is the tensorized greedy measurement of the chain
    slot with the smallest conditional information term (``ensemble="greedy"``)
    or the computational basis on every measured party.
    """
    N, d = gamma.n_parties, gamma.local_dim
    if not 1 <= k < N:
        raise ValueError(f"need 1 <= k < N, got k={k}, N={N}")
    budget = budget or Budget()
    family = family or MeasurementFamily("projective-unitary", d)
    ens, chain, slot = _select_ensemble(gamma, k, family, seed, budget, ensemble)
    me = _MeasuredEnsemble(ens, gamma.reduced(k).data)

    tr = optimize_local_measurements(me.trace_objective, family, k=k, seed=seed * 7919 + 1, budget=budget)
    inf = optimize_local_measurements(me.info_objective, family, k=k, seed=seed * 7919 + 2, budget=budget)
    info_at_trace = me.info_objective(tr.measurements)
    info_lhs = max(inf.value, info_at_trace)
    bridge = tr.value**2 <= 2 * info_at_trace + PASS_SLACK

    chain_evals = chain.evaluations if chain else 0
    common = {
        "ensemble_size": len(ens),
        "ensemble_weights": ens.weights.tolist(),
        "selected_slot": slot,
        "chain_terms": {int(s): float(v) for s, v in chain.terms.items()} if chain else {},
    }
    trace_res = BoundCheckResult(
        tr.value,
        trace_norm_rhs(d, N, k),
        tr.restarts,
        tr.evaluations + chain_evals,
        {**common, "reference_rhs_squared": reference_rhs(d, N, k), "info_at_trace_optimum": info_at_trace},
    )
    info_res = BoundCheckResult(info_lhs, info_rhs(d, N, k), inf.restarts, inf.evaluations + chain_evals, dict(common))
    return DeFinettiCheck(trace_res, info_res, ens, chain, slot, bool(bridge))


def check_trace_norm_bound(gamma: SymmetricState, k: int, budget: Budget | None = None, seed: int = 0, **kw) -> BoundCheckResult:
    return definetti_check(gamma, k, budget, seed, **kw).trace


def check_info_bound(gamma: SymmetricState, k: int, budget: Budget | None = None, seed: int = 0, **kw) -> BoundCheckResult:
    chk = definetti_check(gamma, k, budget, seed, **kw)
    res = chk.info
    res.extras["pinsker_bridge_ok"] = chk.pinsker_bridge_ok
    res.extras["trace_lhs"] = chk.trace.lhs_lower_bound
    return res


# -- Fock localization -----------------------------------------------------


def localization_weight(N: int, ell: int, k: int) -> float:
    """``C(N, k)^{-1} C(ell, k)``."""
    return math.comb(ell, k) / math.comb(N, k)


def _is_projector(P: np.ndarray) -> bool:
    return (
        np.max(np.abs(P - P.conj().T)) <= PSD_TOL
        and np.max(np.abs(P @ P - P)) <= PSD_TOL
    )


def _occ_index(occ: np.ndarray) -> dict:
    return {tuple(r): i for i, r in enumerate(occ)}


def _occupations(modes: int, n: int) -> np.ndarray:
    if modes == 0:
        return np.zeros((1 if n == 0 else 0, 0), dtype=np.int64)
    return occupation_basis(modes, n)


@dataclass(eq=False)
class LocalizationSectors:
    """Sector weights ``c_l`` and ``l``-particle states on the range of ``P``.

    ``sector_states[l]`` is a symmetric state on ``(C^r)^{x l}`` written in the
    orthonormal basis ``range_basis`` (columns, ``d x r``) of ``P``.
    """

    weights: np.ndarray
    sector_states: dict[int, SymmetricState]
    range_basis: np.ndarray
    n_particles: int
    psi: PureState

    @property
    def rank(self) -> int:
        return self.range_basis.shape[1]

    def embed(self, x: np.ndarray, k: int) -> np.ndarray:
        V = self.range_basis
        Vk = V
        for _ in range(k - 1):
            Vk = np.kron(Vk, V)
        return Vk @ x @ Vk.conj().T

    def sector_rdm(self, ell: int, k: int) -> np.ndarray:
        st = self.sector_states[ell]
        red = st.reduced(k) if k < ell else st
        return red.data

    def localized_rdm(self, k: int) -> np.ndarray:
        """``sum_{l >= k} c_l C(N,k)^{-1} C(l,k) (Gamma_l)^(k)`` embedded in ``(C^d)^{x k}``."""
        d = self.range_basis.shape[0]
        acc = np.zeros((d**k, d**k), dtype=complex)
        for ell, st in self.sector_states.items():
            if ell < k or self.weights[ell] <= 0:
                continue
            acc += self.weights[ell] * localization_weight(self.n_particles, ell, k) * self.embed(self.sector_rdm(ell, k), k)
        return acc

    def projected_rdm(self, k: int, p: np.ndarray) -> np.ndarray:
        """``P^{x k} gamma_N^(k) P^{x k}`` computed directly from ``psi``."""
        rho = Operator(np.outer(self.psi.vector, self.psi.vector.conj()), self.psi.factor_dims)
        N = self.n_particles
        g = partial_trace(rho, range(k, N)).data if k < N else rho.data
        Pk = p
        for _ in range(k - 1):
            Pk = np.kron(Pk, p)
        return Pk @ g @ Pk

    def residual(self, k: int, p: np.ndarray) -> float:
        return float(np.max(np.abs(self.projected_rdm(k, p) - self.localized_rdm(k))))


def fock_localization(psi: PureState, p: Operator | np.ndarray) -> LocalizationSectors:
    """Split a bosonic ``N``-particle vector by the number of particles in ``range(P)``."""
    P = p.data if isinstance(p, Operator) else np.asarray(p, dtype=complex)
    if not _is_projector(P):
        raise ValueError("P is not an orthogonal projector")
    dims = psi.factor_dims
    d, N = dims[0], len(dims)
    if P.shape != (d, d):
        raise DimensionError("projector does not act on the one-body space")
    ev, V = np.linalg.eigh(0.5 * (P + P.conj().T))
    order = np.argsort(-ev, kind="stable")
    U = V[:, order]
    r = int(round(float(np.sum(ev))))
    VP = U[:, :r]

    t = psi.vector.reshape(dims)
    Ud = U.conj().T
    for ax in range(N):
        t = np.moveaxis(np.tensordot(Ud, t, axes=([1], [ax])), 0, ax)
    basis = symmetric_subspace(d, N)
    amps = basis.isometry.T @ t.reshape(-1)
    if abs(np.linalg.norm(amps) - 1.0) > 1e-10:
        raise ValueError("psi is not in the symmetric subspace")

    weights = np.zeros(N + 1)
    states: dict[int, SymmetricState] = {}
    for ell in range(N + 1):
        occ_p = _occupations(r, ell)
        occ_q = _occupations(d - r, N - ell)
        if len(occ_p) == 0 or len(occ_q) == 0:
            continue
        ip, iq = _occ_index(occ_p), _occ_index(occ_q)
        M = np.zeros((len(occ_p), len(occ_q)), dtype=complex)
        for amp, occ in zip(amps, basis.occupations):
            if occ[:r].sum() == ell:
                M[ip[tuple(occ[:r])], iq[tuple(occ[r:])]] = amp
        G = M @ M.conj().T
        c = float(np.trace(G).real)
        weights[ell] = c
        if ell >= 1 and c > PRUNE_TOL:
            W = symmetric_subspace(r, ell).isometry
            full = W @ (G / c) @ W.T
            states[ell] = SymmetricState(_hermitize(full), (r,) * ell)
    return LocalizationSectors(weights, states, VP, N, psi)


def weight_factor_holds(N: int, k: int = 2) -> bool:
    """``(1/sqrt(l)) C(N,k)^{-1} C(l,k) <= 1/sqrt(N)`` for all ``k <= l <= N``."""
    return all(localization_weight(N, ell, k) / math.sqrt(ell) <= 1 / math.sqrt(N) + 1e-15 for ell in range(k, N + 1))


def projected_definetti(
    psi: PureState,
    p: Operator | np.ndarray,
    k: int = 2,
    budget: Budget | None = None,
    seed: int = 0,
) -> BoundCheckResult:
    """Localized de Finetti check for ``P^{x2} gamma^(2) P^{x2}``.

    Each sector ``l >= 2`` is approximated by its own de Finetti ensemble; the
    sector mixtures are combined with the localization weights. The left side
    is a lower bound on ``sup_{0<=A,B<=1} |tr[(A x B) T]|`` found through the
    two-outcome embedding. ``rhs_bound`` is the sum of the per-sector
    two-party bounds; ``extras["reference"]`` is ``sqrt(ln dim P / N)`` and
    ``extras["fitted_C"]`` the ratio of the left side to it.
    """
    if k != 2:
        raise ValueError("projected de Finetti is stated for k = 2")
    P = p.data if isinstance(p, Operator) else np.asarray(p, dtype=complex)
    sectors = fock_localization(psi, P)
    r = sectors.rank
    if r < 1:
        raise ValueError("dim(P) must be >= 1")
    N = sectors.n_particles
    d = P.shape[0]
    budget = budget or Budget()

    approx = np.zeros((d * d, d * d), dtype=complex)
    rhs = 0.0
    for ell, st in sorted(sectors.sector_states.items()):
        if ell < 2:
            continue
        c = sectors.weights[ell]
        if r == 1 or ell == 2:
            ens = trivial_ensemble(st, 2)
        else:
            ens = definetti_check(st, 2, budget, seed * 31 + ell).ensemble
        tilde = build_tilde(ens, 2).data
        approx += c * localization_weight(N, ell, 2) * sectors.embed(tilde, 2)
        rhs += c * localization_weight(N, ell, 2) * math.sqrt(2 * math.log(r) / (ell - 1))
    target = sectors.projected_rdm(2, P) - approx

    fam = MeasurementFamily("two-outcome-operator", d)

    def objective(lams):
        els = np.einsum("ab,cd->acbd", lams[0].elements[0], lams[1].elements[0]).reshape(d * d, d * d)
        return abs(np.einsum("ba,ab->", els, target))

    res = optimize_local_measurements(objective, fam, k=2, seed=seed, budget=budget)
    two_outcome_norm = measured_trace_norm(res.measurements, Operator(target, (d, d)))
    reference = math.sqrt(math.log(r) / N)
    extras = {
        "dim_P": r,
        "reference": reference,
        "fitted_C": res.value / reference if reference > 0 else None,
        "two_outcome_trace_norm": two_outcome_norm,
        "sector_weights": sectors.weights.tolist(),
    }
    return BoundCheckResult(res.value, rhs, res.restarts, res.evaluations, extras)

"""Operator-inequality, Fourier, stability and convergence checks on lattice models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..core import DIM_CAP, DimensionError, rng_for
from .functionals import hartree_energy, hartree_minimize, nls_minimize
from .lattice import LatticeModel, build_one_body, lattice_coupling, scaled_interaction, spectral_projector
from .nbody import build_n_body, ground_state

EVEN_TOL = 1e-12
GAP_TOL = 1e-9


# -- Fourier pair decomposition ---------------------------------------------


@dataclass
class FourierTerm:
    momentum: np.ndarray
    weight: float
    cos_pos: np.ndarray
    cos_neg: np.ndarray
    sin_pos: np.ndarray
    sin_neg: np.ndarray


@dataclass
class FourierDecomposition:
    terms: list[FourierTerm]
    l1_weight: float
    residual: float
    max_factor_norm: float

    def reconstruct(self) -> np.ndarray:
        """``sum_p w(p) sum_{i,j=+-} s_i s_j (c^i x c^j + s^i x s^j)``; the
        signs ``s_+ = 1, s_- = -1`` come from ``c = c^+ - c^-``."""
        n = len(self.terms[0].cos_pos)
        acc = np.zeros(n * n)
        for t in self.terms:
            parts_c = ((t.cos_pos, 1.0), (t.cos_neg, -1.0))
            parts_s = ((t.sin_pos, 1.0), (t.sin_neg, -1.0))
            for (a, sa) in parts_c:
                for (b, sb) in parts_c:
                    acc += t.weight * sa * sb * np.kron(a, b)
            for (a, sa) in parts_s:
                for (b, sb) in parts_s:
                    acc += t.weight * sa * sb * np.kron(a, b)
        return acc


def fourier_pair_decomposition(model: LatticeModel, wmat: np.ndarray | None = None) -> FourierDecomposition:
    """Split the periodic pair operator ``W(x - y)`` into products of bounded
    one-body multiplication operators.

    ``w(p) = L^{-d} sum_n W(n) e^{-i p.n}`` over the minimal-image offsets and
    ``W(x - y) = sum_p w(p) [cos(p.x) cos(p.y) + sin(p.x) sin(p.y)]``.
    Diagonals are returned as vectors.
    """
    if model.boundary != "periodic":
        raise ValueError("Fourier decomposition needs a periodic lattice")
    W = scaled_interaction(model).matrix if wmat is None else np.asarray(wmat, dtype=float)
    if np.max(np.abs(W - W.T)) > EVEN_TOL:
        raise ValueError("pair potential is not even")
    L, d = model.L, model.space_dim
    ints = model.integer_sites()
    # W(n) = W[n, 0] by translation invariance
    col = W[:, 0]
    grid = col.reshape((L,) * d)
    if d == 1:
        even = grid - grid[(-np.arange(L)) % L]
    else:
        even = grid - grid[np.ix_((-np.arange(L)) % L, (-np.arange(L)) % L)]
    if np.max(np.abs(even)) > EVEN_TOL:
        raise ValueError("pair potential is not even")
    what = np.fft.fftn(grid).real / L**d
    ks = ints
    terms = []
    for kvec in ks:
        p = 2 * np.pi * kvec / L
        wp = float(what[tuple(kvec)])
        phase = ints @ p
        c, s = np.cos(phase), np.sin(phase)
        terms.append(FourierTerm(p, wp, np.maximum(c, 0), np.maximum(-c, 0), np.maximum(s, 0), np.maximum(-s, 0)))
    dec = FourierDecomposition(terms, float(np.sum(np.abs(what))), 0.0, 0.0)
    target = W.ravel()
    dec.residual = float(np.max(np.abs(dec.reconstruct() - target)))
    dec.max_factor_norm = max(
        float(np.max(np.abs(np.concatenate([t.cos_pos, t.cos_neg, t.sin_pos, t.sin_neg])))) for t in terms
    )
    return dec


# -- localized two-body Hamiltonian ---------------------------------------


@dataclass
class H2GapScan:
    epsilon: float
    constants: list[float]
    cutoffs: list[float]
    min_eigenvalues: list[float]
    ranks: list[int]
    smallest_passing_C: float | None

    @property
    def passed(self) -> bool:
        return self.smallest_passing_C is not None


def h2_difference(h: np.ndarray, W: np.ndarray, epsilon: float, cutoff: float) -> tuple[np.ndarray, int]:
    """``H_2 - P^{x2} H_2^eps P^{x2} - (Lambda/2)(Q x 1 + 1 x Q)`` with
    ``H_2^eps = H_2 - eps |W|``."""
    n = h.shape[0]
    I = np.eye(n)
    P, rank = spectral_projector(h, cutoff)
    Q = I - P
    Wd = np.diag(W.ravel())
    H2 = np.kron(h, I) + np.kron(I, h) + Wd
    H2e = H2 - epsilon * np.abs(Wd)
    PP = np.kron(P, P)
    D = H2 - PP @ H2e @ PP - 0.5 * cutoff * (np.kron(Q, I) + np.kron(I, Q))
    return 0.5 * (D + D.conj().T), rank


def localized_h2_gap(
    model: LatticeModel,
    epsilon: float = 0.5,
    cutoff: float | None = None,
    constants=(1, 2, 4, 8, 16, 32, 64),
    cap: int = 4096,
) -> H2GapScan:
    """Minimum eigenvalue of the localization difference matrix.

    With ``cutoff=None`` the cutoff is ``Lambda = C eps^{-1} N^{d beta} sup|w|``
    for each scanned ``C``; an explicit cutoff is evaluated once (``C`` is then
    reported as ``nan``).
    """
    if not 0 < epsilon < 1:
        raise ValueError("need 0 < epsilon < 1")
    n = model.n_sites
    if n * n > cap:
        raise DimensionError(f"two-body dimension {n * n} exceeds cap {cap}")
    h = build_one_body(model).data
    W = scaled_interaction(model).matrix
    scale = model.N ** (model.space_dim * model.beta) * float(np.max(np.abs(model.interaction(
        np.zeros((1, model.space_dim)), model.spacing, model.space_dim))))
    if cutoff is not None:
        cs, lams = [math.nan], [float(cutoff)]
    else:
        cs = [float(c) for c in constants]
        lams = [c * scale / epsilon for c in cs]
    mins, ranks = [], []
    passing = None
    for c, lam in zip(cs, lams):
        D, rank = h2_difference(h, W, epsilon, lam)
        m = float(np.linalg.eigvalsh(D)[0])
        mins.append(m)
        ranks.append(rank)
        if passing is None and m >= -GAP_TOL:
            passing = c
    return H2GapScan(epsilon, cs, lams, mins, ranks, passing)


# -- stability of one-body functionals ---------------------------------


def random_one_body_state(n: int, rank: int, rng: np.random.Generator, smooth: np.ndarray | None = None) -> np.ndarray:
    """Random mixed one-body state of the given rank; with ``smooth`` (a
    matrix of low-lying modes as columns) the state is drawn inside their span."""
    basis = np.eye(n) if smooth is None else smooth
    m = basis.shape[1]
    G = rng.normal(size=(m, rank)) + 1j * rng.normal(size=(m, rank))
    X = basis @ G
    g = X @ X.conj().T
    return g / np.trace(g).real


@dataclass
class StabilityFit:
    N: int
    constant: float
    ratios: list[float]


def stability_constant(model: LatticeModel, states: list[np.ndarray]) -> StabilityFit:
    """Fitted ``C = max |E^H - E^{nls,m}| / (N^{-beta} (1 + tr h gamma)^2)``."""
    h = build_one_body(model).data
    W = scaled_interaction(model).matrix
    a = lattice_coupling(model)
    ratios = []
    for g in states:
        e = hartree_energy(g, h, W, a, model.spacing, model.space_dim)
        ratios.append(abs(e.hartree - e.nls_mixed) / (model.N ** (-model.beta) * (1 + e.kinetic_trace) ** 2))
    return StabilityFit(model.N, float(max(ratios)), ratios)


def stability_states(model: LatticeModel, count: int, seed: int, n_modes: int = 4, max_rank: int = 3) -> list[np.ndarray]:
    h = build_one_body(model).data
    _, V = np.linalg.eigh(h)
    out = []
    for i in range(count):
        rng = rng_for(seed, i)
        out.append(random_one_body_state(h.shape[0], 1 + i % max_rank, rng, V[:, :n_modes]))
    return out


# -- convergence sweep ----------------------------------------------------


@dataclass
class SweepRow:
    N: int
    energy_per_particle: float
    hartree_energy: float
    nls_energy: float
    condensate_fraction: float
    trace_distance: float
    gap: float
    upper_bound_ok: bool
    energy_identity_residual: float
    rdm_consistency: float
    monotone_gap: bool = True

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ConvergenceSweep:
    rows: list[SweepRow]
    lambda_min: float
    a: float
    monotone_violations: int = 0
    extras: dict = field(default_factory=dict)


def convergence_sweep(model: LatticeModel, N_values, tol: float = 1e-9, cap: int = DIM_CAP) -> ConvergenceSweep:
    """Exact ground states, Hartree and NLS minima for each ``N``."""
    h = build_one_body(model).data
    lam_min = float(np.linalg.eigvalsh(h)[0])
    a = lattice_coupling(model)
    nls = nls_minimize(h, a, model.spacing, model.space_dim)
    u = nls.vector
    proj_u = np.outer(u, u.conj())
    rows = []
    for N in N_values:
        m = model.with_N(int(N))
        W = scaled_interaction(m).matrix
        Hn, basis = build_n_body(h, W, m.N, cap)
        gs = ground_state(Hn, basis, tol)
        hart = hartree_minimize(h, W)
        td = 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(gs.rdm1.data - proj_u))))
        L = h.shape[0]
        rdm_cons = float(np.max(np.abs(np.einsum("ikjk->ij", gs.rdm2.data.reshape(L, L, L, L)) - gs.rdm1.data)))
        rows.append(
            SweepRow(
                N=m.N,
                energy_per_particle=gs.per_particle,
                hartree_energy=hart.energy,
                nls_energy=nls.energy,
                condensate_fraction=gs.condensate_fraction,
                trace_distance=td,
                gap=abs(gs.per_particle - nls.energy),
                upper_bound_ok=bool(gs.per_particle <= hart.energy + 1e-9),
                energy_identity_residual=gs.energy_identity_residual(h, W),
                rdm_consistency=rdm_cons,
            )
        )
    violations = 0
    for prev, row in zip(rows, rows[1:]):
        if row.gap > prev.gap:
            row.monotone_gap = False
            violations += 1
    return ConvergenceSweep(rows, lam_min, a, violations)

"""Second-quantized bosonic N-body Hamiltonian on the occupation basis and
its ground state."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from ..core import DIM_CAP, DensityMatrix, DimensionError, Operator, occupation_basis

DENSE_LIMIT = 600


class ConvergenceError(RuntimeError):
    """An iterative solver missed its tolerance."""


@lru_cache(maxsize=None)
def _binom_table(n: int, k: int) -> np.ndarray:
    t = np.zeros((n + 1, k + 1), dtype=np.int64)
    for a in range(n + 1):
        for b in range(min(a, k) + 1):
            t[a, b] = math.comb(a, b)
    return t


def _mode_lists(occ: np.ndarray, n: int) -> np.ndarray:
    """Sorted mode index of each particle, shape ``(rows, n)``."""
    cs = np.cumsum(occ, axis=1)
    return (cs[:, :, None] <= np.arange(n)[None, None, :]).sum(axis=1)


def occupation_ranks(occ: np.ndarray) -> np.ndarray:
    """Perfect hash of occupation rows (combinadic rank of the multiset)."""
    occ = np.atleast_2d(occ)
    n = int(occ[0].sum()) if len(occ) else 0
    if n == 0:
        return np.zeros(len(occ), dtype=np.int64)
    L = occ.shape[1]
    y = _mode_lists(occ, n) + np.arange(n)
    table = _binom_table(L + n - 1, n)
    return table[y, np.arange(1, n + 1)].sum(axis=1)


@dataclass(frozen=True)
class FockBasis:
    """Occupation basis with rank lookup."""

    n_modes: int
    n_particles: int
    occupations: np.ndarray
    lookup: np.ndarray

    @classmethod
    def build(cls, n_modes: int, n_particles: int, cap: int = DIM_CAP) -> "FockBasis":
        if n_particles == 0:
            occ = np.zeros((1, n_modes), dtype=np.int64)
        else:
            occ = occupation_basis(n_modes, n_particles, cap)
        ranks = occupation_ranks(occ)
        lookup = np.empty(len(occ), dtype=np.int64)
        lookup[ranks] = np.arange(len(occ))
        return cls(n_modes, n_particles, occ, lookup)

    @property
    def dim(self) -> int:
        return len(self.occupations)

    def index(self, occ: np.ndarray) -> np.ndarray:
        return self.lookup[occupation_ranks(occ)]


def annihilation(basis: FockBasis, lower: FockBasis, p: int) -> sp.csr_matrix:
    """``a_p`` from the ``n``-particle to the ``n-1``-particle space."""
    occ = basis.occupations
    rows = np.nonzero(occ[:, p] > 0)[0]
    new = occ[rows].copy()
    new[:, p] -= 1
    amp = np.sqrt(occ[rows, p].astype(float))
    return sp.csr_matrix((amp, (lower.index(new), rows)), shape=(lower.dim, basis.dim))


def build_n_body(h: Operator | np.ndarray, wmat: np.ndarray, N: int, cap: int = DIM_CAP):
    """``sum_pq h_pq a_p^+ a_q + 1/(2(N-1)) sum_{x,y} W_xy a_x^+ a_y^+ a_y a_x``.

    Returns ``(H, basis)`` with ``H`` a sparse Hermitian CSR matrix.
    """
    H1 = h.data if isinstance(h, Operator) else np.asarray(h)
    L = H1.shape[0]
    if math.comb(N + L - 1, N) > cap:
        raise DimensionError(f"symmetric dimension C({N + L - 1},{N}) exceeds cap {cap}")
    basis = FockBasis.build(L, N, cap)
    occ = basis.occupations.astype(float)
    W = np.asarray(wmat, dtype=float)
    diag = occ @ np.real(np.diag(H1))
    # occupation form of the pair term: n.W.n - sum_x W_xx n_x
    inter = (np.einsum("sx,xy,sy->s", occ, W, occ) - occ @ np.diag(W)) / (2 * (N - 1))
    rows, cols, vals = [np.arange(basis.dim)], [np.arange(basis.dim)], [diag + inter]
    pq = np.argwhere(np.abs(H1 - np.diag(np.diag(H1))) > 0)
    iocc = basis.occupations
    for p, q in pq:
        src = np.nonzero(iocc[:, q] > 0)[0]
        new = iocc[src].copy()
        amp = np.sqrt(new[:, q] * (new[:, p] + 1.0))
        new[:, q] -= 1
        new[:, p] += 1
        rows.append(basis.index(new))
        cols.append(src)
        vals.append(H1[p, q] * amp)
    data = np.concatenate([np.asarray(v, dtype=complex) for v in vals])
    if not np.any(data.imag):
        data = data.real
    Hn = sp.csr_matrix((data, (np.concatenate(rows), np.concatenate(cols))), shape=(basis.dim, basis.dim))
    return Hn, basis


@dataclass
class GroundStateReport:
    E_N: float
    per_particle: float
    rdm1: DensityMatrix
    rdm2: DensityMatrix
    condensate_fraction: float
    residual: float
    vector: np.ndarray

    def energy_identity_residual(self, h: np.ndarray, wmat: np.ndarray) -> float:
        """``|E/N - tr(H_2 gamma^(2))/2|`` with ``H_2 = h x 1 + 1 x h + W``."""
        L = h.shape[0]
        I = np.eye(L)
        H2 = np.kron(h, I) + np.kron(I, h) + np.diag(np.asarray(wmat, dtype=float).ravel())
        return abs(self.per_particle - 0.5 * float(np.real(np.trace(H2 @ self.rdm2.data))))


def _rdms(psi: np.ndarray, basis: FockBasis):
    N, L = basis.n_particles, basis.n_modes
    b1 = FockBasis.build(L, N - 1)
    A = [annihilation(basis, b1, p) for p in range(L)]
    phi1 = np.stack([a @ psi for a in A])
    g1 = phi1 @ phi1.conj().T / N
    b2 = FockBasis.build(L, N - 2)
    A2 = [annihilation(b1, b2, q) for q in range(L)]
    phi2 = np.empty((L * L, b2.dim), dtype=complex)
    for p in range(L):
        for q in range(L):
            phi2[p * L + q] = A2[q] @ phi1[p]
    g2 = phi2 @ phi2.conj().T / (N * (N - 1))
    g1 = 0.5 * (g1 + g1.conj().T)
    g2 = 0.5 * (g2 + g2.conj().T)
    g1 /= np.trace(g1).real
    g2 /= np.trace(g2).real
    return DensityMatrix(g1, (L,)), DensityMatrix(g2, (L, L))


def ground_state(Hn: sp.spmatrix, basis: FockBasis, tol: float = 1e-9, maxiter: int | None = None) -> GroundStateReport:
    """Lowest eigenpair by implicitly restarted Lanczos (ARPACK) with a fixed
    start vector; dense diagonalization for small spaces."""
    dim = Hn.shape[0]
    if dim <= DENSE_LIMIT:
        ev, V = np.linalg.eigh(Hn.toarray())
        E, psi = float(ev[0]), V[:, 0]
    else:
        v0 = np.ones(dim) / math.sqrt(dim)
        try:
            ev, V = eigsh(Hn, k=1, which="SA", v0=v0, tol=0.0, maxiter=maxiter or 20 * dim, ncv=min(dim, 40))
        except ArpackNoConvergence as exc:
            raise ConvergenceError("Lanczos iteration did not converge") from exc
        E, psi = float(ev[0]), V[:, 0]
    psi = psi / np.linalg.norm(psi)
    # fix the global phase for reproducible output
    k = int(np.argmax(np.abs(psi)))
    psi = psi * (abs(psi[k]) / psi[k])
    resid = float(np.linalg.norm(Hn @ psi - E * psi))
    if resid > tol:
        raise ConvergenceError(f"ground-state residual {resid:.3e} exceeds tolerance {tol:.1e}")
    N = basis.n_particles
    g1, g2 = _rdms(psi.astype(complex), basis)
    cf = float(np.linalg.eigvalsh(g1.data)[-1])
    return GroundStateReport(E, E / N, g1, g2, cf, resid, psi)

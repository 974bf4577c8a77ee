"""NLS, Hartree and mixed one-body functionals on the lattice.

States are lattice vectors ``v`` with ``sum |v_i|^2 = 1``; the grid function
is ``u = spacing^{-d/2} v``. Both quartic functionals take the form
``<v|h|v> + rho^T K rho / 2`` with ``rho = |v|^2``: ``K = (a / spacing^d) 1``
for NLS and ``K = W`` for Hartree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from ..core import DensityMatrix, Operator
from .nbody import ConvergenceError


def _arr(x) -> np.ndarray:
    return x.data if isinstance(x, Operator) else np.asarray(x)


def quartic_energy(v: np.ndarray, h: np.ndarray, K: np.ndarray) -> float:
    rho = np.abs(v) ** 2
    return float(np.real(np.vdot(v, h @ v)) + 0.5 * rho @ (K @ rho))


def quartic_gradient(v: np.ndarray, h: np.ndarray, K: np.ndarray) -> np.ndarray:
    """``2 (h v + (K rho) v)``: directional derivative is ``Re <g, e>``."""
    rho = np.abs(v) ** 2
    return 2.0 * (h @ v + (K @ rho) * v)


def nls_kernel(a: float, spacing: float, space_dim: int, n: int) -> np.ndarray:
    return (a / spacing**space_dim) * np.eye(n)


def nls_energy(v: np.ndarray, h, a: float, spacing: float, space_dim: int) -> float:
    """``<v|h|v> + (a/2) spacing^d sum |u|^4``."""
    H = _arr(h)
    return quartic_energy(v, H, nls_kernel(a, spacing, space_dim, H.shape[0]))


@dataclass
class MinimizerResult:
    vector: np.ndarray
    energy: float
    iterations: int
    gradient_norm: float


def minimize_quartic(
    h,
    K: np.ndarray,
    tol: float = 1e-13,
    grad_tol: float = 1e-8,
    max_iter: int = 5000,
    tau0: float = 1.0,
) -> MinimizerResult:
    """Normalized backward-Euler imaginary-time flow with an adaptive step.

    Starts from the ground state of ``h``. A step is accepted only when the
    energy does not increase; otherwise the step is halved.
    """
    H = _arr(h)
    H = 0.5 * (H + H.conj().T)
    n = H.shape[0]
    ev, V = np.linalg.eigh(H)
    v = V[:, 0].astype(complex)
    shift = ev[0] - 1.0
    E = quartic_energy(v, H, K)
    tau = tau0
    I = np.eye(n)
    last_drop = 0.0
    for it in range(1, max_iter + 1):
        rho = np.abs(v) ** 2
        Hs = H + np.diag(K @ rho) - shift * I
        mu = float(np.real(np.vdot(v, Hs @ v)))
        g = Hs @ v - mu * v
        gnorm = 2.0 * float(np.linalg.norm(g))
        if gnorm < grad_tol and last_drop < tol:
            return MinimizerResult(v, E, it - 1, gnorm)
        while True:
            w = sla.solve(I + tau * Hs, v, assume_a="gen")
            w /= np.linalg.norm(w)
            Ew = quartic_energy(w, H, K)
            if Ew <= E + 1e-15 * max(1.0, abs(E)):
                break
            tau *= 0.5
            if tau < 1e-14:
                raise ConvergenceError("imaginary-time step collapsed")
        last_drop = E - Ew
        v, E = w, Ew
        tau = min(tau * 2.0, 1e8)
    rho = np.abs(v) ** 2
    Hs = H + np.diag(K @ rho)
    gnorm = 2.0 * float(np.linalg.norm(Hs @ v - np.real(np.vdot(v, Hs @ v)) * v))
    if gnorm < grad_tol:
        return MinimizerResult(v, E, max_iter, gnorm)
    raise ConvergenceError(f"minimizer stopped with gradient norm {gnorm:.2e}")


def nls_minimize(h, a_eff: float, spacing: float, space_dim: int, **kw) -> MinimizerResult:
    H = _arr(h)
    return minimize_quartic(H, nls_kernel(a_eff, spacing, space_dim, H.shape[0]), **kw)


def hartree_minimize(h, wmat: np.ndarray, **kw) -> MinimizerResult:
    return minimize_quartic(_arr(h), np.asarray(wmat, dtype=float), **kw)


@dataclass(frozen=True)
class OneBodyStateEnergy:
    gamma: DensityMatrix
    hartree: float
    nls_mixed: float
    kinetic_trace: float

    def coercivity_constant(self) -> float:
        """Smallest ``C >= 0`` with ``tr(h gamma) <= C (E^H[gamma] + C)``."""
        E, t = self.hartree, self.kinetic_trace
        if t <= 0:
            return 0.0
        return 0.5 * (-E + math.sqrt(E * E + 4 * t))


def hartree_energy(gamma, h, wmat: np.ndarray, a: float, spacing: float, space_dim: int) -> OneBodyStateEnergy:
    """Hartree and mixed-NLS energies of a one-body density matrix.

    ``E^H = tr(h gamma) + sum_ij W_ij g_ii g_jj / 2`` and
    ``E^{nls,m} = tr(h gamma) + (a / 2) spacing^{-d} sum_i g_ii^2``.
    """
    G = _arr(gamma)
    H = _arr(h)
    dens = np.real(np.diag(G))
    t = float(np.real(np.trace(H @ G)))
    eh = t + 0.5 * float(dens @ (np.asarray(wmat, dtype=float) @ dens))
    enm = t + 0.5 * a / spacing**space_dim * float(dens @ dens)
    g = gamma if isinstance(gamma, DensityMatrix) else DensityMatrix(G, (G.shape[0],))
    return OneBodyStateEnergy(g, eh, enm, t)

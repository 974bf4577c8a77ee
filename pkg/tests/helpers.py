"""Independent random generators used as test oracles."""

import numpy as np
from scipy.stats import unitary_group

from qdefinetti.measurements import Measurement


def random_unitary(d, rng):
    return unitary_group.rvs(d, random_state=rng)


def random_povm(d, n, rng):
    """``M_i = S^{-1/2} G_i^dagger G_i S^{-1/2}`` with ``S = sum G_i^dagger G_i``."""
    G = rng.normal(size=(n, d, d)) + 1j * rng.normal(size=(n, d, d))
    pos = np.einsum("iba,ibc->iac", G.conj(), G)
    w, V = np.linalg.eigh(pos.sum(axis=0))
    s = (V / np.sqrt(w)) @ V.conj().T
    els = np.einsum("ab,ibc,cd->iad", s, pos, s)
    els = 0.5 * (els + np.conj(np.transpose(els, (0, 2, 1))))
    return Measurement(els)


def random_projective(d, rng):
    return Measurement.projective(random_unitary(d, rng))


def random_hermitian(n, rng):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (a + a.conj().T)


def random_contraction(d, rng):
    """Hermitian ``A`` with spectrum in ``[0, 1]``."""
    U = random_unitary(d, rng)
    return (U * rng.uniform(0, 1, d)) @ U.conj().T


def sum_abs_eigenvalues(a):
    return float(np.sum(np.abs(np.linalg.eigvalsh(a))))


# acceptance outcomes, printed in the terminal summary by conftest.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_criterion(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

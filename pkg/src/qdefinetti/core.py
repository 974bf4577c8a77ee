"""Tensor-product linear algebra on labeled factorizations.

Operators carry an explicit, immutable tuple of local dimensions. Factor
indices are 0-based throughout the package; reductions of symmetric states
always keep the *first* ``k`` factors.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

EQ_TOL = 1e-12
PSD_TOL = 1e-10
DIM_CAP = 200_000


class InvalidStateError(ValueError):
    """Raised when an operator violates the invariants of its declared type."""


class DimensionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense square matrix acting on ``C^{d_1} x ... x C^{d_m}``."""

    data: np.ndarray
    factor_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.factor_dims)
        if not dims or any(d < 1 for d in dims):
            raise DimensionError(f"invalid factor dims {self.factor_dims}")
        data = np.array(self.data, dtype=np.complex128)
        side = math.prod(dims)
        if data.shape != (side, side):
            raise DimensionError(
                f"data shape {data.shape} does not match factor dims {dims}"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "factor_dims", dims)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def n_factors(self) -> int:
        return len(self.factor_dims)

    @cached_property
    def hermitian(self) -> bool:
        return bool(np.max(np.abs(self.data - self.data.conj().T), initial=0.0) <= EQ_TOL)

    @cached_property
    def psd(self) -> bool:
        if not self.hermitian:
            return False
        return bool(np.linalg.eigvalsh(self.data)[0] >= -PSD_TOL)

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def dagger(self) -> "Operator":
        return Operator(self.data.conj().T, self.factor_dims)

    def __add__(self, other: "Operator") -> "Operator":
        _check_same_dims(self, other)
        return Operator(self.data + other.data, self.factor_dims)

    def __sub__(self, other: "Operator") -> "Operator":
        _check_same_dims(self, other)
        return Operator(self.data - other.data, self.factor_dims)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.data * scalar, self.factor_dims)

    __rmul__ = __mul__

    def __matmul__(self, other: "Operator") -> "Operator":
        _check_same_dims(self, other)
        return Operator(self.data @ other.data, self.factor_dims)

    def tensor(self) -> np.ndarray:
        """The matrix reshaped into ``(d_1..d_m, d_1..d_m)`` axes."""
        return self.data.reshape(self.factor_dims * 2)


def _check_same_dims(a: Operator, b: Operator) -> None:
    if a.factor_dims != b.factor_dims:
        raise DimensionError(f"factor dims differ: {a.factor_dims} vs {b.factor_dims}")


class DensityMatrix(Operator):
    """Hermitian, positive, unit-trace operator."""

    def __post_init__(self):
        super().__post_init__()
        if not self.hermitian:
            raise InvalidStateError("density matrix is not Hermitian")
        if abs(self.trace() - 1.0) > EQ_TOL:
            raise InvalidStateError(f"density matrix has trace {self.trace()}")
        if not self.psd:
            raise InvalidStateError("density matrix is not positive semidefinite")


class SymmetricState(DensityMatrix):
    """State on ``m`` identical factors invariant under label permutations."""

    def __post_init__(self):
        super().__post_init__()
        d = self.factor_dims[0]
        if any(x != d for x in self.factor_dims):
            raise InvalidStateError("symmetric state needs equal factor dims")
        m = self.n_factors
        for i in range(m - 1):
            sigma = list(range(m))
            sigma[i], sigma[i + 1] = sigma[i + 1], sigma[i]
            moved = permutation_conjugate(self, sigma)
            if np.linalg.norm(moved.data - self.data) > PSD_TOL:
                raise InvalidStateError("state is not permutation symmetric")

    @property
    def n_parties(self) -> int:
        return self.n_factors

    @property
    def local_dim(self) -> int:
        return self.factor_dims[0]

    def reduced(self, k: int) -> "SymmetricState":
        """k-party reduced state on the first ``k`` factors."""
        if not 1 <= k <= self.n_parties:
            raise DimensionError(f"k={k} outside 1..{self.n_parties}")
        if k == self.n_parties:
            return self
        red = partial_trace(self, range(k, self.n_parties))
        return SymmetricState(_hermitize(red.data), red.factor_dims)


@dataclass(frozen=True, eq=False)
class PureState:
    vector: np.ndarray
    factor_dims: tuple[int, ...]

    def __post_init__(self):
        vec = np.array(self.vector, dtype=np.complex128).reshape(-1)
        dims = tuple(int(d) for d in self.factor_dims)
        if vec.size != math.prod(dims):
            raise DimensionError("vector length does not match factor dims")
        if abs(np.linalg.norm(vec) - 1.0) > EQ_TOL * 10:
            raise InvalidStateError(f"vector norm {np.linalg.norm(vec)} != 1")
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)
        object.__setattr__(self, "factor_dims", dims)

    def density(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self.vector, self.vector.conj()), self.factor_dims)


def _hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def as_density(op: Operator) -> DensityMatrix:
    """Validate ``op`` as a density matrix, symmetrizing away roundoff."""
    if isinstance(op, DensityMatrix):
        return op
    return DensityMatrix(_hermitize(op.data), op.factor_dims)


def tensor_product(*ops: Operator) -> Operator:
    if not ops:
        raise ValueError("need at least one operator")
    data = ops[0].data
    dims = ops[0].factor_dims
    for op in ops[1:]:
        data = np.kron(data, op.data)
        dims = dims + op.factor_dims
    return Operator(data, dims)


def tensor_power(op: Operator, k: int) -> Operator:
    return tensor_product(*([op] * k))


def partial_trace(g: Operator, traced_factors: Iterable[int]) -> Operator:
    """Trace out the given factors, keeping the others in their original order."""
    traced = sorted(set(int(i) for i in traced_factors))
    m = g.n_factors
    if any(i < 0 or i >= m for i in traced):
        raise IndexError(f"traced factors {traced} out of range for {m} factors")
    kept = [i for i in range(m) if i not in traced]
    if not kept:
        raise ValueError("cannot trace out every factor; use Operator.trace()")
    if not traced:
        return g
    dims = g.factor_dims
    t = g.tensor()
    # einsum subscripts: row axes, then column axes sharing letters on traced factors
    letters = iter("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ")
    rows = [next(letters) for _ in range(m)]
    cols = [rows[i] if i in traced else next(letters) for i in range(m)]
    out = "".join(rows[i] for i in kept) + "".join(cols[i] for i in kept)
    red = np.einsum("".join(rows) + "".join(cols) + "->" + out, t)
    kdims = tuple(dims[i] for i in kept)
    side = math.prod(kdims)
    return Operator(red.reshape(side, side), kdims)


def reduce_to(g: Operator, kept: Iterable[int]) -> Operator:
    kept = set(kept)
    return partial_trace(g, [i for i in range(g.n_factors) if i not in kept])


def permutation_conjugate(g: Operator, sigma: Sequence[int]) -> Operator:
    """Return ``U_sigma g U_sigma^dagger``.

    ``U_sigma`` maps ``u_0 x ... x u_{m-1}`` to ``u_{sigma(0)} x ... x u_{sigma(m-1)}``.
    """
    m = g.n_factors
    sigma = [int(s) for s in sigma]
    if sorted(sigma) != list(range(m)):
        raise ValueError(f"{sigma} is not a permutation of {m} factors")
    if any(d != g.factor_dims[0] for d in g.factor_dims):
        raise DimensionError("permutation needs equal factor dims")
    axes = sigma + [m + s for s in sigma]
    data = np.transpose(g.tensor(), axes).reshape(g.dim, g.dim)
    return Operator(data, g.factor_dims)


def is_permutation_symmetric(g: Operator, tol: float = PSD_TOL) -> bool:
    m = g.n_factors
    if any(d != g.factor_dims[0] for d in g.factor_dims):
        return False
    for i in range(m - 1):
        sigma = list(range(m))
        sigma[i], sigma[i + 1] = sigma[i + 1], sigma[i]
        if np.linalg.norm(permutation_conjugate(g, sigma).data - g.data) > tol:
            return False
    return True


def symmetric_dimension(d: int, n: int) -> int:
    return math.comb(n + d - 1, n)


def occupation_basis(d: int, n: int, cap: int = DIM_CAP) -> np.ndarray:
    """All occupation vectors of ``n`` bosons in ``d`` modes, shape ``(D, d)``.

    Ordered lexicographically by the sorted mode tuple, so that for ``d=2``,
    ``n=2`` the rows are ``(2,0), (1,1), (0,2)``.
    """
    if d < 1 or n < 0:
        raise ValueError("need d >= 1 and n >= 0")
    D = symmetric_dimension(d, n)
    if D > cap:
        raise OverflowError(f"symmetric dimension {D} exceeds cap {cap}")
    occ = np.zeros((D, d), dtype=np.int64)
    for row, modes in enumerate(itertools.combinations_with_replacement(range(d), n)):
        for p in modes:
            occ[row, p] += 1
    return occ


@dataclass(frozen=True, eq=False)
class SymmetricBasis:
    """Occupation-number basis of the n-fold symmetric power and its embedding."""

    d: int
    n: int
    occupations: np.ndarray
    isometry: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.occupations.shape[0]


def symmetric_subspace(d: int, n: int, cap: int = DIM_CAP) -> SymmetricBasis:
    """Return the occupation basis and the isometry ``W: Sym^n(C^d) -> (C^d)^{x n}``."""
    if d < 1 or n < 1:
        raise ValueError("need d >= 1 and n >= 1")
    occ = occupation_basis(d, n, cap)
    if d**n > cap:
        raise OverflowError(f"tensor dimension {d**n} exceeds cap {cap}")
    index = {tuple(row): i for i, row in enumerate(occ)}
    W = np.zeros((d**n, occ.shape[0]))
    for flat, word in enumerate(itertools.product(range(d), repeat=n)):
        counts = np.bincount(word, minlength=d)
        col = index[tuple(counts)]
        W[flat, col] = 1.0
    # each column holds n!/prod(n_i!) ones
    W /= np.sqrt(W.sum(axis=0))
    W.setflags(write=False)
    return SymmetricBasis(d, n, occ, W)


def symmetric_projector(d: int, n: int) -> np.ndarray:
    W = symmetric_subspace(d, n).isometry
    return W @ W.T


def trace_norm(a) -> float:
    """Sum of singular values (absolute eigenvalues for Hermitian input)."""
    data = a.data if isinstance(a, Operator) else np.asarray(a)
    if np.allclose(data, data.conj().T, atol=EQ_TOL, rtol=0):
        return float(np.sum(np.abs(np.linalg.eigvalsh(_hermitize(data)))))
    return float(np.sum(np.linalg.svd(data, compute_uv=False)))


def rng_for(seed: int, *task: int) -> np.random.Generator:
    """Generator for a task stream derived from a run seed.

    Streams for distinct task keys are independent, and the stream for a
    given key does not depend on how many other tasks exist.
    """
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(t) for t in task)))


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def haar_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_state(kind: str, dims: Sequence[int], seed) -> DensityMatrix:
    """Random test state.

    ``kind`` is one of ``"pure-haar"``, ``"mixed-hs"`` (Hilbert-Schmidt
    measure) or ``"symmetric-pure"`` (Haar vector in the symmetric subspace,
    returned as a :class:`SymmetricState`).
    """
    rng = _as_rng(seed)
    dims = tuple(int(d) for d in dims)
    D = math.prod(dims)
    if kind == "pure-haar":
        v = haar_vector(D, rng)
        return DensityMatrix(_hermitize(np.outer(v, v.conj())), dims)
    if kind == "mixed-hs":
        G = rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))
        rho = G @ G.conj().T
        return DensityMatrix(_hermitize(rho / np.trace(rho).real), dims)
    if kind == "symmetric-pure":
        psi = random_symmetric_pure(dims[0], len(dims), rng)
        return psi_to_symmetric_state(psi)
    raise ValueError(f"unknown random state kind {kind!r}")


def random_symmetric_pure(d: int, n: int, seed) -> PureState:
    rng = _as_rng(seed)
    basis = symmetric_subspace(d, n)
    c = haar_vector(basis.dim, rng)
    return PureState(basis.isometry @ c, (d,) * n)


def psi_to_symmetric_state(psi: PureState) -> SymmetricState:
    rho = np.outer(psi.vector, psi.vector.conj())
    return SymmetricState(_hermitize(rho), psi.factor_dims)


def product_state(rho: DensityMatrix, n: int) -> SymmetricState:
    op = tensor_power(rho, n)
    return SymmetricState(_hermitize(op.data), op.factor_dims)


def ghz_state(d: int, n: int) -> SymmetricState:
    v = np.zeros(d**n, dtype=complex)
    for i in range(d):
        v[sum(i * d**j for j in range(n))] = 1.0
    v /= np.linalg.norm(v)
    return SymmetricState(np.outer(v, v.conj()), (d,) * n)


def bell_state() -> DensityMatrix:
    v = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    return DensityMatrix(np.outer(v, v.conj()), (2, 2))


def basis_projector(d: int, i: int) -> DensityMatrix:
    m = np.zeros((d, d), dtype=complex)
    m[i, i] = 1.0
    return DensityMatrix(m, (d,))

"""Quantum measurements (quantum-to-classical channels) and their optimization."""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .core import (
    EQ_TOL,
    PSD_TOL,
    DensityMatrix,
    DimensionError,
    Operator,
    rng_for,
)


class InvalidMeasurementError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Measurement:
    """A POVM ``{M_i}`` whose outcome ``i`` is written on register vector ``e_{labels[i]}``.

    ``elements`` is a stack of shape ``(n_outcomes, dim, dim)``. Output labels
    are abstract distinct integers; the register basis is orthonormal by
    construction.
    """

    elements: np.ndarray
    labels: tuple[int, ...] = None
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        els = np.array(self.elements, dtype=np.complex128)
        if els.ndim == 2:
            els = els[None]
        if els.ndim != 3 or els.shape[1] != els.shape[2]:
            raise DimensionError(f"bad element stack shape {els.shape}")
        labels = tuple(range(els.shape[0])) if self.labels is None else tuple(int(x) for x in self.labels)
        if len(labels) != els.shape[0] or len(set(labels)) != len(labels):
            raise InvalidMeasurementError("output labels must be distinct, one per element")
        if self.validate:
            herm = np.max(np.abs(els - np.conj(np.transpose(els, (0, 2, 1)))))
            if herm > EQ_TOL:
                raise InvalidMeasurementError("measurement element not Hermitian")
            if np.linalg.eigvalsh(els)[:, 0].min() < -PSD_TOL:
                raise InvalidMeasurementError("measurement element not positive")
            if np.max(np.abs(els.sum(axis=0) - np.eye(els.shape[1]))) > PSD_TOL:
                raise InvalidMeasurementError("measurement elements do not sum to identity")
        els.setflags(write=False)
        object.__setattr__(self, "elements", els)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.elements.shape[1]

    @property
    def n_outcomes(self) -> int:
        return self.elements.shape[0]

    @classmethod
    def computational(cls, d: int) -> "Measurement":
        els = np.zeros((d, d, d), dtype=complex)
        els[np.arange(d), np.arange(d), np.arange(d)] = 1.0
        return cls(els)

    @classmethod
    def trivial(cls, d: int) -> "Measurement":
        """One-outcome measurement; acts as a partial trace."""
        return cls(np.eye(d, dtype=complex)[None])

    @classmethod
    def projective(cls, unitary: np.ndarray, validate: bool = True) -> "Measurement":
        """Rank-one projectors onto the columns of ``unitary``."""
        U = np.asarray(unitary)
        els = np.einsum("ai,bi->iab", U, U.conj())
        return cls(els, validate=validate)


def apply_measurement(lam: Measurement, rho: Operator) -> DensityMatrix:
    """``sum_k tr[M_k rho] |e_k><e_k|`` on the output register."""
    if rho.dim != lam.dim:
        raise DimensionError(f"measurement dim {lam.dim} vs state dim {rho.dim}")
    p = np.einsum("kba,ab->k", lam.elements, rho.data).real
    return DensityMatrix(np.diag(p).astype(complex), (lam.n_outcomes,))


def tensor_measurement(l1: Measurement, l2: Measurement) -> Measurement:
    els = np.einsum("iab,jcd->ijacbd", l1.elements, l2.elements)
    n1, n2 = l1.n_outcomes, l2.n_outcomes
    els = els.reshape(n1 * n2, l1.dim * l2.dim, l1.dim * l2.dim)
    labels = [a * n2 + b for a in range(n1) for b in range(n2)]
    return Measurement(els, labels, validate=False)


def tensor_all(lambdas: Sequence[Measurement]) -> Measurement:
    out = lambdas[0]
    for lam in lambdas[1:]:
        out = tensor_measurement(out, lam)
    return out


def partial_measurement(lam: Measurement, target_factor: int, gamma: Operator) -> Operator:
    """``1 x .. x Lambda x .. x 1`` applied to factor ``target_factor`` of ``gamma``.

    The measured factor is replaced in place by the output register of
    dimension ``lam.n_outcomes``; the result is block diagonal in it.
    """
    m = gamma.n_factors
    if not 0 <= target_factor < m:
        raise IndexError(f"factor {target_factor} out of range")
    dims = gamma.factor_dims
    if dims[target_factor] != lam.dim:
        raise DimensionError(
            f"factor {target_factor} has dim {dims[target_factor]}, measurement {lam.dim}"
        )
    left = math.prod(dims[:target_factor])
    right = math.prod(dims[target_factor + 1:])
    d = lam.dim
    t = gamma.data.reshape(left, d, right, left, d, right)
    # blocks[k] = tr_target[(1 x M_k x 1) gamma]
    blocks = np.einsum("kba,iajlbm->kijlm", lam.elements, t)
    n = lam.n_outcomes
    out = np.zeros((left, n, right, left, n, right), dtype=complex)
    for k in range(n):
        out[:, k, :, :, k, :] = blocks[k]
    new_dims = dims[:target_factor] + (n,) + dims[target_factor + 1:]
    side = left * n * right
    return Operator(out.reshape(side, side), new_dims)


def measured_distribution(lambdas: Sequence[Measurement], x: Operator | np.ndarray) -> np.ndarray:
    """Array ``p[i_1..i_k] = tr[(M_{i_1} x ... x M_{i_k}) x]``.

    ``x`` is an operator on exactly ``len(lambdas)`` factors whose dims match
    the measurements; a bare array is read with those dims.
    """
    dims = tuple(lam.dim for lam in lambdas)
    data = x.data if isinstance(x, Operator) else np.asarray(x)
    if isinstance(x, Operator) and x.factor_dims != dims:
        raise DimensionError(f"operator dims {x.factor_dims} vs measurements {dims}")
    if data.shape != (math.prod(dims),) * 2:
        raise DimensionError("operator size does not match measurements")
    k = len(dims)
    t = data.reshape(dims * 2)
    # Contract one factor at a time; the leading axes accumulate outcomes.
    for j, lam in enumerate(lambdas):
        # t axes: (outcomes_0..j-1, rows_j..k-1, cols_j..k-1)
        rem = k - j
        t = np.moveaxis(t, [j, j + rem], [t.ndim - 2, t.ndim - 1])
        t = np.tensordot(t, lam.elements, axes=([t.ndim - 2, t.ndim - 1], [2, 1]))
        t = np.moveaxis(t, -1, j)
    return t


def measured_trace_norm(lambdas: Sequence[Measurement], delta: Operator | np.ndarray) -> float:
    """Trace norm of ``(Lambda_1 x ... x Lambda_k) delta``.

    The measured operator is diagonal in the product register basis, so this
    is the l1 norm of the measured distribution.
    """
    p = measured_distribution(lambdas, delta)
    return float(np.sum(np.abs(p)))


def two_outcome_from_operator(a: Operator | np.ndarray) -> Measurement:
    """The measurement ``{A -> e_1, 1 - A -> e_2}`` for ``0 <= A <= 1``."""
    A = a.data if isinstance(a, Operator) else np.asarray(a, dtype=complex)
    if np.max(np.abs(A - A.conj().T)) > EQ_TOL:
        raise InvalidMeasurementError("A is not Hermitian")
    ev = np.linalg.eigvalsh(A)
    if ev[0] < -PSD_TOL or ev[-1] > 1 + PSD_TOL:
        raise InvalidMeasurementError("A must satisfy 0 <= A <= 1")
    A = 0.5 * (A + A.conj().T)
    return Measurement(np.stack([A, np.eye(A.shape[0]) - A]), validate=False)


@lru_cache(maxsize=None)
def _upper(d: int):
    return np.triu_indices(d, 1)


def hermitian_from_params(theta: np.ndarray, d: int) -> np.ndarray:
    """Hermitian ``d x d`` matrix from ``d*d`` real coordinates."""
    H = np.zeros((d, d), dtype=complex)
    H[np.diag_indices(d)] = theta[:d]
    iu = _upper(d)
    n_off = len(iu[0])
    off = theta[d:d + n_off] + 1j * theta[d + n_off:d + 2 * n_off]
    H[iu] = off
    H[(iu[1], iu[0])] = off.conj()
    return H


def unitary_from_params(theta: np.ndarray, d: int) -> np.ndarray:
    """``exp(i H(theta))``."""
    if d == 2:
        # H = a0 + a.sigma  =>  exp(iH) = e^{i a0} (cos|a| + i sin|a| a.sigma/|a|)
        a0 = 0.5 * (theta[0] + theta[1])
        az = 0.5 * (theta[0] - theta[1])
        ax, ay = theta[2], -theta[3]
        n = math.sqrt(ax * ax + ay * ay + az * az)
        c = math.cos(n)
        s = math.sin(n) / n if n > 1e-300 else 1.0
        ph = complex(math.cos(a0), math.sin(a0))
        return ph * np.array(
            [[c + 1j * s * az, 1j * s * (ax - 1j * ay)], [1j * s * (ax + 1j * ay), c - 1j * s * az]]
        )
    w, V = np.linalg.eigh(hermitian_from_params(theta, d))
    return (V * np.exp(1j * w)) @ V.conj().T


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass(frozen=True)
class MeasurementFamily:
    """Parameterized search space of single-party measurements.

    Kinds:
      ``projective-unitary``: rank-one projectors onto columns of
      ``exp(i H(theta))``; ``d*d`` parameters.
      ``two-outcome-operator``: ``{A, 1 - A}`` with ``A = U diag(s) U^dagger``,
      ``s`` in ``(0, 1)`` via a sigmoid; ``d*d + d`` parameters.
      ``computational``: no parameters.
    """

    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in ("projective-unitary", "two-outcome-operator", "computational"):
            raise ValueError(f"unknown measurement family {self.kind!r}")

    @property
    def n_params(self) -> int:
        d = self.dim
        return {"projective-unitary": d * d, "two-outcome-operator": d * d + d, "computational": 0}[self.kind]

    def realize(self, theta: np.ndarray) -> Measurement:
        d = self.dim
        if self.kind == "computational":
            return Measurement.computational(d)
        U = unitary_from_params(np.asarray(theta[: d * d], dtype=float), d)
        if self.kind == "projective-unitary":
            return Measurement.projective(U, validate=False)
        s = _sigmoid(np.asarray(theta[d * d:], dtype=float))
        A = (U * s) @ U.conj().T
        A = 0.5 * (A + A.conj().T)
        return Measurement(np.stack([A, np.eye(d) - A]), validate=False)

    def initial(self) -> np.ndarray:
        """Parameters of the computational-basis member."""
        theta = np.zeros(self.n_params)
        if self.kind == "two-outcome-operator":
            # A = |0><0| (approximately)
            theta[self.dim * self.dim:] = -8.0
            theta[self.dim * self.dim] = 8.0
        return theta

    def random(self, rng: np.random.Generator) -> np.ndarray:
        theta = rng.uniform(-np.pi, np.pi, self.n_params)
        if self.kind == "two-outcome-operator":
            theta[self.dim * self.dim:] = rng.normal(0.0, 3.0, self.dim)
        return theta


@dataclass(frozen=True)
class Budget:
    """Optimizer budget: independent restarts, coordinate sweeps, and
    Nelder-Mead function evaluations per slot update."""

    restarts: int = 20
    sweeps: int = 3
    maxfev: int = 120

    def scaled(self, factor: float) -> "Budget":
        return Budget(
            max(1, int(round(self.restarts * factor))), self.sweeps, max(10, int(round(self.maxfev * factor)))
        )


@dataclass
class OptimizationResult:
    measurements: list[Measurement]
    value: float
    params: list[np.ndarray]
    restarts: int
    evaluations: int
    restart_values: list[float] = field(default_factory=list)


Objective = Callable[[Sequence[Measurement]], float]


def optimize_local_measurements(
    objective: Objective,
    family: MeasurementFamily | Sequence[MeasurementFamily],
    k: int = 1,
    restarts: int = 20,
    seed: int = 0,
    sweeps: int = 3,
    maxfev: int = 120,
    budget: Budget | None = None,
) -> OptimizationResult:
    """Maximize ``objective`` over ``k`` measurements by coordinate ascent.

    Each sweep updates the slots in order with a derivative-free Nelder-Mead
    search on that slot's parameters, the others held fixed. Restart 0 starts
    from the computational basis; restart ``r > 0`` from parameters drawn from
    the stream ``rng_for(seed, r)``, so a larger restart count only adds
    candidates. The returned value is an objective evaluation at the returned
    measurements, hence a lower bound on the supremum.
    """
    if budget is not None:
        restarts, sweeps, maxfev = budget.restarts, budget.sweeps, budget.maxfev
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    families = [family] * k if isinstance(family, MeasurementFamily) else list(family)
    if len(families) != k:
        raise ValueError("need one family per slot")

    n_eval = 0
    best_value = -np.inf
    best_params: list[np.ndarray] = []
    restart_values = []

    for r in range(restarts):
        rng = rng_for(seed, r)
        params = [f.initial() if r == 0 else f.random(rng) for f in families]
        current = [f.realize(p) for f, p in zip(families, params)]
        value = float(objective(current))
        n_eval += 1
        for _ in range(sweeps):
            before = value
            for slot, fam in enumerate(families):
                if fam.n_params == 0:
                    continue

                def neg(theta, slot=slot, fam=fam):
                    trial = list(current)
                    trial[slot] = fam.realize(theta)
                    return -float(objective(trial))

                res = minimize(
                    neg,
                    params[slot],
                    method="Nelder-Mead",
                    options={"maxfev": maxfev, "xatol": 1e-7, "fatol": 1e-12},
                )
                n_eval += int(res.nfev)
                if -res.fun > value:
                    params[slot] = np.array(res.x)
                    current[slot] = fam.realize(params[slot])
                    value = float(objective(current))
                    n_eval += 1
            if value <= before:
                break
        restart_values.append(value)
        if value > best_value:
            best_value = value
            best_params = [p.copy() for p in params]

    best = [f.realize(p) for f, p in zip(families, best_params)]
    return OptimizationResult(best, best_value, best_params, restarts, n_eval, restart_values)

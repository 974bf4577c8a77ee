"""Entropies, relative entropy and mutual informations (natural logarithm)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import EQ_TOL, DimensionError, Operator, partial_trace, reduce_to, tensor_product, trace_norm
from .measurements import Measurement, apply_measurement, tensor_all

EIG_FLOOR = 1e-12
SUPPORT_TOL = 1e-10


@dataclass(frozen=True)
class EntropyReport:
    value: float
    support_ok: bool
    eigenvalue_floor_used: float = EIG_FLOOR

    def __float__(self):
        return self.value


def _data(g) -> np.ndarray:
    return g.data if isinstance(g, Operator) else np.asarray(g)


def _eigvalsh(a: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(0.5 * (a + a.conj().T))


def _is_diagonal(a: np.ndarray) -> bool:
    return np.max(np.abs(a - np.diag(np.diag(a))), initial=0.0) <= EQ_TOL


def entropy_of_eigenvalues(lam: np.ndarray) -> float:
    lam = np.asarray(lam, dtype=float)
    lam = lam[lam > 0]
    return float(-np.sum(lam * np.log(lam)))


def shannon_entropy(p: np.ndarray) -> float:
    return entropy_of_eigenvalues(np.ravel(p))


def von_neumann_entropy(rho) -> float:
    """``-tr rho ln rho`` from the eigenvalues; zero eigenvalues are skipped."""
    a = _data(rho)
    lam = np.diag(a).real if _is_diagonal(a) else _eigvalsh(a)
    return max(0.0, entropy_of_eigenvalues(lam))


def classical_relative_entropy(p: np.ndarray, q: np.ndarray) -> float:
    """KL divergence ``sum p ln(p/q)``; ``inf`` when ``p`` charges a zero of ``q``."""
    p = np.ravel(np.asarray(p, dtype=float))
    q = np.ravel(np.asarray(q, dtype=float))
    mask = p > 0
    if np.any(q[mask] < EIG_FLOOR) and np.any(p[mask & (q < EIG_FLOOR)] > SUPPORT_TOL):
        return np.inf
    mask &= q >= EIG_FLOOR
    return float(max(0.0, np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask])))))


def relative_entropy(g, gp) -> EntropyReport:
    """``tr[g (ln g - ln gp)]`` with support detection.

    Eigenvalues of ``gp`` below ``EIG_FLOOR`` are treated as zero; if ``g``
    puts more than ``SUPPORT_TOL`` weight on that kernel the report carries
    ``value = inf`` and ``support_ok = False``.
    """
    a, b = _data(g), _data(gp)
    if a.shape != b.shape:
        raise DimensionError("relative entropy of operators of different size")
    if _is_diagonal(a) and _is_diagonal(b):
        val = classical_relative_entropy(np.diag(a).real, np.diag(b).real)
        return EntropyReport(val, bool(np.isfinite(val)))
    lam_b, V = np.linalg.eigh(0.5 * (b + b.conj().T))
    weights = np.einsum("ji,jk,ki->i", V.conj(), a, V).real
    kernel = lam_b < EIG_FLOOR
    if np.any(weights[kernel] > SUPPORT_TOL):
        return EntropyReport(np.inf, False)
    cross = float(np.sum(weights[~kernel] * np.log(lam_b[~kernel])))
    val = -von_neumann_entropy(a) - cross
    return EntropyReport(max(0.0, val), True)


def _groups(n: int, groups: Sequence[Iterable[int]], require_partition: bool) -> list[list[int]]:
    out = [sorted(set(int(i) for i in grp)) for grp in groups]
    flat = [i for grp in out for i in grp]
    if any(not grp for grp in out):
        raise ValueError("empty factor group")
    if len(flat) != len(set(flat)):
        raise ValueError("factor groups overlap")
    if any(i < 0 or i >= n for i in flat):
        raise ValueError(f"factor index out of range for {n} factors")
    if require_partition and len(flat) != n:
        raise ValueError("groups do not cover every factor")
    return out


def _entropy_of_subset(g: Operator, subset: Iterable[int], cache: dict | None = None) -> float:
    key = tuple(sorted(subset))
    if cache is not None and key in cache:
        return cache[key]
    if not key:
        val = 0.0
    elif len(key) == g.n_factors:
        val = von_neumann_entropy(g)
    else:
        val = von_neumann_entropy(reduce_to(g, key))
    if cache is not None:
        cache[key] = val
    return val


def mutual_information(g: Operator, split: Sequence[Iterable[int]], method: str = "entropy") -> float:
    """Bipartite mutual information ``I(L : R)``.

    ``method="entropy"`` uses ``S(L) + S(R) - S(LR)``; ``method="relative"``
    uses the relative entropy of ``g`` to the product of its marginals.
    """
    left, right = _groups(g.n_factors, split, require_partition=True)
    if method == "entropy":
        return von_neumann_entropy(reduce_to(g, left)) + von_neumann_entropy(reduce_to(g, right)) - von_neumann_entropy(g)
    if method == "relative":
        return _relative_to_marginals(g, [left, right])
    raise ValueError(f"unknown method {method!r}")


def _relative_to_marginals(g: Operator, groups: list[list[int]]) -> float:
    order = [i for grp in groups for i in grp]
    prod = tensor_product(*[reduce_to(g, grp) for grp in groups])
    if order != list(range(g.n_factors)):
        g = _permute_general(g, order)
    return relative_entropy(g, prod).value


def _permute_general(g: Operator, order: list[int]) -> Operator:
    m = g.n_factors
    axes = order + [m + s for s in order]
    dims = tuple(g.factor_dims[i] for i in order)
    data = np.transpose(g.tensor(), axes).reshape(g.dim, g.dim)
    return Operator(data, dims)


def multipartite_mutual_information(g: Operator, method: str = "entropy") -> float:
    """``I(1 : 2 : ... : k) = sum_j S(g^j) - S(g)``."""
    k = g.n_factors
    if k < 2:
        raise ValueError("need at least two factors")
    if method == "relative":
        return _relative_to_marginals(g, [[j] for j in range(k)])
    return sum(von_neumann_entropy(reduce_to(g, [j])) for j in range(k)) - von_neumann_entropy(g)


def bipartite_to_multipartite_terms(g: Operator) -> list[float]:
    """Terms ``I(1..j-1 : j)`` of ``g^{1..j}`` for ``j = 2..k`` whose sum is the
    multipartite mutual information."""
    k = g.n_factors
    terms = []
    for j in range(2, k + 1):
        sub = reduce_to(g, range(j)) if j < k else g
        terms.append(mutual_information(sub, [range(j - 1), [j - 1]]))
    return terms


def conditional_mutual_information(g: Operator, groups: Sequence[Iterable[int]], method: str = "entropy") -> float:
    """``I(A : B | C)`` for disjoint non-empty factor groups ``(A, B, C)``.

    Factors in no group are traced out first. ``method="entropy"`` uses
    ``S(AC) + S(BC) - S(ABC) - S(C)``; ``method="relative"`` the difference
    ``I(A : BC) - I(A : C)`` of relative entropies.
    """
    A, B, C = _groups(g.n_factors, groups, require_partition=False)
    if method == "entropy":
        cache: dict = {}
        S = lambda s: _entropy_of_subset(g, s, cache)  # noqa: E731
        return S(A + C) + S(B + C) - S(A + B + C) - S(C)
    if method == "relative":
        abc = sorted(A + B + C)
        sub = reduce_to(g, abc)
        pos = {f: i for i, f in enumerate(abc)}
        a = [pos[i] for i in A]
        bc = [pos[i] for i in B + C]
        first = _relative_to_marginals(sub, [a, bc])
        ac = sorted(A + C)
        sub2 = reduce_to(g, ac)
        pos2 = {f: i for i, f in enumerate(ac)}
        second = _relative_to_marginals(sub2, [[pos2[i] for i in A], [pos2[i] for i in C]])
        return first - second
    raise ValueError(f"unknown method {method!r}")


def chain_rule_terms(g: Operator, k: int) -> tuple[float, list[float]]:
    """Both sides of the chain rule for ``I(1..k-1 : k..N)`` (1-based party labels).

    Returns the left-hand side and the list of conditional terms
    ``I(1..k-1 : j | j+1..N)`` for ``j = k..N``.
    """
    N = g.n_factors
    if not 2 <= k <= N:
        raise ValueError(f"need 2 <= k <= N, got k={k}, N={N}")
    A = list(range(k - 1))
    lhs = mutual_information(g, [A, list(range(k - 1, N))])
    terms = []
    for j in range(k, N + 1):
        rest = list(range(j, N))
        if rest:
            terms.append(conditional_mutual_information(g, [A, [j - 1], rest]))
        else:
            sub = reduce_to(g, A + [j - 1])
            terms.append(mutual_information(sub, [range(k - 1), [k - 1]]))
    return lhs, terms


def chain_rule_check(g: Operator, k: int) -> float:
    lhs, terms = chain_rule_terms(g, k)
    return abs(lhs - sum(terms))


def araki_lieb_gap(g: Operator) -> float:
    """``S(12) - |S(1) - S(2)|`` for a bipartite state; nonnegative."""
    s1 = von_neumann_entropy(partial_trace(g, [1]))
    s2 = von_neumann_entropy(partial_trace(g, [0]))
    return von_neumann_entropy(g) - abs(s1 - s2)


def pinsker_gap(delta_pair, lambdas: Sequence[Measurement] | None = None) -> float:
    """``2 H(g, gp) - ||g - gp||_1^2``, after measuring both states if ``lambdas``
    is given (a product measurement, one per factor)."""
    g, gp = delta_pair
    if lambdas is not None:
        lam = tensor_all(list(lambdas))
        g = apply_measurement(lam, g)
        gp = apply_measurement(lam, gp)
    rel = relative_entropy(g, gp)
    if not rel.support_ok:
        return np.inf
    diff = _data(g) - _data(gp)
    if _is_diagonal(diff):
        dist = float(np.sum(np.abs(np.diag(diff))))
    else:
        dist = trace_norm(diff)
    return 2.0 * rel.value - dist**2

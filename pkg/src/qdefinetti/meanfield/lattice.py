"""Lattice discretization: grids, one-body operator, spectral cutoffs and
scaled pair interactions."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from ..core import Operator


class UnderResolvedWarning(UserWarning):
    """Scaled interaction range is narrower than one lattice cell."""


@dataclass(frozen=True)
class Potential:
    """External potential ``V``.

    ``harmonic``: ``strength * |x|^2``; ``constant``: ``strength``;
    ``none``: zero.
    """

    kind: str = "none"
    strength: float = 1.0

    def __post_init__(self):
        if self.kind not in ("none", "harmonic", "constant"):
            raise ValueError(f"unknown potential kind {self.kind!r}")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if self.kind == "harmonic":
            return self.strength * np.sum(x**2, axis=1)
        if self.kind == "constant":
            return np.full(x.shape[0], float(self.strength))
        return np.zeros(x.shape[0])


@dataclass(frozen=True)
class VectorPotential:
    """Vector potential ``A`` for the Peierls phases (2D only).

    ``uniform``: symmetric gauge ``A = field/2 (-y, x)``; ``none``: zero.
    """

    kind: str = "none"
    field: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "uniform"):
            raise ValueError(f"unknown vector potential kind {self.kind!r}")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if self.kind == "none" or x.shape[1] < 2:
            return np.zeros_like(x)
        return 0.5 * self.field * np.stack([-x[:, 1], x[:, 0]], axis=1)


@dataclass(frozen=True)
class PairPotential:
    """Even pair interaction ``w``.

    ``gaussian``: ``amplitude * exp(-|x|^2 / (2 width^2))``;
    ``tophat``: ``amplitude`` for ``|x| <= width``;
    ``delta``: a single-site kernel of integral ``amplitude`` (invariant under
    the ``N^beta`` scaling); ``constant``: ``amplitude``; ``none``: zero.
    """

    kind: str = "none"
    amplitude: float = 1.0
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in ("none", "gaussian", "tophat", "delta", "constant"):
            raise ValueError(f"unknown pair potential kind {self.kind!r}")

    @property
    def range(self) -> float | None:
        return self.width if self.kind in ("gaussian", "tophat") else None

    def __call__(self, x: np.ndarray, spacing: float, space_dim: int) -> np.ndarray:
        x = np.atleast_2d(x)
        r2 = np.sum(x**2, axis=1)
        if self.kind == "gaussian":
            return self.amplitude * np.exp(-r2 / (2 * self.width**2))
        if self.kind == "tophat":
            return np.where(np.sqrt(r2) <= self.width * (1 + 1e-12), self.amplitude, 0.0)
        if self.kind == "delta":
            return np.where(r2 <= (0.5 * spacing) ** 2, self.amplitude / spacing**space_dim, 0.0)
        if self.kind == "constant":
            return np.full(x.shape[0], float(self.amplitude))
        return np.zeros(x.shape[0])

    def continuum_integral(self, space_dim: int) -> float | None:
        """``int w`` where it is finite."""
        if self.kind == "gaussian":
            return self.amplitude * (2 * math.pi * self.width**2) ** (space_dim / 2)
        if self.kind == "tophat":
            vol = 2 * self.width if space_dim == 1 else math.pi * self.width**2
            return self.amplitude * vol
        if self.kind in ("delta", "none"):
            return self.amplitude if self.kind == "delta" else 0.0
        return None


@dataclass(frozen=True)
class LatticeModel:
    """Uniform grid with ``L`` sites per axis, centered at the origin.

    Site coordinates are ``(i - (L-1)/2) * spacing``. Dirichlet boundaries
    place the vanishing ghost sites just outside the grid; periodic ones wrap.
    """

    space_dim: int = 1
    L: int = 12
    spacing: float = 1.0
    potential: Potential = field(default_factory=Potential)
    vector_potential: VectorPotential = field(default_factory=VectorPotential)
    interaction: PairPotential = field(default_factory=PairPotential)
    beta: float = 0.0
    N: int = 2
    boundary: str = "dirichlet"

    def __post_init__(self):
        if self.space_dim not in (1, 2):
            raise ValueError("space_dim must be 1 or 2")
        if self.L < 2 or self.spacing <= 0:
            raise ValueError("need L >= 2 and spacing > 0")
        if self.beta < 0 or self.N < 2:
            raise ValueError("need beta >= 0 and N >= 2")
        if self.boundary not in ("dirichlet", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.vector_potential.kind != "none" and self.space_dim != 2:
            raise ValueError("vector potential requires space_dim = 2")

    @property
    def n_sites(self) -> int:
        return self.L**self.space_dim

    def with_N(self, N: int) -> "LatticeModel":
        return replace(self, N=N)

    def axis(self) -> np.ndarray:
        return (np.arange(self.L) - (self.L - 1) / 2) * self.spacing

    def sites(self) -> np.ndarray:
        """``(n_sites, space_dim)`` coordinates; 2D index is ``ix * L + iy``."""
        ax = self.axis()
        if self.space_dim == 1:
            return ax[:, None]
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([X.ravel(), Y.ravel()], axis=1)

    def integer_sites(self) -> np.ndarray:
        idx = np.arange(self.L)
        if self.space_dim == 1:
            return idx[:, None]
        X, Y = np.meshgrid(idx, idx, indexing="ij")
        return np.stack([X.ravel(), Y.ravel()], axis=1)

    def displacements(self) -> np.ndarray:
        """Physical displacements ``x_i - x_j`` as ``(n, n, space_dim)``,
        minimal image for periodic boundaries."""
        n = self.integer_sites()
        diff = n[:, None, :] - n[None, :, :]
        if self.boundary == "periodic":
            diff = (diff + self.L // 2) % self.L - self.L // 2
        return diff * self.spacing


def spacing_for_box(radius: float, L: int, boundary: str = "dirichlet") -> float:
    """Spacing such that the grid covers ``[-radius, radius]`` per axis."""
    return 2 * radius / (L + 1) if boundary == "dirichlet" else 2 * radius / L


def build_one_body(model: LatticeModel) -> Operator:
    """Central-difference ``(-i grad + A)^2 + V`` with Peierls link phases.

    The link ``j -> j + e_axis`` carries ``exp(i * spacing * A_axis(midpoint))``.
    """
    h = model.spacing
    n = model.n_sites
    L = model.L
    x = model.sites()
    H = np.zeros((n, n), dtype=complex)
    H[np.diag_indices(n)] = 2 * model.space_dim / h**2 + model.potential(x)
    ints = model.integer_sites()
    index = {tuple(r): i for i, r in enumerate(ints)}
    for ax in range(model.space_dim):
        for i, r in enumerate(ints):
            nb = r.copy()
            nb[ax] += 1
            if nb[ax] == L:
                if model.boundary != "periodic":
                    continue
                nb[ax] = 0
            j = index[tuple(nb)]
            mid = x[i].copy()
            mid[ax] += 0.5 * h
            theta = h * model.vector_potential(mid[None])[0, ax]
            H[i, j] += -np.exp(1j * theta) / h**2
            H[j, i] += -np.exp(-1j * theta) / h**2
    return Operator(H, (n,))


def spectral_projector(h: Operator | np.ndarray, cutoff: float) -> tuple[np.ndarray, int]:
    """``P = 1(h <= cutoff)`` and its rank."""
    H = h.data if isinstance(h, Operator) else np.asarray(h)
    ev, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    sel = ev <= cutoff
    Vs = V[:, sel]
    return Vs @ Vs.conj().T, int(sel.sum())


@dataclass(frozen=True)
class ScaledInteraction:
    """``W_ij = w_{N,beta}(x_i - x_j)`` and the lattice mass ``spacing^d sum_n w_{N,beta}(n)``."""

    matrix: np.ndarray
    integral: float
    offsets: np.ndarray
    values: np.ndarray
    under_resolved: bool


def _offsets(model: LatticeModel) -> np.ndarray:
    rng = range(-(model.L - 1), model.L) if model.boundary == "dirichlet" else range(-(model.L // 2), model.L - model.L // 2)
    return np.array(list(itertools.product(rng, repeat=model.space_dim)), dtype=float) * model.spacing


def scaled_pair_values(model: LatticeModel, x: np.ndarray) -> np.ndarray:
    """``N^{d beta} w(N^beta x)``; single-site kernels are scale invariant."""
    w = model.interaction
    if w.kind == "delta":
        return w(x, model.spacing, model.space_dim)
    s = model.N**model.beta
    return s**model.space_dim * w(s * np.atleast_2d(x), model.spacing, model.space_dim)


def scaled_interaction(model: LatticeModel) -> ScaledInteraction:
    disp = model.displacements()
    n = model.n_sites
    W = scaled_pair_values(model, disp.reshape(-1, model.space_dim)).reshape(n, n)
    W = 0.5 * (W + W.T)
    offs = _offsets(model)
    vals = scaled_pair_values(model, offs)
    rng = model.interaction.range
    under = rng is not None and rng * model.N ** (-model.beta) < model.spacing
    if under:
        warnings.warn(
            f"scaled interaction range {rng * model.N ** (-model.beta):.3g} is below the lattice spacing {model.spacing:.3g}",
            UnderResolvedWarning,
            stacklevel=2,
        )
    return ScaledInteraction(W, float(model.spacing**model.space_dim * vals.sum()), offs, vals, bool(under))


def lattice_coupling(model: LatticeModel) -> float:
    """The NLS coupling ``a``: lattice quadrature of the unscaled ``w``."""
    base = replace(model, beta=0.0)
    vals = scaled_pair_values(base, _offsets(base))
    return float(model.spacing**model.space_dim * vals.sum())

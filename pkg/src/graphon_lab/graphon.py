"""Step graphons and their exactly integrable functionals.

A step graphon is a symmetric kernel on ``[0,1]^2`` that is constant on the
rectangles of a product partition.  Every integral used in this package
(edge and triangle densities, homomorphism densities, the rate function,
the auxiliary kernel ``h``) reduces to a finite block sum, so nothing here
uses quadrature.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, ResourceError, ShapeMismatchError

__all__ = [
    "StepGraphon",
    "rate_pointwise",
    "rate_derivative",
    "rate_second_derivative",
    "rate",
    "edge_density",
    "triangle_density",
    "hom_density",
    "aux_h",
    "common_refinement",
    "average_onto",
    "l1_distance",
    "DERIV_CLAMP",
]

# I0' and I0'' are evaluated at max(u, clamp), min(u, 1 - clamp).
DERIV_CLAMP = 1e-12

_BOUNDARY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class StepGraphon:
    """Piecewise-constant symmetric kernel on the unit square.

    Parameters
    ----------
    boundaries : sequence of float
        Block endpoints ``0 = b_0 < b_1 < ... < b_m = 1``.
    values : (m, m) array_like
        Block values; must be exactly symmetric with entries in ``[0, 1]``.
    """

    boundaries: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.array(self.boundaries, dtype=float)
        v = np.array(self.values, dtype=float)
        if b.ndim != 1 or b.size < 2:
            raise DomainError("boundaries must be a 1-d sequence with at least two entries")
        if b[0] != 0.0 or b[-1] != 1.0:
            raise DomainError("boundaries must start at 0 and end at 1")
        if np.any(np.diff(b) <= 0):
            raise DomainError("boundaries must be strictly increasing")
        m = b.size - 1
        if v.shape != (m, m):
            raise DomainError(f"values must have shape ({m}, {m}), got {v.shape}")
        if not np.array_equal(v, v.T):
            raise DomainError("values matrix must be exactly symmetric")
        if not np.all(np.isfinite(v)) or v.min() < 0.0 or v.max() > 1.0:
            raise DomainError("graphon values must lie in [0, 1]")
        b.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(self, "values", v)

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_values(cls, values) -> "StepGraphon":
        """Equal-width step graphon with the given block values."""
        v = np.asarray(values, dtype=float)
        return cls(np.linspace(0.0, 1.0, v.shape[0] + 1), v)

    @classmethod
    def constant(cls, u: float, m: int = 1) -> "StepGraphon":
        return cls.from_values(np.full((m, m), float(u)))

    @classmethod
    def from_matrix(cls, values, boundaries=None) -> "StepGraphon":
        """Build from a numerically computed matrix.

        The matrix is symmetrised and clipped to ``[0, 1]`` first, which is
        what solver output needs.
        """
        v = np.asarray(values, dtype=float)
        v = np.clip(0.5 * (v + v.T), 0.0, 1.0)
        if boundaries is None:
            return cls.from_values(v)
        return cls(boundaries, v)

    # -- basic properties ---------------------------------------------------

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.boundaries)

    @property
    def cell_weights(self) -> np.ndarray:
        w = self.widths
        return np.outer(w, w)

    def permute(self, perm: Sequence[int]) -> "StepGraphon":
        """Reorder blocks: new block ``k`` is old block ``perm[k]``."""
        perm = np.asarray(perm, dtype=int)
        if sorted(perm.tolist()) != list(range(self.m)):
            raise DomainError("perm must be a permutation of range(m)")
        w = self.widths[perm]
        b = np.concatenate([[0.0], np.cumsum(w)])
        b[-1] = 1.0
        return StepGraphon(b, self.values[np.ix_(perm, perm)])

    def refine(self, boundaries) -> "StepGraphon":
        """Same function expressed on a finer partition.

        ``boundaries`` must contain every boundary of ``self``.
        """
        nb = np.asarray(boundaries, dtype=float)
        idx = _locate(self.boundaries, nb)
        return StepGraphon(nb, self.values[np.ix_(idx, idx)])

    def __call__(self, x, y):
        """Pointwise evaluation (right-continuous convention)."""
        i = np.clip(np.searchsorted(self.boundaries, x, side="right") - 1, 0, self.m - 1)
        j = np.clip(np.searchsorted(self.boundaries, y, side="right") - 1, 0, self.m - 1)
        return self.values[i, j]

    def __eq__(self, other):
        if not isinstance(other, StepGraphon):
            return NotImplemented
        return np.array_equal(self.boundaries, other.boundaries) and np.array_equal(
            self.values, other.values
        )

    def __hash__(self):
        return hash((self.boundaries.tobytes(), self.values.tobytes()))

    def __repr__(self):
        return f"StepGraphon(m={self.m}, e={edge_density(self):.6g}, t={triangle_density(self):.6g})"

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {"boundaries": self.boundaries.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "StepGraphon":
        return cls(d["boundaries"], d["values"])

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, s: str) -> "StepGraphon":
        return cls.from_dict(json.loads(s))


def _locate(coarse: np.ndarray, fine: np.ndarray) -> np.ndarray:
    """Index of the coarse block containing each fine block."""
    if fine[0] != 0.0 or fine[-1] != 1.0 or np.any(np.diff(fine) <= 0):
        raise DomainError("refinement boundaries must be increasing from 0 to 1")
    mids = 0.5 * (fine[:-1] + fine[1:])
    idx = np.searchsorted(coarse, mids, side="right") - 1
    # every coarse boundary must be (numerically) present in the fine partition
    for b in coarse[1:-1]:
        if np.min(np.abs(fine - b)) > _BOUNDARY_TOL:
            raise DomainError("boundaries do not refine the graphon's partition")
    return np.clip(idx, 0, coarse.size - 2)


# -- the rate function --------------------------------------------------------


def rate_pointwise(u):
    """I0(u) = (u ln u + (1-u) ln(1-u)) / 2, with I0(0) = I0(1) = 0."""
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u > 1)):
        raise DomainError("I0 is defined on [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(u > 0, u * np.log(np.where(u > 0, u, 1.0)), 0.0)
        b = np.where(u < 1, (1 - u) * np.log(np.where(u < 1, 1 - u, 1.0)), 0.0)
    r = 0.5 * (a + b)
    return float(r) if r.ndim == 0 else r


def rate_derivative(u):
    """I0'(u) = ln(u / (1-u)) / 2, clamped away from the endpoints."""
    u = np.clip(np.asarray(u, dtype=float), DERIV_CLAMP, 1 - DERIV_CLAMP)
    r = 0.5 * (np.log(u) - np.log1p(-u))
    return float(r) if r.ndim == 0 else r


def rate_second_derivative(u):
    """I0''(u) = (1/u + 1/(1-u)) / 2, clamped away from the endpoints."""
    u = np.clip(np.asarray(u, dtype=float), DERIV_CLAMP, 1 - DERIV_CLAMP)
    r = 0.5 * (1.0 / u + 1.0 / (1.0 - u))
    return float(r) if r.ndim == 0 else r


def rate(g: StepGraphon) -> float:
    """I(g) = sum_ij w_i w_j I0(g_ij)."""
    return float(np.sum(g.cell_weights * rate_pointwise(g.values)))


# -- densities ----------------------------------------------------------------


def edge_density(g: StepGraphon) -> float:
    w = g.widths
    return float(w @ g.values @ w)


def aux_h(g: StepGraphon) -> StepGraphon:
    """h(x, y) = int g(x, z) g(y, z) dz, on the block structure of ``g``."""
    return StepGraphon(g.boundaries, _aux_h_values(g.values, g.widths))


def _aux_h_values(values: np.ndarray, widths: np.ndarray) -> np.ndarray:
    h = (values * widths) @ values
    # matmul is not guaranteed to return an exactly symmetric product
    h = 0.5 * (h + h.T)
    return np.clip(h, 0.0, 1.0)


def triangle_density(g: StepGraphon) -> float:
    """t(g) = sum_ijk w_i w_j w_k g_ij g_jk g_ki."""
    h = (g.values * g.widths) @ g.values
    return float(np.sum(g.cell_weights * g.values * h))


def hom_density(H, g: StepGraphon, max_terms: float = 1e9) -> float:
    """Homomorphism density t(H, g) by exact summation over block assignments.

    Parameters
    ----------
    H : SimpleGraph or Motif
        Pattern graph; only ``H.n`` and ``H.edges`` are used.
    g : StepGraphon
    max_terms : float
        Guard on ``m ** |V(H)|``, the number of block assignments.

    Raises
    ------
    ResourceError
        If the block-assignment count exceeds ``max_terms``.
    """
    n = H.n
    if float(g.m) ** n > max_terms:
        raise ResourceError(
            f"hom_density would sum {g.m}^{n} block assignments (guard {max_terms:g})"
        )
    if n == 0:
        return 1.0
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    if n > len(letters):
        raise ResourceError("pattern graph too large")
    operands, subs = [], []
    for v in range(n):
        operands.append(g.widths)
        subs.append(letters[v])
    for (i, j) in H.edges:
        operands.append(g.values)
        subs.append(letters[i - 1] + letters[j - 1])
    expr = ",".join(subs) + "->"
    return float(np.einsum(expr, *operands, optimize="greedy"))


# -- comparing step graphons --------------------------------------------------


def common_refinement(f: StepGraphon, g: StepGraphon):
    """Express ``f`` and ``g`` on the union of their partitions.

    Returns
    -------
    boundaries, F, G
        Shared boundaries and the two value matrices on them.
    """
    b = np.union1d(f.boundaries, g.boundaries)
    # merge boundaries that differ only by rounding
    keep = np.concatenate([[True], np.diff(b) > _BOUNDARY_TOL])
    b = b[keep]
    b[-1] = 1.0
    fi = _locate(f.boundaries, b)
    gi = _locate(g.boundaries, b)
    return b, f.values[np.ix_(fi, fi)], g.values[np.ix_(gi, gi)]


def l1_distance(f: StepGraphon, g: StepGraphon) -> float:
    """Labelled L1 distance  sum |f - g| over the common refinement."""
    b, F, G = common_refinement(f, g)
    w = np.diff(b)
    return float(np.sum(np.outer(w, w) * np.abs(F - G)))


def average_onto(g: StepGraphon, boundaries) -> StepGraphon:
    """Cell averages of ``g`` on an arbitrary partition.

    This is the L2-orthogonal projection onto step functions of the new
    partition; it preserves the edge density exactly.
    """
    nb = np.asarray(boundaries, dtype=float)
    # overlap[a, i] = |new block a intersected with old block i|
    lo = np.maximum(nb[:-1, None], g.boundaries[None, :-1])
    hi = np.minimum(nb[1:, None], g.boundaries[None, 1:])
    overlap = np.clip(hi - lo, 0.0, None)
    wn = np.diff(nb)
    P = overlap / wn[:, None]
    return StepGraphon.from_matrix(P @ g.values @ P.T, nb)

"""Cut-type and homomorphism-density distances between step graphons."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .graphon import StepGraphon, common_refinement, hom_density
from .graphs import DEFAULT_MOTIFS

__all__ = ["CutDistance", "cut_distance_labeled", "hom_metric", "EXACT_CUT_MAX_BLOCKS"]

EXACT_CUT_MAX_BLOCKS = 20


class CutDistance(NamedTuple):
    """Value of the labelled cut distance.

    ``exact`` is False when the value came from local search, in which case
    it is only a lower bound on the supremum.
    """

    value: float
    exact: bool


def cut_distance_labeled(
    f: StepGraphon, g: StepGraphon, *, restarts: int = 64, seed: int = 0
) -> CutDistance:
    """sup over measurable S, T of |int_{S x T} (f - g)|.

    On step functions the supremum is attained by unions of blocks, so with
    ``m`` blocks in the common refinement the problem is a bilinear
    maximisation over ``{0,1}^m x {0,1}^m``.  For fixed S the best T is the
    set of columns with positive (resp. negative) aggregate, so enumerating
    S is exact.  Past ``EXACT_CUT_MAX_BLOCKS`` blocks we fall back to
    alternating maximisation from seeded random starts.
    """
    b, F, G = common_refinement(f, g)
    w = np.diff(b)
    K = w[:, None] * (F - G) * w[None, :]
    m = K.shape[0]
    if m <= EXACT_CUT_MAX_BLOCKS:
        return CutDistance(_cut_exact(K), True)
    return CutDistance(_cut_alternating(K, restarts, seed), False)


def _cut_exact(K: np.ndarray) -> float:
    m = K.shape[0]
    best = 0.0
    chunk = 1 << min(m, 16)
    bits = np.arange(m, dtype=np.int64)
    for start in range(0, 1 << m, chunk):
        codes = np.arange(start, min(start + chunk, 1 << m), dtype=np.int64)
        S = ((codes[:, None] >> bits) & 1).astype(float)
        R = S @ K
        pos = np.where(R > 0, R, 0.0).sum(axis=1)
        neg = np.where(R < 0, R, 0.0).sum(axis=1)
        best = max(best, float(pos.max()), float(-neg.min()))
    return best


def _cut_alternating(K: np.ndarray, restarts: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    m = K.shape[0]
    best = 0.0
    for sign in (1.0, -1.0):
        A = sign * K
        for _ in range(restarts):
            s = rng.random(m) < 0.5
            prev = -np.inf
            while True:
                t = (s @ A) > 0
                s = (A @ t) > 0
                val = float(s @ A @ t)
                if val <= prev + 1e-15:
                    break
                prev = val
            best = max(best, prev)
    return best


def hom_metric(f: StepGraphon, g: StepGraphon, motifs=None, max_terms: float = 1e9) -> float:
    """Truncated homomorphism pseudometric  sum_j 2^-j |t(H_j, f) - t(H_j, g)|.

    ``motifs`` defaults to ``DEFAULT_MOTIFS`` (connected graphs on 2..4
    vertices).  Weights start at 1/2 for the first motif.
    """
    if motifs is None:
        motifs = DEFAULT_MOTIFS
    total = 0.0
    for j, H in enumerate(motifs, start=1):
        total += 0.5**j * abs(hom_density(H, f, max_terms) - hom_density(H, g, max_terms))
    return total

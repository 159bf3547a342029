"""Canonical block orderings as a cheap proxy for reduced-graphon comparison.

Deciding whether two graphons are equivalent up to measure-preserving
rearrangement is not algorithmically usable in general.  For step graphons
we instead sort blocks into a canonical order and compare labelled
distances; the result is an upper bound on the true reduced distance.
"""

from __future__ import annotations

import numpy as np

from .graphon import StepGraphon, l1_distance

__all__ = ["canonical_order", "canonicalize", "compare_reduced"]

# keys are compared after rounding so solver noise does not reorder blocks
KEY_DECIMALS = 6


def _keys(g: StepGraphon):
    V = np.round(g.values, KEY_DECIMALS) + 0.0
    deg = np.round(g.values @ g.widths, KEY_DECIMALS) + 0.0
    rows = np.sort(V, axis=1)
    return V, deg, rows


def canonical_order(g: StepGraphon, first=None) -> list:
    """Greedy canonical block order.

    Blocks are ranked by weighted degree, then by their sorted row, then by
    their values towards the blocks already placed.  Remaining ties go to
    the lowest current index, which makes the order idempotent.

    Parameters
    ----------
    first : int, optional
        Force this block to be placed first (used to enumerate alternatives
        among tied blocks).
    """
    V, deg, rows = _keys(g)
    w = np.round(g.widths, KEY_DECIMALS)
    m = g.m
    remaining = list(range(m))
    order = []
    if first is not None:
        order.append(first)
        remaining.remove(first)
    while remaining:
        best, best_key = None, None
        for i in remaining:
            key = (deg[i], tuple(rows[i]), V[i, i], tuple(V[i, order]), w[i])
            if best_key is None or key < best_key:
                best, best_key = i, key
        order.append(best)
        remaining.remove(best)
    return order


def _apply(g: StepGraphon, order) -> StepGraphon:
    if list(order) == list(range(g.m)):
        return g
    w = g.widths
    if np.all(w == w[0]):
        return StepGraphon(g.boundaries, g.values[np.ix_(order, order)])
    return g.permute(order)


def canonicalize(g: StepGraphon) -> StepGraphon:
    """Reorder blocks canonically; densities and the rate are unchanged."""
    return _apply(g, canonical_order(g))


def _first_tie_class(g: StepGraphon) -> list:
    V, deg, rows = _keys(g)
    keys = [(deg[i], tuple(rows[i]), V[i, i]) for i in range(g.m)]
    k0 = min(keys)
    return [i for i in range(g.m) if keys[i] == k0]


def compare_reduced(f: StepGraphon, g: StepGraphon, max_alternatives: int = 8) -> float:
    """Heuristic distance between the reduced graphons of ``f`` and ``g``.

    Minimum labelled L1 distance between the canonical form of ``f`` and a
    few canonical forms of ``g`` (one per choice of first block among the
    blocks tied on degree).  Always an upper bound on the L1 distance
    minimised over rearrangements.
    """
    cf = canonicalize(f)
    best = l1_distance(cf, canonicalize(g))
    for i in _first_tie_class(g)[:max_alternatives]:
        alt = _apply(g, canonical_order(g, first=i))
        best = min(best, l1_distance(cf, alt))
    return best

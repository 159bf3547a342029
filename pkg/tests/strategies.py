"""Hypothesis strategies shared by the test modules."""

import numpy as np
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from graphon_lab import StepGraphon

unit = st.floats(0.0, 1.0, allow_nan=False)


@st.composite
def step_graphons(draw, max_blocks=6, equal=False):
    m = draw(st.integers(1, max_blocks))
    A = draw(arrays(np.float64, (m, m), elements=unit))
    V = np.triu(A) + np.triu(A, 1).T
    if equal:
        return StepGraphon.from_values(V)
    w = draw(arrays(np.float64, m, elements=st.floats(0.05, 1.0)))
    b = np.concatenate([[0.0], np.cumsum(w / w.sum())])
    b[-1] = 1.0
    return StepGraphon(b, V)


@st.composite
def permutations_of(draw, m):
    return np.array(draw(st.permutations(list(range(m)))))

"""Microcanonical entropy of the edge/triangle graph ensemble via graphons.

Submodules
----------
graphon     step graphons, densities, the rate function
graphs      labelled simple graphs and motifs
distances   cut and homomorphism distances
boundary    closed-form optimizers and region boundaries
solver      constrained minimization of the rate function
canonical   canonical block orders for comparing optimizers
finite      exact counts, Wang-Landau and sampling at finite n
phase       entropy scans, branch tags, transitions, Legendre transform
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConvergenceError,
    DomainError,
    EmptyWindowError,
    GraphonLabError,
    InvalidEdgeError,
    NoSolutionError,
    ResourceError,
    ShapeMismatchError,
    SingularParameterError,
)
from .graphon import (  # noqa: E402
    StepGraphon,
    aux_h,
    edge_density,
    hom_density,
    rate,
    rate_pointwise,
    triangle_density,
)
from .graphs import Motif, SimpleGraph, checkerboard  # noqa: E402

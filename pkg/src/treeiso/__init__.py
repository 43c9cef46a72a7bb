"""Exact order-restricted convex estimation on directed trees.

Minimizes a sum of strongly convex node losses plus one-sided difference
penalties over the edges of a directed tree.  Infinite penalty weights act
as hard inequality constraints, which covers isotonic regression and its
relaxations on chains, rooted trees and arbitrary directed trees.  The
solver certifies every answer with an exact dual (flow) vector.
"""

from .errors import (
    CertificateError,
    ContractViolationError,
    InternalInvariantError,
    MalformedInstanceError,
    TreeIsoError,
)
from .loss import (
    LinearShift,
    Loss,
    LossGroup,
    QuarticQuadratic,
    WeightedQuadratic,
    equilibrium_t,
)
from .oracle import enumerate_optimum, pava, solve_reduced
from .solver import (
    EQ,
    GT,
    LT,
    Problem,
    Solver,
    SolveStats,
    build_initial_active_set,
    kkt_residual,
    objective_value,
    solve,
)
from .tree import (
    Arborescence,
    Attachment,
    DirectedTree,
    Subtree,
    component_of,
    decompose,
    map_back,
    normalize,
    tree_linear_solve,
)

__version__ = "0.1.0"

__all__ = [
    "Arborescence",
    "Attachment",
    "CertificateError",
    "ContractViolationError",
    "DirectedTree",
    "EQ",
    "GT",
    "InternalInvariantError",
    "LT",
    "LinearShift",
    "Loss",
    "LossGroup",
    "MalformedInstanceError",
    "Problem",
    "QuarticQuadratic",
    "Solver",
    "SolveStats",
    "Subtree",
    "TreeIsoError",
    "WeightedQuadratic",
    "build_initial_active_set",
    "component_of",
    "decompose",
    "enumerate_optimum",
    "equilibrium_t",
    "kkt_residual",
    "map_back",
    "normalize",
    "objective_value",
    "pava",
    "solve",
    "solve_reduced",
    "tree_linear_solve",
    "__version__",
]

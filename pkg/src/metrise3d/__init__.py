"""Local metrisability of torsion-free connections on 3-manifolds.

Given Christoffel symbols in closed form, the pipeline decides whether the
connection's geodesics are the geodesics of some (pseudo-)metric and, when
they are, constructs the metric.  All derivatives flow through truncated
Taylor jets built from exact symbolic partials.
"""

from .expr import DomainError, ParseError, differentiate, evaluate, jet_of, parse, to_source
from .jets import Jet, JetError, jet_div, jet_sqrt, lift_root
from .projective import (
    ConnectionSpec,
    PencilSpan,
    PointFrame,
    build_frame,
    extract_pencil,
    normalize_connection,
    q_obstruction,
    verify_metrisability_equation,
    weyl_tensor,
)
from .solver import SolverOptions, Verdict, decide
from .tensor import Covector, Epsilon, Sym2Contra, Sym2Cov, Tensor3Mixed, Vector

__version__ = "0.1.0"

__all__ = [
    "ConnectionSpec", "Covector", "DomainError", "Epsilon", "Jet",
    "JetError", "ParseError", "PencilSpan", "PointFrame", "SolverOptions",
    "Sym2Contra", "Sym2Cov", "Tensor3Mixed", "Vector", "Verdict",
    "build_frame", "decide", "differentiate", "evaluate", "extract_pencil",
    "jet_div", "jet_of", "jet_sqrt", "lift_root", "normalize_connection",
    "parse", "q_obstruction", "to_source", "verify_metrisability_equation",
    "weyl_tensor",
]

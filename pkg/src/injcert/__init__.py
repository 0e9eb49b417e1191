"""Numerical toolkit for global injectivity of maps R^n -> R^n.

Checks the spectral hypotheses (eigenvalues of F' bounded away from zero and
a definite symmetric part F' + F'^T) on grids, builds the merit function of
a candidate collision, runs a numerical mountain pass on it, searches for
collisions and inverts F pointwise.
"""

__version__ = "0.1.0"

from .certify import CertificationVerdict, Regime, Status, certify_box, check_point, monotonicity_probe
from .collide import CollisionSearch, CollisionWitness, InverseResult, find_collision, inverse_jacobian, newton_invert
from .maps import BUILTIN_IDS, CorpusEntry, JacobianKind, MapSpec, get_builtin, map_from_expr
from .merit import MeritProblem, eval_I, eval_J, grad_J, isolated_zero_radius, jac_I, make_merit, ring_level
from .mountainpass import (
    MPOutcome,
    MPStatus,
    Path,
    deform,
    extract_singularity_witness,
    init_path,
    ps_diagnostics,
)

__all__ = [
    "BUILTIN_IDS",
    "CertificationVerdict",
    "CollisionSearch",
    "CollisionWitness",
    "CorpusEntry",
    "InverseResult",
    "JacobianKind",
    "MPOutcome",
    "MPStatus",
    "MapSpec",
    "MeritProblem",
    "Path",
    "Regime",
    "Status",
    "certify_box",
    "check_point",
    "deform",
    "eval_I",
    "eval_J",
    "extract_singularity_witness",
    "find_collision",
    "get_builtin",
    "grad_J",
    "init_path",
    "inverse_jacobian",
    "isolated_zero_radius",
    "jac_I",
    "make_merit",
    "map_from_expr",
    "monotonicity_probe",
    "newton_invert",
    "ps_diagnostics",
    "ring_level",
]

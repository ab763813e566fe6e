"""Bioenergetic runner model with optimal pacing and in-race fueling.

The model tracks velocity, fat and glycogen energy stores, and an ingested
nutrition compartment; mechanical work splits between the stores through a
velocity-dependent fuel-allocation curve.  Maximizing distance over a fixed
time under the force and energy constraints is transcribed into a
bound-constrained NLP (forward Euler, total-variation regularized control)
and solved with an augmented-Lagrangian method; a single-shooting optimizer
and discrete Pontryagin diagnostics cross-check the solutions.
"""

from .bioenergetics import (
    Mesh,
    RunnerParams,
    State,
    Trajectory,
    distance,
    energy_audit,
    euler_step,
    simulate,
)
from .glyc import GlycCurve, InvalidCurveError, build_glyc_curve, glyc_deriv, glyc_eval
from .nutrition import (
    KCAL_TO_KJ,
    NutritionStrategy,
    builtin_strategy,
    pulse_profile,
    world_record_strategy,
)
from .pmp import (
    AdjointTrajectory,
    ArcSegmentation,
    PmpReport,
    adjoint_backward,
    boundary_force,
    classify_arcs,
    glc_check,
    switching_function,
    verify_instance,
)
from .shooting import ShootingConfig, ShootingResult, shooting_gradient, shooting_optimize
from .solver import SolveStatus, SolverConfig, SolverReport, solve
from .transcription import (
    DecisionLayout,
    NlpProblem,
    assemble,
    default_start,
    objective_eval,
    pack,
    tv_split,
    unpack,
)

__version__ = "0.1.0"

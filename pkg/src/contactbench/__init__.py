"""Frictional-contact solver library and benchmark harness."""

from .cones import (
    FrictionCone,
    clamp_pyramid,
    cone_contains,
    de_saxce_correction,
    distance_to_cone,
    distance_to_dual,
    project_dual,
    project_horizontal,
    project_soc,
)
from .problem import (
    ContactBenchError,
    ContactProblem,
    ContactSolution,
    FactorizationError,
    OracleFailureError,
    ProblemFormatError,
    Residuals,
    SingularBlockError,
    SlidingSolveError,
    SolverConfig,
    SolveTrace,
    UnsupportedGeometryError,
    compute_residuals,
    load_problem,
    problem_from_dict,
    problem_to_dict,
    save_problem,
)
from .solvers import (
    SolverKind,
    analytic_single_contact,
    bisection_sliding,
    ccp_stationarity,
    lcp_stationarity,
    over_relax,
    solve,
    solve_ccp_admm,
    solve_ccp_pgs,
    solve_lcp_pgs,
    solve_ncp_pgs,
    solve_raisim,
    solve_staggered,
)
from .dynamics import (
    BodyModel,
    ContactPatch,
    ExternalForce,
    RigidBodyState,
    Scene,
    WarmStartCache,
    assemble_delassus,
    build_contact_problem,
    build_jacobian,
    compose_target_velocity,
    compute_free_velocity,
    detect_contacts,
    load_scene,
    mechanical_energy,
    save_scene,
    scene_from_dict,
    scene_to_dict,
    step_scene,
)

__version__ = "0.1.0"

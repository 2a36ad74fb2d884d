"""Contact problem representation, residual metrics and solver configuration.

A contact problem is the tuple (G, g, mu, R): the Delassus matrix, the free
velocity of the contact points (already offset by the target velocity), one
friction coefficient per contact and an optional diagonal compliance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cones import (
    FrictionCone,
    de_saxce_correction,
    distance_to_cone,
    distance_to_dual,
)

SYMMETRY_TOL = 1e-10
EIGENVALUE_TOL = 1e-10


class ContactBenchError(Exception):
    """Base class for solver and dynamics errors."""


class SingularBlockError(ContactBenchError):
    def __init__(self, contact_index: int, detail: str = ""):
        self.contact_index = contact_index
        msg = f"singular diagonal block at contact {contact_index}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class SlidingSolveError(ContactBenchError):
    def __init__(self, contact_index: int, detail: str = ""):
        self.contact_index = contact_index
        msg = f"sliding subproblem failed at contact {contact_index}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class FactorizationError(ContactBenchError):
    def __init__(self, rho: float, detail: str = ""):
        self.rho = rho
        msg = f"factorization of the regularized Delassus matrix failed (rho={rho})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class OracleFailureError(ContactBenchError):
    pass


class UnsupportedGeometryError(ContactBenchError):
    pass


class ProblemFormatError(ValueError):
    """Raised when a problem file does not match the JSON schema."""


@dataclass(frozen=True)
class ContactProblem:
    """The (G, g, mu, R) tuple every solver consumes.

    Per-contact components are ordered (N, T1, T2) within each 3-block.  The
    free velocity is stored pre-offset by the target velocity, so solvers
    never see restitution or Baumgarte terms.
    """

    delassus: np.ndarray
    free_velocity: np.ndarray
    cones: tuple
    compliance: Optional[np.ndarray] = None

    def __post_init__(self):
        G = np.asarray(self.delassus, dtype=float)
        g = np.asarray(self.free_velocity, dtype=float)
        object.__setattr__(self, "delassus", G)
        object.__setattr__(self, "free_velocity", g)
        object.__setattr__(self, "cones", tuple(self.cones))
        nc = len(self.cones)
        if G.shape != (3 * nc, 3 * nc):
            raise ValueError(
                f"delassus: expected shape {(3 * nc, 3 * nc)}, got {G.shape}"
            )
        if g.shape != (3 * nc,):
            raise ValueError(f"free_velocity: expected {3 * nc} entries")
        if nc > 0:
            scale = np.linalg.norm(G)
            if scale > 0.0 and np.linalg.norm(G - G.T) > SYMMETRY_TOL * scale:
                raise ValueError("delassus matrix is not symmetric")
            min_eig = float(np.linalg.eigvalsh(0.5 * (G + G.T))[0])
            if min_eig < -EIGENVALUE_TOL * max(scale, 1.0):
                raise ValueError(
                    f"delassus matrix is not positive semi-definite (min eig {min_eig})"
                )
        if self.compliance is not None:
            R = np.asarray(self.compliance, dtype=float)
            if R.shape != (3 * nc,):
                raise ValueError(f"compliance: expected {3 * nc} entries")
            if np.any(R < 0.0):
                raise ValueError("compliance entries must be >= 0")
            object.__setattr__(self, "compliance", R)

    @property
    def num_contacts(self) -> int:
        return len(self.cones)

    @property
    def size(self) -> int:
        return 3 * self.num_contacts

    def effective_delassus(self) -> np.ndarray:
        """G~ = G + R: the damped matrix the solvers actually operate on."""
        if self.compliance is None:
            return self.delassus
        return self.delassus + np.diag(self.compliance)

    def block(self, i: int) -> np.ndarray:
        """3x3 diagonal block of the effective Delassus matrix."""
        sl = slice(3 * i, 3 * i + 3)
        B = self.delassus[sl, sl]
        if self.compliance is not None:
            B = B + np.diag(self.compliance[sl])
        return B

    def contact_velocity(self, lam) -> np.ndarray:
        """c = G lam + g (physical velocity, compliance excluded)."""
        lam = np.asarray(lam, dtype=float)
        return self.delassus @ lam + self.free_velocity

    def effective_velocity(self, lam) -> np.ndarray:
        """c~ = (G + R) lam + g, the velocity seen by the compliant model."""
        lam = np.asarray(lam, dtype=float)
        c = self.delassus @ lam + self.free_velocity
        if self.compliance is not None:
            c = c + self.compliance * lam
        return c

    @staticmethod
    def from_arrays(
        delassus,
        free_velocity,
        mus: Sequence[float],
        compliance=None,
    ) -> "ContactProblem":
        cones = tuple(FrictionCone(float(m)) for m in mus)
        return ContactProblem(
            np.asarray(delassus, dtype=float),
            np.asarray(free_velocity, dtype=float),
            cones,
            None if compliance is None else np.asarray(compliance, dtype=float),
        )


@dataclass(frozen=True)
class Residuals:
    """Per-contact NCP optimality measures and their maximum.

    eps_p is the distance of lam to K_mu, eps_d the distance of c + Gamma to
    the dual cone, eps_c the absolute complementarity <lam, c + Gamma>.
    """

    eps_p: np.ndarray
    eps_d: np.ndarray
    eps_c: np.ndarray

    @property
    def ncp_criterion(self) -> float:
        if self.eps_p.size == 0:
            return 0.0
        return float(
            max(self.eps_p.max(), self.eps_d.max(), self.eps_c.max())
        )


def compute_residuals(problem: ContactProblem, lam) -> Residuals:
    """Evaluate the De Saxce NCP residuals of an impulse candidate.

    The velocity used is the one of the model actually solved: when the
    problem carries compliance, c~ = (G + R) lam + g.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (problem.size,):
        raise ValueError(f"lam: expected {problem.size} entries, got {lam.shape}")
    c = problem.effective_velocity(lam)
    nc = problem.num_contacts
    eps_p = np.zeros(nc)
    eps_d = np.zeros(nc)
    eps_c = np.zeros(nc)
    for i in range(nc):
        sl = slice(3 * i, 3 * i + 3)
        cone = problem.cones[i]
        lam_i = lam[sl]
        shifted = c[sl] + de_saxce_correction(c[sl], cone.mu)
        eps_p[i] = distance_to_cone(cone, lam_i)
        eps_d[i] = distance_to_dual(cone, shifted)
        eps_c[i] = abs(float(lam_i @ shifted))
    return Residuals(eps_p, eps_d, eps_c)


@dataclass
class SolverConfig:
    """Shared solver knobs.

    over_relaxation is the weight on the previous iterate in the damped
    update lam <- alpha*lam_prev + (1-alpha)*lam_new; 0 disables it.
    admm_rho <= 0 selects the default 0.1*trace(G)/(3 nc).
    """

    max_iterations: int = 100
    eps_abs: float = 1e-6
    over_relaxation: float = 0.0
    admm_rho: float = 0.0
    adaptive_rho: bool = False
    warm_start: Optional[np.ndarray] = None
    warm_dual: Optional[np.ndarray] = None
    warm_rho: Optional[float] = None
    stag_outer_iterations: int = 5
    raisim_alpha0: float = 0.9
    raisim_gamma: float = 0.99
    raisim_alpha_min: float = 0.1
    record_trace: bool = False
    trace_lambda_cap: int = 0
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.eps_abs <= 0.0:
            raise ValueError("eps_abs must be > 0")
        if not (0.0 <= self.over_relaxation < 2.0):
            raise ValueError("over_relaxation must lie in [0, 2)")


@dataclass
class SolveTrace:
    """Optional per-iteration diagnostics attached to a solution."""

    criteria: list = field(default_factory=list)
    lambdas: list = field(default_factory=list)
    branch_counts: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "criteria": [float(v) for v in self.criteria],
                "lambdas": [list(map(float, lam)) for lam in self.lambdas],
                "branch_counts": {k: int(v) for k, v in self.branch_counts.items()},
            }
        )


@dataclass
class ContactSolution:
    """Solver output: impulses, velocities, optimality metrics and stats.

    stationarity is the solver's own stopping measure; residuals always hold
    the De Saxce criterion so models can be compared on one scale.  dual_state
    and rho are populated by the splitting solver for warm starts, and
    branch_counts by the per-contact bisection solver.
    """

    lam: np.ndarray
    contact_velocity: np.ndarray
    residuals: Residuals
    iterations: int
    converged: bool
    solve_time: float
    stationarity: float = 0.0
    trace: Optional[SolveTrace] = None
    dual_state: Optional[np.ndarray] = None
    rho: Optional[float] = None
    branch_counts: Optional[dict] = None


def empty_solution() -> ContactSolution:
    """Total answer for the degenerate zero-contact problem."""
    return ContactSolution(
        lam=np.zeros(0),
        contact_velocity=np.zeros(0),
        residuals=Residuals(np.zeros(0), np.zeros(0), np.zeros(0)),
        iterations=0,
        converged=True,
        solve_time=0.0,
        stationarity=0.0,
    )


def problem_to_dict(problem: ContactProblem) -> dict:
    out = {
        "num_contacts": problem.num_contacts,
        "delassus": problem.delassus.tolist(),
        "free_velocity": problem.free_velocity.tolist(),
        "mus": [c.mu for c in problem.cones],
    }
    if problem.compliance is not None:
        out["compliance"] = problem.compliance.tolist()
    return out


def problem_from_dict(data: dict) -> ContactProblem:
    """Parse the problem JSON schema, naming the offending field on error."""
    if not isinstance(data, dict):
        raise ProblemFormatError("problem: expected a JSON object")
    try:
        nc = int(data["num_contacts"])
    except (KeyError, TypeError, ValueError):
        raise ProblemFormatError("num_contacts: expected an integer") from None
    if nc < 0:
        raise ProblemFormatError("num_contacts: must be >= 0")
    n = 3 * nc

    def _vector(name, expected):
        raw = data.get(name)
        if raw is None:
            raise ProblemFormatError(f"{name}: missing field")
        arr = np.asarray(raw, dtype=float)
        if arr.shape != (expected,):
            raise ProblemFormatError(f"{name}: expected {expected} entries")
        return arr

    raw_G = data.get("delassus")
    if raw_G is None:
        raise ProblemFormatError("delassus: missing field")
    G = np.asarray(raw_G, dtype=float)
    if G.shape == (n * n,):
        G = G.reshape(n, n)
    if G.shape != (n, n):
        raise ProblemFormatError(f"delassus: expected a {n}x{n} row-major array")
    g = _vector("free_velocity", n)
    mus = _vector("mus", nc)
    compliance = None
    if data.get("compliance") is not None:
        compliance = _vector("compliance", n)
    try:
        return ContactProblem.from_arrays(G, g, mus, compliance)
    except ValueError as exc:
        raise ProblemFormatError(str(exc)) from None


def load_problem(path) -> ContactProblem:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ProblemFormatError(f"problem file: invalid JSON ({exc})") from None
    return problem_from_dict(data)


def save_problem(problem: ContactProblem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(problem_to_dict(problem), fh, indent=2)
        fh.write("\n")

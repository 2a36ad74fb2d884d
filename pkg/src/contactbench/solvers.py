"""The six contact solvers and the analytic single-contact oracle.

Every solver consumes a ContactProblem and a SolverConfig and returns a
ContactSolution.  All of them report the same De Saxce NCP residuals so that
solutions of the different contact models can be compared on one scale, but
each stops on its own model's optimality measure:

  * LCP/PGS     - natural-map residual of the pyramidal (box) projection
  * CCP/PGS     - natural-map residual of the cone projection
  * CCP/ADMM    - primal gap ||lam - z|| and dual gap rho*||z - z_prev||
  * RaiSim      - iterate stationarity plus the Signorini residual on
                  active contacts (the De Saxce criterion is reported but
                  cannot be used for termination: the model violates the
                  maximum dissipation principle by construction)
  * NCP/PGS     - the full De Saxce criterion
  * staggered   - the full De Saxce criterion, checked per outer iteration
"""

from __future__ import annotations

import enum
import time
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.optimize

from .cones import (
    FrictionCone,
    clamp_pyramid,
    cone_contains,
    de_saxce_correction,
    project_horizontal,
    project_soc,
)
from .problem import (
    ContactProblem,
    ContactSolution,
    FactorizationError,
    OracleFailureError,
    Residuals,
    SingularBlockError,
    SlidingSolveError,
    SolveTrace,
    SolverConfig,
    compute_residuals,
    empty_solution,
)


class SolverKind(enum.Enum):
    LCP_PGS = "lcp-pgs"
    CCP_PGS = "ccp-pgs"
    CCP_ADMM = "ccp-admm"
    RAISIM = "raisim"
    NCP_PGS = "ncp-pgs"
    STAGGERED = "staggered"


def over_relax(lam_prev, lam_new, alpha: float) -> np.ndarray:
    """Damped update alpha*lam_prev + (1-alpha)*lam_new.

    alpha=0 returns the new iterate, alpha=1 freezes the previous one;
    values in (1, 2) extrapolate past the previous iterate.
    """
    if not (0.0 <= alpha < 2.0):
        raise ValueError(f"alpha must lie in [0, 2), got {alpha}")
    lam_prev = np.asarray(lam_prev, dtype=float)
    lam_new = np.asarray(lam_new, dtype=float)
    return alpha * lam_prev + (1.0 - alpha) * lam_new


# ---------------------------------------------------------------------------
# stationarity measures

def ccp_stationarity(G, g, cones, lam) -> float:
    """Natural-map residual ||lam - proj_K(lam - (G lam + g))||_inf."""
    c = G @ lam + g
    res = 0.0
    for i, cone in enumerate(cones):
        sl = slice(3 * i, 3 * i + 3)
        d = lam[sl] - project_soc(cone, lam[sl] - c[sl])
        res = max(res, float(np.abs(d).max()))
    return res


def lcp_stationarity(G, g, cones, lam) -> float:
    """Natural-map residual of the pyramidal model.

    The projection mirrors the PGS sweep: normal part clipped to >= 0, then
    the tangential part clamped componentwise to the updated bound.  Its
    fixed points are exactly the LCP solutions, so this is the stopping
    measure for the pyramid model (the De Saxce criterion stays nonzero at
    pyramid corners and would never trigger).
    """
    c = G @ lam + g
    res = 0.0
    for i, cone in enumerate(cones):
        j = 3 * i
        target = lam[j:j + 3] - c[j:j + 3]
        n_new = max(0.0, target[0])
        t_new = np.clip(target[1:], -cone.mu * n_new, cone.mu * n_new)
        res = max(
            res,
            abs(lam[j] - n_new),
            float(np.abs(lam[j + 1:j + 3] - t_new).max()),
        )
    return res


def _raisim_stop_residual(cones, lam, c, d_lam, eps) -> float:
    """Iterate change combined with |c_N| on contacts carrying load."""
    res = d_lam
    for i in range(len(cones)):
        if lam[3 * i] > eps:
            res = max(res, abs(c[3 * i]))
    return res


# ---------------------------------------------------------------------------
# Gauss-Seidel family

def _check_blocks_pgs(problem: ContactProblem) -> None:
    for i in range(problem.num_contacts):
        B = problem.block(i)
        if B[0, 0] <= 0.0 or min(B[1, 1], B[2, 2]) <= 0.0:
            raise SingularBlockError(i, "zero diagonal entry")


def _finalize(problem, lam, iterations, converged, t0, stationarity, trace):
    return ContactSolution(
        lam=lam,
        contact_velocity=problem.contact_velocity(lam),
        residuals=compute_residuals(problem, lam),
        iterations=iterations,
        converged=converged,
        solve_time=time.perf_counter() - t0,
        stationarity=stationarity,
        trace=trace,
    )


def _init_lambda(problem: ContactProblem, config: SolverConfig) -> np.ndarray:
    if config.warm_start is not None:
        lam0 = np.asarray(config.warm_start, dtype=float)
        if lam0.shape != (problem.size,):
            raise ValueError(f"warm_start: expected {problem.size} entries")
        return lam0.copy()
    return np.zeros(problem.size)


def _pgs_loop(problem, config, tangential_update, stop_residual):
    """Shared PGS skeleton; the two callbacks fix the contact model."""
    t0 = time.perf_counter()
    if problem.num_contacts == 0:
        return empty_solution()
    _check_blocks_pgs(problem)
    G = problem.effective_delassus()
    g = problem.free_velocity
    nc = problem.num_contacts
    cones = problem.cones
    lam = _init_lambda(problem, config)
    trace = SolveTrace() if config.record_trace else None
    c = G @ lam + g
    converged = False
    res = np.inf
    it = 0
    for it in range(1, config.max_iterations + 1):
        lam_prev = lam.copy() if config.over_relaxation > 0.0 else None
        for i in range(nc):
            j = 3 * i
            mu = cones[i].mu
            gnn = G[j, j]
            d_n = max(0.0, lam[j] - c[j] / gnn) - lam[j]
            if d_n != 0.0:
                lam[j] += d_n
                c += G[:, j] * d_n
            step_t = 1.0 / min(G[j + 1, j + 1], G[j + 2, j + 2])
            t_new = tangential_update(
                mu, lam[j], lam[j + 1:j + 3] - step_t * c[j + 1:j + 3]
            )
            d_t = t_new - lam[j + 1:j + 3]
            if d_t[0] != 0.0 or d_t[1] != 0.0:
                lam[j + 1:j + 3] = t_new
                c += G[:, j + 1:j + 3] @ d_t
        if lam_prev is not None:
            lam = over_relax(lam_prev, lam, config.over_relaxation)
        c = G @ lam + g
        res = stop_residual(G, g, cones, lam, c)
        if trace is not None:
            trace.criteria.append(res)
            if len(trace.lambdas) < config.trace_lambda_cap:
                trace.lambdas.append(lam.copy())
        if res <= config.eps_abs:
            converged = True
            break
    return _finalize(problem, lam, it, converged, t0, res, trace)


def solve_lcp_pgs(problem: ContactProblem, config: SolverConfig) -> ContactSolution:
    """Projected Gauss-Seidel on the pyramidal (LCP) model."""

    def update(mu, lam_n, t):
        return np.clip(t, -mu * lam_n, mu * lam_n)

    def stop(G, g, cones, lam, c):
        return lcp_stationarity(G, g, cones, lam)

    return _pgs_loop(problem, config, update, stop)


def solve_ncp_pgs(problem: ContactProblem, config: SolverConfig) -> ContactSolution:
    """Projected Gauss-Seidel on the exact NCP model (radial friction clamp)."""

    def update(mu, lam_n, t):
        radius = mu * lam_n
        norm_t = np.hypot(t[0], t[1])
        if norm_t <= radius or norm_t == 0.0:
            return t
        return t * (radius / norm_t)

    def stop(G, g, cones, lam, c):
        return _ncp_criterion_from_velocity(cones, lam, c)

    return _pgs_loop(problem, config, update, stop)


def _ncp_criterion_from_velocity(cones, lam, c) -> float:
    res = 0.0
    for i, cone in enumerate(cones):
        sl = slice(3 * i, 3 * i + 3)
        lam_i = lam[sl]
        shifted = c[sl] + de_saxce_correction(c[sl], cone.mu)
        eps_p = np.linalg.norm(lam_i - project_soc(cone, lam_i))
        eps_d = np.linalg.norm(shifted - project_soc(cone.dual(), shifted))
        eps_c = abs(float(lam_i @ shifted))
        res = max(res, eps_p, eps_d, eps_c)
    return res


def solve_ccp_pgs(problem: ContactProblem, config: SolverConfig) -> ContactSolution:
    """Per-contact gradient steps with cone projection on the relaxed model."""
    t0 = time.perf_counter()
    if problem.num_contacts == 0:
        return empty_solution()
    nc = problem.num_contacts
    G = problem.effective_delassus()
    g = problem.free_velocity
    cones = problem.cones
    steps = np.empty(nc)
    for i in range(nc):
        tr = np.trace(problem.block(i))
        if tr <= 0.0:
            raise SingularBlockError(i, "zero-trace block")
        steps[i] = 3.0 / tr
    lam = _init_lambda(problem, config)
    trace = SolveTrace() if config.record_trace else None
    c = G @ lam + g
    converged = False
    res = np.inf
    it = 0
    for it in range(1, config.max_iterations + 1):
        lam_prev = lam.copy() if config.over_relaxation > 0.0 else None
        for i in range(nc):
            j = 3 * i
            new_i = project_soc(cones[i], lam[j:j + 3] - steps[i] * c[j:j + 3])
            d = new_i - lam[j:j + 3]
            if d.any():
                lam[j:j + 3] = new_i
                c += G[:, j:j + 3] @ d
        if lam_prev is not None:
            lam = over_relax(lam_prev, lam, config.over_relaxation)
        c = G @ lam + g
        res = ccp_stationarity(G, g, cones, lam)
        if trace is not None:
            trace.criteria.append(res)
            if len(trace.lambdas) < config.trace_lambda_cap:
                trace.lambdas.append(lam.copy())
        if res <= config.eps_abs:
            converged = True
            break
    return _finalize(problem, lam, it, converged, t0, res, trace)


# ---------------------------------------------------------------------------
# ADMM

def default_admm_rho(problem: ContactProblem) -> float:
    G = problem.effective_delassus()
    return 0.1 * float(np.trace(G)) / max(problem.size, 1)


def _project_cones(cones, x) -> np.ndarray:
    out = np.empty_like(x)
    for i, cone in enumerate(cones):
        sl = slice(3 * i, 3 * i + 3)
        out[sl] = project_soc(cone, x[sl])
    return out


def solve_ccp_admm(problem: ContactProblem, config: SolverConfig) -> ContactSolution:
    """Operator splitting on the relaxed model with a regularized factorization.

    Returns the cone-feasible iterate z as the force estimate.  Supports warm
    starting of (lam, gamma, rho); the optional adaptive-rho rule rebalances
    the primal/dual gaps at the cost of a re-factorization.
    """
    t0 = time.perf_counter()
    if problem.num_contacts == 0:
        return empty_solution()
    G = problem.effective_delassus()
    g = problem.free_velocity
    cones = problem.cones
    rho = config.admm_rho if config.admm_rho > 0.0 else default_admm_rho(problem)
    if config.warm_rho is not None and config.warm_rho > 0.0:
        rho = float(config.warm_rho)

    def factor(r):
        try:
            return scipy.linalg.cho_factor(G + r * np.eye(problem.size))
        except scipy.linalg.LinAlgError as exc:
            raise FactorizationError(r, str(exc)) from None

    chol = factor(rho)
    lam = _init_lambda(problem, config)
    z = _project_cones(cones, lam)
    gamma = (
        np.asarray(config.warm_dual, dtype=float).copy()
        if config.warm_dual is not None
        else np.zeros(problem.size)
    )
    trace = SolveTrace() if config.record_trace else None
    converged = False
    it = 0
    primal_gap = np.inf
    dual_gap = np.inf
    for it in range(1, config.max_iterations + 1):
        lam = -scipy.linalg.cho_solve(chol, g - rho * z + gamma)
        z_prev = z
        z = _project_cones(cones, lam + gamma / rho)
        gamma = gamma + rho * (lam - z)
        primal_gap = float(np.abs(lam - z).max())
        dual_gap = rho * float(np.abs(z - z_prev).max())
        if trace is not None:
            trace.criteria.append(max(primal_gap, dual_gap))
            if len(trace.lambdas) < config.trace_lambda_cap:
                trace.lambdas.append(z.copy())
        if primal_gap <= config.eps_abs and dual_gap <= config.eps_abs:
            converged = True
            break
        if config.adaptive_rho:
            if primal_gap > 10.0 * dual_gap:
                rho *= 2.0
                chol = factor(rho)
            elif dual_gap > 10.0 * primal_gap:
                rho *= 0.5
                chol = factor(rho)
    stationarity = ccp_stationarity(G, g, cones, z)
    sol = _finalize(problem, z, it, converged, t0, stationarity, trace)
    sol.dual_state = gamma  # carried by the stepper for warm starts
    sol.rho = rho
    return sol


# ---------------------------------------------------------------------------
# RaiSim per-contact bisection

def bisection_sliding(G_ii, g_tilde, cone: FrictionCone, lambda_v0,
                      contact_index: int = 0) -> np.ndarray:
    """Minimize the local quadratic over the ellipse K_mu intersected with
    the zero-normal-velocity plane, by bisection on the derivative of the
    polar-angle parameterization.

    The normal force follows from the plane constraint:
        lam_N(theta) = -g_N / (G_NN + mu*(G_NT1 cos + G_NT2 sin)),
    so the constraint |G_N lam + g_N| = 0 holds by construction and the
    result lies on the cone boundary.
    """
    G_ii = np.asarray(G_ii, dtype=float)
    g_tilde = np.asarray(g_tilde, dtype=float)
    mu = cone.mu
    g_n = g_tilde[0]
    if g_n > 0.0:
        raise SlidingSolveError(
            contact_index, "plane requires lam_N < 0 (takeoff case, g_N > 0)"
        )
    if G_ii[0, 0] <= 0.0:
        raise SingularBlockError(contact_index, "nonpositive normal diagonal")
    if g_n == 0.0 or mu == 0.0:
        lam_n = -g_n / G_ii[0, 0]
        return np.array([max(0.0, lam_n), 0.0, 0.0])

    gn1, gn2 = G_ii[0, 1], G_ii[0, 2]

    def lam_of(theta):
        ct, st = np.cos(theta), np.sin(theta)
        denom = G_ii[0, 0] + mu * (gn1 * ct + gn2 * st)
        if denom <= 0.0:
            return None
        lam_n = -g_n / denom
        return np.array([lam_n, mu * lam_n * ct, mu * lam_n * st])

    def objective(theta):
        lam = lam_of(theta)
        if lam is None:
            return np.inf
        return 0.5 * lam @ G_ii @ lam + g_tilde @ lam

    def derivative(theta):
        ct, st = np.cos(theta), np.sin(theta)
        denom = G_ii[0, 0] + mu * (gn1 * ct + gn2 * st)
        lam_n = -g_n / denom
        d_denom = mu * (-gn1 * st + gn2 * ct)
        d_lam_n = g_n * d_denom / denom**2
        u = np.array([1.0, mu * ct, mu * st])
        du = np.array([0.0, -mu * st, mu * ct])
        d_lam = d_lam_n * u + lam_n * du
        c = G_ii @ (lam_n * u) + g_tilde
        return float(d_lam @ c)

    # Coarse scan to bracket the minimizer, seeded at the direction of the
    # unconstrained candidate's tangential part.
    theta0 = np.arctan2(lambda_v0[2], lambda_v0[1]) if lambda_v0 is not None else 0.0
    n_scan = 128
    thetas = theta0 + np.linspace(0.0, 2.0 * np.pi, n_scan, endpoint=False)
    values = np.array([objective(t) for t in thetas])
    if not np.isfinite(values).any():
        raise SlidingSolveError(contact_index, "empty feasible arc")
    k = int(np.argmin(values))
    lo = thetas[k - 1]
    hi = thetas[(k + 1) % n_scan]
    if hi < lo:
        hi += 2.0 * np.pi
    d_lo, d_hi = derivative(lo), derivative(hi)
    if d_lo > 0.0 or d_hi < 0.0:
        raise SlidingSolveError(contact_index, "derivative does not bracket a minimum")
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if derivative(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    lam = lam_of(0.5 * (lo + hi))
    if lam is None or lam[0] < 0.0:
        raise SlidingSolveError(contact_index, "infeasible minimizer")
    return lam


def solve_raisim(problem: ContactProblem, config: SolverConfig) -> ContactSolution:
    """Per-contact branching (takeoff / stiction / sliding) with a damped
    update lam <- alpha*lam + (1-alpha)*lam*, alpha decaying toward alpha_min.
    """
    t0 = time.perf_counter()
    if problem.num_contacts == 0:
        return empty_solution()
    nc = problem.num_contacts
    G = problem.effective_delassus()
    g = problem.free_velocity
    cones = problem.cones
    blocks = [problem.block(i) for i in range(nc)]
    inverses = []
    for i, B in enumerate(blocks):
        try:
            inverses.append(np.linalg.inv(B))
        except np.linalg.LinAlgError:
            raise SingularBlockError(i) from None
    lam = _init_lambda(problem, config)
    trace = SolveTrace() if config.record_trace else None
    branch_counts = {"takeoff": 0, "stiction": 0, "sliding": 0}
    alpha = config.raisim_alpha0
    converged = False
    res = np.inf
    it = 0
    for it in range(1, config.max_iterations + 1):
        lam_sweep = lam.copy()
        for i in range(nc):
            j = 3 * i
            g_tilde = G[j:j + 3] @ lam + g[j:j + 3] - blocks[i] @ lam[j:j + 3]
            if g_tilde[0] > 0.0:
                branch_counts["takeoff"] += 1
                lam_star = np.zeros(3)
            else:
                lam_v0 = -inverses[i] @ g_tilde
                if cone_contains(cones[i], lam_v0):
                    branch_counts["stiction"] += 1
                    lam_star = lam_v0
                else:
                    branch_counts["sliding"] += 1
                    lam_star = bisection_sliding(
                        blocks[i], g_tilde, cones[i], lam_v0, contact_index=i
                    )
            lam[j:j + 3] = alpha * lam[j:j + 3] + (1.0 - alpha) * lam_star
            alpha = config.raisim_gamma * alpha + (
                1.0 - config.raisim_gamma
            ) * config.raisim_alpha_min
        d_lam = float(np.abs(lam - lam_sweep).max())
        c = G @ lam + g
        res = _raisim_stop_residual(cones, lam, c, d_lam, config.eps_abs)
        if trace is not None:
            trace.criteria.append(res)
            if len(trace.lambdas) < config.trace_lambda_cap:
                trace.lambdas.append(lam.copy())
        if res <= config.eps_abs:
            converged = True
            break
    if trace is not None:
        trace.branch_counts = branch_counts
    sol = _finalize(problem, lam, it, converged, t0, res, trace)
    sol.branch_counts = branch_counts
    return sol


# ---------------------------------------------------------------------------
# staggered projections

def _admm_qp(Q, q, project: Callable[[np.ndarray], np.ndarray],
             eps: float, max_iter: int,
             warm: Optional[Tuple[np.ndarray, np.ndarray]] = None):
    """Generic splitting solver for min 1/2 x'Qx + q'x over a set with a
    cheap projection.  Returns the feasible iterate z and the multiplier."""
    n = len(q)
    if n == 0:
        return np.zeros(0), np.zeros(0)
    rho = 0.1 * float(np.trace(Q)) / n
    if rho <= 0.0:
        rho = 1.0
    try:
        chol = scipy.linalg.cho_factor(Q + rho * np.eye(n))
    except scipy.linalg.LinAlgError as exc:
        raise FactorizationError(rho, str(exc)) from None
    if warm is not None:
        z, gamma = warm[0].copy(), warm[1].copy()
    else:
        z, gamma = np.zeros(n), np.zeros(n)
    for _ in range(max_iter):
        x = -scipy.linalg.cho_solve(chol, q - rho * z + gamma)
        z_prev = z
        z = project(x + gamma / rho)
        gamma = gamma + rho * (x - z)
        if (
            float(np.abs(x - z).max()) <= eps
            and rho * float(np.abs(z - z_prev).max()) <= eps
        ):
            break
    return z, gamma


def solve_staggered(problem: ContactProblem, config: SolverConfig) -> ContactSolution:
    """Alternate a normal QP (nonnegative forces) and a tangential QP
    (per-contact disks of radius mu*lam_N), each solved by the splitting
    machinery, until the De Saxce criterion is met or the outer budget runs
    out.  The converged flag reports the criterion, not iteration exhaustion.
    """
    t0 = time.perf_counter()
    if problem.num_contacts == 0:
        return empty_solution()
    nc = problem.num_contacts
    G = problem.effective_delassus()
    g = problem.free_velocity
    cones = problem.cones
    idx_n = np.arange(0, 3 * nc, 3)
    idx_t = np.sort(np.concatenate([idx_n + 1, idx_n + 2]))
    G_nn = G[np.ix_(idx_n, idx_n)]
    G_nt = G[np.ix_(idx_n, idx_t)]
    G_tt = G[np.ix_(idx_t, idx_t)]
    g_n = g[idx_n]
    g_t = g[idx_t]
    mus = np.array([cone.mu for cone in cones])

    lam = _init_lambda(problem, config)
    lam_n = lam[idx_n].copy()
    lam_t = lam[idx_t].copy()
    inner_eps = min(1e-11, 0.01 * config.eps_abs)
    inner_max = config.max_iterations * 20

    def project_orthant(x):
        return np.maximum(0.0, x)

    def make_disk_projector(radii):
        def project(x):
            out = x.copy()
            for i in range(nc):
                t = out[2 * i:2 * i + 2]
                norm_t = np.hypot(t[0], t[1])
                if norm_t > radii[i] and norm_t > 0.0:
                    out[2 * i:2 * i + 2] = t * (radii[i] / norm_t)
            return out
        return project

    trace = SolveTrace() if config.record_trace else None
    warm_n = None
    warm_t = None
    converged = False
    res = np.inf
    it = 0
    stage = "normal"
    try:
        for it in range(1, config.stag_outer_iterations + 1):
            stage = "normal"
            lam_n, gamma_n = _admm_qp(
                G_nn, g_n + G_nt @ lam_t, project_orthant,
                inner_eps, inner_max, warm_n,
            )
            warm_n = (lam_n, gamma_n)
            stage = "tangential"
            lam_t, gamma_t = _admm_qp(
                G_tt, g_t + G_nt.T @ lam_n, make_disk_projector(mus * lam_n),
                inner_eps, inner_max, warm_t,
            )
            warm_t = (lam_t, gamma_t)
            lam[idx_n] = lam_n
            lam[idx_t] = lam_t
            c = G @ lam + g
            res = _ncp_criterion_from_velocity(cones, lam, c)
            if trace is not None:
                trace.criteria.append(res)
                if len(trace.lambdas) < config.trace_lambda_cap:
                    trace.lambdas.append(lam.copy())
            if res <= config.eps_abs:
                converged = True
                break
    except FactorizationError as exc:
        raise FactorizationError(exc.rho, f"{stage} stage: {exc}") from None
    return _finalize(problem, lam, it, converged, t0, res, trace)


# ---------------------------------------------------------------------------
# analytic single-contact oracle

ORACLE_TOL = 1e-9


def _oracle_residual(problem: ContactProblem, lam) -> float:
    return compute_residuals(problem, lam).ncp_criterion


def analytic_single_contact(problem: ContactProblem, return_branch: bool = False):
    """Ground-truth solution of a single-contact problem by enumerating the
    take-off, sticking and sliding branches of the disjunctive formulation.

    The sliding branch enforces a zero normal velocity and a tangential force
    antiparallel to the slip, via a 1-D root find on the sliding angle.  The
    returned branch is the one whose De Saxce residual is below 1e-9.
    """
    if problem.num_contacts != 1:
        raise ValueError("oracle requires exactly one contact")
    G = problem.effective_delassus()
    g = problem.free_velocity
    cone = problem.cones[0]
    mu = cone.mu
    eigs = np.linalg.eigvalsh(G)
    if eigs[0] <= 0.0:
        raise ValueError("oracle requires a positive definite block")

    candidates = []

    # take-off
    if g[0] >= -ORACLE_TOL:
        candidates.append((np.zeros(3), "take-off"))

    # sticking
    lam_stick = -np.linalg.solve(G, g)
    if cone_contains(cone, lam_stick):
        candidates.append((lam_stick, "sticking"))

    # sliding: lam on the cone boundary, c_N = 0, lam_T antiparallel to c_T
    if mu == 0.0:
        lam_n = -g[0] / G[0, 0]
        if lam_n > 0.0:
            candidates.append((np.array([lam_n, 0.0, 0.0]), "sliding"))
    elif g[0] < 0.0:
        gn1, gn2 = G[0, 1], G[0, 2]

        def lam_of(theta):
            ct, st = np.cos(theta), np.sin(theta)
            denom = G[0, 0] + mu * (gn1 * ct + gn2 * st)
            if denom <= 0.0:
                return None
            lam_n = -g[0] / denom
            return np.array([lam_n, mu * lam_n * ct, mu * lam_n * st])

        def alignment(theta):
            # Cross product of the force direction with the negated slip;
            # roots with a positive dot product are MDP-consistent.
            lam = lam_of(theta)
            if lam is None:
                return np.nan
            c = G @ lam + g
            return np.cos(theta) * (-c[2]) - np.sin(theta) * (-c[1])

        def dot_ok(theta):
            lam = lam_of(theta)
            if lam is None:
                return False
            c = G @ lam + g
            return np.cos(theta) * (-c[1]) + np.sin(theta) * (-c[2]) >= 0.0

        n_scan = 720
        thetas = np.linspace(-np.pi, np.pi, n_scan, endpoint=False)
        vals = np.array([alignment(t) for t in thetas])
        for k in range(n_scan):
            k2 = (k + 1) % n_scan
            v1, v2 = vals[k], vals[k2]
            if not (np.isfinite(v1) and np.isfinite(v2)):
                continue
            if v1 == 0.0 and dot_ok(thetas[k]):
                root = thetas[k]
            elif v1 * v2 < 0.0:
                hi = thetas[k2] if k2 != 0 else thetas[k] + (thetas[1] - thetas[0])
                root = scipy.optimize.brentq(
                    alignment, thetas[k], hi, xtol=1e-14
                )
            else:
                continue
            if dot_ok(root):
                lam = lam_of(root)
                if lam is not None and lam[0] >= 0.0:
                    candidates.append((lam, "sliding"))

    best = None
    for lam, branch in candidates:
        res = _oracle_residual(problem, lam)
        if res <= ORACLE_TOL and (best is None or res < best[2]):
            best = (lam, branch, res)
    if best is None:
        raise OracleFailureError(
            "no branch satisfies the contact conditions; malformed problem"
        )
    if return_branch:
        return best[0], best[1]
    return best[0]


# ---------------------------------------------------------------------------
# dispatch

_SOLVER_FUNCS = {
    SolverKind.LCP_PGS: solve_lcp_pgs,
    SolverKind.CCP_PGS: solve_ccp_pgs,
    SolverKind.CCP_ADMM: solve_ccp_admm,
    SolverKind.RAISIM: solve_raisim,
    SolverKind.NCP_PGS: solve_ncp_pgs,
    SolverKind.STAGGERED: solve_staggered,
}


def solve(problem: ContactProblem, kind: SolverKind,
          config: Optional[SolverConfig] = None) -> ContactSolution:
    if config is None:
        config = SolverConfig()
    return _SOLVER_FUNCS[kind](problem, config)

"""Second-order friction cones and the projection operators used by the solvers.

All per-contact 3-vectors are ordered (N, T1, T2): normal component first,
then the two tangential components.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class FrictionCone:
    """Coulomb cone K_mu = {lam : lam_N >= 0, ||lam_T||_2 <= mu * lam_N}."""

    mu: float

    def __post_init__(self):
        if self.mu < 0.0:
            raise ValueError(f"friction coefficient must be >= 0, got {self.mu}")

    def dual(self) -> "FrictionCone":
        """Dual cone K*_mu.

        For mu > 0 this is K_{1/mu}; for mu = 0 the dual degenerates to the
        half-space {c_N >= 0} and is handled explicitly by the projections.
        """
        if self.mu == 0.0:
            return FrictionCone(np.inf)
        return FrictionCone(1.0 / self.mu)


def cone_contains(cone: FrictionCone, lam) -> bool:
    """Membership test with a small slack so boundary points count as inside."""
    lam = np.asarray(lam, dtype=float)
    lam_n = lam[0]
    lam_t = np.hypot(lam[1], lam[2])
    if lam_n < -BOUNDARY_TOL:
        return False
    if np.isinf(cone.mu):
        return True
    return lam_t <= cone.mu * lam_n + BOUNDARY_TOL


def project_soc(cone: FrictionCone, x) -> np.ndarray:
    """Euclidean projection onto the second-order cone K_mu.

    Closed form: interior points are fixed, points in the polar cone map to
    the origin, and otherwise lam_N = (x_N + mu*||x_T||) / (1 + mu^2) with the
    tangential part rescaled radially.
    """
    x = np.asarray(x, dtype=float)
    mu = cone.mu
    x_n = x[0]
    s = np.hypot(x[1], x[2])
    if np.isinf(mu):
        # Dual of the degenerate ray: the half-space {x_N >= 0}.
        out = x.copy()
        out[0] = max(0.0, x_n)
        return out
    if x_n >= 0.0 and s <= mu * x_n:
        return x.copy()
    if mu * s + x_n <= 0.0:
        return np.zeros(3)
    lam_n = (x_n + mu * s) / (1.0 + mu * mu)
    scale = mu * lam_n / s
    return np.array([lam_n, scale * x[1], scale * x[2]])


def project_dual(cone: FrictionCone, y) -> np.ndarray:
    """Euclidean projection onto the dual cone K*_mu."""
    return project_soc(cone.dual(), y)


def distance_to_cone(cone: FrictionCone, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(x - project_soc(cone, x)))


def distance_to_dual(cone: FrictionCone, y) -> float:
    y = np.asarray(y, dtype=float)
    return float(np.linalg.norm(y - project_dual(cone, y)))


def project_horizontal(cone: FrictionCone, lam_n: float, lam_t) -> np.ndarray:
    """Radial projection of lam_T onto the disk of radius mu*lam_N.

    This is the tangential update of the NCP sweep: the direction of lam_T is
    preserved, only its magnitude is clamped.
    """
    if lam_n < 0.0:
        raise ValueError(f"lam_n must be >= 0, got {lam_n}")
    lam_t = np.asarray(lam_t, dtype=float)
    radius = cone.mu * lam_n
    norm_t = np.hypot(lam_t[0], lam_t[1])
    if norm_t <= radius or norm_t == 0.0:
        return lam_t.copy()
    return lam_t * (radius / norm_t)


def clamp_pyramid(cone: FrictionCone, lam_n: float, lam_t) -> np.ndarray:
    """Componentwise clamp of lam_T to [-mu*lam_N, +mu*lam_N].

    This is the 4-facet pyramid K~_mu (infinity norm), with facets aligned
    with the stored tangent basis.  The result can exceed the circular cone
    by up to a factor sqrt(2) at the corners.
    """
    if lam_n < 0.0:
        raise ValueError(f"lam_n must be >= 0, got {lam_n}")
    lam_t = np.asarray(lam_t, dtype=float)
    radius = cone.mu * lam_n
    return np.clip(lam_t, -radius, radius)


def de_saxce_correction(c, mu: float) -> np.ndarray:
    """De Saxce velocity shift Gamma(c, mu) = (mu*||c_T||_2; 0, 0)."""
    c = np.asarray(c, dtype=float)
    return np.array([mu * np.hypot(c[1], c[2]), 0.0, 0.0])

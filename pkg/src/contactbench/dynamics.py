"""Minimal rigid-body time-stepping backend.

Free-floating boxes over a half-space floor (z >= 0), plus face-parallel
box-on-box stacking.  Each step assembles a ContactProblem in the contact
frame (N, T1, T2), solves it with the requested solver and integrates with a
semi-implicit Euler scheme (impulses update velocities, new velocities update
positions, quaternions via the exponential map).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .problem import (
    ContactProblem,
    ContactSolution,
    SolverConfig,
    UnsupportedGeometryError,
    empty_solution,
)
from .solvers import SolverKind, solve

ACTIVATION_MARGIN = 1e-4
FACE_PARALLEL_MAX_TILT = math.radians(5.0)

_CORNER_SIGNS = np.array(
    [[sx, sy, sz] for sx in (-1.0, 1.0) for sy in (-1.0, 1.0) for sz in (-1.0, 1.0)]
)


# ---------------------------------------------------------------------------
# quaternion helpers (w, x, y, z convention, body-to-world rotation)

def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q)


def quat_multiply(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_exp(v):
    """Quaternion exponential of a pure-vector half-angle increment."""
    angle = np.linalg.norm(v)
    if angle < 1e-12:
        return quat_normalize(np.array([1.0, v[0], v[1], v[2]]))
    axis = v / angle
    s = math.sin(angle)
    return np.array([math.cos(angle), s * axis[0], s * axis[1], s * axis[2]])


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


# ---------------------------------------------------------------------------
# scene description

@dataclass
class BodyModel:
    """Box-shaped rigid body.

    The inertia defaults to that of a uniform box: I_x = m (h_y^2 + h_z^2)/3
    and cyclic.  lock_rotation freezes the angular degrees of freedom, which
    zeroes every normal/tangential coupling in the Delassus blocks.
    """

    mass: float
    half_extents: np.ndarray
    inertia: Optional[np.ndarray] = None
    lock_rotation: bool = False

    def __post_init__(self):
        self.half_extents = np.asarray(self.half_extents, dtype=float)
        if self.mass <= 0.0:
            raise ValueError("mass must be > 0")
        if np.any(self.half_extents <= 0.0):
            raise ValueError("half extents must be > 0")
        if self.inertia is None:
            hx, hy, hz = self.half_extents
            self.inertia = (
                self.mass / 3.0 * np.array([hy**2 + hz**2, hx**2 + hz**2, hx**2 + hy**2])
            )
        else:
            self.inertia = np.asarray(self.inertia, dtype=float)
            if np.any(self.inertia <= 0.0):
                raise ValueError("inertia entries must be > 0")


@dataclass
class RigidBodyState:
    """Pose and twist: world position, unit quaternion (w, x, y, z), world
    linear velocity and body-frame angular velocity."""

    position: np.ndarray
    quaternion: np.ndarray = field(default_factory=lambda: np.array([1.0, 0, 0, 0]))
    linear_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.quaternion = quat_normalize(self.quaternion)
        self.linear_velocity = np.asarray(self.linear_velocity, dtype=float)
        self.angular_velocity = np.asarray(self.angular_velocity, dtype=float)

    def copy(self) -> "RigidBodyState":
        return RigidBodyState(
            self.position.copy(),
            self.quaternion.copy(),
            self.linear_velocity.copy(),
            self.angular_velocity.copy(),
        )

    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.quaternion)


@dataclass
class ExternalForce:
    """World-frame wrench (force, torque) applied to a body on [start, end)."""

    body: int
    start: float
    end: float
    wrench: np.ndarray

    def __post_init__(self):
        self.wrench = np.asarray(self.wrench, dtype=float)
        if self.wrench.shape != (6,):
            raise ValueError("wrench: expected 6 entries (force, torque)")


@dataclass
class Scene:
    """World description: bodies, initial states, floor half-space z >= 0 and
    the contact-law parameters shared by all pairs."""

    bodies: List[BodyModel]
    states: List[RigidBodyState]
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))
    mu: float = 0.5
    restitution: float = 0.0
    baumgarte: float = 0.0
    baumgarte_combine: str = "max"
    compliance: float = 0.0
    dt: float = 1e-3
    tangent_rotation: float = 0.0
    floor: bool = True
    external_forces: List[ExternalForce] = field(default_factory=list)

    def __post_init__(self):
        self.gravity = np.asarray(self.gravity, dtype=float)
        if self.dt <= 0.0:
            raise ValueError("dt must be > 0")
        if self.mu < 0.0:
            raise ValueError("mu must be >= 0")
        if not (0.0 <= self.restitution <= 1.0):
            raise ValueError("restitution must lie in [0, 1]")
        if self.baumgarte < 0.0:
            raise ValueError("baumgarte gain must be >= 0")
        if self.compliance < 0.0:
            raise ValueError("compliance must be >= 0")
        if self.baumgarte_combine not in ("max", "sum"):
            raise ValueError("baumgarte_combine must be 'max' or 'sum'")
        if len(self.bodies) != len(self.states):
            raise ValueError("one state per body required")

    def initial_states(self) -> List[RigidBodyState]:
        return [s.copy() for s in self.states]


@dataclass(frozen=True)
class ContactPatch:
    """One contact point with its frame and identity.

    feature_id = (body, corner index, other body or -1 for the floor); it is
    stable across steps for persisting contacts and keys the warm-start cache.
    """

    point: np.ndarray
    normal: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    gap: float
    body: int
    other_body: int  # -1 encodes the floor
    corner_index: int

    @property
    def feature_id(self) -> Tuple[int, int, int]:
        return (self.body, self.corner_index, self.other_body)


def _make_patch(point, basis, gap, body, other_body, corner_index):
    n, t1, t2 = basis
    return ContactPatch(
        point=np.asarray(point, dtype=float),
        normal=n,
        t1=t1,
        t2=t2,
        gap=float(gap),
        body=body,
        other_body=other_body,
        corner_index=corner_index,
    )


def _floor_basis(tangent_rotation: float):
    """Right-handed orthonormal frame {T1, T2, N} for the upward floor normal.

    T1 = normalize(N x e_x) and T2 = N x T1; a nonzero tangent_rotation spins
    the tangent pair about N, which sets the pyramid facet orientation for
    the linearized solver.
    """
    n = np.array([0.0, 0.0, 1.0])
    t1 = np.array([0.0, 1.0, 0.0])  # e_z x e_x
    t2 = np.array([-1.0, 0.0, 0.0])  # n x t1
    if tangent_rotation != 0.0:
        c, s = math.cos(tangent_rotation), math.sin(tangent_rotation)
        t1, t2 = c * t1 + s * t2, -s * t1 + c * t2
    return n, t1, t2


def _tilt_from_upright(rotation: np.ndarray) -> float:
    """Angle between the body z-axis and the world z-axis."""
    return math.acos(min(1.0, max(-1.0, rotation[2, 2])))


def body_corners(model: BodyModel, state: RigidBodyState) -> np.ndarray:
    """World positions of the 8 box corners, in the fixed corner order."""
    R = state.rotation()
    return state.position[None, :] + (_CORNER_SIGNS * model.half_extents) @ R.T


def detect_contacts(scene: Scene, states: Sequence[RigidBodyState]) -> List[ContactPatch]:
    """Corner-based detection against the floor and between stacked boxes.

    Box-box contact is restricted to face-parallel stacking: both boxes must
    be within 5 degrees of upright, and the upper box's corners are matched
    against the lower box's top face.  Patches are sorted by feature id.
    """
    patches: List[ContactPatch] = []
    basis = _floor_basis(scene.tangent_rotation)
    n_bodies = len(scene.bodies)
    if scene.floor:
        for b in range(n_bodies):
            corners = body_corners(scene.bodies[b], states[b])
            for k in range(8):
                gap = corners[k, 2]
                if gap < ACTIVATION_MARGIN:
                    patches.append(_make_patch(corners[k], basis, gap, b, -1, k))
    for upper in range(n_bodies):
        for lower in range(n_bodies):
            if upper == lower:
                continue
            su, sl = states[upper], states[lower]
            if su.position[2] <= sl.position[2]:
                continue
            top_z = sl.position[2] + scene.bodies[lower].half_extents[2]
            corners = body_corners(scene.bodies[upper], states[upper])
            gaps = corners[:, 2] - top_z
            if gaps.min() >= ACTIVATION_MARGIN:
                continue
            hx, hy = scene.bodies[lower].half_extents[:2]
            inside = (
                (np.abs(corners[:, 0] - sl.position[0]) <= hx + 1e-9)
                & (np.abs(corners[:, 1] - sl.position[1]) <= hy + 1e-9)
            )
            if not np.any(inside & (gaps < ACTIVATION_MARGIN)):
                continue
            tilt_u = _tilt_from_upright(su.rotation())
            tilt_l = _tilt_from_upright(sl.rotation())
            if max(tilt_u, tilt_l) > FACE_PARALLEL_MAX_TILT:
                raise UnsupportedGeometryError(
                    f"bodies {upper} and {lower} overlap but are tilted beyond 5 deg"
                )
            for k in range(8):
                if inside[k] and gaps[k] < ACTIVATION_MARGIN:
                    patches.append(
                        _make_patch(corners[k], basis, gaps[k], upper, lower, k)
                    )
    patches.sort(key=lambda p: p.feature_id)
    return patches


# ---------------------------------------------------------------------------
# problem assembly

def _inverse_mass_blocks(scene: Scene, states) -> List[Tuple[float, np.ndarray]]:
    """Per-body (1/m, world-frame inverse inertia); locked rotation zeroes
    the angular block."""
    out = []
    for model, state in zip(scene.bodies, states):
        if model.lock_rotation:
            inv_inertia = np.zeros((3, 3))
        else:
            R = state.rotation()
            inv_inertia = R @ np.diag(1.0 / model.inertia) @ R.T
        out.append((1.0 / model.mass, inv_inertia))
    return out


def external_wrench(scene: Scene, body: int, t: float) -> np.ndarray:
    w = np.zeros(6)
    for entry in scene.external_forces:
        if entry.body == body and entry.start <= t < entry.end:
            w += entry.wrench
    return w


def compute_free_velocity(scene: Scene, states, dt: float, t: float = 0.0) -> np.ndarray:
    """Unconstrained next-step twist (world linear, world angular) per body.

    v_f = v + M^-1 (tau_ext + gravity wrench - omega x I omega) dt, with the
    gyroscopic term evaluated in the body frame.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    n = len(scene.bodies)
    vf = np.zeros((n, 6))
    for b, (model, state) in enumerate(zip(scene.bodies, states)):
        wrench = external_wrench(scene, b, t)
        vf[b, :3] = state.linear_velocity + dt * (
            scene.gravity + wrench[:3] / model.mass
        )
        if model.lock_rotation:
            continue
        R = state.rotation()
        omega_b = state.angular_velocity
        torque_b = R.T @ wrench[3:]
        gyro = np.cross(omega_b, model.inertia * omega_b)
        omega_b_new = omega_b + dt * (torque_b - gyro) / model.inertia
        vf[b, 3:] = R @ omega_b_new
    return vf


def stacked_twists(states) -> np.ndarray:
    """Current (world linear, world angular) twists as a flat 6n vector."""
    out = np.zeros(6 * len(states))
    for b, state in enumerate(states):
        out[6 * b:6 * b + 3] = state.linear_velocity
        out[6 * b + 3:6 * b + 6] = state.rotation() @ state.angular_velocity
    return out


def build_jacobian(patches: Sequence[ContactPatch], states) -> np.ndarray:
    """Contact Jacobian mapping stacked body twists to relative contact-point
    velocities in (N, T1, T2).  The first body of a patch contributes with a
    plus sign, the lower body (if any) with a minus sign; the floor
    contributes nothing."""
    nc = len(patches)
    nb = len(states)
    J = np.zeros((3 * nc, 6 * nb))
    for i, patch in enumerate(patches):
        D = np.vstack([patch.normal, patch.t1, patch.t2])
        row = slice(3 * i, 3 * i + 3)
        for body, sign in ((patch.body, 1.0), (patch.other_body, -1.0)):
            if body < 0:
                continue
            r = patch.point - states[body].position
            col = 6 * body
            J[row, col:col + 3] += sign * D
            J[row, col + 3:col + 6] += sign * np.cross(
                np.broadcast_to(r, (3, 3)), D
            )
    return J


def assemble_delassus(J: np.ndarray, scene: Scene, states) -> np.ndarray:
    """G = J M^-1 J^T with the block-diagonal spatial inertia."""
    blocks = _inverse_mass_blocks(scene, states)
    MinvJT = np.zeros_like(J.T)
    for b, (inv_m, inv_inertia) in enumerate(blocks):
        col = 6 * b
        MinvJT[col:col + 3] = inv_m * J.T[col:col + 3]
        MinvJT[col + 3:col + 6] = inv_inertia @ J.T[col + 3:col + 6]
    G = J @ MinvJT
    return 0.5 * (G + G.T)


def compose_target_velocity(
    patches: Sequence[ContactPatch], pre_impact: np.ndarray, scene: Scene
) -> np.ndarray:
    """Normal target velocities from restitution and Baumgarte stabilization.

    'max' keeps the larger of the restitution and correction targets; 'sum'
    adds them (with the restitution part floored at zero).  Tangential
    components are always zero.
    """
    c_star = np.zeros(3 * len(patches))
    e = scene.restitution
    K = scene.baumgarte
    for i, patch in enumerate(patches):
        bounce = -e * pre_impact[3 * i]
        correction = K * max(0.0, -patch.gap)
        if scene.baumgarte_combine == "max":
            c_star[3 * i] = max(bounce, correction)
        else:
            c_star[3 * i] = max(0.0, bounce) + correction
    return c_star


def build_contact_problem(
    scene: Scene, states, patches, v_free: np.ndarray
) -> ContactProblem:
    J = build_jacobian(patches, states)
    G = assemble_delassus(J, scene, states)
    c_pre = J @ stacked_twists(states)
    c_star = compose_target_velocity(patches, c_pre, scene)
    g = J @ v_free.reshape(-1) - c_star
    compliance = None
    if scene.compliance > 0.0:
        compliance = np.zeros(3 * len(patches))
        compliance[::3] = scene.compliance
    mus = [scene.mu] * len(patches)
    return ContactProblem.from_arrays(G, g, mus, compliance)


# ---------------------------------------------------------------------------
# warm-start cache and stepping

@dataclass
class WarmStartCache:
    """Impulses (and splitting duals) from the previous step, keyed by the
    contact feature id; new contacts start from zero."""

    lambdas: dict = field(default_factory=dict)
    duals: dict = field(default_factory=dict)
    rho: Optional[float] = None

    def build_config(self, patches, config: SolverConfig) -> SolverConfig:
        nc = len(patches)
        lam0 = np.zeros(3 * nc)
        dual0 = np.zeros(3 * nc)
        have_dual = False
        for i, patch in enumerate(patches):
            fid = patch.feature_id
            if fid in self.lambdas:
                lam0[3 * i:3 * i + 3] = self.lambdas[fid]
            if fid in self.duals:
                dual0[3 * i:3 * i + 3] = self.duals[fid]
                have_dual = True
        return replace(
            config,
            warm_start=lam0,
            warm_dual=dual0 if have_dual else None,
            warm_rho=self.rho,
        )

    def update(self, patches, solution: ContactSolution) -> None:
        self.lambdas = {}
        self.duals = {}
        for i, patch in enumerate(patches):
            fid = patch.feature_id
            self.lambdas[fid] = solution.lam[3 * i:3 * i + 3].copy()
            if solution.dual_state is not None:
                self.duals[fid] = solution.dual_state[3 * i:3 * i + 3].copy()
        if solution.rho is not None:
            self.rho = solution.rho

    def hit_count(self, patches) -> int:
        return sum(1 for p in patches if p.feature_id in self.lambdas)


def _integrate(scene: Scene, states, v_new: np.ndarray) -> List[RigidBodyState]:
    """Semi-implicit update: positions from the new velocities, quaternions
    via the exponential map, renormalized every step."""
    dt = scene.dt
    out = []
    for b, (model, state) in enumerate(zip(scene.bodies, states)):
        v_lin = v_new[6 * b:6 * b + 3]
        w_world = v_new[6 * b + 3:6 * b + 6]
        position = state.position + dt * v_lin
        R = state.rotation()
        omega_b = R.T @ w_world
        quaternion = quat_normalize(
            quat_multiply(state.quaternion, quat_exp(0.5 * dt * omega_b))
        )
        R_new = quat_to_matrix(quaternion)
        out.append(
            RigidBodyState(
                position=position,
                quaternion=quaternion,
                linear_velocity=v_lin.copy(),
                angular_velocity=R_new.T @ w_world,
            )
        )
    return out


def step_scene(
    scene: Scene,
    states: Sequence[RigidBodyState],
    solver_kind: SolverKind,
    config: SolverConfig,
    warm_cache: Optional[WarmStartCache] = None,
    t: float = 0.0,
):
    """One time step: detect, assemble, solve, integrate.

    Returns (new states, solution, patches, problem).  When a warm cache is
    supplied, impulses are seeded per matching feature id and the cache is
    updated in place with the new solution.
    """
    patches = detect_contacts(scene, states)
    v_free = compute_free_velocity(scene, states, scene.dt, t)
    if not patches:
        if warm_cache is not None:
            warm_cache.lambdas = {}
            warm_cache.duals = {}
        new_states = _integrate(scene, states, v_free.reshape(-1))
        return new_states, empty_solution(), patches, None

    problem = build_contact_problem(scene, states, patches, v_free)
    solver_config = config
    if warm_cache is not None:
        solver_config = warm_cache.build_config(patches, config)
    solution = solve(problem, solver_kind, solver_config)

    J = build_jacobian(patches, states)
    blocks = _inverse_mass_blocks(scene, states)
    impulse = J.T @ solution.lam
    v_new = v_free.reshape(-1).copy()
    for b, (inv_m, inv_inertia) in enumerate(blocks):
        col = 6 * b
        v_new[col:col + 3] += inv_m * impulse[col:col + 3]
        v_new[col + 3:col + 6] += inv_inertia @ impulse[col + 3:col + 6]

    if warm_cache is not None:
        warm_cache.update(patches, solution)
    new_states = _integrate(scene, states, v_new)
    return new_states, solution, patches, problem


def mechanical_energy(scene: Scene, states) -> float:
    """Kinetic plus gravitational potential energy of all bodies."""
    total = 0.0
    for model, state in zip(scene.bodies, states):
        v = state.linear_velocity
        w = state.angular_velocity
        total += 0.5 * model.mass * float(v @ v)
        total += 0.5 * float(w @ (model.inertia * w))
        total -= model.mass * float(scene.gravity @ state.position)
    return total


# ---------------------------------------------------------------------------
# scene files

def scene_to_dict(scene: Scene) -> dict:
    return {
        "bodies": [
            {
                "mass": m.mass,
                "half_extents": m.half_extents.tolist(),
                "inertia": m.inertia.tolist(),
                "lock_rotation": m.lock_rotation,
                "position": s.position.tolist(),
                "quaternion": s.quaternion.tolist(),
                "linear_velocity": s.linear_velocity.tolist(),
                "angular_velocity": s.angular_velocity.tolist(),
            }
            for m, s in zip(scene.bodies, scene.states)
        ],
        "gravity": scene.gravity.tolist(),
        "mu": scene.mu,
        "restitution": scene.restitution,
        "baumgarte": scene.baumgarte,
        "baumgarte_combine": scene.baumgarte_combine,
        "compliance": scene.compliance,
        "dt": scene.dt,
        "tangent_rotation": scene.tangent_rotation,
        "floor": scene.floor,
        "external_forces": [
            {
                "body": f.body,
                "start": f.start,
                "end": f.end,
                "wrench": f.wrench.tolist(),
            }
            for f in scene.external_forces
        ],
    }


def scene_from_dict(data: dict) -> Scene:
    bodies = []
    states = []
    for entry in data["bodies"]:
        bodies.append(
            BodyModel(
                mass=float(entry["mass"]),
                half_extents=entry["half_extents"],
                inertia=entry.get("inertia"),
                lock_rotation=bool(entry.get("lock_rotation", False)),
            )
        )
        states.append(
            RigidBodyState(
                position=entry.get("position", np.zeros(3)),
                quaternion=entry.get("quaternion", np.array([1.0, 0, 0, 0])),
                linear_velocity=entry.get("linear_velocity", np.zeros(3)),
                angular_velocity=entry.get("angular_velocity", np.zeros(3)),
            )
        )
    forces = [
        ExternalForce(
            body=int(f["body"]),
            start=float(f["start"]),
            end=float(f["end"]),
            wrench=f["wrench"],
        )
        for f in data.get("external_forces", [])
    ]
    return Scene(
        bodies=bodies,
        states=states,
        gravity=data.get("gravity", np.array([0.0, 0.0, -9.81])),
        mu=float(data.get("mu", 0.5)),
        restitution=float(data.get("restitution", 0.0)),
        baumgarte=float(data.get("baumgarte", 0.0)),
        baumgarte_combine=data.get("baumgarte_combine", "max"),
        compliance=float(data.get("compliance", 0.0)),
        dt=float(data.get("dt", 1e-3)),
        tangent_rotation=float(data.get("tangent_rotation", 0.0)),
        floor=bool(data.get("floor", True)),
        external_forces=forces,
    )


def load_scene(path) -> Scene:
    with open(path, "r", encoding="utf-8") as fh:
        return scene_from_dict(json.load(fh))


def save_scene(scene: Scene, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scene_to_dict(scene), fh, indent=2)
        fh.write("\n")

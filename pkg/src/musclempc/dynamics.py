"""Planar rigid-body dynamics with muscle tensions, penalty contact, perturbations.

Equations of motion are assembled per batch row from COM jacobians:
M = sum_l m_l J_l^T J_l + (constant angular part), bias = Coriolis + gravity +
joint damping, contact and joint-limit penalties enter as generalized forces.
Integration is semi-implicit Euler. All functions are pure; two calls with
identical inputs produce bit-identical outputs regardless of how the batch is
chunked.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import muscle
from .kinematics import (
    PointKinematics,
    bias_acceleration,
    com_state,
    muscle_geometry_arrays,
    point_kinematics,
)
from .model import ModelSpec

# penalty contact and joint-limit constants
CONTACT_STIFFNESS = 2.0e4    # N/m
CONTACT_DAMPING = 200.0      # N s/m, normal approach
CONTACT_TANGENT_DAMPING = 200.0  # N s/m, clamped by the friction cone
FRICTION_COEFF = 1.0
LIMIT_STIFFNESS = 100.0      # N m / rad^2, one-sided quadratic
LIMIT_IMPULSE_KAPPA = 1.0e9

DEFAULT_DT = 0.002
DEFAULT_SUBSTEPS = 2


class SimulationDiverged(RuntimeError):
    """Non-finite state encountered; carries the simulation time of the step."""

    def __init__(self, time: float):
        super().__init__(f"simulation diverged at t={time:.4f}s")
        self.time = time


@dataclass
class SimState:
    """Value-type simulation state; copy before mutating."""

    q: np.ndarray
    qdot: np.ndarray
    act: np.ndarray
    time: float = 0.0

    def copy(self) -> "SimState":
        return SimState(self.q.copy(), self.qdot.copy(), self.act.copy(), self.time)


def initial_state(model: ModelSpec, q=None, qdot=None) -> SimState:
    q = model.rest_q.copy() if q is None else np.asarray(q, dtype=np.float64).copy()
    qdot = np.zeros(model.d_q) if qdot is None else np.asarray(qdot, dtype=np.float64).copy()
    return SimState(q=q, qdot=qdot, act=np.zeros(model.d_u), time=0.0)


@dataclass(frozen=True)
class WrenchEvent:
    start: float
    duration: float
    link: int
    force: tuple[float, float] = (0.0, 0.0)
    torque: float = 0.0


@dataclass(frozen=True)
class FailureEvent:
    time: float
    muscles: tuple[int, ...]


@dataclass(frozen=True)
class Perturbation:
    """External wrench schedule plus permanent actuator failures."""

    wrenches: tuple[WrenchEvent, ...] = ()
    failures: tuple[FailureEvent, ...] = ()

    def __post_init__(self):
        if list(self.wrenches) != sorted(self.wrenches, key=lambda w: w.start):
            raise ValueError("wrench schedule must be sorted by start time")
        if list(self.failures) != sorted(self.failures, key=lambda f: f.time):
            raise ValueError("failure schedule must be sorted by time")
        seen: set[int] = set()
        for ev in self.failures:
            dup = seen.intersection(ev.muscles)
            if dup:
                raise ValueError(f"muscle(s) {sorted(dup)} fail more than once")
            seen.update(ev.muscles)

    def failed_mask(self, d_u: int, t: float) -> np.ndarray | None:
        """Muscles failed at or before t; None when nothing has failed yet."""
        if not self.failures or t < self.failures[0].time:
            return None
        mask = np.zeros(d_u, dtype=bool)
        for ev in self.failures:
            if t >= ev.time:
                mask[list(ev.muscles)] = True
        return mask

    def frozen_at(self, d_u: int, t: float) -> "Perturbation":
        """Planner view at snapshot time t: active failures persist, future
        events and external wrenches are unknown."""
        mask = self.failed_mask(d_u, t)
        if mask is None:
            return Perturbation()
        return Perturbation(failures=(FailureEvent(-np.inf, tuple(np.flatnonzero(mask))),))


NO_PERTURBATION = Perturbation()


@dataclass
class DynamicsTerms:
    mass_matrix: np.ndarray
    bias: np.ndarray          # Coriolis + gravity + joint damping
    contact_force: np.ndarray  # generalized


@dataclass
class StepDiagnostics:
    """Counters for clamp/guard events, accumulated over an episode."""

    limit_clamps: int = 0
    diverged_rows: int = 0


def mass_matrix_batch(model: ModelSpec, kin: PointKinematics) -> np.ndarray:
    t = model.tables
    jc = kin.jac[:, t.sl_com]
    m = (np.conj(jc) * t.link_mass[None, :, None]).swapaxes(1, 2) @ jc
    return m.real + t.mass_ang[None]


def bias_batch(
    model: ModelSpec, kin: PointKinematics, qdot: np.ndarray, include_damping: bool = True
) -> np.ndarray:
    t = model.tables
    jc = kin.jac[:, t.sl_com]
    acc0 = bias_acceleration(model, kin, qdot, t.sl_com)
    coriolis = (np.conj(jc).swapaxes(1, 2) @ (acc0 * t.link_mass)[:, :, None])[:, :, 0].real
    gravity = model.gravity * (jc.imag.swapaxes(1, 2) @ t.link_mass)
    bias = coriolis + gravity
    if include_damping:
        bias = bias + t.dof_damping * qdot
    return bias


def _contact_geometry(model: ModelSpec, kin: PointKinematics):
    """Penetration depth, surface normal, velocities of the contact points."""
    t = model.tables
    pos = kin.pos[:, t.sl_contact]
    vel = kin.vel[:, t.sl_contact]
    terrain = model.terrain
    if terrain.is_flat:
        depth = terrain.hs[0] - pos.imag
        normal = np.broadcast_to(np.complex128(1j), depth.shape)
    else:
        x = pos.real
        depth = terrain.height(x) - pos.imag
        s = terrain.slope(x)
        normal = (-s + 1j) / np.sqrt(1.0 + s * s)
    return depth, normal, vel


def contact_forces_batch(model: ModelSpec, kin: PointKinematics):
    """Generalized penalty contact force (B, d_q); zero when nothing penetrates.

    Diagnostic / continuous-time form: normal force k_n*depth + d_n*relu(-v_n),
    viscous tangential force clamped to the friction cone.
    """
    t = model.tables
    if t.sl_contact.start == t.sl_contact.stop:
        return 0.0
    depth, normal, vel = _contact_geometry(model, kin)
    pen = depth > 0.0
    if not pen.any():
        return 0.0
    v_n = (np.conj(normal) * vel).real
    f_n = np.where(
        pen, CONTACT_STIFFNESS * depth + CONTACT_DAMPING * np.maximum(0.0, -v_n), 0.0
    )
    tangent = normal * -1j
    v_t = (np.conj(tangent) * vel).real
    f_t = np.clip(-CONTACT_TANGENT_DAMPING * v_t, -FRICTION_COEFF * f_n, FRICTION_COEFF * f_n)
    force = f_n * normal + f_t * tangent
    jac = kin.jac[:, t.sl_contact]
    return (np.conj(jac).swapaxes(1, 2) @ force[:, :, None])[:, :, 0].real


def _contact_step_terms(model: ModelSpec, kin: PointKinematics):
    """Contact split for stable stepping at dt = 2 ms on light links.

    The spring part of the normal force is an explicit generalized force; the
    normal and tangential dampers act on the *post-step* velocity, entering
    the solve as dt * J^T c J added to the mass matrix. The tangential
    coefficient is capped so the realized force stays within the friction
    cone of the spring load (first order), and normal damping is gated to
    approaching points so separation is never sucked back.

    Returns (q_force, damp_matrix) or (0.0, None) without penetration.
    """
    t = model.tables
    if t.sl_contact.start == t.sl_contact.stop:
        return 0.0, None
    depth, normal, vel = _contact_geometry(model, kin)
    pen = depth > 0.0
    if not pen.any():
        return 0.0, None
    f_spring = np.where(pen, CONTACT_STIFFNESS * depth, 0.0)
    jac = kin.jac[:, t.sl_contact]
    q_force = (np.conj(jac).swapaxes(1, 2) @ (f_spring * normal)[:, :, None])[:, :, 0].real

    v_n = (np.conj(normal) * vel).real
    tangent = normal * -1j
    v_t = (np.conj(tangent) * vel).real
    c_n = np.where(pen & (v_n < 0.0), CONTACT_DAMPING, 0.0)
    cone = FRICTION_COEFF * f_spring / np.maximum(np.abs(v_t), 1e-3)
    c_t = np.where(pen, np.minimum(CONTACT_TANGENT_DAMPING, cone), 0.0)
    j_n = (np.conj(normal[:, :, None]) * jac).real
    j_t = (np.conj(tangent[:, :, None]) * jac).real
    damp = (j_n * c_n[:, :, None]).swapaxes(1, 2) @ j_n
    damp += (j_t * c_t[:, :, None]).swapaxes(1, 2) @ j_t
    return q_force, damp


def limit_torque_batch(model: ModelSpec, q: np.ndarray) -> np.ndarray:
    t = model.tables
    below = np.maximum(0.0, t.q_lo[None, :] - q)
    above = np.maximum(0.0, q - t.q_hi[None, :])
    return LIMIT_STIFFNESS * (below * below - above * above)


def external_torque_batch(
    model: ModelSpec, kin: PointKinematics, perturbation: Perturbation, time: np.ndarray
) -> np.ndarray | float:
    if not perturbation.wrenches:
        return 0.0
    t = model.tables
    out = 0.0
    for ev in perturbation.wrenches:
        active = (time >= ev.start) & (time < ev.start + ev.duration)
        if not active.any():
            continue
        jc = kin.jac[:, t.sl_com.start + ev.link]
        f = complex(*ev.force)
        q_force = (np.conj(jc) * f).real + ev.torque * t.rev_signed[ev.link][None, :]
        out = out + np.where(active[:, None], q_force, 0.0)
    return out


def step_batch(
    model: ModelSpec,
    q: np.ndarray,
    qdot: np.ndarray,
    act: np.ndarray,
    time: np.ndarray,
    u: np.ndarray,
    dt: float,
    perturbation: Perturbation = NO_PERTURBATION,
    failed: np.ndarray | None = None,
    geom=None,
):
    """One semi-implicit Euler substep for every batch row.

    Returns (q', qdot', act', time', bad) where bad marks rows whose state or
    assembled dynamics went non-finite; those rows come back zeroed so the
    batch stays steppable (callers treat them as diverged). geom optionally
    carries an already-computed (kin, lengths, j_m, ldot) pass for (q, qdot).
    """
    t = model.tables
    u = np.clip(u, 0.0, 1.0)
    if failed is not None:
        u = np.where(failed[None, :], 0.0, u)
    act = muscle.activation_step_arrays(act, u, t.tau1[None, :], t.tau2[None, :], dt)

    if geom is None:
        kin = point_kinematics(model, q, qdot)
        lengths, j_m, ldot = muscle_geometry_arrays(model, kin, qdot)
    else:
        kin, lengths, j_m, ldot = geom
    tension, _, _ = muscle.model_tension(model, lengths, ldot, act)
    if failed is not None:
        tension = np.where(failed[None, :], 0.0, tension)

    mass = mass_matrix_batch(model, kin)
    contact_q, contact_damp = _contact_step_terms(model, kin)
    rhs = (
        -(j_m.swapaxes(1, 2) @ tension[:, :, None])[:, :, 0]
        - bias_batch(model, kin, qdot, include_damping=False)
        + contact_q
        + limit_torque_batch(model, q)
        + external_torque_batch(model, kin, perturbation, time)
    )

    # joint viscosity and contact dampers act on the post-step velocity:
    # (M + dt*D) v' = M v + dt * rhs, unconditionally stable at any D
    lhs = mass + dt * np.diag(t.dof_damping)[None]
    if contact_damp is not None:
        lhs = lhs + dt * contact_damp

    bad = ~(
        np.isfinite(lhs).all(axis=(1, 2))
        & np.isfinite(rhs).all(axis=1)
        & (np.abs(lhs).max(axis=(1, 2)) < 1e12)
    )
    if bad.any():
        eye = np.eye(t.d_q)
        lhs = np.where(bad[:, None, None], eye[None], lhs)
        mass = np.where(bad[:, None, None], eye[None], mass)
        rhs = np.where(bad[:, None], 0.0, rhs)
        qdot = np.where(bad[:, None], 0.0, qdot)

    momentum = (mass @ qdot[:, :, None])[:, :, 0] + dt * rhs
    qdot = np.linalg.solve(lhs, momentum[:, :, None])[:, :, 0]
    q_raw = q + qdot * dt
    hit = ((q_raw < t.q_lo[None, :]) & (qdot < 0.0)) | (
        (q_raw > t.q_hi[None, :]) & (qdot > 0.0)
    )
    if hit.any():
        # inertia-consistent stopping impulse on the clamped joints: solving
        # (M + kappa D) v' = M v with kappa >> M zeroes the outward velocity
        # without pumping energy into coupled joints
        lhs2 = mass + LIMIT_IMPULSE_KAPPA * np.eye(t.d_q)[None] * hit[:, :, None]
        mom2 = (mass @ qdot[:, :, None])[:, :, 0]
        qdot = np.linalg.solve(lhs2, mom2[:, :, None])[:, :, 0]
        q_raw = q + qdot * dt
    q = np.clip(q_raw, t.q_lo[None, :], t.q_hi[None, :])

    post_bad = ~(np.isfinite(q).all(axis=1) & np.isfinite(qdot).all(axis=1))
    bad = bad | post_bad
    if bad.any():
        q = np.where(bad[:, None], 0.0, q)
        qdot = np.where(bad[:, None], 0.0, qdot)
        act = np.where(bad[:, None], 0.0, act)
    return q, qdot, act, time + dt, bad


def forward_step(
    model: ModelSpec,
    state: SimState,
    u: np.ndarray,
    perturbation: Perturbation = NO_PERTURBATION,
    dt: float = DEFAULT_DT,
) -> SimState:
    """Single-state step; raises SimulationDiverged on non-finite results."""
    failed = perturbation.failed_mask(model.d_u, state.time)
    q, qdot, act, time, bad = step_batch(
        model,
        state.q[None, :],
        state.qdot[None, :],
        state.act[None, :],
        np.array([state.time]),
        np.asarray(u, dtype=np.float64)[None, :],
        dt,
        perturbation,
        failed,
    )
    if bad[0]:
        raise SimulationDiverged(state.time)
    return SimState(q[0], qdot[0], act[0], float(time[0]))


def compute_dynamics_terms(
    model: ModelSpec,
    q: np.ndarray,
    qdot: np.ndarray,
    perturbation: Perturbation = NO_PERTURBATION,
    t: float = 0.0,
) -> DynamicsTerms:
    """Mass matrix, bias (Coriolis + gravity + damping) and generalized contact force."""
    del perturbation, t  # wrenches are applied in step_batch, not part of the terms
    kin = point_kinematics(model, q[None, :], qdot[None, :])
    mass = mass_matrix_batch(model, kin)[0]
    bias = bias_batch(model, kin, qdot[None, :])[0]
    fc = contact_forces_batch(model, kin)
    fc = fc[0] if isinstance(fc, np.ndarray) else np.zeros(model.d_q)
    return DynamicsTerms(mass_matrix=mass, bias=bias, contact_force=fc)


@dataclass
class MuscleGeometry:
    lengths: np.ndarray
    velocities: np.ndarray
    moment_arms: np.ndarray  # (d_u, d_q) = dl/dq


def muscle_geometry(model: ModelSpec, q: np.ndarray, qdot: np.ndarray) -> MuscleGeometry:
    kin = point_kinematics(model, q[None, :], qdot[None, :])
    lengths, j_m, ldot = muscle_geometry_arrays(model, kin, qdot[None, :])
    return MuscleGeometry(lengths=lengths[0], velocities=ldot[0], moment_arms=j_m[0])


@dataclass
class FrameState:
    position: np.ndarray
    velocity: np.ndarray
    up: np.ndarray


def frame_kinematics(model: ModelSpec, q: np.ndarray, qdot: np.ndarray, name: str) -> FrameState:
    """World pose/velocity of a named frame; 'com' is the mass-weighted center."""
    t = model.tables
    kin = point_kinematics(model, q[None, :], qdot[None, :])
    if name == "com":
        pos, vel = com_state(model, kin)
        return FrameState(
            position=np.array([pos[0].real, pos[0].imag]),
            velocity=np.array([vel[0].real, vel[0].imag]),
            up=np.array([0.0, 1.0]),
        )
    if name not in t.frame_index:
        raise KeyError(f"unknown frame {name!r}")
    i = t.frame_index[name]
    fr = model.frames[i]
    p = kin.pos[0, t.sl_frame.start + i]
    # rigid-body velocity: v = v_origin + omega x r
    omega = float(t.rev_signed[fr.link] @ qdot)
    v = kin.vel[0, t.sl_origin.start + fr.link] + 1j * omega * (
        p - kin.origin[0, fr.link]
    )
    up = kin.rot[0, fr.link] * t.frame_up[i]
    return FrameState(
        position=np.array([p.real, p.imag]),
        velocity=np.array([v.real, v.imag]),
        up=np.array([up.real, up.imag]),
    )


def mechanical_energy(model: ModelSpec, q: np.ndarray, qdot: np.ndarray) -> float:
    """Kinetic + gravitational potential energy (no muscle or contact storage)."""
    t = model.tables
    kin = point_kinematics(model, q[None, :], qdot[None, :])
    v = kin.vel[0, t.sl_com]
    y = kin.pos[0, t.sl_com].imag
    omega = t.rev_signed @ qdot
    kinetic = 0.5 * float(t.link_mass @ (v.real**2 + v.imag**2) + t.link_inertia @ omega**2)
    potential = model.gravity * float(t.link_mass @ y)
    return kinetic + potential

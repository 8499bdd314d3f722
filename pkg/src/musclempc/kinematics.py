"""Batched planar kinematics.

All quantities are computed for a batch of configurations at once (leading
axis B); planner rollouts run as one batch, single states as B = 1. Planar
points and 2-vectors are held as complex numbers (x + iy): rotation is a
complex multiply and the 90-degree rotation that revolute-joint jacobian
columns need is a multiply by 1j. Derivative convention: the moment-arm
matrix is J_m = dl/dq, so muscle tension T produces generalized force
-J_m^T T.

Jacobians and velocities are only materialized for the point-batch prefix
that dynamics consumes (origins, COMs, via points, contact points); named
frames get positions only, which is all the cost terms read.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DOF_REV, ModelSpec


@dataclass
class PointKinematics:
    """One batched kinematics pass over the model's registered points.

    Slices into the point axis (origins/coms/via/contact/frames) live on
    model.tables; jac/vel cover points [0:n_jac) = everything but frames.
    """

    phi: np.ndarray       # (B, n_links + 1) world link angles (world slot last)
    origin: np.ndarray    # (B, n_links + 1) complex link origins
    rot: np.ndarray       # (B, n_links + 1) complex e^{i phi}
    pos: np.ndarray       # (B, n_pts) complex world positions
    jac: np.ndarray       # (B, n_jac, d_q) complex point jacobians
    vel: np.ndarray       # (B, n_jac) complex world velocities


def link_poses(model: ModelSpec, q: np.ndarray):
    """Forward kinematics: world angles, origins, rotations. q is (B, d_q).

    Arrays carry one extra trailing slot holding the identity world pose, so
    world-attached points index it like any link.
    """
    t = model.tables
    B = q.shape[0]
    phi = np.zeros((B, t.n_links + 1))
    for b in range(t.n_links):
        off = t.link_qoff[b]
        qi = off + 2 if t.link_free[b] else off
        ang = t.dof_sign[qi] * q[:, qi] + t.link_rest_offset[b]
        par = t.link_parent[b]
        if par >= 0:
            ang = ang + phi[:, par]
        phi[:, b] = ang
    rot = np.exp(1j * phi)
    rot[:, t.n_links] = 1.0
    origin = np.zeros((B, t.n_links + 1), dtype=np.complex128)
    for b in range(t.n_links):
        if t.link_free[b]:
            off = t.link_qoff[b]
            origin[:, b] = q[:, off] + 1j * q[:, off + 1]
        else:
            par = t.link_parent[b]
            if par >= 0:
                origin[:, b] = origin[:, par] + rot[:, par] * t.link_anchor[b]
            else:
                origin[:, b] = t.link_anchor[b]
    return phi, origin, rot


def point_kinematics(model: ModelSpec, q: np.ndarray, qdot: np.ndarray) -> PointKinematics:
    """Positions for all points; jacobians and velocities for the dynamic prefix."""
    t = model.tables
    phi, origin, rot = link_poses(model, q)
    pos = origin[:, t.pt_link] + rot[:, t.pt_link] * t.pt_local

    # revolute columns: 1j * sign * (p - origin_of_dof_link); prismatic: world axis
    n_jac = t.n_jac
    o_dof = origin[:, t.dof_link]                       # (B, d_q)
    jac = np.subtract(pos[:, :n_jac, None], o_dof[:, None, :])
    jac *= t.rev_signed_j[:n_jac]
    jac += t.pris_unit_pt[t.pt_link[:n_jac]]
    vel = (jac @ qdot[:, :, None].astype(np.complex128))[:, :, 0]
    return PointKinematics(phi, origin, rot, pos, jac, vel)


def bias_acceleration(model: ModelSpec, kin: PointKinematics, qdot: np.ndarray, sl):
    """J̇·q̇ for the points in slice sl (point acceleration at q̈ = 0)."""
    t = model.tables
    rev = t.rev_signed_pt[t.pt_link[sl]]                # (n_sl, d_q)
    v_dof = kin.vel[:, t.sl_origin][:, t.dof_link]      # (B, d_q) velocity of dof link origin
    v = kin.vel[:, sl]
    omega = qdot @ rev.T                                # (B, n_sl) link angular velocity
    carried = (qdot * v_dof) @ rev.T                    # Σ_d q̇_d s_d v_origin(d)
    return 1j * (v * omega - carried)


def muscle_lengths_at(model: ModelSpec, q: np.ndarray) -> np.ndarray:
    """Path lengths only (no derivatives); q is (d_q,) or (B, d_q)."""
    t = model.tables
    q2 = np.atleast_2d(q)
    _, origin, rot = link_poses(model, q2)
    links = t.pt_link[t.sl_via]
    pos = origin[:, links] + rot[:, links] * t.pt_local[t.sl_via]
    seg = np.abs(pos[:, t.seg_b] - pos[:, t.seg_a])
    lengths = seg @ t.seg_to_muscle.T
    return lengths[0] if q.ndim == 1 else lengths


def muscle_geometry_arrays(model: ModelSpec, kin: PointKinematics, qdot: np.ndarray):
    """(lengths, moment arms dl/dq, rates) from a finished kinematics pass."""
    t = model.tables
    sl = t.sl_via
    pos = kin.pos[:, sl]
    jac = kin.jac[:, sl]
    d = pos[:, t.seg_b] - pos[:, t.seg_a]
    seg_len = np.abs(d)
    u = np.conj(d / seg_len)
    dj = jac[:, t.seg_b] - jac[:, t.seg_a]
    dj *= u[:, :, None]
    # d|seg|/dq = Re(conj(û) · dJ), summed into muscles
    j_m = t.seg_to_muscle @ dj.real
    lengths = seg_len @ t.seg_to_muscle.T
    ldot = (j_m @ qdot[:, :, None])[:, :, 0]
    return lengths, j_m, ldot


def com_state(model: ModelSpec, kin: PointKinematics):
    """Whole-body center of mass position and velocity (complex, per batch row)."""
    t = model.tables
    w = t.link_mass / t.total_mass
    com = kin.pos[:, t.sl_com] @ w
    vcom = kin.vel[:, t.sl_com] @ w
    return com, vcom

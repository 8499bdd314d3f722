"""Posture-tracking proportional controller over muscle lengths.

Converts a target posture for the major joints into per-muscle excitations:
target muscle lengths from the posture, per-muscle proportional gains scaled
by |moment arm x posture error| (so muscles spanning moving joints work
harder), pull-only target tensions, then exact one-step inversion of the
activation dynamics to find the excitation that realizes them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import SimState
from .kinematics import muscle_geometry_arrays, muscle_lengths_at, point_kinematics
from .model import ModelSpec, MuscleSpec
from .muscle import tension_gain_bias

GAIN_MODES = ("morphology", "constant", "pd")


@dataclass(frozen=True)
class GainConfig:
    k_bar: float = 2.0e6        # global gain scale
    k_min: float = 1.0          # N/m floor so z* = z never zeroes all force
    mode: str = "morphology"
    constant_gain: float | None = None  # required in constant mode (matched mean)
    pd_damping_ratio: float = 0.1
    abs_of_sum: bool = False    # |sum_i col_i dz_i| instead of sum_i |col_i dz_i|
    eps_gain: float = 1e-6      # x f_max: below this T_k the target activation is 0
    eps_denom: float = 1e-3     # x dt: floor for the inversion denominator

    def __post_init__(self):
        if self.mode not in GAIN_MODES:
            raise ValueError(f"gain mode must be one of {GAIN_MODES}")
        if not self.k_bar > 0:
            raise ValueError("k_bar must be > 0")
        if self.k_min < 0:
            raise ValueError("k_min must be >= 0")


@dataclass
class TargetPosture:
    """Target values for the major joints, clamped to their limits."""

    z: np.ndarray

    @classmethod
    def for_model(cls, model: ModelSpec, values) -> "TargetPosture":
        z = np.asarray(values, dtype=np.float64)
        if z.shape != (model.d_z,):
            raise ValueError(f"target posture must have dimension {model.d_z}")
        mask = list(model.posture_mask)
        t = model.tables
        return cls(np.clip(z, t.q_lo[mask], t.q_hi[mask]))


@dataclass
class ControlInfo:
    """Degenerate-case counters from one control evaluation."""

    gain_floor_hits: int = 0
    denom_floor_hits: int = 0


def extract_posture(model: ModelSpec, state: SimState) -> TargetPosture:
    """Current major-joint coordinates (the planner's instant-sample center)."""
    return TargetPosture(state.q[list(model.posture_mask)].copy())


def target_lengths(model: ModelSpec, state: SimState, z_star: TargetPosture) -> np.ndarray:
    """Muscle lengths at the current posture with major joints moved to z*.

    Non-major joints keep their present values; the planner does not command
    them, so their current state is the best prediction.
    """
    q_target = state.q.copy()
    q_target[list(model.posture_mask)] = z_star.z
    t = model.tables
    return muscle_lengths_at(model, np.clip(q_target, t.q_lo, t.q_hi))


def morphology_gains(
    j_m_masked: np.ndarray, z_star: np.ndarray, z_now: np.ndarray, cfg: GainConfig
) -> np.ndarray:
    """Per-muscle gains from moment arms restricted to the major joints.

    j_m_masked is (d_u, d_z) (or batched (..., d_u, d_z)); returns (..., d_u).
    """
    dz = np.asarray(z_star) - np.asarray(z_now)
    if cfg.mode == "constant":
        if cfg.constant_gain is None:
            raise ValueError("constant gain mode needs constant_gain (matched mean)")
        shape = j_m_masked.shape[:-1]
        return np.maximum(np.full(shape, cfg.constant_gain), cfg.k_min)
    if cfg.abs_of_sum:
        raw = np.abs(j_m_masked @ dz[..., None])[..., 0]
    else:
        raw = np.abs(j_m_masked * dz[..., None, :]).sum(axis=-1)
    return np.maximum(cfg.k_bar * raw, cfg.k_min)


def p_force(gains: np.ndarray, l_star: np.ndarray, l: np.ndarray) -> np.ndarray:
    """Pull-only target tensions: positive only when the muscle must shorten."""
    return np.maximum(0.0, gains * (l - l_star))


def control_inversion(
    t_star: float,
    a: float,
    t_k: float,
    t_p: float,
    spec: MuscleSpec,
    dt: float,
) -> float:
    """Excitation whose one-step activation update realizes target tension t_star."""
    u, _ = inversion_arrays(
        np.asarray(t_star, dtype=np.float64),
        np.asarray(a, dtype=np.float64),
        np.asarray(t_k),
        np.asarray(t_p),
        spec.tau1,
        spec.tau2,
        np.asarray(spec.f_max),
        dt,
        GainConfig(),
    )
    return float(u)


def inversion_arrays(t_star, a, t_k, t_p, tau1, tau2, f_max, dt, cfg: GainConfig):
    """Vectorized inversion; returns (u, info). Degeneracies resolve by clamping:
    vanishing force gain targets zero activation, a near-zero denominator is
    floored to keep the step finite."""
    gain_ok = t_k >= cfg.eps_gain * f_max
    a_star = np.where(
        gain_ok,
        np.minimum(np.maximum((t_star - t_p) / np.where(gain_ok, t_k, 1.0), 0.0), 1.0),
        0.0,
    )
    da = a_star - a
    denom = dt - tau1 * da
    floor = cfg.eps_denom * dt
    denom_ok = denom >= floor
    u = np.minimum(np.maximum(a + tau2 * da / np.maximum(denom, floor), 0.0), 1.0)
    info = ControlInfo(
        gain_floor_hits=int(np.size(gain_ok) - np.count_nonzero(gain_ok)),
        denom_floor_hits=int(np.size(denom_ok) - np.count_nonzero(denom_ok)),
    )
    return u, info


def act(
    model: ModelSpec,
    state: SimState,
    z_star: TargetPosture,
    cfg: GainConfig,
    dt_ctrl: float,
    failed: np.ndarray | None = None,
) -> np.ndarray:
    """Full low-level policy for a single state; returns u in [0,1]^{d_u}."""
    kin = point_kinematics(model, state.q[None, :], state.qdot[None, :])
    lengths, j_m, ldot = muscle_geometry_arrays(model, kin, state.qdot[None, :])
    u, _ = controls_from_geometry(
        model,
        state.q[None, :],
        state.act[None, :],
        lengths,
        j_m,
        ldot,
        z_star.z[None, :],
        cfg,
        dt_ctrl,
        failed,
    )
    return u[0]


def controls_from_geometry(
    model: ModelSpec,
    q: np.ndarray,
    activation: np.ndarray,
    lengths: np.ndarray,
    j_m: np.ndarray,
    ldot: np.ndarray,
    z: np.ndarray,
    cfg: GainConfig,
    dt_ctrl: float,
    failed: np.ndarray | None = None,
):
    """Batched policy core, reusing an already-computed muscle geometry pass."""
    t = model.tables
    mask = t.mask_idx
    z = np.minimum(np.maximum(z, t.z_lo), t.z_hi)
    q_target = q.copy()
    q_target[:, mask] = z
    l_star = muscle_lengths_at(model, q_target)

    gains = morphology_gains(j_m[:, :, mask], z, q[:, mask], cfg)
    t_star = p_force(gains, l_star, lengths)
    if cfg.mode == "pd":
        t_star = t_star + cfg.pd_damping_ratio * gains * np.maximum(0.0, ldot)
    t_k, t_p = tension_gain_bias(lengths, ldot, t.f_max, t.l_opt, t.v_max)
    u, info = inversion_arrays(
        t_star, activation, t_k, t_p, t.tau1[None, :], t.tau2[None, :], t.f_max, dt_ctrl, cfg
    )
    if failed is not None:
        u = np.where(failed[None, :], 0.0, u)
    return u, info

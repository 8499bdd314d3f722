"""Tension-only muscle actuators: force curves and first-order activation dynamics.

Force convention: T is tension in newtons, always >= 0 (muscles pull). The
generalized torque of a muscle with moment arms J_m (= dl/dq) is -J_m^T T.
The affine decomposition T = T_k * a + T_p separates the activation gain from
the passive bias, which the low-level controller inverts.
"""

from __future__ import annotations

import numpy as np

from .model import ModelSpec, MuscleSpec

_FP_SCALE = 0.15 / (np.exp(5.0) - 1.0)


def force_length(l_norm):
    """Active force-length curve, 1 at optimal length."""
    l_norm = np.asarray(l_norm, dtype=np.float64)
    return np.exp(-((l_norm - 1.0) ** 2) / 0.45)


def force_passive(l_norm):
    """Passive stretch curve: 0 up to optimal length, then exponential, capped at 1.5."""
    l_norm = np.asarray(l_norm, dtype=np.float64)
    stretched = np.maximum(l_norm - 1.0, 0.0)
    return np.minimum(_FP_SCALE * np.expm1(10.0 * stretched), 1.5)


def force_velocity(v_norm):
    """Force-velocity curve; v_norm > 0 is lengthening, -1 annihilates force."""
    v_norm = np.asarray(v_norm, dtype=np.float64)
    return np.minimum(np.maximum(1.0 + v_norm, 0.0), 1.5)


def muscle_force(spec: MuscleSpec, l: float, ldot: float, a: float):
    """Tension of one muscle: returns (T, T_k, T_p) with T = T_k * a + T_p."""
    t_k, t_p = tension_gain_bias(
        np.asarray(l), np.asarray(ldot), spec.f_max, spec.l_opt, spec.v_max
    )
    return float(t_k * a + t_p), float(t_k), float(t_p)


def tension_gain_bias(l, ldot, f_max, l_opt, v_max):
    """Vectorized affine decomposition; arrays broadcast over muscles/batch."""
    l_norm = l / l_opt
    v_norm = ldot / v_max
    t_k = f_max * force_length(l_norm) * force_velocity(v_norm)
    t_p = f_max * force_passive(l_norm)
    return t_k, t_p


def activation_rate(a, u, tau1, tau2):
    """da/dt = (u - a) / ((u - a) * tau1 + tau2)."""
    d = u - a
    return d / (d * tau1 + tau2)


def activation_step(a, u, spec: MuscleSpec, dt: float):
    """One explicit-Euler step of the activation dynamics, clamped to [0, 1]."""
    return activation_step_arrays(
        np.asarray(a, dtype=np.float64),
        np.asarray(u, dtype=np.float64),
        spec.tau1,
        spec.tau2,
        dt,
    )


def activation_step_arrays(a, u, tau1, tau2, dt):
    return np.minimum(np.maximum(a + dt * activation_rate(a, u, tau1, tau2), 0.0), 1.0)


def activation_step_smoothed(a, u, spec: MuscleSpec, dt: float, sharpness: float = 100.0):
    """Alternative mode: activation-dependent time constant, sigmoid-blended.

    tau rises with activation when exciting and falls when relaxing; not the
    default because the low-level control inversion is exact only for the
    affine (tau1, tau2) form.
    """
    a = np.asarray(a, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    scale = 0.5 + 1.5 * a
    tau_up = spec.tau_act * scale
    tau_down = spec.tau_deact / scale
    w = 1.0 / (1.0 + np.exp(-sharpness * (u - a)))
    tau = w * tau_up + (1.0 - w) * tau_down
    return np.clip(a + dt * (u - a) / tau, 0.0, 1.0)


def model_tension(model: ModelSpec, lengths, rates, act):
    """Batched tensions for all muscles: (T, T_k, T_p), each (B, d_u)."""
    t = model.tables
    t_k, t_p = tension_gain_bias(lengths, rates, t.f_max, t.l_opt, t.v_max)
    return t_k * act + t_p, t_k, t_p

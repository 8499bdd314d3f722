"""Sampling-based model-predictive posture planner.

Each plan draws N candidate target postures from a factorized Gaussian --
the first N̄ centered on the system's *current* posture (instant rollouts,
for fast recovery when the state has drifted from the previous plan), the
rest on the distribution mean -- evaluates each candidate by rolling the
dynamics forward under the low-level posture controller, and re-fits the
Gaussian to the elite samples with exponential cost weighting.

Determinism contract: all randomness is drawn from one seeded stream before
rollouts are dispatched, rollouts are batched per worker chunk with
row-independent arithmetic, and the update reduces by sample index, so plan
outputs are bit-identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import costs as costs_mod
from .costs import CostSpec, build_context, evaluate_batch
from .dynamics import NO_PERTURBATION, DEFAULT_DT, DEFAULT_SUBSTEPS, Perturbation, SimState, step_batch
from .kinematics import muscle_geometry_arrays, point_kinematics
from .lowlevel import GainConfig, TargetPosture, controls_from_geometry, extract_posture
from .model import ModelSpec


@dataclass
class SamplingDistribution:
    """Factorized Gaussian over target postures."""

    mu: np.ndarray
    sigma: np.ndarray

    def copy(self) -> "SamplingDistribution":
        return SamplingDistribution(self.mu.copy(), self.sigma.copy())


@dataclass(frozen=True)
class PlannerConfig:
    n_rollouts: int = 64
    n_instant: int = 10
    horizon: float = 0.3          # seconds
    iterations: int = 1
    lam: float | None = None      # None = adaptive: lam_factor * (median - min)
    lam_factor: float = 0.1
    n_elites: int = 16
    sigma_init: float = 0.15
    sigma_floor: float = 0.03
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        # n_instant = 0 is the no-instant-rollout ablation
        if not 0 <= self.n_instant <= self.n_rollouts:
            raise ValueError("need 0 <= n_instant <= n_rollouts")
        if self.n_elites > self.n_rollouts or self.n_elites < 1:
            raise ValueError("need 1 <= n_elites <= n_rollouts")
        if self.lam is not None and not self.lam > 0:
            raise ValueError("lam must be > 0 when fixed")
        if not self.horizon > 0:
            raise ValueError("horizon must be > 0")


@dataclass
class RolloutOutcome:
    index: int
    target: np.ndarray
    cost: float
    diverged: bool


@dataclass
class PlanResult:
    u: np.ndarray
    z_star: TargetPosture
    dist: SamplingDistribution
    degenerate: bool = False      # every rollout diverged; distribution unchanged
    outcomes: list = field(default_factory=list)


def initial_distribution(model: ModelSpec, state: SimState, cfg: PlannerConfig) -> SamplingDistribution:
    mu = extract_posture(model, state).z
    return SamplingDistribution(mu=mu, sigma=np.full(model.d_z, cfg.sigma_init))


def _sample(dist, state, model, cfg, rng) -> np.ndarray:
    t = model.tables
    mask = list(model.posture_mask)
    draws = rng.standard_normal((cfg.n_rollouts, model.d_z))
    centers = np.empty((cfg.n_rollouts, model.d_z))
    centers[: cfg.n_instant] = state.q[mask]
    centers[cfg.n_instant:] = dist.mu
    z = centers + dist.sigma[None, :] * draws
    return np.clip(z, t.q_lo[mask][None, :], t.q_hi[mask][None, :])


def sample_candidates(
    dist: SamplingDistribution,
    state: SimState,
    model: ModelSpec,
    cfg: PlannerConfig,
    rng: np.random.Generator,
) -> list[TargetPosture]:
    """N̄ instant candidates around the current posture, N - N̄ around mu."""
    return [TargetPosture(z) for z in _sample(dist, state, model, cfg, rng)]


def horizon_steps(cfg: PlannerConfig, dt: float, substeps: int) -> int:
    return max(1, round(cfg.horizon / (dt * substeps)))


def _simulate_batch(
    model: ModelSpec,
    snapshot: SimState,
    z: np.ndarray,
    cost_spec: CostSpec,
    gain_cfg: GainConfig,
    n_ctrl: int,
    dt: float,
    substeps: int,
    failed: np.ndarray | None,
):
    """Roll a batch of candidates for n_ctrl control steps; returns (costs, diverged)."""
    B = z.shape[0]
    q = np.repeat(snapshot.q[None, :], B, axis=0)
    qdot = np.repeat(snapshot.qdot[None, :], B, axis=0)
    act = np.repeat(snapshot.act[None, :], B, axis=0)
    time = np.full(B, snapshot.time)
    total = np.zeros(B)
    diverged = np.zeros(B, dtype=bool)
    dt_ctrl = dt * substeps
    for _ in range(n_ctrl):
        kin = point_kinematics(model, q, qdot)
        lengths, j_m, ldot = muscle_geometry_arrays(model, kin, qdot)
        u, _ = controls_from_geometry(
            model, q, act, lengths, j_m, ldot, z, gain_cfg, dt_ctrl, failed
        )
        ctx = build_context(model, kin, q, qdot, u)
        step_cost = evaluate_batch(cost_spec, model, ctx)
        total += np.where(diverged, 0.0, step_cost)
        q, qdot, act, time, bad = step_batch(
            model, q, qdot, act, time, u, dt, failed=failed,
            geom=(kin, lengths, j_m, ldot),
        )
        diverged |= bad
        for _s in range(1, substeps):
            q, qdot, act, time, bad = step_batch(
                model, q, qdot, act, time, u, dt, failed=failed
            )
            diverged |= bad
    diverged |= ~np.isfinite(total)
    return np.where(diverged, np.inf, total), diverged


def rollout(
    model: ModelSpec,
    snapshot: SimState,
    z: TargetPosture,
    cost_spec: CostSpec,
    cfg: PlannerConfig,
    gain_cfg: GainConfig = GainConfig(),
    dt: float = DEFAULT_DT,
    substeps: int = DEFAULT_SUBSTEPS,
    failed: np.ndarray | None = None,
    index: int = 0,
) -> RolloutOutcome:
    """Evaluate one candidate target over the horizon from a snapshot copy."""
    total, diverged = _simulate_batch(
        model,
        snapshot,
        z.z[None, :],
        cost_spec,
        gain_cfg,
        horizon_steps(cfg, dt, substeps),
        dt,
        substeps,
        failed,
    )
    return RolloutOutcome(
        index=index, target=z.z.copy(), cost=float(total[0]), diverged=bool(diverged[0])
    )


def evaluate_candidates(
    model, snapshot, z_all, cost_spec, cfg, gain_cfg, dt, substeps, failed, pool=None
):
    """Chunked batch evaluation; output independent of chunking/scheduling."""
    n_ctrl = horizon_steps(cfg, dt, substeps)
    n_chunks = max(1, min(cfg.workers, z_all.shape[0]))
    if n_chunks == 1:
        return _simulate_batch(
            model, snapshot, z_all, cost_spec, gain_cfg, n_ctrl, dt, substeps, failed
        )
    chunks = np.array_split(z_all, n_chunks)

    def run(chunk):
        return _simulate_batch(
            model, snapshot, chunk, cost_spec, gain_cfg, n_ctrl, dt, substeps, failed
        )

    if pool is not None:
        results = list(pool.map(run, chunks))
    else:
        with ThreadPoolExecutor(max_workers=n_chunks) as ex:
            results = list(ex.map(run, chunks))
    costs = np.concatenate([r[0] for r in results])
    diverged = np.concatenate([r[1] for r in results])
    return costs, diverged


def _weights(costs: np.ndarray, cfg: PlannerConfig):
    """Elite-masked exponential weights; min-shifted exponent for stability."""
    order = np.argsort(costs, kind="stable")  # ties broken by sample index
    elites = order[: cfg.n_elites]
    finite = np.isfinite(costs)
    c_min = costs[elites[0]]
    if cfg.lam is not None:
        lam = cfg.lam
    else:
        lam = cfg.lam_factor * (np.median(costs[finite]) - c_min)
        lam = max(lam, 1e-12)
    w = np.zeros_like(costs)
    w[elites] = np.exp(-(costs[elites] - c_min) / lam)
    w[~finite] = 0.0
    return w


def update_distribution(
    outcomes: list[RolloutOutcome],
    dist: SamplingDistribution,
    cfg: PlannerConfig,
    model: ModelSpec | None = None,
) -> tuple[SamplingDistribution, bool]:
    """MPPI re-fit of (mu, sigma) to the elite outcomes.

    Returns (new distribution, degenerate flag); with every rollout diverged
    the distribution is returned unchanged and flagged.
    """
    costs = np.array([o.cost for o in outcomes])
    if not np.isfinite(costs).any():
        return dist.copy(), True
    z = np.stack([o.target for o in outcomes])
    w = _weights(costs, cfg)
    wsum = w.sum()
    mu = (w @ z) / wsum
    var = (w @ (z - mu[None, :]) ** 2) / wsum
    sigma = np.maximum(np.sqrt(var), cfg.sigma_floor)
    if model is not None:
        mask = list(model.posture_mask)
        t = model.tables
        mu = np.clip(mu, t.q_lo[mask], t.q_hi[mask])
    return SamplingDistribution(mu=mu, sigma=sigma), False


def plan(
    model: ModelSpec,
    state: SimState,
    dist: SamplingDistribution,
    cost_spec: CostSpec,
    cfg: PlannerConfig,
    rng: np.random.Generator,
    gain_cfg: GainConfig = GainConfig(),
    dt: float = DEFAULT_DT,
    substeps: int = DEFAULT_SUBSTEPS,
    failed: np.ndarray | None = None,
    pool=None,
    keep_outcomes: bool = False,
) -> PlanResult:
    """One full planning cycle; returns the control for the current state,
    the chosen target posture, and the updated (warm-start) distribution."""
    degenerate = False
    outcomes_out: list[RolloutOutcome] = []
    for _ in range(cfg.iterations):
        z_all = _sample(dist, state, model, cfg, rng)
        costs, diverged = evaluate_candidates(
            model, state, z_all, cost_spec, cfg, gain_cfg, dt, substeps, failed, pool
        )
        outcomes = [
            RolloutOutcome(i, z_all[i], float(costs[i]), bool(diverged[i]))
            for i in range(len(costs))
        ]
        dist, bad = update_distribution(outcomes, dist, cfg, model)
        degenerate = degenerate or bad
        if keep_outcomes:
            outcomes_out = outcomes
    z_star = TargetPosture.for_model(model, dist.mu)
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
        gain_cfg,
        dt * substeps,
        failed,
    )
    return PlanResult(
        u=u[0], z_star=z_star, dist=dist, degenerate=degenerate, outcomes=outcomes_out
    )


class Planner:
    """Episode-scoped planner: owns the sampling stream, the warm-start
    distribution, and the rollout worker pool."""

    def __init__(
        self,
        model: ModelSpec,
        cost_spec: CostSpec,
        cfg: PlannerConfig,
        gain_cfg: GainConfig = GainConfig(),
        dt: float = DEFAULT_DT,
        substeps: int = DEFAULT_SUBSTEPS,
    ):
        costs_mod.validate_for_model(cost_spec, model)
        self.model = model
        self.cost_spec = cost_spec
        self.cfg = cfg
        self.gain_cfg = gain_cfg
        self.dt = dt
        self.substeps = substeps
        self.rng = np.random.default_rng(cfg.seed)
        self.dist: SamplingDistribution | None = None
        self._pool = (
            ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
        )

    def reset(self, state: SimState) -> None:
        self.rng = np.random.default_rng(self.cfg.seed)
        self.dist = initial_distribution(self.model, state, self.cfg)

    def plan(self, state: SimState, failed: np.ndarray | None = None) -> PlanResult:
        if self.dist is None:
            self.reset(state)
        result = plan(
            self.model,
            state,
            self.dist,
            self.cost_spec,
            self.cfg,
            self.rng,
            self.gain_cfg,
            self.dt,
            self.substeps,
            failed,
            self._pool,
        )
        self.dist = result.dist
        return result

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None


class VanillaMppiPlanner:
    """Ablation baseline: MPPI directly over raw muscle-control sequences.

    Plans H_ctrl * d_u decision variables at the same rollout budget; the
    returned plan is an open-loop control sequence consumed until the next
    replan (no low-level policy in the loop).
    """

    def __init__(
        self,
        model: ModelSpec,
        cost_spec: CostSpec,
        cfg: PlannerConfig,
        dt: float = DEFAULT_DT,
        substeps: int = DEFAULT_SUBSTEPS,
        sigma_init: float = 0.3,
        sigma_floor: float = 0.05,
        mu_init: float = 0.1,
    ):
        costs_mod.validate_for_model(cost_spec, model)
        self.model = model
        self.cost_spec = cost_spec
        self.cfg = cfg
        self.dt = dt
        self.substeps = substeps
        self.n_ctrl = horizon_steps(cfg, dt, substeps)
        self.sigma_init = sigma_init
        self.sigma_floor = sigma_floor
        self.mu_init = mu_init
        self.rng = np.random.default_rng(cfg.seed)
        self.mu: np.ndarray | None = None
        self.sigma: np.ndarray | None = None

    def reset(self, state: SimState) -> None:
        del state
        self.rng = np.random.default_rng(self.cfg.seed)
        self.mu = np.full((self.n_ctrl, self.model.d_u), self.mu_init)
        self.sigma = np.full((self.n_ctrl, self.model.d_u), self.sigma_init)

    def shift(self, steps: int) -> None:
        """Receding-horizon warm start after consuming `steps` controls."""
        if self.mu is None or steps <= 0:
            return
        steps = min(steps, self.n_ctrl)
        self.mu = np.concatenate([self.mu[steps:], np.repeat(self.mu[-1:], steps, 0)])
        self.sigma = np.concatenate(
            [self.sigma[steps:], np.full((steps, self.model.d_u), self.sigma_init)]
        )

    def plan(self, state: SimState, failed: np.ndarray | None = None) -> np.ndarray:
        """Returns the planned control sequence (n_ctrl, d_u)."""
        if self.mu is None:
            self.reset(state)
        cfg = self.cfg
        n = cfg.n_rollouts
        draws = self.rng.standard_normal((n, self.n_ctrl, self.model.d_u))
        seqs = np.clip(self.mu[None] + self.sigma[None] * draws, 0.0, 1.0)
        total, diverged = self._rollout_sequences(state, seqs, failed)
        costs = np.where(diverged, np.inf, total)
        if np.isfinite(costs).any():
            w = _weights(costs, cfg)
            wsum = w.sum()
            mu = np.einsum("n,nhu->hu", w, seqs) / wsum
            var = np.einsum("n,nhu->hu", w, (seqs - mu[None]) ** 2) / wsum
            self.mu = mu
            self.sigma = np.maximum(np.sqrt(var), self.sigma_floor)
        return self.mu.copy()

    def _rollout_sequences(self, snapshot, seqs, failed):
        model = self.model
        B = seqs.shape[0]
        q = np.repeat(snapshot.q[None, :], B, axis=0)
        qdot = np.repeat(snapshot.qdot[None, :], B, axis=0)
        act = np.repeat(snapshot.act[None, :], B, axis=0)
        time = np.full(B, snapshot.time)
        total = np.zeros(B)
        diverged = np.zeros(B, dtype=bool)
        for h in range(self.n_ctrl):
            u = seqs[:, h]
            kin = point_kinematics(model, q, qdot)
            ctx = build_context(model, kin, q, qdot, u)
            total += np.where(diverged, 0.0, evaluate_batch(self.cost_spec, model, ctx))
            geom = (kin, *muscle_geometry_arrays(model, kin, qdot))
            q, qdot, act, time, bad = step_batch(
                model, q, qdot, act, time, u, self.dt, failed=failed, geom=geom
            )
            diverged |= bad
            for _s in range(1, self.substeps):
                q, qdot, act, time, bad = step_batch(
                    model, q, qdot, act, time, u, self.dt, failed=failed
                )
                diverged |= bad
        diverged |= ~np.isfinite(total)
        return total, diverged

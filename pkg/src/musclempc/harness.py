"""Scenario runner: episodes, suites, planner benchmarks.

An episode couples two logical loops. The sim loop steps the dynamics at the
control rate, always applying the low-level policy against the most recent
plan's target posture; the planner loop produces new targets. In lockstep
mode (realtime_fraction = 0, the test default) the sim waits for a fresh plan
every plan_interval control steps, which makes whole episodes bit-exactly
reproducible. In paced mode the planner runs on its own thread against the
latest state snapshot and the sim proceeds at a fraction of real time with
whatever target is newest, so plans are consumed stale, as they would be on
a live system.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import threading
import time as _time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import costs as costs_mod
from .costs import CostSpec, build_context, term_values, theta_get
from .dynamics import (
    DEFAULT_DT,
    DEFAULT_SUBSTEPS,
    FailureEvent,
    NO_PERTURBATION,
    Perturbation,
    SimState,
    WrenchEvent,
    initial_state,
    step_batch,
)
from .kinematics import com_state, point_kinematics
from .lowlevel import GainConfig, TargetPosture, controls_from_geometry, extract_posture
from .kinematics import muscle_geometry_arrays
from .model import ModelSpec, ModelError, load_bundled_model, load_model_file, parse_terrain
from .planner import Planner, PlannerConfig, VanillaMppiPlanner

WORKERS_ENV = "MUSCLEMPC_WORKERS"
UPRIGHT_TILT_LIMIT = 0.3  # rad
SUPPORT_MARGIN = 0.02     # m beyond the outermost contact points


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    name: str
    model: ModelSpec
    task: CostSpec
    true_task: CostSpec | None = None        # metrics cost; defaults to task
    episode_seconds: float = 10.0
    dt: float = DEFAULT_DT
    substeps: int = DEFAULT_SUBSTEPS
    plan_interval: int = 5                   # control steps per replan (lockstep)
    realtime_fraction: float = 0.0           # 0 = lockstep
    plan_budget: float | None = None         # paced mode: min seconds between plan starts
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    gains: GainConfig = field(default_factory=GainConfig)
    perturbation: Perturbation = NO_PERTURBATION
    seed: int = 0
    no_instant: bool = False
    constant_gain: bool = False
    pd_mode: bool = False
    vanilla_mppi: bool = False
    initial_lean: float = 0.0                # rad, applied to the free-base angle
    initial_q: dict = field(default_factory=dict)   # joint name -> value(s)
    log_dir: str | None = None
    log_activations: bool = False

    def __post_init__(self):
        if not self.episode_seconds > 0:
            raise ConfigError("episode_seconds must be > 0")
        if not 0.0 <= self.realtime_fraction <= 1.0:
            raise ConfigError("realtime_fraction must be in [0, 1]")
        if self.plan_interval < 1:
            raise ConfigError("plan_interval must be >= 1")
        if self.true_task is None:
            self.true_task = self.task


@dataclass
class EpisodeMetrics:
    cumulative_true_cost: float = 0.0
    forward_distance: float = 0.0
    time_upright: float = 0.0
    energy: float = 0.0                      # sum of activations over control steps
    planner_steps: int = 0
    mean_plan_latency: float = 0.0
    max_plan_latency: float = 0.0
    diverged: bool = False
    gain_floor_hits: int = 0
    denom_floor_hits: int = 0
    degenerate_updates: int = 0

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class EpisodeResult:
    metrics: EpisodeMetrics
    rows: list[dict]
    columns: list[str]
    csv_path: str | None = None
    metrics_path: str | None = None


def effective_workers(cfg: PlannerConfig) -> int:
    if cfg.workers:
        return cfg.workers
    return int(os.environ.get(WORKERS_ENV, "1"))


def _apply_initial(model: ModelSpec, config: ScenarioConfig) -> SimState:
    state = initial_state(model)
    if config.initial_lean:
        free = [i for i, jt in enumerate(model.joints) if jt.kind == "free"]
        if not free:
            raise ConfigError("initial_lean needs a free-base model")
        off = model.tables.link_qoff[free[0]]
        state.q[off + 2] += config.initial_lean
    for jname, val in config.initial_q.items():
        li = model.link_index(str(jname))
        off = model.tables.link_qoff[li]
        vals = np.atleast_1d(np.asarray(val, dtype=np.float64))
        state.q[off: off + len(vals)] = vals
    return state


def _upright_stats(model: ModelSpec, kin, qdot):
    """(tilt, com_x, com_y, support_lo, support_hi) for one-row batches."""
    t = model.tables
    com, _ = com_state(model, kin)
    fi = t.frame_index
    if "pelvis" in fi:
        i = fi["pelvis"]
        up = kin.rot[0, model.frames[i].link] * t.frame_up[i]
        tilt = float(np.arccos(np.clip(up.imag, -1.0, 1.0)))
    else:
        tilt = 0.0
    if t.sl_contact.start != t.sl_contact.stop:
        xs = kin.pos[0, t.sl_contact].real
        lo, hi = float(xs.min()) - SUPPORT_MARGIN, float(xs.max()) + SUPPORT_MARGIN
    else:
        lo, hi = -math.inf, math.inf
    return tilt, float(com[0].real), float(com[0].imag), lo, hi


def is_upright(tilt: float, com_x: float, lo: float, hi: float) -> bool:
    return tilt < UPRIGHT_TILT_LIMIT and lo <= com_x <= hi


class _Mailbox:
    """Single-slot latest-value channel between the sim and planner loops."""

    def __init__(self):
        self._lock = threading.Lock()
        self._value = None
        self._stamp = 0

    def put(self, value):
        with self._lock:
            self._value = value
            self._stamp += 1

    def get(self):
        with self._lock:
            return self._value, self._stamp


def run_episode(config: ScenarioConfig, seed: int | None = None) -> EpisodeResult:
    """Run one episode; returns metrics plus the per-control-step trajectory log."""
    if seed is None:
        seed = config.seed
    model = config.model
    costs_mod.validate_for_model(config.task, model)
    costs_mod.validate_for_model(config.true_task, model)
    pcfg = replace(config.planner, seed=seed, workers=effective_workers(config.planner))
    gcfg = config.gains
    if config.pd_mode:
        gcfg = replace(gcfg, mode="pd")
    if config.constant_gain:
        if gcfg.constant_gain is None:
            gcfg = replace(gcfg, constant_gain=calibrate_constant_gain(config))
        gcfg = replace(gcfg, mode="constant")
    if config.no_instant:
        # ablation: same N rollouts, none centered on the current posture
        pcfg = replace(pcfg, n_instant=0)

    state = _apply_initial(model, config)
    dt, substeps = config.dt, config.substeps
    dt_ctrl = dt * substeps
    n_ctrl = max(1, round(config.episode_seconds / dt_ctrl))

    if config.vanilla_mppi:
        planner = VanillaMppiPlanner(model, config.task, pcfg, dt=dt, substeps=substeps)
    else:
        planner = Planner(model, config.task, pcfg, gcfg, dt=dt, substeps=substeps)
    planner.reset(state)

    if config.realtime_fraction > 0:
        return _run_paced(config, planner, state, n_ctrl, gcfg)

    rows: list[dict] = []
    metrics = EpisodeMetrics()
    latencies: list[float] = []
    theta_true = theta_get(config.true_task)
    theta_plan = theta_get(config.task)
    z_latest = extract_posture(model, state)
    seq = None
    seq_pos = 0
    start_com = None
    upright_run = True

    for k in range(n_ctrl):
        failed = config.perturbation.failed_mask(model.d_u, state.time)
        if k % config.plan_interval == 0:
            t0 = _time.perf_counter()
            if config.vanilla_mppi:
                seq = planner.plan(state, failed)
                seq_pos = 0
            else:
                res = planner.plan(state, failed)
                z_latest = res.z_star
                metrics.degenerate_updates += int(res.degenerate)
            latencies.append(_time.perf_counter() - t0)
            metrics.planner_steps += 1

        kin = point_kinematics(model, state.q[None, :], state.qdot[None, :])
        if config.vanilla_mppi:
            u = seq[min(seq_pos, len(seq) - 1)].copy()
            if failed is not None:
                u = np.where(failed, 0.0, u)
            seq_pos += 1
            info = None
        else:
            lengths, j_m, ldot = muscle_geometry_arrays(model, kin, state.qdot[None, :])
            u_b, info = controls_from_geometry(
                model,
                state.q[None, :],
                state.act[None, :],
                lengths,
                j_m,
                ldot,
                z_latest.z[None, :],
                gcfg,
                dt_ctrl,
                failed,
            )
            u = u_b[0]
            metrics.gain_floor_hits += info.gain_floor_hits
            metrics.denom_floor_hits += info.denom_floor_hits

        ctx = build_context(model, kin, state.q[None, :], state.qdot[None, :], u[None, :])
        terms_plan = term_values(config.task, model, ctx)[0]
        if config.true_task is config.task:
            terms_true = terms_plan
        else:
            terms_true = term_values(config.true_task, model, ctx)[0]
        cost_true = float(terms_true @ theta_true)
        metrics.cumulative_true_cost += cost_true
        metrics.energy += float(state.act.sum())
        tilt, com_x, com_y, sup_lo, sup_hi = _upright_stats(model, kin, state.qdot)
        if start_com is None:
            start_com = com_x
        upright = is_upright(tilt, com_x, sup_lo, sup_hi)
        if upright_run and not upright:
            upright_run = False
        if upright_run:
            metrics.time_upright = (k + 1) * dt_ctrl

        row = {
            "t": state.time,
            "cost_true": cost_true,
            "cost_plan": float(terms_plan @ theta_plan),
            "u_mean": float(u.mean()) if u.size else 0.0,
            "u_max": float(u.max()) if u.size else 0.0,
            "tilt": tilt,
            "com_x": com_x,
            "com_y": com_y,
            "support_lo": sup_lo,
            "support_hi": sup_hi,
            "upright": int(upright),
            "plan_latency": latencies[-1] if k % config.plan_interval == 0 else 0.0,
        }
        for i in range(model.d_q):
            row[f"q{i}"] = state.q[i]
        for i in range(model.d_q):
            row[f"qd{i}"] = state.qdot[i]
        if not config.vanilla_mppi:
            for j in range(model.d_z):
                row[f"z{j}"] = z_latest.z[j]
        for name, val in zip(config.true_task.kinds, terms_true):
            row[f"term_{name}"] = float(val)
        if config.log_activations:
            for i in range(model.d_u):
                row[f"a{i}"] = state.act[i]
        if failed is not None:
            for i in range(model.d_u):
                row[f"u{i}"] = u[i]
        rows.append(row)

        q, qdot, a_new, t_new, bad = step_batch(
            model,
            state.q[None, :],
            state.qdot[None, :],
            state.act[None, :],
            np.array([state.time]),
            u[None, :],
            dt,
            config.perturbation,
            failed,
        )
        diverged = bool(bad[0])
        for _ in range(1, substeps):
            if diverged:
                break
            q, qdot, a_new, t_new, bad = step_batch(
                model, q, qdot, a_new, t_new, u[None, :], dt, config.perturbation, failed
            )
            diverged = diverged or bool(bad[0])
        if diverged:
            metrics.diverged = True
            break
        state = SimState(q[0], qdot[0], a_new[0], float(t_new[0]))

    kin = point_kinematics(model, state.q[None, :], state.qdot[None, :])
    _, end_com_x, _, _, _ = _upright_stats(model, kin, state.qdot)
    metrics.forward_distance = end_com_x - (start_com if start_com is not None else end_com_x)
    if latencies:
        metrics.mean_plan_latency = float(np.mean(latencies))
        metrics.max_plan_latency = float(np.max(latencies))
    if hasattr(planner, "close"):
        planner.close()

    columns = list(rows[0].keys()) if rows else []
    result = EpisodeResult(metrics=metrics, rows=rows, columns=columns)
    if config.log_dir:
        result = _write_logs(config, seed, result)
    return result


def _run_paced(config, planner, state, n_ctrl, gcfg):
    """Asynchronous mode: planner thread + realtime-paced sim loop."""
    model = config.model
    dt, substeps = config.dt, config.substeps
    dt_ctrl = dt * substeps
    budget = config.plan_budget if config.plan_budget else config.planner.horizon
    state_box = _Mailbox()
    plan_box = _Mailbox()
    stop = threading.Event()
    state_box.put((state.copy(), None))

    def planner_loop():
        while not stop.is_set():
            t0 = _time.perf_counter()
            snap, failed = state_box.get()[0]
            res = planner.plan(snap, failed)
            plan_box.put((res, _time.perf_counter() - t0))
            while not stop.is_set() and _time.perf_counter() - t0 < budget:
                _time.sleep(budget / 50.0)

    metrics = EpisodeMetrics()
    theta_true = theta_get(config.true_task)
    z_latest = extract_posture(model, state)
    rows = []
    latencies = []
    seen_stamp = 0
    upright_run = True
    start_com = None

    thread = threading.Thread(target=planner_loop, daemon=True)
    wall0 = _time.perf_counter()
    thread.start()
    try:
        for k in range(n_ctrl):
            failed = config.perturbation.failed_mask(model.d_u, state.time)
            state_box.put((state.copy(), failed))
            plan_val, stamp = plan_box.get()
            if plan_val is not None and stamp != seen_stamp:
                seen_stamp = stamp
                res, lat = plan_val
                z_latest = res.z_star
                latencies.append(lat)
                metrics.planner_steps += 1

            kin = point_kinematics(model, state.q[None, :], state.qdot[None, :])
            lengths, j_m, ldot = muscle_geometry_arrays(model, kin, state.qdot[None, :])
            u_b, _ = controls_from_geometry(
                model, state.q[None, :], state.act[None, :], lengths, j_m, ldot,
                z_latest.z[None, :], gcfg, dt_ctrl, failed,
            )
            u = u_b[0]
            ctx = build_context(model, kin, state.q[None, :], state.qdot[None, :], u[None, :])
            terms_true = term_values(config.true_task, model, ctx)[0]
            metrics.cumulative_true_cost += float(terms_true @ theta_true)
            metrics.energy += float(state.act.sum())
            tilt, com_x, com_y, lo, hi = _upright_stats(model, kin, state.qdot)
            if start_com is None:
                start_com = com_x
            if upright_run and not is_upright(tilt, com_x, lo, hi):
                upright_run = False
            if upright_run:
                metrics.time_upright = (k + 1) * dt_ctrl
            rows.append({"t": state.time, "tilt": tilt, "com_x": com_x})

            q, qdot, a_new, t_new, bad = step_batch(
                model, state.q[None, :], state.qdot[None, :], state.act[None, :],
                np.array([state.time]), u[None, :], dt, config.perturbation, failed,
            )
            diverged = bool(bad[0])
            for _ in range(1, substeps):
                if diverged:
                    break
                q, qdot, a_new, t_new, bad = step_batch(
                    model, q, qdot, a_new, t_new, u[None, :], dt,
                    config.perturbation, failed,
                )
                diverged = diverged or bool(bad[0])
            if diverged:
                metrics.diverged = True
                break
            state = SimState(q[0], qdot[0], a_new[0], float(t_new[0]))

            if config.realtime_fraction > 0:
                target_wall = wall0 + state.time / config.realtime_fraction
                delay = target_wall - _time.perf_counter()
                if delay > 0:
                    _time.sleep(delay)
    finally:
        stop.set()
        thread.join(timeout=5.0)
        if hasattr(planner, "close"):
            planner.close()

    kin = point_kinematics(model, state.q[None, :], state.qdot[None, :])
    _, end_com_x, _, _, _ = _upright_stats(model, kin, state.qdot)
    metrics.forward_distance = end_com_x - (start_com if start_com is not None else end_com_x)
    if latencies:
        metrics.mean_plan_latency = float(np.mean(latencies))
        metrics.max_plan_latency = float(np.max(latencies))
    return EpisodeResult(metrics=metrics, rows=rows, columns=list(rows[0].keys()) if rows else [])


def calibrate_constant_gain(config: ScenarioConfig, sample_seconds: float = 2.0) -> float:
    """Mean morphology gain over a reference run, for the matched-mean
    constant-gain ablation."""
    from .lowlevel import morphology_gains

    ref = replace(
        config,
        constant_gain=False,
        pd_mode=False,
        episode_seconds=min(sample_seconds, config.episode_seconds),
        log_dir=None,
    )
    model = config.model
    mask = list(model.posture_mask)
    gains_seen = []
    pcfg = replace(ref.planner, seed=ref.seed)
    planner = Planner(model, ref.task, pcfg, ref.gains, dt=ref.dt, substeps=ref.substeps)
    state = _apply_initial(model, ref)
    planner.reset(state)
    dt_ctrl = ref.dt * ref.substeps
    n_ctrl = max(1, round(ref.episode_seconds / dt_ctrl))
    z_latest = extract_posture(model, state)
    for k in range(n_ctrl):
        failed = ref.perturbation.failed_mask(model.d_u, state.time)
        if k % ref.plan_interval == 0:
            z_latest = planner.plan(state, failed).z_star
        kin = point_kinematics(model, state.q[None, :], state.qdot[None, :])
        lengths, j_m, ldot = muscle_geometry_arrays(model, kin, state.qdot[None, :])
        g = morphology_gains(j_m[:, :, mask], z_latest.z[None, :], state.q[None, mask], ref.gains)
        gains_seen.append(float(g.mean()))
        u_b, _ = controls_from_geometry(
            model, state.q[None, :], state.act[None, :], lengths, j_m, ldot,
            z_latest.z[None, :], ref.gains, dt_ctrl, failed,
        )
        q, qdot, a_new, t_new, bad = step_batch(
            model, state.q[None, :], state.qdot[None, :], state.act[None, :],
            np.array([state.time]), u_b, ref.dt, ref.perturbation, failed,
        )
        for _ in range(1, ref.substeps):
            if bad[0]:
                break
            q, qdot, a_new, t_new, bad = step_batch(
                model, q, qdot, a_new, t_new, u_b, ref.dt, ref.perturbation, failed
            )
        if bad[0]:
            break
        state = SimState(q[0], qdot[0], a_new[0], float(t_new[0]))
    planner.close()
    return float(np.mean(gains_seen)) if gains_seen else config.gains.k_min


def _write_logs(config: ScenarioConfig, seed: int, result: EpisodeResult) -> EpisodeResult:
    log_dir = Path(config.log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{config.name}_seed{seed}"
    csv_path = log_dir / f"{stem}.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=result.columns, restval=0.0, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(result.rows)
    metrics_path = log_dir / f"{stem}.json"
    metrics_path.write_text(json.dumps(result.metrics.to_dict(), indent=2))
    result.csv_path = str(csv_path)
    result.metrics_path = str(metrics_path)
    return result


# --- configuration loading ------------------------------------------------


def _load_model_ref(ref: str, base: Path) -> ModelSpec:
    p = Path(ref)
    if not p.suffix:
        return load_bundled_model(ref)
    if not p.is_absolute():
        p = base / p
    return load_model_file(p)


def _load_task_ref(ref: str, base: Path) -> CostSpec:
    p = Path(ref)
    if not p.suffix:
        return costs_mod.load_bundled_task(ref)
    if not p.is_absolute():
        p = base / p
    return costs_mod.load_task_file(p)


def parse_perturbation(doc, model: ModelSpec) -> Perturbation:
    if not doc:
        return NO_PERTURBATION
    wrenches = []
    for w in doc.get("wrenches", []):
        wrenches.append(
            WrenchEvent(
                start=float(w["start"]),
                duration=float(w["duration"]),
                link=model.link_index(str(w["link"])),
                force=tuple(float(v) for v in w.get("force", (0.0, 0.0))),
                torque=float(w.get("torque", 0.0)),
            )
        )
    failures = []
    for f in doc.get("failures", []):
        muscles = tuple(model.muscle_index(str(nm)) for nm in f["muscles"])
        failures.append(FailureEvent(time=float(f["time"]), muscles=muscles))
    return Perturbation(wrenches=tuple(wrenches), failures=tuple(failures))


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"scenario file {path} does not exist")
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"scenario parse error: {exc}") from exc
    return scenario_from_dict(doc, base=path.parent, name=path.stem)


def scenario_from_dict(doc: dict, base: Path = Path("."), name: str = "scenario") -> ScenarioConfig:
    try:
        model = _load_model_ref(str(doc["model"]), base)
        task = _load_task_ref(str(doc["task"]), base)
    except KeyError as exc:
        raise ConfigError(f"scenario: missing field {exc.args[0]!r}") from exc
    except (ModelError, costs_mod.CostError) as exc:
        raise ConfigError(str(exc)) from exc
    if "terrain" in doc:
        model = model.with_terrain(parse_terrain(doc["terrain"]))
    pdoc = doc.get("planner", {})
    planner = PlannerConfig(
        n_rollouts=int(pdoc.get("n_rollouts", 64)),
        n_instant=int(pdoc.get("n_instant", 10)),
        horizon=float(pdoc.get("horizon", 0.3)),
        iterations=int(pdoc.get("iterations", 1)),
        lam=pdoc.get("lam"),
        lam_factor=float(pdoc.get("lam_factor", 0.1)),
        n_elites=int(pdoc.get("n_elites", 16)),
        sigma_init=float(pdoc.get("sigma_init", 0.15)),
        sigma_floor=float(pdoc.get("sigma_floor", 0.03)),
        workers=int(pdoc.get("workers", 0)),
    )
    gdoc = doc.get("gains", {})
    gains = GainConfig(
        k_bar=float(gdoc.get("k_bar", 2.0e6)),
        k_min=float(gdoc.get("k_min", 1.0)),
        mode=str(gdoc.get("mode", "morphology")),
        constant_gain=gdoc.get("constant_gain"),
        pd_damping_ratio=float(gdoc.get("pd_damping_ratio", 0.1)),
        abs_of_sum=bool(gdoc.get("abs_of_sum", False)),
    )
    true_task = None
    if "true_task" in doc:
        true_task = _load_task_ref(str(doc["true_task"]), base)
    return ScenarioConfig(
        name=str(doc.get("name", name)),
        model=model,
        task=task,
        true_task=true_task,
        episode_seconds=float(doc.get("episode_seconds", 10.0)),
        dt=float(doc.get("dt", DEFAULT_DT)),
        substeps=int(doc.get("substeps", DEFAULT_SUBSTEPS)),
        plan_interval=int(doc.get("plan_interval", 5)),
        realtime_fraction=float(doc.get("realtime_fraction", 0.0)),
        plan_budget=doc.get("plan_budget"),
        planner=planner,
        gains=gains,
        perturbation=parse_perturbation(doc.get("perturbation"), model),
        seed=int(doc.get("seed", 0)),
        no_instant=bool(doc.get("no_instant", False)),
        constant_gain=bool(doc.get("constant_gain", False)),
        pd_mode=bool(doc.get("pd_mode", False)),
        vanilla_mppi=bool(doc.get("vanilla_mppi", False)),
        initial_lean=float(doc.get("initial_lean", 0.0)),
        initial_q=doc.get("initial_q", {}) or {},
        log_dir=doc.get("log_dir"),
        log_activations=bool(doc.get("log_activations", False)),
    )


def bundled_scenario_path(name: str) -> Path:
    return Path(__file__).parent / "assets" / "scenarios" / f"{name}.yaml"


def load_bundled_scenario(name: str) -> ScenarioConfig:
    path = bundled_scenario_path(name)
    if not path.exists():
        raise ConfigError(f"no bundled scenario named {name!r}")
    return load_scenario(path)


# --- suites -----------------------------------------------------------------


def _suite_episode(args):
    scenario_path, overrides, seed = args
    config = load_scenario(scenario_path) if isinstance(scenario_path, (str, Path)) else scenario_path
    for key, value in (overrides or {}).items():
        config = replace(config, **{key: value})
    result = run_episode(config, seed=seed)
    return config.name, seed, result.metrics.to_dict()


def run_suite(manifest: dict | str | Path, max_workers: int = 1) -> dict:
    """Run scenarios x seeds and aggregate mean +/- standard error per metric.

    The manifest maps scenario refs to seed lists:
      scenarios: [{scenario: path-or-name, seeds: [..], overrides: {...}}, ...]
    """
    if isinstance(manifest, (str, Path)):
        mpath = Path(manifest)
        if not mpath.exists():
            raise ConfigError(f"manifest {mpath} does not exist")
        doc = yaml.safe_load(mpath.read_text())
        base = mpath.parent
    else:
        doc = manifest
        base = Path(".")
    entries = doc.get("scenarios")
    if not entries:
        raise ConfigError("manifest needs a non-empty 'scenarios' list")

    jobs = []
    for entry in entries:
        ref = entry["scenario"]
        p = Path(str(ref))
        if p.suffix:
            scen = p if p.is_absolute() else base / p
            if not scen.exists():
                raise ConfigError(f"scenario file {scen} does not exist")
        else:
            scen = bundled_scenario_path(str(ref))
            if not scen.exists():
                raise ConfigError(f"no bundled scenario named {ref!r}")
        load_scenario(scen)  # validate before running anything
        seeds = entry.get("seeds", [0])
        for seed in seeds:
            jobs.append((scen, entry.get("overrides"), int(seed)))

    if max_workers > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as ex:
            outcomes = list(ex.map(_suite_episode, jobs))
    else:
        outcomes = [_suite_episode(j) for j in jobs]

    by_scenario: dict[str, list[dict]] = {}
    per_episode = []
    for sname, seed, mdict in outcomes:
        by_scenario.setdefault(sname, []).append(mdict)
        per_episode.append({"scenario": sname, "seed": seed, **mdict})

    summary = {}
    for sname, mds in by_scenario.items():
        agg = {}
        for key in mds[0]:
            vals = np.array([float(md[key]) for md in mds])
            agg[key] = {
                "mean": float(vals.mean()),
                "stderr": float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0,
                "n": len(vals),
            }
        summary[sname] = agg
    out = {"episodes": per_episode, "summary": summary}
    if isinstance(doc.get("output"), str):
        Path(doc["output"]).write_text(json.dumps(out, indent=2))
    return out


# --- planner benchmark -------------------------------------------------------


def bench_planner(config: ScenarioConfig, worker_counts=(1,), n_plans: int = 10) -> list[dict]:
    """Latency of plan() from a representative mid-episode state.

    Returns one report row per worker count with identical-output checksums so
    callers can assert bit-equality across counts.
    """
    model = config.model
    state = _apply_initial(model, config)
    # settle into a representative state: a few lockstep control steps
    warm = replace(config, episode_seconds=0.2, log_dir=None)
    res = run_episode(warm, seed=config.seed)
    if res.rows:
        last = res.rows[-1]
        q = np.array([last[f"q{i}"] for i in range(model.d_q)])
        qd = np.array([last[f"qd{i}"] for i in range(model.d_q)])
        state = SimState(q, qd, state.act.copy(), 0.0)

    reports = []
    for workers in worker_counts:
        pcfg = replace(config.planner, seed=config.seed, workers=int(workers))
        planner = Planner(model, config.task, pcfg, config.gains, dt=config.dt, substeps=config.substeps)
        planner.reset(state)
        times = []
        first = None
        for i in range(n_plans):
            planner.reset(state)
            t0 = _time.perf_counter()
            out = planner.plan(state)
            times.append(_time.perf_counter() - t0)
            if first is None:
                first = out
        planner.close()
        mean = float(np.mean(times))
        reports.append(
            {
                "workers": int(workers),
                "mean_latency": mean,
                "p95_latency": float(np.percentile(times, 95)),
                "rollout_throughput": pcfg.n_rollouts / mean,
                "realtime_factor": pcfg.horizon / mean,
                "u": first.u,
                "z_star": first.z_star.z,
            }
        )
    return reports

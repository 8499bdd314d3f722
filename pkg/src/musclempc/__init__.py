"""Hierarchical sampling-based MPC for planar muscle-driven articulated systems."""

from .costs import CostSpec, evaluate, load_bundled_task, load_task, load_task_file, theta_get, theta_set
from .dynamics import (
    Perturbation,
    SimState,
    SimulationDiverged,
    compute_dynamics_terms,
    forward_step,
    frame_kinematics,
    initial_state,
    muscle_geometry,
)
from .harness import (
    EpisodeMetrics,
    ScenarioConfig,
    bench_planner,
    load_bundled_scenario,
    load_scenario,
    run_episode,
    run_suite,
)
from .lowlevel import GainConfig, TargetPosture, act, control_inversion, extract_posture
from .model import ModelError, ModelSpec, load_bundled_model, load_model, load_model_file
from .muscle import activation_step, muscle_force
from .planner import (
    Planner,
    PlannerConfig,
    RolloutOutcome,
    SamplingDistribution,
    plan,
    rollout,
    sample_candidates,
    update_distribution,
)

__version__ = "0.1.0"

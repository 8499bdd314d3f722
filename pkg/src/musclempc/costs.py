"""Composable task costs: weighted sums of named non-negative terms.

Terms are evaluated from a cached kinematics context so rollouts pay one
kinematics pass per control step. All terms are linear in their weights,
which is what makes the weight vector tunable by the black-box optimizer.
3D-only terms from the humanoid setting (sideways velocity, facing, feet
cross) have no planar counterpart and are deliberately absent.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import yaml

from .dynamics import SimState
from .kinematics import PointKinematics, com_state, point_kinematics
from .model import ModelSpec

TERM_KINDS = (
    "height",
    "upright",
    "balance",
    "forward_velocity",
    "joint_velocity",
    "joint_position",
    "clearance",
)

FOOT_FRAMES = ("foot_left", "foot_right")


class CostError(ValueError):
    pass


@dataclass(frozen=True)
class CostTerm:
    kind: str
    weight: float
    params: tuple[tuple[str, float], ...] = ()

    def param(self, name: str, default=None):
        for k, v in self.params:
            if k == name:
                return v
        if default is None:
            raise CostError(f"term {self.kind!r}: missing parameter {name!r}")
        return default


@dataclass(frozen=True)
class CostSpec:
    name: str
    terms: tuple[CostTerm, ...]

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(t.kind for t in self.terms)


@dataclass
class CostContext:
    """Cached frame kinematics for a batch of states plus the applied control."""

    q: np.ndarray            # (B, d_q)
    qdot: np.ndarray
    u: np.ndarray
    head: np.ndarray | None          # (B,) complex positions
    pelvis_up: np.ndarray | None     # (B,) complex unit-ish up vectors
    head_up: np.ndarray | None
    feet: np.ndarray | None          # (B, n_feet) complex
    feet_up: np.ndarray | None
    com: np.ndarray = None           # (B,) complex
    vcom: np.ndarray = None


def make_term(kind: str, weight: float, **params) -> CostTerm:
    if kind not in TERM_KINDS:
        raise CostError(f"unknown cost term kind {kind!r}")
    if not (np.isfinite(weight) and weight >= 0):
        raise CostError(f"term {kind!r}: weight must be finite and >= 0")
    return CostTerm(kind=kind, weight=float(weight), params=tuple(sorted(params.items())))


def build_context(
    model: ModelSpec, kin: PointKinematics, q, qdot, u
) -> CostContext:
    t = model.tables
    fi = t.frame_index
    base = t.sl_frame.start

    def frame_pos(name):
        return kin.pos[:, base + fi[name]] if name in fi else None

    def frame_up(name):
        if name not in fi:
            return None
        i = fi[name]
        return kin.rot[:, model.frames[i].link] * t.frame_up[i]

    feet = [frame_pos(n) for n in FOOT_FRAMES if n in fi]
    feet_up = [frame_up(n) for n in FOOT_FRAMES if n in fi]
    com, vcom = com_state(model, kin)
    return CostContext(
        q=q,
        qdot=qdot,
        u=u,
        head=frame_pos("head"),
        pelvis_up=frame_up("pelvis"),
        head_up=frame_up("head"),
        feet=np.stack(feet, axis=1) if feet else None,
        feet_up=np.stack(feet_up, axis=1) if feet_up else None,
        com=com,
        vcom=vcom,
    )


def context_for_state(model: ModelSpec, state: SimState, u) -> CostContext:
    kin = point_kinematics(model, state.q[None, :], state.qdot[None, :])
    return build_context(
        model, kin, state.q[None, :], state.qdot[None, :], np.asarray(u)[None, :]
    )


def _require(value, term: str, what: str):
    if value is None:
        raise CostError(f"term {term!r} needs frame(s) {what} which the model lacks")
    return value


def _term_value(term: CostTerm, model: ModelSpec, ctx: CostContext) -> np.ndarray:
    kind = term.kind
    if kind == "height":
        head = _require(ctx.head, kind, "head")
        feet = _require(ctx.feet, kind, "foot_left/foot_right")
        return np.abs(head.imag - feet.imag.mean(axis=1) - term.param("target"))
    if kind == "upright":
        pelvis_up = _require(ctx.pelvis_up, kind, "pelvis")
        head_up = _require(ctx.head_up, kind, "head")
        total = (1.0 - pelvis_up.imag) + (1.0 - head_up.imag)
        if ctx.feet_up is not None:
            total = total + 0.1 * (1.0 - ctx.feet_up.imag).sum(axis=1)
        return np.abs(total)
    if kind == "balance":
        feet = _require(ctx.feet, kind, "foot_left/foot_right")
        return np.abs(ctx.com.real - feet.real.mean(axis=1))
    if kind == "forward_velocity":
        return np.abs(ctx.vcom.real - term.param("target"))
    if kind == "joint_velocity":
        return np.linalg.norm(ctx.qdot, axis=1)
    if kind == "joint_position":
        return np.linalg.norm(ctx.q[:, list(model.posture_mask)], axis=1)
    if kind == "clearance":
        feet = _require(ctx.feet, kind, "foot_left/foot_right")
        idx = np.argmax(feet.real, axis=1)  # forward foot
        y_forward = np.take_along_axis(feet.imag, idx[:, None], axis=1)[:, 0]
        return np.abs(np.minimum(y_forward - term.param("height"), 0.0))
    raise CostError(f"unknown cost term kind {kind!r}")


def term_values(spec: CostSpec, model: ModelSpec, ctx: CostContext) -> np.ndarray:
    """Unweighted term values, (B, n_terms); shared by rollouts and logging."""
    if not spec.terms:
        return np.zeros((ctx.q.shape[0], 0))
    return np.stack([_term_value(t, model, ctx) for t in spec.terms], axis=1)


def evaluate_batch(spec: CostSpec, model: ModelSpec, ctx: CostContext) -> np.ndarray:
    if not spec.terms:
        return np.zeros(ctx.q.shape[0])
    return term_values(spec, model, ctx) @ theta_get(spec)


def evaluate(spec: CostSpec, model: ModelSpec, state: SimState, u) -> float:
    """Weighted cost of one state/control pair."""
    return float(evaluate_batch(spec, model, context_for_state(model, state, u))[0])


def theta_get(spec: CostSpec) -> np.ndarray:
    return np.array([t.weight for t in spec.terms])


def theta_set(spec: CostSpec, theta) -> CostSpec:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (len(spec.terms),):
        raise CostError(
            f"theta has dimension {theta.shape}, spec has {len(spec.terms)} terms"
        )
    if not np.all(np.isfinite(theta)) or np.any(theta < 0):
        raise CostError("theta entries must be finite and >= 0")
    return replace(
        spec, terms=tuple(replace(t, weight=float(w)) for t, w in zip(spec.terms, theta))
    )


def validate_for_model(spec: CostSpec, model: ModelSpec) -> None:
    """Fail fast when a configured term needs frames the model does not have."""
    fi = model.tables.frame_index
    needs_feet = {"height", "balance", "clearance"}
    for term in spec.terms:
        if term.kind in needs_feet and not any(n in fi for n in FOOT_FRAMES):
            raise CostError(f"term {term.kind!r} needs foot frames; model has none")
        if term.kind in ("height", "upright") and "head" not in fi:
            raise CostError(f"term {term.kind!r} needs a head frame; model has none")
        if term.kind == "upright" and "pelvis" not in fi:
            raise CostError("term 'upright' needs a pelvis frame; model has none")


def load_task(text: str, name: str = "task") -> CostSpec:
    try:
        doc = yaml.safe_load(io.StringIO(text))
    except yaml.YAMLError as exc:
        raise CostError(f"task document parse error: {exc}") from exc
    if not isinstance(doc, dict) or "terms" not in doc:
        raise CostError("task document must be a mapping with a 'terms' list")
    terms = []
    for i, entry in enumerate(doc["terms"]):
        entry = dict(entry)
        try:
            kind = entry.pop("kind")
            weight = entry.pop("weight")
        except KeyError as exc:
            raise CostError(f"terms[{i}]: missing field {exc.args[0]!r}") from exc
        terms.append(make_term(kind, float(weight), **{k: float(v) for k, v in entry.items()}))
    return CostSpec(name=str(doc.get("name", name)), terms=tuple(terms))


def load_task_file(path: str | Path) -> CostSpec:
    path = Path(path)
    return load_task(path.read_text(), name=path.stem)


def bundled_task_path(name: str) -> Path:
    return Path(__file__).parent / "assets" / "tasks" / f"{name}.yaml"


def load_bundled_task(name: str) -> CostSpec:
    path = bundled_task_path(name)
    if not path.exists():
        raise CostError(f"no bundled task named {name!r}")
    return load_task_file(path)


def save_task(spec: CostSpec, path: str | Path) -> None:
    doc = {
        "name": spec.name,
        "terms": [
            {"kind": t.kind, "weight": t.weight, **dict(t.params)} for t in spec.terms
        ],
    }
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))

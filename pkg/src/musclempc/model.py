"""Model description: planar muscle-driven articulated systems.

A model is a tree of planar rigid links connected by revolute joints (plus an
optional 3-DOF free base at the root), actuated by tension-only muscles routed
as polylines through link-attached via points. Models are loaded from a YAML
document and are immutable after load; the loader also precomputes the flat
index tables the dynamics engine needs (DOF layout, ancestor masks, muscle
segment indexing).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

FORMAT_VERSION = 1

# DOF kinds in the flattened q layout.
DOF_PX = 0   # prismatic along world x (free base)
DOF_PY = 1   # prismatic along world y (free base)
DOF_REV = 2  # revolute about world z

RESERVED_FRAMES = ("head", "pelvis", "foot_left", "foot_right")


class ModelError(ValueError):
    """Raised for parse or validation failures, naming the offending field."""


@dataclass(frozen=True)
class LinkSpec:
    name: str
    mass: float
    inertia: float
    length: float
    com: tuple[float, float]


@dataclass(frozen=True)
class JointSpec:
    name: str
    parent: int              # parent link index, -1 for world
    kind: str                # "revolute" | "free"
    anchor: tuple[float, float]   # attachment point in parent local coords
    axis_sign: float
    rest_offset: float       # child frame angle relative to parent at q = 0
    limits: tuple[tuple[float, float], ...]  # (lo, hi) per DOF
    damping: tuple[float, ...]               # viscous, per DOF


@dataclass(frozen=True)
class MuscleSpec:
    name: str
    via_points: tuple[tuple[int, tuple[float, float]], ...]  # (link index, local xy); -1 = world
    f_max: float
    l_opt: float
    v_max: float
    tau_act: float = 0.010
    tau_deact: float = 0.040

    @property
    def tau1(self) -> float:
        return self.tau_act - self.tau_deact

    @property
    def tau2(self) -> float:
        return self.tau_deact


@dataclass(frozen=True)
class FrameSpec:
    name: str
    link: int
    point: tuple[float, float]
    up: tuple[float, float] = (0.0, 1.0)  # local direction reported as the frame's up vector


@dataclass(frozen=True)
class TerrainSpec:
    """Piecewise-linear height profile h(x); flat extension beyond the samples."""

    xs: tuple[float, ...] = (0.0,)
    hs: tuple[float, ...] = (0.0,)

    def height(self, x):
        x = np.asarray(x, dtype=np.float64)
        if len(self.xs) == 1:
            return np.full_like(x, self.hs[0])
        return np.interp(x, self.xs, self.hs)

    def slope(self, x):
        x = np.asarray(x, dtype=np.float64)
        if len(self.xs) == 1:
            return np.zeros_like(x)
        xs = np.asarray(self.xs)
        hs = np.asarray(self.hs)
        idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(xs) - 2)
        return (hs[idx + 1] - hs[idx]) / (xs[idx + 1] - xs[idx])

    @property
    def is_flat(self) -> bool:
        return len(set(self.hs)) == 1


@dataclass(frozen=True)
class ModelTables:
    """Flat arrays derived from the spec, consumed by the dynamics engine.

    Point batch layout (single kinematics pass computes all of them):
    [link origins | link COMs | muscle via points | named frames | contact frames]
    """

    n_links: int
    d_q: int
    d_u: int
    # per-link
    link_parent: np.ndarray        # (n_links,) int, -1 = world
    link_anchor: np.ndarray        # (n_links,) complex, anchor in parent local
    link_rest_offset: np.ndarray   # (n_links,) float
    link_qoff: np.ndarray          # (n_links,) int, first q index of the link's joint
    link_free: np.ndarray          # (n_links,) bool
    link_mass: np.ndarray
    link_inertia: np.ndarray
    # per-dof
    dof_kind: np.ndarray           # (d_q,) int in {DOF_PX, DOF_PY, DOF_REV}
    dof_link: np.ndarray           # (d_q,) int, child link of the dof's joint
    dof_sign: np.ndarray
    dof_damping: np.ndarray
    q_lo: np.ndarray
    q_hi: np.ndarray
    # jacobian helpers (the *_pt variants carry an all-zero row for world attachments)
    anc: np.ndarray                # (n_links, d_q) bool: dof affects link
    rev_signed: np.ndarray         # (n_links, d_q) float: axis sign where revolute+ancestor
    rev_signed_pt: np.ndarray      # (n_links + 1, d_q)
    rev_signed_j: np.ndarray       # (n_jac, d_q) complex: 1j * rev_signed per jac point
    pris_unit_pt: np.ndarray       # (n_links + 1, d_q) complex
    mass_ang: np.ndarray           # (d_q, d_q) constant angular part of M
    # point batch, ordered [origins | coms | via | contact | frames]
    pt_local: np.ndarray           # (n_pts,) complex local coordinates
    pt_link: np.ndarray            # (n_pts,) int; n_links = the fixed world slot
    n_jac: int                     # jacobians/velocities cover points [0:n_jac)
    sl_origin: slice
    sl_com: slice
    sl_via: slice
    sl_frame: slice
    sl_contact: slice
    # muscles
    seg_a: np.ndarray              # (n_seg,) indices into the via block (0-based within it)
    seg_b: np.ndarray
    seg_to_muscle: np.ndarray      # (d_u, n_seg) 0/1 aggregation matrix
    f_max: np.ndarray              # (d_u,)
    l_opt: np.ndarray
    v_max: np.ndarray
    tau1: np.ndarray
    tau2: np.ndarray
    # frames
    frame_index: dict[str, int]    # name -> offset within the frame block
    frame_up: np.ndarray           # (n_frames,) complex local up
    contact_frame_names: tuple[str, ...]
    total_mass: float
    # posture mask as arrays
    mask_idx: np.ndarray           # (d_z,) q indices of the major joints
    z_lo: np.ndarray
    z_hi: np.ndarray


@dataclass(frozen=True)
class ModelSpec:
    """Validated, immutable description of one articulated muscle-driven system."""

    name: str
    links: tuple[LinkSpec, ...]
    joints: tuple[JointSpec, ...]   # joints[i] attaches links[i] to its parent
    muscles: tuple[MuscleSpec, ...]
    frames: tuple[FrameSpec, ...]
    posture_mask: tuple[int, ...]   # q indices of the major joints
    gravity: float
    terrain: TerrainSpec
    contact_frames: tuple[str, ...]
    rest_q: np.ndarray
    tables: ModelTables = field(repr=False, compare=False, default=None)

    @property
    def d_q(self) -> int:
        return self.tables.d_q

    @property
    def d_u(self) -> int:
        return self.tables.d_u

    @property
    def d_z(self) -> int:
        return len(self.posture_mask)

    def link_index(self, name: str) -> int:
        for i, ln in enumerate(self.links):
            if ln.name == name:
                return i
        raise ModelError(f"unknown link {name!r}")

    def muscle_index(self, name: str) -> int:
        for i, m in enumerate(self.muscles):
            if m.name == name:
                return i
        raise ModelError(f"unknown muscle {name!r}")

    def with_terrain(self, terrain: TerrainSpec) -> "ModelSpec":
        """Copy of this model over a different terrain profile."""
        import dataclasses

        return dataclasses.replace(self, terrain=terrain)


def _as_xy(value, where: str) -> tuple[float, float]:
    try:
        x, y = value
        return (float(x), float(y))
    except (TypeError, ValueError) as exc:
        raise ModelError(f"{where}: expected a 2-element [x, y] pair, got {value!r}") from exc


def _dof_layout(joints: tuple[JointSpec, ...]):
    kinds, links, signs, damping, lo, hi, qoff = [], [], [], [], [], [], []
    for li, jt in enumerate(joints):
        qoff.append(len(kinds))
        if jt.kind == "free":
            for k, dk in enumerate((DOF_PX, DOF_PY, DOF_REV)):
                kinds.append(dk)
                links.append(li)
                signs.append(1.0 if dk != DOF_REV else jt.axis_sign)
                damping.append(jt.damping[k])
                lo.append(jt.limits[k][0])
                hi.append(jt.limits[k][1])
        else:
            kinds.append(DOF_REV)
            links.append(li)
            signs.append(jt.axis_sign)
            damping.append(jt.damping[0])
            lo.append(jt.limits[0][0])
            hi.append(jt.limits[0][1])
    return (
        np.array(kinds, dtype=np.intp),
        np.array(links, dtype=np.intp),
        np.array(signs),
        np.array(damping),
        np.array(lo),
        np.array(hi),
        np.array(qoff, dtype=np.intp),
    )


def _build_tables(
    links, joints, muscles, frames, contact_frames, posture_mask
) -> ModelTables:
    n_links = len(links)
    dof_kind, dof_link, dof_sign, dof_damping, q_lo, q_hi, link_qoff = _dof_layout(joints)
    d_q = len(dof_kind)
    d_u = len(muscles)

    link_parent = np.array([jt.parent for jt in joints], dtype=np.intp)
    link_anchor = np.array([complex(*jt.anchor) for jt in joints])
    link_rest_offset = np.array([jt.rest_offset for jt in joints])
    link_free = np.array([jt.kind == "free" for jt in joints])
    link_mass = np.array([ln.mass for ln in links])
    link_inertia = np.array([ln.inertia for ln in links])

    # ancestor masks: dof d affects link b iff the dof's link is b or an ancestor of b
    anc = np.zeros((n_links, d_q), dtype=bool)
    for b in range(n_links):
        chain = []
        cur = b
        while cur >= 0:
            chain.append(cur)
            cur = int(link_parent[cur])
        for d in range(d_q):
            anc[b, d] = int(dof_link[d]) in chain

    is_rev = dof_kind == DOF_REV
    rev_signed = anc * (dof_sign * is_rev)[None, :]
    pris_axis = np.where(dof_kind == DOF_PX, 1.0 + 0j, 1j)
    pris_unit = anc * (pris_axis * ~is_rev)[None, :]
    pad = np.zeros((1, d_q))
    rev_signed_pt = np.vstack([rev_signed, pad])
    pris_unit_pt = np.vstack([pris_unit, pad.astype(np.complex128)])

    # angular velocity jacobian is configuration-independent in the plane
    jw = rev_signed
    mass_ang = (jw * link_inertia[:, None]).T @ jw

    # point batch; world attachments use the extra identity slot n_links
    pt_local: list[complex] = []
    pt_link: list[int] = []

    def add_points(pairs):
        start = len(pt_local)
        for li, xy in pairs:
            pt_local.append(complex(*xy))
            pt_link.append(li if li >= 0 else n_links)
        return slice(start, len(pt_local))

    sl_origin = add_points((i, (0.0, 0.0)) for i in range(n_links))
    sl_com = add_points((i, links[i].com) for i in range(n_links))
    via_pairs = []
    seg_a, seg_b = [], []
    seg_mus = []
    for mi, mu in enumerate(muscles):
        base = len(via_pairs)
        via_pairs.extend(mu.via_points)
        for k in range(len(mu.via_points) - 1):
            seg_a.append(base + k)
            seg_b.append(base + k + 1)
            seg_mus.append(mi)
    sl_via = add_points(via_pairs)
    frame_index = {fr.name: i for i, fr in enumerate(frames)}
    contact_specs = [frames[frame_index[n]] for n in contact_frames]
    sl_contact = add_points((fr.link, fr.point) for fr in contact_specs)
    n_jac = len(pt_local)
    sl_frame = add_points((fr.link, fr.point) for fr in frames)

    n_seg = len(seg_a)
    seg_to_muscle = np.zeros((d_u, n_seg))
    for s, mi in enumerate(seg_mus):
        seg_to_muscle[mi, s] = 1.0

    pt_link_arr = np.array(pt_link, dtype=np.intp)
    rev_signed_j = 1j * rev_signed_pt[pt_link_arr[:n_jac]]

    return ModelTables(
        n_links=n_links,
        d_q=d_q,
        d_u=d_u,
        link_parent=link_parent,
        link_anchor=link_anchor,
        link_rest_offset=link_rest_offset,
        link_qoff=link_qoff,
        link_free=link_free,
        link_mass=link_mass,
        link_inertia=link_inertia,
        dof_kind=dof_kind,
        dof_link=dof_link,
        dof_sign=dof_sign,
        dof_damping=dof_damping,
        q_lo=q_lo,
        q_hi=q_hi,
        anc=anc,
        rev_signed=rev_signed,
        rev_signed_pt=rev_signed_pt,
        rev_signed_j=rev_signed_j,
        pris_unit_pt=pris_unit_pt,
        mass_ang=mass_ang,
        pt_local=np.array(pt_local, dtype=np.complex128),
        pt_link=pt_link_arr,
        n_jac=n_jac,
        sl_origin=sl_origin,
        sl_com=sl_com,
        sl_via=sl_via,
        sl_frame=sl_frame,
        sl_contact=sl_contact,
        seg_a=np.array(seg_a, dtype=np.intp),
        seg_b=np.array(seg_b, dtype=np.intp),
        seg_to_muscle=seg_to_muscle,
        f_max=np.array([m.f_max for m in muscles]),
        l_opt=np.array([m.l_opt for m in muscles]),
        v_max=np.array([m.v_max for m in muscles]),
        tau1=np.array([m.tau1 for m in muscles]),
        tau2=np.array([m.tau2 for m in muscles]),
        frame_index=frame_index,
        frame_up=np.array([complex(*fr.up) for fr in frames], dtype=np.complex128),
        contact_frame_names=tuple(contact_frames),
        total_mass=float(link_mass.sum()),
        mask_idx=np.array(posture_mask, dtype=np.intp),
        z_lo=q_lo[list(posture_mask)],
        z_hi=q_hi[list(posture_mask)],
    )


def _validate(links, joints, muscles, frames, posture_mask, contact_frames, d_q):
    roots = [i for i, jt in enumerate(joints) if jt.parent == -1]
    if len(roots) != 1:
        raise ModelError(f"joint tree must have exactly one root, found {len(roots)}")
    for i, jt in enumerate(joints):
        if jt.parent >= i:
            raise ModelError(
                f"link {links[i].name!r}: parent must appear earlier in the link list"
            )
        if jt.kind == "free" and jt.parent != -1:
            raise ModelError(f"link {links[i].name!r}: free joint only allowed at the root")
        for lo, hi in jt.limits:
            if not lo < hi:
                raise ModelError(f"joint {jt.name!r}: limit lower bound must be < upper")
    for ln in links:
        for fname in ("mass", "inertia", "length"):
            if not getattr(ln, fname) > 0:
                raise ModelError(f"link {ln.name!r}: {fname} must be strictly positive")
    names = [ln.name for ln in links]
    if len(set(names)) != len(names):
        raise ModelError("duplicate link names")
    for mu in muscles:
        if len(mu.via_points) < 2:
            raise ModelError(f"muscle {mu.name!r}: needs at least 2 via points")
        if all(li < 0 for li, _ in mu.via_points):
            raise ModelError(f"muscle {mu.name!r}: path must touch at least one link")
        for li, _ in mu.via_points:
            if not -1 <= li < len(links):
                raise ModelError(f"muscle {mu.name!r}: via point references missing link")
        for fname in ("f_max", "l_opt", "v_max"):
            if not getattr(mu, fname) > 0:
                raise ModelError(f"muscle {mu.name!r}: {fname} must be strictly positive")
        if not mu.tau2 > 0:
            raise ModelError(f"muscle {mu.name!r}: deactivation time constant must be > 0")
    fnames = [fr.name for fr in frames]
    if len(set(fnames)) != len(fnames):
        raise ModelError("duplicate frame names")
    if "com" in fnames:
        raise ModelError("frame name 'com' is reserved for the computed center of mass")
    for cn in contact_frames:
        if cn not in fnames:
            raise ModelError(f"contact frame {cn!r} is not a defined frame")
    if len(set(posture_mask)) != len(posture_mask):
        raise ModelError("posture_mask entries must be distinct")
    for qi in posture_mask:
        if not 0 <= qi < d_q:
            raise ModelError(f"posture_mask index {qi} out of range for d_q={d_q}")


def load_model(text: str, name: str = "model") -> ModelSpec:
    """Parse and validate a model document; returns the immutable ModelSpec.

    Raises ModelError with the offending field (YAML syntax errors keep their
    line/column information).
    """
    try:
        doc = yaml.safe_load(io.StringIO(text))
    except yaml.YAMLError as exc:
        raise ModelError(f"model document parse error: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelError("model document must be a mapping")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelError(f"format_version: expected {FORMAT_VERSION}, got {version!r}")

    name = str(doc.get("name", name))
    gravity = float(doc.get("gravity", 9.81))

    raw_links = doc.get("links")
    if not raw_links:
        raise ModelError("links: at least one link is required")

    links: list[LinkSpec] = []
    joints: list[JointSpec] = []
    link_ids: dict[str, int] = {}
    for i, entry in enumerate(raw_links):
        where = f"links[{i}]"
        try:
            lname = str(entry["name"])
            link = LinkSpec(
                name=lname,
                mass=float(entry["mass"]),
                inertia=float(entry["inertia"]),
                length=float(entry["length"]),
                com=_as_xy(entry.get("com", (entry["length"] / 2.0, 0.0)), f"{where}.com"),
            )
            raw_j = entry["joint"]
            parent_name = raw_j.get("parent", "world")
            parent = -1 if parent_name == "world" else link_ids.get(parent_name)
            if parent is None:
                raise ModelError(f"{where}.joint.parent: unknown link {parent_name!r}")
            kind = str(raw_j.get("type", "revolute"))
            if kind not in ("revolute", "free"):
                raise ModelError(f"{where}.joint.type: must be 'revolute' or 'free'")
            if kind == "free":
                lims = raw_j.get("limits")
                if lims is None:
                    lims = [[-1e9, 1e9]] * 3
                limits = tuple((float(lo), float(hi)) for lo, hi in lims)
                if len(limits) != 3:
                    raise ModelError(f"{where}.joint.limits: free joint needs 3 pairs")
                damping = raw_j.get("damping", [0.0, 0.0, 0.0])
                damping = tuple(float(v) for v in damping)
                if len(damping) != 3:
                    raise ModelError(f"{where}.joint.damping: free joint needs 3 values")
            else:
                lo, hi = raw_j.get("limits", (-math.pi, math.pi))
                limits = ((float(lo), float(hi)),)
                damping = (float(raw_j.get("damping", 0.0)),)
            joint = JointSpec(
                name=lname,
                parent=parent,
                kind=kind,
                anchor=_as_xy(raw_j.get("anchor", (0.0, 0.0)), f"{where}.joint.anchor"),
                axis_sign=float(raw_j.get("axis_sign", 1.0)),
                rest_offset=float(raw_j.get("rest_offset", 0.0)),
                limits=limits,
                damping=damping,
            )
        except KeyError as exc:
            raise ModelError(f"{where}: missing field {exc.args[0]!r}") from exc
        link_ids[lname] = i
        links.append(link)
        joints.append(joint)

    frames: list[FrameSpec] = []
    for i, entry in enumerate(doc.get("frames", [])):
        where = f"frames[{i}]"
        try:
            li = link_ids.get(str(entry["link"]))
            if li is None:
                raise ModelError(f"{where}.link: unknown link {entry['link']!r}")
            frames.append(
                FrameSpec(
                    name=str(entry["name"]),
                    link=li,
                    point=_as_xy(entry["point"], f"{where}.point"),
                    up=_as_xy(entry.get("up", (0.0, 1.0)), f"{where}.up"),
                )
            )
        except KeyError as exc:
            raise ModelError(f"{where}: missing field {exc.args[0]!r}") from exc

    muscles: list[MuscleSpec] = []
    auto_lopt: list[int] = []
    for i, entry in enumerate(doc.get("muscles", [])):
        where = f"muscles[{i}]"
        try:
            path = []
            for j, vp in enumerate(entry["path"]):
                lname = str(vp["link"])
                li = -1 if lname == "world" else link_ids.get(lname)
                if li is None:
                    raise ModelError(
                        f"{where}.path[{j}].link: unknown link {vp['link']!r}"
                    )
                path.append((li, _as_xy(vp["point"], f"{where}.path[{j}].point")))
            l_opt_raw = entry.get("l_opt", "auto")
            if l_opt_raw == "auto":
                auto_lopt.append(i)
                l_opt = 1.0  # placeholder, resolved at rest posture below
            else:
                l_opt = float(l_opt_raw)
            muscles.append(
                MuscleSpec(
                    name=str(entry["name"]),
                    via_points=tuple(path),
                    f_max=float(entry["f_max"]),
                    l_opt=l_opt,
                    v_max=float(entry["v_max"]),
                    tau_act=float(entry.get("tau_act", 0.010)),
                    tau_deact=float(entry.get("tau_deact", 0.040)),
                )
            )
        except KeyError as exc:
            raise ModelError(f"{where}: missing field {exc.args[0]!r}") from exc

    # posture mask: joint names (revolute) or raw q indices
    kinds, _, _, _, _, _, qoff = _dof_layout(tuple(joints))
    d_q = len(kinds)
    mask_entries = doc.get("posture_mask", [])
    posture_mask = []
    for entry in mask_entries:
        if isinstance(entry, int):
            posture_mask.append(entry)
        else:
            li = link_ids.get(str(entry))
            if li is None:
                raise ModelError(f"posture_mask: unknown joint {entry!r}")
            if joints[li].kind == "free":
                raise ModelError(f"posture_mask: free joint {entry!r} cannot be a target")
            posture_mask.append(int(qoff[li]))

    contact_frames = tuple(str(n) for n in doc.get("contact_frames", []))

    _validate(links, joints, muscles, frames, posture_mask, contact_frames, d_q)

    rest_q = np.zeros(d_q)
    for jname, val in (doc.get("rest_q") or {}).items():
        li = link_ids.get(str(jname))
        if li is None:
            raise ModelError(f"rest_q: unknown joint {jname!r}")
        vals = np.atleast_1d(np.asarray(val, dtype=np.float64))
        ndof = 3 if joints[li].kind == "free" else 1
        if vals.shape != (ndof,):
            raise ModelError(f"rest_q[{jname}]: expected {ndof} value(s)")
        rest_q[qoff[li]: qoff[li] + ndof] = vals

    terrain = parse_terrain(doc.get("terrain"))

    tables = _build_tables(
        tuple(links), tuple(joints), tuple(muscles), tuple(frames), contact_frames,
        tuple(posture_mask),
    )
    spec = ModelSpec(
        name=name,
        links=tuple(links),
        joints=tuple(joints),
        muscles=tuple(muscles),
        frames=tuple(frames),
        posture_mask=tuple(posture_mask),
        gravity=gravity,
        terrain=terrain,
        contact_frames=contact_frames,
        rest_q=rest_q,
        tables=tables,
    )

    if auto_lopt:
        spec = _resolve_auto_lopt(spec, auto_lopt)
    return spec


def _resolve_auto_lopt(spec: ModelSpec, indices: list[int]) -> ModelSpec:
    """Set l_opt of the flagged muscles to their path length at the rest posture."""
    import dataclasses

    from .kinematics import muscle_lengths_at

    lengths = muscle_lengths_at(spec, spec.rest_q)
    muscles = list(spec.muscles)
    for i in indices:
        muscles[i] = dataclasses.replace(muscles[i], l_opt=float(lengths[i]))
    tables = _build_tables(
        spec.links, spec.joints, tuple(muscles), spec.frames, spec.contact_frames,
        spec.posture_mask,
    )
    return dataclasses.replace(spec, muscles=tuple(muscles), tables=tables)


def parse_terrain(raw) -> TerrainSpec:
    """Terrain from a document entry: explicit samples or a named preset."""
    if raw is None:
        return TerrainSpec()
    kind = raw.get("kind", "flat")
    if kind == "flat":
        return TerrainSpec(xs=(0.0,), hs=(float(raw.get("height", 0.0)),))
    if kind == "samples":
        xs = tuple(float(v) for v in raw["xs"])
        hs = tuple(float(v) for v in raw["hs"])
        if len(xs) != len(hs) or len(xs) < 2:
            raise ModelError("terrain samples: xs/hs must be equal length >= 2")
        if not all(a < b for a, b in zip(xs, xs[1:])):
            raise ModelError("terrain samples: xs must be strictly increasing")
        return TerrainSpec(xs=xs, hs=hs)
    if kind == "slope":
        # level start, then a constant grade
        x0 = float(raw.get("start", 0.5))
        grade = float(raw["grade"])
        span = float(raw.get("span", 50.0))
        return TerrainSpec(xs=(x0 - span, x0, x0 + span), hs=(0.0, 0.0, grade * span))
    if kind == "rough":
        rng = np.random.default_rng(int(raw.get("seed", 0)))
        step = float(raw.get("step", 0.25))
        amplitude = float(raw.get("amplitude", 0.02))
        start = float(raw.get("start", 0.5))
        count = int(raw.get("count", 80))
        xs = start + step * np.arange(count)
        hs = rng.uniform(-amplitude, amplitude, size=count)
        hs[0] = 0.0
        return TerrainSpec(
            xs=(xs[0] - 100.0,) + tuple(xs) + (xs[-1] + 100.0,),
            hs=(0.0,) + tuple(hs) + (float(hs[-1]),),
        )
    if kind == "step":
        # single rise at x0, e.g. a stair edge for clearance tasks
        x0 = float(raw["at"])
        h = float(raw["height"])
        ramp = float(raw.get("ramp", 0.02))
        return TerrainSpec(xs=(x0 - 100.0, x0, x0 + ramp, x0 + 100.0), hs=(0.0, 0.0, h, h))
    raise ModelError(f"terrain.kind: unknown preset {kind!r}")


def load_model_file(path: str | Path) -> ModelSpec:
    path = Path(path)
    return load_model(path.read_text(), name=path.stem)


def bundled_model_path(name: str) -> Path:
    return Path(__file__).parent / "assets" / "models" / f"{name}.yaml"


def load_bundled_model(name: str) -> ModelSpec:
    path = bundled_model_path(name)
    if not path.exists():
        raise ModelError(f"no bundled model named {name!r}")
    return load_model_file(path)

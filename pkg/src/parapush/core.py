"""Shared domain types, scene handling, and trajectory error metrics.

Units are millimetres, seconds, radians throughout the library; degrees
appear only in reports and CLI output.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence, Union

TAU = math.tau


class InvalidArgumentError(ValueError):
    """An operation received arguments outside its documented domain."""


class SceneValidationError(ValueError):
    """A scene violates one or more invariants; message names each field."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))

    def __reduce__(self):
        return (type(self), (self.violations,))


class SimulationUnstableError(RuntimeError):
    """The fine model produced a non-finite quantity."""

    def __init__(self, substep: int, detail: str = ""):
        self.substep = substep
        self.detail = detail
        msg = f"simulation unstable at substep {substep}"
        super().__init__(msg + (f": {detail}" if detail else ""))

    def __reduce__(self):
        return (type(self), (self.substep, self.detail))


class OptimizationFailedError(RuntimeError):
    """All optimizer rollouts failed; carries per-step diagnostics."""


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi].

    Identity (bitwise) on angles already in range; exact modular
    arithmetic otherwise (IEEE remainder is exact).
    """
    if not math.isfinite(theta):
        raise InvalidArgumentError(f"wrap_angle: non-finite input {theta!r}")
    r = math.remainder(theta, TAU)
    if r <= -math.pi:
        r += TAU
    return r


def _finite2(v, name: str) -> tuple[float, float]:
    x, y = float(v[0]), float(v[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise InvalidArgumentError(f"{name}: non-finite component in {v!r}")
    return (x, y)


def _finite3(v, name: str) -> tuple[float, float, float]:
    x, y, z = float(v[0]), float(v[1]), float(v[2])
    if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
        raise InvalidArgumentError(f"{name}: non-finite component in {v!r}")
    return (x, y, z)


@dataclass(frozen=True)
class State:
    """Full pusher+slider configuration and velocities at one time point.

    slider_pose is (x, y, theta) with theta wrapped to (-pi, pi] on
    construction; slider_vel is (vx, vy, omega).
    """

    pusher_pos: tuple[float, float]
    slider_pose: tuple[float, float, float]
    pusher_vel: tuple[float, float] = (0.0, 0.0)
    slider_vel: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "pusher_pos", _finite2(self.pusher_pos, "pusher_pos"))
        px, py, th = _finite3(self.slider_pose, "slider_pose")
        object.__setattr__(self, "slider_pose", (px, py, wrap_angle(th)))
        object.__setattr__(self, "pusher_vel", _finite2(self.pusher_vel, "pusher_vel"))
        object.__setattr__(self, "slider_vel", _finite3(self.slider_vel, "slider_vel"))

    @property
    def slider_xy(self) -> tuple[float, float]:
        return (self.slider_pose[0], self.slider_pose[1])

    @property
    def slider_theta(self) -> float:
        return self.slider_pose[2]


@dataclass(frozen=True)
class Control:
    """One commanded pusher velocity (mm/s) held for `duration` seconds."""

    vel: tuple[float, float]
    duration: float

    def __post_init__(self):
        object.__setattr__(self, "vel", _finite2(self.vel, "vel"))
        object.__setattr__(self, "duration", float(self.duration))
        if not (math.isfinite(self.duration) and self.duration > 0.0):
            raise InvalidArgumentError(f"control duration must be > 0, got {self.duration!r}")

    @property
    def speed(self) -> float:
        return math.hypot(self.vel[0], self.vel[1])


ControlSequence = tuple[Control, ...]


def make_controls(vels: Iterable[Sequence[float]], duration: float) -> ControlSequence:
    """Build a control sequence with a shared per-step duration."""
    return tuple(Control((v[0], v[1]), duration) for v in vels)


def controls_digest(controls: Sequence[Control]) -> str:
    """Stable short digest identifying a control sequence."""
    h = hashlib.sha256()
    for c in controls:
        h.update(repr((c.vel, c.duration)).encode())
    return h.hexdigest()[:16]


def check_controls(controls: Sequence[Control], max_push_speed: float) -> None:
    """Reject empty sequences, mixed durations, and over-speed commands."""
    if len(controls) == 0:
        raise InvalidArgumentError("control sequence is empty")
    d0 = controls[0].duration
    for i, c in enumerate(controls):
        if c.duration != d0:
            raise InvalidArgumentError(
                f"controls[{i}].duration {c.duration} differs from shared duration {d0}"
            )
        if c.speed > max_push_speed * (1.0 + 1e-12):
            raise InvalidArgumentError(
                f"controls[{i}] speed {c.speed:.6g} exceeds max_push_speed {max_push_speed:.6g}"
            )


@dataclass(frozen=True)
class Box:
    """Rectangle slider footprint given by half extents (mm)."""

    half_extents: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "half_extents", _finite2(self.half_extents, "half_extents"))

    @property
    def circumradius(self) -> float:
        return math.hypot(*self.half_extents)

    @property
    def mean_half_extent(self) -> float:
        return 0.5 * (self.half_extents[0] + self.half_extents[1])

    def inertia(self, mass: float) -> float:
        hx, hy = self.half_extents
        return mass * (hx * hx + hy * hy) / 3.0


@dataclass(frozen=True)
class Disc:
    """Circular slider footprint (mm)."""

    radius: float

    def __post_init__(self):
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def circumradius(self) -> float:
        return self.radius

    @property
    def mean_half_extent(self) -> float:
        return self.radius

    def inertia(self, mass: float) -> float:
        return 0.5 * mass * self.radius * self.radius


Shape = Union[Box, Disc]


@dataclass(frozen=True)
class DiscRegion:
    """A disc-shaped region of the table (obstacle or goal)."""

    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _finite2(self.center, "center"))
        object.__setattr__(self, "radius", float(self.radius))


@dataclass(frozen=True)
class TableBounds:
    """Axis-aligned workspace rectangle (mm)."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def contains(self, p: Sequence[float], margin: float = 0.0) -> bool:
        return (
            self.x_min + margin <= p[0] <= self.x_max - margin
            and self.y_min + margin <= p[1] <= self.y_max - margin
        )


@dataclass(frozen=True)
class SceneSpec:
    """Slider, pusher, table, obstacle, goal, and start configuration."""

    slider_shape: Shape
    slider_mass: float
    pusher_radius: float
    support_friction_mu: float
    contact_friction_mu: float
    table_bounds: TableBounds
    obstacle: DiscRegion
    goal: DiscRegion
    start_state: State
    slider_inertia: float | None = None
    max_push_speed: float = 100.0


@dataclass(frozen=True)
class Trajectory:
    """Sequence of N+1 states plus provenance of the producing model."""

    states: tuple[State, ...]
    model_tag: str
    controls_digest: str

    def __len__(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class ErrorReport:
    """Per-channel-group RMS differences between two trajectories."""

    trans_rms: float  # mm
    rot_rms: float  # degrees
    vel_rms: float  # mm/s
    angvel_rms: float  # deg/s

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.trans_rms, self.rot_rms, self.vel_rms, self.angvel_rms)


def trajectory_error(a: Trajectory, b: Trajectory, include_pusher: bool = False) -> ErrorReport:
    """RMS error per channel group over time points 1..N.

    State 0 is excluded (always shared by construction). Rotation
    differences are wrapped to the shortest signed distance before
    squaring. Pusher channels are excluded unless `include_pusher`.
    """
    if len(a.states) != len(b.states):
        raise InvalidArgumentError(
            f"trajectory length mismatch: {len(a.states)} vs {len(b.states)}"
        )
    n = len(a.states) - 1
    if n <= 0:
        return ErrorReport(0.0, 0.0, 0.0, 0.0)
    ss_trans = ss_rot = ss_vel = ss_angvel = 0.0
    for sa, sb in zip(a.states[1:], b.states[1:]):
        dx = sa.slider_pose[0] - sb.slider_pose[0]
        dy = sa.slider_pose[1] - sb.slider_pose[1]
        ss_trans += dx * dx + dy * dy
        dth = wrap_angle(sa.slider_pose[2] - sb.slider_pose[2])
        ss_rot += dth * dth
        dvx = sa.slider_vel[0] - sb.slider_vel[0]
        dvy = sa.slider_vel[1] - sb.slider_vel[1]
        ss_vel += dvx * dvx + dvy * dvy
        dom = sa.slider_vel[2] - sb.slider_vel[2]
        ss_angvel += dom * dom
        if include_pusher:
            dpx = sa.pusher_pos[0] - sb.pusher_pos[0]
            dpy = sa.pusher_pos[1] - sb.pusher_pos[1]
            ss_trans += dpx * dpx + dpy * dpy
            dpvx = sa.pusher_vel[0] - sb.pusher_vel[0]
            dpvy = sa.pusher_vel[1] - sb.pusher_vel[1]
            ss_vel += dpvx * dpvx + dpvy * dpvy
    deg = 180.0 / math.pi
    return ErrorReport(
        trans_rms=math.sqrt(ss_trans / n),
        rot_rms=math.sqrt(ss_rot / n) * deg,
        vel_rms=math.sqrt(ss_vel / n),
        angvel_rms=math.sqrt(ss_angvel / n) * deg,
    )


def validate_scene(spec: SceneSpec) -> SceneSpec:
    """Check all SceneSpec invariants; fill slider_inertia when absent.

    Returns the spec unchanged when valid (inertia already set), else a
    copy with the uniform-density inertia filled in. Raises
    SceneValidationError naming every violated field.
    """
    bad: list[str] = []

    shape = spec.slider_shape
    if isinstance(shape, Box):
        hx, hy = shape.half_extents
        if not (hx > 0.0 and hy > 0.0):
            bad.append(f"slider_shape.half_extents: must be > 0, got {shape.half_extents}")
    elif isinstance(shape, Disc):
        if not shape.radius > 0.0:
            bad.append(f"slider_shape.radius: must be > 0, got {shape.radius}")
    else:
        bad.append(f"slider_shape: unsupported shape {type(shape).__name__}")

    if not spec.slider_mass > 0.0:
        bad.append(f"slider_mass: must be > 0, got {spec.slider_mass}")
    if spec.slider_inertia is not None and not spec.slider_inertia > 0.0:
        bad.append(f"slider_inertia: must be > 0, got {spec.slider_inertia}")
    if not spec.pusher_radius > 0.0:
        bad.append(f"pusher_radius: must be > 0, got {spec.pusher_radius}")
    if spec.support_friction_mu < 0.0:
        bad.append(f"support_friction_mu: must be >= 0, got {spec.support_friction_mu}")
    if spec.contact_friction_mu < 0.0:
        bad.append(f"contact_friction_mu: must be >= 0, got {spec.contact_friction_mu}")
    if not spec.max_push_speed > 0.0:
        bad.append(f"max_push_speed: must be > 0, got {spec.max_push_speed}")

    tb = spec.table_bounds
    if not (tb.x_min < tb.x_max and tb.y_min < tb.y_max):
        bad.append(f"table_bounds: degenerate rectangle {tb}")
    else:
        if not tb.contains(spec.start_state.slider_xy):
            bad.append(f"start_state.slider_pose: slider {spec.start_state.slider_xy} outside table bounds")
        for name, region in (("obstacle", spec.obstacle), ("goal", spec.goal)):
            if not region.radius > 0.0:
                bad.append(f"{name}.radius: must be > 0, got {region.radius}")
            elif not tb.contains(region.center, margin=region.radius):
                bad.append(f"{name}.center: disc {region.center} r={region.radius} not inside table bounds")

    if not bad and isinstance(shape, (Box, Disc)):
        # Start feasibility needs contact geometry; local import avoids a cycle.
        from . import geometry

        q = geometry.penetration(
            spec.start_state.pusher_pos, spec.pusher_radius, shape, spec.start_state.slider_pose
        )
        if q.penetration_depth > geometry.TOL_PEN:
            bad.append(
                f"start_state: pusher penetrates slider by {q.penetration_depth:.6g} mm"
            )

    if bad:
        raise SceneValidationError(bad)

    if spec.slider_inertia is None:
        return replace(spec, slider_inertia=shape.inertia(spec.slider_mass))
    return spec


# ---------------------------------------------------------------------------
# Scene JSON (External Interface: snake_case field names as in SceneSpec)

def _shape_to_dict(shape: Shape) -> dict:
    if isinstance(shape, Box):
        return {"type": "box", "half_extents": list(shape.half_extents)}
    return {"type": "disc", "radius": shape.radius}


def _shape_from_dict(d: dict) -> Shape:
    kind = d.get("type")
    if kind == "box":
        return Box(half_extents=tuple(d["half_extents"]))
    if kind == "disc":
        return Disc(radius=d["radius"])
    raise SceneValidationError([f"slider_shape.type: unknown shape type {kind!r}"])


def _state_to_dict(s: State) -> dict:
    return {
        "pusher_pos": list(s.pusher_pos),
        "slider_pose": list(s.slider_pose),
        "pusher_vel": list(s.pusher_vel),
        "slider_vel": list(s.slider_vel),
    }


def _state_from_dict(d: dict) -> State:
    return State(
        pusher_pos=tuple(d["pusher_pos"]),
        slider_pose=tuple(d["slider_pose"]),
        pusher_vel=tuple(d.get("pusher_vel", (0.0, 0.0))),
        slider_vel=tuple(d.get("slider_vel", (0.0, 0.0, 0.0))),
    )


def scene_to_dict(spec: SceneSpec) -> dict:
    d = {
        "slider_shape": _shape_to_dict(spec.slider_shape),
        "slider_mass": spec.slider_mass,
        "pusher_radius": spec.pusher_radius,
        "support_friction_mu": spec.support_friction_mu,
        "contact_friction_mu": spec.contact_friction_mu,
        "table_bounds": {
            "min": [spec.table_bounds.x_min, spec.table_bounds.y_min],
            "max": [spec.table_bounds.x_max, spec.table_bounds.y_max],
        },
        "obstacle": {"center": list(spec.obstacle.center), "radius": spec.obstacle.radius},
        "goal": {"center": list(spec.goal.center), "radius": spec.goal.radius},
        "start_state": _state_to_dict(spec.start_state),
        "max_push_speed": spec.max_push_speed,
    }
    if spec.slider_inertia is not None:
        d["slider_inertia"] = spec.slider_inertia
    return d


def scene_from_dict(d: dict) -> SceneSpec:
    try:
        tb = d["table_bounds"]
        return SceneSpec(
            slider_shape=_shape_from_dict(d["slider_shape"]),
            slider_mass=float(d["slider_mass"]),
            slider_inertia=float(d["slider_inertia"]) if "slider_inertia" in d else None,
            pusher_radius=float(d["pusher_radius"]),
            support_friction_mu=float(d["support_friction_mu"]),
            contact_friction_mu=float(d["contact_friction_mu"]),
            table_bounds=TableBounds(tb["min"][0], tb["min"][1], tb["max"][0], tb["max"][1]),
            obstacle=DiscRegion(tuple(d["obstacle"]["center"]), float(d["obstacle"]["radius"])),
            goal=DiscRegion(tuple(d["goal"]["center"]), float(d["goal"]["radius"])),
            start_state=_state_from_dict(d["start_state"]),
            max_push_speed=float(d.get("max_push_speed", 100.0)),
        )
    except KeyError as e:
        raise SceneValidationError([f"{e.args[0]}: missing required scene field"]) from e


def load_scene_document(path: str | Path) -> dict:
    """Read a scene JSON document (scene fields plus optional config sections)."""
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def save_scene_document(doc: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------------------
# Trajectory CSV (External Interface)

TRAJECTORY_CSV_HEADER = (
    "step,t,pusher_x,pusher_y,slider_x,slider_y,slider_theta,"
    "pusher_vx,pusher_vy,slider_vx,slider_vy,slider_omega"
)


def trajectory_rows(traj: Trajectory, dt: float) -> list[list[str]]:
    """Rows of the trajectory CSV; numbers in full round-trip precision."""
    rows = []
    for n, s in enumerate(traj.states):
        rows.append(
            [
                str(n),
                repr(n * dt),
                repr(s.pusher_pos[0]),
                repr(s.pusher_pos[1]),
                repr(s.slider_pose[0]),
                repr(s.slider_pose[1]),
                repr(s.slider_pose[2]),
                repr(s.pusher_vel[0]),
                repr(s.pusher_vel[1]),
                repr(s.slider_vel[0]),
                repr(s.slider_vel[1]),
                repr(s.slider_vel[2]),
            ]
        )
    return rows


def write_trajectory_csv(traj: Trajectory, dt: float, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(TRAJECTORY_CSV_HEADER.split(","))
        w.writerows(trajectory_rows(traj, dt))

"""Scene fixtures and generators for the experiment suite.

Slider dimensions, masses, and friction values are declared benchmark
parameters: box 100x60 mm, disc radius 40 mm, pusher radius 10 mm,
0.2 kg sliders. Pushes start with the pusher 25 mm short of contact.
"""
from __future__ import annotations

import math

import numpy as np

from .core import (
    Box,
    Disc,
    DiscRegion,
    InvalidArgumentError,
    SceneSpec,
    State,
    TableBounds,
    make_controls,
    validate_scene,
)
from .fine_model import PhysicsParams

PUSH_SPEED = 25.0  # mm/s, canonical pushing speed
SLIDER_MASS = 0.2  # kg
PUSHER_RADIUS = 10.0  # mm
BOX_HALF_EXTENTS = (50.0, 30.0)  # mm (100 x 60 box)
DISC_RADIUS = 40.0  # mm
SIDE_OFFSET = 20.0  # mm, lateral pusher offset of the side pushes
# Start gap between pusher surface and slider face. Deliberately not a
# multiple of the 25 mm per-step sweep so first contact lands mid-step.
APPROACH_GAP = 47.5  # mm
# Exactly symmetric pushes are a degenerate configuration in which the
# kinematic model already matches the fine model up to contact compliance,
# so the center fixtures are posed in generic position: the box slider is
# tilted and the disc push aims slightly off the exact center line.
CENTER_BOX_TILT = math.radians(10.0)
CENTER_DISC_OFFSET = 2.0  # mm
# Effective lever arm of rotational support friction in all fixtures. The
# uncoupled single-lever torque model ignores that sliding motion eats
# most of the rotational resistance; at the shape's mean half-extent a
# pushed box never rotates at all, so fixtures declare a shorter lever.
FIXTURE_TORQUE_LENGTH = 16.0  # mm


def fixture_physics(scene: SceneSpec, **overrides) -> PhysicsParams:
    """Fine-model parameters declared by the experiment fixtures."""
    kw = {"support_torque_length": FIXTURE_TORQUE_LENGTH}
    kw.update(overrides)
    return PhysicsParams.for_scene(scene, **kw)

CANONICAL_PUSHES = ("center_box", "side_box", "center_disc", "side_disc")

_TABLE = TableBounds(-300.0, -200.0, 300.0, 200.0)
_OBSTACLE_ASIDE = DiscRegion((0.0, -150.0), 40.0)
_GOAL_AHEAD = DiscRegion((200.0, 0.0), 30.0)


def _scene(shape, pusher_pos, slider_theta: float = 0.0) -> SceneSpec:
    return validate_scene(
        SceneSpec(
            slider_shape=shape,
            slider_mass=SLIDER_MASS,
            pusher_radius=PUSHER_RADIUS,
            support_friction_mu=0.35,
            contact_friction_mu=0.3,
            table_bounds=_TABLE,
            obstacle=_OBSTACLE_ASIDE,
            goal=_GOAL_AHEAD,
            start_state=State(pusher_pos=pusher_pos, slider_pose=(0.0, 0.0, slider_theta)),
        )
    )


def canonical_scene(push: str, gap: float = APPROACH_GAP) -> SceneSpec:
    """One of the four canonical convergence-experiment scenes."""
    if push not in CANONICAL_PUSHES:
        raise InvalidArgumentError(
            f"unknown push {push!r}; expected one of {CANONICAL_PUSHES}"
        )
    shape = Box(BOX_HALF_EXTENTS) if push.endswith("box") else Disc(DISC_RADIUS)
    contact_x = -(shape.half_extents[0] if isinstance(shape, Box) else shape.radius)
    start_x = contact_x - PUSHER_RADIUS - gap
    if push == "center_box":
        return _scene(shape, (start_x, 0.0), slider_theta=CENTER_BOX_TILT)
    if push == "center_disc":
        return _scene(shape, (start_x, CENTER_DISC_OFFSET))
    return _scene(shape, (start_x, SIDE_OFFSET))


def canonical_controls(n: int = 4, duration: float = 1.0) -> tuple:
    """The fixed experiment controls: straight +x at 25 mm/s."""
    return make_controls([(PUSH_SPEED, 0.0)] * n, duration)


# The open-loop protocol pushes 150 mm; a shorter gap keeps most of the
# sweep in contact.
OPENLOOP_GAP = 20.0  # mm


def openloop_scene(offset: float = 0.0, gap: float = OPENLOOP_GAP) -> SceneSpec:
    """Box push scene with the pusher laterally offset by `offset` mm."""
    shape = Box(BOX_HALF_EXTENTS)
    start_x = -shape.half_extents[0] - PUSHER_RADIUS - gap
    return _scene(shape, (start_x, offset))


def openloop_offsets(count: int, seed: int) -> list[float]:
    """Seeded initial pusher offsets, uniform within the slider edge."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed % (2**64)))
    hy = BOX_HALF_EXTENTS[1]
    return [float(x) for x in rng.uniform(-hy, hy, size=count)]


def openloop_controls(duration: float = 1.5, n: int = 4) -> list[tuple]:
    """Three fixed straight sequences at push angles 0, +15, -15 degrees."""
    out = []
    for alpha_deg in (0.0, 15.0, -15.0):
        a = math.radians(alpha_deg)
        v = (PUSH_SPEED * math.cos(a), PUSH_SPEED * math.sin(a))
        out.append(make_controls([v] * n, duration))
    return out


# ---------------------------------------------------------------------------
# Randomized push-to-goal benchmark scenes: obstacle fixed at the table
# center, start and goal on opposite sides with the straight line blocked.

_BENCH_TABLE = TableBounds(-260.0, -180.0, 260.0, 180.0)
_BENCH_OBSTACLE_RADIUS = 40.0
_BENCH_GOAL_RADIUS = 30.0


def _segment_point_distance(a, b, p) -> float:
    ax, ay = a
    bx, by = b
    px, py = p
    dx, dy = bx - ax, by - ay
    denom = dx * dx + dy * dy
    if denom == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / denom
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def benchmark_scene(seed: int) -> SceneSpec:
    """One seeded push-around-the-obstacle scene with a disc slider."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed % (2**64)))
    shape = Disc(DISC_RADIUS)
    obstacle = DiscRegion((0.0, 0.0), _BENCH_OBSTACLE_RADIUS)
    blocked_below = obstacle.radius + shape.radius
    while True:
        sx = float(rng.uniform(-180.0, -140.0))
        sy = float(rng.uniform(-60.0, 60.0))
        gx = float(rng.uniform(140.0, 180.0))
        gy = float(rng.uniform(-60.0, 60.0))
        if _segment_point_distance((sx, sy), (gx, gy), obstacle.center) < blocked_below:
            break
    dirx, diry = gx - sx, gy - sy
    norm = math.hypot(dirx, diry)
    dirx, diry = dirx / norm, diry / norm
    stand_off = shape.radius + PUSHER_RADIUS + 10.0
    start = State(
        pusher_pos=(sx - dirx * stand_off, sy - diry * stand_off),
        slider_pose=(sx, sy, 0.0),
    )
    return validate_scene(
        SceneSpec(
            slider_shape=shape,
            slider_mass=SLIDER_MASS,
            pusher_radius=PUSHER_RADIUS,
            support_friction_mu=0.35,
            contact_friction_mu=0.3,
            table_bounds=_BENCH_TABLE,
            obstacle=obstacle,
            goal=DiscRegion((gx, gy), _BENCH_GOAL_RADIUS),
            start_state=start,
        )
    )


def benchmark_scenes(count: int = 5, seed: int = 0) -> list[SceneSpec]:
    return [benchmark_scene(seed * 1000 + i) for i in range(count)]

"""Contact geometry between the disc pusher and the slider.

Penetration queries, swept-contact queries against the pusher-radius
inflated slider (a rounded rectangle for box sliders), and projection of
penetrating states back to the feasible set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .core import Box, Control, Disc, InvalidArgumentError, SceneSpec, Shape, State

# Penetration below this is treated as resting-contact noise, not
# infeasibility; it keeps projection from fighting the fine model's
# penalty-based resting penetration.
TOL_PEN = 0.1  # mm

_EPS = 1e-12


@dataclass(frozen=True)
class ContactQuery:
    """Signed pusher/slider overlap at one configuration.

    penetration_depth > 0 means overlap; negative values give the
    separation clearance. normal is a unit vector pointing from the
    pusher into the slider; contact_point lies on the slider boundary.
    """

    penetration_depth: float
    normal: tuple[float, float]
    contact_point: tuple[float, float]


@dataclass(frozen=True)
class SweepResult:
    """Contact bookkeeping for one straight pusher sweep.

    d_contact + d_free equals the total sweep length. r_c points from the
    first contact point to the slider center and is present iff the sweep
    spends positive length in contact.
    """

    d_contact: float
    d_free: float
    first_contact_point: tuple[float, float] | None = None
    r_c: tuple[float, float] | None = None
    theta_push: float | None = None


def _check_shape(shape: Shape) -> None:
    if isinstance(shape, Box):
        hx, hy = shape.half_extents
        if hx <= 0.0 or hy <= 0.0:
            raise InvalidArgumentError(f"degenerate box half_extents {shape.half_extents}")
    elif isinstance(shape, Disc):
        if shape.radius <= 0.0:
            raise InvalidArgumentError(f"degenerate disc radius {shape.radius}")
    else:
        raise InvalidArgumentError(f"unsupported shape {type(shape).__name__}")


def penetration_scalars(
    px: float,
    py: float,
    pusher_radius: float,
    is_box: bool,
    ha: float,
    hb: float,
    sx: float,
    sy: float,
    sth: float,
) -> tuple[float, float, float, float, float]:
    """Scalar core of `penetration`, shared with the fine model's hot loop.

    (ha, hb) are box half extents, or (radius, 0) for a disc slider.
    Returns (d_p, nx, ny, cx, cy) with the normal pointing pusher->slider
    and (cx, cy) on the slider boundary, all in world coordinates.
    """
    if not is_box:
        dx = sx - px
        dy = sy - py
        d = math.hypot(dx, dy)
        if d < _EPS:
            return (pusher_radius + ha, 1.0, 0.0, sx - ha, sy)
        nx = dx / d
        ny = dy / d
        return (pusher_radius + ha - d, nx, ny, sx - ha * nx, sy - ha * ny)

    c = math.cos(sth)
    s = math.sin(sth)
    rx = px - sx
    ry = py - sy
    lx = c * rx + s * ry
    ly = -s * rx + c * ry
    qx = min(max(lx, -ha), ha)
    qy = min(max(ly, -hb), hb)
    ddx = qx - lx
    ddy = qy - ly
    if ddx != 0.0 or ddy != 0.0:
        # pusher center outside the box: closest boundary point is the clamp
        dist = math.hypot(ddx, ddy)
        nlx = ddx / dist
        nly = ddy / dist
        d_p = pusher_radius - dist
    else:
        # center inside: exit through the nearest face (max-axis rule)
        ex = ha - abs(lx)
        ey = hb - abs(ly)
        if ex <= ey:
            sgn = 1.0 if lx >= 0.0 else -1.0
            nlx, nly = -sgn, 0.0
            qx, qy = sgn * ha, ly
            d_p = pusher_radius + ex
        else:
            sgn = 1.0 if ly >= 0.0 else -1.0
            nlx, nly = 0.0, -sgn
            qx, qy = lx, sgn * hb
            d_p = pusher_radius + ey
    nx = c * nlx - s * nly
    ny = s * nlx + c * nly
    cx = c * qx - s * qy + sx
    cy = s * qx + c * qy + sy
    return (d_p, nx, ny, cx, cy)


def penetration(
    pusher_pos: tuple[float, float],
    pusher_radius: float,
    slider_shape: Shape,
    slider_pose: tuple[float, float, float],
) -> ContactQuery:
    """Penetration depth, contact normal, and contact point.

    Disc-vs-disc and disc-vs-box are both analytic; see ContactQuery for
    sign conventions.
    """
    _check_shape(slider_shape)
    if pusher_radius <= 0.0:
        raise InvalidArgumentError(f"degenerate pusher radius {pusher_radius}")
    if isinstance(slider_shape, Box):
        ha, hb = slider_shape.half_extents
        is_box = True
    else:
        ha, hb = slider_shape.radius, 0.0
        is_box = False
    d_p, nx, ny, cx, cy = penetration_scalars(
        pusher_pos[0], pusher_pos[1], pusher_radius, is_box, ha, hb,
        slider_pose[0], slider_pose[1], slider_pose[2],
    )
    return ContactQuery(d_p, (nx, ny), (cx, cy))


def closest_point_on_boundary(
    shape: Shape, slider_pose: tuple[float, float, float], point: tuple[float, float]
) -> tuple[float, float]:
    """Nearest point of the slider boundary to `point` (world frame)."""
    sx, sy, sth = slider_pose
    if isinstance(shape, Disc):
        dx = point[0] - sx
        dy = point[1] - sy
        d = math.hypot(dx, dy)
        if d < _EPS:
            return (sx + shape.radius, sy)
        return (sx + shape.radius * dx / d, sy + shape.radius * dy / d)
    hx, hy = shape.half_extents
    c = math.cos(sth)
    s = math.sin(sth)
    rx = point[0] - sx
    ry = point[1] - sy
    lx = c * rx + s * ry
    ly = -s * rx + c * ry
    qx = min(max(lx, -hx), hx)
    qy = min(max(ly, -hy), hy)
    if qx == lx and qy == ly:
        # interior point: project to the nearest face
        if hx - abs(lx) <= hy - abs(ly):
            qx = hx if lx >= 0.0 else -hx
        else:
            qy = hy if ly >= 0.0 else -hy
    return (c * qx - s * qy + sx, s * qx + c * qy + sy)


def _seg_circle(px, py, dx, dy, cx, cy, r) -> tuple[float, float] | None:
    """Parameter interval of segment p + t*d, t in [0,1], inside a circle."""
    fx = px - cx
    fy = py - cy
    a = dx * dx + dy * dy
    b = 2.0 * (fx * dx + fy * dy)
    cc = fx * fx + fy * fy - r * r
    if a < _EPS:
        return (0.0, 1.0) if cc <= 0.0 else None
    disc = b * b - 4.0 * a * cc
    if disc < 0.0:
        return None
    sq = math.sqrt(disc)
    t0 = (-b - sq) / (2.0 * a)
    t1 = (-b + sq) / (2.0 * a)
    t0 = max(t0, 0.0)
    t1 = min(t1, 1.0)
    if t0 > t1:
        return None
    return (t0, t1)


def _seg_aabb(px, py, dx, dy, x0, x1, y0, y1) -> tuple[float, float] | None:
    """Slab test: parameter interval of the segment inside an AABB."""
    t0, t1 = 0.0, 1.0
    for p, d, lo, hi in ((px, dx, x0, x1), (py, dy, y0, y1)):
        if abs(d) < _EPS:
            if p < lo or p > hi:
                return None
        else:
            ta = (lo - p) / d
            tb = (hi - p) / d
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
            if t0 > t1:
                return None
    return (t0, t1)


def _inflated_interval(
    shape: Shape,
    slider_pose: tuple[float, float, float],
    inflate: float,
    p0: tuple[float, float],
    d: tuple[float, float],
) -> tuple[float, float] | None:
    """Segment interval inside the slider inflated by `inflate`.

    The inflated region is convex, so the intersection is one interval;
    for the box it is covered by two slabs plus four corner discs.
    """
    sx, sy, sth = slider_pose
    if isinstance(shape, Disc):
        return _seg_circle(p0[0], p0[1], d[0], d[1], sx, sy, shape.radius + inflate)

    hx, hy = shape.half_extents
    c = math.cos(sth)
    s = math.sin(sth)
    rx = p0[0] - sx
    ry = p0[1] - sy
    px = c * rx + s * ry
    py = -s * rx + c * ry
    dx = c * d[0] + s * d[1]
    dy = -s * d[0] + c * d[1]

    best: tuple[float, float] | None = None
    pieces = [
        _seg_aabb(px, py, dx, dy, -hx - inflate, hx + inflate, -hy, hy),
        _seg_aabb(px, py, dx, dy, -hx, hx, -hy - inflate, hy + inflate),
    ]
    for ccx in (-hx, hx):
        for ccy in (-hy, hy):
            pieces.append(_seg_circle(px, py, dx, dy, ccx, ccy, inflate))
    for iv in pieces:
        if iv is None:
            continue
        if best is None:
            best = iv
        else:
            best = (min(best[0], iv[0]), max(best[1], iv[1]))
    return best


def sweep_contact(
    pusher_pos: tuple[float, float],
    pusher_radius: float,
    slider_shape: Shape,
    slider_pose: tuple[float, float, float],
    control: Control,
) -> SweepResult:
    """Contact/free split of one straight pusher sweep, slider held fixed.

    The sweep segment runs from pusher_pos along control.vel for
    control.duration. Contact is measured against the Minkowski-inflated
    slider; the first entry point is mapped back to the uninflated
    boundary to define the contact point, r_c, and the push angle.
    """
    _check_shape(slider_shape)
    vx, vy = control.vel
    dt = control.duration
    d = (vx * dt, vy * dt)
    total = math.hypot(d[0], d[1])
    if total == 0.0:
        return SweepResult(0.0, 0.0)

    iv = _inflated_interval(slider_shape, slider_pose, pusher_radius, pusher_pos, d)
    if iv is None:
        return SweepResult(0.0, total)
    # Contact runs from first entry to the end of the sweep: the slider is
    # held fixed only as an approximation, so a later exit of the swept
    # segment from the inflated region is an artifact, not lost contact.
    t_in = iv[0]
    d_contact = (1.0 - t_in) * total
    d_free = total - d_contact
    if d_contact <= 0.0:
        return SweepResult(0.0, total)

    entry = (pusher_pos[0] + t_in * d[0], pusher_pos[1] + t_in * d[1])
    contact = closest_point_on_boundary(slider_shape, slider_pose, entry)
    r_c = (slider_pose[0] - contact[0], slider_pose[1] - contact[1])
    r_norm = math.hypot(r_c[0], r_c[1])
    if r_norm < _EPS:
        theta = 0.0
    else:
        cosang = (vx * r_c[0] + vy * r_c[1]) / (math.hypot(vx, vy) * r_norm)
        theta = math.acos(min(1.0, max(-1.0, cosang)))
    return SweepResult(d_contact, d_free, contact, r_c, theta)


def project_feasible(state: State, scene: SceneSpec) -> State:
    """Translate the slider out of pusher penetration along the contact normal.

    Penetration at or below TOL_PEN is left alone (resting-contact band);
    deeper overlap is resolved exactly, leaving orientation and all
    velocities untouched. Total function; idempotent.
    """
    q = penetration(
        state.pusher_pos, scene.pusher_radius, scene.slider_shape, state.slider_pose
    )
    if q.penetration_depth <= TOL_PEN:
        return state
    x, y, th = state.slider_pose
    return replace(
        state,
        slider_pose=(
            x + q.normal[0] * q.penetration_depth,
            y + q.normal[1] * q.penetration_depth,
            th,
        ),
    )

"""Fine physics model: small-substep penalty-contact planar simulator.

Expensive and accurate relative to the kinematic coarse model. Pure
function of its inputs; bitwise deterministic, safe to evaluate
concurrently (required by the parallel-in-time sweep).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .core import (
    Box,
    Control,
    InvalidArgumentError,
    SceneSpec,
    SimulationUnstableError,
    State,
    Trajectory,
    check_controls,
    controls_digest,
    wrap_angle,
)
from .geometry import penetration_scalars

# Internal force unit is kg*mm/s^2 (mN); stiffness/damping are configured
# in N/mm and N*s/mm, hence the conversion factor.
_MN_PER_N = 1000.0

# Contact damping ramps in over this depth so the normal force is C0 at
# contact onset instead of jumping by damping*approach_speed.
_DAMPING_GATE_MM = 0.01


@dataclass(frozen=True)
class PhysicsParams:
    """Fine-model integration and contact parameters.

    support_torque_length defaults (None) to the slider shape's mean
    half-extent; it is the lever arm of the rotational support friction.
    """

    substep: float = 0.001  # s
    contact_stiffness: float = 10.0  # N/mm
    contact_damping: float = 0.05  # N*s/mm
    contact_friction_mu: float = 0.3
    support_friction_mu: float = 0.35
    gravity: float = 9810.0  # mm/s^2
    vel_regularization: float = 0.5  # mm/s
    support_torque_length: float | None = None  # mm

    def __post_init__(self):
        if not self.substep > 0.0:
            raise InvalidArgumentError(f"substep must be > 0, got {self.substep}")
        if not self.contact_stiffness > 0.0:
            raise InvalidArgumentError(
                f"contact_stiffness must be > 0, got {self.contact_stiffness}"
            )
        if self.contact_damping < 0.0:
            raise InvalidArgumentError(
                f"contact_damping must be >= 0, got {self.contact_damping}"
            )
        if self.contact_friction_mu < 0.0 or self.support_friction_mu < 0.0:
            raise InvalidArgumentError("friction coefficients must be >= 0")
        if not self.vel_regularization > 0.0:
            raise InvalidArgumentError(
                f"vel_regularization must be > 0, got {self.vel_regularization}"
            )

    @classmethod
    def for_scene(cls, scene: SceneSpec, **overrides) -> "PhysicsParams":
        """Params with friction coefficients taken from the scene."""
        kw = dict(
            contact_friction_mu=scene.contact_friction_mu,
            support_friction_mu=scene.support_friction_mu,
        )
        kw.update(overrides)
        return cls(**kw)

    def to_dict(self) -> dict:
        d = {
            "substep": self.substep,
            "contact_stiffness": self.contact_stiffness,
            "contact_damping": self.contact_damping,
            "contact_friction_mu": self.contact_friction_mu,
            "support_friction_mu": self.support_friction_mu,
            "gravity": self.gravity,
            "vel_regularization": self.vel_regularization,
        }
        if self.support_torque_length is not None:
            d["support_torque_length"] = self.support_torque_length
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PhysicsParams":
        return cls(**d)


def _substep_count(duration: float, substep: float) -> int:
    n = round(duration / substep)
    if n < 1 or abs(n * substep - duration) > 1e-9:
        raise InvalidArgumentError(
            f"control duration {duration} is not an integer multiple of substep {substep}"
        )
    return n


def fine_step(state: State, control: Control, params: PhysicsParams, scene: SceneSpec) -> State:
    """Advance one control step with semi-implicit Euler substeps.

    Per substep the pusher moves kinematically, a penalty normal force
    plus regularized Coulomb tangential force act at the contact, and
    support friction decelerates the slider. Friction is integrated as a
    clamped impulse (it can stop relative motion but never reverse it),
    which keeps the stick/slip switch stable at the default substep.
    """
    n_sub = _substep_count(control.duration, params.substep)
    dt = params.substep
    vx, vy = control.vel

    shape = scene.slider_shape
    if isinstance(shape, Box):
        is_box = True
        ha, hb = shape.half_extents
    else:
        is_box = False
        ha, hb = shape.radius, 0.0
    m = scene.slider_mass
    inertia = scene.slider_inertia if scene.slider_inertia is not None else shape.inertia(m)
    rp = scene.pusher_radius

    k = params.contact_stiffness * _MN_PER_N  # mN/mm
    cd = params.contact_damping * _MN_PER_N  # mN*s/mm
    mu_c = params.contact_friction_mu
    mu_s = params.support_friction_mu
    g = params.gravity
    vreg = params.vel_regularization
    lever = params.support_torque_length
    if lever is None:
        lever = shape.mean_half_extent
    slide_decel = mu_s * g  # mm/s^2
    ang_decel = mu_s * m * g * lever / inertia  # rad/s^2

    px, py = state.pusher_pos
    px0, py0 = px, py
    sx, sy, sth = state.slider_pose
    svx, svy, som = state.slider_vel

    for i in range(1, n_sub + 1):
        px += vx * dt
        py += vy * dt

        d_p, nx, ny, cx, cy = penetration_scalars(px, py, rp, is_box, ha, hb, sx, sy, sth)
        if d_p > 0.0:
            rx = cx - sx
            ry = cy - sy
            # slider material velocity at the contact point
            vcx = svx - som * ry
            vcy = svy + som * rx
            approach = (vx - vcx) * nx + (vy - vcy) * ny
            gate = d_p / _DAMPING_GATE_MM
            if gate > 1.0:
                gate = 1.0
            fn = k * d_p + cd * approach * gate
            if fn < 0.0:
                fn = 0.0
            if not math.isfinite(fn):
                raise SimulationUnstableError(i, f"contact force {fn!r}")
            jx = fn * dt * nx
            jy = fn * dt * ny
            tx = -ny
            ty = nx
            vrel_t = (vcx - vx) * tx + (vcy - vy) * ty
            if vrel_t != 0.0:
                avt = abs(vrel_t)
                sat = avt / vreg
                if sat > 1.0:
                    sat = 1.0
                jt = mu_c * fn * sat * dt
                rn = rx * ty - ry * tx
                meff = 1.0 / (1.0 / m + rn * rn / inertia)
                jt_stop = meff * avt
                if jt > jt_stop:
                    jt = jt_stop
                if vrel_t > 0.0:
                    jt = -jt
                jx += jt * tx
                jy += jt * ty
            svx += jx / m
            svy += jy / m
            som += (rx * jy - ry * jx) / inertia

        # support friction: clamped decelerating impulse, zero at rest
        speed = math.hypot(svx, svy)
        if speed > 0.0:
            sat = speed / vreg
            if sat > 1.0:
                sat = 1.0
            dv = slide_decel * sat * dt
            if dv >= speed:
                svx = 0.0
                svy = 0.0
            else:
                scale = (speed - dv) / speed
                svx *= scale
                svy *= scale
        if som != 0.0:
            # angular regularization scale is vreg mapped through the lever arm
            aw = abs(som)
            sat = aw * lever / vreg
            if sat > 1.0:
                sat = 1.0
            dw = ang_decel * sat * dt
            if dw >= aw:
                som = 0.0
            else:
                som -= dw if som > 0.0 else -dw

        sx += svx * dt
        sy += svy * dt
        sth += som * dt
        if not math.isfinite(svx + svy + som + sth):
            raise SimulationUnstableError(i, "non-finite slider state")

    return State(
        pusher_pos=(px0 + vx * control.duration, py0 + vy * control.duration),
        slider_pose=(sx, sy, wrap_angle(sth)),
        pusher_vel=(vx, vy),
        slider_vel=(svx, svy, som),
    )


def fine_rollout(
    state0: State, controls: tuple[Control, ...], params: PhysicsParams, scene: SceneSpec
) -> Trajectory:
    """Serial composition of fine_step; bitwise deterministic."""
    check_controls(controls, scene.max_push_speed)
    states = [state0]
    for n, c in enumerate(controls):
        try:
            states.append(fine_step(states[-1], c, params, scene))
        except SimulationUnstableError as e:
            raise SimulationUnstableError(e.substep, f"at rollout step {n}") from e
    return Trajectory(tuple(states), "fine", controls_digest(controls))

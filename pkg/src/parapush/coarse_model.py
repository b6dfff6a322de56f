"""Coarse physics model: one-shot kinematic pushing update.

The slider inherits the pusher velocity scaled by the fraction of the
sweep spent in contact, plus a lever-arm angular velocity. Orders of
magnitude cheaper than the fine model and deliberately inaccurate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .core import (
    Control,
    InvalidArgumentError,
    SceneSpec,
    State,
    Trajectory,
    check_controls,
    controls_digest,
    wrap_angle,
)
from .geometry import sweep_contact

_R_MIN = 1e-6  # mm; contact at the slider center gives no rotation


@dataclass(frozen=True)
class CoarseParams:
    """Gain of the induced angular velocity."""

    k_omega: float = 1.0

    def __post_init__(self):
        if not self.k_omega > 0.0:
            raise InvalidArgumentError(f"k_omega must be > 0, got {self.k_omega}")

    def to_dict(self) -> dict:
        return {"k_omega": self.k_omega}

    @classmethod
    def from_dict(cls, d: dict) -> "CoarseParams":
        return cls(**d)


def coarse_step(
    state: State, control: Control, params: CoarseParams, scene: SceneSpec
) -> State:
    """One kinematic pushing update with the slider pose frozen for the sweep.

    Tolerates infeasible (penetrating) input states and uses them as-is;
    the coarse model may also leave the pair separated or overlapping.
    """
    sweep = sweep_contact(
        state.pusher_pos,
        scene.pusher_radius,
        scene.slider_shape,
        state.slider_pose,
        control,
    )
    total = sweep.d_contact + sweep.d_free
    p_c = sweep.d_contact / total if total > 0.0 else 0.0

    omega = 0.0
    if p_c > 0.0 and sweep.r_c is not None:
        rcx, rcy = sweep.r_c
        r_norm = math.hypot(rcx, rcy)
        if r_norm >= _R_MIN:
            ux, uy = control.vel
            mag = params.k_omega * math.hypot(ux, uy) * math.sin(sweep.theta_push) / r_norm
            cross = ux * rcy - uy * rcx
            omega = mag if cross >= 0.0 else -mag

    ux, uy = control.vel
    dt = control.duration
    sx, sy, sth = state.slider_pose
    new_pose = (
        sx + ux * p_c * dt,
        sy + uy * p_c * dt,
        wrap_angle(sth + omega * p_c * dt),
    )
    new_slider_vel = (ux, uy, omega) if p_c > 0.0 else state.slider_vel
    return State(
        pusher_pos=(state.pusher_pos[0] + ux * dt, state.pusher_pos[1] + uy * dt),
        slider_pose=new_pose,
        pusher_vel=(ux, uy),
        slider_vel=new_slider_vel,
    )


def coarse_rollout(
    state0: State, controls: tuple[Control, ...], params: CoarseParams, scene: SceneSpec
) -> Trajectory:
    """Serial composition of coarse_step; bitwise deterministic."""
    check_controls(controls, scene.max_push_speed)
    states = [state0]
    for c in controls:
        states.append(coarse_step(states[-1], c, params, scene))
    return Trajectory(tuple(states), "coarse", controls_digest(controls))

"""Push-planning cost function and derivative-free stochastic optimization.

The optimizer perturbs the nominal control sequence with seeded Gaussian
noise, rolls the samples out through whichever physics model the caller
selected, and moves the nominal by an exponentiated-cost weighted average
of the perturbations. Updates are accepted only when they do not worsen
the rolled-out cost, which makes per-iteration cost monotone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import (
    Control,
    InvalidArgumentError,
    OptimizationFailedError,
    SceneSpec,
    SimulationUnstableError,
    State,
    Trajectory,
)


@dataclass(frozen=True)
class CostWeights:
    """Obstacle, engagement, smoothness, edge, and terminal push-cost weights.

    The shipped values are calibrated so the obstacle barrier competes
    with the terminal pull at collision range on the benchmark scenes; a
    1/d^2 barrier referenced to the obstacle center needs several orders
    of magnitude over the terminal weight before it shapes the descent.
    """

    w_s: float = 2.0e6  # mm^2; slider-to-obstacle proximity
    w_p: float = 4.0e5  # mm^2; pusher-to-obstacle proximity
    w_u: float = 1.0e-2  # s^2/mm^2; control smoothness
    w_edge: float = 1.0e4  # flat penalty for leaving the table
    w_final: float = 0.2  # terminal weight
    # Pusher-slider engagement pull, active only beyond ENGAGE_FREE_MM.
    # Repositioning maneuvers around the slider stay free of it; it only
    # restores a gradient once the pusher has genuinely lost the slider
    # (otherwise every contactless plan costs the same and the sampler
    # random-walks away for good).
    w_engage: float = 1.0e-2  # 1/mm^2

    def __post_init__(self):
        for name in ("w_s", "w_p", "w_u", "w_edge", "w_final"):
            if not getattr(self, name) > 0.0:
                raise InvalidArgumentError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.w_engage < 0.0:
            raise InvalidArgumentError(f"w_engage must be >= 0, got {self.w_engage}")

    def to_dict(self) -> dict:
        return {
            "w_s": self.w_s,
            "w_p": self.w_p,
            "w_u": self.w_u,
            "w_edge": self.w_edge,
            "w_final": self.w_final,
            "w_engage": self.w_engage,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CostWeights":
        return cls(**d)


@dataclass(frozen=True)
class OptimizerConfig:
    """Sampling budget and exploration parameters.

    exploration_std follows the SI reading of the published exploration
    variance 1e-4 (m/s)^2, i.e. 10 mm/s.
    """

    samples_per_iteration: int = 20
    exploration_std: float = 10.0  # mm/s
    opt_iterations: int = 5
    temperature: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.samples_per_iteration < 1:
            raise InvalidArgumentError(
                f"samples_per_iteration must be >= 1, got {self.samples_per_iteration}"
            )
        if not self.exploration_std > 0.0:
            raise InvalidArgumentError(
                f"exploration_std must be > 0, got {self.exploration_std}"
            )
        if self.opt_iterations < 0:
            raise InvalidArgumentError(
                f"opt_iterations must be >= 0, got {self.opt_iterations}"
            )
        if not self.temperature > 0.0:
            raise InvalidArgumentError(f"temperature must be > 0, got {self.temperature}")

    def to_dict(self) -> dict:
        return {
            "samples_per_iteration": self.samples_per_iteration,
            "exploration_std": self.exploration_std,
            "opt_iterations": self.opt_iterations,
            "temperature": self.temperature,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizerConfig":
        return cls(**d)


def running_cost(
    state: State, u_prev: Control, u: Control, weights: CostWeights, scene: SceneSpec
) -> float:
    """Per-step cost: obstacle proximity, control smoothness, edge penalty.

    Returns +inf when the slider (or pusher) sits exactly on the obstacle
    center; the sentinel orders above every finite cost. The edge penalty
    also applies to the pusher: the table is the reachable workspace, and
    without the term a contactless pusher sees a flat landscape and can
    drift away for good.
    """
    ox, oy = scene.obstacle.center
    sx, sy = state.slider_xy
    ds2 = (sx - ox) ** 2 + (sy - oy) ** 2
    px, py = state.pusher_pos
    dp2 = (px - ox) ** 2 + (py - oy) ** 2
    if ds2 == 0.0 or dp2 == 0.0:
        return math.inf
    dux = u.vel[0] - u_prev.vel[0]
    duy = u.vel[1] - u_prev.vel[1]
    cost = weights.w_s / ds2 + weights.w_p / dp2 + weights.w_u * (dux * dux + duy * duy)
    slack = math.hypot(px - sx, py - sy) - ENGAGE_FREE_MM
    if slack > 0.0:
        cost += weights.w_engage * slack * slack
    if not scene.table_bounds.contains((sx, sy)):
        cost += weights.w_edge
    if not scene.table_bounds.contains((px, py)):
        cost += weights.w_edge
    return cost


def final_cost(state: State, scene: SceneSpec) -> float:
    """Squared distance (mm^2) from the slider to the goal center."""
    gx, gy = scene.goal.center
    sx, sy = state.slider_xy
    return (sx - gx) ** 2 + (sy - gy) ** 2


def trajectory_cost(
    traj: Trajectory,
    controls: Sequence[Control],
    weights: CostWeights,
    scene: SceneSpec,
) -> float:
    """Running costs over n = 1..N-1 plus the weighted terminal cost."""
    n = len(controls)
    if len(traj.states) != n + 1:
        raise InvalidArgumentError(
            f"trajectory length {len(traj.states)} does not match {n} controls"
        )
    total = 0.0
    for i in range(1, n):
        total += running_cost(traj.states[i], controls[i - 1], controls[i], weights, scene)
    return total + weights.w_final * final_cost(traj.states[n], scene)


# Pusher-slider separations below this are legitimate maneuvering space;
# the engagement pull applies only beyond it.
ENGAGE_FREE_MM = 150.0

RolloutFn = Callable[[State, tuple[Control, ...]], Trajectory]


def _clamp_speed(vels: np.ndarray, vmax: float) -> np.ndarray:
    """Scale any over-speed rows back onto the max-speed circle."""
    out = vels.copy()
    norms = np.hypot(out[:, 0], out[:, 1])
    over = norms > vmax
    if np.any(over):
        out[over] *= (vmax / norms[over])[:, None]
    return out


def _sample_rng(seed: int, iteration: int, sample: int) -> np.random.Generator:
    # independent substream per (seed, iteration, sample): parallel sample
    # evaluation cannot perturb determinism
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed % (2**64), spawn_key=(iteration, sample))
    )


def optimize(
    state0: State,
    init_controls: tuple[Control, ...],
    rollout: RolloutFn,
    weights: CostWeights,
    config: OptimizerConfig,
    scene: SceneSpec,
    probe: Callable[[int, float, bool], None] | None = None,
) -> tuple[Control, ...]:
    """Improve a control sequence by seeded stochastic sampling.

    Deterministic given config.rng_seed. The returned sequence's
    rolled-out cost never exceeds the initial sequence's. `probe`, when
    given, receives (iteration, nominal_cost, accepted) after each
    optimization iteration.
    """
    if len(init_controls) < 1:
        raise InvalidArgumentError("init_controls must contain at least one control")
    duration = init_controls[0].duration
    vmax = scene.max_push_speed

    def seq_cost(vels: np.ndarray) -> float:
        ctrls = tuple(Control((float(v[0]), float(v[1])), duration) for v in vels)
        traj = rollout(state0, ctrls)
        return trajectory_cost(traj, ctrls, weights, scene)

    nominal = np.array([c.vel for c in init_controls], dtype=float)
    n = len(init_controls)
    try:
        nominal_cost = seq_cost(nominal)
    except SimulationUnstableError as e:
        raise OptimizationFailedError(f"nominal rollout failed: {e}") from e

    for it in range(config.opt_iterations):
        deltas = []
        costs = []
        failures = []
        for j in range(config.samples_per_iteration):
            rng = _sample_rng(config.rng_seed, it, j)
            noise = rng.normal(0.0, config.exploration_std, size=(n, 2))
            cand = _clamp_speed(nominal + noise, vmax)
            try:
                cost = seq_cost(cand)
            except SimulationUnstableError as e:
                failures.append(f"iteration {it} sample {j}: {e}")
                continue
            deltas.append(cand - nominal)
            costs.append(cost)
        if not deltas:
            raise OptimizationFailedError(
                "all sample rollouts failed: " + "; ".join(failures)
            )

        finite = [c for c in costs if math.isfinite(c)]
        if not finite:
            # every sample hit the +inf sentinel; nothing to average
            if probe is not None:
                probe(it, nominal_cost, False)
            continue
        shift = min(finite)
        weights_exp = [
            math.exp(-(c - shift) / config.temperature) if math.isfinite(c) else 0.0
            for c in costs
        ]
        wsum = sum(weights_exp)
        if wsum <= 0.0:
            if probe is not None:
                probe(it, nominal_cost, False)
            continue
        update = sum(w * d for w, d in zip(weights_exp, deltas)) / wsum
        candidate = _clamp_speed(nominal + update, vmax)
        try:
            cand_cost = seq_cost(candidate)
        except SimulationUnstableError:
            cand_cost = math.inf
        accepted = cand_cost <= nominal_cost
        if accepted:
            nominal = candidate
            nominal_cost = cand_cost
        if probe is not None:
            probe(it, nominal_cost, accepted)

    return tuple(Control((float(v[0]), float(v[1])), duration) for v in nominal)

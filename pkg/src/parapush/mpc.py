"""Closed-loop model-predictive push control.

Optimize a short control sequence with the selected prediction model,
execute its first control in the fine-model world, observe, warm-start,
and repeat until the slider reaches the goal or a failure condition
triggers. The world stepper is always the fine model; the planner/world
asymmetry for coarser planning models is the point of the experiment.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from statistics import mean, pstdev
from typing import Callable, Sequence

import numpy as np

from .coarse_model import CoarseParams
from .core import (
    Box,
    Control,
    Disc,
    InvalidArgumentError,
    OptimizationFailedError,
    SceneSpec,
    SimulationUnstableError,
    State,
    make_controls,
    validate_scene,
)
from .fine_model import PhysicsParams, fine_step
from .optimizer import CostWeights, OptimizerConfig, optimize
from .parareal import make_rollout
from .scenes import PUSH_SPEED

OUTCOMES = ("success", "hit_obstacle", "fell_off_table", "timeout")


@dataclass(frozen=True)
class MPCConfig:
    """Horizon, control duration, action budget, and world noise."""

    horizon: int = 4
    control_duration: float = 1.0  # s
    max_actions: int = 20
    world_noise_std: float = 0.0  # mm, optional execution noise

    def __post_init__(self):
        if self.horizon < 1:
            raise InvalidArgumentError(f"horizon must be >= 1, got {self.horizon}")
        if self.max_actions < 1:
            raise InvalidArgumentError(f"max_actions must be >= 1, got {self.max_actions}")
        if self.world_noise_std < 0.0:
            raise InvalidArgumentError(
                f"world_noise_std must be >= 0, got {self.world_noise_std}"
            )

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "control_duration": self.control_duration,
            "max_actions": self.max_actions,
            "world_noise_std": self.world_noise_std,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MPCConfig":
        return cls(**d)


@dataclass(frozen=True)
class EpisodeResult:
    outcome: str
    actions_executed: int
    wall_clock_planning: float
    state_log: tuple[State, ...]
    action_log: tuple[Control, ...]


def slider_hits_obstacle(state: State, scene: SceneSpec) -> bool:
    """Analytic slider-footprint vs obstacle-disc overlap test."""
    ox, oy = scene.obstacle.center
    sx, sy, sth = state.slider_pose
    shape = scene.slider_shape
    if isinstance(shape, Disc):
        return math.hypot(sx - ox, sy - oy) <= shape.radius + scene.obstacle.radius
    hx, hy = shape.half_extents
    c = math.cos(sth)
    s = math.sin(sth)
    rx = ox - sx
    ry = oy - sy
    lx = c * rx + s * ry
    ly = -s * rx + c * ry
    qx = min(max(lx, -hx), hx)
    qy = min(max(ly, -hy), hy)
    return math.hypot(lx - qx, ly - qy) <= scene.obstacle.radius


def slider_in_goal(state: State, scene: SceneSpec) -> bool:
    gx, gy = scene.goal.center
    sx, sy = state.slider_xy
    return math.hypot(sx - gx, sy - gy) <= scene.goal.radius


def check_termination(
    state: State, actions: int, scene: SceneSpec, config: MPCConfig
) -> str | None:
    """Fixed evaluation order: obstacle, table edge, goal, budget."""
    if slider_hits_obstacle(state, scene):
        return "hit_obstacle"
    if not scene.table_bounds.contains(state.slider_xy):
        return "fell_off_table"
    if slider_in_goal(state, scene):
        return "success"
    if actions >= config.max_actions:
        return "timeout"
    return None


def straight_line_candidate(
    state: State, scene: SceneSpec, horizon: int, duration: float, speed: float = PUSH_SPEED
) -> tuple[Control, ...]:
    """Initial candidate: push straight toward the goal at the canonical speed."""
    gx, gy = scene.goal.center
    sx, sy = state.slider_xy
    dx, dy = gx - sx, gy - sy
    norm = math.hypot(dx, dy)
    if norm < 1e-9:
        dx, dy, norm = 1.0, 0.0, 1.0
    v = (speed * dx / norm, speed * dy / norm)
    return make_controls([v] * horizon, duration)


def run_episode(
    scene: SceneSpec,
    model: str,
    mpc_config: MPCConfig,
    optimizer_config: OptimizerConfig,
    weights: CostWeights,
    params: PhysicsParams,
    coarse_params: CoarseParams,
    workers: int | None = None,
    plan_probe: Callable[[int, tuple[Control, ...], tuple[Control, ...]], None] | None = None,
) -> EpisodeResult:
    """One closed-loop episode; bitwise reproducible when noise is off."""
    scene = validate_scene(scene)
    rollout = make_rollout(model, params, coarse_params, scene, workers=workers)
    noise_rng = (
        np.random.default_rng(
            np.random.SeedSequence(
                entropy=optimizer_config.rng_seed % (2**64), spawn_key=(0x0B5,)
            )
        )
        if mpc_config.world_noise_std > 0.0
        else None
    )

    state = scene.start_state
    state_log = [state]
    action_log: list[Control] = []
    planning_seconds = 0.0
    actions = 0

    outcome = check_termination(state, actions, scene, mpc_config)
    candidate = straight_line_candidate(
        state, scene, mpc_config.horizon, mpc_config.control_duration
    )
    base_cfg = optimizer_config.to_dict()
    while outcome is None:
        # fresh noise substream per replanning step, derived from the
        # episode seed so episodes stay reproducible
        step_cfg = OptimizerConfig(
            **{**base_cfg, "rng_seed": optimizer_config.rng_seed + 0x9E3779B1 * (actions + 1)}
        )
        t0 = time.perf_counter()
        optimized = optimize(state, candidate, rollout, weights, step_cfg, scene)
        planning_seconds += time.perf_counter() - t0
        if plan_probe is not None:
            plan_probe(actions, candidate, optimized)

        state = fine_step(state, optimized[0], params, scene)
        if noise_rng is not None:
            dx, dy = noise_rng.normal(0.0, mpc_config.world_noise_std, size=2)
            x, y, th = state.slider_pose
            state = State(
                pusher_pos=state.pusher_pos,
                slider_pose=(x + dx, y + dy, th),
                pusher_vel=state.pusher_vel,
                slider_vel=state.slider_vel,
            )
        actions += 1
        state_log.append(state)
        action_log.append(optimized[0])

        outcome = check_termination(state, actions, scene, mpc_config)
        candidate = optimized[1:] + (optimized[-1],)

    return EpisodeResult(
        outcome=outcome,
        actions_executed=actions,
        wall_clock_planning=planning_seconds,
        state_log=tuple(state_log),
        action_log=tuple(action_log),
    )


@dataclass(frozen=True)
class EpisodeRow:
    scene: str
    model: str
    seed: int
    outcome: str
    actions: int
    planning_seconds: float


@dataclass(frozen=True)
class BenchmarkSummary:
    scene: str
    model: str
    episodes: int
    success_rate: float
    mean_planning_seconds: float
    std_planning_seconds: float
    mean_actions: float


@dataclass(frozen=True)
class BenchmarkResult:
    rows: tuple[EpisodeRow, ...]
    summaries: tuple[BenchmarkSummary, ...]
    episodes: dict  # (scene, model, seed) -> EpisodeResult


EPISODE_CSV_HEADER = "scene,model,seed,outcome,actions,planning_seconds"
SUMMARY_CSV_HEADER = (
    "scene,model,episodes,success_rate,mean_planning_seconds,"
    "std_planning_seconds,mean_actions"
)


def run_benchmark(
    scenes: Sequence[SceneSpec],
    models: Sequence[str],
    mpc_config: MPCConfig,
    optimizer_config: OptimizerConfig,
    weights: CostWeights,
    params: PhysicsParams,
    coarse_params: CoarseParams,
    seeds: Sequence[int] | None = None,
    repetitions: int = 1,
    scene_names: Sequence[str] | None = None,
    workers: int | None = None,
) -> BenchmarkResult:
    """Grid of episodes over scenes x models x seeds with per-cell stats.

    Episodes that abort on a propagated model error are recorded with
    outcome 'aborted' rather than counted as task failures.
    """
    if not scenes or not models:
        raise InvalidArgumentError("run_benchmark needs at least one scene and one model")
    if seeds is None:
        seeds = list(range(repetitions))
    if scene_names is None:
        scene_names = [f"scene{i}" for i in range(len(scenes))]

    rows: list[EpisodeRow] = []
    episodes: dict = {}
    summaries: list[BenchmarkSummary] = []
    for name, scene in zip(scene_names, scenes):
        for model in models:
            cell: list[EpisodeRow] = []
            for seed in seeds:
                cfg = OptimizerConfig(**{**optimizer_config.to_dict(), "rng_seed": seed})
                try:
                    ep = run_episode(
                        scene, model, mpc_config, cfg, weights, params, coarse_params,
                        workers=workers,
                    )
                    row = EpisodeRow(
                        name, model, seed, ep.outcome, ep.actions_executed,
                        ep.wall_clock_planning,
                    )
                    episodes[(name, model, seed)] = ep
                except (OptimizationFailedError, SimulationUnstableError):
                    row = EpisodeRow(name, model, seed, "aborted", 0, 0.0)
                rows.append(row)
                cell.append(row)
            done = [r for r in cell if r.outcome != "aborted"]
            times = [r.planning_seconds for r in done] or [0.0]
            summaries.append(
                BenchmarkSummary(
                    scene=name,
                    model=model,
                    episodes=len(cell),
                    success_rate=sum(r.outcome == "success" for r in cell) / len(cell),
                    mean_planning_seconds=mean(times),
                    std_planning_seconds=pstdev(times) if len(times) > 1 else 0.0,
                    mean_actions=mean([r.actions for r in done]) if done else 0.0,
                )
            )
    return BenchmarkResult(tuple(rows), tuple(summaries), episodes)


def episode_rows_csv(rows: Sequence[EpisodeRow]) -> list[list[str]]:
    return [
        [r.scene, r.model, str(r.seed), r.outcome, str(r.actions), repr(r.planning_seconds)]
        for r in rows
    ]


def summary_rows_csv(summaries: Sequence[BenchmarkSummary]) -> list[list[str]]:
    return [
        [
            s.scene,
            s.model,
            str(s.episodes),
            repr(s.success_rate),
            repr(s.mean_planning_seconds),
            repr(s.std_planning_seconds),
            repr(s.mean_actions),
        ]
        for s in summaries
    ]

"""Command-line experiment runners.

Subcommands: rollout, converge, bench, openloop, plan, validate. Every
command writes plot-ready CSV plus a manifest that pins the arguments and
seed; re-running a manifest's argv reproduces the outputs bitwise
(timestamp excluded).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import statistics
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .coarse_model import CoarseParams, coarse_rollout
from .core import (
    InvalidArgumentError,
    OptimizationFailedError,
    SceneSpec,
    SceneValidationError,
    SimulationUnstableError,
    load_scene_document,
    make_controls,
    scene_from_dict,
    trajectory_rows,
    validate_scene,
    wrap_angle,
    TRAJECTORY_CSV_HEADER,
)
from .fine_model import PhysicsParams, fine_rollout
from .mpc import (
    EPISODE_CSV_HEADER,
    MPCConfig,
    SUMMARY_CSV_HEADER,
    episode_rows_csv,
    run_benchmark,
    summary_rows_csv,
)
from .optimizer import CostWeights, OptimizerConfig
from .parareal import (
    PararealConfig,
    convergence_report,
    make_rollout,
    parareal_predict,
    parse_model,
    predicted_speedup,
    warm_pool,
)
from .scenes import (
    CANONICAL_PUSHES,
    benchmark_scenes,
    canonical_controls,
    canonical_scene,
    fixture_physics,
    openloop_controls,
    openloop_offsets,
    openloop_scene,
)

CONVERGE_CSV_HEADER = "k,trans_rms,rot_rms,vel_rms,angvel_rms"
BENCH_CSV_HEADER = "model,mean_seconds,ci95_low,ci95_high,measured_speedup,predicted_speedup"
OPENLOOP_CSV_HEADER = "model,mean_trans_diff_mm,mean_rot_diff_deg"

# Reference dispersion of repeated real-world pushes, quoted from the
# published dataset the open-loop errors are compared against.
PUSH_DATASET_TRANS_STD_MM = 8.10
PUSH_DATASET_ROT_STD_DEG = 4.20


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(header.split(","))
        w.writerows(rows)


def _write_manifest(out_dir: Path, command: str, args: argparse.Namespace, argv) -> None:
    manifest = {
        "command": command,
        "scene": getattr(args, "scene", None),
        "overrides": {
            k: v for k, v in sorted(vars(args).items()) if k not in ("command",)
        },
        "seed": getattr(args, "seed", None),
        "out_dir": str(out_dir),
        "argv": list(argv),
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    with open(out_dir / f"{command}_manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True, default=str)
        f.write("\n")


def _load_setup(args) -> tuple[SceneSpec, PhysicsParams, CoarseParams, dict]:
    """Scene plus per-module config sections from a scene document or a fixture."""
    if getattr(args, "scene", None):
        doc = load_scene_document(args.scene)
        scene = validate_scene(scene_from_dict(doc))
    elif getattr(args, "push", None):
        doc = {}
        scene = canonical_scene(args.push)
    else:
        raise _UsageError("either --scene or --push is required")
    if doc:
        params = PhysicsParams.for_scene(scene, **doc.get("physics", {}))
    else:
        params = fixture_physics(scene)
    coarse = CoarseParams.from_dict(doc.get("coarse", {}))
    return scene, params, coarse, doc


def _parse_controls(args) -> tuple:
    if args.controls:
        vels = json.loads(args.controls)
        if not isinstance(vels, list) or not all(len(v) == 2 for v in vels):
            raise _UsageError("--controls must be a JSON list of [vx, vy] pairs")
        return make_controls(vels, args.dt)
    return canonical_controls(duration=args.dt)


# ---------------------------------------------------------------------------
# Experiment runners (importable; the argparse layer stays thin)

def run_rollout_cmd(scene, params, coarse, model: str, controls, workers=None):
    kind, k = parse_model(model)
    rollout = make_rollout(model, params, coarse, scene, workers=workers)
    return rollout(scene.start_state, controls)


def run_convergence_cmd(push_or_scene, params=None, coarse=None, workers=None):
    """Per-iteration error rows `k,trans_rms,...` for one canonical push."""
    if isinstance(push_or_scene, str):
        scene = canonical_scene(push_or_scene)
        params = fixture_physics(scene)
        coarse = CoarseParams()
    else:
        scene = push_or_scene
    controls = canonical_controls()
    report = convergence_report(
        scene.start_state, controls, len(controls), params, coarse, scene,
        config=PararealConfig(workers=workers),
    )
    return [
        [str(k), repr(e.trans_rms), repr(e.rot_rms), repr(e.vel_rms), repr(e.angvel_rms)]
        for k, e in report
    ]


def measure_costs(scene, params, coarse, controls, repetitions: int) -> tuple[float, float]:
    """Measured per-control-step costs (c_c, c_f) in seconds."""
    state0 = scene.start_state
    n = len(controls)
    t0 = time.perf_counter()
    for _ in range(repetitions):
        coarse_rollout(state0, controls, coarse, scene)
    c_c = (time.perf_counter() - t0) / (repetitions * n)
    t0 = time.perf_counter()
    for _ in range(repetitions):
        fine_rollout(state0, controls, params, scene)
    c_f = (time.perf_counter() - t0) / (repetitions * n)
    return c_c, c_f


def run_bench_cmd(scene, params, coarse, k_list, controls, repetitions, workers):
    """Timing rows for fine, coarse, and parareal:K models."""
    state0 = scene.start_state
    n = len(controls)
    warm_pool(workers or n)
    c_c, c_f = measure_costs(scene, params, coarse, controls, max(5, repetitions // 10))

    def timed(fn):
        samples = []
        fn()  # warm-up, excluded
        for _ in range(repetitions):
            t0 = time.perf_counter()
            fn()
            samples.append(time.perf_counter() - t0)
        m = statistics.mean(samples)
        sd = statistics.pstdev(samples) if len(samples) > 1 else 0.0
        half = 1.96 * sd / math.sqrt(len(samples))
        return m, m - half, m + half

    rows = []
    fine_mean, flo, fhi = timed(lambda: fine_rollout(state0, controls, params, scene))
    rows.append(("fine", fine_mean, flo, fhi, 1.0, 1.0))
    coarse_mean, clo, chi = timed(lambda: coarse_rollout(state0, controls, coarse, scene))
    rows.append(("coarse", coarse_mean, clo, chi, fine_mean / coarse_mean, c_f / c_c))
    for k in k_list:
        cfg = PararealConfig(iterations=k, workers=workers)
        mean_k, lo, hi = timed(
            lambda: parareal_predict(state0, controls, cfg, params, coarse, scene)
        )
        rows.append(
            (
                f"parareal:{k}",
                mean_k,
                lo,
                hi,
                fine_mean / mean_k,
                predicted_speedup(c_c, c_f, n, k),
            )
        )
    return [[r[0]] + [repr(x) for x in r[1:]] for r in rows], (c_c, c_f)


def run_openloop_cmd(starts: int, seed: int, params=None, coarse=None, workers=None):
    """Mean final-state differences vs fine over the randomized protocol.

    100 seeded lateral pusher offsets x 3 fixed sequences by default;
    returns rows for coarse and parareal:1..N plus the real-world push
    dataset reference row.
    """
    if params is None:
        params = fixture_physics(openloop_scene())
    if coarse is None:
        coarse = CoarseParams()
    sequences = openloop_controls()
    n = len(sequences[0])
    offsets = openloop_offsets(starts, seed)
    sums_t = [0.0] * (n + 1)  # index k: iterate k (0 = coarse)
    sums_r = [0.0] * (n + 1)
    count = 0
    cfg = PararealConfig(iterations=n, workers=workers)
    for off in offsets:
        scene = openloop_scene(off)
        state0 = scene.start_state
        for controls in sequences:
            fine = fine_rollout(state0, controls, params, scene)
            fx, fy, fth = fine.states[-1].slider_pose
            result = parareal_predict(state0, controls, cfg, params, coarse, scene)
            for k, traj in enumerate(result.per_iteration):
                x, y, th = traj.states[-1].slider_pose
                sums_t[k] += math.hypot(x - fx, y - fy)
                sums_r[k] += abs(wrap_angle(th - fth))
            count += 1
    rows = []
    for k in range(n + 1):
        name = "coarse" if k == 0 else f"parareal:{k}"
        rows.append(
            [name, repr(sums_t[k] / count), repr(math.degrees(sums_r[k] / count))]
        )
    rows.append(
        ["push_dataset_std", repr(PUSH_DATASET_TRANS_STD_MM), repr(PUSH_DATASET_ROT_STD_DEG)]
    )
    return rows


# ---------------------------------------------------------------------------
# Subcommand handlers

def _cmd_validate(args, argv) -> int:
    doc = load_scene_document(args.scene)
    scene = validate_scene(scene_from_dict(doc))
    print(f"scene OK: {type(scene.slider_shape).__name__.lower()} slider, "
          f"inertia {scene.slider_inertia:.6g} kg*mm^2")
    return 0


def _cmd_rollout(args, argv) -> int:
    scene, params, coarse, doc = _load_setup(args)
    controls = _parse_controls(args)
    traj = run_rollout_cmd(scene, params, coarse, args.model, controls, workers=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "rollout.csv"
    _write_csv(path, TRAJECTORY_CSV_HEADER, trajectory_rows(traj, controls[0].duration))
    _write_manifest(out, "rollout", args, argv)
    print(f"wrote {path}")
    return 0


def _cmd_converge(args, argv) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pushes = CANONICAL_PUSHES if args.push == "all" else (args.push,)
    for push in pushes:
        if args.scene:
            scene, params, coarse, _ = _load_setup(args)
            rows = run_convergence_cmd(scene, params, coarse, workers=args.threads)
        else:
            rows = run_convergence_cmd(push, workers=args.threads)
        path = out / f"convergence_{push}.csv"
        _write_csv(path, CONVERGE_CSV_HEADER, rows)
        print(f"wrote {path}")
    _write_manifest(out, "converge", args, argv)
    return 0


def _cmd_bench(args, argv) -> int:
    cores = os.cpu_count() or 1
    n = args.horizon
    if cores < n:
        print(
            f"warning: {cores} cores < N={n}; headline speedup needs >= N cores",
            file=sys.stderr,
        )
    scene, params, coarse, _ = _load_setup(args)
    controls = canonical_controls(n=n, duration=args.dt)
    k_list = [int(x) for x in args.k_list.split(",") if x]
    rows, (c_c, c_f) = run_bench_cmd(
        scene, params, coarse, k_list, controls, args.repetitions, args.threads
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "bench.csv"
    _write_csv(path, BENCH_CSV_HEADER, rows)
    _write_manifest(out, "bench", args, argv)
    print(f"wrote {path} (c_c={c_c:.3e}s c_f={c_f:.3e}s ratio={c_c / c_f:.4f})")
    return 0


def _cmd_openloop(args, argv) -> int:
    scene, params, coarse, _ = (
        _load_setup(args) if args.scene else (None, None, None, None)
    )
    rows = run_openloop_cmd(
        args.starts, args.seed, params=params, coarse=coarse, workers=args.threads
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "openloop.csv"
    _write_csv(path, OPENLOOP_CSV_HEADER, rows)
    _write_manifest(out, "openloop", args, argv)
    print(f"wrote {path}")
    return 0


def _cmd_plan(args, argv) -> int:
    if args.scene:
        doc = load_scene_document(args.scene)
        scenes = [validate_scene(scene_from_dict(doc))]
        names = [Path(args.scene).stem]
    else:
        scenes = benchmark_scenes(args.generate, args.seed)
        names = [f"scene{i}" for i in range(len(scenes))]
        doc = {}
    if doc:
        params = PhysicsParams.for_scene(scenes[0], **doc.get("physics", {}))
    else:
        params = fixture_physics(scenes[0])
    coarse = CoarseParams.from_dict(doc.get("coarse", {}))
    weights = CostWeights.from_dict(doc.get("cost", {}))
    opt_cfg = OptimizerConfig.from_dict(doc.get("optimizer", {}))
    mpc_cfg = MPCConfig.from_dict(doc.get("mpc", {}))
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    for m in models:
        parse_model(m)
    seeds = [int(s) for s in args.seeds.split(",") if s]

    result = run_benchmark(
        scenes, models, mpc_cfg, opt_cfg, weights, params, coarse,
        seeds=seeds, scene_names=names, workers=args.threads,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "episodes.csv", EPISODE_CSV_HEADER, episode_rows_csv(result.rows))
    _write_csv(out / "summary.csv", SUMMARY_CSV_HEADER, summary_rows_csv(result.summaries))
    for (name, model, seed), ep in result.episodes.items():
        tag = model.replace(":", "")
        log_path = out / f"episode_{name}_{tag}_{seed}.csv"
        states = ep.state_log
        rows = []
        for i, s in enumerate(states):
            rows.append(
                [str(i), repr(i * mpc_cfg.control_duration)]
                + [repr(v) for v in (*s.pusher_pos, *s.slider_pose, *s.pusher_vel, *s.slider_vel)]
            )
        _write_csv(log_path, TRAJECTORY_CSV_HEADER, rows)
    _write_manifest(out, "plan", args, argv)
    print(f"wrote {out / 'summary.csv'} ({len(result.rows)} episodes)")
    return 0


def build_parser() -> _Parser:
    p = _Parser(prog="parapush", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scene_required=False, push_choice=False):
        sp.add_argument("--scene", required=scene_required, help="scene JSON path")
        if push_choice:
            sp.add_argument(
                "--push",
                choices=CANONICAL_PUSHES + ("all",),
                help="canonical push fixture (alternative to --scene)",
            )
        sp.add_argument("--seed", type=int, default=0, help="RNG seed")
        sp.add_argument("--threads", type=int, default=None, help="worker budget")
        sp.add_argument("--out", default="out", help="output directory")

    sp = sub.add_parser("validate", help="validate a scene file")
    sp.add_argument("--scene", required=True)
    sp.set_defaults(func=_cmd_validate)

    sp = sub.add_parser("rollout", help="roll out a control sequence under one model")
    common(sp, push_choice=True)
    sp.add_argument("--model", default="fine", help="coarse | fine | parareal:K")
    sp.add_argument("--controls", default=None, help="JSON list of [vx, vy] (mm/s)")
    sp.add_argument("--dt", type=float, default=1.0, help="control duration (s)")
    sp.set_defaults(func=_cmd_rollout)

    sp = sub.add_parser("converge", help="per-iteration error vs the fine model")
    common(sp, push_choice=True)
    sp.set_defaults(func=_cmd_converge, push="all")

    sp = sub.add_parser("bench", help="wall-clock timing of the physics models")
    common(sp, push_choice=True)
    sp.set_defaults(push="side_box")
    sp.add_argument("--k-list", default="1,2,3,4", help="parareal iteration counts")
    sp.add_argument("--horizon", type=int, default=4, help="number of controls N")
    sp.add_argument("--dt", type=float, default=1.0)
    sp.add_argument("--repetitions", type=int, default=100)
    sp.set_defaults(func=_cmd_bench)

    sp = sub.add_parser("openloop", help="open-loop error statistics vs fine")
    common(sp)
    sp.add_argument("--starts", type=int, default=100, help="random initial states")
    sp.set_defaults(func=_cmd_openloop)

    sp = sub.add_parser("plan", help="closed-loop MPC benchmark")
    common(sp)
    sp.add_argument("--generate", type=int, default=5, help="number of random scenes")
    sp.add_argument(
        "--models",
        default="coarse,parareal:1,parareal:2,parareal:3,fine",
        help="comma-separated model list",
    )
    sp.add_argument("--seeds", default="0", help="comma-separated episode seeds")
    sp.set_defaults(func=_cmd_plan)

    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    try:
        return args.func(args, argv)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (SceneValidationError, InvalidArgumentError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"validation error: {e}", file=sys.stderr)
        return 2
    except (SimulationUnstableError, OptimizationFailedError) as e:
        print(f"model error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

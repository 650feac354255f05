"""Command-line entry point: train, evaluate, rollout, toy-train.

All commands are deterministic given their flags and seed, write flat-file
outputs into --out, and drop a run manifest (config hash, seeds, versions)
sufficient to reproduce every artifact on the same build. The output root
can be redirected with the TETHERNET_OUT_ROOT environment variable.
"""

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .env import CaptureEnv
from .errors import SimulationBlowupError
from .learner import TrainConfig, load_policy, train
from .reliability import (FixedTimingPolicy, NetPolicy, compare_baseline,
                          evaluate, format_comparison)
from .sampling import DoESample, NoiseModel, sample_doe
from .scene import SceneConfig, config_hash, load_scene
from .toy import ToyClosingEnv

DEFAULT_SEED = 12345  # documented default for every command
LOCK_NAME = ".tethernet.lock"


def _resolve_out(path_str: str) -> Path:
    root = os.environ.get("TETHERNET_OUT_ROOT")
    path = Path(path_str)
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


class _OutputDir:
    """Creates the output directory and holds an exclusive lock file."""

    def __init__(self, path_str: str):
        self.path = _resolve_out(path_str)

    def __enter__(self) -> Path:
        self.path.mkdir(parents=True, exist_ok=True)
        self.lock = self.path / LOCK_NAME
        try:
            fd = os.open(self.lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            os.close(fd)
        except FileExistsError:
            raise SystemExit(
                f"error: {self.path} is locked by another run "
                f"(remove {self.lock} if stale)"
            )
        return self.path

    def __exit__(self, *exc) -> None:
        self.lock.unlink(missing_ok=True)


def _write_manifest(out: Path, command: str, args: argparse.Namespace,
                    scene: SceneConfig | None, extra: dict | None = None) -> None:
    manifest = {
        "command": command,
        "flags": {k: v for k, v in vars(args).items() if k != "func"},
        "seed": args.seed,
        "scene_hash": config_hash(scene) if scene else None,
        "versions": {"tethernet": __version__, "numpy": np.__version__,
                     "python": sys.version.split()[0]},
    }
    if extra:
        manifest.update(extra)
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str))


def _noise_for(scene: SceneConfig, no_noise: bool) -> NoiseModel:
    if no_noise:
        return NoiseModel.zero()
    return NoiseModel.default() if scene.noise_enabled else NoiseModel.zero()


# ---------------------------------------------------------------------------

def cmd_train(args) -> int:
    scene = load_scene(args.scene)
    if args.control_interval:
        scene = scene.with_overrides(control_interval=args.control_interval)
    noise = _noise_for(scene, args.no_noise)
    cfg = TrainConfig(
        total_timesteps=args.steps,
        n_workers=args.workers,
        seed=args.seed,
        learning_rate=args.lr,
        n_steps=args.n_steps,
    )

    def factory(worker: int) -> CaptureEnv:
        return CaptureEnv(scene, noise=noise, seed=cfg.seed + worker)

    with _OutputDir(args.out) as out:
        scene.to_json(out / "scene.json")
        _write_manifest(out, "train", args, scene,
                        {"train_config": cfg.to_dict()})
        net, log = train(factory, cfg, stage_schedule=scene.stage_schedule(),
                         out_dir=out, log_every=args.log_every)
        print(f"trained {log['global_steps']} steps, "
              f"{len(log['episodes'])} episodes -> {out}")
    return 0


def _load_net_policy(path: str) -> NetPolicy:
    try:
        net, _ = load_policy(path)
    except (OSError, ValueError, KeyError) as exc:
        raise SystemExit(f"error: cannot load checkpoint {path}: {exc}")
    return NetPolicy(net)


def cmd_evaluate(args) -> int:
    if args.n < 1:
        raise SystemExit("error: --n must be at least 1")
    scene = load_scene(args.scene)
    noise = _noise_for(scene, args.no_noise)
    if args.baseline_close_time is not None:
        policy = FixedTimingPolicy(args.baseline_close_time)
        policy_desc = f"fixed-timing baseline (t_close={args.baseline_close_time}s)"
    else:
        if not args.policy:
            raise SystemExit("error: provide --policy or --baseline-close-time")
        policy = _load_net_policy(args.policy)
        policy_desc = f"checkpoint {args.policy}"

    with _OutputDir(args.out) as out:
        report = evaluate(policy, scene, noise=noise, n=args.n, seed=args.seed,
                          greedy=not args.sample_actions)
        report.to_json(out / "reliability_report.json")
        report.write_csv(out / "reliability_summary.csv")
        _write_manifest(out, "evaluate", args, scene,
                        {"policy": policy_desc, "success_rate": report.success_rate,
                         "mean_cqi": report.mean_cqi})
        print(f"{policy_desc}: success {report.success_rate:.3f}, "
              f"mean CQI {report.mean_cqi:.3f} over {report.n_rollouts} rollouts")
        if args.compare_success is not None and args.compare_cqi is not None:
            print(format_comparison(
                compare_baseline(report, args.compare_success, args.compare_cqi)))
    return 0 if report.success_rate >= args.min_success else 1


def cmd_rollout(args) -> int:
    scene = load_scene(args.scene)
    noise = _noise_for(scene, args.no_noise)
    if args.baseline_close_time is not None:
        policy = FixedTimingPolicy(args.baseline_close_time)
    elif args.policy:
        policy = _load_net_policy(args.policy)
    else:
        raise SystemExit("error: provide --policy or --baseline-close-time")

    rng = np.random.default_rng(args.seed)
    orientation = tuple(float(x) for x in args.orientation.split(","))
    angvel = tuple(float(x) for x in args.angular_velocity.split(","))
    if args.distance is not None:
        doe = DoESample(args.distance, orientation, angvel, seed=args.seed)
    else:
        doe = sample_doe(rng, seed=args.seed)

    with _OutputDir(args.out) as out:
        record_path = out / args.record
        env = CaptureEnv(scene, noise=noise, seed=args.seed)
        obs = env.reset(doe=doe, seed=args.seed)
        status = 0
        steps = 0
        with open(record_path, "w") as traj:
            def record():
                traj.write(json.dumps(env.world.to_record()) + "\n")

            record()
            try:
                while True:
                    act = policy.action(obs, greedy=True)
                    obs, _, done, info = env.step(act)
                    steps += 1
                    if steps % args.decimate == 0 or done:
                        record()
                    if done:
                        report = info["capture_report"]
                        break
            except SimulationBlowupError as exc:
                print(f"simulation blew up at substep {exc.step_index}; "
                      f"partial trajectory kept", file=sys.stderr)
                report = None
                status = 3

        if report is not None:
            d = report.to_dict()
            if not math.isfinite(d["cqi"]):
                d["cqi"] = None
            (out / "capture_report.json").write_text(json.dumps(d, indent=2, sort_keys=True))
            print(f"rollout done: t_close={report.t_close}, "
                  f"locked {report.n_locked}/12, CQI "
                  f"{report.cqi if math.isfinite(report.cqi) else 'inf'}")
        _write_manifest(out, "rollout", args, scene, {"doe": doe.to_dict()})
    return status


def cmd_toy_train(args) -> int:
    cfg = TrainConfig(total_timesteps=args.steps, n_workers=args.workers,
                      seed=args.seed, learning_rate=args.lr)
    with _OutputDir(args.out) as out:
        _write_manifest(out, "toy-train", args, None,
                        {"train_config": cfg.to_dict()})
        net, log = train(lambda i: ToyClosingEnv(seed=cfg.seed + i), cfg,
                         out_dir=out, log_every=args.log_every)
        returns = [e["episode_return"] for e in log["episodes"][-50:]]
        print(f"toy training done: last-50 mean return "
              f"{sum(returns) / len(returns):.3f} -> {out}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tethernet",
        description="Tether-net capture simulator, PPO trainer, and reliability evaluator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                       help=f"RNG seed (default {DEFAULT_SEED})")
        p.add_argument("--out", default="runs/out", help="output directory")
        p.add_argument("--scene", default="full",
                       help="'full', 'desk', or a scene JSON path")
        p.add_argument("--no-noise", action="store_true",
                       help="disable all observation/actuation noise")

    p = sub.add_parser("train", help="train the closing policy with PPO")
    common(p)
    p.add_argument("--workers", type=int, default=30)
    p.add_argument("--steps", type=int, default=1_500_000)
    p.add_argument("--lr", type=float, default=2.5e-4)
    p.add_argument("--n-steps", type=int, default=128)
    p.add_argument("--control-interval", type=float, default=None)
    p.add_argument("--log-every", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="Monte Carlo reliability evaluation")
    common(p)
    p.add_argument("--policy", help="checkpoint .npz path")
    p.add_argument("--baseline-close-time", type=float, default=None,
                   help="evaluate the scripted fixed-timing baseline instead")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--sample-actions", action="store_true",
                   help="sample the policy instead of acting greedily")
    p.add_argument("--min-success", type=float, default=0.0,
                   help="exit nonzero when success rate falls below this")
    p.add_argument("--compare-success", type=float, default=None)
    p.add_argument("--compare-cqi", type=float, default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("rollout", help="run one episode and export the trajectory")
    common(p)
    p.add_argument("--policy")
    p.add_argument("--baseline-close-time", type=float, default=None)
    p.add_argument("--distance", type=float, default=None,
                   help="target distance (omit to sample the DoE)")
    p.add_argument("--orientation", default="0,0,0")
    p.add_argument("--angular-velocity", default="0,0,0")
    p.add_argument("--record", default="trajectory.jsonl")
    p.add_argument("--decimate", type=int, default=10,
                   help="record every Nth control step")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("toy-train", help="PPO sanity run on the toy timing task")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", default="runs/toy")
    p.add_argument("--steps", type=int, default=50_000)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--lr", type=float, default=2.5e-4)
    p.add_argument("--log-every", type=int, default=0)
    p.set_defaults(func=cmd_toy_train)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

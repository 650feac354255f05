"""Monte Carlo reliability evaluation of a closing policy.

Runs independent capture episodes with per-episode resampled initial
conditions and live observation noise, aggregates per-rollout capture
reports into a success rate and mean quality index, and can tabulate the
result against a fixed-timing baseline. Rollouts that never close (or blow
up numerically) count as failures with an infinite quality index.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import CaptureEnv
from .errors import SimulationBlowupError
from .metrics import SECURE_CQI_THRESHOLD, CaptureReport
from .sampling import NoiseModel
from .scene import SceneConfig, config_hash


@dataclass
class ReliabilityReport:
    n_rollouts: int
    success_rate: float
    mean_cqi: float          # over finite CQIs only
    n_non_closing: int
    n_blowups: int
    cqi_list: list[float]
    reports: list[CaptureReport] = field(repr=False)
    config_hash: str = ""
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "n_rollouts": self.n_rollouts,
            "success_rate": self.success_rate,
            "mean_cqi": self.mean_cqi,
            "n_non_closing": self.n_non_closing,
            "n_blowups": self.n_blowups,
            "cqi_list": [c if math.isfinite(c) else None for c in self.cqi_list],
            "reports": [r.to_dict() for r in self.reports],
            "config_hash": self.config_hash,
            "seed": self.seed,
        }

    def to_json(self, path) -> None:
        d = self.to_dict()
        for r in d["reports"]:
            if not math.isfinite(r["cqi"]):
                r["cqi"] = None
        Path(path).write_text(json.dumps(d, indent=2, sort_keys=True))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["rollout", "seed", "cqi", "n_locked", "t_close", "success"])
            for i, r in enumerate(self.reports):
                writer.writerow([
                    i, r.episode_seed,
                    repr(r.cqi) if math.isfinite(r.cqi) else "inf",
                    r.n_locked,
                    repr(r.t_close) if r.t_close is not None else "",
                    int(r.success),
                ])


class NetPolicy:
    """Adapter from a trained actor-critic network to the policy protocol."""

    def __init__(self, net):
        self.net = net

    def action(self, obs: np.ndarray, rng=None, greedy: bool = True) -> int:
        if greedy or rng is None:
            return int(self.net.act_greedy(obs[None])[0])
        actions, _, _ = self.net.act(obs[None], rng)
        return int(actions[0])


class FixedTimingPolicy:
    """Scripted baseline: fire the close action at a fixed episode time."""

    def __init__(self, close_time: float):
        self.close_time = close_time

    def action(self, obs: np.ndarray, rng=None, greedy: bool = True) -> int:
        t = (float(obs[0]) + 1.0) * 0.5 * 120.0  # invert the time channel
        return 1 if t >= self.close_time else 0


def _as_policy(policy):
    if hasattr(policy, "action"):
        return policy
    class _Callable:
        def action(self, obs, rng=None, greedy=True, _fn=policy):
            return int(_fn(obs))
    return _Callable()


def run_episode(policy, env: CaptureEnv, seed: int, doe=None,
                greedy: bool = True) -> CaptureReport:
    """One rollout; a numerical blowup yields a failed report, not an error."""
    policy = _as_policy(policy)
    action_rng = None if greedy else np.random.default_rng(seed ^ 0x5EED)
    obs = env.reset(doe=doe, seed=seed)
    try:
        while True:
            act = policy.action(obs, rng=action_rng, greedy=greedy)
            obs, _, done, info = env.step(act)
            if done:
                return info["capture_report"]
    except SimulationBlowupError:
        return CaptureReport(
            cqi=math.inf, n_locked=env.world.n_locked,
            t_close=env.world.closing_time, success=False,
            episode_seed=seed, doe=env.doe,
        )


def episode_seeds(master_seed: int, n: int) -> list[int]:
    """Deterministic per-rollout seeds derived from one master seed."""
    return [int(s) for s in np.random.SeedSequence(master_seed).generate_state(n)]


def evaluate(policy, scene: SceneConfig | None = None,
             noise: NoiseModel | None = None, n: int = 100, seed: int = 0,
             greedy: bool = True, seeds: list[int] | None = None,
             episode_runner=None) -> ReliabilityReport:
    """Monte Carlo success estimate over n independent episodes.

    Initial conditions are resampled per episode from the DoE ranges (driven
    by the per-episode seed), noise stays active, and the policy acts greedily
    unless greedy=False. episode_runner(policy, seed) can replace the physics
    rollout (used by the estimator self-tests).
    """
    if n < 1:
        raise ValueError("need at least one rollout")
    scene = scene or SceneConfig.full_scale()
    if seeds is None:
        seeds = episode_seeds(seed, n)
    elif len(seeds) != n:
        raise ValueError("len(seeds) must equal n")

    if episode_runner is None:
        env = CaptureEnv(scene, noise=noise, seed=seed)
        runner = lambda pol, ep_seed: run_episode(pol, env, ep_seed, greedy=greedy)
    else:
        runner = episode_runner

    reports = [runner(policy, s) for s in seeds]
    cqi_list = [r.cqi for r in reports]
    finite = [c for c in cqi_list if math.isfinite(c)]
    n_success = sum(1 for c in cqi_list if c < SECURE_CQI_THRESHOLD)
    return ReliabilityReport(
        n_rollouts=n,
        success_rate=n_success / n,
        mean_cqi=float(np.mean(finite)) if finite else math.inf,
        n_non_closing=sum(1 for r in reports if r.t_close is None),
        n_blowups=sum(1 for r in reports if not math.isfinite(r.cqi) and r.t_close is not None),
        cqi_list=cqi_list,
        reports=reports,
        config_hash=config_hash(scene),
        seed=seed,
    )


def compare_baseline(report: ReliabilityReport, baseline_success: float,
                     baseline_cqi: float) -> dict:
    """Success/quality deltas of the evaluated policy against a baseline."""
    return {
        "policy_success": report.success_rate,
        "baseline_success": baseline_success,
        "success_delta": report.success_rate - baseline_success,
        "policy_mean_cqi": report.mean_cqi,
        "baseline_mean_cqi": baseline_cqi,
        "cqi_delta": report.mean_cqi - baseline_cqi,
    }


def format_comparison(cmp: dict) -> str:
    lines = [
        f"{'':16s}{'success':>10s}{'mean CQI':>10s}",
        f"{'policy':16s}{cmp['policy_success']:>10.3f}{cmp['policy_mean_cqi']:>10.3f}",
        f"{'baseline':16s}{cmp['baseline_success']:>10.3f}{cmp['baseline_mean_cqi']:>10.3f}",
        f"{'delta':16s}{cmp['success_delta']:>+10.3f}{cmp['cqi_delta']:>+10.3f}",
    ]
    return "\n".join(lines)

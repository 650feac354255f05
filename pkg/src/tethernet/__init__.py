"""Tether-net debris capture: dynamics, capture metrics, the closing MDP,
PPO training, and Monte Carlo reliability evaluation."""

__version__ = "0.1.0"

from .dynamics import (NetTopology, TargetSpec, WorldParams, WorldState,
                       build_world, contact_force, square_net)
from .env import (CaptureEnv, Observation, RewardCoefficients, end_reward,
                  make_stage_schedule, premature_closing, stage_coefficients,
                  step_reward)
from .hull import hull_measures
from .learner import (RolloutBuffer, TrainConfig, compute_gae, load_policy,
                      ppo_update, save_policy, train)
from .metrics import (CaptureReport, NetGeometrySnapshot, capture_report,
                      compute_cqi, net_snapshot)
from .mlp import ActorCriticMLP, Adam
from .reliability import (FixedTimingPolicy, NetPolicy, ReliabilityReport,
                          compare_baseline, evaluate)
from .sampling import DoESample, NoiseModel, sample_doe
from .scene import SceneConfig, config_hash, load_scene
from .toy import ToyClosingEnv

__all__ = [
    "ActorCriticMLP", "Adam", "CaptureEnv", "CaptureReport", "DoESample",
    "FixedTimingPolicy", "NetPolicy", "NetGeometrySnapshot", "NetTopology", "NoiseModel",
    "Observation", "ReliabilityReport", "RewardCoefficients", "RolloutBuffer",
    "SceneConfig", "TargetSpec", "ToyClosingEnv", "TrainConfig", "WorldParams",
    "WorldState", "build_world", "capture_report", "compare_baseline",
    "compute_cqi", "compute_gae", "config_hash", "contact_force", "end_reward",
    "evaluate", "hull_measures", "load_policy", "load_scene", "make_stage_schedule", "net_snapshot",
    "ppo_update", "premature_closing", "sample_doe", "save_policy",
    "square_net", "stage_coefficients", "step_reward", "train",
]

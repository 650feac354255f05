"""The capture MDP: episode lifecycle, noisy 26-channel observation, boolean
closing action, shaped per-step and end-of-episode rewards, and the staged
reward-coefficient schedule.

Reward structure per episode: a shaped per-step reward runs from launch until
the closing step (a closing judged premature gets a timing penalty instead);
after closing, steps pay zero while the net settles; the end-of-episode bonus
is added to the terminal step. Episodes that never close end at the horizon
with a stage-dependent penalty. The logged episodic metric is the summed
reward divided by the step count.
"""

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import build_world
from .errors import ConfigurationError, EpisodeCompleteError
from .metrics import NetGeometrySnapshot, capture_report, net_snapshot
from .sampling import DoESample, NoiseModel, sample_doe
from .scene import SceneConfig

OBS_DIM = 26

# Observation channel boundaries (low, high) in flattening order:
# time, target position, target orientation, target angular velocity,
# 4 corner-mass positions, closure flag, launch velocity.
_TWO_PI = 2.0 * math.pi
OBS_LOW = np.array(
    [0.0]
    + [-10.0, -10.0, 0.0]
    + [0.0, 0.0, 0.0]
    + [-1.0, -1.0, -1.0]
    + [-22.0, -22.0, 0.0] * 4
    + [0.0]
    + [1.0, 1.0, 1.0]
)
OBS_HIGH = np.array(
    [120.0]
    + [10.0, 10.0, 50.0]
    + [_TWO_PI, _TWO_PI, _TWO_PI]
    + [1.0, 1.0, 1.0]
    + [22.0, 22.0, 72.0] * 4
    + [1.0]
    + [5.0, 5.0, 10.0]
)

# Premature-closing rule constants: closing before this time while the net
# centre is farther than the first bound from the target, or the mean corner
# position farther than the second, is punished as premature.
PREMATURE_T_MAX = 15.0
PREMATURE_NET_DIST = 12.0
PREMATURE_CORNER_DIST = 10.0


@dataclass(frozen=True)
class Observation:
    """Structured (physical-unit) view of one observation."""

    time: float
    target_position: tuple
    target_orientation: tuple
    target_angular_velocity: tuple
    corner_positions: tuple  # 4 x 3
    closure_flag: bool
    launch_velocity: tuple

    def flatten(self) -> np.ndarray:
        vals = [self.time]
        vals += list(self.target_position)
        vals += list(self.target_orientation)
        vals += list(self.target_angular_velocity)
        for c in self.corner_positions:
            vals += list(c)
        vals.append(1.0 if self.closure_flag else 0.0)
        vals += list(self.launch_velocity)
        return np.asarray(vals, dtype=float)

    def normalized(self) -> np.ndarray:
        return normalize_observation(self.flatten())


def normalize_observation(raw: np.ndarray) -> np.ndarray:
    """Clamp to the channel boundaries, then scale into [-1, 1]."""
    clipped = np.clip(raw, OBS_LOW, OBS_HIGH)
    return 2.0 * (clipped - OBS_LOW) / (OBS_HIGH - OBS_LOW) - 1.0


def denormalize_observation(vec: np.ndarray) -> Observation:
    raw = OBS_LOW + (np.asarray(vec) + 1.0) * 0.5 * (OBS_HIGH - OBS_LOW)
    return Observation(
        time=float(raw[0]),
        target_position=tuple(raw[1:4]),
        target_orientation=tuple(raw[4:7]),
        target_angular_velocity=tuple(raw[7:10]),
        corner_positions=tuple(tuple(raw[10 + 3 * k:13 + 3 * k]) for k in range(4)),
        closure_flag=bool(raw[22] > 0.5),
        launch_velocity=tuple(raw[23:26]),
    )


# ---------------------------------------------------------------------------
# reward coefficients and the training-stage schedule

@dataclass(frozen=True)
class RewardCoefficients:
    w1: float
    w2: float
    w3: float
    w4: float
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    c6: float
    wp1: float
    wp2: float
    wp3: float
    wp4: float
    cp1: float
    cp2: float
    cp3: float
    cp4: float
    cp5: float
    t1: float = 15.0
    t2: float = 20.0


_UNCHANGED = dict(w1=0.025, w2=0.025, w3=0.2, w4=0.125,
                  c1=3.0, c2=3.0, c3=5.0, c4=2.0, c5=2.0, t1=15.0, t2=20.0)

# (upper step bound inclusive, w'1..4, C'1..5, C6)
_STAGE_ROWS = (
    (66_000, (0.05, 0.05, 0.4, 0.125), (3.0, 4.0, 6.0, 0.0, 50.0), 0.0),
    (300_000, (0.1, 0.1, 0.8, 0.25), (3.0, 3.0, 6.0, 0.0, 50.0), 0.0),
    (800_000, (1.0, 1.0, 8.0, 2.5), (3.0, 3.0, 6.0, 0.0, 50.0), -50.0),
    (1_500_000, (2.0, 2.0, 16.0, 5.0), (3.0, 3.0, 3.0, 2.0, 100.0), -50.0),
)


def make_stage_schedule(rows=None):
    """Build a step-count -> coefficients lookup from staged rows.

    Each row is (inclusive upper step bound, (w'1..4), (C'1..5), C6); the
    built-in table is used when rows is None. Steps beyond the last bound
    keep the final row.
    """
    table = _STAGE_ROWS if rows is None else tuple(
        (int(r[0]), tuple(r[1]), tuple(r[2]), float(r[3])) for r in rows
    )
    if not table:
        raise ConfigurationError("stage schedule needs at least one row")

    def schedule(global_step: int) -> RewardCoefficients:
        if global_step < 0:
            raise ConfigurationError("global_step must be non-negative")
        row = table[-1]
        for cand in table:
            if global_step <= cand[0]:
                row = cand
                break
        _, wp, cp, c6 = row
        return RewardCoefficients(
            **_UNCHANGED, c6=c6,
            wp1=wp[0], wp2=wp[1], wp3=wp[2], wp4=wp[3],
            cp1=cp[0], cp2=cp[1], cp3=cp[2], cp4=cp[3], cp5=cp[4],
        )

    return schedule


stage_coefficients = make_stage_schedule()


def premature_closing(f_c: bool, t_close: float, q_n_dist: float,
                      mean_corner_to_target: float) -> bool:
    """True iff the closing command fired early while the net was still far."""
    return bool(
        f_c
        and t_close < PREMATURE_T_MAX
        and (q_n_dist > PREMATURE_NET_DIST or mean_corner_to_target > PREMATURE_CORNER_DIST)
    )


def _ratio_terms(snapshot, target_spec, target_position):
    v_t = target_spec.volume
    s_t = target_spec.surface_area
    q_t = target_spec.reference_com_distance
    if not v_t > 0 or not s_t > 0 or not (q_t and q_t > 0):
        raise ConfigurationError("target reference volume/area/distance must be positive")
    q_off = float(np.linalg.norm(np.asarray(snapshot.q_n) - np.asarray(target_position)))
    return (
        abs((snapshot.v_n - v_t) / v_t),
        abs((snapshot.s_n - s_t) / s_t),
        q_off / q_t,
    )


def step_reward(snapshot: NetGeometrySnapshot, target_spec, coeffs: RewardCoefficients,
                t: float, premature: bool = False, t_close: float | None = None,
                target_position=(0.0, 0.0, 0.0)) -> float:
    """Per-step shaped reward; the premature branch is a pure timing penalty."""
    if premature:
        if t_close is None:
            raise ConfigurationError("premature branch needs t_close")
        return -((coeffs.t1 - t_close) ** 2)
    dv, ds, dq = _ratio_terms(snapshot, target_spec, target_position)
    return (
        coeffs.w1 * (coeffs.c1 - dv)
        + coeffs.w2 * (coeffs.c2 - ds)
        + coeffs.w3 * (coeffs.c3 - dq)
        + coeffs.w4 * (snapshot.n_locked - coeffs.c4)
        + 0.4 * (min(t, coeffs.t1) - 4.6)
        - (0.12 * (max(t, coeffs.t2) - coeffs.t2)) ** 2
        + coeffs.c5
    )


def end_reward(snapshot: NetGeometrySnapshot | None, target_spec,
               coeffs: RewardCoefficients, closed: bool,
               target_position=(0.0, 0.0, 0.0)) -> float:
    """End-of-episode bonus: primed-coefficient quality score if the net closed
    in time, otherwise the no-close penalty."""
    if not closed:
        return coeffs.c6
    dv, ds, dq = _ratio_terms(snapshot, target_spec, target_position)
    return (
        coeffs.wp1 * (coeffs.cp1 - dv)
        + coeffs.wp2 * (coeffs.cp2 - ds)
        + coeffs.wp3 * (coeffs.cp3 - dq)
        + coeffs.wp4 * (snapshot.n_locked - coeffs.cp4)
        + coeffs.cp5
    )


# ---------------------------------------------------------------------------

class CaptureEnv:
    """One capture episode factory with a boolean closing action.

    Each instance owns its RNG streams; instances share nothing and are safe
    to run side by side.
    """

    def __init__(self, scene: SceneConfig | None = None,
                 noise: NoiseModel | None = None,
                 coefficients: RewardCoefficients | None = None,
                 seed: int = 0):
        self.scene = scene or SceneConfig.full_scale()
        if noise is not None:
            self.noise = noise
        else:
            self.noise = NoiseModel.default() if self.scene.noise_enabled else NoiseModel.zero()
        self.coeffs = coefficients or stage_coefficients(0)
        self._topology = self.scene.topology()
        self._target_spec = self.scene.target_spec()
        self._params = self.scene.world_params()
        self._substeps = self.scene.substeps_per_control
        self._stream = np.random.default_rng(seed)
        self.world = None
        self._done = True

    @property
    def observation_dim(self) -> int:
        return OBS_DIM

    @property
    def n_actions(self) -> int:
        return 2

    def set_reward_coefficients(self, coeffs: RewardCoefficients) -> None:
        self.coeffs = coeffs

    # --- episode lifecycle -------------------------------------------------

    def reset(self, doe: DoESample | None = None, seed: int | None = None) -> np.ndarray:
        if seed is None:
            seed = int(self._stream.integers(0, 2**31 - 1))
        self._episode_seed = seed
        rng = np.random.default_rng(seed)
        if doe is None:
            doe = sample_doe(rng, seed=seed)
        self.doe = doe
        self.world = build_world(self._topology, self._target_spec, doe, self._params)

        # one-shot noise draws (fixed order: launch velocity, then target position)
        launch_cmd = np.asarray(self.scene.launch_velocity, dtype=float)
        self._launch_applied = launch_cmd + rng.normal(size=3) * self.noise.launch_velocity_sigma
        self._target_pos_offset = rng.normal(size=3) * self.noise.target_position_sigma
        self._rng = rng

        self.world.launch(self._launch_applied)
        self._done = False
        self._t_close = None
        self._premature = False
        self._n_steps = 0
        self._k = 0              # control steps taken; exact episode clock
        self._reward_sum = 0.0   # per-step shaped rewards only
        self._r_end = 0.0
        return self._observe()

    @property
    def clock(self) -> float:
        """Drift-free episode time (control steps x control interval)."""
        return self._k * self.scene.control_interval

    def step(self, action) -> tuple[np.ndarray, float, bool, dict]:
        if self._done:
            raise EpisodeCompleteError("episode is complete; call reset()")
        w = self.world
        t_now = self.clock
        act = bool(action)

        reward = 0.0
        closed_before = self._t_close is not None
        if not closed_before:
            snap = net_snapshot(w)
            if act:
                self._t_close = t_now
                q_dist = float(np.linalg.norm(np.asarray(snap.q_n) - w.target_pos))
                corner_dist = float(np.linalg.norm(w.corner_positions.mean(axis=0) - w.target_pos))
                self._premature = premature_closing(True, t_now, q_dist, corner_dist)
                w.activate_closing()
                reward = step_reward(snap, w.target_spec, self.coeffs, t_now,
                                     premature=self._premature, t_close=t_now,
                                     target_position=w.target_pos)
            else:
                reward = step_reward(snap, w.target_spec, self.coeffs, t_now,
                                     target_position=w.target_pos)
            self._reward_sum += reward

        dt = self.scene.dt
        for _ in range(self._substeps):
            w.step(dt)
        self._n_steps += 1
        self._k += 1

        done = False
        r_end = 0.0
        if self._t_close is not None:
            if self.clock >= self._t_close + self.scene.settle_duration - 1e-9:
                done = True
                r_end = end_reward(net_snapshot(w), w.target_spec, self.coeffs,
                                   closed=True, target_position=w.target_pos)
        elif self.clock >= self.scene.horizon - 1e-9:
            done = True
            r_end = end_reward(None, w.target_spec, self.coeffs, closed=False)

        info = {
            "time": self.clock,
            "t_close": self._t_close,
            "premature": self._premature,
            "reward_step": reward,
            "n_locked": w.n_locked,
            "true_state": self._true_state(),
        }
        if done:
            self._done = True
            self._r_end = r_end
            reward += r_end
            r_a = (self._reward_sum + r_end) / self._n_steps
            report = capture_report(w, self._episode_seed, self.doe,
                                    t_close=self._t_close)
            info["r_end"] = r_end
            info["R_A"] = r_a
            info["capture_report"] = report
            info["episode"] = {
                "n_steps": self._n_steps,
                "R_A": r_a,
                "return": self._reward_sum + r_end,
                "t_close": self._t_close,
                "cqi": report.cqi,
            }
        return self._observe(), reward, done, info

    # --- observation ---------------------------------------------------------

    def observe(self) -> np.ndarray:
        """Fresh noisy observation of the current state (step-wise noise
        channels are resampled on every call)."""
        return self._observe()

    def _true_state(self) -> dict:
        w = self.world
        return {
            "time": self.clock,
            "target_position": w.target_pos.copy(),
            "target_orientation": w.target_euler(),
            "target_angular_velocity": w.target_omega.copy(),
            "corner_positions": w.corner_positions.copy(),
            "closure_flag": self._t_close is not None,
            "launch_velocity": self._launch_applied.copy(),
        }

    def _observe(self) -> np.ndarray:
        w = self.world
        noise = self.noise
        rng = self._rng
        # step-wise draws, fixed order: orientation, angular velocity, corners
        euler = w.target_euler() + rng.normal(size=3) * noise.orientation_sigma
        omega = w.target_omega + rng.normal(size=3) * noise.angular_velocity_sigma
        corners = w.corner_positions + rng.normal(size=(4, 3)) * noise.corner_position_sigma
        obs = Observation(
            time=self.clock,
            target_position=tuple(w.target_pos + self._target_pos_offset),
            target_orientation=tuple(euler),
            target_angular_velocity=tuple(omega),
            corner_positions=tuple(tuple(row) for row in corners),
            closure_flag=self._t_close is not None,
            launch_velocity=tuple(self._launch_applied),
        )
        self.last_observation = obs
        return obs.normalized()

"""A 1-D closing-timing toy task with a known analytic optimum.

The agent watches a clock and must fire a one-shot close action: firing at
step k scores 1 - ((k - K_OPT) / SCORE_WIDTH)^2 (floored), never firing pays
a larger penalty. The optimum is firing exactly at K_OPT for a return of 1.
Used as the PPO sanity benchmark and by the `toy-train` CLI command.
"""

import numpy as np

from .errors import EpisodeCompleteError

HORIZON = 25
K_OPT = 10
SCORE_WIDTH = 6.0
SCORE_FLOOR = -1.0
NO_CLOSE_PENALTY = -2.0
OPTIMAL_RETURN = 1.0


def close_score(k: int) -> float:
    return max(1.0 - ((k - K_OPT) / SCORE_WIDTH) ** 2, SCORE_FLOOR)


class ToyClosingEnv:
    """Deterministic timing game; observation is the normalised clock."""

    observation_dim = 1
    n_actions = 2

    def __init__(self, seed: int = 0):
        self._seed = seed  # interface symmetry; the dynamics are deterministic
        self._done = True
        self._t = 0

    def reset(self, seed: int | None = None) -> np.ndarray:
        self._t = 0
        self._done = False
        return self._obs()

    def step(self, action):
        if self._done:
            raise EpisodeCompleteError("episode is complete; call reset()")
        reward = 0.0
        done = False
        if action:
            reward = close_score(self._t)
            done = True
        elif self._t + 1 >= HORIZON:
            reward = NO_CLOSE_PENALTY
            done = True
        self._t += 1
        info = {}
        if done:
            self._done = True
            info["episode"] = {
                "n_steps": self._t,
                "return": reward,
                "R_A": reward / self._t,
                "t_close": self._t - 1 if action else None,
            }
        return self._obs(), reward, done, info

    def _obs(self) -> np.ndarray:
        return np.array([2.0 * self._t / HORIZON - 1.0])

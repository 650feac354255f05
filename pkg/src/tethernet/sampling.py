"""Episode initial-condition sampling and observation noise levels.

The design-of-experiments ranges cover the target's distance to the chaser,
initial orientation, and initial spin. Noise sigmas are half the published
2-sigma error margins; orientation/spin/corner channels are resampled every
observation, target-position and launch-velocity channels once per episode.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

DISTANCE_RANGE = (25.0, 35.0)
ORIENTATION_LOW = (0.0, 0.0, 0.0)
ORIENTATION_HIGH = (np.pi / 2.0, 0.0, 0.0)
ANGVEL_LOW = (0.0, -np.pi / 18.0, -np.pi / 18.0)
ANGVEL_HIGH = (0.0, np.pi / 18.0, np.pi / 18.0)


@dataclass(frozen=True)
class DoESample:
    """One sampled initial state for the target."""

    distance: float
    orientation: tuple[float, float, float]
    angular_velocity: tuple[float, float, float]
    seed: int = 0

    def validate(self) -> None:
        lo, hi = DISTANCE_RANGE
        if not lo <= self.distance <= hi:
            raise ConfigurationError(
                f"target distance {self.distance} m outside [{lo}, {hi}] m"
            )
        for k in range(3):
            if not ORIENTATION_LOW[k] - 1e-12 <= self.orientation[k] <= ORIENTATION_HIGH[k] + 1e-12:
                raise ConfigurationError(
                    f"orientation component {k} = {self.orientation[k]} outside DoE range"
                )
            if not ANGVEL_LOW[k] - 1e-12 <= self.angular_velocity[k] <= ANGVEL_HIGH[k] + 1e-12:
                raise ConfigurationError(
                    f"angular velocity component {k} = {self.angular_velocity[k]} outside DoE range"
                )

    def to_dict(self) -> dict:
        return {
            "distance": self.distance,
            "orientation": list(self.orientation),
            "angular_velocity": list(self.angular_velocity),
            "seed": self.seed,
        }


def sample_doe(rng: np.random.Generator, seed: int = 0) -> DoESample:
    """Draw one uniform sample from the DoE ranges."""
    distance = float(rng.uniform(*DISTANCE_RANGE))
    orientation = tuple(
        float(rng.uniform(ORIENTATION_LOW[k], ORIENTATION_HIGH[k])) for k in range(3)
    )
    angvel = tuple(
        float(rng.uniform(ANGVEL_LOW[k], ANGVEL_HIGH[k])) for k in range(3)
    )
    return DoESample(distance, orientation, angvel, seed=seed)


@dataclass(frozen=True)
class NoiseModel:
    """Per-channel Gaussian sigmas for observation/actuation uncertainty."""

    # resampled at every observation
    orientation_sigma: tuple[float, float, float]
    angular_velocity_sigma: tuple[float, float, float]
    corner_position_sigma: tuple[float, float, float]
    # sampled once per episode
    target_position_sigma: tuple[float, float, float]
    launch_velocity_sigma: tuple[float, float, float]

    @classmethod
    def default(cls) -> "NoiseModel":
        # sigma = half the 2-sigma error margins
        return cls(
            orientation_sigma=(np.pi / 72.0,) * 3,
            angular_velocity_sigma=(np.pi / 72.0,) * 3,
            corner_position_sigma=(0.05, 0.05, 0.125),
            target_position_sigma=(0.05, 0.05, 0.125),
            launch_velocity_sigma=(0.025, 0.025, 0.05),
        )

    @classmethod
    def zero(cls) -> "NoiseModel":
        z = (0.0, 0.0, 0.0)
        return cls(z, z, z, z, z)

"""Geometric capture metrics: net hull volume/area, centre of mass, lock count,
and the capture-quality index used for reward shaping and success evaluation.

The quality index sums four dimensionless mismatch terms between the settled
net and the target: volume ratio error, surface-area ratio error, normalised
centre-of-mass offset, and the locked-pair deficit. Lower is better; below
2.0 counts as a secure capture.
"""

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import WorldState, TargetSpec
from .hull import hull_measures
from .sampling import DoESample

SECURE_CQI_THRESHOLD = 2.0
N_DRAWSTRING_PAIRS = 12


@dataclass(frozen=True)
class NetGeometrySnapshot:
    """Instantaneous geometry of the flying net (nodes + corner masses)."""

    v_n: float            # enclosed (convex hull) volume, m^3
    s_n: float            # hull surface area, m^2
    q_n: tuple[float, float, float]  # mass-weighted centre of mass, chaser frame
    n_locked: int
    time: float


@dataclass(frozen=True)
class CaptureReport:
    """Outcome of one rollout."""

    cqi: float
    n_locked: int
    t_close: float | None
    success: bool
    episode_seed: int
    doe: DoESample

    def to_dict(self) -> dict:
        return {
            "cqi": self.cqi,
            "n_locked": self.n_locked,
            "t_close": self.t_close,
            "success": self.success,
            "episode_seed": self.episode_seed,
            "doe": self.doe.to_dict(),
        }


def net_snapshot(world: WorldState) -> NetGeometrySnapshot:
    """Hull volume/area, mass-weighted CoM, and lock count of the net."""
    pts = np.vstack([world.net_positions, world.corner_positions])
    masses = world.mass[:world.n_net + 4]
    q_n = (pts * masses[:, None]).sum(axis=0) / masses.sum()
    v_n, s_n = hull_measures(pts)
    return NetGeometrySnapshot(
        v_n=v_n,
        s_n=s_n,
        q_n=(float(q_n[0]), float(q_n[1]), float(q_n[2])),
        n_locked=world.n_locked,
        time=world.time,
    )


def cqi_from_terms(v_n: float, s_n: float, q_offset: float, n_locked: int,
                   target: TargetSpec) -> float:
    """Quality index from raw geometry terms. Requires target references set."""
    q_t = target.reference_com_distance
    if not target.volume > 0 or not target.surface_area > 0 or not (q_t and q_t > 0):
        raise ValueError("target reference volume/area/distance must be positive")
    return (
        abs((v_n - target.volume) / target.volume)
        + abs((s_n - target.surface_area) / target.surface_area)
        + q_offset / q_t
        + (N_DRAWSTRING_PAIRS - n_locked) / N_DRAWSTRING_PAIRS
    )


def compute_cqi(world_at_settle: WorldState, target_spec: TargetSpec | None = None) -> float:
    """Capture quality index at the post-closing settle epoch.

    Returns +inf when the closing mechanism never fired (no capture attempt).
    """
    if world_at_settle.closing_time is None:
        return math.inf
    spec = target_spec if target_spec is not None else world_at_settle.target_spec
    snap = net_snapshot(world_at_settle)
    offset = float(np.linalg.norm(np.asarray(snap.q_n) - world_at_settle.target_pos))
    return cqi_from_terms(snap.v_n, snap.s_n, offset, snap.n_locked, spec)


def capture_report(world_at_settle: WorldState, episode_seed: int,
                   doe: DoESample, t_close: float | None = None) -> CaptureReport:
    cqi = compute_cqi(world_at_settle)
    if t_close is None:
        t_close = world_at_settle.closing_time
    return CaptureReport(
        cqi=cqi,
        n_locked=world_at_settle.n_locked,
        t_close=t_close,
        success=bool(cqi < SECURE_CQI_THRESHOLD),
        episode_seed=episode_seed,
        doe=doe,
    )

import math

import numpy as np
import pytest

from oracles import mc_volume
from tethernet.dynamics import TargetSpec, WorldParams, build_world, square_net
from tethernet.metrics import (capture_report, compute_cqi, cqi_from_terms,
                               net_snapshot)
from tethernet.sampling import DoESample

NOMINAL = DoESample(30.0, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))


def tiny_world():
    topo = square_net(3, side_length=2.0, net_mass=9.0)
    return build_world(topo, TargetSpec(), NOMINAL, WorldParams(max_dt=0.002))


def test_snapshot_cube_volume_area():
    w = tiny_world()
    cube = np.array([[x, y, z] for x in (0, 2) for y in (0, 2) for z in (5, 7)],
                    dtype=float)
    # 9 net nodes + 4 corner masses all placed on the 8 cube corners
    for i in range(w.n_net + 4):
        w.pos[i] = cube[i % 8]
    snap = net_snapshot(w)
    assert snap.v_n == pytest.approx(8.0, abs=1e-12)
    assert snap.s_n == pytest.approx(24.0, abs=1e-12)
    # mass-weighted mean of the placed points
    masses = w.mass[:w.n_net + 4]
    expect_q = (w.pos[:w.n_net + 4] * masses[:, None]).sum(axis=0) / masses.sum()
    assert np.allclose(snap.q_n, expect_q)
    assert snap.n_locked == 0


def test_snapshot_flat_net_zero_volume():
    w = tiny_world()  # stowed: coplanar
    snap = net_snapshot(w)
    assert snap.v_n == 0.0
    assert snap.s_n > 0.0


def test_snapshot_volume_against_monte_carlo():
    w = tiny_world()
    rng = np.random.default_rng(31)
    pts = rng.normal(size=(w.n_net + 4, 3)) * 2.0 + np.array([0, 0, 10.0])
    w.pos[:w.n_net + 4] = pts
    snap = net_snapshot(w)
    est = mc_volume(pts, 1_000_000, np.random.default_rng(5))
    assert abs(snap.v_n - est) / est < 0.01


# --- capture quality index ---------------------------------------------------

def test_cqi_perfect_wrap_is_zero():
    spec = TargetSpec(reference_com_distance=30.0)
    assert cqi_from_terms(spec.volume, spec.surface_area, 0.0, 12, spec) == 0.0


def test_cqi_double_volume_is_one():
    spec = TargetSpec(reference_com_distance=30.0)
    val = cqi_from_terms(2 * spec.volume, spec.surface_area, 0.0, 12, spec)
    assert val == pytest.approx(1.0, abs=1e-12)


def test_cqi_zero_iff_all_terms_vanish():
    spec = TargetSpec(reference_com_distance=30.0)
    v, s = spec.volume, spec.surface_area
    assert cqi_from_terms(v, s, 0.0, 12, spec) == 0.0
    assert cqi_from_terms(v * 1.01, s, 0.0, 12, spec) > 0.0
    assert cqi_from_terms(v, s * 1.01, 0.0, 12, spec) > 0.0
    assert cqi_from_terms(v, s, 0.1, 12, spec) > 0.0
    assert cqi_from_terms(v, s, 0.0, 11, spec) > 0.0


def test_cqi_scale_consistency():
    # doubling every length leaves the two normalised ratio terms unchanged
    spec1 = TargetSpec(half_extents=(2.25, 1.25, 1.25), reference_com_distance=30.0)
    spec2 = TargetSpec(half_extents=(4.5, 2.5, 2.5), reference_com_distance=60.0)
    v, s, q_off, nl = 40.0, 70.0, 3.0, 7
    a = cqi_from_terms(v, s, q_off, nl, spec1)
    b = cqi_from_terms(v * 8, s * 4, q_off * 2, nl, spec2)
    assert a == pytest.approx(b, abs=1e-12)


def test_cqi_never_closed_is_infinite():
    w = tiny_world()
    assert math.isinf(compute_cqi(w))
    rep = capture_report(w, episode_seed=1, doe=NOMINAL)
    assert not rep.success and rep.t_close is None


def test_cqi_requires_positive_references():
    spec = TargetSpec(reference_com_distance=None)
    with pytest.raises(ValueError):
        cqi_from_terms(1.0, 1.0, 0.0, 12, spec)


def test_success_threshold_is_exact():
    w = tiny_world()
    w.activate_closing()
    spec = w.target_spec
    # place the net hull exactly on the target box, all pairs locked
    h = np.asarray(spec.half_extents)
    corners = np.array([[sx * h[0], sy * h[1], sz * h[2]]
                        for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)])
    for i in range(w.n_net + 4):
        w.pos[i] = corners[i % 8] + w.target_pos
    w.locked[:] = True
    cqi = compute_cqi(w)
    # volume and area match, lock deficit zero; only the CoM offset remains
    masses = w.mass[:w.n_net + 4]
    q_n = (w.pos[:w.n_net + 4] * masses[:, None]).sum(axis=0) / masses.sum()
    assert cqi == pytest.approx(np.linalg.norm(q_n - w.target_pos) / 30.0, rel=1e-6)
    rep = capture_report(w, episode_seed=0, doe=NOMINAL)
    assert rep.success == (rep.cqi < 2.0)
    assert rep.n_locked == 12

"""Acceptance suite: one test per release criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines and measured runtimes.
"""

import math
import time

import numpy as np
import pytest

from oracles import (REWARD_ORACLE_CASES, REWARD_P_TGT, STAGE_BOUNDS,
                     STAGE_TABLE, mc_volume_area)
from tethernet.cli import main
from tethernet.dynamics import (TargetSpec, WorldParams, build_world,
                                grid_positions, square_net)
from tethernet.env import (CaptureEnv, end_reward, stage_coefficients,
                           step_reward)
from tethernet.hull import hull_measures
from tethernet.learner import TrainConfig, train
from tethernet.metrics import CaptureReport, NetGeometrySnapshot
from tethernet.reliability import evaluate
from tethernet.sampling import DoESample, NoiseModel
from tethernet.scene import SceneConfig
from tethernet.toy import OPTIMAL_RETURN, ToyClosingEnv

NOMINAL = DoESample(30.0, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))
ORACLE_TARGET = TargetSpec(half_extents=(2.25, 1.25, 1.25),
                           reference_com_distance=30.0)


def ok(num, msg):
    print(f"\nACCEPTANCE {num}: PASS  {msg}")


def test_criterion_1_reward_oracle():
    t0 = time.perf_counter()
    coeffs = {s: stage_coefficients(STAGE_BOUNDS[s][0]) for s in (1, 2, 3, 4)}

    def snap(v, s, q, nl):
        return NetGeometrySnapshot(v_n=v, s_n=s, q_n=q, n_locked=nl, time=0.0)

    for name, kind, args, expected in REWARD_ORACLE_CASES:
        if kind == "step":
            (v, s, q, nl), t, stage = args
            got = step_reward(snap(v, s, q, nl), ORACLE_TARGET, coeffs[stage], t,
                              target_position=REWARD_P_TGT)
        elif kind == "premature":
            t_close, stage = args
            got = step_reward(snap(0, 0, (0, 0, 0), 0), ORACLE_TARGET,
                              coeffs[stage], t_close, premature=True,
                              t_close=t_close, target_position=REWARD_P_TGT)
        elif kind == "end":
            (v, s, q, nl), stage = args
            got = end_reward(snap(v, s, q, nl), ORACLE_TARGET, coeffs[stage],
                             closed=True, target_position=REWARD_P_TGT)
        else:
            (stage,) = args
            got = end_reward(None, ORACLE_TARGET, coeffs[stage], closed=False)
        assert abs(got - expected) <= 1e-9, (name, got, expected)
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    ok(1, f"12 reward cases match the spreadsheet oracle to 1e-9 ({elapsed:.3f}s)")


def test_criterion_2_stage_schedule():
    probes = {
        0: 1, 66_000: 1, 66_001: 2, 300_000: 2,
        300_001: 3, 800_000: 3, 800_001: 4, 1_500_000: 4,
    }
    for step, stage in probes.items():
        c = stage_coefficients(step)
        wp, cp, c6 = STAGE_TABLE[stage]
        assert (c.wp1, c.wp2, c.wp3, c.wp4) == wp, step
        assert (c.cp1, c.cp2, c.cp3, c.cp4, c.cp5) == cp, step
        assert c.c6 == c6, step
        assert (c.w1, c.w2, c.w3, c.w4) == (0.025, 0.025, 0.2, 0.125)
        assert (c.c1, c.c2, c.c3, c.c4, c.c5) == (3.0, 3.0, 5.0, 2.0, 2.0)
        assert (c.t1, c.t2) == (15.0, 20.0)
    ok(2, "every staged coefficient cell reproduced at all 8 boundary probes")


def test_criterion_3_conservation():
    t0 = time.perf_counter()
    # full-scale free drift, anchor released: momentum to 1e-6 over 10 s
    topo = square_net(17)
    w = build_world(topo, TargetSpec(), DoESample(35.0, (0, 0, 0), (0, 0, 0)),
                    WorldParams(max_dt=0.002))
    w.release_anchor()
    w.launch((1.0, 1.0, 2.0))
    p0 = w.linear_momentum()
    for _ in range(5000):
        w.step(0.002)
    drift = np.linalg.norm(w.linear_momentum() - p0) / np.linalg.norm(p0)
    assert drift < 1e-6

    # damped ring-down: energy never increases step to step
    topo = square_net(3, side_length=2.0, net_mass=9.0, axial_stiffness=100.0,
                      damping_ratio=0.6)
    w2 = build_world(topo, TargetSpec(), DoESample(35.0, (0, 0, 0), (0, 0, 0)),
                     WorldParams(max_dt=1e-4))
    w2.release_anchor()
    full = grid_positions(3, topo.mesh_length)
    w2.pos[:w2.n_net] = full * 1.25 + np.array([0.0, 0.0, 10.0])
    w2.pos[w2.n_net:w2.n_net + 4] = w2.pos[:w2.n_net][topo.corner_indices]
    e_prev = w2.mechanical_energy()
    e0 = e_prev
    for _ in range(5000):
        w2.step(1e-4)
        e = w2.mechanical_energy()
        assert e <= e_prev + 1e-9 * abs(e_prev)
        e_prev = e
    assert e_prev < e0
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0
    ok(3, f"momentum drift {drift:.2e} over 10 s; energy monotone non-increasing "
          f"({elapsed:.1f}s)")


def test_criterion_4_force_gradient():
    rng = np.random.default_rng(17)
    topo = square_net(3, side_length=2.0, net_mass=9.0)
    w = build_world(topo, TargetSpec(), NOMINAL, WorldParams(max_dt=0.002))
    w.release_anchor()
    n_pts = len(w.pos)
    h = 1e-6
    worst = 0.0
    checked = 0
    while checked < 100:
        w.pos[:] = rng.normal(size=(n_pts, 3)) * 4.0
        d = np.linalg.norm(w.pos[w.link_j] - w.pos[w.link_i], axis=1)
        if np.abs(d - w.link_rest).min() <= 1e-3:
            continue  # too close to the tension/slack kink for clean FD
        f = w.elastic_forces()
        fd = np.zeros_like(f)
        for p in range(n_pts):
            for c in range(3):
                orig = w.pos[p, c]
                w.pos[p, c] = orig + h
                e_plus = w.elastic_potential()
                w.pos[p, c] = orig - h
                e_minus = w.elastic_potential()
                w.pos[p, c] = orig
                fd[p, c] = -(e_plus - e_minus) / (2 * h)
        err = np.linalg.norm(fd - f) / max(np.linalg.norm(fd), 1e-12)
        worst = max(worst, err)
        assert err <= 1e-4
        checked += 1
    ok(4, f"100 random configurations, worst force-vs-gradient error {worst:.2e}")


def test_criterion_5_hull_oracle():
    v, s = hull_measures(np.array(
        [[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], float))
    assert abs(v - 1.0) < 1e-12 and abs(s - 6.0) < 1e-12

    worst_v = worst_s = 0.0
    for seed in range(5):
        rng = np.random.default_rng(100 + seed)
        pts = rng.normal(size=(30, 3)) * rng.uniform(0.5, 2.0, size=3)
        hv, hs = hull_measures(pts)
        mv, ms = mc_volume_area(pts, 1_200_000, np.random.default_rng(seed))
        worst_v = max(worst_v, abs(hv - mv) / mv)
        worst_s = max(worst_s, abs(hs - ms) / ms)
        assert abs(hv - mv) / mv < 0.01
        assert abs(hs - ms) / ms < 0.01
    ok(5, f"unit cube exact; 5 clouds vs 1.2e6-sample membership oracle, "
          f"worst V err {worst_v:.3%}, S err {worst_s:.3%}")


def test_criterion_6_closing_mechanism():
    topo = square_net(17)
    w = build_world(topo, TargetSpec(), NOMINAL, WorldParams(max_dt=0.002))
    # symmetric open net at rest, mouth facing the target
    full = grid_positions(17, topo.mesh_length)
    w.pos[:w.n_net] = full + np.array([0.0, 0.0, 20.0])
    w.pos[w.n_net:w.n_net + 4] = w.pos[:w.n_net][topo.corner_indices]
    w.vel[:] = 0.0
    w.activate_closing()
    prev = 0
    t_all = None
    for _ in range(10_000):  # 20 s at 2 ms
        w.step(0.002)
        assert w.n_locked >= prev
        prev = w.n_locked
        if w.n_locked == 12:
            t_all = w.time
            break
    assert t_all is not None and t_all <= 20.0
    ok(6, f"all 12 drawstring pairs locked in {t_all:.2f}s, count non-decreasing")


def test_criterion_7_ppo_toy_sanity():
    t0 = time.perf_counter()
    results = []
    for seed in (0, 1, 2):
        cfg = TrainConfig(total_timesteps=50_000, n_workers=4, n_steps=128,
                          seed=seed)
        net, _ = train(lambda i, s=seed: ToyClosingEnv(seed=s * 100 + i), cfg)
        env = ToyClosingEnv()
        returns = []
        for _ in range(20):
            obs = env.reset()
            done = False
            total = 0.0
            while not done:
                obs, r, done, _ = env.step(int(net.act_greedy(obs[None])[0]))
                total += r
            returns.append(total)
        results.append(float(np.mean(returns)))
    elapsed = time.perf_counter() - t0
    assert elapsed < 600.0
    for mean_ret in results:
        assert mean_ret >= 0.9 * OPTIMAL_RETURN
    ok(7, f"toy PPO reached {['%.3f' % r for r in results]} of optimum 1.0 "
          f"on 3/3 seeds in {elapsed:.0f}s")


@pytest.mark.slow
def test_criterion_8_desk_scale_trend():
    t0 = time.perf_counter()
    scene = SceneConfig.desk_scale()
    cfg = TrainConfig(total_timesteps=60_000, n_workers=4, n_steps=128, seed=1)

    def factory(i):
        return CaptureEnv(scene, seed=cfg.seed + i)

    net, log = train(factory, cfg, stage_schedule=stage_coefficients)
    episodes = log["episodes"]
    assert len(episodes) >= 20
    first = np.mean([e["R_A"] for e in episodes[:10]])
    last = np.mean([e["R_A"] for e in episodes[-10:]])
    elapsed = time.perf_counter() - t0
    assert last > first, (first, last)
    ok(8, f"desk-scale 60k-step run: first-10 mean R_A {first:.2f} -> "
          f"last-10 {last:.2f} over {len(episodes)} episodes ({elapsed:.0f}s)")


def test_criterion_9_reliability_estimator():
    # (a) known-probability synthetic policy at n = 1000, 3 standard errors
    p, n = 0.7, 1000

    def runner(policy, seed):
        rng = np.random.default_rng(seed)
        good = rng.random() < p
        return CaptureReport(cqi=1.0 if good else 3.0, n_locked=12,
                             t_close=15.0, success=good, episode_seed=seed,
                             doe=NOMINAL)

    rep = evaluate(policy=None, n=n, seed=99, episode_runner=runner)
    se = math.sqrt(p * (1 - p) / n)
    assert abs(rep.success_rate - p) <= 3 * se

    # (b) fixed seed -> bit-identical reports on real physics rollouts
    from tethernet.reliability import FixedTimingPolicy
    scene = SceneConfig.desk_scale().with_overrides(nodes_per_side=5)
    pol = FixedTimingPolicy(14.0)
    r1 = evaluate(pol, scene, noise=NoiseModel.default(), n=3, seed=8)
    r2 = evaluate(pol, scene, noise=NoiseModel.default(), n=3, seed=8)
    assert r1.to_dict() == r2.to_dict()

    # (c) the reference comparison table from hard-coded inputs
    from tethernet.reliability import ReliabilityReport, compare_baseline
    ref = ReliabilityReport(n_rollouts=100, success_rate=0.94, mean_cqi=1.035,
                            n_non_closing=0, n_blowups=0, cqi_list=[],
                            reports=[], config_hash="", seed=0)
    cmp = compare_baseline(ref, 0.96, 1.010)
    assert cmp["success_delta"] == pytest.approx(-0.02)
    assert cmp["cqi_delta"] == pytest.approx(0.025)
    ok(9, f"estimated {rep.success_rate:.3f} for p=0.7 (3 SE = {3*se:.3f}); "
          f"reports bit-reproducible; comparison deltas (-0.02, +0.025)")


@pytest.mark.slow
def test_criterion_10_cli_determinism(tmp_path):
    scene_path = tmp_path / "scene.json"
    SceneConfig.desk_scale().to_json(scene_path)
    for name in ("a", "b"):
        rc = main(["train", "--scene", str(scene_path), "--workers", "2",
                   "--steps", "512", "--n-steps", "64", "--seed", "11",
                   "--out", str(tmp_path / name)])
        assert rc == 0
    log_a = (tmp_path / "a" / "train_log.csv").read_bytes()
    log_b = (tmp_path / "b" / "train_log.csv").read_bytes()
    assert log_a == log_b
    upd_a = (tmp_path / "a" / "updates.csv").read_bytes()
    assert upd_a == (tmp_path / "b" / "updates.csv").read_bytes()

    for name in ("ea", "eb"):
        rc = main(["evaluate", "--baseline-close-time", "14.0", "--n", "2",
                   "--seed", "21", "--scene", str(scene_path),
                   "--out", str(tmp_path / name)])
        assert rc == 0
    rep_a = (tmp_path / "ea" / "reliability_report.json").read_bytes()
    rep_b = (tmp_path / "eb" / "reliability_report.json").read_bytes()
    assert rep_a == rep_b
    ok(10, "two train runs byte-identical CSVs; two evaluate runs identical reports")

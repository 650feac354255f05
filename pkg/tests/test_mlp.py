import numpy as np
import pytest

from oracles import loop_forward
from tethernet.mlp import ActorCriticMLP, Adam, clip_grad_norm, log_softmax


def test_zero_weights_uniform_policy_zero_value():
    net = ActorCriticMLP(4, 2, 8, seed=0)
    for k in net.params:
        net.params[k][:] = 0.0
    obs = np.ones((3, 4))
    probs = net.distribution(obs)
    assert np.allclose(probs, 0.5)
    assert np.allclose(net.value(obs), 0.0)


def test_probabilities_sum_to_one():
    rng = np.random.default_rng(1)
    net = ActorCriticMLP(6, 2, 16, seed=3)
    obs = rng.normal(size=(50, 6))
    probs = net.distribution(obs)
    assert np.abs(probs.sum(axis=1) - 1.0).max() < 1e-12


def test_forward_matches_loop_oracle():
    rng = np.random.default_rng(4)
    net = ActorCriticMLP(5, 2, 7, seed=9)
    for _ in range(10):
        row = rng.normal(size=5)
        logits, values, _ = net.forward(row[None])
        ref_logits, ref_value = loop_forward(net.params, row)
        assert np.abs(logits[0] - ref_logits).max() < 1e-9
        assert abs(values[0] - ref_value) < 1e-9


def test_orthogonal_init_is_orthogonal():
    net = ActorCriticMLP(26, 2, 64, seed=0)
    w = net.params["w1"] / np.sqrt(2.0)
    assert np.allclose(w.T @ w, np.eye(64), atol=1e-10)


def _fd_check(net, obs, actions, old_logp, adv, ret, clip, vf, ent):
    stats, grads = net.loss_and_grads(obs, actions, old_logp, adv, ret, clip, vf, ent)

    def loss():
        s, _ = net.loss_and_grads(obs, actions, old_logp, adv, ret, clip, vf, ent)
        return s["loss"]

    h = 1e-6
    worst = 0.0
    for key in net.params:
        p = net.params[key]
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            orig = p[ix]
            p[ix] = orig + h
            lp = loss()
            p[ix] = orig - h
            lm = loss()
            p[ix] = orig
            fd = (lp - lm) / (2 * h)
            worst = max(worst, abs(fd - grads[key][ix]) / max(abs(fd), abs(grads[key][ix]), 1e-8))
    return worst


def test_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    net = ActorCriticMLP(3, 2, 5, seed=1)
    obs = rng.normal(size=(16, 3))
    actions = rng.integers(0, 2, 16)
    old_logp = np.log(0.3 + 0.4 * rng.random(16))
    adv = rng.normal(size=16)
    ret = rng.normal(size=16)
    worst = _fd_check(net, obs, actions, old_logp, adv, ret, 0.2, 0.5, 0.01)
    assert worst <= 1e-4


def test_clip_saturation_kills_policy_gradient():
    # positive advantage, ratio far above 1+eps: that sample contributes no
    # policy gradient (isolate by zeroing value/entropy terms)
    net = ActorCriticMLP(3, 2, 5, seed=2)
    obs = np.ones((1, 3))
    logits, values, _ = net.forward(obs)
    logp_now = log_softmax(logits)[0, 0]
    old_logp = np.array([logp_now - 1.0])  # ratio = e > 1.2
    stats, grads = net.loss_and_grads(obs, np.array([0]), old_logp,
                                      np.array([2.0]), values, 0.2, 0.0, 0.0)
    assert stats["clip_fraction"] == 1.0
    for key in grads:
        assert np.allclose(grads[key], 0.0)
    # negative advantage at the same ratio is NOT clipped (objective worsens)
    stats2, grads2 = net.loss_and_grads(obs, np.array([0]), old_logp,
                                        np.array([-2.0]), values, 0.2, 0.0, 0.0)
    assert stats2["clip_fraction"] == 0.0
    assert any(np.abs(g).max() > 0 for g in grads2.values())


def test_entropy_within_binary_bound():
    rng = np.random.default_rng(8)
    net = ActorCriticMLP(4, 2, 8, seed=5)
    obs = rng.normal(size=(64, 4)) * 3
    stats, _ = net.loss_and_grads(obs, rng.integers(0, 2, 64),
                                  np.full(64, np.log(0.5)), np.zeros(64),
                                  np.zeros(64), 0.2, 0.5, 0.01)
    assert 0.0 <= stats["entropy"] <= np.log(2.0) + 1e-12


def test_non_finite_loss_raises():
    net = ActorCriticMLP(3, 2, 5, seed=0)
    net.params["w0"][0, 0] = np.nan
    with pytest.raises(FloatingPointError):
        net.forward(np.ones((1, 3)))


def test_grad_norm_clipping():
    grads = {"a": np.array([3.0, 4.0]), "b": np.array([0.0])}
    raw = clip_grad_norm(grads, 0.5)
    assert raw == pytest.approx(5.0)
    total = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    assert total == pytest.approx(0.5, rel=1e-9)


def test_adam_single_step_reference():
    # one Adam step on f(x) = x^2 from x=1: m=g=2, v=g^2=4, update = lr*1
    params = {"x": np.array([1.0])}
    opt = Adam(params, lr=0.1)
    opt.step({"x": np.array([2.0])})
    assert params["x"][0] == pytest.approx(1.0 - 0.1 * (2.0 / (2.0 + 1e-8)), rel=1e-12)


def test_adam_converges_on_quadratic():
    params = {"x": np.array([5.0, -3.0])}
    opt = Adam(params, lr=0.05)
    for _ in range(2000):
        opt.step({"x": 2.0 * params["x"]})
    assert np.abs(params["x"]).max() < 1e-3

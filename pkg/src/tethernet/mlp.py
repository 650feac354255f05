"""Actor-critic multilayer perceptron with hand-rolled backprop and Adam.

Shared tanh trunk (default 2 x 64), a categorical policy head and a scalar
value head. Everything is plain numpy; gradients are exact and checked
against finite differences in the test suite.
"""

import numpy as np


def orthogonal(rng: np.random.Generator, shape: tuple[int, int], gain: float) -> np.ndarray:
    a = rng.normal(size=(max(shape), min(shape)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))  # fix the sign ambiguity
    if shape[0] < shape[1]:
        q = q.T
    return gain * q[:shape[0], :shape[1]]


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


class ActorCriticMLP:
    """Policy pi(a|s) and value V(s) sharing a two-layer tanh trunk."""

    def __init__(self, obs_dim: int, n_actions: int = 2, hidden: int = 64, seed: int = 0):
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.hidden = hidden
        rng = np.random.default_rng(seed)
        self.params = {
            "w0": orthogonal(rng, (obs_dim, hidden), np.sqrt(2.0)),
            "b0": np.zeros(hidden),
            "w1": orthogonal(rng, (hidden, hidden), np.sqrt(2.0)),
            "b1": np.zeros(hidden),
            "wp": orthogonal(rng, (hidden, n_actions), 0.01),
            "bp": np.zeros(n_actions),
            "wv": orthogonal(rng, (hidden, 1), 1.0),
            "bv": np.zeros(1),
        }

    # --- forward -------------------------------------------------------------

    def forward(self, obs: np.ndarray):
        """Returns (logits, values, cache) for a batch of observations."""
        obs = np.atleast_2d(np.asarray(obs, dtype=float))
        p = self.params
        h0 = np.tanh(obs @ p["w0"] + p["b0"])
        h1 = np.tanh(h0 @ p["w1"] + p["b1"])
        logits = h1 @ p["wp"] + p["bp"]
        values = (h1 @ p["wv"] + p["bv"])[:, 0]
        if not (np.isfinite(logits).all() and np.isfinite(values).all()):
            raise FloatingPointError("non-finite activations in policy forward pass")
        return logits, values, (obs, h0, h1)

    def distribution(self, obs: np.ndarray) -> np.ndarray:
        logits, _, _ = self.forward(obs)
        return np.exp(log_softmax(logits))

    def act(self, obs: np.ndarray, rng: np.random.Generator):
        """Sample actions; returns (actions, log_probs, values)."""
        logits, values, _ = self.forward(obs)
        logp = log_softmax(logits)
        probs = np.exp(logp)
        u = rng.random(len(probs))
        actions = (u >= probs[:, 0]).astype(np.int64)  # inverse-CDF over 2 actions
        taken = logp[np.arange(len(actions)), actions]
        return actions, taken, values

    def act_greedy(self, obs: np.ndarray) -> np.ndarray:
        logits, _, _ = self.forward(obs)
        return np.argmax(logits, axis=1)

    def value(self, obs: np.ndarray) -> np.ndarray:
        _, values, _ = self.forward(obs)
        return values

    # --- loss / gradients ------------------------------------------------------

    def loss_and_grads(self, obs, actions, old_logp, advantages, returns,
                       clip_range: float | None, value_coef: float, entropy_coef: float):
        """Clipped-surrogate PPO loss with exact analytic gradients.

        clip_range=None disables clipping (plain policy-gradient surrogate).
        Returns (stats, grads) where grads matches self.params keys.
        """
        logits, values, (obs, h0, h1) = self.forward(obs)
        n = len(actions)
        idx = np.arange(n)
        logp_all = log_softmax(logits)
        probs = np.exp(logp_all)
        logp = logp_all[idx, actions]

        ratio = np.exp(logp - old_logp)
        unclipped = ratio * advantages
        if clip_range is None:
            surr = unclipped
            use_unclipped = np.ones(n, dtype=bool)
            clip_frac = 0.0
        else:
            clipped = np.clip(ratio, 1.0 - clip_range, 1.0 + clip_range) * advantages
            surr = np.minimum(unclipped, clipped)
            use_unclipped = unclipped <= clipped
            clip_frac = float(np.mean(~use_unclipped))

        entropy = -(probs * logp_all).sum(axis=1)
        v_err = values - returns

        policy_loss = -float(surr.mean())
        value_loss = float((v_err ** 2).mean())
        entropy_mean = float(entropy.mean())
        loss = policy_loss + value_coef * value_loss - entropy_coef * entropy_mean
        if not np.isfinite(loss):
            raise FloatingPointError("non-finite loss")

        # d(loss)/d(logits): surrogate + entropy terms
        g_surr = np.where(use_unclipped, ratio * advantages, 0.0)
        one_hot = np.zeros_like(logits)
        one_hot[idx, actions] = 1.0
        dlogits = -(g_surr[:, None] * (one_hot - probs)) / n
        dlogits += entropy_coef * (probs * (logp_all + entropy[:, None])) / n
        dvalues = value_coef * 2.0 * v_err / n

        p = self.params
        grads = {}
        grads["wp"] = h1.T @ dlogits
        grads["bp"] = dlogits.sum(axis=0)
        grads["wv"] = h1.T @ dvalues[:, None]
        grads["bv"] = np.array([dvalues.sum()])
        dh1 = dlogits @ p["wp"].T + dvalues[:, None] @ p["wv"].T
        dz1 = dh1 * (1.0 - h1 * h1)
        grads["w1"] = h0.T @ dz1
        grads["b1"] = dz1.sum(axis=0)
        dh0 = dz1 @ p["w1"].T
        dz0 = dh0 * (1.0 - h0 * h0)
        grads["w0"] = obs.T @ dz0
        grads["b0"] = dz0.sum(axis=0)

        with np.errstate(divide="ignore", invalid="ignore"):
            approx_kl = float(np.mean(old_logp - logp))
        stats = {
            "loss": float(loss),
            "policy_loss": policy_loss,
            "value_loss": value_loss,
            "entropy": entropy_mean,
            "clip_fraction": clip_frac,
            "approx_kl": approx_kl,
        }
        return stats, grads


def clip_grad_norm(grads: dict, max_norm: float) -> float:
    """Scale gradients in place to a global L2 norm cap; returns the raw norm."""
    total = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for g in grads.values():
            g *= scale
    return total


class Adam:
    """First-order adaptive optimiser over a parameter dict."""

    def __init__(self, params: dict, lr: float = 2.5e-4,
                 betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict) -> None:
        self.t += 1
        b1t = 1.0 - self.b1 ** self.t
        b2t = 1.0 - self.b2 ** self.t
        for k, g in grads.items():
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * (g * g)
            m_hat = self.m[k] / b1t
            v_hat = self.v[k] / b2t
            self.params[k] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

"""PPO training: rollout collection over parallel environment instances,
generalised advantage estimation, clipped-surrogate updates, checkpointing,
and episode/update logging.

Workers are independent environment instances stepped synchronously against a
shared read-only snapshot of the policy; the update phase is exclusive. Each
collected sample is consumed by exactly one update and then discarded.
"""

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .mlp import ActorCriticMLP, Adam, clip_grad_norm
from .scene import config_hash

CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    total_timesteps: int = 1_500_000
    learning_rate: float = 2.5e-4
    gamma: float = 0.999
    clip_range: float = 0.2
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    n_workers: int = 30
    n_steps: int = 128
    gae_lambda: float = 0.95
    epochs_per_update: int = 4
    minibatches: int = 4
    hidden: int = 64
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


class RolloutBuffer:
    """Fixed-size time-major storage for one update's worth of experience."""

    def __init__(self, n_steps: int, n_workers: int, obs_dim: int):
        self.n_steps = n_steps
        self.n_workers = n_workers
        self.obs = np.zeros((n_steps, n_workers, obs_dim))
        self.actions = np.zeros((n_steps, n_workers), dtype=np.int64)
        self.log_probs = np.zeros((n_steps, n_workers))
        self.values = np.zeros((n_steps, n_workers))
        self.rewards = np.zeros((n_steps, n_workers))
        self.dones = np.zeros((n_steps, n_workers), dtype=bool)
        self.pos = 0

    @property
    def full(self) -> bool:
        return self.pos == self.n_steps

    def add(self, obs, actions, log_probs, values, rewards, dones) -> None:
        if self.full:
            raise RuntimeError("rollout buffer already full")
        t = self.pos
        self.obs[t] = obs
        self.actions[t] = actions
        self.log_probs[t] = log_probs
        self.values[t] = values
        self.rewards[t] = rewards
        self.dones[t] = dones
        self.pos += 1

    def batch(self, last_values: np.ndarray, gamma: float, lam: float) -> dict:
        """Flattened training batch with raw advantages and returns."""
        if not self.full:
            raise RuntimeError("rollout buffer not full")
        adv, ret = compute_gae(self.rewards, self.values, self.dones,
                               gamma, lam, last_values)
        return {
            "obs": self.obs.reshape(-1, self.obs.shape[-1]).copy(),
            "actions": self.actions.reshape(-1).copy(),
            "log_probs": self.log_probs.reshape(-1).copy(),
            "advantages": adv.reshape(-1),
            "returns": ret.reshape(-1),
        }

    def clear(self) -> None:
        self.pos = 0


def compute_gae(rewards, values, dones, gamma: float = 0.999, lam: float = 0.95,
                last_values=0.0):
    """Generalised advantage estimation over (T,) or (T, W) arrays.

    dones[t] marks a transition that terminated its episode; bootstrapping is
    cut there. Returns (advantages, returns) with returns = advantages + values.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    squeeze = rewards.ndim == 1
    if squeeze:
        rewards = rewards[:, None]
        values = values[:, None]
        dones = dones[:, None]
    t_len, n_w = rewards.shape
    last_values = np.broadcast_to(np.asarray(last_values, dtype=float), (n_w,))

    advantages = np.zeros_like(rewards)
    gae = np.zeros(n_w)
    for t in reversed(range(t_len)):
        next_values = last_values if t == t_len - 1 else values[t + 1]
        not_done = ~dones[t]
        delta = rewards[t] + gamma * next_values * not_done - values[t]
        gae = delta + gamma * lam * not_done * gae
        advantages[t] = gae
    returns = advantages + values
    if squeeze:
        return advantages[:, 0], returns[:, 0]
    return advantages, returns


def ppo_update(net: ActorCriticMLP, optimizer: Adam, batch: dict,
               cfg: TrainConfig, rng: np.random.Generator) -> dict:
    """Epochs x minibatches of clipped-surrogate ascent; batch is then dead."""
    n = len(batch["actions"])
    adv = batch["advantages"]
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)  # normalised per update batch
    mb_size = n // cfg.minibatches
    agg: dict = {}
    count = 0
    for _ in range(cfg.epochs_per_update):
        perm = rng.permutation(n)
        for k in range(cfg.minibatches):
            sl = perm[k * mb_size:(k + 1) * mb_size]
            stats, grads = net.loss_and_grads(
                batch["obs"][sl], batch["actions"][sl], batch["log_probs"][sl],
                adv[sl], batch["returns"][sl],
                cfg.clip_range, cfg.value_coef, cfg.entropy_coef,
            )
            stats["grad_norm"] = clip_grad_norm(grads, cfg.max_grad_norm)
            optimizer.step(grads)
            for key, val in stats.items():
                agg[key] = agg.get(key, 0.0) + val
            count += 1
    return {k: v / count for k, v in agg.items()}


def save_policy(path, net: ActorCriticMLP, meta: dict | None = None) -> None:
    meta = dict(meta or {})
    meta.update({
        "version": CHECKPOINT_VERSION,
        "obs_dim": net.obs_dim,
        "n_actions": net.n_actions,
        "hidden": net.hidden,
    })
    np.savez(path, meta=json.dumps(meta, sort_keys=True), **net.params)


def load_policy(path) -> tuple[ActorCriticMLP, dict]:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        net = ActorCriticMLP(meta["obs_dim"], meta["n_actions"], meta["hidden"])
        for k in net.params:
            net.params[k] = data[k].copy()
    return net, meta


class _EpisodeLog:
    """Per-worker episode accounting with a 10-episode moving average."""

    def __init__(self, n_workers: int):
        self.rows: list[dict] = []
        self._recent = [[] for _ in range(n_workers)]
        self._count = [0] * n_workers

    def record(self, global_step: int, worker: int, info_ep: dict) -> None:
        self._count[worker] += 1
        r_a = info_ep["R_A"]
        recent = self._recent[worker]
        recent.append(r_a)
        if len(recent) > 10:
            recent.pop(0)
        self.rows.append({
            "global_step": global_step,
            "worker": worker,
            "worker_episode": self._count[worker],
            "n_steps": info_ep["n_steps"],
            "R_A": r_a,
            "R_A_ma10": sum(recent) / len(recent),
            "episode_return": info_ep["return"],
            "t_close": info_ep.get("t_close"),
            "cqi": info_ep.get("cqi"),
        })


def train(env_factory, cfg: TrainConfig, stage_schedule=None, out_dir=None,
          log_every: int = 0):
    """Run PPO for cfg.total_timesteps environment steps.

    env_factory(worker_index) must return a fresh environment; environments
    expose reset()/step() and, optionally, set_reward_coefficients() which is
    fed from stage_schedule(global_step) once per vectorised step. Returns
    (net, log) where log holds per-episode and per-update histories. If
    out_dir is given, a checkpoint, train_log.csv and updates.csv are written
    there (a partial checkpoint is flushed if collection dies mid-run).
    """
    envs = [env_factory(i) for i in range(cfg.n_workers)]
    obs_dim = envs[0].observation_dim
    n_actions = envs[0].n_actions
    net = ActorCriticMLP(obs_dim, n_actions, cfg.hidden, seed=cfg.seed)
    optimizer = Adam(net.params, lr=cfg.learning_rate)
    action_rng = np.random.default_rng(cfg.seed + 7_919)
    update_rng = np.random.default_rng(cfg.seed + 104_729)
    buffer = RolloutBuffer(cfg.n_steps, cfg.n_workers, obs_dim)
    episodes = _EpisodeLog(cfg.n_workers)
    updates: list[dict] = []

    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    obs = np.stack([env.reset() for env in envs])
    global_step = 0
    try:
        while global_step < cfg.total_timesteps:
            for _ in range(cfg.n_steps):
                if stage_schedule is not None:
                    coeffs = stage_schedule(global_step)
                    for env in envs:
                        if hasattr(env, "set_reward_coefficients"):
                            env.set_reward_coefficients(coeffs)
                actions, log_probs, values = net.act(obs, action_rng)
                rewards = np.zeros(cfg.n_workers)
                dones = np.zeros(cfg.n_workers, dtype=bool)
                next_obs = np.empty_like(obs)
                for w, env in enumerate(envs):
                    o, r, d, info = env.step(int(actions[w]))
                    rewards[w] = r
                    dones[w] = d
                    if d:
                        episodes.record(global_step + cfg.n_workers, w, info["episode"])
                        o = env.reset()
                    next_obs[w] = o
                buffer.add(obs, actions, log_probs, values, rewards, dones)
                obs = next_obs
                global_step += cfg.n_workers
            last_values = net.value(obs)
            batch = buffer.batch(last_values, cfg.gamma, cfg.gae_lambda)
            buffer.clear()
            stats = ppo_update(net, optimizer, batch, cfg, update_rng)
            stats["global_step"] = global_step
            updates.append(stats)
            if log_every and len(updates) % log_every == 0:
                print(f"step {global_step}: "
                      f"entropy {stats['entropy']:.3f} loss {stats['loss']:.4f}")
    except BaseException:
        if out_path is not None:
            save_policy(out_path / "checkpoint_partial.npz", net,
                        {"config": cfg.to_dict(),
                         "config_hash": config_hash(cfg.to_dict()),
                         "global_step": global_step})
            _write_logs(out_path, episodes.rows, updates)
        raise

    log = {"episodes": episodes.rows, "updates": updates,
           "global_steps": global_step}
    if out_path is not None:
        save_policy(out_path / "checkpoint.npz", net,
                    {"config": cfg.to_dict(),
                     "config_hash": config_hash(cfg.to_dict()),
                     "global_step": global_step})
        _write_logs(out_path, episodes.rows, updates)
    return net, log


_EPISODE_FIELDS = ("global_step", "worker", "worker_episode", "n_steps",
                   "R_A", "R_A_ma10", "episode_return", "t_close", "cqi")
_UPDATE_FIELDS = ("global_step", "loss", "policy_loss", "value_loss",
                  "entropy", "clip_fraction", "approx_kl", "grad_norm")


def _fmt(v):
    if isinstance(v, float):
        return repr(float(v))  # shortest exact round-trip, builtin repr
    return "" if v is None else v


def _write_logs(out_path: Path, episode_rows, update_rows) -> None:
    with open(out_path / "train_log.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_EPISODE_FIELDS)
        for row in episode_rows:
            writer.writerow([_fmt(row.get(k)) for k in _EPISODE_FIELDS])
    with open(out_path / "updates.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_UPDATE_FIELDS)
        for row in update_rows:
            writer.writerow([_fmt(row.get(k)) for k in _UPDATE_FIELDS])

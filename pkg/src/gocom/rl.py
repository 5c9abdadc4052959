"""DQN where the Q-function is the full encode/transmit/demap/head composition.

The replay buffer is extended with the demapper output w_t captured when
the experience was generated, and the stored reward is the blended
modified reward (maximization convention).  The target network duplicates
the entire composition and draws its own channel realizations.  With
goe=None the agent is channel-free (the pretraining / upper-bound case).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import tensor as T
from .channel import ChannelConfig, transmit
from .models import DemapperModel, GoeModel, TaskModel
from .objective import modified_reward
from .tensor import Tape, Tensor, opt_step


@dataclass
class Transition:
    x: np.ndarray
    y: int
    w: np.ndarray
    rhat: float
    x_next: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity FIFO ring; uniform sampling with replacement."""

    def __init__(self, capacity: int, obs_shape):
        self.capacity = int(capacity)
        self.obs_shape = tuple(obs_shape)
        self.x = np.zeros((capacity,) + self.obs_shape)
        self.y = np.zeros(capacity, dtype=np.int64)
        self.w = np.zeros((capacity,) + self.obs_shape)
        self.rhat = np.zeros(capacity)
        self.x_next = np.zeros((capacity,) + self.obs_shape)
        self.done = np.zeros(capacity, dtype=bool)
        self.cursor = 0
        self.size = 0

    def __len__(self):
        return self.size

    def push(self, t: Transition) -> None:
        i = self.cursor
        self.x[i] = t.x
        self.y[i] = t.y
        self.w[i] = t.w
        self.rhat[i] = t.rhat
        self.x_next[i] = t.x_next
        self.done[i] = t.done
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, m: int, rng: np.random.Generator) -> dict:
        if self.size < m:
            raise RuntimeError(f"cannot sample {m} transitions from buffer of size {self.size}")
        idx = rng.integers(0, self.size, size=m)
        return {"x": self.x[idx], "y": self.y[idx], "w": self.w[idx],
                "rhat": self.rhat[idx], "x_next": self.x_next[idx],
                "done": self.done[idx], "idx": idx}


def store_and_sample(buf: ReplayBuffer, t: Transition, m: int,
                     rng: np.random.Generator) -> dict:
    buf.push(t)
    return buf.sample(m, rng)


@dataclass
class DqnConfig:
    gamma: float = 0.99
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 50_000
    sync_period: int = 1_000
    capacity: int = 50_000
    batch: int = 32
    lr: float = 1e-4
    alpha: float = 0.0
    train_snr: Optional[float] = 20.0
    total_steps: int = 200_000
    seed: int = 0
    warmup: int = 500
    train_every: int = 1
    freeze_task: bool = False

    def __post_init__(self):
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        for e in (self.eps_start, self.eps_end):
            if not (0.0 <= e <= 1.0):
                raise ValueError(f"epsilon must lie in [0, 1], got {e}")

    def epsilon(self, step: int) -> float:
        if step >= self.eps_decay_steps:
            return self.eps_end
        frac = step / self.eps_decay_steps
        return self.eps_start + frac * (self.eps_end - self.eps_start)


class QComposition:
    """Q(x, .) through the channel; channel-free when goe is None."""

    def __init__(self, goe: Optional[GoeModel], demapper: Optional[DemapperModel],
                 qnet: TaskModel, channel_kind: str = "awgn",
                 snr_db: Optional[float] = None):
        if (goe is None) != (demapper is None):
            raise ValueError("goe and demapper must be supplied together")
        self.goe, self.demapper, self.qnet = goe, demapper, qnet
        self.channel_kind, self.snr_db = channel_kind, snr_db

    @property
    def through_channel(self) -> bool:
        return self.goe is not None

    def channel_cfg(self) -> ChannelConfig:
        return ChannelConfig(self.channel_kind, self.snr_db)

    def forward(self, x: Tensor, rng: Optional[np.random.Generator]):
        """Returns (q values (B,A), w).  Record on the active tape, if any."""
        if not self.through_channel:
            return self.qnet.forward(x), x
        z = self.goe.encode(x, self.snr_db)
        zhat, _ = transmit(z, self.channel_cfg(), rng)
        w = self.demapper.demap(zhat, self.snr_db)
        return self.qnet.forward(w), w

    def param_sets(self):
        sets = []
        if self.through_channel:
            sets += [self.goe.params, self.demapper.params]
        sets.append(self.qnet.params)
        return sets

    def state_bytes(self) -> bytes:
        return b"".join(ps.state_bytes() for ps in self.param_sets())


def sync_target(online: QComposition, target: QComposition) -> None:
    """Bitwise copy of every online parameter set into the target."""
    for src, dst in zip(online.param_sets(), target.param_sets()):
        dst.copy_values_from(src)


def select_action(q: QComposition, x: np.ndarray, eps: float,
                  rng: np.random.Generator, chan_rng: Optional[np.random.Generator]):
    """Epsilon-greedy through one channel realization; ties -> lowest index.

    The composition always runs (w_t must exist for the replay buffer even
    when the random branch fires).  Returns (action, w, q_values).
    """
    qv, w = q.forward(Tensor(x[None]), chan_rng)
    if eps > 0.0 and rng.random() < eps:
        a = int(rng.integers(0, qv.data.shape[1]))
    else:
        a = int(np.argmax(qv.data[0]))
    return a, w.data[0], qv.data[0]


def dqn_step(online: QComposition, target: QComposition, batch: dict,
             cfg: DqnConfig, online_rng, target_rng) -> float:
    """One TD update through the full composition; returns the Huber loss."""
    qn, _ = target.forward(Tensor(batch["x_next"]), target_rng)
    td = batch["rhat"] + cfg.gamma * qn.data.max(axis=1) * (1.0 - batch["done"].astype(np.float64))
    with Tape() as tape:
        qv, _ = online.forward(Tensor(batch["x"]), online_rng)
        pred = T.gather_rows(qv, batch["y"])
        loss = T.huber(pred, Tensor(td), 1.0)
    tape.backward(loss)
    for ps in online.param_sets():
        if cfg.freeze_task and ps is online.qnet.params:
            ps.zero_grads()
        else:
            opt_step(ps, "adam", cfg.lr)
    return loss.item()


def train_rl(env, online: QComposition, target: QComposition, cfg: DqnConfig,
             buf: Optional[ReplayBuffer] = None):
    """Interact -> store -> sample -> TD-update -> periodic sync loop.

    Returns (episode rewards list, replay buffer).  Raw game rewards are
    logged per episode; the buffer stores the modified reward.
    """
    ss = np.random.SeedSequence(cfg.seed).spawn(5)
    rng_act, rng_chan_act, rng_buf, rng_online, rng_target = (np.random.default_rng(s) for s in ss)
    if buf is None:
        buf = ReplayBuffer(cfg.capacity, env.reset(seed=cfg.seed).shape)
    sync_target(online, target)
    x = env.reset(seed=cfg.seed)
    episode_rewards: list[float] = []
    ep_reward = 0.0
    for step in range(cfg.total_steps):
        eps = cfg.epsilon(step)
        a, w, _ = select_action(online, x, eps, rng_act, rng_chan_act)
        x_next, r, done = env.step(a)
        rhat = modified_reward(r, x, w, cfg.alpha)
        buf.push(Transition(x, a, w, rhat, x_next, done))
        ep_reward += r
        if done:
            episode_rewards.append(ep_reward)
            ep_reward = 0.0
            x = env.reset()
        else:
            x = x_next
        if buf.size >= max(cfg.warmup, cfg.batch) and (step + 1) % cfg.train_every == 0:
            dqn_step(online, target, buf.sample(cfg.batch, rng_buf), cfg, rng_online, rng_target)
        if (step + 1) % cfg.sync_period == 0:
            sync_target(online, target)
    return episode_rewards, buf


def eval_policy(q: QComposition, env, episodes: int, seed: int = 0):
    """Greedy rollouts; returns (mean, std) of raw episode reward."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    totals = np.zeros(episodes)
    for ep in range(episodes):
        ss = np.random.SeedSequence((seed, ep))
        env_seed = int(ss.generate_state(1)[0])
        chan_rng = np.random.default_rng(ss.spawn(1)[0])
        x = env.reset(seed=env_seed)
        done, tot = False, 0.0
        while not done:
            qv, _ = q.forward(Tensor(x[None]), chan_rng)
            x, r, done = env.step(int(np.argmax(qv.data[0])))
            tot += r
        totals[ep] = tot
    return float(totals.mean()), float(totals.std())


def eval_random(env, episodes: int, seed: int = 0):
    """Uniform-random action baseline; returns (mean, std)."""
    rng = np.random.default_rng(seed)
    totals = np.zeros(episodes)
    for ep in range(episodes):
        x = env.reset(seed=int(np.random.SeedSequence((seed, ep)).generate_state(1)[0]))
        done, tot = False, 0.0
        while not done:
            x, r, done = env.step(int(rng.integers(0, env.action_count)))
            tot += r
        totals[ep] = tot
    return float(totals.mean()), float(totals.std())

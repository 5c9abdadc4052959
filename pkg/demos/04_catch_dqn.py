"""Deep Q-learning through the channel on the Catch pixel game.

The Q-function is the full composition: encode the 16x16x3 observation
into 128 complex symbols, transmit, demap, then score the three actions.
This demo runs a short budget to show the moving parts; the acceptance
suite trains to >= 8 catches out of 10.
"""

import numpy as np

from gocom.catch import OBS_SHAPE, CatchEnv, greedy_oracle_action
from gocom.models import TaskModel, build_pair, make_arch
from gocom.rl import DqnConfig, QComposition, eval_policy, eval_random, train_rl

# Baselines first: random flailing vs the scripted perfect player.
rand_mean, rand_std = eval_random(CatchEnv(), episodes=500, seed=42)
print(f"random policy: {rand_mean:.2f} +- {rand_std:.2f} catches / 10 balls")

env = CatchEnv()
env.reset(seed=0)
total, done = 0.0, False
while not done:
    _, r, done = env.step(greedy_oracle_action(env))
    total += r
print(f"scripted oracle: {total:.0f}/10")

# Pretrain the q-network with no channel (the upper-bound agent, xi_pre).
qnet = TaskModel(OBS_SHAPE, "qnet", out_dim=3, seed=0, hidden=128)
online = QComposition(None, None, qnet)
target = QComposition(None, None, TaskModel(OBS_SHAPE, "qnet", out_dim=3, seed=0))
cfg = DqnConfig(eps_decay_steps=6000, sync_period=500, capacity=20000, batch=32,
                lr=1e-3, train_snr=None, total_steps=25000, seed=0, warmup=500)
rewards, _ = train_rl(CatchEnv(seed=0), online, target, cfg)
m, s = eval_policy(online, CatchEnv(), episodes=50, seed=1)
print(f"no-channel DQN after 25k steps: {m:.2f} +- {s:.2f}")

# Fine-tune the full composition through a 20 dB AWGN channel.  The
# replay buffer stores (x, action, w, modified reward, x', done); with
# alpha=0 the stored reward is exactly the game reward.
arch = make_arch(OBS_SHAPE, "1/6", kind="dense")
goe, dem = build_pair(arch, seed=21)
q2 = TaskModel(OBS_SHAPE, "qnet", out_dim=3, seed=5, hidden=128)
q2.params.copy_values_from(qnet.params)
online_g = QComposition(goe, dem, q2, "awgn", 20.0)
goe_t, dem_t = build_pair(arch, seed=22)
target_g = QComposition(goe_t, dem_t, TaskModel(OBS_SHAPE, "qnet", out_dim=3, seed=6),
                        "awgn", 20.0)
cfg = DqnConfig(eps_decay_steps=10000, sync_period=400, capacity=30000, batch=32,
                lr=7e-4, train_snr=20.0, total_steps=15000, seed=3, warmup=500,
                eps_end=0.03)
rewards, buf = train_rl(CatchEnv(seed=3), online_g, target_g, cfg)
print(f"gocom DQN, 15k steps at 20 dB: last-20-episode reward {np.mean(rewards[-20:]):.2f}")
print(f"replay buffer holds {buf.size} transitions with demapper outputs attached")

for snr in (20.0, 0.0):
    q = QComposition(goe, dem, q2, "awgn", snr)
    m, s = eval_policy(q, CatchEnv(), episodes=30, seed=11)
    print(f"eval @ {snr:4.0f} dB: {m:.2f} +- {s:.2f}  (the acceptance run trains 4x longer)")

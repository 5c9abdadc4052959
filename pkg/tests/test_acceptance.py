"""Acceptance suite: one test per criterion, one printed PASS line each.

Run with `pytest tests/test_acceptance.py -v -s`.  The supervised and RL
criteria train real models and take minutes; everything else is seconds.
"""

import os
import time

import numpy as np
import pytest

from gocom import tensor as T
from gocom.catch import GRID, OBS_SHAPE, CatchEnv, greedy_oracle_action
from gocom.channel import ChannelConfig, ComplexBlock, normalize_power, transmit
from gocom.config import parse_config_text
from gocom.data import gen_synth_pair
from gocom.models import GoeModel, JsccModel, TaskModel, build_pair, make_arch
from gocom.objective import modified_reward
from gocom.rl import (DqnConfig, QComposition, ReplayBuffer, Transition, dqn_step,
                      eval_policy, eval_random, select_action, sync_target, train_rl)
from gocom.runner import run
from gocom.supervised import (JointTrainer, SnrPolicy, TrainConfig, eval_accuracy_clean,
                              evaluate_sweep, pretrain_task, train_jscc)
from gocom.tensor import Tape, Tensor, finite_diff_check

from test_tensor import _point


def _report(name, detail=""):
    print(f"\nACCEPTANCE {name}: PASS {detail}")


# -- C1: gradient suite ---------------------------------------------------------

def test_c1_gradient_suite():
    t0 = time.time()
    worst_by_prim = {}
    for prim in sorted(T.PRIMITIVES):
        rng = np.random.default_rng(hash(prim) % 2**32)
        worst = 0.0
        for _ in range(100):
            point, extra = _point(prim, rng)
            worst = max(worst, finite_diff_check(prim, point, 1e-5, *extra))
        worst_by_prim[prim] = worst
        assert worst < 1e-6, f"{prim}: {worst:.3e}"

    # end-to-end composition gradient with a frozen channel realization
    arch = make_arch((8, 8, 1), "1/6", kind="conv", snr_gate=True)
    goe, dem = build_pair(arch, seed=1)
    task = TaskModel((8, 8, 1), "classifier", out_dim=4, seed=2)
    rng = np.random.default_rng(3)
    xb = rng.random((2, 8, 8, 1))
    yb = rng.integers(0, 4, 2)
    cfg = ChannelConfig("slow_fading", 5.0)
    _, real = transmit(goe.encode(Tensor(xb), 5.0), cfg, np.random.default_rng(4))

    def loss_value():
        z = goe.encode(Tensor(xb), 5.0)
        zhat, _ = transmit(z, cfg, realization=real)
        w = dem.demap(zhat, 5.0)
        l_task = T.softmax_cross_entropy(task.forward(w), yb)
        return T.add(T.scale(l_task, 0.9), T.scale(T.mse(Tensor(xb), w), 0.1))

    with Tape() as tape:
        loss = loss_value()
    tape.backward(loss)
    worst = 0.0
    for ps in (goe.params, dem.params, task.params):
        for name, p in ps.items():
            grad = p.tensor.grad
            flat = p.tensor.data.reshape(-1)
            for j in rng.choice(flat.size, min(3, flat.size), replace=False):
                orig = flat[j]
                flat[j] = orig + 1e-5
                fp = loss_value().item()
                flat[j] = orig - 1e-5
                fm = loss_value().item()
                flat[j] = orig
                num = (fp - fm) / 2e-5
                worst = max(worst, abs(num - grad.reshape(-1)[j]) / max(1.0, abs(grad.reshape(-1)[j])))
    for ps in (goe.params, dem.params, task.params):
        ps.zero_grads()
    assert worst < 1e-5, f"composition gradient error {worst:.3e}"
    dt = time.time() - t0
    assert dt < 60.0, f"gradient suite took {dt:.0f}s"
    _report("C1 gradient-suite",
            f"(max primitive err {max(worst_by_prim.values()):.2e}, composition {worst:.2e}, {dt:.0f}s)")


# -- C2: channel statistics ------------------------------------------------------

def test_c2_channel_statistics():
    t0 = time.time()
    s = 1_000_000
    z = ComplexBlock(Tensor(np.tile([1.0, 0.0], s)[None, :]), s)
    for i, snr in enumerate((0.0, 10.0, 20.0)):
        sigma2 = 10.0 ** (-snr / 10.0)
        _, real = transmit(z, ChannelConfig("awgn", snr), np.random.default_rng(100 + i))
        pairs = real.noise.reshape(-1, 2)
        emp = float(np.mean(pairs[:, 0] ** 2 + pairs[:, 1] ** 2))
        assert abs(emp - sigma2) / sigma2 < 0.02, f"{snr} dB: {emp} vs {sigma2}"

    blocks = 300_000
    zb = ComplexBlock(Tensor(np.tile([1.0, 0.0], 2).reshape(1, 4).repeat(blocks, 0)), 2)
    _, real = transmit(zb, ChannelConfig("slow_fading", 10.0), np.random.default_rng(7))
    assert abs(np.mean(np.abs(real.c) ** 2) - 1.0) < 0.02

    rng = np.random.default_rng(8)
    zr = normalize_power(Tensor(rng.standard_normal((64, 32))), 16)
    zhat, _ = transmit(zr, ChannelConfig("slow_fading", None))
    assert np.array_equal(zhat.data, zr.data)
    dt = time.time() - t0
    assert dt < 60.0, f"channel statistics took {dt:.0f}s"
    _report("C2 channel-statistics", f"({dt:.0f}s)")


# -- C3: power constraint ---------------------------------------------------------

def test_c3_power_constraint():
    rng = np.random.default_rng(11)
    checked = 0
    for draw in range(50):
        arch = make_arch((8, 8, 1), "1/6", kind="conv", snr_gate=bool(draw % 2))
        goe = GoeModel(arch, seed=draw)
        z = goe.encode(Tensor(rng.random((10, 8, 8, 1))), float(rng.uniform(-2, 20)))
        np.testing.assert_allclose(z.symbol_power(), 1.0, atol=1e-9)
        checked += 10
    for draw in range(50):
        arch = make_arch(OBS_SHAPE, "1/6", kind="dense")
        goe = GoeModel(arch, seed=1000 + draw)
        z = goe.encode(Tensor(rng.random((10,) + OBS_SHAPE)), None)
        np.testing.assert_allclose(z.symbol_power(), 1.0, atol=1e-9)
        checked += 10
    assert checked == 1000
    _report("C3 power-constraint", f"({checked} encodings within 1e-9)")


# -- C4: structural identity --------------------------------------------------------

def test_c4_structural_identity():
    train, _ = gen_synth_pair(600, 100, classes=4, seed=21)
    arch = make_arch((8, 8, 1), "1/6", kind="conv", snr_gate=True)
    goe, dem = build_pair(arch, seed=31)
    jscc = JsccModel.build(arch, seed=31)
    cfg = TrainConfig(alpha=1.0, lr=1e-3, batch=16, epochs=1,
                      snr_policy=SnrPolicy("range", -2, 20), seed=41)
    gocom_tr = JointTrainer(goe, dem, TaskModel((8, 8, 1), "identity"), train, "awgn", cfg)
    jscc_tr = JointTrainer(jscc.encoder, jscc.decoder, None, train, "awgn", cfg)
    for step in range(100):
        la, lb = gocom_tr.step(), jscc_tr.step()
        assert la == lb, f"objective diverged at step {step}"
        assert goe.params.state_bytes() == jscc.encoder.params.state_bytes(), f"step {step}"
        assert dem.params.state_bytes() == jscc.decoder.params.state_bytes(), f"step {step}"
    _report("C4 structural-identity", "(100 bitwise-equal steps)")


# -- C5 + C6: supervised trend and JSCC PSNR -----------------------------------------

SUPERVISED_GRID = [float(v) for v in range(-2, 21, 2)]


@pytest.fixture(scope="module")
def supervised_runs():
    t0 = time.time()
    train, test = gen_synth_pair(2000, 500, classes=8, seed=1, noise=0.02)
    arch = make_arch((8, 8, 1), "1/6", kind="conv", snr_gate=True)
    task = TaskModel((8, 8, 1), "classifier", out_dim=8, seed=3)
    pretrain_task(task, train, TrainConfig(alpha=0.0, lr=1e-3, batch=32, epochs=10, seed=0))
    upper = eval_accuracy_clean(task, test)

    goe, dem = build_pair(arch, seed=11)
    cfg = TrainConfig(alpha=0.1, lr=1e-3, batch=32, epochs=25,
                      snr_policy=SnrPolicy("range", -2, 20), seed=5)
    JointTrainer(goe, dem, task, train, "awgn", cfg).train()

    jscc = JsccModel.build(arch, seed=11)
    jcfg = TrainConfig(alpha=1.0, lr=1e-3, batch=32, epochs=25,
                       snr_policy=SnrPolicy("range", -2, 20), seed=5)
    train_jscc(jscc, train, "awgn", jcfg)

    rows_g = evaluate_sweep("gocom", test, SUPERVISED_GRID, repeats=10, goe=goe,
                            demapper=dem, task=task, seed=77)
    rows_j = evaluate_sweep("jscc+task", test, SUPERVISED_GRID, repeats=10, jscc=jscc,
                            task=task, seed=77, with_psnr=True)
    return dict(upper=upper, rows_g=rows_g, rows_j=rows_j, elapsed=time.time() - t0)


def test_c5_supervised_trend(supervised_runs):
    r = supervised_runs
    acc_g = {row.test_snr_db: row.value for row in r["rows_g"] if row.metric == "accuracy"}
    acc_j = {row.test_snr_db: row.value for row in r["rows_j"] if row.metric == "accuracy"}
    margin = acc_g[0.0] - acc_j[0.0]
    assert margin >= 0.03, f"gocom-jscc margin at 0 dB: {margin:.3f}"
    assert acc_g[0.0] <= r["upper"] + 1e-9
    assert acc_j[0.0] <= r["upper"] + 1e-9
    for a, b in zip(SUPERVISED_GRID, SUPERVISED_GRID[1:]):
        assert acc_g[b] >= acc_g[a] - 0.02, f"accuracy drop {a}->{b}: {acc_g[a]:.3f}->{acc_g[b]:.3f}"
    assert r["elapsed"] < 180.0, f"supervised pipeline took {r['elapsed']:.0f}s"
    _report("C5 supervised-trend",
            f"(margin {margin * 100:.1f} pts, upper {r['upper']:.3f}, {r['elapsed']:.0f}s)")


def test_c6_jscc_psnr_monotone(supervised_runs):
    rows = [row for row in supervised_runs["rows_j"] if row.metric == "psnr_db"]
    psnr = {row.test_snr_db: row.value for row in rows}
    grid = [v for v in SUPERVISED_GRID if v >= 0.0]
    for a, b in zip(grid, grid[1:]):
        assert psnr[b] > psnr[a], f"PSNR not increasing {a}->{b}: {psnr[a]:.2f}->{psnr[b]:.2f}"
    rise = psnr[20.0] - psnr[0.0]
    assert rise >= 3.0, f"PSNR rise {rise:.2f} dB"
    _report("C6 jscc-psnr-monotone", f"(rise {rise:.2f} dB over 0..20)")


# -- C7: RL suite -----------------------------------------------------------------

RL_PRETRAIN = dict(eps_decay_steps=6000, sync_period=500, capacity=20000, batch=32,
                   lr=1e-3, total_steps=25000, warmup=500)
RL_GOCOM = dict(eps_decay_steps=10000, sync_period=400, capacity=30000, batch=32,
                lr=7e-4, total_steps=60000, warmup=500, eps_end=0.03)


@pytest.fixture(scope="module")
def rl_models():
    t0 = time.time()
    qnet = TaskModel(OBS_SHAPE, "qnet", out_dim=3, seed=0, hidden=128)
    online = QComposition(None, None, qnet)
    target = QComposition(None, None, TaskModel(OBS_SHAPE, "qnet", out_dim=3, seed=0))
    train_rl(CatchEnv(seed=0), online, target,
             DqnConfig(train_snr=None, seed=0, **RL_PRETRAIN))

    arch = make_arch(OBS_SHAPE, "1/6", kind="dense")
    goe, dem = build_pair(arch, seed=21)
    q2 = TaskModel(OBS_SHAPE, "qnet", out_dim=3, seed=5, hidden=128)
    q2.params.copy_values_from(qnet.params)
    online_g = QComposition(goe, dem, q2, "awgn", 20.0)
    goe_t, dem_t = build_pair(arch, seed=22)
    target_g = QComposition(goe_t, dem_t, TaskModel(OBS_SHAPE, "qnet", out_dim=3, seed=6),
                            "awgn", 20.0)
    train_rl(CatchEnv(seed=3), online_g, target_g,
             DqnConfig(train_snr=20.0, seed=3, **RL_GOCOM))
    return dict(upper=online, gocom=(goe, dem, q2), elapsed=time.time() - t0)


def test_c7_rl_suite(rl_models):
    t0 = time.time()
    rand_mean, rand_std = eval_random(CatchEnv(), episodes=10_000, seed=42)
    assert 1.6 <= rand_mean <= 2.2, f"random baseline {rand_mean:.2f}"

    # scripted oracle: every spawn column is reachable and caught
    for spawn in range(GRID):
        env = CatchEnv()
        env.reset(seed=0)
        env.ball_col = spawn
        total, done = 0.0, False
        while not done:
            _, r, done = env.step(greedy_oracle_action(env))
            total += r
        assert total == 10.0, f"oracle missed from spawn {spawn}"

    upper_mean, upper_std = eval_policy(rl_models["upper"], CatchEnv(), 100, seed=1)
    assert upper_mean >= 9.0, f"upper-bound policy {upper_mean:.2f}"

    goe, dem, qnet = rl_models["gocom"]
    q20 = QComposition(goe, dem, qnet, "awgn", 20.0)
    m20, s20 = eval_policy(q20, CatchEnv(), 100, seed=11)
    assert m20 >= 8.0, f"gocom at 20 dB: {m20:.2f}"

    q0 = QComposition(goe, dem, qnet, "awgn", 0.0)
    m0, s0 = eval_policy(q0, CatchEnv(), 100, seed=12)
    se = np.sqrt((s0 / 10.0) ** 2 + (rand_std / 100.0) ** 2)
    assert m0 >= rand_mean + 5.0 * se, f"gocom at 0 dB: {m0:.2f} vs random {rand_mean:.2f} (+5se={rand_mean + 5 * se:.2f})"

    total = rl_models["elapsed"] + (time.time() - t0)
    assert total < 3600.0, f"RL suite took {total:.0f}s"
    _report("C7 rl-suite",
            f"(random {rand_mean:.2f}, upper {upper_mean:.2f}, gocom@20 {m20:.2f}, gocom@0 {m0:.2f}, {total:.0f}s)")


# -- C8: RL bookkeeping -------------------------------------------------------------

class _RecordingEnv(CatchEnv):
    def __init__(self, seed=0):
        super().__init__(seed)
        self.raw_rewards = []

    def step(self, action):
        obs, r, done = super().step(action)
        self.raw_rewards.append(r)
        return obs, r, done


def test_c8_rl_bookkeeping():
    # alpha=0: stored modified reward equals the raw reward, transition by transition
    env = _RecordingEnv(seed=9)
    qnet = TaskModel(OBS_SHAPE, "qnet", out_dim=3, seed=30)
    online = QComposition(None, None, qnet)
    target = QComposition(None, None, TaskModel(OBS_SHAPE, "qnet", out_dim=3, seed=30))
    steps = 900
    cfg = DqnConfig(eps_decay_steps=300, sync_period=200, capacity=2000, batch=16,
                    lr=1e-3, train_snr=None, total_steps=steps, seed=9, warmup=100, alpha=0.0)
    _, buf = train_rl(env, online, target, cfg)
    assert buf.size == steps
    assert np.array_equal(buf.rhat[:steps], np.array(env.raw_rewards))

    # FIFO eviction
    small = ReplayBuffer(2, OBS_SHAPE)
    for v in (1.0, 2.0, 3.0):
        obs = np.full(OBS_SHAPE, v)
        small.push(Transition(obs, 0, obs, v, obs, False))
    assert {small.x[i].flat[0] for i in range(2)} == {2.0, 3.0}

    # sampling uniformity at the 1% chi-square level
    buf2 = ReplayBuffer(100, OBS_SHAPE)
    for v in range(100):
        obs = np.full(OBS_SHAPE, float(v))
        buf2.push(Transition(obs, 0, obs, 0.0, obs, False))
    rng = np.random.default_rng(17)
    counts = np.zeros(100)
    for _ in range(2000):
        counts += np.bincount(buf2.sample(50, rng)["idx"], minlength=100)
    chi2 = float(((counts - 1000.0) ** 2 / 1000.0).sum())
    assert chi2 < 134.64, f"buffer sampling chi2 {chi2:.1f}"

    # epsilon=1 action uniformity at the 1% level
    arch = make_arch(OBS_SHAPE, "1/6", kind="dense")
    goe, dem = build_pair(arch, seed=31)
    comp = QComposition(goe, dem, qnet, "awgn", 20.0)
    rng_a, rng_c = np.random.default_rng(18), np.random.default_rng(19)
    x = CatchEnv().reset(seed=3)
    acounts = np.zeros(3)
    n = 20_000
    for _ in range(n):
        a, _, _ = select_action(comp, x, 1.0, rng_a, rng_c)
        acounts[a] += 1
    chi2 = float(((acounts - n / 3) ** 2 / (n / 3)).sum())
    assert chi2 < 9.21, f"epsilon-greedy chi2 {chi2:.1f}"

    # target-sync bit equality at every sync step
    goe_t, dem_t = build_pair(arch, seed=32)
    tgt = QComposition(goe_t, dem_t, TaskModel(OBS_SHAPE, "qnet", out_dim=3, seed=33), "awgn", 20.0)
    env2 = CatchEnv(seed=5)
    x = env2.reset(seed=5)
    buf3 = ReplayBuffer(2000, OBS_SHAPE)
    rngs = [np.random.default_rng(s) for s in (20, 21, 22, 23, 24)]
    sync_target(comp, tgt)
    dcfg = DqnConfig(train_snr=20.0, seed=5, lr=1e-3)
    syncs = 0
    for step in range(600):
        a, w, _ = select_action(comp, x, dcfg.epsilon(step), rngs[0], rngs[1])
        x_next, r, done = env2.step(a)
        buf3.push(Transition(x, a, w, modified_reward(r, x, w, 0.0), x_next, done))
        x = env2.reset() if done else x_next
        if buf3.size >= 64:
            dqn_step(comp, tgt, buf3.sample(16, rngs[2]), dcfg, rngs[3], rngs[4])
        if (step + 1) % 200 == 0:
            sync_target(comp, tgt)
            assert comp.state_bytes() == tgt.state_bytes(), f"sync mismatch at {step + 1}"
            syncs += 1
    assert syncs == 3
    _report("C8 rl-bookkeeping")


# -- C9: determinism ------------------------------------------------------------------

DET_CFG = """
[experiment]
task = classify
system = gocom
seed = 13

[data]
source = synth
n_train = 240
n_test = 80
classes = 4

[channel]
train_snr = range:-2:20
test_snrs = 0,10,20

[train]
alpha = 0.1
lr = 1e-3
epochs = 2
pretrain_epochs = 2
repeats = 2
"""


def test_c9_full_run_determinism(tmp_path):
    cfg = parse_config_text(DET_CFG, "det")
    run(cfg, str(tmp_path / "a"))
    run(parse_config_text(DET_CFG, "det"), str(tmp_path / "b"))
    for name in ("metrics.csv", os.path.join("checkpoints", "gocom.ckpt"),
                 os.path.join("checkpoints", "xi_pre.ckpt")):
        ba = open(tmp_path / "a" / name, "rb").read()
        bb = open(tmp_path / "b" / name, "rb").read()
        assert ba == bb, f"{name} differs between identical runs"
    _report("C9 determinism", "(metrics.csv + checkpoints byte-identical)")

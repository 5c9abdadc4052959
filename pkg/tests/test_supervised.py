import numpy as np
import pytest

from gocom.data import gen_synth_pair
from gocom.models import JsccModel, TaskModel, build_pair, make_arch
from gocom.supervised import (JointTrainer, SnrPolicy, TrainConfig, eval_accuracy_clean,
                              evaluate_sweep, pretrain_task, train_jscc)


@pytest.fixture(scope="module")
def blobs():
    return gen_synth_pair(400, 160, classes=4, seed=1, noise=0.05)


def _logistic_regression_oracle(train, test, epochs=200, lr=0.5):
    """Independent multinomial logistic regression on raw pixels."""
    x = train.inputs.reshape(train.n, -1)
    xt = test.inputs.reshape(test.n, -1)
    c = int(train.labels.max()) + 1
    w = np.zeros((x.shape[1], c))
    b = np.zeros(c)
    onehot = np.eye(c)[train.labels]
    for _ in range(epochs):
        z = x @ w + b
        z -= z.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        g = (p - onehot) / train.n
        w -= lr * (x.T @ g)
        b -= lr * g.sum(axis=0)
    pred = np.argmax(xt @ w + b, axis=1)
    return float(np.mean(pred == test.labels))


def test_pretrain_beats_threshold_like_oracle(blobs):
    train, test = blobs
    oracle = _logistic_regression_oracle(train, test)
    assert oracle >= 0.95  # the data is linearly separable enough
    task = TaskModel((8, 8, 1), "classifier", out_dim=4, seed=3)
    pretrain_task(task, train, TrainConfig(alpha=0, lr=1e-3, batch=32, epochs=20, seed=0))
    assert eval_accuracy_clean(task, test) >= 0.95


def test_pretrain_zero_epochs_is_noop():
    train, _ = gen_synth_pair(100, 20, classes=4, seed=2)
    task = TaskModel((8, 8, 1), "classifier", out_dim=4, seed=5)
    before = task.params.state_bytes()
    pretrain_task(task, train, TrainConfig(alpha=0, epochs=0, seed=0))
    assert task.params.state_bytes() == before


def test_alpha_one_identity_task_equals_jscc_bitwise(blobs):
    train, _ = blobs
    arch = make_arch((8, 8, 1), "1/6", kind="conv", snr_gate=True)
    goe, dem = build_pair(arch, seed=11)
    jscc = JsccModel.build(arch, seed=11)
    cfg = TrainConfig(alpha=1.0, lr=1e-3, batch=16, epochs=1,
                      snr_policy=SnrPolicy("range", -2, 20), seed=5)
    ta = JointTrainer(goe, dem, TaskModel((8, 8, 1), "identity"), train, "awgn", cfg)
    tb = JointTrainer(jscc.encoder, jscc.decoder, None, train, "awgn", cfg)
    for _ in range(25):
        la, lb = ta.step(), tb.step()
        assert la == lb
        assert goe.params.state_bytes() == jscc.encoder.params.state_bytes()
        assert dem.params.state_bytes() == jscc.decoder.params.state_bytes()


def test_freeze_task_keeps_task_bits(blobs):
    train, _ = blobs
    arch = make_arch((8, 8, 1), "1/6", kind="conv", snr_gate=True)
    goe, dem = build_pair(arch, seed=12)
    task = TaskModel((8, 8, 1), "classifier", out_dim=4, seed=6)
    cfg = TrainConfig(alpha=0.1, lr=1e-3, batch=16, epochs=1, freeze_task=True, seed=9)
    tr = JointTrainer(goe, dem, task, train, "awgn", cfg)
    before = task.params.state_bytes()
    enc_before = goe.params.state_bytes()
    for _ in range(10):
        tr.step()
    assert task.params.state_bytes() == before
    assert goe.params.state_bytes() != enc_before


def test_training_beats_random_parameter_control(blobs):
    train, _ = blobs
    arch = make_arch((8, 8, 1), "1/6", kind="conv", snr_gate=True)
    task = TaskModel((8, 8, 1), "classifier", out_dim=4, seed=6)
    pretrain_task(task, train, TrainConfig(alpha=0, lr=1e-3, batch=32, epochs=5, seed=0))

    def avg_objective(train_steps):
        goe, dem = build_pair(arch, seed=13)
        cfg = TrainConfig(alpha=0.1, lr=1e-3 if train_steps else 1e-9, batch=32,
                          epochs=1, seed=10)
        tr = JointTrainer(goe, dem, task, train, "awgn", cfg)
        vals = [tr.step() for _ in range(100)]
        return float(np.mean(vals))

    trained = avg_objective(True)
    control = avg_objective(False)   # effectively frozen random encoder/demapper
    assert trained < control


def test_jscc_overfit_sanity():
    # tiny set, generous budget: train mse below 0.01
    train, _ = gen_synth_pair(100, 10, classes=4, seed=4, noise=0.0)
    arch = make_arch((8, 8, 1), "1/2", kind="conv", snr_gate=False)
    jscc = JsccModel.build(arch, seed=15)
    cfg = TrainConfig(alpha=1.0, lr=3e-3, batch=25, epochs=120,
                      snr_policy=SnrPolicy("clean"), seed=3)
    trainer = train_jscc(jscc, train, "awgn", cfg)
    final = trainer.step()
    assert final < 0.01


def test_jscc_determinism(blobs):
    train, _ = blobs
    arch = make_arch((8, 8, 1), "1/6", kind="conv", snr_gate=True)

    def run():
        jscc = JsccModel.build(arch, seed=16)
        cfg = TrainConfig(alpha=1.0, lr=1e-3, batch=32, epochs=2,
                          snr_policy=SnrPolicy("range", -2, 20), seed=8)
        train_jscc(jscc, train, "awgn", cfg)
        return jscc.encoder.params.state_bytes() + jscc.decoder.params.state_bytes()

    assert run() == run()


def test_evaluate_sweep_contracts(blobs):
    train, test = blobs
    task = TaskModel((8, 8, 1), "classifier", out_dim=4, seed=6)
    pretrain_task(task, train, TrainConfig(alpha=0, lr=1e-3, batch=32, epochs=5, seed=0))
    grid = [0.0, 10.0, 20.0]
    rows = evaluate_sweep("upper", test, grid, repeats=3, task=task)
    assert len(rows) == 3
    assert len({r.value for r in rows}) == 1           # SNR-independent
    arch = make_arch((8, 8, 1), "1/6", kind="conv", snr_gate=True)
    goe, dem = build_pair(arch, seed=17)
    rows = evaluate_sweep("gocom", test, grid, repeats=10, goe=goe, demapper=dem,
                          task=task, seed=3)
    assert all(r.repeats == 10 and np.isfinite(r.std) for r in rows)
    jscc = JsccModel.build(arch, seed=18)
    rows = evaluate_sweep("jscc+task", test, grid, repeats=3, jscc=jscc, task=task,
                          seed=3, with_psnr=True)
    assert {r.metric for r in rows} == {"accuracy", "psnr_db"}


def test_snr_policy_parse_and_describe():
    p = SnrPolicy.parse("range:-2:20")
    assert (p.mode, p.lo, p.hi) == ("range", -2.0, 20.0)
    assert SnrPolicy.parse("fixed:7.5").sample(np.random.default_rng(0)) == 7.5
    assert SnrPolicy.parse("clean").sample(np.random.default_rng(0)) is None
    assert SnrPolicy.parse("range:-2:20").describe() == "range:-2:20"
    with pytest.raises(ValueError):
        SnrPolicy.parse("sometimes:3")
    with pytest.raises(ValueError):
        SnrPolicy("range", 5, 2)

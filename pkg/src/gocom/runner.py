"""Experiment orchestration: pretrain -> train -> evaluate, per config.

All randomness is derived from the experiment seed through fixed offsets,
so a (config, seed) pair determines every emitted byte of metrics.csv and
the checkpoints.  The run log carries timestamps and is excluded from
determinism guarantees.  Pretrained task checkpoints found in the output
directory are reused instead of retrained.
"""

from __future__ import annotations

import os
import time
from typing import Optional

import numpy as np

from .catch import OBS_SHAPE, CatchEnv
from .config import ConfigError, ExperimentConfig
from .data import Dataset, gen_synth_pair, load_idx
from .models import JsccModel, TaskModel, build_pair, make_arch
from .persist import MetricsRow, load_checkpoint, save_checkpoint, sort_rows, write_metrics_csv
from .rl import DqnConfig, QComposition, eval_policy, eval_random, train_rl
from .supervised import (JointTrainer, SnrPolicy, TrainConfig, eval_accuracy_clean,
                         evaluate_sweep, pretrain_task, train_jscc)

# seed offsets for the independent random streams of one experiment
_SEED_TASK = 1
_SEED_MODELS = 2
_SEED_TRAIN = 3
_SEED_EVAL = 4
_SEED_ENV = 5


class RunLog:
    def __init__(self, path):
        self.path = path
        self._f = open(path, "a")

    def __call__(self, msg: str) -> None:
        stamp = time.strftime("%Y-%m-%d %H:%M:%S")
        self._f.write(f"[{stamp}] {msg}\n")
        self._f.flush()

    def close(self):
        self._f.close()


def _load_data(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    if cfg.get("data", "source") == "synth":
        return gen_synth_pair(cfg.get("data", "n_train"), cfg.get("data", "n_test"),
                              classes=cfg.get("data", "classes"), seed=cfg.seed,
                              noise=cfg.get("data", "noise"))
    train = load_idx(cfg.get("data", "train_images"), cfg.get("data", "train_labels"), "train")
    test = load_idx(cfg.get("data", "test_images"), cfg.get("data", "test_labels"), "test")
    lt, le = cfg.get("data", "limit_train"), cfg.get("data", "limit_test")
    if lt:
        train = train.subset(slice(0, lt), "train")
    if le:
        test = test.subset(slice(0, le), "test")
    return train, test


def _save_params(path, prefixed: dict[str, "object"]) -> None:
    flat: dict[str, np.ndarray] = {}
    for prefix, ps in prefixed.items():
        for name, arr in ps.named_arrays().items():
            flat[f"{prefix}/{name}"] = arr
    save_checkpoint(path, flat)


def _load_params(path, prefixed: dict[str, "object"]) -> None:
    flat = load_checkpoint(path)
    for prefix, ps in prefixed.items():
        for name in ps.names():
            key = f"{prefix}/{name}"
            if key not in flat:
                raise ConfigError(f"{path}: checkpoint missing parameter {key}")
            np.copyto(ps[name].data, flat[key])


def _train_snr_policy(cfg: ExperimentConfig) -> SnrPolicy:
    return SnrPolicy.parse(cfg.get("channel", "train_snr"))


def _fixed_train_snr(cfg: ExperimentConfig) -> Optional[float]:
    pol = _train_snr_policy(cfg)
    if pol.mode == "clean":
        return None
    if pol.mode == "fixed":
        return pol.lo
    raise ConfigError("RL training needs a fixed (or clean) train SNR, got a range")


# -- classification pipeline --------------------------------------------------

def _classify_arch(cfg: ExperimentConfig, data: Dataset):
    return make_arch(data.input_shape, cfg.get("model", "rate"),
                     kind=cfg.get("model", "arch"), snr_gate=cfg.get("model", "snr_gate"))


def _pretrain_classifier(cfg: ExperimentConfig, train: Dataset, ckpt_dir, log) -> TaskModel:
    classes = int(train.labels.max()) + 1
    task = TaskModel(train.input_shape, "classifier", out_dim=classes,
                     seed=cfg.seed + _SEED_TASK, hidden=cfg.get("model", "task_hidden"))
    path = os.path.join(ckpt_dir, "xi_pre.ckpt")
    if os.path.exists(path):
        _load_params(path, {"task": task.params})
        log(f"reused pretrained task from {path}")
        return task
    tcfg = TrainConfig(alpha=0.0, lr=cfg.get("train", "pretrain_lr"), batch=cfg.get("train", "batch"),
                       epochs=cfg.get("train", "pretrain_epochs"), seed=cfg.seed + _SEED_TRAIN)
    pretrain_task(task, train, tcfg)
    _save_params(path, {"task": task.params})
    log(f"pretrained task head ({tcfg.epochs} epochs) -> {path}")
    return task


def run_classify(cfg: ExperimentConfig, out_dir: str, log) -> list[MetricsRow]:
    train, test = _load_data(cfg)
    ckpt_dir = os.path.join(out_dir, "checkpoints")
    os.makedirs(ckpt_dir, exist_ok=True)
    arch = _classify_arch(cfg, train)
    grid = cfg.get("channel", "test_snrs")
    kind = cfg.get("channel", "kind")
    repeats = cfg.get("train", "repeats")
    run_id = cfg.run_id()
    pol = _train_snr_policy(cfg)
    task = _pretrain_classifier(cfg, train, ckpt_dir, log)
    upper = eval_accuracy_clean(task, test)
    log(f"upper-bound accuracy {upper:.4f}")

    if cfg.system == "upper":
        return evaluate_sweep("upper", test, grid, repeats, task=task, channel_kind=kind,
                              seed=cfg.seed + _SEED_EVAL, run_id=run_id, alpha=0.0,
                              train_snr="clean")

    tcfg = TrainConfig(alpha=cfg.get("train", "alpha"), lr=cfg.get("train", "lr"),
                       batch=cfg.get("train", "batch"), epochs=cfg.get("train", "epochs"),
                       snr_policy=pol, freeze_task=cfg.get("train", "freeze_task"),
                       seed=cfg.seed + _SEED_TRAIN)
    if cfg.system == "gocom":
        goe, dem = build_pair(arch, cfg.seed + _SEED_MODELS)
        trainer = JointTrainer(goe, dem, task, train, kind, tcfg)
        hist = trainer.train()
        log(f"gocom trained {tcfg.epochs} epochs, objective {hist[0]:.4f} -> {hist[-1]:.4f}")
        _save_params(os.path.join(ckpt_dir, "gocom.ckpt"),
                     {"goe": goe.params, "demapper": dem.params, "task": task.params})
        return evaluate_sweep("gocom", test, grid, repeats, goe=goe, demapper=dem, task=task,
                              channel_kind=kind, seed=cfg.seed + _SEED_EVAL, run_id=run_id,
                              alpha=tcfg.alpha, train_snr=pol.describe())
    if cfg.system == "jscc":
        jscc = JsccModel.build(arch, cfg.seed + _SEED_MODELS)
        train_jscc(jscc, train, kind, tcfg)
        log(f"jscc trained {tcfg.epochs} epochs")
        _save_params(os.path.join(ckpt_dir, "jscc.ckpt"),
                     {"encoder": jscc.encoder.params, "decoder": jscc.decoder.params})
        return evaluate_sweep("jscc+task", test, grid, repeats, jscc=jscc, task=task,
                              channel_kind=kind, seed=cfg.seed + _SEED_EVAL, run_id=run_id,
                              alpha=1.0, train_snr=pol.describe(), with_psnr=True)
    raise ConfigError(f"system {cfg.system!r} is not valid for task=classify")


def eval_classify(cfg: ExperimentConfig, out_dir: str, log) -> list[MetricsRow]:
    """Evaluation-only pass from saved checkpoints."""
    train, test = _load_data(cfg)
    ckpt_dir = os.path.join(out_dir, "checkpoints")
    arch = _classify_arch(cfg, train)
    grid = cfg.get("channel", "test_snrs")
    kind = cfg.get("channel", "kind")
    repeats = cfg.get("train", "repeats")
    classes = int(train.labels.max()) + 1
    task = TaskModel(train.input_shape, "classifier", out_dim=classes,
                     seed=cfg.seed + _SEED_TASK, hidden=cfg.get("model", "task_hidden"))
    pol = _train_snr_policy(cfg)
    if cfg.system == "upper":
        _load_params(os.path.join(ckpt_dir, "xi_pre.ckpt"), {"task": task.params})
        return evaluate_sweep("upper", test, grid, repeats, task=task, channel_kind=kind,
                              seed=cfg.seed + _SEED_EVAL, run_id=cfg.run_id(), alpha=0.0,
                              train_snr="clean")
    if cfg.system == "gocom":
        goe, dem = build_pair(arch, cfg.seed + _SEED_MODELS)
        _load_params(os.path.join(ckpt_dir, "gocom.ckpt"),
                     {"goe": goe.params, "demapper": dem.params, "task": task.params})
        return evaluate_sweep("gocom", test, grid, repeats, goe=goe, demapper=dem, task=task,
                              channel_kind=kind, seed=cfg.seed + _SEED_EVAL, run_id=cfg.run_id(),
                              alpha=cfg.get("train", "alpha"), train_snr=pol.describe())
    if cfg.system == "jscc":
        jscc = JsccModel.build(arch, cfg.seed + _SEED_MODELS)
        _load_params(os.path.join(ckpt_dir, "xi_pre.ckpt"), {"task": task.params})
        _load_params(os.path.join(ckpt_dir, "jscc.ckpt"),
                     {"encoder": jscc.encoder.params, "decoder": jscc.decoder.params})
        return evaluate_sweep("jscc+task", test, grid, repeats, jscc=jscc, task=task,
                              channel_kind=kind, seed=cfg.seed + _SEED_EVAL, run_id=cfg.run_id(),
                              alpha=1.0, train_snr=pol.describe(), with_psnr=True)
    raise ConfigError(f"system {cfg.system!r} is not valid for eval of task=classify")


# -- RL pipeline ----------------------------------------------------------------

def _rl_dqn_config(cfg: ExperimentConfig, train_snr, total_steps, lr, seed) -> DqnConfig:
    return DqnConfig(gamma=cfg.get("rl", "gamma"), eps_start=cfg.get("rl", "eps_start"),
                     eps_end=cfg.get("rl", "eps_end"),
                     eps_decay_steps=cfg.get("rl", "eps_decay_steps"),
                     sync_period=cfg.get("rl", "sync_period"), capacity=cfg.get("rl", "capacity"),
                     batch=cfg.get("rl", "batch"), lr=lr, alpha=cfg.get("rl", "alpha"),
                     train_snr=train_snr, total_steps=total_steps, seed=seed,
                     warmup=cfg.get("rl", "warmup"), train_every=cfg.get("rl", "train_every"),
                     freeze_task=cfg.get("rl", "freeze_task"))


def _new_qnet(cfg: ExperimentConfig, seed: int) -> TaskModel:
    return TaskModel(OBS_SHAPE, "qnet", out_dim=3, seed=seed,
                     hidden=cfg.get("model", "task_hidden"))


def _pretrain_qnet(cfg: ExperimentConfig, ckpt_dir, log) -> TaskModel:
    qnet = _new_qnet(cfg, cfg.seed + _SEED_TASK)
    path = os.path.join(ckpt_dir, "xi_pre.ckpt")
    if os.path.exists(path):
        _load_params(path, {"task": qnet.params})
        log(f"reused pretrained q-network from {path}")
        return qnet
    online = QComposition(None, None, qnet)
    target = QComposition(None, None, _new_qnet(cfg, cfg.seed + _SEED_TASK))
    dcfg = _rl_dqn_config(cfg, None, cfg.get("rl", "pretrain_steps"),
                          cfg.get("rl", "pretrain_lr"), cfg.seed + _SEED_TRAIN)
    rewards, _ = train_rl(CatchEnv(seed=cfg.seed + _SEED_ENV), online, target, dcfg)
    _save_params(path, {"task": qnet.params})
    log(f"pretrained q-network {dcfg.total_steps} steps "
        f"(last-20-episode reward {np.mean(rewards[-20:]):.2f}) -> {path}")
    return qnet


def run_rl(cfg: ExperimentConfig, out_dir: str, log, eval_only: bool = False) -> list[MetricsRow]:
    ckpt_dir = os.path.join(out_dir, "checkpoints")
    os.makedirs(ckpt_dir, exist_ok=True)
    grid = cfg.get("channel", "test_snrs")
    kind = cfg.get("channel", "kind")
    episodes = cfg.get("rl", "eval_episodes")
    run_id = cfg.run_id()
    alpha = cfg.get("rl", "alpha")

    def rows_for(system, values, train_snr_desc):
        out = []
        for snr, (m, s) in zip(grid, values):
            out.append(MetricsRow(run_id=run_id, task="rl", system=system, channel=kind,
                                  alpha=alpha, train_snr=train_snr_desc, test_snr_db=float(snr),
                                  metric="reward_mean", value=m, std=s, repeats=episodes))
        return out

    if cfg.system == "random":
        m, s = eval_random(CatchEnv(), episodes, seed=cfg.seed + _SEED_EVAL)
        log(f"random policy reward {m:.3f} +- {s:.3f}")
        return rows_for("random", [(m, s)] * len(grid), "none")

    if cfg.system == "upper":
        qnet = _pretrain_qnet(cfg, ckpt_dir, log)
        policy = QComposition(None, None, qnet)
        m, s = eval_policy(policy, CatchEnv(), episodes, seed=cfg.seed + _SEED_EVAL)
        log(f"upper-bound (no channel) reward {m:.3f} +- {s:.3f}")
        return rows_for("upper", [(m, s)] * len(grid), "clean")

    if cfg.system != "gocom":
        raise ConfigError(f"system {cfg.system!r} is not valid for task=rl")

    train_snr = _fixed_train_snr(cfg)
    # RL models are trained per-SNR; no gate regardless of the supervised setting
    arch = make_arch(OBS_SHAPE, cfg.get("model", "rate"), kind="dense", snr_gate=False)
    goe, dem = build_pair(arch, cfg.seed + _SEED_MODELS)
    qnet = _new_qnet(cfg, cfg.seed + _SEED_TASK + 100)
    gocom_path = os.path.join(ckpt_dir, "gocom.ckpt")
    online = QComposition(goe, dem, qnet, kind, train_snr)
    if eval_only:
        _load_params(gocom_path, {"goe": goe.params, "demapper": dem.params, "task": qnet.params})
        log(f"loaded gocom models from {gocom_path}")
    else:
        xi_pre = _pretrain_qnet(cfg, ckpt_dir, log)
        qnet.params.copy_values_from(xi_pre.params)
        goe_t, dem_t = build_pair(arch, cfg.seed + _SEED_MODELS + 1)
        target = QComposition(goe_t, dem_t, _new_qnet(cfg, cfg.seed + _SEED_TASK + 101),
                              kind, train_snr)
        dcfg = _rl_dqn_config(cfg, train_snr, cfg.get("rl", "total_steps"),
                              cfg.get("rl", "lr"), cfg.seed + _SEED_TRAIN + 1)
        rewards, _ = train_rl(CatchEnv(seed=cfg.seed + _SEED_ENV + 1), online, target, dcfg)
        log(f"gocom dqn trained {dcfg.total_steps} steps at "
            f"{'clean' if train_snr is None else f'{train_snr:g} dB'} "
            f"(last-20-episode reward {np.mean(rewards[-20:]):.2f})")
        _save_params(gocom_path, {"goe": goe.params, "demapper": dem.params, "task": qnet.params})

    vals = []
    for i, snr in enumerate(grid):
        q = QComposition(goe, dem, qnet, kind, float(snr))
        m, s = eval_policy(q, CatchEnv(), episodes, seed=cfg.seed + _SEED_EVAL + i)
        vals.append((m, s))
        log(f"gocom eval @{snr:g} dB: {m:.3f} +- {s:.3f}")
    desc = "clean" if train_snr is None else f"fixed:{train_snr:g}"
    return rows_for("gocom", vals, desc)


# -- entry points -----------------------------------------------------------------

def run(cfg: ExperimentConfig, out_dir: str, mode: str = "train") -> list[MetricsRow]:
    """Execute one experiment; writes metrics.csv, checkpoints and run.log."""
    os.makedirs(out_dir, exist_ok=True)
    log = RunLog(os.path.join(out_dir, "run.log"))
    try:
        log(f"run start: task={cfg.task} system={cfg.system} seed={cfg.seed} mode={mode}")
        if cfg.task == "classify":
            if mode == "pretrain":
                train, test = _load_data(cfg)
                ckpt_dir = os.path.join(out_dir, "checkpoints")
                os.makedirs(ckpt_dir, exist_ok=True)
                task = _pretrain_classifier(cfg, train, ckpt_dir, log)
                rows = evaluate_sweep("upper", test, cfg.get("channel", "test_snrs"),
                                      cfg.get("train", "repeats"), task=task,
                                      channel_kind=cfg.get("channel", "kind"),
                                      seed=cfg.seed + _SEED_EVAL, run_id=cfg.run_id(),
                                      alpha=0.0, train_snr="clean")
            elif mode == "eval":
                rows = eval_classify(cfg, out_dir, log)
            else:
                rows = run_classify(cfg, out_dir, log)
        else:
            if mode == "pretrain":
                ckpt_dir = os.path.join(out_dir, "checkpoints")
                os.makedirs(ckpt_dir, exist_ok=True)
                qnet = _pretrain_qnet(cfg, ckpt_dir, log)
                policy = QComposition(None, None, qnet)
                episodes = cfg.get("rl", "eval_episodes")
                m, s = eval_policy(policy, CatchEnv(), episodes, seed=cfg.seed + _SEED_EVAL)
                rows = [MetricsRow(run_id=cfg.run_id(), task="rl", system="upper",
                                   channel=cfg.get("channel", "kind"), alpha=0.0,
                                   train_snr="clean", test_snr_db=float(snr),
                                   metric="reward_mean", value=m, std=s, repeats=episodes)
                        for snr in cfg.get("channel", "test_snrs")]
            else:
                rows = run_rl(cfg, out_dir, log, eval_only=(mode == "eval"))
        path = os.path.join(out_dir, "metrics.csv")
        write_metrics_csv(path, rows)
        log(f"wrote {len(rows)} rows -> {path}")
        return rows
    finally:
        log.close()


def sweep(cfg: ExperimentConfig, out_dir: str, axis: str, values: list[str]) -> list[MetricsRow]:
    """One run per axis value; merged metrics.csv sorted by (system, alpha, snr)."""
    if axis not in ("alpha", "snr"):
        raise ConfigError(f"sweep axis must be alpha or snr, got {axis!r}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    os.makedirs(out_dir, exist_ok=True)
    merged: list[MetricsRow] = []
    merged_path = os.path.join(out_dir, "metrics.csv")
    for v in values:
        sub = ExperimentConfig(dict(cfg.values))
        if axis == "alpha":
            sub.set("train" if cfg.task == "classify" else "rl", "alpha", v)
        else:
            sub.set("channel", "train_snr", f"fixed:{v}")
        sub_dir = os.path.join(out_dir, f"{axis}_{v}")
        try:
            merged.extend(run(sub, sub_dir))
        except Exception:
            if merged:
                write_metrics_csv(merged_path, sort_rows(merged))
            raise
    write_metrics_csv(merged_path, sort_rows(merged))
    return merged

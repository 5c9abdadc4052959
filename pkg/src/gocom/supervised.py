"""End-to-end supervised training through the channel, plus the JSCC baseline.

One minibatch step: encode -> transmit (one realization) -> demap -> task,
then backprop of (1-alpha)*task_loss + alpha*mse and an optimizer step on
encoder, demapper and (unless frozen) task parameters.  The JSCC trainer is
the exact same step with no task head and alpha pinned to 1, so the two
systems are bitwise comparable under shared seeds.  alpha e {0, 1} are
short-circuited exactly rather than blended through float arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import tensor as T
from .channel import ChannelConfig, transmit
from .data import Dataset
from .models import DemapperModel, GoeModel, JsccModel, TaskModel
from .objective import psnr_from_mse
from .persist import MetricsRow
from .tensor import Tape, Tensor, opt_step


@dataclass
class SnrPolicy:
    """Training-time SNR selection: fixed(db), uniform range, or clean."""

    mode: str                  # fixed | range | clean
    lo: float = 0.0
    hi: float = 0.0

    def __post_init__(self):
        if self.mode not in ("fixed", "range", "clean"):
            raise ValueError(f"unknown SNR policy mode: {self.mode}")
        if self.mode == "range" and self.lo > self.hi:
            raise ValueError(f"range lo {self.lo} > hi {self.hi}")

    @classmethod
    def parse(cls, spec: str) -> "SnrPolicy":
        parts = str(spec).split(":")
        if parts[0] == "clean":
            return cls("clean")
        if parts[0] == "fixed" and len(parts) == 2:
            return cls("fixed", lo=float(parts[1]), hi=float(parts[1]))
        if parts[0] == "range" and len(parts) == 3:
            return cls("range", lo=float(parts[1]), hi=float(parts[2]))
        raise ValueError(f"bad SNR policy spec: {spec!r}")

    def sample(self, rng: np.random.Generator) -> Optional[float]:
        if self.mode == "clean":
            return None
        if self.mode == "fixed":
            return self.lo
        return float(rng.uniform(self.lo, self.hi))

    def describe(self) -> str:
        if self.mode == "clean":
            return "clean"
        if self.mode == "fixed":
            return f"fixed:{self.lo:g}"
        return f"range:{self.lo:g}:{self.hi:g}"


@dataclass
class TrainConfig:
    alpha: float = 0.1
    lr: float = 1e-4
    batch: int = 32
    epochs: int = 30
    snr_policy: SnrPolicy = field(default_factory=lambda: SnrPolicy("range", -2.0, 20.0))
    freeze_task: bool = False
    seed: int = 0
    rule: str = "adam"

    def __post_init__(self):
        if self.batch < 1 or self.epochs < 0:
            raise ValueError("batch must be >= 1 and epochs >= 0")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")


class JointTrainer:
    """Minibatch trainer for the composed system (or the JSCC pair when task is None)."""

    def __init__(self, goe: GoeModel, demapper: DemapperModel, task: Optional[TaskModel],
                 data: Dataset, channel_kind: str, cfg: TrainConfig):
        if task is None and cfg.alpha != 1.0:
            raise ValueError("reconstruction-only training requires alpha == 1")
        self.goe, self.demapper, self.task = goe, demapper, task
        self.data, self.channel_kind, self.cfg = data, channel_kind, cfg
        ss = np.random.SeedSequence(cfg.seed).spawn(3)
        self._rng_data = np.random.default_rng(ss[0])
        self._rng_chan = np.random.default_rng(ss[1])
        self._rng_snr = np.random.default_rng(ss[2])
        self._order = np.empty(0, dtype=np.int64)
        self._pos = 0
        self.steps_done = 0

    def _next_batch(self):
        n = self.data.n
        if self._pos + self.cfg.batch > self._order.size:
            self._order = self._rng_data.permutation(n)
            self._pos = 0
        idx = self._order[self._pos:self._pos + self.cfg.batch]
        self._pos += self.cfg.batch
        return self.data.inputs[idx], self.data.labels[idx]

    def step(self) -> float:
        """One forward/backward/update; returns the batch objective value."""
        cfg = self.cfg
        xb, yb = self._next_batch()
        snr = cfg.snr_policy.sample(self._rng_snr)
        chan = ChannelConfig(self.channel_kind, snr)
        x = Tensor(xb)
        with Tape() as tape:
            z = self.goe.encode(x, snr)
            zhat, _ = transmit(z, chan, self._rng_chan)
            w = self.demapper.demap(zhat, snr)
            if cfg.alpha == 1.0:
                loss = T.mse(x, w)
            else:
                yhat = self.task.forward(w)
                l_task = T.softmax_cross_entropy(yhat, yb)
                if cfg.alpha == 0.0:
                    loss = l_task
                else:
                    loss = T.add(T.scale(l_task, 1.0 - cfg.alpha), T.scale(T.mse(x, w), cfg.alpha))
        tape.backward(loss)
        opt_step(self.goe.params, cfg.rule, cfg.lr)
        opt_step(self.demapper.params, cfg.rule, cfg.lr)
        if self.task is not None and len(self.task.params):
            if cfg.freeze_task or self.task.frozen:
                self.task.params.zero_grads()
            else:
                opt_step(self.task.params, cfg.rule, cfg.lr)
        self.steps_done += 1
        return loss.item()

    def train(self, log_every: int = 0) -> list[float]:
        """Run cfg.epochs full passes; returns per-epoch mean objective."""
        steps_per_epoch = max(1, self.data.n // self.cfg.batch)
        history = []
        for _ in range(self.cfg.epochs):
            vals = [self.step() for _ in range(steps_per_epoch)]
            history.append(float(np.mean(vals)))
        return history


def pretrain_task(task: TaskModel, data: Dataset, cfg: TrainConfig) -> TaskModel:
    """Train the task head on clean inputs (no channel); the upper-bound model."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
    steps_per_epoch = max(1, data.n // cfg.batch)
    for _ in range(cfg.epochs):
        order = rng.permutation(data.n)
        for k in range(steps_per_epoch):
            idx = order[k * cfg.batch:(k + 1) * cfg.batch]
            with Tape() as tape:
                logits = task.forward(Tensor(data.inputs[idx]))
                loss = T.softmax_cross_entropy(logits, data.labels[idx])
            tape.backward(loss)
            opt_step(task.params, cfg.rule, cfg.lr)
    return task


def train_jscc(jscc: JsccModel, data: Dataset, channel_kind: str, cfg: TrainConfig) -> JointTrainer:
    """Reconstruction-only training of the encoder/decoder pair; task never involved."""
    jcfg = TrainConfig(alpha=1.0, lr=cfg.lr, batch=cfg.batch, epochs=cfg.epochs,
                       snr_policy=cfg.snr_policy, seed=cfg.seed, rule=cfg.rule)
    trainer = JointTrainer(jscc.encoder, jscc.decoder, None, data, channel_kind, jcfg)
    trainer.train()
    return trainer


# -- evaluation ---------------------------------------------------------------

def eval_accuracy_clean(task: TaskModel, data: Dataset, batch: int = 512) -> float:
    hits = 0
    for k in range(0, data.n, batch):
        logits = task.forward(Tensor(data.inputs[k:k + batch]))
        hits += int(np.sum(np.argmax(logits.data, axis=1) == data.labels[k:k + batch]))
    return hits / data.n


def _eval_rng(seed: int, snr_idx: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, snr_idx, rep)))


def eval_through_channel(goe: GoeModel, demapper: DemapperModel, task: Optional[TaskModel],
                         data: Dataset, channel_kind: str, snr_db: Optional[float],
                         rng: np.random.Generator, batch: int = 512):
    """One pass over data at one SNR; returns (accuracy or None, mean reconstruction mse)."""
    chan = ChannelConfig(channel_kind, snr_db)
    hits = 0
    sq_sum, n_elem = 0.0, 0
    for k in range(0, data.n, batch):
        xb = data.inputs[k:k + batch]
        x = Tensor(xb)
        z = goe.encode(x, snr_db)
        zhat, _ = transmit(z, chan, rng)
        w = demapper.demap(zhat, snr_db)
        d = w.data - xb
        sq_sum += float(np.sum(d * d))
        n_elem += d.size
        if task is not None:
            logits = task.forward(w)
            hits += int(np.sum(np.argmax(logits.data, axis=1) == data.labels[k:k + batch]))
    acc = hits / data.n if task is not None else None
    return acc, sq_sum / n_elem


def evaluate_sweep(system: str, data: Dataset, snr_grid, repeats: int = 10, *,
                   goe: Optional[GoeModel] = None, demapper: Optional[DemapperModel] = None,
                   task: Optional[TaskModel] = None, jscc: Optional[JsccModel] = None,
                   channel_kind: str = "awgn", seed: int = 0, run_id: str = "run",
                   task_name: str = "classify", alpha: float = 0.0,
                   train_snr: str = "", with_psnr: bool = False) -> list[MetricsRow]:
    """Accuracy (and PSNR) rows over the test grid, repeats independent channel seeds.

    system: gocom (goe/demapper/task), jscc+task (jscc pair + frozen task),
    or upper (task on clean inputs; rows are SNR-independent).
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    rows: list[MetricsRow] = []

    def row(metric, snr_db, value, std):
        rows.append(MetricsRow(run_id=run_id, task=task_name, system=system,
                               channel=channel_kind, alpha=alpha, train_snr=train_snr,
                               test_snr_db=snr_db, metric=metric, value=value,
                               std=std, repeats=repeats))

    if system == "upper":
        acc = eval_accuracy_clean(task, data)
        for snr in snr_grid:
            row("accuracy", float(snr), acc, 0.0)
        return rows

    if system == "jscc+task":
        enc, dec = jscc.encoder, jscc.decoder
    elif system == "gocom":
        enc, dec = goe, demapper
    else:
        raise ValueError(f"unknown system: {system}")

    for i, snr in enumerate(snr_grid):
        accs, psnrs = [], []
        for rep in range(repeats):
            rng = _eval_rng(seed, i, rep)
            acc, m = eval_through_channel(enc, dec, task, data, channel_kind, float(snr), rng)
            if acc is not None:
                accs.append(acc)
            psnrs.append(psnr_from_mse(m, 1.0))
        if accs:
            row("accuracy", float(snr), float(np.mean(accs)), float(np.std(accs)))
        if with_psnr:
            row("psnr_db", float(snr), float(np.mean(psnrs)), float(np.std(psnrs)))
    return rows

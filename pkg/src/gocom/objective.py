"""Losses and metrics for the combined goal + reconstruction objective.

The scalar functions here operate on plain floats/arrays; the taped loss
construction used during training lives in the trainers, built from the
same definitions.  alpha blends task loss against the communication
(reconstruction) loss; alpha=0 is pure task, alpha=1 is pure JSCC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class ObjectiveConfig:
    alpha: float = 0.1
    task_loss: str = "cross_entropy"     # cross_entropy | negated_reward
    comm_loss: str = "mse"

    def __post_init__(self):
        _check_alpha(self.alpha)


def _check_alpha(alpha: float) -> None:
    if not (0.0 <= alpha <= 1.0):
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")


def combined_loss(l_task: float, l_comm: float, alpha: float) -> float:
    """(1 - alpha) * l_task + alpha * l_comm, with exact limits at 0 and 1."""
    _check_alpha(alpha)
    if alpha == 0.0:
        return l_task
    if alpha == 1.0:
        return l_comm
    return (1.0 - alpha) * l_task + alpha * l_comm


def comm_loss(x, w) -> float:
    """Mean squared error between source and demapper output."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if x.shape != w.shape:
        raise ValueError(f"comm_loss: shape mismatch {x.shape} vs {w.shape}")
    d = x - w
    return float(np.mean(d * d))


def psnr(x, xhat, max_val: float) -> float:
    """10 * log10(max_val^2 / MSE), in dB."""
    m = comm_loss(x, xhat)
    return psnr_from_mse(m, max_val)


def psnr_from_mse(mse_value: float, max_val: float) -> float:
    if mse_value <= 0.0:
        raise ValueError("infinite PSNR: MSE is zero")
    return 10.0 * math.log10(max_val * max_val / mse_value)


def modified_reward(reward: float, x, w, alpha: float) -> float:
    """(1 - alpha) * R - alpha * comm_loss(x, w).

    Maximization convention: the exact negation of the minimization-form
    blended reward, so standard return-maximizing RL machinery applies.
    alpha=0 returns the raw reward bit-exactly.
    """
    _check_alpha(alpha)
    if alpha == 0.0:
        return float(reward)
    return (1.0 - alpha) * float(reward) - alpha * comm_loss(x, w)


def discounted_return(rewards, gamma: float) -> float:
    """Sum of gamma^t * r_t over the sequence."""
    if not (0.0 <= gamma <= 1.0):
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    total = 0.0
    g = 1.0
    for r in rewards:
        total += g * float(r)
        g *= gamma
    return total


def accuracy(logits, labels) -> float:
    """Fraction of argmax(logits) == label; ties go to the lowest class index."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],) or logits.shape[0] == 0:
        raise ValueError(f"accuracy: need nonempty (B,C) and (B,), got {logits.shape}, {labels.shape}")
    pred = np.argmax(logits, axis=1)    # argmax returns the first (lowest) max index
    return float(np.mean(pred == labels))

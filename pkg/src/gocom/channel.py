"""Differentiable stochastic channel layer.

Complex signals are stored as interleaved reals (re0, im0, re1, im1, ...),
one block of s symbols per batch row.  Power normalization and transmission
are taped ops: the sampled noise and fading gain are treated as constants,
so the gradient of the received block with respect to the transmitted block
is the identity (reparameterized stochastic layer).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .tensor import Tensor, _accum, record, register_primitive


class ChannelError(ValueError):
    pass


class ComplexBlock:
    """s complex symbols per batch row, interleaved in a (B, 2s) tensor."""

    def __init__(self, tensor: Tensor, s: int):
        if tensor.data.shape[-1] != 2 * s:
            raise ChannelError(f"expected last dim {2 * s} for {s} symbols, got {tensor.data.shape}")
        self.tensor = tensor
        self.s = int(s)

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    def symbol_power(self) -> np.ndarray:
        """Mean |z_i|^2 per block: (1/s) * sum of squares of the 2s reals."""
        return np.sum(self.data * self.data, axis=-1) / self.s

    def as_complex(self) -> np.ndarray:
        shp = self.data.shape[:-1] + (self.s, 2)
        pairs = self.data.reshape(shp)
        return pairs[..., 0] + 1j * pairs[..., 1]


@dataclass
class ChannelConfig:
    """Channel law: kind in {awgn, slow_fading}; snr_db None = noiseless sentinel."""

    kind: str = "awgn"
    snr_db: Optional[float] = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("awgn", "slow_fading"):
            raise ChannelError(f"unknown channel kind: {self.kind}")
        if self.snr_db is not None and not np.isfinite(self.snr_db):
            raise ChannelError("snr_db must be finite (use None for the noiseless sentinel)")

    @property
    def noiseless(self) -> bool:
        return self.snr_db is None

    def noise_power(self) -> float:
        return 0.0 if self.noiseless else snr_to_noise_power(self.snr_db)

    def make_rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


@dataclass
class ChannelRealization:
    """Sampled constants of one transmission: fading gain and noise."""

    c: Optional[np.ndarray] = None          # complex gain per block (slow fading)
    noise: Optional[np.ndarray] = None      # interleaved reals, same shape as z
    redraws: int = 0
    extras: dict = field(default_factory=dict)


def snr_to_noise_power(snr_db: float) -> float:
    """sigma^2 = 10^(-snr_db/10); signal power is fixed to 1 by normalization."""
    return 10.0 ** (-float(snr_db) / 10.0)


def normalize_power(raw: Tensor, s: int) -> ComplexBlock:
    """Scale each block to unit average symbol power (differentiable).

    out = raw / sqrt((1/s) * sum(raw^2))  per block (last axis).
    """
    if raw.data.shape[-1] != 2 * s:
        raise ChannelError(f"normalize_power: need last dim {2 * s}, got {raw.data.shape}")
    sq = np.sum(raw.data * raw.data, axis=-1, keepdims=True)
    if np.any(sq == 0.0):
        raise ChannelError("zero-power signal")
    q = sq / s                                  # mean symbol power per block
    inv = 1.0 / np.sqrt(q)
    out = Tensor(raw.data * inv)

    def bwd(g):
        # d(x_i * q^-1/2)/dx_j = q^-1/2 (delta_ij - x_i x_j / (s q))
        dot = np.sum(g * raw.data, axis=-1, keepdims=True)
        _accum(raw, inv * (g - raw.data * (dot / (s * q))))

    record("normalize_power", (raw,), out, bwd)
    return ComplexBlock(out, s)


def _interleaved_complex_div(n: np.ndarray, c: np.ndarray, s: int) -> np.ndarray:
    """n / c where n is interleaved (B, 2s) and c is one complex gain per row."""
    pairs = n.reshape(n.shape[:-1] + (s, 2))
    nc = pairs[..., 0] + 1j * pairs[..., 1]
    eq = nc / c[..., None]
    out = np.empty_like(pairs)
    out[..., 0] = eq.real
    out[..., 1] = eq.imag
    return out.reshape(n.shape)


def transmit(z: ComplexBlock, cfg: ChannelConfig, rng: Optional[np.random.Generator] = None,
             realization: Optional[ChannelRealization] = None):
    """Send a power-normalized block through the channel.

    awgn:        zhat = z + n,          n_i ~ CN(0, sigma^2)
    slow_fading: y = c z + n, c ~ CN(0,1) per block, then perfect-CSI
                 equalization zhat = z + n/c (computed in that exact form).

    Pass ``realization`` to replay stored constants (frozen channel);
    otherwise they are drawn from ``rng``.  Returns (zhat, realization).
    Gradient contract: d zhat / d z = identity.
    """
    s = z.s
    shape = z.data.shape
    blocks = shape[:-1]

    if cfg.noiseless:
        return z, ChannelRealization()

    sigma2 = cfg.noise_power()
    if realization is None:
        if rng is None:
            rng = cfg.make_rng()
        noise = rng.normal(0.0, np.sqrt(sigma2 / 2.0), size=shape)
        c = None
        redraws = 0
        if cfg.kind == "slow_fading":
            cr = rng.normal(0.0, np.sqrt(0.5), size=blocks)
            ci = rng.normal(0.0, np.sqrt(0.5), size=blocks)
            c = cr + 1j * ci
            bad = np.abs(c) < 1e-12
            while np.any(bad):
                redraws += int(bad.sum())
                c = np.where(bad, rng.normal(0.0, np.sqrt(0.5), size=blocks)
                             + 1j * rng.normal(0.0, np.sqrt(0.5), size=blocks), c)
                bad = np.abs(c) < 1e-12
        realization = ChannelRealization(c=c, noise=noise, redraws=redraws)

    if cfg.kind == "awgn":
        eff = realization.noise
    else:
        eff = _interleaved_complex_div(realization.noise, realization.c, s)

    out = Tensor(z.data + eff)

    def bwd(g):
        _accum(z.tensor, g)

    record("transmit", (z.tensor,), out, bwd)
    return ComplexBlock(out, s), realization


def _normalize_for_suite(raw: Tensor, s: int = 2) -> Tensor:
    return normalize_power(raw, s).tensor


register_primitive("normalize_power", _normalize_for_suite, 1)

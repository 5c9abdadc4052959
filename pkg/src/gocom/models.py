"""Network zoo: goal-oriented encoder, demapper, task heads, JSCC pair.

Two desk-scale architectures are provided.  "conv" is the supervised stack
(two strided conv blocks into a dense projection, mirrored by the demapper
with transposed convs); "dense" is the RL stack (single hidden dense
layer).  The encoder's final stage is always power normalization, so its
output is a unit-average-power ComplexBlock.  An optional SNR gate
(pooled features + current SNR -> sigmoid per-channel scale) conditions
each hidden block; with the gate disabled the forward pass never reads the
SNR argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from . import tensor as T
from .channel import ChannelConfig, ComplexBlock, normalize_power, transmit
from .tensor import ParamSet, Tensor

# SNR value fed to the gates when the channel is the noiseless sentinel.
CLEAN_GATE_SNR_DB = 40.0
_SNR_INPUT_SCALE = 1.0 / 20.0


def symbols_for_rate(input_dims: int, r) -> int:
    """Transmit symbol count for a bandwidth compression ratio r (0 < r <= 1)."""
    if input_dims < 1:
        raise ValueError(f"input_dims must be >= 1, got {input_dims}")
    r = float(Fraction(r) if isinstance(r, str) else r)
    if not (0.0 < r <= 1.0):
        raise ValueError(f"rate must lie in (0, 1], got {r}")
    return max(1, int(math.floor(input_dims * r + 0.5)))


def he_normal(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    return rng.normal(0.0, math.sqrt(2.0 / fan_in), size=shape)


def _dense_params(ps: ParamSet, name: str, rng, din: int, dout: int, scale: float = 2.0):
    ps.add(f"{name}/w", rng.normal(0.0, math.sqrt(scale / din), size=(din, dout)))
    ps.add(f"{name}/b", np.zeros(dout))


def _dense(ps: ParamSet, name: str, x: Tensor) -> Tensor:
    return T.add_bias(T.matmul(x, ps[f"{name}/w"]), ps[f"{name}/b"])


class SnrGate:
    """Simplified attention module: (pooled features, snr) -> channel scales."""

    HIDDEN = 16

    def __init__(self, ps: ParamSet, name: str, channels: int, rng):
        self.name = name
        self.channels = channels
        _dense_params(ps, f"{name}/fc1", rng, channels + 1, self.HIDDEN)
        _dense_params(ps, f"{name}/fc2", rng, self.HIDDEN, channels, scale=1.0)

    def apply(self, ps: ParamSet, x: Tensor, snr_db: float) -> Tensor:
        pooled = T.mean_pool(x, axes=tuple(range(1, x.data.ndim - 1))) if x.data.ndim > 2 else x
        col = Tensor(np.full((x.data.shape[0], 1), snr_db * _SNR_INPUT_SCALE))
        h = T.relu(_dense(ps, f"{self.name}/fc1", T.concat(pooled, col)))
        g = T.sigmoid(_dense(ps, f"{self.name}/fc2", h))
        return T.scale_channels(x, g)


def _gate_snr(snr_db: Optional[float]) -> float:
    return CLEAN_GATE_SNR_DB if snr_db is None else float(snr_db)


def _conv_out(hw, stride=2, k=3, p=1):
    return ((hw[0] + 2 * p - k) // stride + 1, (hw[1] + 2 * p - k) // stride + 1)


@dataclass
class ArchSpec:
    """Shared geometry for an encoder/demapper pair."""

    kind: str                 # conv | dense
    input_shape: tuple        # (H, W, C)
    s: int                    # transmit symbols
    snr_gate: bool = False
    hidden: int = 256         # dense arch hidden width
    c1: int = 16              # conv arch channel widths
    c2: int = 32

    @property
    def input_dims(self) -> int:
        return int(np.prod(self.input_shape))


def make_arch(input_shape, rate, kind: str = "conv", snr_gate: bool = False,
              hidden: int = 256) -> ArchSpec:
    dims = int(np.prod(input_shape))
    return ArchSpec(kind=kind, input_shape=tuple(input_shape),
                    s=symbols_for_rate(dims, rate), snr_gate=snr_gate, hidden=hidden)


class GoeModel:
    """Encoder f: source -> unit-power complex block of arch.s symbols."""

    def __init__(self, arch: ArchSpec, seed: int):
        self.arch = arch
        self.params = ParamSet()
        rng = np.random.default_rng(seed)
        h, w, c = arch.input_shape
        if arch.kind == "conv":
            self.hw1 = _conv_out((h, w))
            self.hw2 = _conv_out(self.hw1)
            self.params.add("conv1/w", he_normal(rng, (3, 3, c, arch.c1), 9 * c))
            self.params.add("conv1/b", np.zeros(arch.c1))
            self.params.add("prelu1/slope", np.full(arch.c1, 0.25))
            self.params.add("conv2/w", he_normal(rng, (3, 3, arch.c1, arch.c2), 9 * arch.c1))
            self.params.add("conv2/b", np.zeros(arch.c2))
            self.params.add("prelu2/slope", np.full(arch.c2, 0.25))
            feat = self.hw2[0] * self.hw2[1] * arch.c2
            _dense_params(self.params, "proj", rng, feat, 2 * arch.s, scale=1.0)
            self.gates = [SnrGate(self.params, f"gate{i}", ch, rng)
                          for i, ch in enumerate((arch.c1, arch.c2), 1)] if arch.snr_gate else []
        elif arch.kind == "dense":
            dims = arch.input_dims
            _dense_params(self.params, "fc1", rng, dims, arch.hidden)
            self.params.add("prelu1/slope", np.full(arch.hidden, 0.25))
            _dense_params(self.params, "proj", rng, arch.hidden, 2 * arch.s, scale=1.0)
            self.gates = [SnrGate(self.params, "gate1", arch.hidden, rng)] if arch.snr_gate else []
        else:
            raise ValueError(f"unknown arch kind: {arch.kind}")

    def encode(self, x: Tensor, snr_db: Optional[float] = None) -> ComplexBlock:
        a = self.arch
        g = _gate_snr(snr_db)
        if x.data.shape[1:] != a.input_shape and x.data.shape[1:] != (a.input_dims,):
            raise T.ShapeError("goe_encode", f"input {x.data.shape[1:]} does not match {a.input_shape}")
        if a.kind == "conv":
            if x.data.ndim == 2:
                x = T.reshape(x, (x.data.shape[0],) + a.input_shape)
            h = T.prelu(T.add_bias(T.conv2d(x, self.params["conv1/w"], 2, 1),
                                   self.params["conv1/b"]), self.params["prelu1/slope"])
            if self.gates:
                h = self.gates[0].apply(self.params, h, g)
            h = T.prelu(T.add_bias(T.conv2d(h, self.params["conv2/w"], 2, 1),
                                   self.params["conv2/b"]), self.params["prelu2/slope"])
            if self.gates:
                h = self.gates[1].apply(self.params, h, g)
            raw = _dense(self.params, "proj", T.flatten(h))
        else:
            if x.data.ndim != 2:
                x = T.flatten(x)
            h = T.prelu(_dense(self.params, "fc1", x), self.params["prelu1/slope"])
            if self.gates:
                h = self.gates[0].apply(self.params, h, g)
            raw = _dense(self.params, "proj", h)
        return normalize_power(raw, a.s)


class DemapperModel:
    """Demapper k: received block -> sigmoid output with the source's shape."""

    def __init__(self, arch: ArchSpec, seed: int):
        self.arch = arch
        self.params = ParamSet()
        rng = np.random.default_rng(seed)
        h, w, c = arch.input_shape
        if arch.kind == "conv":
            self.hw1 = _conv_out((h, w))
            self.hw2 = _conv_out(self.hw1)
            feat = self.hw2[0] * self.hw2[1] * arch.c2
            _dense_params(self.params, "proj", rng, 2 * arch.s, feat)
            self.params.add("prelu0/slope", np.full(arch.c2, 0.25))
            self.params.add("tconv1/w", he_normal(rng, (3, 3, arch.c1, arch.c2), 9 * arch.c2))
            self.params.add("tconv1/b", np.zeros(arch.c1))
            self.params.add("prelu1/slope", np.full(arch.c1, 0.25))
            self.params.add("tconv2/w", he_normal(rng, (3, 3, c, arch.c1), 9 * arch.c1))
            self.params.add("tconv2/b", np.zeros(c))
            self.gates = [SnrGate(self.params, f"gate{i}", ch, rng)
                          for i, ch in enumerate((arch.c2, arch.c1), 1)] if arch.snr_gate else []
        elif arch.kind == "dense":
            _dense_params(self.params, "fc1", rng, 2 * arch.s, arch.hidden)
            self.params.add("prelu1/slope", np.full(arch.hidden, 0.25))
            _dense_params(self.params, "out", rng, arch.hidden, arch.input_dims, scale=1.0)
            self.gates = [SnrGate(self.params, "gate1", arch.hidden, rng)] if arch.snr_gate else []
        else:
            raise ValueError(f"unknown arch kind: {arch.kind}")

    def demap(self, zhat: ComplexBlock, snr_db: Optional[float] = None) -> Tensor:
        a = self.arch
        g = _gate_snr(snr_db)
        if zhat.s != a.s:
            raise T.ShapeError("demap", f"expected {a.s} symbols, got {zhat.s}")
        x = zhat.tensor
        if a.kind == "conv":
            b = x.data.shape[0]
            h = T.reshape(_dense(self.params, "proj", x), (b,) + self.hw2 + (a.c2,))
            h = T.prelu(h, self.params["prelu0/slope"])
            if self.gates:
                h = self.gates[0].apply(self.params, h, g)
            h = T.prelu(T.add_bias(T.conv2d_transpose(h, self.params["tconv1/w"], 2, 1, self.hw1),
                                   self.params["tconv1/b"]), self.params["prelu1/slope"])
            if self.gates:
                h = self.gates[1].apply(self.params, h, g)
            out = T.add_bias(T.conv2d_transpose(h, self.params["tconv2/w"], 2, 1, a.input_shape[:2]),
                             self.params["tconv2/b"])
            return T.sigmoid(out)
        h = T.prelu(_dense(self.params, "fc1", x), self.params["prelu1/slope"])
        if self.gates:
            h = self.gates[0].apply(self.params, h, g)
        out = T.sigmoid(_dense(self.params, "out", h))
        return T.reshape(out, (x.data.shape[0],) + a.input_shape)


class TaskModel:
    """Task head h: classifier over C classes, q-network over A actions, or identity."""

    def __init__(self, input_shape, head: str, out_dim: int = 0, seed: int = 0,
                 frozen: bool = False, hidden: int = 128):
        self.input_shape = tuple(input_shape)
        self.head = head
        self.out_dim = int(out_dim)
        self.frozen = frozen
        self.hidden = hidden
        self.params = ParamSet()
        rng = np.random.default_rng(seed)
        h, w, c = self.input_shape
        if head == "classifier":
            self.hw1 = _conv_out((h, w))
            self.hw2 = _conv_out(self.hw1)
            self.params.add("conv1/w", he_normal(rng, (3, 3, c, 16), 9 * c))
            self.params.add("conv1/b", np.zeros(16))
            self.params.add("conv2/w", he_normal(rng, (3, 3, 16, 32), 9 * 16))
            self.params.add("conv2/b", np.zeros(32))
            feat = self.hw2[0] * self.hw2[1] * 32
            _dense_params(self.params, "fc1", rng, feat, hidden)
            _dense_params(self.params, "out", rng, hidden, out_dim, scale=1.0)
        elif head == "qnet":
            dims = int(np.prod(self.input_shape))
            _dense_params(self.params, "fc1", rng, dims, hidden)
            _dense_params(self.params, "out", rng, hidden, out_dim, scale=1.0)
        elif head == "identity":
            pass
        else:
            raise ValueError(f"unknown task head: {head}")

    def forward(self, w: Tensor) -> Tensor:
        if self.head == "identity":
            return w
        if self.head == "classifier":
            x = w if w.data.ndim == 4 else T.reshape(w, (w.data.shape[0],) + self.input_shape)
            h = T.relu(T.add_bias(T.conv2d(x, self.params["conv1/w"], 2, 1), self.params["conv1/b"]))
            h = T.relu(T.add_bias(T.conv2d(h, self.params["conv2/w"], 2, 1), self.params["conv2/b"]))
            h = T.relu(_dense(self.params, "fc1", T.flatten(h)))
            return _dense(self.params, "out", h)
        x = w if w.data.ndim == 2 else T.flatten(w)
        h = T.relu(_dense(self.params, "fc1", x))
        return _dense(self.params, "out", h)


@dataclass
class JsccModel:
    """Reconstruction autoencoder with the same shapes as (GoeModel, DemapperModel)."""

    encoder: GoeModel
    decoder: DemapperModel

    @classmethod
    def build(cls, arch: ArchSpec, seed: int) -> "JsccModel":
        return cls(encoder=GoeModel(arch, seed), decoder=DemapperModel(arch, seed + 1))

    def param_count(self) -> int:
        return self.encoder.params.total_count() + self.decoder.params.total_count()


def build_pair(arch: ArchSpec, seed: int) -> tuple[GoeModel, DemapperModel]:
    """Encoder/demapper pair with the deterministic seed layout JsccModel uses."""
    return GoeModel(arch, seed), DemapperModel(arch, seed + 1)


def compose(goe: GoeModel, channel_cfg: ChannelConfig, demapper: DemapperModel,
            task: Optional[TaskModel], x: Tensor, rng=None, snr_db="cfg",
            realization=None):
    """Full pipeline: encode -> transmit (one realization) -> demap -> task.

    Returns (yhat, w, z, zhat).  With task None (or identity) yhat is w.
    snr_db defaults to the channel config's SNR and is what the SNR gates see.
    """
    snr = channel_cfg.snr_db if snr_db == "cfg" else snr_db
    z = goe.encode(x, snr)
    zhat, _real = transmit(z, channel_cfg, rng, realization=realization)
    w = demapper.demap(zhat, snr)
    yhat = task.forward(w) if task is not None else w
    return yhat, w, z, zhat

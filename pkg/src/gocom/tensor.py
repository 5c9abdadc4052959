"""Dense float64 tensors with taped reverse-mode differentiation.

A ``Tape`` records every primitive application in execution order, which is
already a topological order, so the backward pass is a single reversed walk
that accumulates gradients additively.  Tapes are rebuilt on every forward
pass; running ops with no active tape skips recording entirely (inference
fast path).  All values are 64-bit reals in row-major order.
"""

from __future__ import annotations

import math
from typing import Callable, Optional, Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are invalid for a primitive."""

    def __init__(self, prim: str, detail: str):
        super().__init__(f"{prim}: {detail}")
        self.prim = prim


_DEBUG_FINITE = False


def set_debug_checks(enabled: bool) -> None:
    """Toggle NaN/Inf assertions on every primitive output (debug mode)."""
    global _DEBUG_FINITE
    _DEBUG_FINITE = bool(enabled)


class Tensor:
    """A dense float64 value.  Gradients live alongside the data."""

    __slots__ = ("data", "grad")

    def __init__(self, data):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(()))

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


def _accum(t: Tensor, g: np.ndarray, own: bool = False) -> None:
    """Add g into t.grad.  own=True transfers a freshly allocated array
    without copying; the caller must not reuse it afterwards."""
    if t.grad is None:
        t.grad = g if own else np.array(g, dtype=np.float64)
    else:
        t.grad += g


class Tape:
    """Ordered record of primitive applications for one forward pass."""

    def __init__(self):
        self.nodes: list[tuple[str, tuple[Tensor, ...], Tensor, Callable]] = []
        self._prev_active: Optional[Tape] = None

    def __enter__(self) -> "Tape":
        global _ACTIVE_TAPE
        self._prev_active = _ACTIVE_TAPE
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = self._prev_active
        return False

    def backward(self, root: Tensor) -> None:
        """Accumulate d(root)/d(input) into .grad of every reachable tensor."""
        if root.data.size != 1:
            raise ShapeError("backward", f"root must be scalar, got shape {root.data.shape}")
        _accum(root, np.ones_like(root.data))
        for _prim, inputs, output, bwd in reversed(self.nodes):
            if output.grad is None:
                continue
            bwd(output.grad)


_ACTIVE_TAPE: Optional[Tape] = None


def record(prim: str, inputs: Sequence[Tensor], output: Tensor, backward: Callable) -> Tensor:
    """Attach a node to the active tape (no-op when none is active)."""
    if _DEBUG_FINITE and not np.all(np.isfinite(output.data)):
        raise FloatingPointError(f"{prim}: non-finite value in output")
    if _ACTIVE_TAPE is not None:
        _ACTIVE_TAPE.nodes.append((prim, tuple(inputs), output, backward))
    return output


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError("matmul", f"incompatible shapes {a.data.shape} x {b.data.shape}")
    out = Tensor(a.data @ b.data)

    def bwd(g):
        _accum(a, g @ b.data.T, own=True)
        _accum(b, a.data.T @ g, own=True)

    return record("matmul", (a, b), out, bwd)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError("add", f"shape mismatch {a.data.shape} vs {b.data.shape}")
    out = Tensor(a.data + b.data)

    def bwd(g):
        _accum(a, g)
        _accum(b, g)

    return record("add", (a, b), out, bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError("sub", f"shape mismatch {a.data.shape} vs {b.data.shape}")
    out = Tensor(a.data - b.data)

    def bwd(g):
        _accum(a, g)
        _accum(b, -g, own=True)

    return record("sub", (a, b), out, bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError("mul", f"shape mismatch {a.data.shape} vs {b.data.shape}")
    out = Tensor(a.data * b.data)

    def bwd(g):
        _accum(a, g * b.data, own=True)
        _accum(b, g * a.data, own=True)

    return record("mul", (a, b), out, bwd)


def scale(x: Tensor, k: float) -> Tensor:
    k = float(k)
    out = Tensor(x.data * k)

    def bwd(g):
        _accum(x, g * k, own=True)

    return record("scale", (x,), out, bwd)


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """Broadcast-add a length-C bias over the last axis."""
    if b.data.ndim != 1 or x.data.shape[-1] != b.data.shape[0]:
        raise ShapeError("add_bias", f"bias {b.data.shape} does not match last dim of {x.data.shape}")
    out = Tensor(x.data + b.data)

    def bwd(g):
        _accum(x, g)
        _accum(b, g.reshape(-1, b.data.shape[0]).sum(axis=0), own=True)

    return record("add_bias", (x, b), out, bwd)


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, 0.0))

    def bwd(g):
        _accum(x, g * (x.data > 0.0), own=True)

    return record("relu", (x,), out, bwd)


def prelu(x: Tensor, slope: Tensor) -> Tensor:
    """PReLU with a learnable slope per channel (last axis)."""
    if slope.data.ndim != 1 or x.data.shape[-1] != slope.data.shape[0]:
        raise ShapeError("prelu", f"slope {slope.data.shape} does not match last dim of {x.data.shape}")
    neg = x.data < 0.0
    out = Tensor(np.where(neg, x.data * slope.data, x.data))

    def bwd(g):
        _accum(x, np.where(neg, g * slope.data, g), own=True)
        ds = (g * x.data * neg).reshape(-1, slope.data.shape[0]).sum(axis=0)
        _accum(slope, ds, own=True)

    return record("prelu", (x, slope), out, bwd)


def sigmoid(x: Tensor) -> Tensor:
    # Split by sign for numerical stability at large |x|.
    d = x.data
    s = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))), np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))
    out = Tensor(s)

    def bwd(g):
        _accum(x, g * s * (1.0 - s), own=True)

    return record("sigmoid", (x,), out, bwd)


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(int(v) for v in shape)
    if int(np.prod(shape)) != x.data.size:
        raise ShapeError("reshape", f"cannot reshape {x.data.shape} to {shape}")
    out = Tensor(x.data.reshape(shape))

    def bwd(g):
        _accum(x, g.reshape(x.data.shape))

    return record("reshape", (x,), out, bwd)


def flatten(x: Tensor) -> Tensor:
    """Collapse all axes after the first (batch) axis."""
    if x.data.ndim < 2:
        raise ShapeError("flatten", f"need rank >= 2, got {x.data.shape}")
    return reshape(x, (x.data.shape[0], int(np.prod(x.data.shape[1:]))))


def mean(x: Tensor) -> Tensor:
    out = Tensor(np.mean(x.data))
    n = x.data.size

    def bwd(g):
        _accum(x, np.full(x.data.shape, float(g) / n))

    return record("mean", (x,), out, bwd)


def mean_pool(x: Tensor, axes) -> Tensor:
    """Mean over the given axes (e.g. spatial pooling for the SNR gate)."""
    axes = tuple(sorted(int(a) for a in axes))
    out = Tensor(np.mean(x.data, axis=axes))
    n = int(np.prod([x.data.shape[a] for a in axes]))

    def bwd(g):
        _accum(x, np.broadcast_to(np.expand_dims(g, axes), x.data.shape) / n)

    return record("mean_pool", (x,), out, bwd)


def concat(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate along the last axis."""
    if a.data.shape[:-1] != b.data.shape[:-1]:
        raise ShapeError("concat", f"leading dims differ: {a.data.shape} vs {b.data.shape}")
    na = a.data.shape[-1]
    out = Tensor(np.concatenate([a.data, b.data], axis=-1))

    def bwd(g):
        _accum(a, g[..., :na])
        _accum(b, g[..., na:])

    return record("concat", (a, b), out, bwd)


def scale_channels(x: Tensor, s: Tensor) -> Tensor:
    """Multiply features by a per-sample, per-channel gate.

    x: (B, ..., C), s: (B, C); s broadcasts over any interior axes.
    """
    if x.data.shape[0] != s.data.shape[0] or x.data.shape[-1] != s.data.shape[-1] or s.data.ndim != 2:
        raise ShapeError("scale_channels", f"gate {s.data.shape} does not match {x.data.shape}")
    exp = (x.data.shape[0],) + (1,) * (x.data.ndim - 2) + (s.data.shape[-1],)
    sb = s.data.reshape(exp)
    out = Tensor(x.data * sb)

    def bwd(g):
        _accum(x, g * sb)
        red = tuple(range(1, x.data.ndim - 1))
        gs = (g * x.data).sum(axis=red) if red else (g * x.data)
        _accum(s, gs)

    return record("scale_channels", (x, s), out, bwd)


def gather_rows(x: Tensor, idx: np.ndarray) -> Tensor:
    """Pick x[i, idx[i]] for each row (Q-value selection)."""
    idx = np.asarray(idx, dtype=np.int64)
    if x.data.ndim != 2 or idx.shape != (x.data.shape[0],):
        raise ShapeError("gather_rows", f"need (B,C) and (B,), got {x.data.shape} and {idx.shape}")
    rows = np.arange(x.data.shape[0])
    out = Tensor(x.data[rows, idx])

    def bwd(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, (rows, idx), g)
        _accum(x, gx)

    return record("gather_rows", (x,), out, bwd)


# -- convolution ------------------------------------------------------------

_CONV_STRIDES = (1, 2, 4)


def _conv_geometry(prim, hw, k, stride, padding):
    if stride not in _CONV_STRIDES:
        raise ShapeError(prim, f"stride must be one of {_CONV_STRIDES}, got {stride}")
    h, w = hw
    ho = (h + 2 * padding - k) // stride + 1
    wo = (w + 2 * padding - k) // stride + 1
    if ho < 1 or wo < 1:
        raise ShapeError(prim, f"kernel {k} too large for input {hw} with padding {padding}")
    return ho, wo


def _im2col(x: np.ndarray, k: int, stride: int, padding: int) -> np.ndarray:
    """(B,H,W,C) -> (B,Ho,Wo,k,k,C) window view, strided and padded."""
    if padding:
        x = np.pad(x, ((0, 0), (padding, padding), (padding, padding), (0, 0)))
    win = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(1, 2))
    # win: (B, H', W', C, k, k) -> (B, Ho, Wo, k, k, C)
    win = win[:, ::stride, ::stride]
    return np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3))


def _col_scatter(cols: np.ndarray, hw, k: int, stride: int, padding: int) -> np.ndarray:
    """Adjoint of _im2col: scatter-add (B,Ho,Wo,k,k,C) back to (B,H,W,C)."""
    b, ho, wo = cols.shape[:3]
    c = cols.shape[-1]
    h, w = hw
    xp = np.zeros((b, h + 2 * padding, w + 2 * padding, c), dtype=np.float64)
    for i in range(k):
        for j in range(k):
            xp[:, i:i + stride * ho:stride, j:j + stride * wo:stride, :] += cols[:, :, :, i, j, :]
    if padding:
        return xp[:, padding:-padding, padding:-padding, :]
    return xp


def conv2d(x: Tensor, w: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D convolution, NHWC layout, kernel (k,k,Cin,Cout), zero padding."""
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeError("conv2d", f"need (B,H,W,C) and (k,k,Cin,Cout), got {x.data.shape}, {w.data.shape}")
    k, k2, cin, cout = w.data.shape
    if k != k2 or x.data.shape[-1] != cin:
        raise ShapeError("conv2d", f"kernel {w.data.shape} does not match input {x.data.shape}")
    ho, wo = _conv_geometry("conv2d", x.data.shape[1:3], k, stride, padding)
    cols = _im2col(x.data, k, stride, padding)            # (B,Ho,Wo,k,k,Cin)
    b = x.data.shape[0]
    cols2 = cols.reshape(b * ho * wo, k * k * cin)
    wmat = w.data.reshape(k * k * cin, cout)
    out = Tensor((cols2 @ wmat).reshape(b, ho, wo, cout))

    def bwd(g):
        g2 = g.reshape(b * ho * wo, cout)
        _accum(w, (cols2.T @ g2).reshape(w.data.shape))
        gc = (g2 @ wmat.T).reshape(b, ho, wo, k, k, cin)
        _accum(x, _col_scatter(gc, x.data.shape[1:3], k, stride, padding))

    return record("conv2d", (x, w), out, bwd)


def conv2d_transpose(x: Tensor, w: Tensor, stride: int, padding: int, out_hw) -> Tensor:
    """Adjoint of conv2d: upsamples (B,Hi,Wi,Cin) to (B,Ho,Wo,Cout).

    Defined as the input-gradient of a conv2d with kernel (k,k,Cout,Cin)
    mapping (B,Ho,Wo,Cout) -> (B,Hi,Wi,Cin); out_hw pins the output size.
    """
    if x.data.ndim != 4 or w.data.ndim != 4 or w.data.shape[0] != w.data.shape[1]:
        raise ShapeError("conv2d_transpose", f"bad ranks {x.data.shape}, {w.data.shape}")
    k, _, cout, cin = w.data.shape
    if x.data.shape[-1] != cin:
        raise ShapeError("conv2d_transpose", f"kernel {w.data.shape} does not match input {x.data.shape}")
    ho, wo = (int(v) for v in out_hw)
    hi, wi = _conv_geometry("conv2d_transpose", (ho, wo), k, stride, padding)
    if (hi, wi) != tuple(x.data.shape[1:3]):
        raise ShapeError("conv2d_transpose",
                         f"out_hw {out_hw} maps to {(hi, wi)}, input is {x.data.shape[1:3]}")
    b = x.data.shape[0]
    wmat = w.data.reshape(k * k * cout, cin)
    x2 = x.data.reshape(b * hi * wi, cin)
    cols = (x2 @ wmat.T).reshape(b, hi, wi, k, k, cout)
    out = Tensor(_col_scatter(cols, (ho, wo), k, stride, padding))

    def bwd(g):
        gcols = _im2col(g, k, stride, padding).reshape(b * hi * wi, k * k * cout)
        _accum(x, (gcols @ wmat).reshape(x.data.shape))
        _accum(w, (gcols.T @ x2).reshape(w.data.shape))

    return record("conv2d_transpose", (x, w), out, bwd)


# -- losses -----------------------------------------------------------------

def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross-entropy of softmax(logits) against integer labels."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.data.ndim != 2 or labels.shape != (logits.data.shape[0],):
        raise ShapeError("softmax_cross_entropy",
                         f"need (B,C) logits and (B,) labels, got {logits.data.shape}, {labels.shape}")
    z = logits.data
    m = z.max(axis=1, keepdims=True)
    e = np.exp(z - m)
    sm = e / e.sum(axis=1, keepdims=True)
    b = z.shape[0]
    ll = np.log(sm[np.arange(b), labels])
    out = Tensor(-ll.mean())

    def bwd(g):
        gz = sm.copy()
        gz[np.arange(b), labels] -= 1.0
        _accum(logits, gz * (float(g) / b))

    return record("softmax_cross_entropy", (logits,), out, bwd)


def mse(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError("mse", f"shape mismatch {a.data.shape} vs {b.data.shape}")
    d = a.data - b.data
    n = d.size
    out = Tensor(np.mean(d * d))

    def bwd(g):
        k = 2.0 * float(g) / n
        _accum(a, k * d)
        _accum(b, -k * d)

    return record("mse", (a, b), out, bwd)


def huber(pred: Tensor, target: Tensor, delta: float = 1.0) -> Tensor:
    """Mean Huber loss: quadratic within |d| <= delta, linear outside."""
    if pred.data.shape != target.data.shape:
        raise ShapeError("huber", f"shape mismatch {pred.data.shape} vs {target.data.shape}")
    delta = float(delta)
    d = pred.data - target.data
    ad = np.abs(d)
    quad = ad <= delta
    vals = np.where(quad, 0.5 * d * d, delta * (ad - 0.5 * delta))
    n = d.size
    out = Tensor(np.mean(vals))

    def bwd(g):
        gd = np.clip(d, -delta, delta) * (float(g) / n)
        _accum(pred, gd)
        _accum(target, -gd)

    return record("huber", (pred, target), out, bwd)


# ---------------------------------------------------------------------------
# parameters and optimizer
# ---------------------------------------------------------------------------

class Param:
    """A named parameter: value tensor plus Adam moment slots."""

    __slots__ = ("tensor", "m", "v", "_scratch")

    def __init__(self, tensor: Tensor):
        self.tensor = tensor
        self.m = np.zeros_like(tensor.data)
        self.v = np.zeros_like(tensor.data)
        self._scratch = np.empty_like(tensor.data)


class ParamSet:
    """Ordered, uniquely named parameter collection."""

    def __init__(self):
        self._params: dict[str, Param] = {}
        self.step_count = 0

    def add(self, name: str, value) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        t = value if isinstance(value, Tensor) else Tensor(value)
        self._params[name] = Param(t)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name].tensor

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self):
        return len(self._params)

    def names(self):
        return list(self._params.keys())

    def items(self):
        return self._params.items()

    def tensors(self):
        return [p.tensor for p in self._params.values()]

    def total_count(self) -> int:
        return sum(p.tensor.size for p in self._params.values())

    def zero_grads(self) -> None:
        for p in self._params.values():
            p.tensor.grad = None

    def state_bytes(self) -> bytes:
        """Concatenated raw value bytes, for bit-equality checks."""
        return b"".join(p.tensor.data.tobytes() for p in self._params.values())

    def named_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.tensor.data for name, p in self._params.items()}

    def copy_values_from(self, other: "ParamSet") -> None:
        if self.names() != other.names():
            raise ValueError("parameter sets do not match")
        for name, p in self._params.items():
            np.copyto(p.tensor.data, other._params[name].tensor.data)


def opt_step(params: ParamSet, rule: str = "adam", lr: float = 1e-4,
             betas=(0.9, 0.999), eps: float = 1e-8) -> None:
    """Apply one optimizer step and zero the gradients.

    Parameters whose gradient was never touched this step are skipped.
    """
    if lr <= 0.0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if rule == "sgd":
        for p in params._params.values():
            if p.tensor.grad is not None:
                p.tensor.data -= lr * p.tensor.grad
    elif rule == "adam":
        b1, b2 = betas
        params.step_count += 1
        t = params.step_count
        c1 = 1.0 - b1 ** t
        c2 = 1.0 - b2 ** t
        # fold bias corrections into scalars: lr*(m/c1)/(sqrt(v/c2)+eps)
        #   == (lr*sqrt(c2)/c1) * m / (sqrt(v) + eps*sqrt(c2))
        lr_t = lr * math.sqrt(c2) / c1
        eps_t = eps * math.sqrt(c2)
        for p in params._params.values():
            g = p.tensor.grad
            if g is None:
                continue
            s = p._scratch
            p.m *= b1
            np.multiply(g, 1.0 - b1, out=s)
            p.m += s
            p.v *= b2
            np.multiply(g, g, out=s)
            s *= 1.0 - b2
            p.v += s
            np.sqrt(p.v, out=s)
            s += eps_t
            np.divide(p.m, s, out=s)
            s *= lr_t
            p.tensor.data -= s
    else:
        raise ValueError(f"unknown optimizer rule: {rule}")
    params.zero_grads()


# ---------------------------------------------------------------------------
# finite-difference oracle
# ---------------------------------------------------------------------------

# name -> (fn, tensor argument count); extra args are passed through.
PRIMITIVES: dict[str, tuple[Callable, int]] = {
    "matmul": (matmul, 2),
    "add": (add, 2),
    "sub": (sub, 2),
    "mul": (mul, 2),
    "scale": (scale, 1),
    "add_bias": (add_bias, 2),
    "relu": (relu, 1),
    "prelu": (prelu, 2),
    "sigmoid": (sigmoid, 1),
    "reshape": (reshape, 1),
    "mean": (mean, 1),
    "mean_pool": (mean_pool, 1),
    "concat": (concat, 2),
    "scale_channels": (scale_channels, 2),
    "gather_rows": (gather_rows, 1),
    "conv2d": (conv2d, 2),
    "conv2d_transpose": (conv2d_transpose, 2),
    "softmax_cross_entropy": (softmax_cross_entropy, 1),
    "mse": (mse, 2),
    "huber": (huber, 2),
}


def register_primitive(name: str, fn: Callable, n_tensors: int) -> None:
    """Let other modules expose their taped ops to the gradient suite."""
    PRIMITIVES[name] = (fn, n_tensors)


def finite_diff_check(prim: str, point, step: float = 1e-5, *args, seed: int = 0) -> float:
    """Max relative error between taped gradients and central differences.

    ``point`` is a list of input arrays.  Tensor-valued outputs are reduced
    to a scalar through a fixed random linear functional so the full
    Jacobian is exercised.  Piecewise-linear primitives must be probed off
    their kinks by the caller.
    """
    fn, n_tensors = PRIMITIVES[prim]
    tensors = [Tensor(np.asarray(p, dtype=np.float64)) for p in point]

    def run(ts):
        out = fn(*ts, *args)
        if out.data.size == 1:
            return out
        rng = np.random.default_rng(seed)
        wgt = Tensor(rng.standard_normal(out.data.shape))
        return mean(mul(out, wgt))

    with Tape() as tape:
        loss = run(tensors)
    tape.backward(loss)

    worst = 0.0
    for ti, t in enumerate(tensors):
        grad = t.grad if t.grad is not None else np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            fp = run([Tensor(x.data) for x in tensors]).item()
            flat[j] = orig - step
            fm = run([Tensor(x.data) for x in tensors]).item()
            flat[j] = orig
            num = (fp - fm) / (2.0 * step)
            ana = grad.reshape(-1)[j]
            err = abs(ana - num) / max(1.0, abs(ana))
            if err > worst:
                worst = err
    return worst

"""Tour of the reverse-mode engine: tapes, gradients, and the oracle.

Every differentiable operation records a node on the active tape; the
backward pass walks the tape in reverse and accumulates gradients.  The
finite-difference oracle is the ground truth the whole package is tested
against.
"""

import numpy as np

from gocom import tensor as T
from gocom.tensor import ParamSet, Tape, Tensor, finite_diff_check, opt_step

# A scalar chain rule by hand: d/dx sigmoid(x*x) at x = 1.5
x = Tensor([1.5])
with Tape() as tape:
    y = T.sigmoid(T.mul(x, x))
tape.backward(y)
s = 1.0 / (1.0 + np.exp(-2.25))
print(f"autodiff grad: {x.grad[0]:.10f}")
print(f"closed form:   {2 * 1.5 * s * (1 - s):.10f}")

# The same machinery drives convolutions.  Check one against central
# finite differences; the acceptance suite does this for every primitive
# on 100 random points.
rng = np.random.default_rng(0)
err = finite_diff_check(
    "conv2d", [rng.standard_normal((2, 6, 6, 3)), rng.standard_normal((3, 3, 3, 8))], 1e-5, 2, 1)
print(f"conv2d max relative gradient error: {err:.2e}")

# Gradients accumulate across reuse: f(x) = x*x + x*x has gradient 4x.
x = Tensor([3.0])
with Tape() as tape:
    y = T.add(T.mul(x, x), T.mul(x, x))
tape.backward(y)
print(f"reuse accumulation: grad = {x.grad[0]} (expect 12)")

# Parameters live in named sets with Adam slots.
ps = ParamSet()
w = ps.add("w", np.zeros(3))
w.grad = np.array([1.0, -1.0, 0.5])
opt_step(ps, "adam", lr=0.1)
print(f"adam first step from zero: {w.data}")  # ~ -lr * sign(grad)

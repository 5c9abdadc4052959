import numpy as np
import pytest

from gocom import tensor as T
from gocom.tensor import ParamSet, ShapeError, Tape, Tensor, finite_diff_check, opt_step


def test_sigmoid_at_zero():
    assert T.sigmoid(Tensor([0.0])).data[0] == 0.5


def test_prelu_definition():
    out = T.prelu(Tensor([[-1.0, 2.0]]), Tensor([0.25, 0.25]))
    assert np.array_equal(out.data, [[-0.25, 2.0]])


def test_matmul_value():
    out = T.matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]]))
    assert out.data[0, 0] == 11.0


def test_matmul_shape_error_names_primitive():
    with pytest.raises(ShapeError, match="matmul"):
        T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_backward_square():
    x = Tensor([3.0])
    with Tape() as tape:
        y = T.mul(x, x)
    tape.backward(y)
    assert x.grad[0] == 6.0


def test_backward_sigmoid_prime():
    x = Tensor([0.0])
    with Tape() as tape:
        y = T.sigmoid(x)
    tape.backward(y)
    assert x.grad[0] == 0.25


def test_backward_requires_scalar_root():
    x = Tensor([1.0, 2.0])
    with Tape() as tape:
        y = T.scale(x, 2.0)
    with pytest.raises(ShapeError, match="scalar"):
        tape.backward(y)


def test_gradient_accumulates_over_multiple_uses():
    # f = x*x + x*x -> df/dx = 4x
    x = Tensor([2.0])
    with Tape() as tape:
        y = T.add(T.mul(x, x), T.mul(x, x))
    tape.backward(y)
    assert x.grad[0] == 8.0


def test_accumulation_linearity():
    # backward of a*f + b*g == a*grad f + b*grad g
    rng = np.random.default_rng(0)
    v = rng.standard_normal(6)
    a, b = 2.5, -1.25

    def grad_of(fn):
        x = Tensor(v.copy())
        with Tape() as tape:
            y = fn(x)
        tape.backward(y)
        return x.grad.copy()

    gf = grad_of(lambda x: T.mean(T.mul(x, x)))
    gg = grad_of(lambda x: T.mean(T.sigmoid(x)))
    combined = grad_of(lambda x: T.add(T.scale(T.mean(T.mul(x, x)), a),
                                       T.scale(T.mean(T.sigmoid(x)), b)))
    np.testing.assert_allclose(combined, a * gf + b * gg, rtol=1e-12)


def test_backward_determinism_bitwise():
    rng = np.random.default_rng(42)
    xv = rng.standard_normal((4, 4, 4, 2))
    wv = rng.standard_normal((3, 3, 2, 3))

    def run():
        x, w = Tensor(xv.copy()), Tensor(wv.copy())
        with Tape() as tape:
            y = T.mean(T.conv2d(x, w, 2, 1))
        tape.backward(y)
        return x.grad.tobytes(), w.grad.tobytes()

    assert run() == run()


def test_reshape_roundtrip_identity():
    rng = np.random.default_rng(1)
    v = rng.standard_normal((3, 4, 5))
    x = Tensor(v)
    back = T.reshape(T.reshape(x, (12, 5)), (3, 4, 5))
    assert np.array_equal(back.data, v)


def test_flatten_keeps_batch():
    x = Tensor(np.zeros((5, 2, 3, 4)))
    assert T.flatten(x).data.shape == (5, 24)


# -- finite differences over every primitive ---------------------------------

def _point(prim, rng):
    if prim == "matmul":
        return [rng.standard_normal((3, 4)), rng.standard_normal((4, 2))], ()
    if prim in ("add", "sub", "mul"):
        return [rng.standard_normal((3, 5)), rng.standard_normal((3, 5))], ()
    if prim == "scale":
        return [rng.standard_normal((2, 3))], (1.7,)
    if prim == "add_bias":
        return [rng.standard_normal((4, 6)), rng.standard_normal(6)], ()
    if prim == "relu":
        # off the kink: |x| >= 0.1
        v = rng.standard_normal((3, 4))
        v += np.sign(v) * 0.1
        return [v], ()
    if prim == "prelu":
        v = rng.standard_normal((3, 4))
        v += np.sign(v) * 0.1
        return [v, rng.uniform(0.05, 0.9, 4)], ()
    if prim == "sigmoid":
        return [rng.standard_normal((2, 5))], ()
    if prim == "reshape":
        return [rng.standard_normal((2, 6))], ((3, 4),)
    if prim == "mean":
        return [rng.standard_normal((3, 3))], ()
    if prim == "mean_pool":
        return [rng.standard_normal((2, 3, 3, 4))], ((1, 2),)
    if prim == "concat":
        return [rng.standard_normal((3, 4)), rng.standard_normal((3, 2))], ()
    if prim == "scale_channels":
        return [rng.standard_normal((2, 3, 3, 4)), rng.standard_normal((2, 4))], ()
    if prim == "gather_rows":
        return [rng.standard_normal((4, 5))], (rng.integers(0, 5, 4),)
    if prim == "conv2d":
        return [rng.standard_normal((2, 4, 4, 2)), rng.standard_normal((3, 3, 2, 3))], (2, 1)
    if prim == "conv2d_transpose":
        return [rng.standard_normal((2, 2, 2, 3)), rng.standard_normal((3, 3, 2, 3))], (2, 1, (4, 4))
    if prim == "softmax_cross_entropy":
        return [rng.standard_normal((4, 6))], (rng.integers(0, 6, 4),)
    if prim == "mse":
        return [rng.standard_normal(8), rng.standard_normal(8)], ()
    if prim == "huber":
        # off the |d| == delta kink
        a = rng.standard_normal(8) * 2.0
        b = a - np.where(rng.random(8) < 0.5, 0.4, 1.8) * np.sign(rng.standard_normal(8))
        return [a, b], (1.0,)
    if prim == "normalize_power":
        return [rng.standard_normal((3, 8))], (4,)
    raise AssertionError(prim)


@pytest.mark.parametrize("prim", sorted(T.PRIMITIVES))
def test_finite_diff_all_primitives(prim):
    rng = np.random.default_rng(hash(prim) % 2**32)
    worst = 0.0
    for _ in range(5):
        point, extra = _point(prim, rng)
        worst = max(worst, finite_diff_check(prim, point, 1e-5, *extra))
    assert worst < 1e-6, f"{prim}: {worst:.3e}"


def test_relu_kink_is_callers_problem():
    # the check itself is only valid off the kink; document the contract
    v = np.array([0.5, -0.5, 1.0])
    assert finite_diff_check("relu", [v], 1e-5) < 1e-9


# -- optimizer ----------------------------------------------------------------

def test_sgd_step():
    ps = ParamSet()
    w = ps.add("w", [1.0])
    w.grad = np.array([2.0])
    opt_step(ps, "sgd", 0.1)
    assert np.allclose(w.data, [0.8])
    assert w.grad is None


def test_sgd_zero_gradient_keeps_parameters():
    ps = ParamSet()
    w = ps.add("w", [1.5])
    w.grad = np.array([0.0])
    opt_step(ps, "sgd", 0.1)
    assert w.data[0] == 1.5


def test_adam_first_step_is_lr_sized():
    ps = ParamSet()
    w = ps.add("w", [0.0])
    w.grad = np.array([1.0])
    lam = 1e-3
    opt_step(ps, "adam", lam)
    # bias correction makes m_hat = v_hat = 1 -> step == -lr/(1+eps_hat)
    assert abs(-w.data[0] - lam) < 1e-9


def test_opt_step_rejects_bad_lr():
    ps = ParamSet()
    ps.add("w", [1.0])
    with pytest.raises(ValueError):
        opt_step(ps, "sgd", 0.0)


def test_paramset_rejects_duplicate_names():
    ps = ParamSet()
    ps.add("w", [1.0])
    with pytest.raises(ValueError):
        ps.add("w", [2.0])


def test_debug_mode_flags_nonfinite():
    T.set_debug_checks(True)
    try:
        with pytest.raises(FloatingPointError):
            T.scale(Tensor([np.inf]), 1.0)
    finally:
        T.set_debug_checks(False)

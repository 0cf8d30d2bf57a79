"""Forward semantics of the tensor ops against independent loop oracles.

The convolution and pooling oracles below are deliberately written as plain
nested loops so they share no code with the vectorised implementations.  Where
inputs are small integers stored in float64, every partial sum is an exactly
representable integer, so the oracle and the implementation must agree
bit-for-bit regardless of summation order.
"""

import numpy as np
import pytest

from touchmap.engine import (
    BCE_EPS,
    Tensor,
    add,
    bce_loss,
    concat_channels,
    conv2d,
    linear,
    maxpool2d,
    mse_loss,
    no_grad,
    relu,
    reshape,
    sigmoid,
    tensor_sum,
    upsample_nearest2x,
    weighted_sum,
)
from touchmap.errors import ShapeError


# ---------------------------------------------------------------------------
# loop oracles
# ---------------------------------------------------------------------------

def conv2d_oracle(x, w, bias):
    """Stride-1 same-padding convolution as six explicit loops."""
    b, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    ph, pw = kh // 2, kw // 2
    out = np.zeros((b, o, h, wd), dtype=x.dtype)
    for n in range(b):
        for oc in range(o):
            for y in range(h):
                for xx in range(wd):
                    acc = bias[oc]
                    for ic in range(c):
                        for ky in range(kh):
                            for kx in range(kw):
                                sy, sx = y + ky - ph, xx + kx - pw
                                if 0 <= sy < h and 0 <= sx < wd:
                                    acc += x[n, ic, sy, sx] * w[oc, ic, ky, kx]
                    out[n, oc, y, xx] = acc
    return out


def maxpool_oracle(x):
    b, c, h, w = x.shape
    out = np.zeros((b, c, h // 2, w // 2), dtype=x.dtype)
    for n in range(b):
        for ch in range(c):
            for y in range(h // 2):
                for xx in range(w // 2):
                    out[n, ch, y, xx] = x[n, ch, 2 * y:2 * y + 2, 2 * xx:2 * xx + 2].max()
    return out


def int_array(rng, shape, lo=-4, hi=5):
    return rng.integers(lo, hi, size=shape).astype(np.float64)


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

@pytest.mark.parametrize(
    "b,c,o,h,w,k",
    [(1, 1, 1, 4, 4, 3), (2, 3, 4, 5, 7, 3), (1, 2, 2, 6, 6, 1), (2, 2, 3, 7, 5, 5)],
)
def test_conv2d_matches_loop_oracle_exactly(rng, b, c, o, h, w, k):
    x = int_array(rng, (b, c, h, w))
    wt = int_array(rng, (o, c, k, k))
    bias = int_array(rng, (o,))
    got = conv2d(Tensor(x), Tensor(wt), Tensor(bias)).data
    want = conv2d_oracle(x, wt, bias)
    assert np.array_equal(got, want)


def test_conv2d_float32_tolerance(rng):
    x = rng.standard_normal((2, 8, 12, 12)).astype(np.float32)
    wt = rng.standard_normal((5, 8, 3, 3)).astype(np.float32) * 0.1
    bias = rng.standard_normal(5).astype(np.float32)
    got = conv2d(Tensor(x), Tensor(wt), Tensor(bias)).data
    want = conv2d_oracle(
        x.astype(np.float64), wt.astype(np.float64), bias.astype(np.float64)
    )
    np.testing.assert_allclose(got, want, rtol=1e-5, atol=1e-5)


def test_conv2d_identity_kernel_passthrough():
    x = np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4)
    wt = np.zeros((1, 1, 3, 3))
    wt[0, 0, 1, 1] = 1.0
    out = conv2d(Tensor(x), Tensor(wt), Tensor(np.zeros(1))).data
    assert np.array_equal(out, x)


def test_conv2d_rejects_bad_shapes(rng):
    x = Tensor(rng.random((2, 3, 4, 4)))
    assert "channels" in str(pytest.raises(
        ShapeError, conv2d, x, Tensor(rng.random((1, 2, 3, 3))), Tensor(np.zeros(1))
    ).value)
    with pytest.raises(ShapeError):
        conv2d(x, Tensor(rng.random((1, 3, 2, 2))), Tensor(np.zeros(1)))  # even kernel
    with pytest.raises(ShapeError):
        conv2d(x, Tensor(rng.random((1, 3, 3, 3))), Tensor(np.zeros(2)))  # bias size
    with pytest.raises(ShapeError):
        conv2d(Tensor(rng.random((3, 4, 4))), Tensor(rng.random((1, 3, 3, 3))), Tensor(np.zeros(1)))


def test_conv2d_rejects_mixed_dtype(rng):
    x = Tensor(rng.random((1, 1, 4, 4)).astype(np.float32))
    w = Tensor(rng.random((1, 1, 3, 3)).astype(np.float64))
    with pytest.raises(ShapeError):
        conv2d(x, w, Tensor(np.zeros(1, dtype=np.float64)))


# ---------------------------------------------------------------------------
# pooling / resampling
# ---------------------------------------------------------------------------

def test_maxpool_matches_loop_oracle(rng):
    x = rng.standard_normal((3, 4, 8, 6)).astype(np.float64)
    got = maxpool2d(Tensor(x)).data
    assert np.array_equal(got, maxpool_oracle(x))


def test_maxpool_gradient_routes_to_argmax():
    x = Tensor(np.array([[[[1.0, 2.0], [4.0, 3.0]]]]), requires_grad=True)
    out = maxpool2d(x)
    assert out.data[0, 0, 0, 0] == 4.0
    tensor_sum(out).backward()
    assert np.array_equal(x.grad, [[[[0.0, 0.0], [1.0, 0.0]]]])


def test_maxpool_tie_goes_to_first_in_window_order():
    x = Tensor(np.full((1, 1, 2, 2), 7.0), requires_grad=True)
    tensor_sum(maxpool2d(x)).backward()
    # All four entries tie; row-major first position wins.
    assert np.array_equal(x.grad, [[[[1.0, 0.0], [0.0, 0.0]]]])


def test_maxpool_rejects_odd_spatial(rng):
    with pytest.raises(ShapeError):
        maxpool2d(Tensor(rng.random((1, 1, 3, 4))))


def test_upsample_replicates_each_pixel(rng):
    x = rng.standard_normal((2, 3, 4, 5))
    out = upsample_nearest2x(Tensor(x)).data
    assert out.shape == (2, 3, 8, 10)
    for y in range(8):
        for xx in range(10):
            assert np.array_equal(out[:, :, y, xx], x[:, :, y // 2, xx // 2])


def test_upsample_backward_sums_blocks(rng):
    x = Tensor(rng.standard_normal((1, 2, 3, 3)), requires_grad=True)
    out = upsample_nearest2x(x)
    seed = rng.standard_normal(out.shape)
    out.backward(seed)
    want = seed.reshape(1, 2, 3, 2, 3, 2).sum(axis=(3, 5))
    np.testing.assert_allclose(x.grad, want, rtol=1e-12)


def test_maxpool_then_upsample_round_trip_on_constant_blocks():
    # Constant 2x2 blocks survive pool -> upsample unchanged.
    base = np.arange(6, dtype=np.float64).reshape(1, 1, 2, 3)
    x = base.repeat(2, axis=2).repeat(2, axis=3)
    out = upsample_nearest2x(maxpool2d(Tensor(x))).data
    assert np.array_equal(out, x)


# ---------------------------------------------------------------------------
# structural ops
# ---------------------------------------------------------------------------

def test_concat_channels_stacks_and_splits(rng):
    a = rng.standard_normal((2, 3, 4, 4))
    b = rng.standard_normal((2, 5, 4, 4))
    ta, tb = Tensor(a, requires_grad=True), Tensor(b, requires_grad=True)
    out = concat_channels(ta, tb)
    assert out.shape == (2, 8, 4, 4)
    assert np.array_equal(out.data[:, :3], a)
    assert np.array_equal(out.data[:, 3:], b)
    seed = rng.standard_normal(out.shape)
    out.backward(seed)
    assert np.array_equal(ta.grad, seed[:, :3])
    assert np.array_equal(tb.grad, seed[:, 3:])


def test_concat_channels_rejects_mismatch(rng):
    a = Tensor(rng.random((2, 3, 4, 4)))
    with pytest.raises(ShapeError):
        concat_channels(a, Tensor(rng.random((1, 3, 4, 4))))
    with pytest.raises(ShapeError):
        concat_channels(a, Tensor(rng.random((2, 3, 5, 4))))
    with pytest.raises(ShapeError):
        concat_channels(a, Tensor(rng.random((2, 3, 4))))


def test_reshape_round_trip_and_backward(rng):
    x = Tensor(rng.standard_normal((2, 6)), requires_grad=True)
    out = reshape(x, (3, 4))
    assert out.data.shape == (3, 4)
    seed = rng.standard_normal((3, 4))
    out.backward(seed)
    assert np.array_equal(x.grad, seed.reshape(2, 6))


def test_add_and_relu_semantics():
    a = Tensor(np.array([-1.0, 0.0, 2.0]), requires_grad=True)
    b = Tensor(np.array([3.0, -2.0, 1.0]), requires_grad=True)
    s = add(a, b)
    assert np.array_equal(s.data, [2.0, -2.0, 3.0])
    r = relu(s)
    assert np.array_equal(r.data, [2.0, 0.0, 3.0])
    tensor_sum(r).backward()
    # relu gradient is strictly zero at and below zero
    assert np.array_equal(a.grad, [1.0, 0.0, 1.0])
    assert np.array_equal(b.grad, [1.0, 0.0, 1.0])


def test_add_rejects_shape_mismatch():
    with pytest.raises(ShapeError):
        add(Tensor(np.zeros(3)), Tensor(np.zeros(4)))


def test_sigmoid_matches_closed_form_and_stays_open_interval():
    z = np.array([-700.0, -5.0, 0.0, 5.0, 700.0])
    out = sigmoid(Tensor(z)).data
    want = np.clip(1.0 / (1.0 + np.exp(-np.clip(z, -500, 500))), BCE_EPS, 1 - BCE_EPS)
    np.testing.assert_allclose(out, want, rtol=1e-12)
    assert out.min() >= BCE_EPS
    assert out.max() <= 1.0 - BCE_EPS
    assert out[2] == 0.5


def test_linear_matches_numpy(rng):
    x = rng.standard_normal((4, 7))
    w = rng.standard_normal((3, 7))
    b = rng.standard_normal(3)
    out = linear(Tensor(x), Tensor(w), Tensor(b)).data
    np.testing.assert_allclose(out, x @ w.T + b, rtol=1e-12)


def test_linear_rejects_feature_mismatch(rng):
    with pytest.raises(ShapeError):
        linear(Tensor(rng.random((4, 7))), Tensor(rng.random((3, 6))), Tensor(np.zeros(3)))


def test_weighted_sum_is_dot_product(rng):
    x = rng.standard_normal((3, 5))
    w = rng.standard_normal((3, 5))
    t = Tensor(x, requires_grad=True)
    out = weighted_sum(t, w)
    np.testing.assert_allclose(out.item(), float(np.sum(x * w)), rtol=1e-12)
    out.backward()
    np.testing.assert_allclose(t.grad, w, rtol=1e-12)


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def test_bce_loss_closed_form_ln2():
    # p = 0.5 everywhere gives exactly ln 2 whatever the target is.
    pred = Tensor(np.full((4, 4), 0.5))
    target = Tensor(np.random.default_rng(0).random((4, 4)))
    loss = bce_loss(pred, target)
    np.testing.assert_allclose(loss.item(), np.log(2.0), rtol=1e-12)


def test_bce_loss_hand_value():
    # -(log 0.8 + log 0.7) / 2 for (pred, target) = (0.8, 1), (0.3, 0)
    pred = Tensor(np.array([0.8, 0.3]))
    target = Tensor(np.array([1.0, 0.0]))
    want = -(np.log(0.8) + np.log(0.7)) / 2.0
    np.testing.assert_allclose(bce_loss(pred, target).item(), want, rtol=1e-12)


def test_bce_loss_finite_at_saturated_predictions():
    pred = Tensor(np.array([0.0, 1.0]))
    target = Tensor(np.array([1.0, 0.0]))
    loss = bce_loss(pred, target)
    assert np.isfinite(loss.item())


def test_mse_loss_hand_value():
    pred = Tensor(np.array([1.0, 2.0, 3.0]))
    target = Tensor(np.array([0.0, 0.0, 0.0]))
    np.testing.assert_allclose(mse_loss(pred, target).item(), 14.0 / 3.0, rtol=1e-12)
    with pytest.raises(ShapeError):
        mse_loss(pred, Tensor(np.zeros(4)))


# ---------------------------------------------------------------------------
# graph mechanics
# ---------------------------------------------------------------------------

def test_backward_requires_scalar_without_seed(rng):
    x = Tensor(rng.random((2, 2)), requires_grad=True)
    with pytest.raises(ShapeError):
        relu(x).backward()


def test_backward_accumulates_fanout():
    x = Tensor(np.array([3.0]), requires_grad=True)
    tensor_sum(add(x, x)).backward()
    assert np.array_equal(x.grad, [2.0])


def test_interior_gradients_are_freed():
    x = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    mid = relu(x)
    tensor_sum(mid).backward()
    assert mid.grad is None
    assert x.grad is not None


def test_no_grad_suppresses_graph(rng):
    x = Tensor(rng.random((2, 2)), requires_grad=True)
    with no_grad():
        out = relu(x)
        assert out._backward is None
        assert out._parents == ()
        inner = Tensor(np.zeros(2), requires_grad=True)
        assert not inner.requires_grad
    out2 = relu(x)
    assert out2._backward is not None


def test_tensor_defaults_to_float32():
    t = Tensor([1, 2, 3])
    assert t.dtype == np.float32
    assert Tensor(np.zeros(2, dtype=np.float64)).dtype == np.float64

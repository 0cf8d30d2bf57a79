"""Dense tensors with reverse-mode automatic differentiation.

A :class:`Tensor` wraps a numpy array (float32 for training, float64 for
gradient checking and reference oracles) and records the operations applied
to it.  Calling :meth:`Tensor.backward` on a scalar result walks the graph
in reverse topological order and accumulates gradients into every node with
``requires_grad``.

All operations are pure functions of their inputs; the functional API below
(`conv2d`, `maxpool2d`, ...) is the complete op set needed for the U-Net and
the regression baseline.  Convolutions are restricted to stride 1 with zero
"same" padding and odd kernels -- downsampling is done by pooling, upsampling
by nearest-neighbour replication.
"""

from __future__ import annotations

import contextlib

import numpy as np

from ..errors import ShapeError

__all__ = [
    "Tensor",
    "no_grad",
    "add",
    "conv2d",
    "maxpool2d",
    "upsample_nearest2x",
    "concat_channels",
    "relu",
    "sigmoid",
    "linear",
    "reshape",
    "bce_loss",
    "mse_loss",
    "tensor_sum",
    "weighted_sum",
    "BCE_EPS",
]

# Clamp applied inside bce_loss and to sigmoid outputs so that downstream
# logarithms are always finite, even for saturated activations.
BCE_EPS = 1e-7

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction (inference mode)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """N-dimensional array node in the autodiff graph.

    `data` is row-major numpy storage; `grad` is lazily allocated with the
    same shape and dtype on the first backward pass.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad and _grad_enabled
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self, seed: np.ndarray | None = None) -> None:
        """Reverse-mode pass from this node.

        Without an explicit `seed` the tensor must be a scalar.
        """
        if seed is None:
            if self.data.size != 1:
                raise ShapeError("backward() without seed requires a scalar tensor")
            seed = np.ones_like(self.data)

        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))

        self._accumulate(np.asarray(seed, dtype=self.data.dtype))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
            # Interior grads are transient; free them so a training step does
            # not hold every activation gradient alive.
            if node is not self and not node.requires_grad and node._backward is not None:
                node.grad = None


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad or p._backward is not None for p in parents):
        out.requires_grad = False
        out._parents = parents
        out._backward = backward
    return out


def _check_same_dtype(*tensors: Tensor) -> None:
    dtypes = {t.data.dtype for t in tensors}
    if len(dtypes) > 1:
        raise ShapeError(f"mixed dtypes in op: {sorted(str(d) for d in dtypes)}")


# ---------------------------------------------------------------------------
# elementwise and structural ops
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add: shape mismatch {a.shape} vs {b.shape}")
    _check_same_dtype(a, b)

    def backward(g):
        a._accumulate(g)
        b._accumulate(g)

    return _make(a.data + b.data, (a, b), backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def backward(g):
        x._accumulate(g * mask)

    return _make(np.maximum(x.data, 0), (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    """Numerically stable logistic, output clamped into (0, 1).

    The clamp (BCE_EPS away from the endpoints) keeps the open-interval range
    guarantee even where float32 would saturate to exactly 0 or 1, so heatmap
    losses never see log(0).
    """
    z = x.data
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    np.clip(out, BCE_EPS, 1.0 - BCE_EPS, out=out)

    def backward(g):
        x._accumulate(g * out * (1.0 - out))

    return _make(out, (x,), backward)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    orig = x.data.shape

    def backward(g):
        x._accumulate(g.reshape(orig))

    return _make(x.data.reshape(shape), (x,), backward)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate NCHW tensors along the channel axis."""
    if a.data.ndim != 4 or b.data.ndim != 4:
        raise ShapeError("concat_channels expects 4-d NCHW tensors")
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ShapeError(f"concat_channels: batch/spatial mismatch {a.shape} vs {b.shape}")
    _check_same_dtype(a, b)
    ca = a.shape[1]

    def backward(g):
        a._accumulate(g[:, :ca])
        b._accumulate(g[:, ca:])

    return _make(np.concatenate([a.data, b.data], axis=1), (a, b), backward)


def tensor_sum(x: Tensor) -> Tensor:
    def backward(g):
        x._accumulate(np.full_like(x.data, g))

    return _make(np.sum(x.data, dtype=x.data.dtype), (x,), backward)


def weighted_sum(x: Tensor, weights: np.ndarray) -> Tensor:
    """sum(x * weights) for a constant weight array (gradcheck projections)."""
    w = np.asarray(weights, dtype=x.data.dtype)
    if w.shape != x.shape:
        raise ShapeError(f"weighted_sum: shape mismatch {x.shape} vs {w.shape}")

    def backward(g):
        x._accumulate(g * w)

    return _make(np.sum(x.data * w, dtype=x.data.dtype), (x,), backward)


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

def _im2col(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """Stride-1 same-padding patch matrix, shape (B, C*kh*kw, H*W).

    Built from kh*kw shifted-slice copies rather than a single strided-view
    copy; the per-offset copies have a contiguous innermost axis and run
    several times faster.  A 1x1 kernel needs no patches at all.
    """
    b, c, h, w = x.shape
    if kh == 1 and kw == 1:
        return x.reshape(b, c, h * w)
    ph, pw = kh // 2, kw // 2
    padded = np.zeros((b, c, h + 2 * ph, w + 2 * pw), dtype=x.dtype)
    padded[:, :, ph:ph + h, pw:pw + w] = x
    cols6 = np.empty((b, c, kh, kw, h, w), dtype=x.dtype)
    for ky in range(kh):
        for kx in range(kw):
            cols6[:, :, ky, kx] = padded[:, :, ky:ky + h, kx:kx + w]
    return cols6.reshape(b, c * kh * kw, h * w)


def _col2im(cols: np.ndarray, x_shape: tuple[int, ...], kh: int, kw: int) -> np.ndarray:
    """Adjoint of :func:`_im2col`: scatter-add columns back onto the image."""
    b, c, h, w = x_shape
    if kh == 1 and kw == 1:
        return cols.reshape(b, c, h, w)
    ph, pw = kh // 2, kw // 2
    grad_padded = np.zeros((b, c, h + 2 * ph, w + 2 * pw), dtype=cols.dtype)
    cols6 = cols.reshape(b, c, kh, kw, h, w)
    for ky in range(kh):
        for kx in range(kw):
            grad_padded[:, :, ky:ky + h, kx:kx + w] += cols6[:, :, ky, kx]
    return grad_padded[:, :, ph:ph + h, pw:pw + w]


def conv2d(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """2-d convolution, NCHW x OIHW -> NOHW.

    Stride is fixed to 1 and the input is zero-padded so spatial dimensions
    are preserved; kernel extents must be odd.  Forward runs as an im2col
    patch-matrix product; the reverse rule produces exact input, weight and
    bias gradients.
    """
    if x.data.ndim != 4 or weight.data.ndim != 4:
        raise ShapeError("conv2d expects NCHW input and OIHW weight")
    b, c, h, w = x.shape
    o, ci, kh, kw = weight.shape
    if ci != c:
        raise ShapeError(f"conv2d: input has {c} channels but weight expects {ci}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"conv2d: kernel extents must be odd, got {kh}x{kw}")
    if bias.data.shape != (o,):
        raise ShapeError(f"conv2d: bias shape {bias.data.shape} != ({o},)")
    _check_same_dtype(x, weight, bias)

    cols = _im2col(x.data, kh, kw)                      # (B, C*kh*kw, H*W)
    wmat = weight.data.reshape(o, c * kh * kw)
    out = np.matmul(wmat, cols)                         # (B, O, H*W)
    out += bias.data[:, None]
    out = out.reshape(b, o, h, w)

    def backward(g):
        go = g.reshape(b, o, h * w)
        bias._accumulate(go.sum(axis=(0, 2)))
        gw = np.matmul(go, cols.transpose(0, 2, 1)).sum(axis=0)
        weight._accumulate(gw.reshape(weight.shape))
        grad_cols = np.matmul(wmat.T, go)
        x._accumulate(_col2im(grad_cols, (b, c, h, w), kh, kw))

    return _make(out, (x, weight, bias), backward)


# ---------------------------------------------------------------------------
# pooling / resampling
# ---------------------------------------------------------------------------

def maxpool2d(x: Tensor) -> Tensor:
    """2x2 max pooling with stride 2.

    Gradient is routed to the argmax position of each window; ties go to the
    first occurrence in row-major window order.
    """
    b, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool2d: spatial dims must be even, got {h}x{w}")
    h2, w2 = h // 2, w // 2
    windows = (
        x.data.reshape(b, c, h2, 2, w2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(b, c, h2, w2, 4)
    )
    idx = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]

    def backward(g):
        scatter = np.zeros((b, c, h2, w2, 4), dtype=g.dtype)
        np.put_along_axis(scatter, idx[..., None], g[..., None], axis=-1)
        gx = (
            scatter.reshape(b, c, h2, w2, 2, 2)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(b, c, h, w)
        )
        x._accumulate(gx)

    return _make(out, (x,), backward)


def upsample_nearest2x(x: Tensor) -> Tensor:
    """Replicate each pixel into a 2x2 block; reverse pass sums the block."""
    b, c, h, w = x.shape
    out = x.data.repeat(2, axis=2).repeat(2, axis=3)

    def backward(g):
        x._accumulate(g.reshape(b, c, h, 2, w, 2).sum(axis=(3, 5)))

    return _make(out, (x,), backward)


# ---------------------------------------------------------------------------
# dense layer
# ---------------------------------------------------------------------------

def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map: (N, F) x (O, F) + (O,) -> (N, O)."""
    if x.data.ndim != 2 or weight.data.ndim != 2:
        raise ShapeError("linear expects 2-d input and weight")
    n, f = x.shape
    o, fi = weight.shape
    if fi != f:
        raise ShapeError(f"linear: input features {f} != weight features {fi}")
    if bias.data.shape != (o,):
        raise ShapeError(f"linear: bias shape {bias.data.shape} != ({o},)")
    _check_same_dtype(x, weight, bias)

    out = x.data @ weight.data.T + bias.data

    def backward(g):
        x._accumulate(g @ weight.data)
        weight._accumulate(g.T @ x.data)
        bias._accumulate(g.sum(axis=0))

    return _make(out, (x, weight, bias), backward)


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def bce_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean binary cross-entropy; predictions clamped to [eps, 1-eps].

    The clamp is treated as part of the op, so gradients are zero where the
    raw prediction lies outside the clamp range.
    """
    if pred.shape != target.shape:
        raise ShapeError(f"bce_loss: shape mismatch {pred.shape} vs {target.shape}")
    p = np.clip(pred.data, BCE_EPS, 1.0 - BCE_EPS)
    t = target.data
    loss = -np.mean(t * np.log(p) + (1.0 - t) * np.log1p(-p), dtype=pred.data.dtype)
    n = pred.data.size
    inside = (pred.data >= BCE_EPS) & (pred.data <= 1.0 - BCE_EPS)

    def backward(g):
        gp = (p - t) / (p * (1.0 - p)) / n
        gp *= inside
        pred._accumulate(g * gp.astype(pred.data.dtype))

    return _make(np.asarray(loss, dtype=pred.data.dtype), (pred, target), backward)


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean squared error over all elements."""
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss: shape mismatch {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    n = pred.data.size
    loss = np.mean(diff * diff, dtype=pred.data.dtype)

    def backward(g):
        pred._accumulate(g * (2.0 / n) * diff)

    return _make(np.asarray(loss, dtype=pred.data.dtype), (pred, target), backward)

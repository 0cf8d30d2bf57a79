"""Network building blocks: encoder-decoder heatmap model and a regression
baseline, composed from the functional ops in :mod:`.tensor`.

Both models consume single-channel NCHW images.  The heatmap model outputs a
same-resolution sigmoid map; the baseline outputs one (x, y, depth) triple
per image.  Weight init is He-normal (std = sqrt(2 / fan_in)) with zero
biases, drawn from a caller-supplied generator so builds are reproducible.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .optim import Parameter
from .tensor import (
    Tensor,
    concat_channels,
    conv2d,
    linear,
    maxpool2d,
    no_grad,
    relu,
    reshape,
    sigmoid,
    upsample_nearest2x,
)

__all__ = [
    "Module",
    "UNetSpec",
    "UNet",
    "CnnBaselineSpec",
    "CnnBaseline",
    "build_from_state",
    "unet_forward",
    "cnn_baseline_forward",
]


def _he_conv(rng: np.random.Generator, out_c: int, in_c: int, k: int, name: str) -> tuple[Parameter, Parameter]:
    std = np.sqrt(2.0 / (in_c * k * k))
    w = rng.normal(0.0, std, size=(out_c, in_c, k, k)).astype(np.float32)
    b = np.zeros(out_c, dtype=np.float32)
    return Parameter(w, f"{name}.w"), Parameter(b, f"{name}.b")


def _he_dense(rng: np.random.Generator, out_f: int, in_f: int, name: str) -> tuple[Parameter, Parameter]:
    std = np.sqrt(2.0 / in_f)
    w = rng.normal(0.0, std, size=(out_f, in_f)).astype(np.float32)
    b = np.zeros(out_f, dtype=np.float32)
    return Parameter(w, f"{name}.w"), Parameter(b, f"{name}.b")


class Module:
    """Minimal parameter container with insertion-ordered traversal."""

    def __init__(self):
        self._params: list[Parameter] = []

    def _register(self, *params: Parameter) -> None:
        self._params.extend(params)

    def parameters(self) -> list[Parameter]:
        return list(self._params)

    def named_parameters(self) -> dict[str, Parameter]:
        out: dict[str, Parameter] = {}
        for p in self._params:
            if p.name in out:
                raise ShapeError(f"duplicate parameter name {p.name!r}")
            out[p.name] = p
        return out

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        if set(state) != set(params):
            missing = sorted(set(params) - set(state))
            extra = sorted(set(state) - set(params))
            raise ShapeError(f"state dict mismatch: missing={missing} unexpected={extra}")
        for name, p in params.items():
            arr = np.asarray(state[name], dtype=np.float32)
            if arr.shape != p.data.shape:
                raise ShapeError(f"parameter {name!r}: shape {arr.shape} != {p.data.shape}")
            p.data = arr.copy()
            p.adam_m = None
            p.adam_v = None
            p.step_count = 0


class _DoubleConv(Module):
    """Two 3x3 conv + ReLU stages at constant output width."""

    def __init__(self, rng, in_c: int, out_c: int, name: str):
        super().__init__()
        self.w1, self.b1 = _he_conv(rng, out_c, in_c, 3, f"{name}.conv1")
        self.w2, self.b2 = _he_conv(rng, out_c, out_c, 3, f"{name}.conv2")
        self._register(self.w1, self.b1, self.w2, self.b2)

    def __call__(self, x: Tensor) -> Tensor:
        x = relu(conv2d(x, self.w1, self.b1))
        return relu(conv2d(x, self.w2, self.b2))


class UNetSpec:
    """Architecture hyperparameters for :class:`UNet`.

    Encoder level i has base_channels * 2**i channels; the bottleneck doubles
    once more.  The head is fixed: 1x1 conv to one channel plus sigmoid.
    """

    __slots__ = ("in_channels", "base_channels", "depth", "out_resolution")

    def __init__(
        self,
        in_channels: int = 1,
        base_channels: int = 16,
        depth: int = 3,
        out_resolution: int = 64,
    ):
        if depth < 1 or base_channels < 1 or in_channels < 1:
            raise ShapeError("UNetSpec extents must be positive")
        if out_resolution % (1 << depth):
            raise ShapeError(f"out_resolution={out_resolution} not divisible by 2^depth={1 << depth}")
        self.in_channels = in_channels
        self.base_channels = base_channels
        self.depth = depth
        self.out_resolution = out_resolution

    @property
    def encoder_channels(self) -> tuple[int, ...]:
        return tuple(self.base_channels << i for i in range(self.depth))

    @property
    def bottleneck_channels(self) -> int:
        return self.base_channels << self.depth


class UNet(Module):
    """Encoder-decoder with skip connections and a sigmoid heatmap head.

    Each encoder level is a double-conv followed by 2x2 max pooling; the
    decoder mirrors it with nearest-neighbour upsampling, a 3x3 channel-
    halving conv, skip concatenation and another double-conv.  Input spatial
    extents must be divisible by 2**depth.
    """

    def __init__(self, spec: UNetSpec, rng: np.random.Generator):
        super().__init__()
        self.spec = spec
        self.enc: list[_DoubleConv] = []
        in_c = spec.in_channels
        for i, c in enumerate(spec.encoder_channels):
            block = _DoubleConv(rng, in_c, c, f"enc{i}")
            self.enc.append(block)
            self._register(*block.parameters())
            in_c = c
        self.bottleneck = _DoubleConv(rng, in_c, spec.bottleneck_channels, "bottleneck")
        self._register(*self.bottleneck.parameters())

        self.up_w: list[Parameter] = []
        self.up_b: list[Parameter] = []
        self.dec: list[_DoubleConv] = []
        c = spec.bottleneck_channels
        for i, skip_c in enumerate(reversed(spec.encoder_channels)):
            w, b = _he_conv(rng, c // 2, c, 3, f"up{i}")
            self.up_w.append(w)
            self.up_b.append(b)
            block = _DoubleConv(rng, c // 2 + skip_c, c // 2, f"dec{i}")
            self.dec.append(block)
            self._register(w, b, *block.parameters())
            c = c // 2
        self.head_w, self.head_b = _he_conv(rng, 1, c, 1, "head")
        self._register(self.head_w, self.head_b)

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.ndim != 4 or x.shape[1] != self.spec.in_channels:
            raise ShapeError(f"expected (N, {self.spec.in_channels}, H, W) input, got {x.shape}")
        res = self.spec.out_resolution
        if x.shape[2] != res or x.shape[3] != res:
            raise ShapeError(f"expected {res}x{res} input resolution, got {x.shape[2]}x{x.shape[3]}")
        skips: list[Tensor] = []
        for block in self.enc:
            x = block(x)
            skips.append(x)
            x = maxpool2d(x)
        x = self.bottleneck(x)
        for w, b, block, skip in zip(self.up_w, self.up_b, self.dec, reversed(skips)):
            x = relu(conv2d(upsample_nearest2x(x), w, b))
            x = block(concat_channels(x, skip))
        return sigmoid(conv2d(x, self.head_w, self.head_b))


class CnnBaselineSpec:
    """Architecture hyperparameters for :class:`CnnBaseline`.

    The output dimension is fixed at 3: one (x, y, depth) triple per image.
    """

    OUT_FEATURES = 3

    __slots__ = ("in_channels", "stage_channels", "hidden_features", "input_hw")

    def __init__(
        self,
        in_channels: int = 1,
        stage_channels: tuple[int, ...] = (8, 16, 32, 64),
        hidden_features: int = 128,
        input_hw: int = 64,
    ):
        if input_hw % (1 << len(stage_channels)):
            raise ShapeError(f"input_hw={input_hw} not divisible by {1 << len(stage_channels)}")
        self.in_channels = in_channels
        self.stage_channels = tuple(stage_channels)
        self.hidden_features = hidden_features
        self.input_hw = input_hw


class CnnBaseline(Module):
    """Plain conv/pool stack regressing one (x, y, depth) triple per image."""

    def __init__(self, spec: CnnBaselineSpec, rng: np.random.Generator):
        super().__init__()
        self.spec = spec
        self.stage_w: list[Parameter] = []
        self.stage_b: list[Parameter] = []
        in_c = spec.in_channels
        for i, c in enumerate(spec.stage_channels):
            w, b = _he_conv(rng, c, in_c, 3, f"stage{i}")
            self.stage_w.append(w)
            self.stage_b.append(b)
            self._register(w, b)
            in_c = c
        final_hw = spec.input_hw >> len(spec.stage_channels)
        self.flat_features = in_c * final_hw * final_hw
        self.fc1_w, self.fc1_b = _he_dense(rng, spec.hidden_features, self.flat_features, "fc1")
        self.fc2_w, self.fc2_b = _he_dense(rng, spec.OUT_FEATURES, spec.hidden_features, "fc2")
        self._register(self.fc1_w, self.fc1_b, self.fc2_w, self.fc2_b)

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.ndim != 4 or x.shape[1] != self.spec.in_channels:
            raise ShapeError(f"expected (N, {self.spec.in_channels}, H, W) input, got {x.shape}")
        if x.shape[2] != self.spec.input_hw or x.shape[3] != self.spec.input_hw:
            raise ShapeError(f"expected {self.spec.input_hw}x{self.spec.input_hw} input, got {x.shape[2:]}")
        for w, b in zip(self.stage_w, self.stage_b):
            x = maxpool2d(relu(conv2d(x, w, b)))
        x = reshape(x, (x.shape[0], self.flat_features))
        x = relu(linear(x, self.fc1_w, self.fc1_b))
        return linear(x, self.fc2_w, self.fc2_b)


def build_from_state(state: dict[str, np.ndarray], out_resolution: int = 64) -> "UNet | CnnBaseline":
    """Reconstruct a model from checkpoint parameter names and shapes.

    The two architectures have disjoint name sets ("head.*" vs "fc*.*"), so
    the checkpoint itself identifies which one it belongs to.
    """
    if "head.w" in state:
        first = state.get("enc0.conv1.w")
        if first is None:
            raise ShapeError("checkpoint has a head but no enc0 block")
        depth = len({n.split(".")[0] for n in state if n.startswith("enc")})
        spec = UNetSpec(
            in_channels=int(first.shape[1]),
            base_channels=int(first.shape[0]),
            depth=depth,
            out_resolution=out_resolution,
        )
        model: UNet | CnnBaseline = UNet(spec, np.random.default_rng(0))
    elif "fc1.w" in state:
        stages = sorted(n for n in state if n.startswith("stage") and n.endswith(".w"))
        if not stages:
            raise ShapeError("checkpoint has dense layers but no conv stages")
        stage_channels = tuple(int(state[n].shape[0]) for n in stages)
        in_channels = int(state[stages[0]].shape[1])
        hidden = int(state["fc1.w"].shape[0])
        flat = int(state["fc1.w"].shape[1])
        final_hw = int(round(np.sqrt(flat / stage_channels[-1])))
        if stage_channels[-1] * final_hw * final_hw != flat:
            raise ShapeError(f"dense input size {flat} inconsistent with conv stack {stage_channels}")
        spec = CnnBaselineSpec(
            in_channels=in_channels,
            stage_channels=stage_channels,
            hidden_features=hidden,
            input_hw=final_hw << len(stage_channels),
        )
        model = CnnBaseline(spec, np.random.default_rng(0))
    else:
        raise ShapeError("checkpoint matches neither known architecture")
    model.load_state_dict(state)
    return model


def unet_forward(model: UNet, images: np.ndarray) -> np.ndarray:
    """Convenience inference wrapper: NCHW float array in, heatmaps out."""
    with no_grad():
        out = model(Tensor(np.asarray(images, dtype=np.float32)))
    return out.data


def cnn_baseline_forward(model: CnnBaseline, images: np.ndarray) -> np.ndarray:
    """Convenience inference wrapper: NCHW float array in, (N, 3) mm out."""
    with no_grad():
        out = model(Tensor(np.asarray(images, dtype=np.float32)))
    return out.data

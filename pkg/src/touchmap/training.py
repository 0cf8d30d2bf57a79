"""Model training and inference-side contact prediction.

The heatmap model minimizes pixelwise BCE against encoded ground truth; the
regression baseline minimizes MSE against (x, y, depth) labels.  Both use
Adam with early stopping on validation loss and restore the best-validation
parameters before returning.  With a fixed seed the whole loop is
deterministic: initialization, batch order and therefore the final
checkpoint bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import GridMapping, HeatmapGrid, PeakDetection, extract_peaks
from .dataset import DataView
from .engine import (
    AdamConfig,
    CnnBaseline,
    Tensor,
    UNet,
    adam_step,
    bce_loss,
    mse_loss,
    no_grad,
    zero_grads,
)
from .errors import DomainError, TrainingError

__all__ = [
    "TrainConfig",
    "TrainResult",
    "EvalParams",
    "train",
    "predict_contacts",
    "predict_contacts_batch",
    "regression_targets",
    "loss_curve_csv",
]

LOSS_CURVE_HEADER = "epoch,train_loss,val_loss"
_VAL_BATCH = 32


@dataclass(frozen=True)
class TrainConfig:
    """Optimization regimen."""

    lr: float = 3e-4
    batch_size: int = 8
    max_epochs: int = 50
    early_stop_patience: int = 10
    split_ratio: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise DomainError("batch_size must be at least 1")
        if not 0.0 < self.split_ratio < 1.0:
            raise DomainError("split_ratio must lie strictly inside (0, 1)")
        if self.max_epochs < 1 or self.early_stop_patience < 0:
            raise DomainError("max_epochs must be >= 1 and patience >= 0")


@dataclass(frozen=True)
class EvalParams:
    """Peak-extraction and matching knobs shared by the evaluation harnesses."""

    tau: float = 0.06
    footprint: int = 5
    min_sep_px: int = 3
    gate_mm: float = 5.0


@dataclass
class TrainResult:
    """Outcome of one training run (model is updated in place)."""

    history: list[tuple[int, float, float]]    # (epoch, train_loss, val_loss)
    best_epoch: int
    best_val_loss: float


def regression_targets(view: DataView) -> np.ndarray:
    """(N, 3) array of (x, y, depth) labels for single-contact samples."""
    rows = []
    for i, contacts in enumerate(view.labels):
        if len(contacts) != 1:
            raise DomainError(f"sample {i} has {len(contacts)} contacts; regression targets need exactly 1")
        c = contacts[0]
        rows.append((c.x_mm, c.y_mm, c.depth_mm))
    return np.asarray(rows, dtype=np.float32)


def _targets_and_loss(model, view: DataView):
    if isinstance(model, UNet):
        n, h, w = view.heatmaps.shape
        return view.heatmaps.reshape(n, 1, h, w), bce_loss
    if isinstance(model, CnnBaseline):
        return regression_targets(view), mse_loss
    raise DomainError(f"cannot train model of type {type(model).__name__}")


def _mean_loss(model, images: np.ndarray, targets: np.ndarray, loss_fn) -> float:
    total = 0.0
    with no_grad():
        for start in range(0, len(images), _VAL_BATCH):
            x = Tensor(images[start:start + _VAL_BATCH])
            t = Tensor(targets[start:start + _VAL_BATCH])
            total += loss_fn(model(x), t).item() * len(x.data)
    return total / len(images)


def train(model, train_view: DataView, val_view: DataView, cfg: TrainConfig = TrainConfig()) -> TrainResult:
    """Optimize `model` in place; early-stop on validation loss.

    Stops once the validation loss has failed to improve for more than
    `early_stop_patience` consecutive epochs (patience 0 therefore stops at
    the first non-improving epoch) and restores the best epoch's parameters.
    """
    if len(train_view) == 0 or len(val_view) == 0:
        raise DomainError("training and validation sets must be non-empty")
    targets, loss_fn = _targets_and_loss(model, train_view)
    val_targets, _ = _targets_and_loss(model, val_view)
    params = model.parameters()
    adam = AdamConfig(lr=cfg.lr)

    history: list[tuple[int, float, float]] = []
    best_val = np.inf
    best_state = model.state_dict()
    best_epoch = -1
    stale = 0
    n = len(train_view)

    for epoch in range(cfg.max_epochs):
        order = np.random.default_rng([cfg.seed, epoch]).permutation(n)
        running = 0.0
        for batch_index, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            zero_grads(params)
            loss = loss_fn(model(Tensor(train_view.images[idx])), Tensor(targets[idx]))
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingError(f"non-finite loss {value} at epoch {epoch}, batch {batch_index}")
            loss.backward()
            adam_step(params, adam)
            running += value * len(idx)
        train_loss = running / n
        val_loss = _mean_loss(model, val_view.images, val_targets, loss_fn)
        history.append((epoch, train_loss, val_loss))

        if val_loss < best_val:
            best_val = val_loss
            best_state = model.state_dict()
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale > cfg.early_stop_patience:
                break

    model.load_state_dict(best_state)
    return TrainResult(history=history, best_epoch=best_epoch, best_val_loss=float(best_val))


def predict_contacts(
    model,
    image: np.ndarray,
    mapping: GridMapping = GridMapping(),
    params: EvalParams = EvalParams(),
    d_max_mm: float = 6.0,
) -> list[PeakDetection]:
    """Run one image through the pipeline and return contact estimates.

    The heatmap model yields zero or more extracted peaks; the regression
    baseline by construction yields exactly one.
    """
    return predict_contacts_batch(model, np.asarray(image)[None], mapping, params, d_max_mm)[0]


def predict_contacts_batch(
    model,
    images: np.ndarray,
    mapping: GridMapping = GridMapping(),
    params: EvalParams = EvalParams(),
    d_max_mm: float = 6.0,
    batch_size: int = 64,
) -> list[list[PeakDetection]]:
    """Vectorized :func:`predict_contacts` over a stack of images."""
    images = np.asarray(images, dtype=np.float32)
    out: list[list[PeakDetection]] = []
    with no_grad():
        for start in range(0, len(images), batch_size):
            chunk = model(Tensor(images[start:start + batch_size])).data
            if isinstance(model, UNet):
                for hm in chunk[:, 0]:
                    grid = HeatmapGrid(hm, mapping)
                    out.append(
                        extract_peaks(
                            grid,
                            tau=params.tau,
                            footprint=params.footprint,
                            min_sep_px=params.min_sep_px,
                            d_max_mm=d_max_mm,
                        )
                    )
            else:
                for x_mm, y_mm, depth_mm in chunk:
                    value = min(1.0, max(0.0, float(depth_mm) / d_max_mm))
                    out.append([PeakDetection(float(x_mm), float(y_mm), float(depth_mm), value)])
    return out


def loss_curve_csv(history: list[tuple[int, float, float]]) -> str:
    lines = [LOSS_CURVE_HEADER]
    for epoch, train_loss, val_loss in history:
        lines.append(f"{epoch},{train_loss!r},{val_loss!r}")
    return "\n".join(lines) + "\n"

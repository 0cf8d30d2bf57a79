"""Contact-set <-> heatmap codec.

Encoding places one Gaussian kernel per contact on a 64x64 grid: amplitude
is the normalized depth d/d_max and width follows Hertzian contact geometry
(sigma_contact = sqrt(R*d)/3) broadened by a fixed membrane blur.  Multiple
kernels compose by pixelwise maximum, which keeps every peak's value equal
to its own d/d_max so depth recovery stays a pure scaling.

Decoding inverts the model's heatmap: maximum-filter local maxima above a
threshold, greedy minimum-separation suppression, separable quadratic
sub-pixel refinement, then depth = refined value * d_max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DomainError, ShapeError

__all__ = [
    "ContactPoint",
    "KernelParams",
    "GridMapping",
    "HeatmapGrid",
    "PeakDetection",
    "hertz_contact_radius",
    "kernel_sigma",
    "encode_heatmap",
    "extract_peaks",
    "refine_subpixel",
    "depth_from_value",
    "mm_to_px",
    "px_to_mm",
    "format_peaks_csv",
    "PEAKS_CSV_HEADER",
]

PEAKS_CSV_HEADER = "x_mm,y_mm,depth_mm,peak_value"


@dataclass(frozen=True)
class ContactPoint:
    """One indentation: planar position and depth, workspace frame, mm."""

    x_mm: float
    y_mm: float
    depth_mm: float


@dataclass(frozen=True)
class KernelParams:
    """Geometry constants of the encoding kernel."""

    indenter_radius_mm: float = 3.0
    sigma_blur_mm: float = 2.0
    d_max_mm: float = 6.0

    def __post_init__(self):
        if self.indenter_radius_mm <= 0 or self.sigma_blur_mm <= 0 or self.d_max_mm <= 0:
            raise DomainError("kernel parameters must be strictly positive")


@dataclass(frozen=True)
class GridMapping:
    """Affine map between workspace mm and heatmap pixel coordinates.

    The workspace is an axis-aligned square of side `workspace_side_mm`
    centred on the origin; pixel (row i, col j) covers a pitch-sized cell
    whose centre sits at x = (j+0.5)*pitch - L/2, y = (i+0.5)*pitch - L/2.
    """

    resolution: int = 64
    workspace_side_mm: float = 32.0

    def __post_init__(self):
        if self.resolution < 1 or self.workspace_side_mm <= 0:
            raise DomainError("grid mapping requires resolution >= 1 and positive side")

    @property
    def pixel_pitch_mm(self) -> float:
        return self.workspace_side_mm / self.resolution

    @property
    def half_side_mm(self) -> float:
        return self.workspace_side_mm / 2.0

    def contains(self, x_mm: float, y_mm: float) -> bool:
        h = self.half_side_mm
        return -h <= x_mm <= h and -h <= y_mm <= h

    def pixel_centers_mm(self) -> np.ndarray:
        """Coordinates of row/col pixel centres along one axis (mm)."""
        idx = np.arange(self.resolution, dtype=np.float64)
        return (idx + 0.5) * self.pixel_pitch_mm - self.half_side_mm


class HeatmapGrid:
    """64x64 (by default) value grid in [0,1] plus its mm mapping."""

    __slots__ = ("values", "mapping")

    def __init__(self, values: np.ndarray, mapping: GridMapping):
        values = np.asarray(values, dtype=np.float32)
        if values.shape != (mapping.resolution, mapping.resolution):
            raise ShapeError(
                f"heatmap shape {values.shape} != ({mapping.resolution}, {mapping.resolution})"
            )
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise DomainError("heatmap values must lie in [0, 1]")
        self.values = values
        self.mapping = mapping

    def __repr__(self) -> str:
        return f"HeatmapGrid(resolution={self.mapping.resolution}, max={float(self.values.max()):.4f})"


@dataclass(frozen=True)
class PeakDetection:
    """One extracted local maximum: sub-pixel position, recovered depth and
    the raw (unrefined) peak value."""

    x_mm: float
    y_mm: float
    depth_mm: float
    peak_value: float


def hertz_contact_radius(indenter_radius_mm: float, depth_mm: float) -> float:
    """Contact-patch radius a = sqrt(R*d) of a sphere on an elastic plane."""
    if indenter_radius_mm <= 0:
        raise DomainError(f"indenter radius must be positive, got {indenter_radius_mm}")
    if depth_mm < 0:
        raise DomainError(f"indentation depth must be non-negative, got {depth_mm}")
    return math.sqrt(indenter_radius_mm * depth_mm)


def kernel_sigma(depth_mm: float, params: KernelParams = KernelParams()) -> float:
    """Kernel width: contact-patch sigma (a/3) plus blur, in quadrature."""
    a = hertz_contact_radius(params.indenter_radius_mm, depth_mm)
    sigma_contact = a / 3.0
    return math.sqrt(sigma_contact * sigma_contact + params.sigma_blur_mm * params.sigma_blur_mm)


def depth_from_value(value: float, d_max_mm: float = 6.0) -> float:
    """Invert the amplitude normalization: depth = value * d_max."""
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"heatmap value must lie in [0, 1], got {value}")
    return value * d_max_mm


def mm_to_px(mapping: GridMapping, x_mm: float, y_mm: float) -> tuple[float, float]:
    """Workspace mm -> continuous (row, col) pixel coordinates."""
    if not mapping.contains(x_mm, y_mm):
        raise DomainError(f"({x_mm}, {y_mm}) mm outside the {mapping.workspace_side_mm} mm workspace")
    pitch = mapping.pixel_pitch_mm
    col = (x_mm + mapping.half_side_mm) / pitch - 0.5
    row = (y_mm + mapping.half_side_mm) / pitch - 0.5
    return row, col


def px_to_mm(mapping: GridMapping, row: float, col: float) -> tuple[float, float]:
    """Continuous (row, col) pixel coordinates -> workspace mm."""
    pitch = mapping.pixel_pitch_mm
    x_mm = (col + 0.5) * pitch - mapping.half_side_mm
    y_mm = (row + 0.5) * pitch - mapping.half_side_mm
    return x_mm, y_mm


def encode_heatmap(
    contacts: list[ContactPoint],
    mapping: GridMapping = GridMapping(),
    params: KernelParams = KernelParams(),
) -> HeatmapGrid:
    """Render a contact set as a max-composed Gaussian heatmap.

    Each contact contributes amplitude depth/d_max and width
    kernel_sigma(depth); an empty set encodes to zeros.
    """
    centers = mapping.pixel_centers_mm()
    acc = np.zeros((mapping.resolution, mapping.resolution), dtype=np.float64)
    for c in contacts:
        if not mapping.contains(c.x_mm, c.y_mm):
            raise DomainError(f"contact at ({c.x_mm}, {c.y_mm}) mm outside workspace")
        if not 0.0 <= c.depth_mm <= params.d_max_mm:
            raise DomainError(f"contact depth {c.depth_mm} mm outside [0, {params.d_max_mm}]")
        sigma = kernel_sigma(c.depth_mm, params)
        amp = c.depth_mm / params.d_max_mm
        dx2 = np.square(centers - c.x_mm)
        dy2 = np.square(centers - c.y_mm)
        kernel = amp * np.exp(-(dy2[:, None] + dx2[None, :]) / (2.0 * sigma * sigma))
        np.maximum(acc, kernel, out=acc)
    return HeatmapGrid(acc.astype(np.float32), mapping)


def refine_subpixel(values: np.ndarray, peak_rc: tuple[int, int]) -> tuple[float, float, float]:
    """Separable quadratic refinement around a discrete peak.

    Returns (d_row, d_col, refined_value).  Each axis fits a parabola
    through the three samples straddling the peak; the offset
    0.5*(v_minus - v_plus)/(v_minus - 2*v0 + v_plus) is clamped to
    [-0.5, 0.5] and degenerate (near-flat) fits return 0.  Peaks on the
    border are not refined.
    """
    r, c = peak_rc
    h, w = values.shape
    v0 = float(values[r, c])
    if r <= 0 or c <= 0 or r >= h - 1 or c >= w - 1:
        return 0.0, 0.0, v0

    refined = v0
    offsets = []
    for v_minus, v_plus in (
        (float(values[r - 1, c]), float(values[r + 1, c])),
        (float(values[r, c - 1]), float(values[r, c + 1])),
    ):
        denom = v_minus - 2.0 * v0 + v_plus
        if abs(denom) <= 1e-12:
            offsets.append(0.0)
            continue
        t = 0.5 * (v_minus - v_plus) / denom
        t = min(0.5, max(-0.5, t))
        offsets.append(t)
        # Parabola value at the offset exceeds v0 by -b^2/(4a) per axis.
        half_slope = 0.5 * (v_plus - v_minus)
        refined += 0.5 * half_slope * t
    return offsets[0], offsets[1], min(1.0, max(0.0, refined))


def extract_peaks(
    heatmap: HeatmapGrid,
    tau: float = 0.06,
    footprint: int = 5,
    min_sep_px: int = 3,
    d_max_mm: float = 6.0,
) -> list[PeakDetection]:
    """Locate contacts in a heatmap.

    A pixel is a candidate iff it equals the footprint maximum and clears
    `tau`; candidates closer than `min_sep_px` keep only the higher value;
    survivors are sub-pixel refined and depth-scaled.  Results are sorted by
    descending peak value (ties broken by row-major position for
    determinism).
    """
    if not 0.0 < tau < 1.0:
        raise DomainError(f"threshold must lie in (0, 1), got {tau}")
    if footprint < 1 or footprint % 2 == 0:
        raise DomainError(f"footprint must be odd and positive, got {footprint}")
    values = heatmap.values
    filt = ndimage.maximum_filter(values, size=footprint, mode="constant", cval=0.0)
    rows, cols = np.nonzero((values >= tau) & (values == filt))
    if rows.size == 0:
        return []

    order = np.lexsort((cols, rows, -values[rows, cols]))
    kept: list[tuple[int, int]] = []
    min_sep_sq = min_sep_px * min_sep_px
    for k in order:
        r, c = int(rows[k]), int(cols[k])
        if all((r - kr) ** 2 + (c - kc) ** 2 >= min_sep_sq for kr, kc in kept):
            kept.append((r, c))

    peaks: list[PeakDetection] = []
    for r, c in kept:
        d_row, d_col, refined = refine_subpixel(values, (r, c))
        x_mm, y_mm = px_to_mm(heatmap.mapping, r + d_row, c + d_col)
        peaks.append(
            PeakDetection(
                x_mm=x_mm,
                y_mm=y_mm,
                depth_mm=depth_from_value(refined, d_max_mm),
                peak_value=float(values[r, c]),
            )
        )
    return peaks


def format_peaks_csv(peaks: list[PeakDetection]) -> str:
    """Serialize peaks as CSV (header always present, 6 decimal places)."""
    lines = [PEAKS_CSV_HEADER]
    for p in peaks:
        lines.append(f"{p.x_mm:.6f},{p.y_mm:.6f},{p.depth_mm:.6f},{p.peak_value:.6f}")
    return "\n".join(lines) + "\n"

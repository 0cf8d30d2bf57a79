"""Deterministic synthetic stand-in for a marker-based tactile sensor.

A flat elastic membrane carries a regular grid of visual markers.  Pressing
a hemispherical tip into it tilts nearby markers radially outward with a
(r/sigma)*exp(-r^2/(2*sigma^2)) profile -- zero at the contact centre,
peaked near one kernel width, decaying beyond.  Rendering draws each marker
as an anti-aliased disc on a dark background.  Everything is a pure function
of (seed, config), so datasets are reproducible byte-for-byte regardless of
generation order or thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codec import ContactPoint, GridMapping, KernelParams, kernel_sigma
from .errors import DomainError

__all__ = [
    "SimConfig",
    "SamplerConfig",
    "DUAL_SEPARATIONS_MM",
    "TRIPLE_TIP_HEIGHTS_MM",
    "rest_marker_positions",
    "sample_single_contacts",
    "displace_markers",
    "render_image",
    "dual_indenter_contacts",
    "triple_indenter_contacts",
    "sample_scenario",
]

# Two-point sweep grid: 6.5 mm up to 12.0 mm in 0.5 mm increments.
DUAL_SEPARATIONS_MM = tuple(round(6.5 + 0.5 * i, 1) for i in range(12))
# Modular tip heights for the triple indenter: 0.0 to 3.0 mm in 0.5 mm steps.
TRIPLE_TIP_HEIGHTS_MM = tuple(round(0.5 * i, 1) for i in range(7))

_MIN_VALID_DEPTH_MM = 0.5


@dataclass(frozen=True)
class SimConfig:
    """Rendering model of the synthetic sensor."""

    marker_grid: int = 13
    image_resolution: int = 64
    channels: int = 1
    marker_disc_radius_px: float = 1.2
    deflection_gain_px: float = 3.0
    pixel_noise_sigma: float = 0.0

    def __post_init__(self):
        if self.marker_grid < 2 or self.image_resolution < 2 or self.channels < 1:
            raise DomainError("marker grid, resolution and channels must be at least 2/2/1")
        if self.deflection_gain_px <= 0:
            raise DomainError("deflection gain must be positive")
        if self.pixel_noise_sigma < 0:
            raise DomainError("pixel noise sigma must be non-negative")
        spacing_px = self.image_resolution / self.marker_grid
        if spacing_px <= 2.0 * self.marker_disc_radius_px:
            raise DomainError(
                f"marker spacing {spacing_px:.2f} px must exceed twice the disc radius "
                f"{self.marker_disc_radius_px} px"
            )


@dataclass(frozen=True)
class SamplerConfig:
    """Contact scenario sampling bounds.

    `margin_mm` keeps contacts at least that far inside the workspace border;
    the default (3x the widest kernel sigma) guarantees encoded peaks retain
    their full amplitude.
    """

    count: int = 0
    depth_min_mm: float = 0.5
    depth_max_mm: float = 6.0
    margin_mm: float | None = None

    def __post_init__(self):
        if self.count < 0:
            raise DomainError("sample count must be non-negative")
        if not 0.0 < self.depth_min_mm <= self.depth_max_mm:
            raise DomainError("depth bounds must satisfy 0 < min <= max")

    def resolved_margin_mm(self, params: KernelParams) -> float:
        if self.margin_mm is not None:
            return self.margin_mm
        return 3.0 * kernel_sigma(params.d_max_mm, params)


def _sampling_halfwidth(mapping: GridMapping, margin_mm: float) -> float:
    half = mapping.half_side_mm - margin_mm
    if half <= 0:
        raise DomainError(
            f"margin {margin_mm} mm leaves no interior in a {mapping.workspace_side_mm} mm workspace"
        )
    return half


def rest_marker_positions(cfg: SimConfig, mapping: GridMapping = GridMapping()) -> np.ndarray:
    """Undeformed marker centres, shape (m*m, 2), mm, row-major grid order."""
    m = cfg.marker_grid
    coords = (np.arange(m, dtype=np.float64) + 0.5) * mapping.workspace_side_mm / m - mapping.half_side_mm
    xx, yy = np.meshgrid(coords, coords)
    return np.stack([xx.ravel(), yy.ravel()], axis=1)


def sample_single_contacts(
    master_seed: int,
    cfg: SamplerConfig,
    mapping: GridMapping = GridMapping(),
    params: KernelParams = KernelParams(),
) -> list[list[ContactPoint]]:
    """Draw `cfg.count` one-contact scenarios.

    Sample i is generated from rng([master_seed, i]) alone, so any sample is
    reproducible in isolation and generation parallelizes trivially.
    """
    half = _sampling_halfwidth(mapping, cfg.resolved_margin_mm(params))
    out = []
    for i in range(cfg.count):
        rng = np.random.default_rng([master_seed, i])
        out.append(_draw_single(rng, cfg, half))
    return out


def _draw_single(rng: np.random.Generator, cfg: SamplerConfig, half: float) -> list[ContactPoint]:
    x, y = rng.uniform(-half, half, size=2)
    d = rng.uniform(cfg.depth_min_mm, cfg.depth_max_mm)
    return [ContactPoint(float(x), float(y), float(d))]


def displace_markers(
    rest_mm: np.ndarray,
    contacts: list[ContactPoint],
    cfg: SimConfig = SimConfig(),
    mapping: GridMapping = GridMapping(),
    params: KernelParams = KernelParams(),
) -> np.ndarray:
    """Deform the marker field under a set of contacts.

    Each contact pushes the marker at planar distance r radially by
    kappa_mm * (d/d_max) * (r/sigma) * exp(-r^2 / (2 sigma^2)), where sigma
    is the contact's encoding kernel width; multiple contacts superpose
    linearly.  A marker exactly at a contact centre does not move.
    """
    rest = np.asarray(rest_mm, dtype=np.float64)
    kappa_mm = cfg.deflection_gain_px * mapping.pixel_pitch_mm
    displaced = rest.copy()
    for c in contacts:
        delta = rest - np.array([c.x_mm, c.y_mm])
        r = np.hypot(delta[:, 0], delta[:, 1])
        sigma = kernel_sigma(c.depth_mm, params)
        scale = kappa_mm * (c.depth_mm / params.d_max_mm) / sigma * np.exp(-(r * r) / (2.0 * sigma * sigma))
        # delta/r * (r/sigma * ...) collapses to delta * (.../sigma): the
        # unit vector's 1/r cancels, so r == 0 contributes exactly zero.
        displaced += delta * scale[:, None]
    return displaced


def render_image(
    markers_mm: np.ndarray,
    cfg: SimConfig = SimConfig(),
    mapping: GridMapping = GridMapping(),
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Rasterize markers as anti-aliased discs, shape (C, H, W) in [0, 1].

    Disc coverage is approximated per pixel as clip(radius + 0.5 - dist, 0, 1)
    and overlapping discs combine by maximum.  Gaussian pixel noise (if
    configured) requires an rng; noise is added once and replicated across
    channels.
    """
    res = cfg.image_resolution
    pitch = mapping.workspace_side_mm / res
    half = mapping.half_side_mm
    img = np.zeros((res, res), dtype=np.float64)

    markers = np.asarray(markers_mm, dtype=np.float64)
    if markers.size:
        rows = (markers[:, 1] + half) / pitch - 0.5
        cols = (markers[:, 0] + half) / pitch - 0.5
        reach = int(math.ceil(cfg.marker_disc_radius_px + 0.5)) + 1
        offsets = np.arange(-reach, reach + 1, dtype=np.int64)
        r0 = np.rint(rows).astype(np.int64)[:, None] + offsets[None, :]      # (M, K)
        c0 = np.rint(cols).astype(np.int64)[:, None] + offsets[None, :]
        dr = r0.astype(np.float64) - rows[:, None]
        dc = c0.astype(np.float64) - cols[:, None]
        dist = np.sqrt(dr[:, :, None] ** 2 + dc[:, None, :] ** 2)           # (M, K, K)
        cover = np.clip(cfg.marker_disc_radius_px + 0.5 - dist, 0.0, 1.0)
        rr = np.broadcast_to(r0[:, :, None], dist.shape).ravel()
        cc = np.broadcast_to(c0[:, None, :], dist.shape).ravel()
        vv = cover.ravel()
        ok = (rr >= 0) & (rr < res) & (cc >= 0) & (cc < res) & (vv > 0)
        np.maximum.at(img, (rr[ok], cc[ok]), vv[ok])

    if cfg.pixel_noise_sigma > 0:
        if rng is None:
            raise DomainError("pixel noise requires an rng")
        img = img + rng.normal(0.0, cfg.pixel_noise_sigma, size=img.shape)
        np.clip(img, 0.0, 1.0, out=img)

    frame = img.astype(np.float32)
    return np.broadcast_to(frame, (cfg.channels, res, res)).copy()


def dual_indenter_contacts(
    center_mm: tuple[float, float],
    separation_mm: float,
    angle_rad: float,
    depth_mm: float,
    mapping: GridMapping = GridMapping(),
) -> list[ContactPoint]:
    """Two equal-depth tips symmetric about `center_mm` along `angle_rad`."""
    if not DUAL_SEPARATIONS_MM[0] <= separation_mm <= DUAL_SEPARATIONS_MM[-1]:
        raise DomainError(
            f"separation {separation_mm} mm outside sweep range "
            f"[{DUAL_SEPARATIONS_MM[0]}, {DUAL_SEPARATIONS_MM[-1]}]"
        )
    ox = 0.5 * separation_mm * math.cos(angle_rad)
    oy = 0.5 * separation_mm * math.sin(angle_rad)
    cx, cy = center_mm
    tips = [(cx - ox, cy - oy), (cx + ox, cy + oy)]
    for tx, ty in tips:
        if not mapping.contains(tx, ty):
            raise DomainError(f"indenter tip at ({tx:.3f}, {ty:.3f}) mm outside workspace")
    return [ContactPoint(float(tx), float(ty), float(depth_mm)) for tx, ty in tips]


def triple_indenter_contacts(
    center_mm: tuple[float, float],
    angle_rad: float,
    tip_heights_mm: tuple[float, float, float],
    base_depth_mm: float,
    layout_radius_mm: float = 5.0,
    mapping: GridMapping = GridMapping(),
) -> list[ContactPoint]:
    """Three tips at 120 degrees on a circle, with modular tip heights.

    The tallest tip indents to `base_depth_mm`; shorter tips indent less by
    their height deficit.  Tips not reaching the 0.5 mm validity threshold
    are dropped from the ground truth; if none reach it the scenario is
    rejected.
    """
    heights = tuple(float(h) for h in tip_heights_mm)
    if len(heights) != 3:
        raise DomainError(f"expected 3 tip heights, got {len(heights)}")
    for h in heights:
        if not TRIPLE_TIP_HEIGHTS_MM[0] <= h <= TRIPLE_TIP_HEIGHTS_MM[-1]:
            raise DomainError(f"tip height {h} mm outside [0, {TRIPLE_TIP_HEIGHTS_MM[-1]}]")
    h_max = max(heights)
    depths = [base_depth_mm - (h_max - h) for h in heights]
    if min(depths) < 0:
        raise DomainError(f"base depth {base_depth_mm} mm leaves a tip at negative depth")

    cx, cy = center_mm
    contacts = []
    for k, d in enumerate(depths):
        theta = angle_rad + k * 2.0 * math.pi / 3.0
        tx = cx + layout_radius_mm * math.cos(theta)
        ty = cy + layout_radius_mm * math.sin(theta)
        if not mapping.contains(tx, ty):
            raise DomainError(f"indenter tip at ({tx:.3f}, {ty:.3f}) mm outside workspace")
        if d >= _MIN_VALID_DEPTH_MM:
            contacts.append(ContactPoint(float(tx), float(ty), float(d)))
    if not contacts:
        raise DomainError("no tip reaches the 0.5 mm validity threshold")
    return contacts


def _tips_inside(tips: list[tuple[float, float]], half: float) -> bool:
    return all(abs(tx) <= half and abs(ty) <= half for tx, ty in tips)


def _draw_dual(
    rng: np.random.Generator,
    cfg: SamplerConfig,
    half: float,
    separation_mm: float,
    mapping: GridMapping,
) -> list[ContactPoint]:
    for _ in range(10_000):
        cx, cy = rng.uniform(-half, half, size=2)
        angle = rng.uniform(0.0, 2.0 * math.pi)
        ox = 0.5 * separation_mm * math.cos(angle)
        oy = 0.5 * separation_mm * math.sin(angle)
        if _tips_inside([(cx - ox, cy - oy), (cx + ox, cy + oy)], half):
            depth = rng.uniform(cfg.depth_min_mm, cfg.depth_max_mm)
            return dual_indenter_contacts((float(cx), float(cy)), separation_mm, angle, float(depth), mapping)
    raise DomainError(f"cannot place a {separation_mm} mm pair inside the sampling margin")


def _draw_triple(
    rng: np.random.Generator,
    cfg: SamplerConfig,
    half: float,
    mapping: GridMapping,
    layout_radius_mm: float = 5.0,
) -> tuple[list[ContactPoint], tuple[float, float, float], float]:
    for _ in range(10_000):
        cx, cy = rng.uniform(-half, half, size=2)
        angle = rng.uniform(0.0, 2.0 * math.pi)
        tips = [
            (cx + layout_radius_mm * math.cos(angle + k * 2.0 * math.pi / 3.0),
             cy + layout_radius_mm * math.sin(angle + k * 2.0 * math.pi / 3.0))
            for k in range(3)
        ]
        if not _tips_inside(tips, half):
            continue
        heights = tuple(float(TRIPLE_TIP_HEIGHTS_MM[j]) for j in rng.integers(0, len(TRIPLE_TIP_HEIGHTS_MM), size=3))
        spread = max(heights) - min(heights)
        base_lo = max(cfg.depth_min_mm, spread)
        base = float(rng.uniform(base_lo, max(base_lo, cfg.depth_max_mm)))
        contacts = triple_indenter_contacts((float(cx), float(cy)), angle, heights, base, layout_radius_mm, mapping)
        return contacts, heights, base
    raise DomainError("cannot place a triple indenter inside the sampling margin")


def sample_scenario(
    kind: str,
    master_seed: int,
    index: int,
    cfg: SamplerConfig,
    mapping: GridMapping = GridMapping(),
    params: KernelParams = KernelParams(),
    sweep_position: int | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[list[ContactPoint], dict]:
    """Generate one contact scenario plus its descriptive metadata.

    The rng derives from (master_seed, index) only; callers may pass that
    generator in explicitly to keep drawing from the same per-sample stream
    (e.g. for render noise).  For dual scenarios, `sweep_position` walks the
    separation grid cyclically so every sweep bin receives the same share of
    samples.
    """
    if rng is None:
        rng = np.random.default_rng([master_seed, index])
    half = _sampling_halfwidth(mapping, cfg.resolved_margin_mm(params))
    if kind == "single":
        contacts = _draw_single(rng, cfg, half)
        meta: dict = {"kind": "single"}
    elif kind == "dual":
        pos = index if sweep_position is None else sweep_position
        separation = DUAL_SEPARATIONS_MM[pos % len(DUAL_SEPARATIONS_MM)]
        contacts = _draw_dual(rng, cfg, half, separation, mapping)
        meta = {"kind": "dual", "separation_mm": separation}
    elif kind == "triple":
        contacts, heights, base = _draw_triple(rng, cfg, half, mapping)
        meta = {"kind": "triple", "tip_heights_mm": list(heights), "base_depth_mm": base}
    else:
        raise DomainError(f"unknown scenario kind {kind!r}")
    return contacts, meta

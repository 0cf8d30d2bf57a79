"""Dataset generation, persistence and loading.

On-disk layout::

    <root>/manifest.json
    <root>/samples/000000.img.tvt      rendered sensor image, (C, H, W)
    <root>/samples/000000.hm.tvt       ground-truth heatmap, (H, W)
    <root>/samples/000000.labels.csv   contacts, one per line

Labels are written with full float precision (repr round-trip), so the
persisted heatmap always equals a re-encoding of the parsed labels bit for
bit.  Every sample is a pure function of (master_seed, index), making the
whole tree byte-identical across runs and thread counts.  Externally
produced datasets in the same layout load identically; a missing heatmap
file is re-encoded from the labels on load.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .codec import ContactPoint, GridMapping, KernelParams, encode_heatmap
from .errors import ConfigError, DomainError, FormatError, MissingInputError
from .formats import load_tensor, save_tensor
from .sim import SamplerConfig, SimConfig, displace_markers, render_image, rest_marker_positions, sample_scenario

__all__ = [
    "FORMAT_VERSION",
    "SCENARIO_KINDS",
    "DataView",
    "build_dataset",
    "load_dataset",
    "subset",
    "concat_views",
    "split_dataset",
    "parse_scenario",
]

FORMAT_VERSION = 1
SCENARIO_KINDS = ("single", "dual", "triple")
LABELS_HEADER = "x_mm,y_mm,depth_mm"


@dataclass
class DataView:
    """In-memory dataset slice: aligned arrays plus per-sample metadata."""

    images: np.ndarray                      # (N, C, H, W) float32
    heatmaps: np.ndarray                    # (N, H, W) float32
    labels: list[list[ContactPoint]]
    meta: list[dict]
    mapping: GridMapping = field(default_factory=GridMapping)
    kernel: KernelParams = field(default_factory=KernelParams)

    def __post_init__(self):
        n = len(self.images)
        if not (len(self.heatmaps) == len(self.labels) == len(self.meta) == n):
            raise DomainError("misaligned dataset arrays")

    def __len__(self) -> int:
        return len(self.images)


def parse_scenario(text: str) -> dict[str, int]:
    """Parse "single:N[,dual:N,triple:N]" into an ordered count mapping."""
    counts = dict.fromkeys(SCENARIO_KINDS, 0)
    seen = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        kind, _, num = part.partition(":")
        if kind not in SCENARIO_KINDS:
            raise ConfigError(f"unknown scenario kind {kind!r}; expected one of {SCENARIO_KINDS}")
        if kind in seen:
            raise ConfigError(f"duplicate scenario kind {kind!r}")
        seen.add(kind)
        try:
            counts[kind] = int(num)
        except ValueError:
            raise ConfigError(f"scenario count for {kind!r} is not an integer: {num!r}") from None
        if counts[kind] < 0:
            raise ConfigError(f"scenario count for {kind!r} must be non-negative")
    if sum(counts.values()) == 0:
        raise ConfigError(f"scenario {text!r} requests zero samples")
    return counts


def _labels_csv(contacts: list[ContactPoint]) -> str:
    lines = [LABELS_HEADER]
    for c in contacts:
        lines.append(f"{c.x_mm!r},{c.y_mm!r},{c.depth_mm!r}")
    return "\n".join(lines) + "\n"


def _parse_labels(text: str, path: Path) -> list[ContactPoint]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != LABELS_HEADER:
        raise FormatError(f"{path}: expected header {LABELS_HEADER!r}")
    contacts = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 3:
            raise FormatError(f"{path}: malformed label line {ln!r}")
        try:
            x, y, d = (float(p) for p in parts)
        except ValueError:
            raise FormatError(f"{path}: non-numeric label line {ln!r}") from None
        contacts.append(ContactPoint(x, y, d))
    return contacts


def _sample_paths(samples_dir: Path, index: int) -> tuple[Path, Path, Path]:
    stem = f"{index:06d}"
    return (
        samples_dir / f"{stem}.img.tvt",
        samples_dir / f"{stem}.hm.tvt",
        samples_dir / f"{stem}.labels.csv",
    )


def build_dataset(
    out_dir: str | Path,
    master_seed: int,
    scenario: dict[str, int],
    sim_cfg: SimConfig = SimConfig(),
    kernel: KernelParams = KernelParams(),
    mapping: GridMapping = GridMapping(),
    sampler: SamplerConfig = SamplerConfig(),
    threads: int = 1,
    config_echo: dict | None = None,
) -> dict:
    """Generate and persist a dataset; returns the manifest.

    Samples are laid out single-block first, then dual, then triple; dual
    samples cycle through the separation sweep so each bin is evenly
    populated.  Generation parallelizes across indices without affecting
    output bytes because every sample seeds its own rng from
    (master_seed, index).
    """
    root = Path(out_dir)
    samples_dir = root / "samples"
    samples_dir.mkdir(parents=True, exist_ok=True)

    plan: list[tuple[int, str, int | None]] = []
    index = 0
    for kind in SCENARIO_KINDS:
        for local in range(scenario.get(kind, 0)):
            plan.append((index, kind, local if kind == "dual" else None))
            index += 1
    if not plan:
        raise DomainError("scenario requests zero samples")

    rest = rest_marker_positions(sim_cfg, mapping)

    def generate(entry: tuple[int, str, int | None]) -> dict:
        idx, kind, sweep_pos = entry
        rng = np.random.default_rng([master_seed, idx])
        contacts, meta = sample_scenario(
            kind, master_seed, idx, sampler, mapping, kernel, sweep_position=sweep_pos, rng=rng
        )
        displaced = displace_markers(rest, contacts, sim_cfg, mapping, kernel)
        image = render_image(displaced, sim_cfg, mapping, rng=rng)
        heatmap = encode_heatmap(contacts, mapping, kernel)
        img_path, hm_path, labels_path = _sample_paths(samples_dir, idx)
        save_tensor(img_path, image)
        save_tensor(hm_path, heatmap.values)
        labels_path.write_text(_labels_csv(contacts))
        return {"index": idx, "seed": [master_seed, idx], "n_contacts": len(contacts), **meta}

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(generate, plan))
    else:
        rows = [generate(entry) for entry in plan]
    rows.sort(key=lambda r: r["index"])

    manifest = {
        "format_version": FORMAT_VERSION,
        "master_seed": master_seed,
        "scenario": {k: scenario.get(k, 0) for k in SCENARIO_KINDS},
        "counts": {"total": len(rows)},
        "config": {
            "sim": asdict(sim_cfg),
            "kernel": asdict(kernel),
            "mapping": asdict(mapping),
            "sampler": asdict(sampler),
        },
        "run_config": config_echo or {},
        "samples": rows,
    }
    for kind in SCENARIO_KINDS:
        manifest["counts"][kind] = sum(1 for r in rows if r["kind"] == kind)
    (root / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest


def load_dataset(root: str | Path) -> DataView:
    """Load a persisted dataset into memory."""
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise MissingInputError(f"no dataset manifest at {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{manifest_path}: invalid JSON: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"{manifest_path}: unsupported format version {manifest.get('format_version')!r}")

    cfg = manifest.get("config", {})
    mapping = GridMapping(**cfg.get("mapping", {}))
    kernel = KernelParams(**cfg.get("kernel", {}))

    samples_dir = root / "samples"
    images, heatmaps, labels, meta = [], [], [], []
    for row in manifest["samples"]:
        idx = row["index"]
        img_path, hm_path, labels_path = _sample_paths(samples_dir, idx)
        if not img_path.is_file():
            raise MissingInputError(f"missing sample image {img_path}")
        if not labels_path.is_file():
            raise MissingInputError(f"missing sample labels {labels_path}")
        contacts = _parse_labels(labels_path.read_text(), labels_path)
        image = load_tensor(img_path)
        if hm_path.is_file():
            hm = load_tensor(hm_path)
        else:
            hm = encode_heatmap(contacts, mapping, kernel).values
        images.append(image)
        heatmaps.append(hm)
        labels.append(contacts)
        meta.append(dict(row))

    return DataView(
        images=np.stack(images).astype(np.float32),
        heatmaps=np.stack(heatmaps).astype(np.float32),
        labels=labels,
        meta=meta,
        mapping=mapping,
        kernel=kernel,
    )


def subset(view: DataView, indices: np.ndarray) -> DataView:
    """Select samples by position; preserves the given order."""
    idx = np.asarray(indices, dtype=np.intp)
    return DataView(
        images=view.images[idx],
        heatmaps=view.heatmaps[idx],
        labels=[view.labels[i] for i in idx],
        meta=[view.meta[i] for i in idx],
        mapping=view.mapping,
        kernel=view.kernel,
    )


def concat_views(views: list[DataView]) -> DataView:
    """Concatenate datasets that share one grid mapping and kernel."""
    if not views:
        raise DomainError("cannot concatenate zero datasets")
    first = views[0]
    for v in views[1:]:
        if v.mapping != first.mapping or v.kernel != first.kernel:
            raise ConfigError("datasets disagree on grid mapping or kernel parameters")
        if v.images.shape[1:] != first.images.shape[1:]:
            raise ConfigError(
                f"datasets disagree on image shape: {v.images.shape[1:]} vs {first.images.shape[1:]}"
            )
    return DataView(
        images=np.concatenate([v.images for v in views]),
        heatmaps=np.concatenate([v.heatmaps for v in views]),
        labels=[c for v in views for c in v.labels],
        meta=[m for v in views for m in v.meta],
        mapping=first.mapping,
        kernel=first.kernel,
    )


def split_dataset(view: DataView, ratio: float, seed: int) -> tuple[DataView, DataView]:
    """Deterministic shuffled split into (train, test)."""
    if not 0.0 < ratio < 1.0:
        raise DomainError(f"split ratio must lie strictly inside (0, 1), got {ratio}")
    n = len(view)
    if n == 0:
        raise DomainError("cannot split an empty dataset")
    perm = np.random.default_rng(seed).permutation(n)
    k = int(round(n * ratio))
    k = min(max(k, 1), n - 1)
    return subset(view, np.sort(perm[:k])), subset(view, np.sort(perm[k:]))

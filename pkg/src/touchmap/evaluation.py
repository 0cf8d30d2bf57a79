"""Experiment harnesses: single-point regression metrics, two-point
discrimination sweep, and multi-contact position/depth evaluation.

Predictions are matched to ground truth by minimum-total-2D-distance
assignment with a gate: pairs further apart than `gate_mm` count as one
miss plus one false positive instead of a (meaningless) correspondence.
Samples where the detector returns the wrong peak count are excluded from
error averages and reported as failure/miss counts, keeping the error
statistics honest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .codec import ContactPoint, PeakDetection
from .dataset import DataView
from .errors import ConfigError, DomainError
from .sim import DUAL_SEPARATIONS_MM
from .training import EvalParams, predict_contacts_batch

__all__ = [
    "AXES",
    "EvalReport",
    "TwoPointReport",
    "MultiContactReport",
    "MatchResult",
    "match_peaks",
    "evaluate_single_point",
    "two_point_discrimination",
    "multi_contact_eval",
    "compare_models",
    "eval_report_csv",
    "two_point_csv",
    "multi_contact_csv",
]

AXES = ("x", "y", "z")
EVAL_CSV_HEADER = "axis,r2,mae_mm,rmse_mm"
TWO_POINT_CSV_HEADER = "separation_mm,distance_mae_mm,n"
MULTI_CSV_HEADER = "multiplicity,position_error_mm,depth_mae_mm,matched_pairs,misses,false_positives,n_samples"
_MAX_MATCH_POINTS = 8


@dataclass(frozen=True)
class EvalReport:
    """Per-axis regression quality over a single-contact test set."""

    r2: tuple[float, float, float]
    mae_mm: tuple[float, float, float]
    rmse_mm: tuple[float, float, float]
    n: int
    misses: int

    @property
    def avg_r2(self) -> float:
        return float(np.mean(self.r2))

    @property
    def avg_mae_mm(self) -> float:
        return float(np.mean(self.mae_mm))

    @property
    def avg_rmse_mm(self) -> float:
        return float(np.mean(self.rmse_mm))


@dataclass(frozen=True)
class TwoPointReport:
    """Distance-estimation quality across the separation sweep."""

    separations_mm: tuple[float, ...]
    distance_mae_mm: tuple[float, ...]        # nan for empty bins
    bin_counts: tuple[int, ...]
    overall_distance_mae_mm: float
    mean_position_error_mm: float
    depth_mae_mm: float
    valid_pair_count: int
    failure_count: int
    sample_count: int


@dataclass(frozen=True)
class MultiContactReport:
    """Matched-pair position/depth errors for one contact multiplicity."""

    multiplicity: int
    mean_position_error_mm: float
    depth_mae_mm: float
    matched_pairs: int
    misses: int
    false_positives: int
    n_samples: int


@dataclass(frozen=True)
class MatchResult:
    """Assignment between predicted and ground-truth contacts."""

    pairs: tuple[tuple[int, int], ...]         # (prediction index, truth index)
    unmatched_preds: tuple[int, ...]           # false positives
    unmatched_gts: tuple[int, ...]             # misses


def match_peaks(
    preds: list[PeakDetection],
    gts: list[ContactPoint],
    gate_mm: float = 5.0,
) -> MatchResult:
    """Minimum-total-2D-distance assignment with a distance gate."""
    if len(preds) > _MAX_MATCH_POINTS or len(gts) > _MAX_MATCH_POINTS:
        raise DomainError(f"match_peaks handles at most {_MAX_MATCH_POINTS} points per side")
    if not preds or not gts:
        return MatchResult((), tuple(range(len(preds))), tuple(range(len(gts))))

    p = np.array([(d.x_mm, d.y_mm) for d in preds], dtype=np.float64)
    g = np.array([(c.x_mm, c.y_mm) for c in gts], dtype=np.float64)
    cost = np.linalg.norm(p[:, None, :] - g[None, :, :], axis=-1)
    rows, cols = linear_sum_assignment(cost)

    pairs = []
    for r, c in zip(rows, cols):
        if cost[r, c] <= gate_mm:
            pairs.append((int(r), int(c)))
    matched_p = {r for r, _ in pairs}
    matched_g = {c for _, c in pairs}
    return MatchResult(
        pairs=tuple(pairs),
        unmatched_preds=tuple(i for i in range(len(preds)) if i not in matched_p),
        unmatched_gts=tuple(i for i in range(len(gts)) if i not in matched_g),
    )


def _r2(errors: np.ndarray, truth: np.ndarray) -> float:
    sse = float(np.sum(errors * errors))
    sst = float(np.sum((truth - truth.mean()) ** 2))
    if sst == 0.0:
        return 1.0 if sse == 0.0 else float("nan")
    return 1.0 - sse / sst


def evaluate_single_point(
    model,
    view: DataView,
    params: EvalParams = EvalParams(),
) -> EvalReport:
    """Strongest-peak prediction vs ground truth on single-contact samples.

    Samples yielding no peak are counted as misses and excluded from the
    per-axis statistics.
    """
    for i, contacts in enumerate(view.labels):
        if len(contacts) != 1:
            raise DomainError(f"sample {i} has {len(contacts)} contacts; single-point eval needs exactly 1")
    detections = predict_contacts_batch(model, view.images, view.mapping, params, view.kernel.d_max_mm)

    pred_rows, truth_rows = [], []
    misses = 0
    for peaks, contacts in zip(detections, view.labels):
        if not peaks:
            misses += 1
            continue
        best = peaks[0]  # detections are sorted by descending peak value
        c = contacts[0]
        pred_rows.append((best.x_mm, best.y_mm, best.depth_mm))
        truth_rows.append((c.x_mm, c.y_mm, c.depth_mm))

    if not pred_rows:
        nan3 = (float("nan"),) * 3
        return EvalReport(r2=nan3, mae_mm=nan3, rmse_mm=nan3, n=0, misses=misses)

    pred = np.asarray(pred_rows, dtype=np.float64)
    truth = np.asarray(truth_rows, dtype=np.float64)
    err = pred - truth
    r2 = tuple(_r2(err[:, a], truth[:, a]) for a in range(3))
    mae = tuple(float(np.mean(np.abs(err[:, a]))) for a in range(3))
    rmse = tuple(float(np.sqrt(np.mean(err[:, a] ** 2))) for a in range(3))
    return EvalReport(r2=r2, mae_mm=mae, rmse_mm=rmse, n=len(pred_rows), misses=misses)


def _nominal_separation(contacts: list[ContactPoint], meta: dict) -> float:
    if "separation_mm" in meta:
        return float(meta["separation_mm"])
    a, b = contacts
    dist = float(np.hypot(a.x_mm - b.x_mm, a.y_mm - b.y_mm))
    return round(dist * 2.0) / 2.0  # snap to the 0.5 mm sweep grid


def two_point_discrimination(
    model,
    view: DataView,
    params: EvalParams = EvalParams(),
) -> TwoPointReport:
    """Separation-sweep analysis over two-contact samples.

    A sample counts toward the statistics only if exactly two peaks are
    extracted; anything else is a discrimination failure.  Distance error
    compares the predicted inter-peak distance to the nominal separation.
    """
    indices = [i for i, contacts in enumerate(view.labels) if len(contacts) == 2]
    if not indices:
        raise DomainError("dataset contains no two-contact samples")
    detections = predict_contacts_batch(
        model, view.images[indices], view.mapping, params, view.kernel.d_max_mm
    )

    bins: dict[float, list[float]] = {s: [] for s in DUAL_SEPARATIONS_MM}
    distance_errors: list[float] = []
    position_errors: list[float] = []
    depth_errors: list[float] = []
    failures = 0
    pair_count = 0

    for det_idx, i in enumerate(indices):
        contacts = view.labels[i]
        peaks = detections[det_idx]
        if len(peaks) != 2:
            failures += 1
            continue
        separation = _nominal_separation(contacts, view.meta[i])
        predicted = float(np.hypot(peaks[0].x_mm - peaks[1].x_mm, peaks[0].y_mm - peaks[1].y_mm))
        err = abs(predicted - separation)
        distance_errors.append(err)
        bins.setdefault(separation, []).append(err)

        match = match_peaks(peaks, contacts, params.gate_mm)
        for pi, gi in match.pairs:
            p, g = peaks[pi], contacts[gi]
            position_errors.append(float(np.hypot(p.x_mm - g.x_mm, p.y_mm - g.y_mm)))
            depth_errors.append(abs(p.depth_mm - g.depth_mm))
            pair_count += 1

    separations = tuple(sorted(bins))
    return TwoPointReport(
        separations_mm=separations,
        distance_mae_mm=tuple(float(np.mean(bins[s])) if bins[s] else float("nan") for s in separations),
        bin_counts=tuple(len(bins[s]) for s in separations),
        overall_distance_mae_mm=float(np.mean(distance_errors)) if distance_errors else float("nan"),
        mean_position_error_mm=float(np.mean(position_errors)) if position_errors else float("nan"),
        depth_mae_mm=float(np.mean(depth_errors)) if depth_errors else float("nan"),
        valid_pair_count=pair_count,
        failure_count=failures,
        sample_count=len(indices),
    )


def multi_contact_eval(
    model,
    view: DataView,
    params: EvalParams = EvalParams(),
) -> dict[int, MultiContactReport]:
    """Matched-pair position/depth errors grouped by ground-truth multiplicity."""
    detections = predict_contacts_batch(model, view.images, view.mapping, params, view.kernel.d_max_mm)

    grouped: dict[int, dict[str, list | int]] = {}
    for peaks, contacts in zip(detections, view.labels):
        k = len(contacts)
        slot = grouped.setdefault(
            k, {"pos": [], "depth": [], "misses": 0, "fps": 0, "n": 0}
        )
        slot["n"] += 1
        if len(peaks) > _MAX_MATCH_POINTS:
            # Degenerate detection (far too many peaks): count everything as
            # misses/false positives instead of attempting an assignment.
            slot["misses"] += len(contacts)
            slot["fps"] += len(peaks)
            continue
        match = match_peaks(peaks, contacts, params.gate_mm)
        slot["misses"] += len(match.unmatched_gts)
        slot["fps"] += len(match.unmatched_preds)
        for pi, gi in match.pairs:
            p, g = peaks[pi], contacts[gi]
            slot["pos"].append(float(np.hypot(p.x_mm - g.x_mm, p.y_mm - g.y_mm)))
            slot["depth"].append(abs(p.depth_mm - g.depth_mm))

    reports = {}
    for k in sorted(grouped):
        slot = grouped[k]
        reports[k] = MultiContactReport(
            multiplicity=k,
            mean_position_error_mm=float(np.mean(slot["pos"])) if slot["pos"] else float("nan"),
            depth_mae_mm=float(np.mean(slot["depth"])) if slot["depth"] else float("nan"),
            matched_pairs=len(slot["pos"]),
            misses=slot["misses"],
            false_positives=slot["fps"],
            n_samples=slot["n"],
        )
    return reports


# ---------------------------------------------------------------------------
# CSV rendering
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return f"{v:.6f}"


def eval_report_csv(report: EvalReport) -> str:
    lines = [EVAL_CSV_HEADER]
    for a, name in enumerate(AXES):
        lines.append(f"{name},{_fmt(report.r2[a])},{_fmt(report.mae_mm[a])},{_fmt(report.rmse_mm[a])}")
    lines.append(f"average,{_fmt(report.avg_r2)},{_fmt(report.avg_mae_mm)},{_fmt(report.avg_rmse_mm)}")
    return "\n".join(lines) + "\n"


def two_point_csv(report: TwoPointReport) -> str:
    lines = [TWO_POINT_CSV_HEADER]
    for s, mae, n in zip(report.separations_mm, report.distance_mae_mm, report.bin_counts):
        lines.append(f"{s},{_fmt(mae)},{n}")
    return "\n".join(lines) + "\n"


def multi_contact_csv(reports: dict[int, MultiContactReport]) -> str:
    lines = [MULTI_CSV_HEADER]
    for k in sorted(reports):
        r = reports[k]
        lines.append(
            f"{k},{_fmt(r.mean_position_error_mm)},{_fmt(r.depth_mae_mm)},"
            f"{r.matched_pairs},{r.misses},{r.false_positives},{r.n_samples}"
        )
    return "\n".join(lines) + "\n"


def compare_models(
    report_a: "EvalReport | dict[int, MultiContactReport]",
    report_b: "EvalReport | dict[int, MultiContactReport]",
    name_a: str = "model_a",
    name_b: str = "model_b",
) -> str:
    """Side-by-side CSV of two like-shaped reports plus a delta block (b - a)."""
    if isinstance(report_a, EvalReport) and isinstance(report_b, EvalReport):
        lines = ["model," + EVAL_CSV_HEADER]
        for name, rep in ((name_a, report_a), (name_b, report_b)):
            for ln in eval_report_csv(rep).strip().splitlines()[1:]:
                lines.append(f"{name},{ln}")
        axes = (*AXES, "average")
        a_rows = list(zip(report_a.r2 + (report_a.avg_r2,),
                          report_a.mae_mm + (report_a.avg_mae_mm,),
                          report_a.rmse_mm + (report_a.avg_rmse_mm,)))
        b_rows = list(zip(report_b.r2 + (report_b.avg_r2,),
                          report_b.mae_mm + (report_b.avg_mae_mm,),
                          report_b.rmse_mm + (report_b.avg_rmse_mm,)))
        for axis, arow, brow in zip(axes, a_rows, b_rows):
            deltas = ",".join(_fmt(bv - av) for av, bv in zip(arow, brow))
            lines.append(f"delta,{axis},{deltas}")
        return "\n".join(lines) + "\n"

    if isinstance(report_a, dict) and isinstance(report_b, dict):
        if set(report_a) != set(report_b):
            raise ConfigError(
                f"reports cover different multiplicities: {sorted(report_a)} vs {sorted(report_b)}"
            )
        lines = ["model," + MULTI_CSV_HEADER]
        for name, rep in ((name_a, report_a), (name_b, report_b)):
            for ln in multi_contact_csv(rep).strip().splitlines()[1:]:
                lines.append(f"{name},{ln}")
        for k in sorted(report_a):
            ra, rb = report_a[k], report_b[k]
            lines.append(
                f"delta,{k},{_fmt(rb.mean_position_error_mm - ra.mean_position_error_mm)},"
                f"{_fmt(rb.depth_mae_mm - ra.depth_mae_mm)},"
                f"{rb.matched_pairs - ra.matched_pairs},{rb.misses - ra.misses},"
                f"{rb.false_positives - ra.false_positives},{rb.n_samples - ra.n_samples}"
            )
        return "\n".join(lines) + "\n"

    raise ConfigError(
        f"cannot compare {type(report_a).__name__} against {type(report_b).__name__}"
    )

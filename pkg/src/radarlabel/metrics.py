"""Binary label evaluation: confusion counts, derived metrics, and a naive baseline."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree


class ClusterLabel(enum.Enum):
    VEHICLE = "vehicle"
    HUMAN = "human"
    CONSTRUCTION = "construction"
    VEGETATION = "vegetation"
    POLES = "poles"
    ARTIFACTS = "artifacts"


# Consolidation of the SemanticKITTI class vocabulary into the clusters above.
SEMANTIC_KITTI_CLUSTERS: dict[str, ClusterLabel] = {
    "car": ClusterLabel.VEHICLE,
    "bicycle": ClusterLabel.VEHICLE,
    "motorcycle": ClusterLabel.VEHICLE,
    "truck": ClusterLabel.VEHICLE,
    "other-vehicle": ClusterLabel.VEHICLE,
    "bus": ClusterLabel.VEHICLE,
    "person": ClusterLabel.HUMAN,
    "bicyclist": ClusterLabel.HUMAN,
    "motorcyclist": ClusterLabel.HUMAN,
    "building": ClusterLabel.CONSTRUCTION,
    "fence": ClusterLabel.CONSTRUCTION,
    "vegetation": ClusterLabel.VEGETATION,
    "trunk": ClusterLabel.VEGETATION,
    "terrain": ClusterLabel.VEGETATION,
    "pole": ClusterLabel.POLES,
    "traffic_sign": ClusterLabel.POLES,
    "traffic_light": ClusterLabel.POLES,
    "sky": ClusterLabel.ARTIFACTS,
    "road": ClusterLabel.ARTIFACTS,
    "parking": ClusterLabel.ARTIFACTS,
    "sidewalk": ClusterLabel.ARTIFACTS,
    "other-ground": ClusterLabel.ARTIFACTS,
}


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(
            self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn
        )


def confusion(predicted, truth) -> ConfusionMatrix:
    pred = np.asarray(predicted, dtype=int)
    y = np.asarray(truth, dtype=int)
    if pred.shape != y.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {y.shape}")
    if pred.size and (not np.isin(pred, (0, 1)).all() or not np.isin(y, (0, 1)).all()):
        raise ValueError("labels must be binary")
    return ConfusionMatrix(
        tp=int(np.count_nonzero((pred == 1) & (y == 1))),
        fp=int(np.count_nonzero((pred == 1) & (y == 0))),
        tn=int(np.count_nonzero((pred == 0) & (y == 0))),
        fn=int(np.count_nonzero((pred == 0) & (y == 1))),
    )


@dataclass(frozen=True)
class MetricValues:
    """Derived binary metrics; a ratio with a zero denominator is None, never 0."""

    accuracy: float | None
    precision: float | None
    recall: float | None
    f1: float | None
    iou_plausible: float | None
    iou_artifact: float | None
    mean_iou: float | None


def _ratio(num: int, den: int) -> float | None:
    return num / den if den > 0 else None


def compute_metrics(cm: ConfusionMatrix) -> MetricValues:
    if cm.total == 0:
        raise ValueError("cannot compute metrics over zero detections")
    iou_p = _ratio(cm.tp, cm.tp + cm.fp + cm.fn)
    iou_a = _ratio(cm.tn, cm.tn + cm.fn + cm.fp)
    mean_iou = None if iou_p is None or iou_a is None else (iou_p + iou_a) / 2
    return MetricValues(
        accuracy=_ratio(cm.tp + cm.tn, cm.total),
        precision=_ratio(cm.tp, cm.tp + cm.fp),
        recall=_ratio(cm.tp, cm.tp + cm.fn),
        f1=_ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn),
        iou_plausible=iou_p,
        iou_artifact=iou_a,
        mean_iou=mean_iou,
    )


@dataclass(frozen=True)
class SequenceResult:
    n: int
    confusion: ConfusionMatrix
    values: MetricValues


@dataclass(frozen=True)
class MetricReport:
    per_sequence: dict[str, SequenceResult]
    pooled: SequenceResult
    mean: MetricValues  # unweighted arithmetic mean over sequences

    _FIELDS = ("accuracy", "precision", "recall", "f1", "mean_iou", "iou_plausible", "iou_artifact")


def build_report(per_sequence: dict[str, tuple[np.ndarray, np.ndarray]]) -> MetricReport:
    """Aggregate (predicted, truth) pairs per sequence into one report."""
    seq_results: dict[str, SequenceResult] = {}
    pooled_cm = ConfusionMatrix(0, 0, 0, 0)
    for seq_id in sorted(per_sequence):
        pred, truth = per_sequence[seq_id]
        cm = confusion(pred, truth)
        seq_results[seq_id] = SequenceResult(n=cm.total, confusion=cm, values=compute_metrics(cm))
        pooled_cm = pooled_cm + cm
    pooled = SequenceResult(n=pooled_cm.total, confusion=pooled_cm, values=compute_metrics(pooled_cm))
    means = {}
    for name in MetricReport._FIELDS:
        vals = [getattr(r.values, name) for r in seq_results.values()]
        vals = [v for v in vals if v is not None]
        means[name] = sum(vals) / len(vals) if vals else None
    mean = MetricValues(
        accuracy=means["accuracy"],
        precision=means["precision"],
        recall=means["recall"],
        f1=means["f1"],
        iou_plausible=means["iou_plausible"],
        iou_artifact=means["iou_artifact"],
        mean_iou=means["mean_iou"],
    )
    return MetricReport(per_sequence=seq_results, pooled=pooled, mean=mean)


def _fmt(v: float | None) -> str:
    return "" if v is None else repr(round(v, 6))


def report_csv(report: MetricReport) -> str:
    """CSV rendering: unweighted mean row, pooled row, then one row per sequence."""
    lines = ["id,n,acc,precision,recall,f1_plausible,miou,iou_plausible,iou_artifact"]

    def row(rid: str, n: int, v: MetricValues) -> str:
        return ",".join(
            [rid, str(n)]
            + [_fmt(x) for x in (v.accuracy, v.precision, v.recall, v.f1, v.mean_iou, v.iou_plausible, v.iou_artifact)]
        )

    lines.append(row("mean", report.pooled.n, report.mean))
    lines.append(row("pooled", report.pooled.n, report.pooled.values))
    for seq_id, res in report.per_sequence.items():
        lines.append(row(seq_id, res.n, res.values))
    return "\n".join(lines) + "\n"


def class_balance(truth) -> tuple[float, float]:
    """(fraction plausible, fraction artifact) of a ground-truth label set."""
    y = np.asarray(truth, dtype=int)
    if y.size == 0:
        raise ValueError("class balance of an empty label set is undefined")
    plausible = float(np.count_nonzero(y == 1)) / y.size
    return plausible, 1.0 - plausible


def baseline_radius_outlier(points: np.ndarray, radius_m: float, min_neighbors: int) -> np.ndarray:
    """Classic radius outlier removal: plausible iff enough neighbors within radius."""
    if not radius_m > 0:
        raise ValueError("radius_m must be > 0")
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        return np.zeros(0, dtype=int)
    tree = cKDTree(pts)
    counts = np.array([len(ball) - 1 for ball in tree.query_ball_point(pts, radius_m)])
    return (counts >= min_neighbors).astype(int)

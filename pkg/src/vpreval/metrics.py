"""Matching-performance metrics computed from a confusion matrix and ground truth.

PR and ROC curves are built from each query's single best match, swept over
the distinct best-match scores in descending order. Areas use the trapezoid
rule over the swept points.
"""

from __future__ import annotations

import io
import math
import numbers
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, GroundTruth
from .engine import ConfusionMatrix
from .errors import MetricError, ValidationError


@dataclass(frozen=True)
class CurveReport:
    kind: str
    points: tuple[tuple[float, float], ...]
    auc: float | None = None
    thresholds: tuple[float, ...] | None = None
    info: dict = field(default_factory=dict)

    @property
    def xs(self) -> list[float]:
        return [p[0] for p in self.points]

    @property
    def ys(self) -> list[float]:
        return [p[1] for p in self.points]

    def summary(self) -> dict:
        out = {"kind": self.kind, "auc": self.auc, "n_points": len(self.points)}
        out.update(self.info)
        return out

    def to_csv(self) -> str:
        """One point per row; thresholds (PR/ROC) in a third column."""
        x_name, y_name = AXIS_NAMES[self.kind]
        buf = io.StringIO()
        header = [x_name, y_name] + (["threshold"] if self.thresholds is not None else [])
        buf.write(",".join(header) + "\n")
        for i, (x, y) in enumerate(self.points):
            cells = [repr(float(x)), repr(float(y))]
            if self.thresholds is not None:
                cells.append(repr(float(self.thresholds[i])))
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()


AXIS_NAMES = {
    "PR": ("recall", "precision"),
    "ROC": ("fpr", "tpr"),
    "RecallRate": ("n", "recall_rate"),
    "TPDistribution": ("gap_m", "count"),
}


def curve_from_csv(kind: str, text: str) -> CurveReport:
    """Inverse of :meth:`CurveReport.to_csv` (the area is recomputed, not stored)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split(",")
    points, thresholds = [], []
    for ln in lines[1:]:
        cells = [float(c) for c in ln.split(",")]
        points.append((cells[0], cells[1]))
        if len(header) > 2:
            thresholds.append(cells[2])
    auc = trapezoid(points) if kind in ("PR", "ROC") else None
    return CurveReport(kind, tuple(points), auc, tuple(thresholds) if len(header) > 2 else None)


def trapezoid(points) -> float:
    total = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        total += (x1 - x0) * (y0 + y1) / 2.0
    return total


def _split_by_class(cm: ConfusionMatrix, gt: GroundTruth):
    if len(gt) != cm.shape[0]:
        raise ValidationError(f"ground truth covers {len(gt)} queries, confusion matrix has {cm.shape[0]}")
    positive = np.array(gt.positives(), dtype=bool)
    correct = cm.correct(gt)
    return positive, correct


def _sweep_ends(scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Descending order of *scores* and the last position of each distinct value in it."""
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    ends = np.flatnonzero(np.append(s[1:] != s[:-1], True))
    return order, ends


def pr_curve_auc(cm: ConfusionMatrix, gt: GroundTruth) -> CurveReport:
    """Precision-recall curve over best-match scores, with its area.

    Queries without ground-truth matches are left out. At threshold ``t`` a
    query counts as TP if its best match is correct with score >= t, FP if
    incorrect with score >= t, FN if correct with score < t. The curve starts
    at recall 0 carrying the precision of the highest threshold.
    """
    positive, correct = _split_by_class(cm, gt)
    if not positive.any():
        raise MetricError("PR undefined without positives")
    scores = cm.best_score[positive]
    ok = correct[positive]
    n_correct = int(ok.sum())

    order, ends = _sweep_ends(scores)
    tp = np.cumsum(ok[order])[ends]
    fp = np.cumsum(~ok[order])[ends]
    thresholds = scores[order][ends]

    points = []
    for tp_i, fp_i in zip(tp.tolist(), fp.tolist()):
        precision = tp_i / (tp_i + fp_i)
        recall = tp_i / n_correct if n_correct else 0.0
        points.append((recall, precision))
    points.insert(0, (0.0, points[0][1]))
    thr = [float(thresholds[0])] + [float(t) for t in thresholds]
    return CurveReport("PR", tuple(points), trapezoid(points), tuple(thr))


def recall_rate_at_n(cm: ConfusionMatrix, gt: GroundTruth, n: int) -> float:
    """Fraction of queries with ground truth that have a correct reference in their top *n*."""
    positive, _ = _split_by_class(cm, gt)
    if not positive.any():
        raise MetricError("RecallRate undefined without positives")
    z = cm.shape[1]
    if not 1 <= n <= z:
        raise MetricError(f"RecallRate@{n} needs 1 <= N <= Z = {z}")
    # stable sort on negated scores: ties keep the lower reference index first
    top = np.argsort(-cm.scores, axis=1, kind="stable")[:, :n]
    hits = 0
    for q in np.flatnonzero(positive):
        refs = set(gt[q])
        if any(int(r) in refs for r in top[q]):
            hits += 1
    return hits / int(positive.sum())


def recall_rate_curve(cm: ConfusionMatrix, gt: GroundTruth, n_max: int = 20) -> CurveReport:
    n_max = min(n_max, cm.shape[1])
    points = tuple((float(n), recall_rate_at_n(cm, gt, n)) for n in range(1, n_max + 1))
    return CurveReport("RecallRate", points)


def roc_curve_auc(cm: ConfusionMatrix, gt: GroundTruth) -> CurveReport:
    """ROC curve with positives = queries with ground truth, negatives = queries without.

    A positive query is TP when its best match is correct and scores >= t, FN
    otherwise (a wrong best match is FN at every threshold). A negative query is
    FP when its best score >= t, TN otherwise. The sweep is closed with (0, 0)
    in front and the threshold -inf point at the end.
    """
    positive, correct = _split_by_class(cm, gt)
    if not positive.any():
        raise MetricError("ROC requires queries with a correct reference")
    if positive.all():
        raise MetricError("ROC requires true-negative queries")
    n_pos = int(positive.sum())
    n_neg = int((~positive).sum())
    hit = positive & correct

    scores = cm.best_score
    order, ends = _sweep_ends(scores)
    tp = np.cumsum(hit[order])[ends]
    fp = np.cumsum(~positive[order])[ends]
    thresholds = scores[order][ends]

    points = [(0.0, 0.0)]
    thr = [math.inf]
    for tp_i, fp_i, t in zip(tp.tolist(), fp.tolist(), thresholds.tolist()):
        points.append((fp_i / n_neg, tp_i / n_pos))
        thr.append(t)
    points.append((1.0, int(hit.sum()) / n_pos))
    thr.append(-math.inf)
    return CurveReport("ROC", tuple(points), trapezoid(points), tuple(thr))


def tp_distribution(cm: ConfusionMatrix, d: Dataset) -> CurveReport:
    """Histogram of distances between consecutive correctly matched queries.

    Every best match is accepted (no threshold). Bins are one frame spacing
    wide, from 0 up to the largest gap.
    """
    if not d.is_trajectory:
        raise MetricError(f"dataset {d.name!r} is not a trajectory; TP distribution is undefined")
    if cm.shape[0] != d.num_queries:
        raise ValidationError(f"confusion matrix has {cm.shape[0]} rows, dataset has {d.num_queries} queries")
    tp_idx = np.flatnonzero(cm.correct(d.ground_truth))
    info = {"n_true_positives": int(tp_idx.size), "frame_spacing_m": d.frame_spacing_m}
    if tp_idx.size < 2:
        info["warning"] = "fewer than 2 true positives"
        return CurveReport("TPDistribution", (), None, None, info)
    frames = np.diff(tp_idx)
    counts = np.bincount(frames)
    points = tuple((k * d.frame_spacing_m, float(c)) for k, c in enumerate(counts.tolist()))
    info["max_gap_m"] = float(frames.max() * d.frame_spacing_m)
    return CurveReport("TPDistribution", points, None, None, info)


@dataclass(frozen=True)
class SpeedModel:
    k: float
    v: float
    z: int
    t_e: float
    t_m: float

    def __post_init__(self):
        for name in ("k", "v", "z", "t_e", "t_m"):
            value = getattr(self, name)
            if not (isinstance(value, numbers.Real) and math.isfinite(value) and value > 0):
                raise ValidationError(f"speed model parameter {name} must be positive, got {value!r}")


def retrieval_speed_model(sm: SpeedModel) -> dict:
    """Linear-search retrieval time and the platform speed it can sustain."""
    t_r = sm.t_e + sm.z * sm.t_m
    fps_vpr = 1.0 / t_r
    fps_req = sm.k * sm.v
    return {
        "t_r": t_r,
        "fps_vpr": fps_vpr,
        "fps_req": fps_req,
        "v_max": fps_vpr / sm.k,
        "feasible": fps_vpr >= fps_req,
    }

"""End-to-end evaluation runs, meta-analyses, and report emission."""

from __future__ import annotations

import datetime as _dt
import json
import logging
import platform
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .builtin import HogConfig, HogTechnique, PatchNormConfig, PatchNormTechnique
from .dataset import Dataset, interchange_query_reference, load_dataset, widen_ground_truth
from .engine import (
    MAX_TIMED_PAIRS,
    ConfusionMatrix,
    TimingProfile,
    build_confusion_matrix,
    export_confusion_matrix,
    measure_timings,
)
from .errors import ConfigurationError, MetricError, ValidationError, VprError
from .invariance import VariationTrace
from .metrics import (
    CurveReport,
    SpeedModel,
    pr_curve_auc,
    recall_rate_at_n,
    recall_rate_curve,
    retrieval_speed_model,
    roc_curve_auc,
    tp_distribution,
)
from .svg import Series, chart
from .technique import VprTechnique, load_precomputed_results

log = logging.getLogger(__name__)

METRICS = ("aucpr", "rr", "roc", "tpdist", "speed")
TIMING_NOTE = (
    "t_e and t_m are serial wall-clock means on the host that produced this report; "
    f"t_m is averaged over at most {MAX_TIMED_PAIRS} descriptor pairs"
)


def resolve_technique(spec: str | VprTechnique) -> VprTechnique:
    """``hog`` / ``patchnorm`` / ``precomputed:<path>`` (or a technique object, passed through)."""
    if isinstance(spec, VprTechnique):
        return spec
    if spec == "hog":
        return HogTechnique()
    if spec == "patchnorm":
        return PatchNormTechnique()
    if spec.startswith("precomputed:"):
        return load_precomputed_results(spec.split(":", 1)[1])
    raise ConfigurationError(f"unknown technique {spec!r}; use hog, patchnorm or precomputed:<path>")


def safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", name).strip("-") or "unnamed"


@dataclass
class RunConfig:
    datasets: Sequence[str | Path | Dataset]
    techniques: Sequence[str | VprTechnique]
    metrics: Sequence[str] = METRICS
    out_dir: str | Path | None = None
    rr_max: int = 20
    speed_k: Sequence[float] = (0.5,)
    speed_v: Sequence[float] = (1.0,)
    speed_z: Sequence[int] = ()
    seed: int = 0
    workers: int = 1
    timing_repetitions: int = 1
    export_scores: bool = False

    def validate(self) -> None:
        if not self.datasets:
            raise ConfigurationError("no datasets given")
        if not self.techniques:
            raise ConfigurationError("no techniques given")
        unknown = [m for m in self.metrics if m not in METRICS]
        if unknown:
            raise ConfigurationError(f"unknown metrics {unknown}; supported: {list(METRICS)}")
        for ds in self.datasets:
            if not isinstance(ds, Dataset) and not Path(ds).is_dir():
                raise ConfigurationError(f"dataset path does not exist: {ds}")
        for t in self.techniques:
            if isinstance(t, str) and t.startswith("precomputed:") and not Path(t.split(":", 1)[1]).exists():
                raise ConfigurationError(f"precomputed bundle does not exist: {t.split(':', 1)[1]}")
        if self.rr_max < 1:
            raise ConfigurationError(f"rr_max must be >= 1, got {self.rr_max}")
        if self.timing_repetitions < 1:
            raise ConfigurationError(f"timing_repetitions must be >= 1, got {self.timing_repetitions}")
        for label, values in (("K", self.speed_k), ("V", self.speed_v), ("Z", self.speed_z)):
            if any(not v > 0 for v in values):
                raise ConfigurationError(f"speed parameter {label} must be positive, got {list(values)}")


@dataclass
class CellResult:
    dataset: str
    technique: str
    status: str = "ok"
    error: str | None = None
    metrics: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)
    timing: TimingProfile | None = None
    curves: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    confusion: ConfusionMatrix | None = None

    @property
    def key(self) -> str:
        return f"{safe_name(self.technique)}_{safe_name(self.dataset)}"

    def to_json(self) -> dict:
        return {
            "dataset": self.dataset,
            "technique": self.technique,
            "status": self.status,
            "error": self.error,
            "metrics": self.metrics,
            "skipped": self.skipped,
            "timing": self.timing.to_json() if self.timing else None,
            "descriptor_bytes": self.timing.descriptor_bytes if self.timing else None,
        }


@dataclass
class EvaluationReport:
    cells: list[CellResult] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    traces: dict[str, VariationTrace] = field(default_factory=dict)
    tables: dict[str, list[dict]] = field(default_factory=dict)

    def cell(self, dataset: str, technique: str) -> CellResult:
        for c in self.cells:
            if c.dataset == dataset and c.technique == technique:
                return c
        raise KeyError((dataset, technique))

    @property
    def all_failed(self) -> bool:
        return bool(self.cells) and all(c.status == "failed" for c in self.cells)

    def to_json(self) -> dict:
        return {
            "meta": self.meta,
            "cells": [c.to_json() for c in self.cells],
            "invariance": {k: v.to_json() for k, v in self.traces.items()},
            "tables": self.tables,
        }


def report_meta(seed: int) -> dict:
    return {
        "vpreval_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "seed": seed,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "timing_note": TIMING_NOTE,
    }


def _speed_rows(cfg: RunConfig, timing: TimingProfile, z_default: int) -> list[dict]:
    rows = []
    for k in cfg.speed_k:
        for z in cfg.speed_z or (z_default,):
            for v in cfg.speed_v:
                result = retrieval_speed_model(SpeedModel(k=k, v=v, z=z, t_e=timing.t_e, t_m=timing.t_m))
                rows.append({"k": k, "v": v, "z": z, **result})
    return rows


def evaluate_cell(technique: VprTechnique, d: Dataset, cfg: RunConfig) -> CellResult:
    """Confusion matrix, requested metrics and timings for one (dataset, technique) pair."""
    cell = CellResult(dataset=d.name, technique=technique.name)
    cm = build_confusion_matrix(technique, d, workers=cfg.workers)
    cell.confusion = cm
    gt = d.ground_truth
    wanted = set(cfg.metrics)

    if "aucpr" in wanted:
        try:
            pr = pr_curve_auc(cm, gt)
            cell.curves["pr"] = pr
            cell.metrics["aucpr"] = pr.summary()
        except MetricError as exc:
            cell.skipped["aucpr"] = f"AUC-PR skipped: {exc}"
    if "rr" in wanted:
        try:
            rr = recall_rate_curve(cm, gt, cfg.rr_max)
            cell.curves["rr"] = rr
            cell.metrics["rr"] = {
                "rr_at_1": recall_rate_at_n(cm, gt, 1),
                "values": {str(int(n)): v for n, v in rr.points},
            }
        except MetricError as exc:
            cell.skipped["rr"] = f"RecallRate skipped: {exc}"
    if "roc" in wanted:
        if all(gt.positives()):
            cell.skipped["roc"] = "ROC skipped: no true negatives"
        else:
            try:
                roc = roc_curve_auc(cm, gt)
                cell.curves["roc"] = roc
                cell.metrics["roc"] = roc.summary()
            except MetricError as exc:
                cell.skipped["roc"] = f"ROC skipped: {exc}"
    if "tpdist" in wanted:
        if not d.is_trajectory:
            cell.skipped["tpdist"] = "TP distribution skipped: dataset is not a trajectory"
        else:
            tpd = tp_distribution(cm, d)
            cell.curves["tpdist"] = tpd
            cell.metrics["tpdist"] = {**tpd.summary(), "bins": [list(p) for p in tpd.points]}

    cell.timing = measure_timings(technique, d, repetitions=cfg.timing_repetitions, seed=cfg.seed)
    if "speed" in wanted:
        if cell.timing.t_e <= 0 or cell.timing.t_m <= 0:
            cell.skipped["speed"] = "speed model skipped: timings are zero"
        else:
            rows = _speed_rows(cfg, cell.timing, d.num_references)
            cell.tables["speed"] = rows
            cell.metrics["speed"] = rows
    return cell


def run_evaluation(cfg: RunConfig) -> EvaluationReport:
    """Evaluate every dataset x technique cell; a failing cell is recorded, not raised.

    Configuration problems (bad paths, unknown metrics, unreadable datasets or
    bundles) raise before any evaluation work starts.
    """
    cfg.validate()
    try:
        datasets = [ds if isinstance(ds, Dataset) else load_dataset(ds) for ds in cfg.datasets]
        techniques = [resolve_technique(t) for t in cfg.techniques]
    except VprError as exc:
        raise ConfigurationError(str(exc)) from exc

    report = EvaluationReport(meta=report_meta(cfg.seed))
    report.meta["metrics"] = list(cfg.metrics)
    for d in datasets:
        for tech in techniques:
            try:
                cell = evaluate_cell(tech, d, cfg)
            except Exception as exc:  # isolate one broken cell from the rest of the run
                log.warning("cell (%s, %s) failed: %s", d.name, tech.name, exc)
                cell = CellResult(dataset=d.name, technique=tech.name, status="failed", error=f"{type(exc).__name__}: {exc}")
            report.cells.append(cell)
    if cfg.out_dir is not None:
        emit_outputs(report, cfg.out_dir, export_scores=cfg.export_scores)
    return report


# -- meta-analyses ---------------------------------------------------------------


def sweep_technique(family: str, value: int) -> VprTechnique:
    if family == "hog":
        return HogTechnique(HogConfig(cell=int(value)), name=f"hog-cell{int(value)}")
    if family == "patchnorm":
        return PatchNormTechnique(PatchNormConfig(down_side=int(value)), name=f"patchnorm-side{int(value)}")
    raise ConfigurationError(f"unknown sweep family {family!r}; use hog or patchnorm")


def descriptor_size_sweep(
    d: Dataset,
    family: str,
    grid: Sequence[int],
    export_dir: str | Path | None = None,
    seed: int = 0,
) -> list[dict]:
    """One full evaluation per grid value: AUC-PR, descriptor size and matching time.

    For ``hog`` the grid is the cell size (blocks stay 2x2 cells, image side and
    bins fixed); for ``patchnorm`` it is the downsampled side length.
    A grid value that cannot be evaluated yields a failed row; the sweep continues.
    """
    if family not in ("hog", "patchnorm"):
        raise ConfigurationError(f"unknown sweep family {family!r}; use hog or patchnorm")
    rows = []
    for value in grid:
        row = {"param": value, "family": family}
        try:
            tech = sweep_technique(family, value)
            cm = build_confusion_matrix(tech, d)
            timing = measure_timings(tech, d, seed=seed)
            row.update(
                status="ok",
                auc_pr=pr_curve_auc(cm, d.ground_truth).auc,
                rr_at_1=recall_rate_at_n(cm, d.ground_truth, 1),
                descriptor_dims=timing.descriptor_bytes // 4,
                descriptor_kb=timing.descriptor_bytes / 1024.0,
                element_kind="float32",
                t_e=timing.t_e,
                t_m=timing.t_m,
            )
            if export_dir is not None:
                export_confusion_matrix(cm, Path(export_dir) / tech.name, tech.name, timing)
        except Exception as exc:
            row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        rows.append(row)
    return rows


def gt_manipulation_report(
    d: Dataset,
    techniques: Sequence[VprTechnique],
    radii: Sequence[int],
    interchange: bool = True,
    workers: int = 1,
) -> list[dict]:
    """AUC-PR and RR@1 under the original, interchanged and widened ground truth.

    Widening only relabels matches, so the original confusion matrix is reused;
    interchanging swaps the image sets and therefore recomputes it.
    """
    swapped = interchange_query_reference(d) if interchange else None
    rows = []
    for tech in techniques:
        cm = build_confusion_matrix(tech, d, workers=workers)
        base = pr_curve_auc(cm, d.ground_truth).auc
        rows.append(_gt_row(tech.name, "original", None, cm, d.ground_truth, base))
        if swapped is not None:
            try:
                cm_swapped = build_confusion_matrix(tech, swapped, workers=workers)
                rows.append(_gt_row(tech.name, "interchanged", None, cm_swapped, swapped.ground_truth, base))
            except Exception as exc:
                rows.append(_failed_row(tech.name, "interchanged", None, f"{type(exc).__name__}: {exc}"))
        for r in radii:
            try:
                widened = widen_ground_truth(d, r)
            except ValidationError as exc:
                rows.append(_failed_row(tech.name, "widened", r, str(exc), status="skipped"))
                continue
            rows.append(_gt_row(tech.name, "widened", r, cm, widened.ground_truth, base))
    return rows


def _gt_row(tech: str, variant: str, radius, cm, gt, base: float) -> dict:
    try:
        auc = pr_curve_auc(cm, gt).auc
        rr1 = recall_rate_at_n(cm, gt, 1)
    except MetricError as exc:
        return _failed_row(tech, variant, radius, str(exc), status="skipped")
    return {
        "technique": tech,
        "variant": variant,
        "radius": radius,
        "status": "ok",
        "auc_pr": auc,
        "rr_at_1": rr1,
        "delta_auc_pr": auc - base,
    }


def _failed_row(tech, variant, radius, reason, status="failed") -> dict:
    return {"technique": tech, "variant": variant, "radius": radius, "status": status, "reason": reason}


# -- output ----------------------------------------------------------------------

_PLOTS = {
    "pr": ("Precision-Recall", "Recall", "Precision", "line", (0.0, 1.0), (0.0, 1.0)),
    "roc": ("ROC", "False positive rate", "True positive rate", "line", (0.0, 1.0), (0.0, 1.0)),
    "rr": ("RecallRate@N", "N", "RecallRate", "line", None, (0.0, 1.0)),
    "tpdist": ("True-positive distribution", "Distance between true positives (m)", "Count", "bar", None, None),
}


def curve_svg(prefix: str, curve: CurveReport, label: str) -> str:
    title, xl, yl, kind, xr, yr = _PLOTS[prefix]
    if prefix in ("pr", "roc") and curve.auc is not None:
        label = f"{label} (AUC {curve.auc:.3f})"
    return chart([Series(label, curve.xs, curve.ys)], title, xl, yl, kind, xr, yr)


def speed_svg(rows: list[dict], label: str) -> str:
    """FPS achievable by the technique against FPS required as platform speed grows."""
    if not rows:
        return chart([], "Retrieval speed vs. platform speed", "Platform speed V (m/s)", "FPS")
    v_top = max(max(r["v"] for r in rows), max(r["v_max"] for r in rows)) * 1.2
    grid = [v_top * i / 50 for i in range(51)]
    series = []
    for k in sorted({r["k"] for r in rows}):
        series.append(Series(f"required, K={k:g}", grid, [k * v for v in grid]))
    for z in sorted({r["z"] for r in rows}):
        fps = next(r["fps_vpr"] for r in rows if r["z"] == z)
        series.append(Series(f"{label}, Z={z}", [0.0, v_top], [fps, fps]))
    return chart(series, "Retrieval speed vs. platform speed", "Platform speed V (m/s)", "FPS")


def table_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    columns: list[str] = []
    for r in rows:
        for k in r:
            if k not in columns:
                columns.append(k)
    lines = [",".join(columns)]
    for r in rows:
        cells = []
        for c in columns:
            v = r.get(c, "")
            cells.append(repr(v) if isinstance(v, float) else ("" if v is None else str(v)).replace(",", ";"))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def trace_svg(trace: VariationTrace, label: str) -> str:
    xs = list(trace.labels) or list(range(len(trace.same_scores)))
    series = [
        Series(f"same place ({label})", xs, trace.same_scores),
        Series(f"different place ({label})", xs, trace.diff_scores),
    ]
    return chart(series, f"Invariance: {trace.mode} (ABC {trace.abc:.3f})", "Variation", "Matching score", "line", None, (0.0, 1.0))


def emit_outputs(report: EvaluationReport, out_dir: str | Path, export_scores: bool = False) -> list[Path]:
    """Write ``report.json`` plus a CSV and an SVG for every curve, table and trace."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigurationError(f"output directory is not writable: {out} ({exc})") from exc

    written: list[Path] = []

    def put(name: str, text: str):
        path = out / name
        path.write_text(text)
        written.append(path)

    seen: dict[str, int] = {}
    for cell in report.cells:
        key = cell.key
        seen[key] = seen.get(key, 0) + 1
        if seen[key] > 1:
            key = f"{key}-{seen[key]}"
        for prefix, curve in cell.curves.items():
            put(f"{prefix}_{key}.csv", curve.to_csv())
            put(f"{prefix}_{key}.svg", curve_svg(prefix, curve, cell.technique))
        if "speed" in cell.tables:
            put(f"speed_{key}.csv", table_csv(cell.tables["speed"]))
            put(f"speed_{key}.svg", speed_svg(cell.tables["speed"], cell.technique))
        if export_scores and cell.confusion is not None:
            path = export_confusion_matrix(cell.confusion, out / f"scores_{key}", cell.technique, cell.timing)
            written.append(path)
    for name, trace in report.traces.items():
        stem = f"invariance_{safe_name(name)}"
        put(f"{stem}.csv", trace.to_csv())
        put(f"{stem}.svg", trace_svg(trace, name))
    for name, rows in report.tables.items():
        put(f"{safe_name(name)}.csv", table_csv(rows))
    put("report.json", json.dumps(report.to_json(), indent=1, sort_keys=True) + "\n")
    return written

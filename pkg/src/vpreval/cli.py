"""Command-line entry point: ``vpreval {evaluate,synth,sweep,gtstudy,invariance}``.

Exit codes: 0 on success (metric skips included), 1 on configuration errors,
2 when every evaluation cell failed at runtime. Errors are reported as a single
``error: <kind>: <reason>`` line on stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .dataset import load_dataset, save_dataset
from .errors import VprError
from .experiments import (
    METRICS,
    EvaluationReport,
    RunConfig,
    descriptor_size_sweep,
    emit_outputs,
    gt_manipulation_report,
    report_meta,
    resolve_technique,
    run_evaluation,
)
from .imaging import load_image
from .invariance import MODES, generate_variation_sequence, variation_trace
from .synth import SynthSpec, generate_synthetic_dataset

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def parse_speed(text: str) -> dict[str, list[float]]:
    """``K=0.5,V=1/2/5,Z=1000/10000``: several values per key separated by ``/``."""
    out: dict[str, list[float]] = {}
    for part in text.split(","):
        if not part.strip():
            continue
        key, sep, value = part.partition("=")
        key = key.strip().upper()
        if not sep or key not in ("K", "V", "Z"):
            raise argparse.ArgumentTypeError(f"bad speed term {part!r}; expected K=.., V=.., Z=..")
        try:
            out[key] = [float(v) for v in value.split("/")]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad speed value in {part!r}")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vpreval", description="Evaluate visual place recognition techniques.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ev = sub.add_parser("evaluate", help="evaluate techniques on datasets")
    ev.add_argument("--dataset", nargs="+", action="extend", required=True)
    ev.add_argument("--technique", nargs="+", action="extend", required=True,
                    help="hog | patchnorm | precomputed:<path>")
    ev.add_argument("--metrics", default=",".join(METRICS))
    ev.add_argument("--out", required=True)
    ev.add_argument("--rr-max", type=int, default=20)
    ev.add_argument("--speed", type=parse_speed, default={})
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--workers", type=int, default=1)
    ev.add_argument("--repetitions", type=int, default=1)
    ev.add_argument("--export-scores", action="store_true",
                    help="also write each confusion matrix as a precomputed bundle")

    sy = sub.add_parser("synth", help="write a synthetic dataset")
    sy.add_argument("--out", required=True)
    sy.add_argument("--places", type=int, default=20)
    sy.add_argument("--shift", type=int, default=0)
    sy.add_argument("--gain", type=float, default=1.0)
    sy.add_argument("--ramp", type=float, default=0.0, help="directional gain span")
    sy.add_argument("--size", type=int, default=128)
    sy.add_argument("--seed", type=int, default=0)

    sw = sub.add_parser("sweep", help="descriptor-size sweep")
    sw.add_argument("--dataset", required=True)
    sw.add_argument("--family", choices=("hog", "patchnorm"), default="hog")
    sw.add_argument("--cells", type=_int_list, help="HOG cell sizes")
    sw.add_argument("--grid", type=_int_list, help="grid values (patchnorm: downsampled side)")
    sw.add_argument("--out", required=True)
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--export-scores", action="store_true")

    gs = sub.add_parser("gtstudy", help="ground-truth manipulation study")
    gs.add_argument("--dataset", required=True)
    gs.add_argument("--technique", nargs="+", action="extend", default=None)
    gs.add_argument("--radii", type=_int_list, default=[0, 1, 2, 5])
    gs.add_argument("--interchange", action="store_true")
    gs.add_argument("--out", required=True)
    gs.add_argument("--workers", type=int, default=1)

    iv = sub.add_parser("invariance", help="invariance sweep on one image")
    iv.add_argument("--seed-image", required=True)
    iv.add_argument("--other-image")
    iv.add_argument("--mode", choices=MODES, required=True)
    iv.add_argument("--n", type=int, default=10)
    iv.add_argument("--magnitudes", type=_float_list)
    iv.add_argument("--technique", nargs="+", action="extend", default=None)
    iv.add_argument("--seed", type=int, default=1)
    iv.add_argument("--out", required=True)
    return p


def cmd_evaluate(args) -> int:
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    cfg = RunConfig(
        datasets=args.dataset,
        techniques=args.technique,
        metrics=metrics,
        out_dir=args.out,
        rr_max=args.rr_max,
        speed_k=tuple(args.speed.get("K", [0.5])),
        speed_v=tuple(args.speed.get("V", [1.0])),
        speed_z=tuple(int(z) for z in args.speed.get("Z", [])),
        seed=args.seed,
        workers=args.workers,
        timing_repetitions=args.repetitions,
        export_scores=args.export_scores,
    )
    report = run_evaluation(cfg)
    for cell in report.cells:
        if cell.status == "failed":
            print(f"{cell.dataset}\t{cell.technique}\tFAILED\t{cell.error}")
            continue
        aucpr = cell.metrics.get("aucpr", {}).get("auc")
        rr1 = cell.metrics.get("rr", {}).get("rr_at_1")
        print(f"{cell.dataset}\t{cell.technique}\tAUC-PR={_num(aucpr)}\tRR@1={_num(rr1)}")
    return EXIT_RUNTIME if report.all_failed else EXIT_OK


def _num(v) -> str:
    return "n/a" if v is None else f"{v:.4f}"


def cmd_synth(args) -> int:
    spec = SynthSpec(
        num_places=args.places,
        height=args.size,
        width=args.size,
        seed=args.seed,
        viewpoint_shift_px=args.shift,
        gain=args.gain,
        directional_gain_span=args.ramp,
    )
    d = generate_synthetic_dataset(spec)
    save_dataset(d, args.out)
    print(f"wrote {d.num_queries} queries and {d.num_references} references to {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    grid = args.cells if args.family == "hog" else args.grid
    grid = grid or args.grid or args.cells
    if not grid:
        grid = [8, 16, 32, 64, 128, 256] if args.family == "hog" else [16, 32, 64, 128]
    d = load_dataset(args.dataset)
    export = Path(args.out) / "scores" if args.export_scores else None
    rows = descriptor_size_sweep(d, args.family, grid, export_dir=export, seed=args.seed)
    report = EvaluationReport(meta=report_meta(args.seed), tables={f"sweep_{args.family}_{d.name}": rows})
    emit_outputs(report, args.out)
    for r in rows:
        if r["status"] == "ok":
            print(f"{r['param']}\tAUC-PR={r['auc_pr']:.4f}\tKB={r['descriptor_kb']:.1f}\tt_m={r['t_m']:.3g}s")
        else:
            print(f"{r['param']}\tFAILED\t{r['error']}")
    return EXIT_RUNTIME if all(r["status"] == "failed" for r in rows) else EXIT_OK


def cmd_gtstudy(args) -> int:
    d = load_dataset(args.dataset)
    techniques = [resolve_technique(t) for t in (args.technique or ["hog"])]
    rows = gt_manipulation_report(d, techniques, args.radii, interchange=args.interchange, workers=args.workers)
    report = EvaluationReport(meta=report_meta(0), tables={f"gtstudy_{d.name}": rows})
    emit_outputs(report, args.out)
    for r in rows:
        if r["status"] == "ok":
            radius = "" if r["radius"] is None else f" r={r['radius']}"
            print(f"{r['technique']}\t{r['variant']}{radius}\tAUC-PR={r['auc_pr']:.4f}\tdelta={r['delta_auc_pr']:+.4f}")
        else:
            print(f"{r['technique']}\t{r['variant']}\t{r['status'].upper()}\t{r['reason']}")
    return EXIT_RUNTIME if all(r["status"] == "failed" for r in rows) else EXIT_OK


def cmd_invariance(args) -> int:
    seed_image = load_image(args.seed_image)
    other = load_image(args.other_image) if args.other_image else None
    seq = generate_variation_sequence(seed_image, args.mode, args.n, args.magnitudes, other, args.seed)
    report = EvaluationReport(meta=report_meta(args.seed))
    for spec in args.technique or ["hog"]:
        tech = resolve_technique(spec)
        trace = variation_trace(seq, tech)
        report.traces[f"{tech.name}_{args.mode}"] = trace
        limit = "none" if trace.limit_index is None else str(trace.limit_index)
        print(f"{tech.name}\t{args.mode}\tABC={trace.abc:.4f}\tlimit_index={limit}")
    emit_outputs(report, args.out)
    return EXIT_OK


COMMANDS = {
    "evaluate": cmd_evaluate,
    "synth": cmd_synth,
    "sweep": cmd_sweep,
    "gtstudy": cmd_gtstudy,
    "invariance": cmd_invariance,
}


def _fail(kind: str, exc: BaseException, code: int) -> int:
    reason = " ".join(str(exc).split())
    print(f"error: {kind}: {reason}", file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (VprError, OSError, ValueError) as exc:
        return _fail("config", exc, EXIT_CONFIG)
    except Exception as exc:
        return _fail("runtime", exc, EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())

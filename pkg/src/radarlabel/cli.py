"""Command-line entry point: synth / run / eval / sweep / serve / export."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import pipeline, synth
from .ingest import ParseError, load_manifest, read_truth_csv
from .metrics import build_report, compute_metrics, confusion, report_csv
from .pipeline import ConfigError, RunConfig, load_run_config

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit 1 on usage errors, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _build_parser() -> _Parser:
    parser = _Parser(prog="radarlabel", description="Cross-sensor plausibility labeling for radar detections")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--spec", required=True, help="scene spec YAML file")
    p_synth.add_argument("--out", required=True, help="dataset output directory")
    p_synth.add_argument("--seq", default="seq_00", help="sequence id to write")
    p_synth.add_argument("--seed", type=int, default=None, help="override the scene seed")

    p_run = sub.add_parser("run", help="label sequences with the annotation pipeline")
    p_run.add_argument("--dataset", required=True, help="dataset root directory")
    p_run.add_argument("--config", default=None, help="run config YAML (defaults used when omitted)")
    p_run.add_argument("--seq", action="append", default=None, help="sequence id (repeatable; default all)")
    p_run.add_argument("--seed", type=int, default=None, help="override the run seed")

    p_eval = sub.add_parser("eval", help="evaluate predicted labels against ground truth")
    p_eval.add_argument("--dataset", required=True, help="dataset root directory")
    p_eval.add_argument("--labels", default=None, help="labels directory of one sequence (default: in-dataset labels)")
    p_eval.add_argument("--seq", action="append", default=None, help="sequence id (repeatable; default all)")
    p_eval.add_argument(
        "--truth", default="corrected", choices=("corrected", "generated", "merged"),
        help="truth source: human-corrected labels, generated truth.csv, or corrected-else-generated",
    )
    p_eval.add_argument("--out", default=None, help="write the metrics CSV here instead of stdout")

    p_sweep = sub.add_parser("sweep", help="metric grid over fusion parameters")
    p_sweep.add_argument("--dataset", required=True, help="dataset root directory")
    p_sweep.add_argument("--config", default=None, help="run config YAML")
    p_sweep.add_argument("--seq", action="append", default=None, help="sequence id (repeatable; default all)")
    p_sweep.add_argument(
        "--grid", required=True,
        help="grid as alpha=v1:v2:...,w0=v1:v2:... (values in [0,1], colon separated)",
    )
    p_sweep.add_argument(
        "--truth", default="generated", choices=("corrected", "generated", "merged"), help="truth source"
    )
    p_sweep.add_argument("--out", default=None, help="write the sweep CSV here instead of stdout")
    p_sweep.add_argument("--seed", type=int, default=None, help="override the run seed")

    p_serve = sub.add_parser("serve", help="serve the label review API and UI")
    p_serve.add_argument("--dataset", required=True, help="dataset root directory")
    p_serve.add_argument("--port", type=int, default=8077, help="localhost TCP port")
    p_serve.add_argument("--ui-dir", default=None, help="directory with the built review UI bundle")

    p_export = sub.add_parser("export", help="export reviewed labels as one merged CSV")
    p_export.add_argument("--dataset", required=True, help="dataset root directory")
    p_export.add_argument("--out", required=True, help="output CSV path")
    p_export.add_argument("--seq", action="append", default=None, help="sequence id (repeatable; default all)")
    return parser


def _load_config(path: str | None) -> RunConfig:
    return load_run_config(Path(path)) if path else RunConfig()


def _sequences(manifest, requested: list[str] | None) -> list[str]:
    if not requested:
        return list(manifest.sequences)
    unknown = [s for s in requested if s not in manifest.sequences]
    if unknown:
        raise FileNotFoundError(f"unknown sequences: {', '.join(unknown)}")
    return requested


def _truth_lookup(manifest, seq_id: str, source: str) -> dict[tuple[int, int], int]:
    """(frame_ts, detection_index) -> y for the chosen truth source."""
    truth: dict[tuple[int, int], int] = {}
    if source in ("generated", "merged"):
        path = manifest.sequence_dir(seq_id) / "truth.csv"
        if not path.exists():
            raise FileNotFoundError(f"{seq_id} has no generated truth ({path})")
        df = read_truth_csv(path)
        for row in df.itertuples(index=False):
            truth[(int(row.timestamp_ns), int(row.detection_index))] = int(row.y)
    if source in ("corrected", "merged"):
        for ts, records in pipeline.load_labels(manifest, seq_id).items():
            for r in records:
                if r.y_corrected is not None:
                    truth[(ts, r.detection_index)] = r.y_corrected
    return truth


def _eval_pairs(manifest, seq_id: str, source: str) -> tuple[np.ndarray, np.ndarray]:
    truth = _truth_lookup(manifest, seq_id, source)
    predicted, actual = [], []
    for ts, records in pipeline.load_labels(manifest, seq_id).items():
        for r in records:
            y = truth.get((ts, r.detection_index))
            if y is not None:
                predicted.append(r.y_hat)
                actual.append(y)
    return np.asarray(predicted, dtype=int), np.asarray(actual, dtype=int)


def _parse_grid(text: str) -> dict[str, list[float]]:
    grid: dict[str, list[float]] = {}
    for part in text.split(","):
        name, _, values = part.partition("=")
        name = name.strip()
        if name not in ("alpha", "w0") or not values:
            raise ValueError(f"bad grid entry {part!r}; expected alpha=...:... or w0=...:...")
        grid[name] = [float(v) for v in values.split(":")]
    if "alpha" not in grid or "w0" not in grid:
        raise ValueError("grid must name both alpha and w0")
    return grid


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _cmd_synth(args) -> int:
    spec = synth.scene_from_yaml(Path(args.spec))
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    synth.generate_dataset(spec, Path(args.out), sequence_id=args.seq)
    print(f"wrote {args.seq} to {args.out}")
    return 0


def _cmd_run(args) -> int:
    manifest = load_manifest(Path(args.dataset))
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    for seq_id in _sequences(manifest, args.seq):
        records = pipeline.label_sequence(manifest, seq_id, cfg)
        print(f"{seq_id}: {len(records)} detections labeled")
    return 0


def _cmd_eval(args) -> int:
    manifest = load_manifest(Path(args.dataset))
    if args.labels:
        seq_ids = [Path(args.labels).parent.name]
    else:
        seq_ids = _sequences(manifest, args.seq)
    per_seq = {}
    for seq_id in seq_ids:
        pred, actual = _eval_pairs(manifest, seq_id, args.truth)
        if len(pred) == 0:
            raise FileNotFoundError(f"{seq_id}: no evaluated detections (missing labels or truth)")
        per_seq[seq_id] = (pred, actual)
    _write_or_print(report_csv(build_report(per_seq)), args.out)
    return 0


def _cmd_sweep(args) -> int:
    manifest = load_manifest(Path(args.dataset))
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    grid = _parse_grid(args.grid)
    seq_ids = _sequences(manifest, args.seq)

    # Pool branch scores over sequences once; fuse per grid point.
    pooled: list[tuple[list, dict[int, np.ndarray]]] = []
    for seq_id in seq_ids:
        frames = pipeline.load_sequence(manifest, seq_id, cfg.sync_tolerance_ns)
        truth = _truth_lookup(manifest, seq_id, args.truth)
        truth_by_ts: dict[int, np.ndarray] = {}
        for f in frames:
            ts = f.radar.timestamp_ns
            ys = [truth.get((ts, i)) for i in range(len(f.radar))]
            if any(y is None for y in ys):
                raise FileNotFoundError(f"{seq_id}: frame {ts} lacks complete ground truth")
            truth_by_ts[ts] = np.asarray(ys, dtype=int)
        pooled.append((pipeline.compute_branch_scores(frames, manifest.rig, cfg), truth_by_ts))

    lines = ["alpha,w0,acc,precision,recall,f1_plausible,miou,iou_plausible,iou_artifact"]
    for alpha in grid["alpha"]:
        for w0 in grid["w0"]:
            grid_cfg = replace(cfg, fusion=pipeline.FusionConfig(alpha=alpha, w0=w0))
            predicted, actual = [], []
            for scores, truth_by_ts in pooled:
                for frame_records in pipeline.fuse_scores(scores, manifest.rig, grid_cfg):
                    for r in frame_records:
                        predicted.append(r.y_hat)
                        actual.append(truth_by_ts[r.frame_ts_ns][r.detection_index])
            v = compute_metrics(confusion(predicted, actual))

            def fmt(x):
                return "" if x is None else repr(round(x, 6))

            lines.append(
                ",".join(
                    [repr(alpha), repr(w0)]
                    + [fmt(x) for x in (v.accuracy, v.precision, v.recall, v.f1, v.mean_iou, v.iou_plausible, v.iou_artifact)]
                )
            )
    _write_or_print("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .review_api import create_app, default_ui_dir

    ui_dir = Path(args.ui_dir) if args.ui_dir else default_ui_dir()
    app = create_app(Path(args.dataset), ui_dir=ui_dir)
    uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="warning")
    return 0


def _cmd_export(args) -> int:
    from .ingest import read_radar_csv

    manifest = load_manifest(Path(args.dataset))
    lines = [
        "sequence,timestamp_ns,detection_index,range_m,azimuth_rad,elevation_rad,"
        "doppler_mps,power_db,sensor_id,w_fused,y"
    ]
    for seq_id in _sequences(manifest, args.seq):
        labels = pipeline.load_labels(manifest, seq_id)
        if not labels:
            raise FileNotFoundError(f"{seq_id}: no labels to export; run the pipeline first")
        for ts in sorted(labels):
            frame = read_radar_csv(manifest.sequence_dir(seq_id) / "radar" / f"{ts}.csv")
            for r in labels[ts]:
                d = frame.detections[r.detection_index]
                lines.append(
                    ",".join(
                        [
                            seq_id, str(ts), str(r.detection_index),
                            repr(d.position.range_m), repr(d.position.azimuth_rad), repr(d.position.elevation_rad),
                            repr(d.doppler_mps), repr(d.power_db), d.sensor_id,
                            repr(r.w_fused), str(r.effective_label()),
                        ]
                    )
                )
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"exported {len(lines) - 1} detections to {args.out}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "run": _cmd_run,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "serve": _cmd_serve,
    "export": _cmd_export,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR
    try:
        return _COMMANDS[args.command](args)
    except (ParseError, ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"radarlabel {args.command}: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    raise SystemExit(main())

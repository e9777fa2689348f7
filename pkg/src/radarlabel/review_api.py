"""Local HTTP service for label review: frames with diagnostics in, corrections out."""
from __future__ import annotations

import os
import tempfile
import threading
from dataclasses import replace
from pathlib import Path

import numpy as np
from fastapi import FastAPI
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .core import spherical_to_cartesian_array
from .ingest import (
    DEFAULT_SYNC_TOLERANCE_NS,
    load_manifest,
    read_flags_csv,
    read_labels_csv,
    read_lidar_csv,
    read_radar_csv,
    write_labels_csv,
)

LIDAR_POINT_CAP = 20_000

_FALLBACK_PAGE = """<!doctype html>
<html><head><title>radarlabel review</title></head>
<body><h1>radarlabel review API</h1>
<p>No UI bundle found. Build the frontend (see README) or use the JSON API:
<code>/api/sequences</code>, <code>/api/frame/{seq}/{ts}</code>.</p></body></html>
"""


def default_ui_dir() -> Path | None:
    candidate = Path.cwd() / "frontend" / "dist"
    return candidate if candidate.is_dir() else None


class Correction(BaseModel):
    detection_index: int
    y: int


def _timestamps(directory: Path, suffix: str) -> list[int]:
    if not directory.is_dir():
        return []
    return sorted(int(p.stem) for p in directory.iterdir() if p.suffix == suffix and p.stem.isdigit())


def create_app(
    dataset_root: Path,
    ui_dir: Path | None = None,
    sync_tolerance_ns: int = DEFAULT_SYNC_TOLERANCE_NS,
) -> FastAPI:
    manifest = load_manifest(Path(dataset_root))
    app = FastAPI(title="radarlabel review")
    write_locks: dict[tuple[str, int], threading.Lock] = {}
    locks_guard = threading.Lock()

    def frame_lock(seq_id: str, ts: int) -> threading.Lock:
        with locks_guard:
            return write_locks.setdefault((seq_id, ts), threading.Lock())

    def seq_dir(seq_id: str) -> Path | None:
        return manifest.sequence_dir(seq_id) if seq_id in manifest.sequences else None

    @app.get("/api/sequences")
    def sequences() -> list[dict]:
        out = []
        for seq_id in manifest.sequences:
            seq = manifest.sequence_dir(seq_id)
            frames = _timestamps(seq / "radar", ".csv")
            reviewed = 0
            for ts in frames:
                labels_path = seq / "labels" / f"{ts}.csv"
                if labels_path.exists() and any(
                    r.y_corrected is not None for r in read_labels_csv(labels_path)
                ):
                    reviewed += 1
            out.append({"id": seq_id, "frame_count": len(frames), "reviewed_count": reviewed})
        return out

    @app.get("/api/frames/{seq_id}")
    def frames(seq_id: str):
        seq = seq_dir(seq_id)
        if seq is None:
            return JSONResponse({"error": "unknown_sequence", "sequence": seq_id}, status_code=404)
        out = []
        for ts in _timestamps(seq / "radar", ".csv"):
            labels_path = seq / "labels" / f"{ts}.csv"
            reviewed = labels_path.exists() and any(
                r.y_corrected is not None for r in read_labels_csv(labels_path)
            )
            out.append({"frame_ts_ns": ts, "reviewed": reviewed})
        return out

    @app.get("/api/frame/{seq_id}/{ts}")
    def frame(seq_id: str, ts: int):
        seq = seq_dir(seq_id)
        if seq is None:
            return JSONResponse({"error": "unknown_sequence", "sequence": seq_id}, status_code=404)
        radar_path = seq / "radar" / f"{ts}.csv"
        if not radar_path.exists():
            return JSONResponse(
                {"error": "unknown_frame", "sequence": seq_id, "frame_ts_ns": ts}, status_code=404
            )
        radar = read_radar_csv(radar_path)
        xyz = np.zeros((0, 3))
        if len(radar):
            xyz = np.concatenate(
                [
                    spherical_to_cartesian_array(
                        radar.spherical[[i]], manifest.rig.radar_mounts[radar.sensor_ids[i]]
                    )
                    for i in range(len(radar))
                ]
            )
        labels_path = seq / "labels" / f"{ts}.csv"
        records = {r.detection_index: r for r in read_labels_csv(labels_path)} if labels_path.exists() else {}

        detections = []
        for i in range(len(radar)):
            r = records.get(i)
            detections.append(
                {
                    "index": i,
                    "x_m": float(xyz[i, 0]),
                    "y_m": float(xyz[i, 1]),
                    "z_m": float(xyz[i, 2]),
                    "w_lm": None if r is None else r.w_lm,
                    "w_cm": None if r is None else r.w_cm,
                    "w_opt": None if r is None else r.w_opt,
                    "w_tr": None if r is None else r.w_tr,
                    "w_fused": None if r is None else r.w_fused,
                    "y_hat": None if r is None else r.y_hat,
                    "y_corrected": None if r is None else r.y_corrected,
                }
            )

        lidar_pts: list[list[float]] = []
        lidar_ts_all = _timestamps(seq / "lidar", ".csv")
        if lidar_ts_all:
            nearest = min(lidar_ts_all, key=lambda t: (abs(t - ts), t))
            if abs(nearest - ts) <= sync_tolerance_ns:
                lidar = read_lidar_csv(seq / "lidar" / f"{nearest}.csv")
                if len(lidar):
                    pts = spherical_to_cartesian_array(lidar.spherical, manifest.rig.lidar_mount)
                    if len(pts) > LIDAR_POINT_CAP:
                        stride = -(-len(pts) // LIDAR_POINT_CAP)
                        pts = pts[::stride]
                    lidar_pts = [[float(x), float(y), float(z)] for x, y, z in pts]

        flags = [flag for fts, flag in read_flags_csv(seq / "labels" / "flags.csv") if fts == ts]
        return {
            "sequence": seq_id,
            "frame_ts_ns": ts,
            "labeled": bool(records),
            "radar": detections,
            "lidar": lidar_pts,
            "flags": flags,
        }

    @app.post("/api/frame/{seq_id}/{ts}/labels")
    def post_labels(seq_id: str, ts: int, corrections: list[Correction]):
        seq = seq_dir(seq_id)
        if seq is None:
            return JSONResponse({"error": "unknown_sequence", "sequence": seq_id}, status_code=404)
        radar_path = seq / "radar" / f"{ts}.csv"
        if not radar_path.exists():
            return JSONResponse(
                {"error": "unknown_frame", "sequence": seq_id, "frame_ts_ns": ts}, status_code=404
            )
        labels_path = seq / "labels" / f"{ts}.csv"
        if not labels_path.exists():
            return JSONResponse(
                {"error": "frame_not_labeled", "detail": "run the pipeline before reviewing"},
                status_code=409,
            )
        with frame_lock(seq_id, ts):
            records = read_labels_csv(labels_path)
            known = {r.detection_index for r in records}
            bad = sorted(
                {c.detection_index for c in corrections if c.detection_index not in known}
            )
            bad_values = sorted({c.y for c in corrections if c.y not in (0, 1)})
            if bad or bad_values:
                # All-or-nothing: nothing is applied when any item is invalid.
                body = {"error": "invalid_corrections"}
                if bad:
                    body["invalid_indices"] = bad
                if bad_values:
                    body["invalid_labels"] = bad_values
                return JSONResponse(body, status_code=422)
            by_index = {r.detection_index: r for r in records}
            for c in corrections:
                by_index[c.detection_index] = replace(by_index[c.detection_index], y_corrected=c.y)
            updated = [by_index[i] for i in sorted(by_index)]
            fd, tmp = tempfile.mkstemp(dir=labels_path.parent, suffix=".tmp")
            os.close(fd)
            try:
                write_labels_csv(Path(tmp), updated)
                os.replace(tmp, labels_path)
            finally:
                if os.path.exists(tmp):
                    os.unlink(tmp)
        return {"applied": len(corrections), "frame_ts_ns": ts}

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    else:

        @app.get("/", response_class=HTMLResponse)
        def index() -> str:
            return _FALLBACK_PAGE

    return app

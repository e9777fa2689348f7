"""Dataset loading, file formats, and time synchronization.

Directory layout:
    root/calibration.yaml
    root/<seq>/radar/<timestamp_ns>.csv
    root/<seq>/lidar/<timestamp_ns>.csv
    root/<seq>/depth/<camera_id>/<timestamp_ns>.pgm (+ .meta sidecar)
    root/<seq>/odom.csv
    root/<seq>/labels/<timestamp_ns>.csv        (pipeline output)
    root/<seq>/truth.csv                        (synthetic ground truth, if generated)
"""
from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from .blindspot import BlindspotCone
from .camera_match import CameraCalibration, DepthImage
from .core import (
    LidarFrame,
    MountingPose,
    PlausibilityRecord,
    RadarDetection,
    RadarFrame,
    SensorUncertainty,
    SphericalPoint,
)
from .fusion import DEFAULT_PROFILE, AzimuthReliabilityProfile

RADAR_HEADER = "range_m,azimuth_rad,elevation_rad,doppler_mps,power_db,sensor_id"
LIDAR_HEADER = "range_m,azimuth_rad,elevation_rad"
ODOM_HEADER = "timestamp_ns,speed_mps,yaw_rate_radps"
LABELS_HEADER = "detection_index,w_lm,w_cm,w_opt,w_tr,w_fused,y_hat,y_corrected"
TRUTH_HEADER = "timestamp_ns,detection_index,y,cluster,origin"

DEFAULT_SYNC_TOLERANCE_NS = 50_000_000  # 50 ms


class ParseError(Exception):
    def __init__(self, path: Path | str, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = str(path)
        self.line = line
        self.reason = reason


def _locate_bad_line(path: Path, n_columns: int, numeric_cols: list[int]) -> tuple[int, str]:
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if line_no == 1:
                continue
            parts = line.rstrip("\n").split(",")
            if len(parts) != n_columns:
                return line_no, f"expected {n_columns} fields, found {len(parts)}"
            for col in numeric_cols:
                try:
                    float(parts[col])
                except ValueError:
                    return line_no, f"field {col + 1} is not a number: {parts[col]!r}"
    return 1, "malformed file"


def _read_csv(path: Path, header: str, dtypes: dict) -> pd.DataFrame:
    columns = header.split(",")
    try:
        df = pd.read_csv(path, dtype=dtypes, float_precision="round_trip", keep_default_na=True)
    except Exception:
        numeric = [i for i, c in enumerate(columns) if dtypes.get(c) is float]
        line, reason = _locate_bad_line(path, len(columns), numeric)
        raise ParseError(path, line, reason) from None
    if list(df.columns) != columns:
        raise ParseError(path, 1, f"expected header {header!r}, found {','.join(df.columns)!r}")
    for i, col in enumerate(columns):
        if dtypes.get(col) is float and df[col].isna().any():
            row = int(df[col].isna().idxmax())
            raise ParseError(path, row + 2, f"field {i + 1} is not a number")
    return df


def _fmt(value: float) -> str:
    return repr(float(value))


# ---------------------------------------------------------------------------
# Radar / LiDAR / odometry files


def read_radar_csv(path: Path) -> RadarFrame:
    ts = int(Path(path).stem)
    dtypes = {c: float for c in RADAR_HEADER.split(",")[:-1]}
    dtypes["sensor_id"] = str
    df = _read_csv(Path(path), RADAR_HEADER, dtypes)
    detections = tuple(
        RadarDetection(
            position=SphericalPoint(row.range_m, row.azimuth_rad, row.elevation_rad),
            doppler_mps=row.doppler_mps,
            power_db=row.power_db,
            sensor_id=row.sensor_id,
        )
        for row in df.itertuples(index=False)
    )
    return RadarFrame(timestamp_ns=ts, detections=detections)


def write_radar_csv(path: Path, frame: RadarFrame) -> None:
    lines = [RADAR_HEADER]
    for d in frame.detections:
        p = d.position
        lines.append(
            ",".join(
                [_fmt(p.range_m), _fmt(p.azimuth_rad), _fmt(p.elevation_rad), _fmt(d.doppler_mps), _fmt(d.power_db), d.sensor_id]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_lidar_csv(path: Path) -> LidarFrame:
    ts = int(Path(path).stem)
    df = _read_csv(Path(path), LIDAR_HEADER, {c: float for c in LIDAR_HEADER.split(",")})
    points = tuple(
        SphericalPoint(row.range_m, row.azimuth_rad, row.elevation_rad) for row in df.itertuples(index=False)
    )
    return LidarFrame(timestamp_ns=ts, points=points)


def write_lidar_csv(path: Path, frame: LidarFrame) -> None:
    lines = [LIDAR_HEADER]
    for p in frame.points:
        lines.append(",".join([_fmt(p.range_m), _fmt(p.azimuth_rad), _fmt(p.elevation_rad)]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class OdometrySample:
    timestamp_ns: int
    speed_mps: float
    yaw_rate_radps: float


def read_odometry_csv(path: Path) -> list[OdometrySample]:
    df = _read_csv(Path(path), ODOM_HEADER, {"timestamp_ns": "int64", "speed_mps": float, "yaw_rate_radps": float})
    samples = [
        OdometrySample(int(r.timestamp_ns), r.speed_mps, r.yaw_rate_radps) for r in df.itertuples(index=False)
    ]
    for a, b in zip(samples, samples[1:]):
        if b.timestamp_ns <= a.timestamp_ns:
            raise ParseError(path, 1, "odometry timestamps must be strictly increasing")
    return samples


def write_odometry_csv(path: Path, samples: list[OdometrySample]) -> None:
    lines = [ODOM_HEADER]
    for s in samples:
        lines.append(",".join([str(s.timestamp_ns), _fmt(s.speed_mps), _fmt(s.yaw_rate_radps)]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def interpolate_odometry(samples: list[OdometrySample], t: int) -> tuple[OdometrySample, bool]:
    """Linear interpolation at time t; outside the sampled range the nearest
    endpoint is returned and flagged as extrapolated."""
    if not samples:
        raise ValueError("no odometry samples to interpolate")
    if t <= samples[0].timestamp_ns:
        return samples[0], t < samples[0].timestamp_ns
    if t >= samples[-1].timestamp_ns:
        return samples[-1], t > samples[-1].timestamp_ns
    times = [s.timestamp_ns for s in samples]
    hi = int(np.searchsorted(times, t, side="left"))
    lo = hi - 1
    if times[hi] == t:
        return samples[hi], False
    a, b = samples[lo], samples[hi]
    frac = (t - a.timestamp_ns) / (b.timestamp_ns - a.timestamp_ns)
    return (
        OdometrySample(
            timestamp_ns=t,
            speed_mps=a.speed_mps + frac * (b.speed_mps - a.speed_mps),
            yaw_rate_radps=a.yaw_rate_radps + frac * (b.yaw_rate_radps - a.yaw_rate_radps),
        ),
        False,
    )


# ---------------------------------------------------------------------------
# Depth images (binary PGM, 16-bit big-endian, optional .meta sidecar)


def write_pgm_depth(path: Path, relative: np.ndarray, camera_id: str) -> None:
    rel = np.asarray(relative, dtype=float)
    scale_hint = float(rel.max())
    samples = np.clip(np.rint(rel / scale_hint * 65535.0), 1, 65535).astype(">u2")
    h, w = rel.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(samples.tobytes())
    Path(path).with_suffix(".meta").write_text(f"scale_hint={_fmt(scale_hint)}\n", encoding="utf-8")


def read_pgm_depth(path: Path, camera_id: str) -> DepthImage:
    raw = Path(path).read_bytes()

    # Tokenize the header only; exactly one whitespace byte separates the
    # maxval token from the binary payload.
    pos = 0
    tokens = []
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError(path, 1, "not a binary 16-bit PGM")
        tokens.append(raw[start:pos])
    pos += 1  # the single whitespace after maxval
    if tokens[0] != b"P5":
        raise ParseError(path, 1, "not a binary 16-bit PGM")
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError:
        raise ParseError(path, 1, "bad PGM header") from None
    if maxval != 65535:
        raise ParseError(path, 1, f"expected 16-bit samples, maxval={maxval}")
    data = raw[pos : pos + w * h * 2]
    if len(data) != w * h * 2:
        raise ParseError(path, 1, "truncated PGM payload")
    samples = np.frombuffer(data, dtype=">u2").astype(float).reshape(h, w)
    scale_hint = 1.0
    meta = Path(path).with_suffix(".meta")
    if meta.exists():
        for line_no, line in enumerate(meta.read_text(encoding="utf-8").splitlines(), start=1):
            key, _, value = line.partition("=")
            if key.strip() == "scale_hint":
                try:
                    scale_hint = float(value)
                except ValueError:
                    raise ParseError(meta, line_no, f"bad scale_hint {value!r}") from None
    return DepthImage(width=w, height=h, values=samples / 65535.0 * scale_hint, camera_id=camera_id)


class FileDepthProvider:
    """Depth source reading precomputed PGM maps from a sequence directory."""

    def __init__(self, sequence_dir: Path):
        self.root = Path(sequence_dir) / "depth"

    def depth_for(self, camera_id: str, timestamp_ns: int) -> DepthImage | None:
        path = self.root / camera_id / f"{timestamp_ns}.pgm"
        if not path.exists():
            return None
        return read_pgm_depth(path, camera_id)


# ---------------------------------------------------------------------------
# Labels, flags, ground truth


def write_labels_csv(path: Path, records: list[PlausibilityRecord]) -> None:
    lines = [LABELS_HEADER]
    for r in sorted(records, key=lambda r: r.detection_index):
        fields = [str(r.detection_index)]
        for w in (r.w_lm, r.w_cm, r.w_opt, r.w_tr, r.w_fused):
            fields.append("" if w is None else _fmt(w))
        fields.append(str(r.y_hat))
        fields.append("" if r.y_corrected is None else str(r.y_corrected))
        lines.append(",".join(fields))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_labels_csv(path: Path, frame_ts_ns: int | None = None) -> list[PlausibilityRecord]:
    ts = int(Path(path).stem) if frame_ts_ns is None else frame_ts_ns
    columns = LABELS_HEADER.split(",")
    try:
        df = pd.read_csv(path, float_precision="round_trip")
    except Exception:
        line, reason = _locate_bad_line(Path(path), len(columns), [])
        raise ParseError(path, line, reason) from None
    if list(df.columns) != columns:
        raise ParseError(path, 1, f"expected header {LABELS_HEADER!r}")

    def opt(value) -> float | None:
        return None if pd.isna(value) else float(value)

    records = []
    for row in df.itertuples(index=False):
        records.append(
            PlausibilityRecord(
                frame_ts_ns=ts,
                detection_index=int(row.detection_index),
                w_lm=opt(row.w_lm),
                w_cm=opt(row.w_cm),
                w_opt=opt(row.w_opt),
                w_tr=opt(row.w_tr),
                w_fused=float(row.w_fused),
                y_hat=int(row.y_hat),
                y_corrected=None if pd.isna(row.y_corrected) else int(row.y_corrected),
            )
        )
    return records


def write_flags_csv(path: Path, flags: list[tuple[int, str]]) -> None:
    lines = ["timestamp_ns,flag"] + [f"{ts},{flag}" for ts, flag in flags]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_flags_csv(path: Path) -> list[tuple[int, str]]:
    if not Path(path).exists():
        return []
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines()[1:]:
        ts, _, flag = line.partition(",")
        out.append((int(ts), flag))
    return out


def write_truth_csv(path: Path, rows: list[tuple[int, int, int, str, str]]) -> None:
    lines = [TRUTH_HEADER] + [f"{ts},{idx},{y},{cluster},{origin}" for ts, idx, y, cluster, origin in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_truth_csv(path: Path) -> pd.DataFrame:
    dtypes = {"timestamp_ns": "int64", "detection_index": "int64", "y": "int64", "cluster": str, "origin": str}
    return _read_csv(Path(path), TRUTH_HEADER, dtypes)


# ---------------------------------------------------------------------------
# Sensor rig


@dataclass(frozen=True)
class SensorRig:
    radar_mounts: dict[str, MountingPose]
    lidar_mount: MountingPose
    uncertainty: SensorUncertainty
    blindspot: BlindspotCone
    cameras: dict[str, CameraCalibration]
    azimuth_profile: AzimuthReliabilityProfile = DEFAULT_PROFILE


def _mount_from(d: dict) -> MountingPose:
    return MountingPose(
        x_m=float(d["x_m"]), y_m=float(d["y_m"]), z_m=float(d["z_m"]), yaw_rad=float(d.get("yaw_rad", 0.0))
    )


def _mount_to(m: MountingPose) -> dict:
    return {"x_m": m.x_m, "y_m": m.y_m, "z_m": m.z_m, "yaw_rad": m.yaw_rad}


def load_rig(path: Path) -> SensorRig:
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(path, (mark.line + 1) if mark else 1, "invalid YAML") from None
    try:
        cameras = {}
        for cam_id, cam in (doc.get("cameras") or {}).items():
            cameras[cam_id] = CameraCalibration(
                intrinsics=np.asarray(cam["intrinsics"], dtype=float).reshape(3, 3),
                extrinsics=np.asarray(cam["extrinsics"], dtype=float).reshape(4, 4),
                depth_sigma_rel=float(cam["depth_sigma_rel"]),
                width=int(cam["width_px"]),
                height=int(cam["height_px"]),
            )
        profile = DEFAULT_PROFILE
        if "azimuth_reliability" in doc:
            profile = AzimuthReliabilityProfile(tuple((float(a), float(g)) for a, g in doc["azimuth_reliability"]))
        bs = doc["blindspot"]
        return SensorRig(
            radar_mounts={k: _mount_from(v) for k, v in doc["radar_sensors"].items()},
            lidar_mount=_mount_from(doc["lidar_mount"]),
            uncertainty=SensorUncertainty(**{k: float(v) for k, v in doc["uncertainty"].items()}),
            blindspot=BlindspotCone(
                x_l_m=float(bs["x_l_m"]), z_l_m=float(bs["z_l_m"]), alpha_rad=float(bs["alpha_rad"])
            ),
            cameras=cameras,
            azimuth_profile=profile,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(path, 1, f"bad calibration: {exc}") from None


def save_rig(path: Path, rig: SensorRig) -> None:
    doc = {
        "radar_sensors": {k: _mount_to(v) for k, v in rig.radar_mounts.items()},
        "lidar_mount": _mount_to(rig.lidar_mount),
        "uncertainty": {
            "sigma_r_radar_m": rig.uncertainty.sigma_r_radar_m,
            "sigma_az_radar_rad": rig.uncertainty.sigma_az_radar_rad,
            "sigma_el_radar_rad": rig.uncertainty.sigma_el_radar_rad,
            "sigma_r_lidar_m": rig.uncertainty.sigma_r_lidar_m,
        },
        "blindspot": {
            "x_l_m": rig.blindspot.x_l_m,
            "z_l_m": rig.blindspot.z_l_m,
            "alpha_rad": rig.blindspot.alpha_rad,
        },
        "cameras": {
            cam_id: {
                "intrinsics": [float(v) for v in cam.intrinsics.ravel()],
                "extrinsics": [float(v) for v in cam.extrinsics.ravel()],
                "depth_sigma_rel": cam.depth_sigma_rel,
                "width_px": cam.width,
                "height_px": cam.height,
            }
            for cam_id, cam in rig.cameras.items()
        },
        "azimuth_reliability": [[a, g] for a, g in rig.azimuth_profile.breakpoints],
    }
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=True), encoding="utf-8")


# ---------------------------------------------------------------------------
# Manifest and sequence assembly


@dataclass(frozen=True)
class DatasetManifest:
    root_path: Path
    sequences: tuple[str, ...]
    rig: SensorRig

    def sequence_dir(self, seq_id: str) -> Path:
        return self.root_path / seq_id


def load_manifest(root: Path) -> DatasetManifest:
    root = Path(root)
    calib = root / "calibration.yaml"
    if not calib.exists():
        raise FileNotFoundError(f"missing calibration file: {calib}")
    rig = load_rig(calib)
    sequences = []
    for entry in sorted(root.iterdir()):
        if not entry.is_dir():
            continue
        if not (entry / "radar").is_dir():
            continue
        for required in ("lidar", "odom.csv"):
            if not (entry / required).exists():
                raise FileNotFoundError(f"sequence {entry.name} is missing {required}")
        sequences.append(entry.name)
    return DatasetManifest(root_path=root, sequences=tuple(sequences), rig=rig)


@dataclass(frozen=True)
class SyncedFrame:
    radar: RadarFrame
    lidar: LidarFrame | None
    depth_images: tuple[tuple[str, DepthImage], ...]
    odometry: OdometrySample
    odometry_extrapolated: bool = False


def _timestamps_in(directory: Path, suffix: str) -> list[int]:
    if not directory.is_dir():
        return []
    out = []
    for p in directory.iterdir():
        if p.suffix == suffix and p.stem.isdigit():
            out.append(int(p.stem))
    return sorted(out)


def _nearest(sorted_ts: list[int], t: int) -> int | None:
    """Timestamp from sorted_ts minimizing |dt|; earlier one wins a tie."""
    if not sorted_ts:
        return None
    pos = int(np.searchsorted(sorted_ts, t))
    best = None
    for cand in (pos - 1, pos):
        if 0 <= cand < len(sorted_ts):
            if best is None or abs(sorted_ts[cand] - t) < abs(best - t):
                best = sorted_ts[cand]
    return best


def load_sequence(
    manifest: DatasetManifest,
    seq_id: str,
    sync_tolerance_ns: int = DEFAULT_SYNC_TOLERANCE_NS,
) -> list[SyncedFrame]:
    """Assemble per-timestep multi-sensor frames ordered by radar timestamp.

    Partners outside the sync tolerance are marked absent (None / missing
    camera entry), never force-paired.
    """
    seq = manifest.sequence_dir(seq_id)
    if not seq.is_dir():
        raise FileNotFoundError(f"unknown sequence: {seq_id}")
    radar_ts = _timestamps_in(seq / "radar", ".csv")
    lidar_ts = _timestamps_in(seq / "lidar", ".csv")
    camera_ts = {
        cam.name: _timestamps_in(cam, ".pgm") for cam in sorted((seq / "depth").iterdir()) if cam.is_dir()
    } if (seq / "depth").is_dir() else {}
    odometry = read_odometry_csv(seq / "odom.csv")

    frames = []
    for ts in radar_ts:
        radar = read_radar_csv(seq / "radar" / f"{ts}.csv")
        lidar = None
        lt = _nearest(lidar_ts, ts)
        if lt is not None and abs(lt - ts) <= sync_tolerance_ns:
            lidar = read_lidar_csv(seq / "lidar" / f"{lt}.csv")
        depths = []
        for cam_id, cam_ts in camera_ts.items():
            ct = _nearest(cam_ts, ts)
            if ct is not None and abs(ct - ts) <= sync_tolerance_ns:
                depths.append((cam_id, read_pgm_depth(seq / "depth" / cam_id / f"{ct}.pgm", cam_id)))
        odo, extrapolated = interpolate_odometry(odometry, ts)
        frames.append(
            SyncedFrame(
                radar=radar,
                lidar=lidar,
                depth_images=tuple(depths),
                odometry=odo,
                odometry_extrapolated=extrapolated,
            )
        )
    return frames

"""Per-frame orchestration: ground filter, both matchers, tracking, fusion, I/O."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .blindspot import combine_optical
from .camera_match import (
    CameraMatchConfig,
    back_project,
    calibrate_depth_scale,
    camera_match,
    consistency_check,
    project_points,
)
from .core import PlausibilityRecord, RadarFrame
from .fusion import AzimuthReliabilityProfile, FusionConfig, fuse_and_label
from .geometry import OpticalPoints, build_knn_index, fit_ground_plane, filter_ground_radar
from .ingest import (
    DEFAULT_SYNC_TOLERANCE_NS,
    DatasetManifest,
    SensorRig,
    SyncedFrame,
    load_sequence,
    read_labels_csv,
    write_flags_csv,
    write_labels_csv,
)
from .lidar_match import LidarMatchConfig, lidar_pointset, radar_pointset, score_matches
from .metrics import MetricValues, compute_metrics, confusion
from .tracking import TrackingConfig, TrackingWindow, build_window, integrate_pose, tracking_score
from .core import VehicleState


@dataclass(frozen=True)
class GroundConfig:
    ransac_iterations: int = 200
    inlier_threshold_m: float = 0.1
    margin_m: float = 0.3
    exclude_lidar_inliers: bool = True
    # Ground candidates: LiDAR points below this vehicle-frame height. Keeps the
    # fit from latching onto large vertical structures (facades).
    candidate_max_height_m: float = 0.5


@dataclass(frozen=True)
class CameraConfig:
    k: int = 3
    beta: float = 0.25
    epsilon: float = 1e-3
    grid_step_px: int = 16
    k_anchors: int = 4
    stride_px: int = 4
    holdout_every: int = 5
    inconsistency_threshold: float = 0.5
    # Optical points beyond radar coverage carry no matching evidence.
    max_depth_m: float = 40.0


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    sync_tolerance_ns: int = DEFAULT_SYNC_TOLERANCE_NS
    ground: GroundConfig = GroundConfig()
    lidar: LidarMatchConfig = LidarMatchConfig()
    camera: CameraConfig = CameraConfig()
    tracking: TrackingConfig = TrackingConfig()
    fusion: FusionConfig = FusionConfig()
    profile: AzimuthReliabilityProfile | None = None  # None: use the rig's profile


_SECTION_KEYS = {
    "seed": None,
    "sync_tolerance_ns": None,
    "ground": {
        "ransac_iterations", "inlier_threshold_m", "margin_m", "exclude_lidar_inliers",
        "candidate_max_height_m",
    },
    "lidar_match": {"k", "beta", "epsilon"},
    "camera_match": {
        "k", "beta", "epsilon", "grid_step_px", "k_anchors", "stride_px", "holdout_every",
        "inconsistency_threshold", "max_depth_m",
    },
    "tracking": {"n_b", "beta", "rho", "k"},
    "fusion": {"alpha", "w0"},
    "azimuth_reliability": None,
}


class ConfigError(Exception):
    pass


def load_run_config(path: Path) -> RunConfig:
    """Parse a run config YAML; unknown keys are rejected."""
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: run config must be a mapping")
    unknown = set(doc) - set(_SECTION_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    for section, allowed in _SECTION_KEYS.items():
        if allowed is None or section not in doc:
            continue
        extra = set(doc[section]) - allowed
        if extra:
            raise ConfigError(f"{path}: unknown keys in {section}: {sorted(extra)}")
    try:
        profile = None
        if "azimuth_reliability" in doc:
            profile = AzimuthReliabilityProfile(
                tuple((float(a), float(g)) for a, g in doc["azimuth_reliability"])
            )
        return RunConfig(
            seed=int(doc.get("seed", 0)),
            sync_tolerance_ns=int(doc.get("sync_tolerance_ns", DEFAULT_SYNC_TOLERANCE_NS)),
            ground=GroundConfig(**doc.get("ground", {})),
            lidar=LidarMatchConfig(**doc.get("lidar_match", {})),
            camera=CameraConfig(**doc.get("camera_match", {})),
            tracking=TrackingConfig(**doc.get("tracking", {})),
            fusion=FusionConfig(**doc.get("fusion", {})),
            profile=profile,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def dump_run_config(cfg: RunConfig) -> str:
    doc = {
        "seed": cfg.seed,
        "sync_tolerance_ns": cfg.sync_tolerance_ns,
        "ground": {
            "ransac_iterations": cfg.ground.ransac_iterations,
            "inlier_threshold_m": cfg.ground.inlier_threshold_m,
            "margin_m": cfg.ground.margin_m,
            "exclude_lidar_inliers": cfg.ground.exclude_lidar_inliers,
            "candidate_max_height_m": cfg.ground.candidate_max_height_m,
        },
        "lidar_match": {"k": cfg.lidar.k, "beta": cfg.lidar.beta, "epsilon": cfg.lidar.epsilon},
        "camera_match": {
            "k": cfg.camera.k, "beta": cfg.camera.beta, "epsilon": cfg.camera.epsilon,
            "grid_step_px": cfg.camera.grid_step_px, "k_anchors": cfg.camera.k_anchors,
            "stride_px": cfg.camera.stride_px, "holdout_every": cfg.camera.holdout_every,
            "inconsistency_threshold": cfg.camera.inconsistency_threshold,
            "max_depth_m": cfg.camera.max_depth_m,
        },
        "tracking": {
            "n_b": cfg.tracking.n_b, "beta": cfg.tracking.beta, "rho": cfg.tracking.rho, "k": cfg.tracking.k,
        },
        "fusion": {"alpha": cfg.fusion.alpha, "w0": cfg.fusion.w0},
    }
    if cfg.profile is not None:
        doc["azimuth_reliability"] = [[a, g] for a, g in cfg.profile.breakpoints]
    return yaml.safe_dump(doc, sort_keys=True)


@dataclass
class FrameScores:
    """Branch outputs for one frame; NaN marks an unavailable branch score."""

    timestamp_ns: int
    xyz: np.ndarray
    azimuth: np.ndarray
    ground_keep: np.ndarray
    w_lm: np.ndarray
    w_cm: np.ndarray
    w_opt: np.ndarray
    w_tr: np.ndarray
    flags: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.xyz)


def _nan_to_none(v: float) -> float | None:
    return None if math.isnan(v) else float(v)


def _camera_anchor_split(n: int, holdout_every: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(n)
    held = (idx % holdout_every) == (holdout_every - 1) if holdout_every > 0 else np.zeros(n, dtype=bool)
    return ~held, held


def compute_branch_scores(
    frames: list[SyncedFrame], rig: SensorRig, cfg: RunConfig
) -> list[FrameScores]:
    """Everything up to (but excluding) fusion; independent of alpha and w0."""
    scores: list[FrameScores] = []
    radar_frames: list[RadarFrame] = [f.radar for f in frames]

    for frame in frames:
        radar = frame.radar
        n = len(radar)
        radar_ps = radar_pointset(radar, rig.radar_mounts, rig.uncertainty)
        azimuth = radar.spherical[:, 1] if n else np.zeros(0)
        w_lm = np.full(n, np.nan)
        w_cm = np.full(n, np.nan)
        keep = np.ones(n, dtype=bool)
        flags: list[str] = []

        lidar_ps = None
        if frame.lidar is not None and len(frame.lidar):
            lidar_ps = lidar_pointset(frame.lidar, rig.lidar_mount, rig.uncertainty)

        plane = None
        if lidar_ps is not None and len(lidar_ps) >= 3:
            low = lidar_ps.xyz[lidar_ps.xyz[:, 2] <= cfg.ground.candidate_max_height_m]
            plane = fit_ground_plane(
                low if len(low) >= 3 else lidar_ps.xyz,
                iterations=cfg.ground.ransac_iterations,
                inlier_threshold_m=cfg.ground.inlier_threshold_m,
                seed=cfg.seed,
            )
            keep = filter_ground_radar(radar_ps.xyz, plane, cfg.ground.margin_m)

        # LiDAR matching over non-floor detections, optionally without ground returns.
        if lidar_ps is not None and n:
            match_mask = np.ones(len(lidar_ps), dtype=bool)
            if plane is not None and cfg.ground.exclude_lidar_inliers:
                match_mask = np.abs(plane.signed_distance(lidar_ps.xyz)) > cfg.ground.inlier_threshold_m
            if match_mask.any() and keep.any():
                target = lidar_pointset(frame.lidar, rig.lidar_mount, rig.uncertainty, keep=match_mask)
                index = build_knn_index(target.xyz)
                sub = radar_pointset(radar, rig.radar_mounts, rig.uncertainty, subset=keep)
                w_lm[keep] = score_matches(sub, target, index, cfg.lidar.k, cfg.lidar.beta, cfg.lidar.epsilon)

        # Camera matching against the merged metric depth cloud of all cameras.
        clouds: list[OpticalPoints] = []
        if lidar_ps is not None and len(lidar_ps):
            for cam_id, depth in frame.depth_images:
                calib = rig.cameras.get(cam_id)
                if calib is None:
                    flags.append(f"unknown_camera_{cam_id}")
                    continue
                uv, cam_depth, _, in_bounds = project_points(lidar_ps.xyz, calib)
                anchors_uv = uv[in_bounds]
                anchors_depth = cam_depth[in_bounds]
                if not len(anchors_uv):
                    continue
                fit_sel, held_sel = _camera_anchor_split(len(anchors_uv), cfg.camera.holdout_every)
                if not fit_sel.any():
                    continue
                metric = calibrate_depth_scale(
                    depth, anchors_uv[fit_sel], anchors_depth[fit_sel],
                    grid_step_px=cfg.camera.grid_step_px, k_anchors=cfg.camera.k_anchors,
                )
                if metric is None:
                    continue
                if held_sel.any():
                    score = consistency_check(metric, anchors_uv[held_sel], anchors_depth[held_sel])
                    if score is not None and score > cfg.camera.inconsistency_threshold:
                        flags.append(f"depth_inconsistent_{cam_id}")
                cloud = back_project(metric, calib, stride_px=cfg.camera.stride_px)
                capped = cloud.select(cloud.depth <= cfg.camera.max_depth_m)
                if len(capped):
                    clouds.append(capped)
        if clouds and n and keep.any():
            merged = OpticalPoints.merge(clouds)
            sub_frame_scores = camera_match(
                radar, merged, rig.radar_mounts, rig.uncertainty,
                CameraMatchConfig(k=cfg.camera.k, beta=cfg.camera.beta, epsilon=cfg.camera.epsilon),
            )
            if sub_frame_scores is not None:
                w_cm[keep] = sub_frame_scores[keep]

        # Optical combination: floor detections are ruled implausible outright.
        w_opt = np.full(n, np.nan)
        for i in range(n):
            if not keep[i]:
                w_opt[i] = 0.0
                continue
            combined = combine_optical(
                _nan_to_none(w_lm[i]), _nan_to_none(w_cm[i]), radar_ps.xyz[i], rig.blindspot
            )
            if combined is not None:
                w_opt[i] = combined

        scores.append(
            FrameScores(
                timestamp_ns=radar.timestamp_ns,
                xyz=radar_ps.xyz,
                azimuth=azimuth,
                ground_keep=keep,
                w_lm=w_lm,
                w_cm=w_cm,
                w_opt=w_opt,
                w_tr=np.full(n, np.nan),
                flags=tuple(flags),
            )
        )

    # Tracking branch over the whole scan stream.
    poses = [VehicleState()]
    for a, b in zip(frames, frames[1:]):
        dt = (b.radar.timestamp_ns - a.radar.timestamp_ns) * 1e-9
        poses.append(integrate_pose(poses[-1], a.odometry, dt))
    for k, frame_scores in enumerate(scores):
        window = build_window(radar_frames, poses, k, rig.radar_mounts, rig.uncertainty, cfg.tracking.n_b)
        w_tr = tracking_score(window, cfg.tracking, epsilon=cfg.lidar.epsilon)
        if w_tr is not None:
            frame_scores.w_tr = w_tr
    return scores


def fuse_scores(
    scores: list[FrameScores], rig: SensorRig, cfg: RunConfig
) -> list[list[PlausibilityRecord]]:
    profile = cfg.profile if cfg.profile is not None else rig.azimuth_profile
    out: list[list[PlausibilityRecord]] = []
    for fs in scores:
        records = []
        for i in range(len(fs)):
            w_opt = _nan_to_none(fs.w_opt[i])
            w_tr = _nan_to_none(fs.w_tr[i])
            fused, y_hat = fuse_and_label(w_opt, w_tr, float(fs.azimuth[i]), profile, cfg.fusion)
            records.append(
                PlausibilityRecord(
                    frame_ts_ns=fs.timestamp_ns,
                    detection_index=i,
                    w_lm=_nan_to_none(fs.w_lm[i]),
                    w_cm=_nan_to_none(fs.w_cm[i]),
                    w_opt=w_opt,
                    w_tr=w_tr,
                    w_fused=fused,
                    y_hat=y_hat,
                )
            )
        out.append(records)
    return out


def run_sequence(
    frames: list[SyncedFrame], rig: SensorRig, cfg: RunConfig
) -> list[PlausibilityRecord]:
    """One record per detection per frame, ordered by (frame, detection index)."""
    nested = fuse_scores(compute_branch_scores(frames, rig, cfg), rig, cfg)
    return [r for frame_records in nested for r in frame_records]


class CorrectionError(Exception):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


def apply_corrections(
    records: list[PlausibilityRecord], corrections: list[tuple[int, int, int]]
) -> list[PlausibilityRecord]:
    """Set y_corrected on matching records; duplicate corrections: last one wins."""
    by_key = {(r.frame_ts_ns, r.detection_index): i for i, r in enumerate(records)}
    problems = [
        f"unknown detection ({ts}, {idx})" for ts, idx, _ in corrections if (ts, idx) not in by_key
    ]
    if problems:
        raise CorrectionError(problems)
    out = list(records)
    for ts, idx, y in corrections:
        if y not in (0, 1):
            raise CorrectionError([f"label for ({ts}, {idx}) must be binary, got {y}"])
        i = by_key[(ts, idx)]
        out[i] = replace(out[i], y_corrected=y)
    return out


@dataclass(frozen=True)
class SweepEntry:
    alpha: float
    w0: float
    values: MetricValues


def sweep(
    frames: list[SyncedFrame],
    rig: SensorRig,
    cfg: RunConfig,
    alphas: list[float],
    w0s: list[float],
    truth_by_ts: dict[int, np.ndarray],
) -> list[SweepEntry]:
    """Metric grid over (alpha, w0); branch scores are computed once and reused."""
    if not truth_by_ts:
        raise ValueError("sweep requires ground truth")
    scores = compute_branch_scores(frames, rig, cfg)
    entries = []
    for alpha in alphas:
        for w0 in w0s:
            grid_cfg = replace(cfg, fusion=FusionConfig(alpha=alpha, w0=w0))
            predicted, truth = [], []
            for frame_records in fuse_scores(scores, rig, grid_cfg):
                if not frame_records:
                    continue
                ts = frame_records[0].frame_ts_ns
                if ts not in truth_by_ts:
                    raise ValueError(f"missing ground truth for frame {ts}")
                predicted.extend(r.y_hat for r in frame_records)
                truth.extend(truth_by_ts[ts])
            entries.append(
                SweepEntry(alpha=alpha, w0=w0, values=compute_metrics(confusion(predicted, truth)))
            )
    return entries


# ---------------------------------------------------------------------------
# Dataset-level runs


def _hash_file(h, path: Path) -> None:
    h.update(path.name.encode())
    h.update(path.read_bytes())


def dataset_hash(manifest: DatasetManifest, seq_id: str) -> str:
    h = hashlib.sha256()
    _hash_file(h, manifest.root_path / "calibration.yaml")
    seq = manifest.sequence_dir(seq_id)
    for path in sorted(seq.rglob("*")):
        if path.is_file() and "labels" not in path.parts[len(seq.parts):]:
            _hash_file(h, path)
    return h.hexdigest()


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(dump_run_config(cfg).encode()).hexdigest()


def label_sequence(
    manifest: DatasetManifest, seq_id: str, cfg: RunConfig, keep_corrections: bool = True
) -> list[PlausibilityRecord]:
    """Run the pipeline over one sequence and persist labels, flags, and run manifest."""
    frames = load_sequence(manifest, seq_id, cfg.sync_tolerance_ns)
    scores = compute_branch_scores(frames, manifest.rig, cfg)
    nested = fuse_scores(scores, manifest.rig, cfg)
    labels_dir = manifest.sequence_dir(seq_id) / "labels"
    labels_dir.mkdir(exist_ok=True)

    all_records: list[PlausibilityRecord] = []
    for frame_records, fs in zip(nested, scores):
        ts = fs.timestamp_ns
        path = labels_dir / f"{ts}.csv"
        if keep_corrections and path.exists():
            previous = {r.detection_index: r.y_corrected for r in read_labels_csv(path)}
            frame_records = [
                replace(r, y_corrected=previous.get(r.detection_index)) for r in frame_records
            ]
        write_labels_csv(path, frame_records)
        all_records.extend(frame_records)
    flags = [(fs.timestamp_ns, flag) for fs in scores for flag in fs.flags]
    write_flags_csv(labels_dir / "flags.csv", flags)
    meta = {
        "config_sha256": config_hash(cfg),
        "dataset_sha256": dataset_hash(manifest, seq_id),
    }
    (labels_dir / "run_manifest.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return all_records


def load_labels(manifest: DatasetManifest, seq_id: str) -> dict[int, list[PlausibilityRecord]]:
    labels_dir = manifest.sequence_dir(seq_id) / "labels"
    out: dict[int, list[PlausibilityRecord]] = {}
    for path in sorted(labels_dir.glob("*.csv")):
        if path.stem.isdigit():
            out[int(path.stem)] = read_labels_csv(path)
    return out

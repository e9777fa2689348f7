"""Temporal branch: ego-motion compensation of neighbor scans and reoccurrence scoring."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import MountingPose, RadarFrame, SensorUncertainty, VehicleState, rot_z
from .geometry import PointSet, build_knn_index, mean_normalized_distance
from .ingest import OdometrySample, interpolate_odometry
from .lidar_match import radar_pointset


@dataclass(frozen=True)
class TrackingConfig:
    n_b: int = 5
    beta: float = 0.5
    rho: float = 0.5
    k: int = 1

    def __post_init__(self) -> None:
        if self.n_b < 1:
            raise ValueError("n_b must be >= 1")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if self.k < 1:
            raise ValueError("k must be >= 1")


def integrate_pose(state: VehicleState, odom: OdometrySample, dt_s: float) -> VehicleState:
    """Planar single-track step: advance position along the current heading."""
    return VehicleState(
        x_m=state.x_m + dt_s * odom.speed_mps * math.cos(state.yaw_rad),
        y_m=state.y_m + dt_s * odom.speed_mps * math.sin(state.yaw_rad),
        z_m=state.z_m,
        yaw_rad=state.yaw_rad + dt_s * odom.yaw_rate_radps,
    )


def integrate_trajectory(
    timestamps_ns: list[int], odometry: list[OdometrySample]
) -> list[VehicleState]:
    """Vehicle pose at each scan time, starting from the origin of the first scan."""
    poses = [VehicleState()]
    for t0, t1 in zip(timestamps_ns, timestamps_ns[1:]):
        odo, _ = interpolate_odometry(odometry, t0)
        poses.append(integrate_pose(poses[-1], odo, (t1 - t0) * 1e-9))
    return poses


def compensate(points: np.ndarray, pose_ref: VehicleState, pose_src: VehicleState) -> np.ndarray:
    """Transform vehicle-frame points captured at pose_src into the pose_ref frame."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    shift = rot_z(-pose_ref.yaw_rad) @ (pose_src.position() - pose_ref.position())
    return pts @ rot_z(pose_src.yaw_rad - pose_ref.yaw_rad).T + shift


def weighted_sorted_mean(distances: np.ndarray, rho: float) -> float:
    """Mean of ascending-sorted distances under geometrically decaying weights."""
    d = np.sort(np.asarray(distances, dtype=float))
    coeff = rho ** np.arange(len(d))
    return float((coeff * d).sum() / coeff.sum())


@dataclass
class TrackingWindow:
    """Reference radar scan plus ego-compensated neighbor scans."""

    reference: PointSet
    neighbors: list[tuple[int, PointSet]]  # (offset j, compensated points)


def build_window(
    frames: list[RadarFrame],
    poses: list[VehicleState],
    ref_index: int,
    mounts: dict[str, MountingPose],
    uncertainty: SensorUncertainty,
    n_b: int,
) -> TrackingWindow:
    """Assemble the window around frames[ref_index]; truncates at sequence edges."""
    reference = radar_pointset(frames[ref_index], mounts, uncertainty)
    neighbors = []
    for j in range(-n_b, n_b + 1):
        src = ref_index + j
        if j == 0 or not 0 <= src < len(frames):
            continue
        ps = radar_pointset(frames[src], mounts, uncertainty)
        compensated = compensate(ps.xyz, poses[ref_index], poses[src])
        delta_yaw = poses[src].yaw_rad - poses[ref_index].yaw_rad
        neighbors.append(
            (j, PointSet(xyz=compensated, sph=ps.sph, yaw=ps.yaw + delta_yaw, sigmas=ps.sigmas))
        )
    return TrackingWindow(reference=reference, neighbors=neighbors)


def tracking_score(
    window: TrackingWindow, cfg: TrackingConfig, epsilon: float = 1e-3
) -> np.ndarray | None:
    """Per-detection reoccurrence score; None when no neighbor scan holds any point."""
    usable = [ps for _, ps in window.neighbors if len(ps) > 0]
    if not usable or len(window.reference) == 0:
        return None if not usable else np.zeros(0)
    per_scan = np.stack(
        [
            mean_normalized_distance(window.reference, ps, build_knn_index(ps.xyz), cfg.k, epsilon)
            for ps in usable
        ],
        axis=1,
    )
    per_scan.sort(axis=1)
    coeff = cfg.rho ** np.arange(per_scan.shape[1])
    d_bar = (per_scan * coeff).sum(axis=1) / coeff.sum()
    return np.exp(-cfg.beta * d_bar)

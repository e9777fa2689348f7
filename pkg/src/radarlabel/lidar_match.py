"""Score radar detections by uncertainty-normalized distance to nearby LiDAR returns."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LidarFrame, MountingPose, RadarFrame, SensorUncertainty, spherical_to_cartesian_array
from .geometry import KnnIndex, PointSet, build_knn_index, mean_normalized_distance


@dataclass(frozen=True)
class LidarMatchConfig:
    k: int = 3
    beta: float = 0.25
    epsilon: float = 1e-3

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")


def radar_pointset(
    frame: RadarFrame,
    mounts: dict[str, MountingPose],
    uncertainty: SensorUncertainty,
    subset: np.ndarray | None = None,
) -> PointSet:
    """Vehicle-frame point set for a radar frame, one mount lookup per detection."""
    sph = frame.spherical
    ids = frame.sensor_ids
    if subset is not None:
        sph = sph[subset]
        ids = tuple(ids[i] for i in np.flatnonzero(subset)) if subset.dtype == bool else tuple(
            ids[i] for i in subset
        )
    xyz = np.zeros((len(sph), 3))
    yaw = np.zeros(len(sph))
    for sensor_id in set(ids):
        mount = mounts[sensor_id]
        sel = np.array([s == sensor_id for s in ids], dtype=bool)
        xyz[sel] = spherical_to_cartesian_array(sph[sel], mount)
        yaw[sel] = mount.yaw_rad
    return PointSet(xyz=xyz, sph=sph, yaw=yaw, sigmas=uncertainty.radar_triple())


def lidar_pointset(
    frame: LidarFrame,
    mount: MountingPose,
    uncertainty: SensorUncertainty,
    keep: np.ndarray | None = None,
) -> PointSet:
    sph = frame.spherical if keep is None else frame.spherical[keep]
    xyz = spherical_to_cartesian_array(sph, mount) if len(sph) else np.zeros((0, 3))
    return PointSet(
        xyz=xyz, sph=sph, yaw=np.full(len(sph), mount.yaw_rad), sigmas=uncertainty.lidar_triple()
    )


def score_matches(
    radar: PointSet, target: PointSet, index: KnnIndex, k: int, beta: float, epsilon: float
) -> np.ndarray:
    """exp(-beta * mean normalized distance to the k nearest targets), in (0, 1]."""
    return np.exp(-beta * mean_normalized_distance(radar, target, index, k, epsilon))


def lidar_match(
    radar: RadarFrame,
    lidar: LidarFrame,
    mounts: dict[str, MountingPose],
    lidar_mount: MountingPose,
    uncertainty: SensorUncertainty,
    cfg: LidarMatchConfig = LidarMatchConfig(),
    index: KnnIndex | None = None,
) -> np.ndarray | None:
    """Per-detection plausibility from LiDAR proximity; None if there is no LiDAR evidence."""
    if len(lidar) == 0:
        return None
    radar_ps = radar_pointset(radar, mounts, uncertainty)
    lidar_ps = lidar_pointset(lidar, lidar_mount, uncertainty)
    if index is None:
        index = build_knn_index(lidar_ps.xyz)
    return score_matches(radar_ps, lidar_ps, index, cfg.k, cfg.beta, cfg.epsilon)

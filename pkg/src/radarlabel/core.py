"""Shared value types and coordinate conventions.

Vehicle frame: x forward, y left, z up, origin on the ground plane under the
rear axle. Sensor-local measurements are spherical (range, azimuth,
elevation); mounting poses are planar (translation + yaw about z).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


def normalize_azimuth(azimuth_rad: float) -> float:
    """Wrap an angle into (-pi, pi]; exact identity on values already in range."""
    if -math.pi < azimuth_rad <= math.pi:
        return azimuth_rad
    return math.pi - (math.pi - azimuth_rad) % TWO_PI


def rot_z(yaw_rad: float) -> np.ndarray:
    c, s = math.cos(yaw_rad), math.sin(yaw_rad)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class SphericalPoint:
    range_m: float
    azimuth_rad: float
    elevation_rad: float

    def __post_init__(self) -> None:
        if not self.range_m >= 0.0:
            raise ValueError(f"range_m must be >= 0, got {self.range_m}")
        if not -math.pi / 2 <= self.elevation_rad <= math.pi / 2:
            raise ValueError(f"elevation_rad outside [-pi/2, pi/2]: {self.elevation_rad}")
        object.__setattr__(self, "azimuth_rad", normalize_azimuth(self.azimuth_rad))


@dataclass(frozen=True)
class CartesianPoint:
    x_m: float
    y_m: float
    z_m: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.x_m, self.y_m, self.z_m)):
            raise ValueError("CartesianPoint components must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x_m, self.y_m, self.z_m])


@dataclass(frozen=True)
class MountingPose:
    """Sensor origin in the vehicle frame; yaw applied before translation."""

    x_m: float = 0.0
    y_m: float = 0.0
    z_m: float = 0.0
    yaw_rad: float = 0.0

    def translation(self) -> np.ndarray:
        return np.array([self.x_m, self.y_m, self.z_m])


IDENTITY_MOUNT = MountingPose()


@dataclass(frozen=True)
class SensorUncertainty:
    sigma_r_radar_m: float
    sigma_az_radar_rad: float
    sigma_el_radar_rad: float
    sigma_r_lidar_m: float

    def __post_init__(self) -> None:
        for name in ("sigma_r_radar_m", "sigma_az_radar_rad", "sigma_el_radar_rad", "sigma_r_lidar_m"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")

    def radar_triple(self) -> np.ndarray:
        return np.array([self.sigma_r_radar_m, self.sigma_az_radar_rad, self.sigma_el_radar_rad])

    def lidar_triple(self) -> np.ndarray:
        return np.array([self.sigma_r_lidar_m, 0.0, 0.0])


@dataclass(frozen=True)
class RadarDetection:
    position: SphericalPoint
    doppler_mps: float
    power_db: float
    sensor_id: str


@dataclass(frozen=True)
class RadarFrame:
    timestamp_ns: int
    detections: tuple[RadarDetection, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "detections", tuple(self.detections))

    def __len__(self) -> int:
        return len(self.detections)

    @cached_property
    def spherical(self) -> np.ndarray:
        """(N, 3) array of range/azimuth/elevation."""
        if not self.detections:
            return np.zeros((0, 3))
        return np.array(
            [[d.position.range_m, d.position.azimuth_rad, d.position.elevation_rad] for d in self.detections]
        )

    @cached_property
    def sensor_ids(self) -> tuple[str, ...]:
        return tuple(d.sensor_id for d in self.detections)


@dataclass(frozen=True)
class LidarFrame:
    timestamp_ns: int
    points: tuple[SphericalPoint, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", tuple(self.points))

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def spherical(self) -> np.ndarray:
        if not self.points:
            return np.zeros((0, 3))
        return np.array([[p.range_m, p.azimuth_rad, p.elevation_rad] for p in self.points])


@dataclass(frozen=True)
class VehicleState:
    x_m: float = 0.0
    y_m: float = 0.0
    z_m: float = 0.0
    yaw_rad: float = 0.0

    def position(self) -> np.ndarray:
        return np.array([self.x_m, self.y_m, self.z_m])


@dataclass(frozen=True)
class PlausibilityRecord:
    """Per-detection branch scores, fused plausibility, and labels.

    A weight of None marks a branch that produced no evidence for this
    detection, which is distinct from a score of 0.
    """

    frame_ts_ns: int
    detection_index: int
    w_lm: float | None
    w_cm: float | None
    w_opt: float | None
    w_tr: float | None
    w_fused: float
    y_hat: int
    y_corrected: int | None = None

    def __post_init__(self) -> None:
        if self.detection_index < 0:
            raise ValueError("detection_index must be >= 0")
        for name in ("w_lm", "w_cm", "w_opt", "w_tr", "w_fused"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} outside [0, 1]: {v}")
        if self.y_hat not in (0, 1):
            raise ValueError(f"y_hat must be binary, got {self.y_hat}")
        if self.y_corrected is not None and self.y_corrected not in (0, 1):
            raise ValueError(f"y_corrected must be binary, got {self.y_corrected}")

    def effective_label(self) -> int:
        return self.y_hat if self.y_corrected is None else self.y_corrected


def spherical_to_cartesian_array(sph: np.ndarray, mount: MountingPose) -> np.ndarray:
    """Convert (N, 3) range/azimuth/elevation in a sensor frame to vehicle-frame xyz."""
    sph = np.asarray(sph, dtype=float).reshape(-1, 3)
    r, az, el = sph[:, 0], sph[:, 1], sph[:, 2]
    ce = np.cos(el)
    local = np.stack([r * ce * np.cos(az), r * ce * np.sin(az), r * np.sin(el)], axis=1)
    return local @ rot_z(mount.yaw_rad).T + mount.translation()


def spherical_to_cartesian(p: SphericalPoint, mount: MountingPose = IDENTITY_MOUNT) -> CartesianPoint:
    """Sensor-local spherical point to vehicle-frame Cartesian."""
    xyz = spherical_to_cartesian_array(
        np.array([[p.range_m, p.azimuth_rad, p.elevation_rad]]), mount
    )[0]
    return CartesianPoint(float(xyz[0]), float(xyz[1]), float(xyz[2]))


def cartesian_to_spherical(p: CartesianPoint, mount: MountingPose = IDENTITY_MOUNT) -> SphericalPoint:
    """Inverse of spherical_to_cartesian; a zero-range point maps to azimuth=elevation=0."""
    local = rot_z(-mount.yaw_rad) @ (p.as_array() - mount.translation())
    r = float(np.linalg.norm(local))
    if r == 0.0:
        return SphericalPoint(0.0, 0.0, 0.0)
    azimuth = math.atan2(local[1], local[0])
    elevation = math.asin(min(1.0, max(-1.0, local[2] / r)))
    return SphericalPoint(r, azimuth, elevation)

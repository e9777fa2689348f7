"""Camera branch: metric rescaling of relative depth via LiDAR anchors and matching."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .core import CartesianPoint, RadarFrame, MountingPose, SensorUncertainty
from .geometry import OpticalPoints, build_knn_index, mean_normalized_distance
from .lidar_match import radar_pointset


@dataclass(frozen=True)
class DepthImage:
    """Relative (dimensionless) depth grid, row-major, all values positive."""

    width: int
    height: int
    values: np.ndarray  # (height, width)
    camera_id: str

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.height, self.width):
            raise ValueError(f"values shape {vals.shape} != (height, width) = ({self.height}, {self.width})")
        if not (vals > 0).all():
            raise ValueError("depth values must be strictly positive")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class MetricDepthImage:
    width: int
    height: int
    values: np.ndarray  # meters
    camera_id: str


@dataclass(frozen=True)
class CameraCalibration:
    """Pinhole intrinsics A plus rigid extrinsics B mapping vehicle to camera frame."""

    intrinsics: np.ndarray  # (3, 3)
    extrinsics: np.ndarray  # (4, 4), p_cam = R p_vehicle + t
    depth_sigma_rel: float
    width: int
    height: int

    def __post_init__(self) -> None:
        a = np.asarray(self.intrinsics, dtype=float).reshape(3, 3)
        b = np.asarray(self.extrinsics, dtype=float).reshape(4, 4)
        if abs(np.linalg.det(a)) < 1e-12:
            raise ValueError("intrinsic matrix must be invertible")
        rot = b[:3, :3]
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-9) or not np.isclose(np.linalg.det(rot), 1.0, atol=1e-9):
            raise ValueError("extrinsic rotation must be orthonormal")
        if not self.depth_sigma_rel > 0:
            raise ValueError("depth_sigma_rel must be > 0")
        object.__setattr__(self, "intrinsics", a)
        object.__setattr__(self, "extrinsics", b)

    @property
    def rotation(self) -> np.ndarray:
        return self.extrinsics[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.extrinsics[:3, 3]

    def center_vehicle(self) -> np.ndarray:
        return -self.rotation.T @ self.translation


class DepthProvider(Protocol):
    """Source of relative depth images; must be deterministic per input."""

    def depth_for(self, camera_id: str, timestamp_ns: int) -> DepthImage | None:
        ...


@dataclass(frozen=True)
class PixelProjection:
    u: float
    v: float
    depth_m: float
    in_bounds: bool


def project_points(points: np.ndarray, calib: CameraCalibration) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized pinhole projection.

    Returns (uv (N, 2), depth (N,), in_front (N,), in_bounds (N,)); uv rows of
    behind-camera points are NaN.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    cam = pts @ calib.rotation.T + calib.translation
    depth = cam[:, 2]
    in_front = depth > 0.0
    uv = np.full((len(pts), 2), np.nan)
    safe = np.where(in_front, depth, 1.0)
    proj = cam @ calib.intrinsics.T
    uv[in_front] = (proj[:, :2] / safe[:, None])[in_front]
    in_bounds = in_front & (uv[:, 0] >= 0) & (uv[:, 0] <= calib.width - 1) & (uv[:, 1] >= 0) & (uv[:, 1] <= calib.height - 1)
    return uv, depth, in_front, in_bounds


def project_to_image(p: CartesianPoint, calib: CameraCalibration) -> PixelProjection | None:
    """Project one vehicle-frame point; None marks a behind-camera point."""
    uv, depth, in_front, in_bounds = project_points(p.as_array(), calib)
    if not in_front[0]:
        return None
    return PixelProjection(float(uv[0, 0]), float(uv[0, 1]), float(depth[0]), bool(in_bounds[0]))


def bilinear_sample(values: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bilinear lookup of (H, W) values at fractional pixel coordinates."""
    h, w = values.shape
    u = np.clip(np.asarray(u, dtype=float), 0.0, w - 1.0)
    v = np.clip(np.asarray(v, dtype=float), 0.0, h - 1.0)
    u0 = np.clip(np.floor(u).astype(int), 0, w - 2) if w > 1 else np.zeros_like(u, dtype=int)
    v0 = np.clip(np.floor(v).astype(int), 0, h - 2) if h > 1 else np.zeros_like(v, dtype=int)
    fu = u - u0
    fv = v - v0
    if w == 1:
        fu = np.zeros_like(fu)
    if h == 1:
        fv = np.zeros_like(fv)
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)
    top = values[v0, u0] * (1 - fu) + values[v0, u1] * fu
    bottom = values[v1, u0] * (1 - fu) + values[v1, u1] * fu
    return top * (1 - fv) + bottom * fv


def sample_depth(values: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Depth lookup at fractional pixels via bilinear interpolation of inverse depth.

    Inverse depth is linear in pixel coordinates on planar surfaces, so this
    stays exact across grazing geometry (ground near the horizon) where plain
    bilinear depth interpolation degrades.
    """
    return 1.0 / bilinear_sample(1.0 / values, u, v)


def _grid_nodes(extent: int, step: int) -> np.ndarray:
    nodes = list(range(0, extent, step))
    if nodes[-1] != extent - 1:
        nodes.append(extent - 1)
    return np.asarray(nodes, dtype=float)


def calibrate_depth_scale(
    depth: DepthImage,
    anchor_pixels: np.ndarray,
    anchor_depths_m: np.ndarray,
    grid_step_px: int = 16,
    k_anchors: int = 4,
) -> MetricDepthImage | None:
    """Metric rescaling from sparse anchors.

    Each grid node takes the mean metric/relative ratio of its k nearest
    anchors (in pixel space); per-pixel scale is bilinear between nodes.
    Returns None when no usable anchor remains.
    """
    px = np.asarray(anchor_pixels, dtype=float).reshape(-1, 2)
    met = np.asarray(anchor_depths_m, dtype=float).reshape(-1)
    rel_under = sample_depth(depth.values, px[:, 0], px[:, 1])
    usable = rel_under > 0
    px, met, rel_under = px[usable], met[usable], rel_under[usable]
    if len(px) == 0:
        return None
    ratios = met / rel_under

    xs = _grid_nodes(depth.width, grid_step_px)
    ys = _grid_nodes(depth.height, grid_step_px)
    gx, gy = np.meshgrid(xs, ys)
    nodes = np.stack([gx.ravel(), gy.ravel()], axis=1)
    d2 = ((nodes[:, None, :] - px[None, :, :]) ** 2).sum(axis=2)
    k = min(k_anchors, len(px))
    nearest = np.argpartition(d2, k - 1, axis=1)[:, :k] if k < len(px) else np.tile(np.arange(len(px)), (len(nodes), 1))
    node_scales = ratios[nearest].mean(axis=1).reshape(len(ys), len(xs))

    interp = RegularGridInterpolator((ys, xs), node_scales, method="linear")
    vv, uu = np.meshgrid(np.arange(depth.height, dtype=float), np.arange(depth.width, dtype=float), indexing="ij")
    scale_map = interp(np.stack([vv.ravel(), uu.ravel()], axis=1)).reshape(depth.height, depth.width)
    return MetricDepthImage(
        width=depth.width, height=depth.height, values=depth.values * scale_map, camera_id=depth.camera_id
    )


def back_project(
    metric: MetricDepthImage, calib: CameraCalibration, stride_px: int = 4
) -> OpticalPoints:
    """Sample the metric depth image on a pixel stride and lift to the vehicle frame."""
    us = np.arange(0, metric.width, stride_px)
    vs = np.arange(0, metric.height, stride_px)
    uu, vv = np.meshgrid(us, vs)
    uu = uu.ravel()
    vv = vv.ravel()
    z = metric.values[vv, uu]
    a_inv = np.linalg.inv(calib.intrinsics)
    pix = np.stack([uu, vv, np.ones_like(uu)], axis=1).astype(float)
    rays_cam = pix @ a_inv.T  # z-component 1 by construction
    rot_t = calib.rotation.T
    xyz = (rays_cam * z[:, None] - calib.translation) @ rot_t.T
    rays_vehicle = rays_cam @ rot_t.T
    return OpticalPoints(xyz=xyz, ray=rays_vehicle, sigma_depth=calib.depth_sigma_rel * z, depth=z)


@dataclass(frozen=True)
class CameraMatchConfig:
    k: int = 3
    beta: float = 0.25
    epsilon: float = 1e-3

    def __post_init__(self) -> None:
        if self.k < 1 or not self.beta > 0 or not self.epsilon > 0:
            raise ValueError("invalid camera match config")


def camera_match(
    radar: RadarFrame,
    optical: OpticalPoints,
    mounts: dict[str, MountingPose],
    uncertainty: SensorUncertainty,
    cfg: CameraMatchConfig = CameraMatchConfig(),
) -> np.ndarray | None:
    """Per-detection plausibility from the optical depth cloud; None without evidence."""
    if len(optical) == 0:
        return None
    radar_ps = radar_pointset(radar, mounts, uncertainty)
    index = build_knn_index(optical.xyz)
    return np.exp(-cfg.beta * mean_normalized_distance(radar_ps, optical, index, cfg.k, cfg.epsilon))


def consistency_check(
    metric: MetricDepthImage, anchor_pixels: np.ndarray, anchor_depths_m: np.ndarray
) -> float | None:
    """Median absolute relative error of calibrated depth against held-out anchors."""
    px = np.asarray(anchor_pixels, dtype=float).reshape(-1, 2)
    met = np.asarray(anchor_depths_m, dtype=float).reshape(-1)
    if len(px) == 0:
        return None
    est = sample_depth(metric.values, px[:, 0], px[:, 1])
    return float(np.median(np.abs(est - met) / met))

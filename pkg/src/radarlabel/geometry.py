"""Spatial index, ground-plane removal, measurement equations, and error propagation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core import (
    IDENTITY_MOUNT,
    MountingPose,
    SensorUncertainty,
    SphericalPoint,
    rot_z,
    spherical_to_cartesian_array,
)

# Relative slack when turning a kd-tree distance into a candidate radius; only
# has to absorb ulp-level disagreement between scipy's metric and ours.
_TIE_SLACK = 1e-9


class KnnIndex:
    """Exact k-nearest-neighbor index over a fixed Cartesian point set.

    Distance ties are broken by lower original point index, so queries are
    bit-reproducible and match a stable brute-force sort.
    """

    def __init__(self, points: np.ndarray):
        pts = np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, 3))
        if pts.size and not np.isfinite(pts).all():
            raise ValueError("index points must be finite")
        self.points = pts
        self._tree = cKDTree(pts) if len(pts) else None

    def __len__(self) -> int:
        return len(self.points)

    def query(self, point: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
        idx, dist = self.query_batch(np.asarray(point, dtype=float).reshape(1, 3), k)
        return idx[0], dist[0]

    def query_batch(self, queries: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Return (indices, distances), each (Q, k_eff), sorted by (distance, index)."""
        queries = np.asarray(queries, dtype=float).reshape(-1, 3)
        n = len(self.points)
        k_eff = min(k, n)
        if n == 0 or len(queries) == 0 or k <= 0:
            shape = (len(queries), max(k_eff, 0))
            return np.zeros(shape, dtype=int), np.zeros(shape)

        # Ask for one extra neighbor to detect boundary ties.
        k_query = min(k_eff + 1, n)
        d_scipy, i_scipy = self._tree.query(queries, k=k_query)
        d_scipy = d_scipy.reshape(len(queries), k_query)
        i_scipy = i_scipy.reshape(len(queries), k_query)

        out_idx = np.empty((len(queries), k_eff), dtype=int)
        out_d2 = np.empty((len(queries), k_eff))
        for qi, q in enumerate(queries):
            cand = i_scipy[qi, :k_eff]
            boundary = d_scipy[qi, k_eff - 1]
            safe_r = boundary * (1.0 + _TIE_SLACK) + 1e-12
            if k_query > k_eff and d_scipy[qi, k_eff] <= safe_r:
                # Possible tie at the boundary: re-rank every candidate in range.
                cand = np.asarray(self._tree.query_ball_point(q, safe_r), dtype=int)
                if len(cand) < k_eff:  # numeric corner: fall back to everything
                    cand = np.arange(n)
            d2 = np.sum((self.points[cand] - q) ** 2, axis=1)
            order = np.lexsort((cand, d2))[:k_eff]
            out_idx[qi] = cand[order]
            out_d2[qi] = d2[order]
        return out_idx, np.sqrt(out_d2)


def build_knn_index(points: np.ndarray) -> KnnIndex:
    return KnnIndex(points)


@dataclass(frozen=True)
class GroundPlane:
    """Plane {p : normal . p = offset_m} with unit normal pointing up."""

    normal: np.ndarray
    offset_m: float
    inlier_count: int

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return pts @ self.normal - self.offset_m


def fit_ground_plane(
    points: np.ndarray,
    iterations: int = 200,
    inlier_threshold_m: float = 0.1,
    seed: int = 0,
) -> GroundPlane | None:
    """RANSAC plane fit from minimal 3-point samples; deterministic for a fixed seed."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    n = len(pts)
    if n < 3:
        return None
    rng = np.random.default_rng(seed)
    best_count = -1
    best: tuple[np.ndarray, float] | None = None
    attempts = 0
    valid = 0
    scale = max(1.0, float(np.abs(pts).max()))
    while valid < iterations and attempts < 50 * iterations:
        attempts += 1
        sample = pts[rng.choice(n, size=3, replace=False)]
        normal = np.cross(sample[1] - sample[0], sample[2] - sample[0])
        norm = np.linalg.norm(normal)
        if norm < 1e-12 * scale * scale:
            continue  # collinear sample: resample
        valid += 1
        normal = normal / norm
        if normal[2] < 0 or (normal[2] == 0 and (normal[1] < 0 or (normal[1] == 0 and normal[0] < 0))):
            normal = -normal
        offset = float(normal @ sample[0])
        count = int(np.count_nonzero(np.abs(pts @ normal - offset) <= inlier_threshold_m))
        if count > best_count:
            best_count = count
            best = (normal, offset)
    if best is None:
        return None
    return GroundPlane(normal=best[0], offset_m=best[1], inlier_count=best_count)


def filter_ground_radar(
    points: np.ndarray, plane: GroundPlane | None, margin_m: float = 0.3
) -> np.ndarray:
    """Keep-mask: True where a point sits more than margin_m above the plane."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if plane is None:
        return np.ones(len(pts), dtype=bool)
    return plane.signed_distance(pts) > margin_m


def spherical_jacobian(sph: np.ndarray) -> np.ndarray:
    """(..., 3, 3) partials of local xyz w.r.t. (range, azimuth, elevation)."""
    sph = np.asarray(sph, dtype=float)
    r, az, el = sph[..., 0], sph[..., 1], sph[..., 2]
    ca, sa = np.cos(az), np.sin(az)
    ce, se = np.cos(el), np.sin(el)
    jac = np.empty(sph.shape[:-1] + (3, 3))
    jac[..., 0, 0] = ce * ca
    jac[..., 0, 1] = -r * ce * sa
    jac[..., 0, 2] = -r * se * ca
    jac[..., 1, 0] = ce * sa
    jac[..., 1, 1] = r * ce * ca
    jac[..., 1, 2] = -r * se * sa
    jac[..., 2, 0] = se
    jac[..., 2, 1] = 0.0
    jac[..., 2, 2] = r * ce
    return jac


def mismatch_components(
    radar: SphericalPoint,
    lidar: SphericalPoint,
    radar_mount: MountingPose = IDENTITY_MOUNT,
    lidar_mount: MountingPose = IDENTITY_MOUNT,
) -> tuple[float, float, float]:
    """Vehicle-frame coordinate differences between a radar and a LiDAR measurement."""
    a = spherical_to_cartesian_array(np.array([[radar.range_m, radar.azimuth_rad, radar.elevation_rad]]), radar_mount)[0]
    b = spherical_to_cartesian_array(np.array([[lidar.range_m, lidar.azimuth_rad, lidar.elevation_rad]]), lidar_mount)[0]
    h = a - b
    return float(h[0]), float(h[1]), float(h[2])


def distance_partials(
    radar: SphericalPoint,
    lidar: SphericalPoint,
    radar_mount: MountingPose = IDENTITY_MOUNT,
    lidar_mount: MountingPose = IDENTITY_MOUNT,
) -> tuple[float, np.ndarray, float]:
    """Distance d plus its analytic partials.

    Returns (d, [dd/dr_i, dd/daz_i, dd/del_i], dd/dr_l). Requires d > 0.
    """
    h = np.array(mismatch_components(radar, lidar, radar_mount, lidar_mount))
    d = float(np.linalg.norm(h))
    if d == 0.0:
        raise ValueError("distance partials undefined at d = 0")
    unit = h / d
    jac_r = rot_z(radar_mount.yaw_rad) @ spherical_jacobian(
        np.array([radar.range_m, radar.azimuth_rad, radar.elevation_rad])
    )
    jac_l = rot_z(lidar_mount.yaw_rad) @ spherical_jacobian(
        np.array([lidar.range_m, lidar.azimuth_rad, lidar.elevation_rad])
    )
    partials_radar = unit @ jac_r
    partial_lidar_r = float(-(unit @ jac_l[:, 0]))
    return d, partials_radar, partial_lidar_r


def propagate_distance_sigma(
    radar: SphericalPoint,
    lidar: SphericalPoint,
    u: SensorUncertainty,
    radar_mount: MountingPose = IDENTITY_MOUNT,
    lidar_mount: MountingPose = IDENTITY_MOUNT,
) -> float:
    """First-order sigma of the radar-LiDAR distance under independent measurement noise.

    At d = 0 the partials do not exist; the larger range sigma is returned as a
    floor so downstream normalization cannot blow up.
    """
    h = np.array(mismatch_components(radar, lidar, radar_mount, lidar_mount))
    d = float(np.linalg.norm(h))
    if d == 0.0:
        return max(u.sigma_r_radar_m, u.sigma_r_lidar_m)
    _, pr, pl = distance_partials(radar, lidar, radar_mount, lidar_mount)
    var = (
        pr[0] ** 2 * u.sigma_r_radar_m**2
        + pr[1] ** 2 * u.sigma_az_radar_rad**2
        + pr[2] ** 2 * u.sigma_el_radar_rad**2
        + pl**2 * u.sigma_r_lidar_m**2
    )
    return math.sqrt(var)


@dataclass
class PointSet:
    """Vehicle-frame point set annotated for uncertainty propagation.

    yaw is the total local-to-vehicle rotation per point (mount yaw, plus any
    ego-compensation yaw); sigmas are per-coordinate (range, azimuth,
    elevation) standard deviations, zero where a coordinate is exact.
    """

    xyz: np.ndarray  # (N, 3)
    sph: np.ndarray  # (N, 3) local range/azimuth/elevation
    yaw: np.ndarray  # (N,)
    sigmas: np.ndarray  # (3,)

    def __len__(self) -> int:
        return len(self.xyz)


def _rotated_jacobians(sph: np.ndarray, yaw: np.ndarray) -> np.ndarray:
    jac = spherical_jacobian(sph)
    c, s = np.cos(yaw), np.sin(yaw)
    rot = np.zeros(yaw.shape + (3, 3))
    rot[..., 0, 0] = c
    rot[..., 0, 1] = -s
    rot[..., 1, 0] = s
    rot[..., 1, 1] = c
    rot[..., 2, 2] = 1.0
    return rot @ jac


def pair_distance_and_sigma_sq(
    a: PointSet, ia: np.ndarray, b: PointSet, ib: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Distances and propagated sigma^2 for point pairs (a[ia], b[ib]).

    Pairs at exactly zero distance get sigma^2 = 0; callers divide the (zero)
    distance by sqrt(sigma^2 + epsilon), so no floor is needed there.
    """
    ia = np.asarray(ia, dtype=int)
    ib = np.asarray(ib, dtype=int)
    h = a.xyz[ia] - b.xyz[ib]
    d = np.linalg.norm(h, axis=-1)
    unit = np.zeros_like(h)
    nz = d > 0
    unit[nz] = h[nz] / d[nz, None]
    jac_a = _rotated_jacobians(a.sph[ia], a.yaw[ia])
    jac_b = _rotated_jacobians(b.sph[ib], b.yaw[ib])
    pa = np.einsum("...i,...ij->...j", unit, jac_a)
    pb = np.einsum("...i,...ij->...j", unit, jac_b)
    var = np.einsum("...j,j->...", pa**2, a.sigmas**2) + np.einsum("...j,j->...", pb**2, b.sigmas**2)
    return d, var


@dataclass
class OpticalPoints:
    """Back-projected camera depth points with their ray-direction uncertainty model."""

    xyz: np.ndarray  # (N, 3) vehicle frame
    ray: np.ndarray  # (N, 3) dp/d(depth): vehicle-frame direction per unit camera depth
    sigma_depth: np.ndarray  # (N,)
    depth: np.ndarray  # (N,) camera-frame depth in meters

    def __len__(self) -> int:
        return len(self.xyz)

    def select(self, mask: np.ndarray) -> "OpticalPoints":
        return OpticalPoints(self.xyz[mask], self.ray[mask], self.sigma_depth[mask], self.depth[mask])

    @staticmethod
    def merge(clouds: list["OpticalPoints"]) -> "OpticalPoints":
        if not clouds:
            return OpticalPoints(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0), np.zeros(0))
        return OpticalPoints(
            np.concatenate([c.xyz for c in clouds]),
            np.concatenate([c.ray for c in clouds]),
            np.concatenate([c.sigma_depth for c in clouds]),
            np.concatenate([c.depth for c in clouds]),
        )


def pair_distance_and_sigma_sq_optical(
    a: PointSet, ia: np.ndarray, b: OpticalPoints, ib: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Like pair_distance_and_sigma_sq with the second side an optical depth point.

    The optical side contributes (dd/d_depth)^2 * sigma_depth^2 along its
    camera ray instead of a spherical range term.
    """
    ia = np.asarray(ia, dtype=int)
    ib = np.asarray(ib, dtype=int)
    h = a.xyz[ia] - b.xyz[ib]
    d = np.linalg.norm(h, axis=-1)
    unit = np.zeros_like(h)
    nz = d > 0
    unit[nz] = h[nz] / d[nz, None]
    jac_a = _rotated_jacobians(a.sph[ia], a.yaw[ia])
    pa = np.einsum("...i,...ij->...j", unit, jac_a)
    p_depth = np.einsum("...i,...i->...", unit, b.ray[ib])
    var = np.einsum("...j,j->...", pa**2, a.sigmas**2) + p_depth**2 * b.sigma_depth[ib] ** 2
    return d, var


def mean_normalized_distance(
    query: PointSet,
    target: PointSet | OpticalPoints,
    index: KnnIndex,
    k: int,
    epsilon: float,
) -> np.ndarray:
    """Per query point: mean over its k nearest targets of d / sqrt(sigma^2 + eps)."""
    if len(query) == 0:
        return np.zeros(0)
    idx, _ = index.query_batch(query.xyz, k)
    k_eff = idx.shape[1]
    qi = np.repeat(np.arange(len(query)), k_eff)
    ti = idx.reshape(-1)
    if isinstance(target, OpticalPoints):
        d, var = pair_distance_and_sigma_sq_optical(query, qi, target, ti)
    else:
        d, var = pair_distance_and_sigma_sq(query, qi, target, ti)
    normalized = np.sqrt(d**2 / (var + epsilon))
    return normalized.reshape(len(query), k_eff).sum(axis=1) / k_eff

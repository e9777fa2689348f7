"""Deterministic synthetic scenes with exact per-detection ground truth.

World frame equals the vehicle frame of the first scan (ground plane z = 0).
Solid objects carry persistent scatter centers, so true detections reoccur
across scans; vegetation is resampled every frame and stays temporally
decorrelated. Radar measurements add spherical noise, plus Poisson clutter,
mirror ghosts, and intra-structure returns. LiDAR and depth images are
ray-cast against the same geometry, so cross-sensor evidence is consistent by
construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .camera_match import CameraCalibration
from .blindspot import BlindspotCone
from .core import MountingPose, SensorUncertainty, VehicleState, rot_z
from .fusion import AzimuthReliabilityProfile
from .ingest import (
    DatasetManifest,
    OdometrySample,
    SensorRig,
    load_manifest,
    write_odometry_csv,
    write_pgm_depth,
    write_truth_csv,
    read_truth_csv,
    save_rig,
)
from .metrics import ClusterLabel

_EPS = 1e-6


# ---------------------------------------------------------------------------
# Scene primitives


@dataclass(frozen=True)
class WallSegment:
    x0: float
    y0: float
    x1: float
    y1: float
    height_m: float
    radar_rate: float = 0.0
    cluster: ClusterLabel = ClusterLabel.CONSTRUCTION

    @property
    def _axis(self) -> tuple[np.ndarray, np.ndarray, float]:
        p0 = np.array([self.x0, self.y0])
        seg = np.array([self.x1 - self.x0, self.y1 - self.y0])
        return p0, seg, float(np.linalg.norm(seg))

    def plane_normal(self) -> np.ndarray:
        _, seg, length = self._axis
        return np.array([seg[1], -seg[0], 0.0]) / length

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        p0, seg, length = self._axis
        n = self.plane_normal()
        denom = dirs @ n
        denom = np.where(np.abs(denom) < 1e-12, 1e-12, denom)
        s = (np.array([p0[0], p0[1], 0.0]) @ n - origin @ n) / denom
        s_safe = np.where(np.isfinite(s) & (s > 0), s, 0.0)
        hit = origin[None, :] + s_safe[:, None] * dirs
        t = ((hit[:, :2] - p0) @ seg) / (length * length)
        ok = (s > _EPS) & (t >= 0) & (t <= 1) & (hit[:, 2] >= 0) & (hit[:, 2] <= self.height_m)
        return np.where(ok, s, np.inf)

    def sample_surface(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray | None]:
        p0, seg, _ = self._axis
        t = rng.uniform(0.0, 1.0, n)
        z_lo = min(0.8, 0.6 * self.height_m)
        z = rng.uniform(z_lo, self.height_m, n)
        xy = p0 + t[:, None] * seg
        return np.column_stack([xy, z]), None  # facades reflect from both sides

    def surface_distance(self, pts: np.ndarray) -> np.ndarray:
        p0, seg, length = self._axis
        t = np.clip(((pts[:, :2] - p0) @ seg) / (length * length), 0.0, 1.0)
        closest_xy = p0 + t[:, None] * seg
        closest_z = np.clip(pts[:, 2], 0.0, self.height_m)
        closest = np.column_stack([closest_xy, closest_z])
        return np.linalg.norm(pts - closest, axis=1)


@dataclass(frozen=True)
class Pole:
    x: float
    y: float
    radius_m: float
    height_m: float
    radar_rate: float = 0.0
    cluster: ClusterLabel = ClusterLabel.POLES

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        oxy = origin[:2] - np.array([self.x, self.y])
        dxy = dirs[:, :2]
        a = np.einsum("ij,ij->i", dxy, dxy)
        b = 2.0 * dxy @ oxy
        c = oxy @ oxy - self.radius_m**2
        disc = b * b - 4 * a * c
        ok = (disc >= 0) & (a > 1e-16)
        sqrt_disc = np.sqrt(np.where(ok, disc, 0.0))
        s = np.where(ok, (-b - sqrt_disc) / np.where(a > 1e-16, 2 * a, 1.0), np.inf)
        z = origin[2] + np.where(np.isfinite(s), s, 0.0) * dirs[:, 2]
        ok &= (s > _EPS) & (z >= 0) & (z <= self.height_m)
        return np.where(ok, s, np.inf)

    def sample_surface(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        az = rng.uniform(-math.pi, math.pi, n)
        z_lo = min(0.8, 0.6 * self.height_m)
        z = rng.uniform(z_lo, self.height_m, n)
        normals = np.column_stack([np.cos(az), np.sin(az), np.zeros(n)])
        pts = np.column_stack(
            [self.x + self.radius_m * np.cos(az), self.y + self.radius_m * np.sin(az), z]
        )
        return pts, normals

    def surface_distance(self, pts: np.ndarray) -> np.ndarray:
        radial = np.abs(np.hypot(pts[:, 0] - self.x, pts[:, 1] - self.y) - self.radius_m)
        dz = np.maximum(np.maximum(-pts[:, 2], pts[:, 2] - self.height_m), 0.0)
        return np.hypot(radial, dz)


@dataclass(frozen=True)
class BoxObject:
    x: float
    y: float
    yaw_rad: float
    length_m: float
    width_m: float
    height_m: float
    radar_rate: float = 0.0
    cluster: ClusterLabel = ClusterLabel.VEHICLE

    def _to_local(self, pts: np.ndarray) -> np.ndarray:
        rel = pts - np.array([self.x, self.y, 0.0])
        return rel @ rot_z(self.yaw_rad)  # rows hit R(-yaw)

    def _to_world(self, pts: np.ndarray) -> np.ndarray:
        return pts @ rot_z(self.yaw_rad).T + np.array([self.x, self.y, 0.0])

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        o = self._to_local(origin[None, :])[0]
        d = dirs @ rot_z(self.yaw_rad)
        lo = np.array([-self.length_m / 2, -self.width_m / 2, 0.0])
        hi = np.array([self.length_m / 2, self.width_m / 2, self.height_m])
        d_safe = np.where(d == 0.0, 1e-300, d)
        t1 = (lo - o) / d_safe
        t2 = (hi - o) / d_safe
        tmin = np.minimum(t1, t2).max(axis=1)
        tmax = np.maximum(t1, t2).min(axis=1)
        ok = (tmax >= tmin) & (tmin > _EPS)
        return np.where(ok, tmin, np.inf)

    def sample_surface(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Points on the four side faces with their outward normals."""
        hl, hw, h = self.length_m / 2, self.width_m / 2, self.height_m
        z_lo = min(0.8, 0.6 * h)
        areas = np.array([self.width_m, self.width_m, self.length_m, self.length_m]) * (h - z_lo)
        face = rng.choice(4, size=n, p=areas / areas.sum())
        u = rng.uniform(-1.0, 1.0, n)
        z = rng.uniform(z_lo, h, n)
        local = np.empty((n, 3))
        normals_local = np.zeros((n, 3))
        for f in range(4):
            sel = face == f
            if f == 0:
                local[sel] = np.column_stack([np.full(sel.sum(), -hl), u[sel] * hw, z[sel]])
                normals_local[sel] = [-1.0, 0.0, 0.0]
            elif f == 1:
                local[sel] = np.column_stack([np.full(sel.sum(), hl), u[sel] * hw, z[sel]])
                normals_local[sel] = [1.0, 0.0, 0.0]
            elif f == 2:
                local[sel] = np.column_stack([u[sel] * hl, np.full(sel.sum(), -hw), z[sel]])
                normals_local[sel] = [0.0, -1.0, 0.0]
            else:
                local[sel] = np.column_stack([u[sel] * hl, np.full(sel.sum(), hw), z[sel]])
                normals_local[sel] = [0.0, 1.0, 0.0]
        return self._to_world(local), normals_local @ rot_z(self.yaw_rad).T

    def surface_distance(self, pts: np.ndarray) -> np.ndarray:
        local = self._to_local(pts)
        lo = np.array([-self.length_m / 2, -self.width_m / 2, 0.0])
        hi = np.array([self.length_m / 2, self.width_m / 2, self.height_m])
        clamped = np.clip(local, lo, hi)
        return np.linalg.norm(local - clamped, axis=1)


Primitive = WallSegment | Pole | BoxObject


def intersect_scene(
    objects: tuple[Primitive, ...], origin: np.ndarray, dirs: np.ndarray, with_ground: bool = True
) -> np.ndarray:
    """Smallest positive hit parameter per ray over all objects (and the ground plane)."""
    best = np.full(len(dirs), np.inf)
    for obj in objects:
        best = np.minimum(best, obj.intersect(origin, dirs))
    if with_ground:
        dz = dirs[:, 2]
        s = np.where(dz < -1e-12, -origin[2] / np.where(dz < -1e-12, dz, -1.0), np.inf)
        best = np.minimum(best, np.where(s > _EPS, s, np.inf))
    return best


def surface_distance_to_objects(objects: tuple[Primitive, ...], pts: np.ndarray) -> np.ndarray:
    dists = np.stack([obj.surface_distance(pts) for obj in objects], axis=0)
    return dists.min(axis=0)


# ---------------------------------------------------------------------------
# Scene specification


@dataclass(frozen=True)
class TrajectoryKnot:
    t_s: float
    speed_mps: float
    yaw_rate_radps: float


def _default_lidar_elevations() -> tuple[float, ...]:
    # Rows concentrated near the horizon where objects live; a few steep rows
    # cover the near-field ground.
    steep = np.linspace(-14.0, -3.5, 8)
    shallow = np.linspace(-3.0, 8.0, 20)
    return tuple(np.deg2rad(np.concatenate([steep, shallow])))


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    objects: tuple[Primitive, ...]
    clutter_rate: float
    trajectory: tuple[TrajectoryKnot, ...]
    mirror_artifact_rate: float = 0.05
    intra_rate: float = 0.04
    frame_count: int = 50
    frame_period_ns: int = 100_000_000
    radar_range_m: tuple[float, float] = (1.5, 40.0)
    radar_fov_az_rad: float = 160 * math.pi / 180
    radar_fov_el_rad: float = 20 * math.pi / 180
    vegetation_jitter_m: float = 0.25
    lidar_range_m: float = 45.0
    background_depth_m: float = 45.0
    lidar_az_step_rad: float = 0.6 * math.pi / 180
    lidar_elevations_rad: tuple[float, ...] = field(default_factory=_default_lidar_elevations)
    scatterers_per_rate: float = 3.0  # persistent scatter centers per unit radar_rate


def default_rig() -> SensorRig:
    """Rig used by the shipped scenes: one front radar, roof LiDAR, two cameras."""

    def camera(yaw: float, y: float) -> CameraCalibration:
        width, height = 160, 120
        fx = width / 2  # 90 degree horizontal FoV
        intrinsics = np.array([[fx, 0, width / 2], [0, fx, height / 2], [0, 0, 1.0]])
        c, s = math.cos(yaw), math.sin(yaw)
        # camera axes in vehicle coords: x_cam = image right, y_cam = down, z_cam = forward
        rot_vehicle_to_cam = np.array([[s, -c, 0.0], [0.0, 0.0, -1.0], [c, s, 0.0]])
        center = np.array([2.2, y, 1.1])
        extrinsics = np.eye(4)
        extrinsics[:3, :3] = rot_vehicle_to_cam
        extrinsics[:3, 3] = -rot_vehicle_to_cam @ center
        return CameraCalibration(
            intrinsics=intrinsics, extrinsics=extrinsics, depth_sigma_rel=0.1, width=width, height=height
        )

    return SensorRig(
        radar_mounts={"radar_0": MountingPose(3.5, 0.0, 0.5, 0.0)},
        lidar_mount=MountingPose(1.0, 0.0, 1.8, 0.0),
        uncertainty=SensorUncertainty(
            sigma_r_radar_m=0.15,
            sigma_az_radar_rad=0.01,
            sigma_el_radar_rad=0.015,
            sigma_r_lidar_m=0.03,
        ),
        # Opening angle matched to the steepest LiDAR channel of the synthetic scanner.
        blindspot=BlindspotCone(x_l_m=1.0, z_l_m=1.8, alpha_rad=0.24),
        cameras={"cam_left": camera(0.45, 0.7), "cam_right": camera(-0.45, -0.7)},
        azimuth_profile=AzimuthReliabilityProfile(
            ((-80 * math.pi / 180, 1.5), (0.0, 1.0), (80 * math.pi / 180, 1.5))
        ),
    )


# ---------------------------------------------------------------------------
# Trajectory and odometry

_ODOM_PERIOD_NS = 20_000_000
_BASE_TS_NS = 1_000_000_000


def _trajectory_at(trajectory: tuple[TrajectoryKnot, ...], t_s: float) -> tuple[float, float]:
    ts = [k.t_s for k in trajectory]
    v = float(np.interp(t_s, ts, [k.speed_mps for k in trajectory]))
    w = float(np.interp(t_s, ts, [k.yaw_rate_radps for k in trajectory]))
    return v, w


def _odometry_stream(spec: SceneSpec) -> list[OdometrySample]:
    t_end = _BASE_TS_NS + spec.frame_count * spec.frame_period_ns + _ODOM_PERIOD_NS * 5
    samples = []
    t = _BASE_TS_NS - _ODOM_PERIOD_NS * 5
    while t <= t_end:
        v, w = _trajectory_at(spec.trajectory, (t - _BASE_TS_NS) * 1e-9)
        samples.append(OdometrySample(timestamp_ns=t, speed_mps=v, yaw_rate_radps=w))
        t += _ODOM_PERIOD_NS
    return samples


def _poses_at_frames(spec: SceneSpec, odometry: list[OdometrySample]) -> list[VehicleState]:
    """True vehicle poses integrated at the odometry rate, sampled at frame times."""
    frame_ts = [_BASE_TS_NS + k * spec.frame_period_ns for k in range(spec.frame_count)]
    poses = []
    state = VehicleState()
    idx = 0
    t = odometry[0].timestamp_ns
    for target in frame_ts:
        while t < target:
            odo = odometry[idx]
            dt = min(_ODOM_PERIOD_NS, target - t) * 1e-9
            state = VehicleState(
                x_m=state.x_m + dt * odo.speed_mps * math.cos(state.yaw_rad),
                y_m=state.y_m + dt * odo.speed_mps * math.sin(state.yaw_rad),
                z_m=0.0,
                yaw_rad=state.yaw_rad + dt * odo.yaw_rate_radps,
            )
            t += _ODOM_PERIOD_NS
            idx = min(idx + 1, len(odometry) - 1)
        poses.append(state)
    # First frame pose defines the world frame.
    origin = poses[0]
    rot = rot_z(-origin.yaw_rad)
    out = []
    for p in poses:
        rel = rot @ (p.position() - origin.position())
        out.append(VehicleState(rel[0], rel[1], rel[2], p.yaw_rad - origin.yaw_rad))
    return out


# ---------------------------------------------------------------------------
# Generation


def _sensor_spherical(world_pts: np.ndarray, pose: VehicleState, mount: MountingPose) -> np.ndarray:
    """World points to sensor-local (range, azimuth, elevation)."""
    if len(world_pts) == 0:
        return np.zeros((0, 3))
    vehicle = (world_pts - pose.position()) @ rot_z(pose.yaw_rad)
    local = (vehicle - mount.translation()) @ rot_z(mount.yaw_rad)
    r = np.linalg.norm(local, axis=1)
    az = np.arctan2(local[:, 1], local[:, 0])
    el = np.arcsin(np.clip(local[:, 2] / np.where(r > 0, r, 1.0), -1.0, 1.0))
    return np.column_stack([r, az, el])


def _in_radar_fov(sph: np.ndarray, spec: SceneSpec) -> np.ndarray:
    r_lo, r_hi = spec.radar_range_m
    return (
        (sph[:, 0] >= r_lo)
        & (sph[:, 0] <= r_hi)
        & (np.abs(sph[:, 1]) <= spec.radar_fov_az_rad / 2)
        & (np.abs(sph[:, 2]) <= spec.radar_fov_el_rad / 2)
    )


def _lidar_ray_table(spec: SceneSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    az = np.arange(-math.pi, math.pi, spec.lidar_az_step_rad)
    # azimuth domain is (-pi, pi]: the -pi ray is stored as +pi so files
    # round-trip byte-identically through the normalizing point types
    az = np.where(az <= -math.pi, az + 2 * math.pi, az)
    el = np.asarray(spec.lidar_elevations_rad)
    aa, ee = np.meshgrid(az, el)
    aa, ee = aa.ravel(), ee.ravel()
    dirs = np.column_stack([np.cos(ee) * np.cos(aa), np.cos(ee) * np.sin(aa), np.sin(ee)])
    return dirs, aa, ee


def _camera_ray_table(calib: CameraCalibration) -> np.ndarray:
    uu, vv = np.meshgrid(np.arange(calib.width, dtype=float), np.arange(calib.height, dtype=float))
    pix = np.stack([uu.ravel(), vv.ravel(), np.ones(uu.size)], axis=1)
    return pix @ np.linalg.inv(calib.intrinsics).T  # camera frame, z = 1


def _persistent_scatterers(
    spec: SceneSpec, rng: np.random.Generator
) -> list[tuple[np.ndarray, np.ndarray | None]]:
    """Stable scatter centers per solid object (vegetation is resampled per frame)."""
    out = []
    for obj in spec.objects:
        if obj.cluster is ClusterLabel.VEGETATION or obj.radar_rate <= 0:
            out.append((np.zeros((0, 3)), None))
            continue
        n = max(8, int(round(obj.radar_rate * spec.scatterers_per_rate)))
        out.append(obj.sample_surface(rng, n))
    return out


def generate_dataset(
    spec: SceneSpec,
    out_path: Path,
    rig: SensorRig | None = None,
    sequence_id: str = "seq_00",
) -> DatasetManifest:
    """Write one synthetic sequence (plus shared calibration) in the dataset layout."""
    if not spec.objects:
        raise ValueError("degenerate scene: no objects")
    if spec.frame_count < 1:
        raise ValueError("degenerate scene: zero frames")
    rig = rig or default_rig()
    root = Path(out_path)
    seq = root / sequence_id
    for sub in ("radar", "lidar", "labels"):
        (seq / sub).mkdir(parents=True, exist_ok=True)
    for cam_id in rig.cameras:
        (seq / "depth" / cam_id).mkdir(parents=True, exist_ok=True)
    save_rig(root / "calibration.yaml", rig)

    rng = np.random.default_rng(spec.seed)
    hidden_scale = {
        cam_id: float(np.exp(rng.uniform(math.log(0.25), math.log(4.0))))
        for cam_id in sorted(rig.cameras)
    }
    odometry = _odometry_stream(spec)
    write_odometry_csv(seq / "odom.csv", odometry)
    poses = _poses_at_frames(spec, odometry)
    scatterers = _persistent_scatterers(spec, rng)

    lidar_dirs, lidar_az, lidar_el = _lidar_ray_table(spec)
    cam_rays = {cam_id: _camera_ray_table(calib) for cam_id, calib in rig.cameras.items()}
    walls = tuple(o for o in spec.objects if isinstance(o, WallSegment))

    radar_id, radar_mount = next(iter(rig.radar_mounts.items()))
    truth_rows: list[tuple[int, int, int, str, str]] = []

    for k in range(spec.frame_count):
        ts = _BASE_TS_NS + k * spec.frame_period_ns
        pose = poses[k]
        pose_rot = rot_z(pose.yaw_rad)
        radar_origin = pose.position() + pose_rot @ radar_mount.translation()
        v_ego, _ = _trajectory_at(spec.trajectory, (ts - _BASE_TS_NS) * 1e-9)
        v_sensor = v_ego * np.array([math.cos(pose.yaw_rad), math.sin(pose.yaw_rad), 0.0])

        # --- radar: object returns (persistent scatterers for solids, fresh for vegetation)
        surface_pts = []
        surface_cluster = []
        for obj, (centers, normals) in zip(spec.objects, scatterers):
            n = rng.poisson(obj.radar_rate)
            if n == 0:
                continue
            if obj.cluster is ClusterLabel.VEGETATION:
                pts, _ = obj.sample_surface(rng, n)
                pts = pts + rng.normal(0.0, spec.vegetation_jitter_m, pts.shape)
                pts[:, 2] = np.abs(pts[:, 2])
            else:
                pool = centers
                if normals is not None and len(centers):
                    facing = ((radar_origin - centers) * normals).sum(axis=1) > 0
                    pool = centers[facing]
                if len(pool) == 0:
                    continue
                pts = pool[rng.integers(0, len(pool), n)]
            surface_pts.append(pts)
            surface_cluster.extend([obj.cluster] * len(pts))
        surface_pts = np.concatenate(surface_pts) if surface_pts else np.zeros((0, 3))
        surface_cluster = np.array([c.value for c in surface_cluster], dtype=object)
        sph = _sensor_spherical(surface_pts, pose, radar_mount)
        visible = _in_radar_fov(sph, spec) if len(sph) else np.zeros(0, dtype=bool)
        surface_pts, sph, surface_cluster = surface_pts[visible], sph[visible], surface_cluster[visible]

        # --- intra-structure returns: pushed deeper along the ray behind a wall facade
        wall_mask = surface_cluster == ClusterLabel.CONSTRUCTION.value
        intra_mask = wall_mask & (rng.random(len(sph)) < spec.intra_rate)
        sph_intra = sph[intra_mask].copy()
        if len(sph_intra):
            sph_intra[:, 0] += rng.uniform(0.3, 2.0, len(sph_intra))

        # --- mirror ghosts: non-wall returns reflected about the nearest wall plane
        ghost_sph = np.zeros((0, 3))
        sources = surface_pts[~wall_mask]
        if len(walls) and len(sources):
            n_ghost = rng.binomial(len(surface_pts), spec.mirror_artifact_rate)
            if n_ghost:
                picks = sources[rng.integers(0, len(sources), n_ghost)]
                ghost_world = np.empty_like(picks)
                for i, p in enumerate(picks):
                    dists = [w.surface_distance(p[None, :])[0] for w in walls]
                    wall = walls[int(np.argmin(dists))]
                    n_hat = wall.plane_normal()
                    sd = (p - np.array([wall.x0, wall.y0, 0.0])) @ n_hat
                    ghost_world[i] = p - 2.0 * sd * n_hat
                gsph = _sensor_spherical(ghost_world, pose, radar_mount)
                ghost_sph = gsph[_in_radar_fov(gsph, spec)]

        # --- clutter: Poisson count, uniform over the radar FoV
        n_clutter = rng.poisson(spec.clutter_rate)
        r_lo, r_hi = spec.radar_range_m
        clutter_sph = np.column_stack(
            [
                rng.uniform(r_lo, r_hi, n_clutter),
                rng.uniform(-spec.radar_fov_az_rad / 2, spec.radar_fov_az_rad / 2, n_clutter),
                rng.uniform(-spec.radar_fov_el_rad / 2, spec.radar_fov_el_rad / 2, n_clutter),
            ]
        )

        keep_surface = ~intra_mask
        groups = [
            (sph[keep_surface], surface_cluster[keep_surface], "surface", True),
            (sph_intra, None, "intra", True),
            (ghost_sph, None, "ghost", True),
            (clutter_sph, None, "clutter", False),
        ]
        all_sph = []
        all_meta = []  # (y, cluster, origin)
        u = rig.uncertainty
        for arr, clusters, origin, noisy in groups:
            if len(arr) == 0:
                continue
            measured = arr.copy()
            if noisy:
                measured[:, 0] += rng.normal(0.0, u.sigma_r_radar_m, len(arr))
                measured[:, 1] += rng.normal(0.0, u.sigma_az_radar_rad, len(arr))
                measured[:, 2] += rng.normal(0.0, u.sigma_el_radar_rad, len(arr))
                measured[:, 0] = np.maximum(measured[:, 0], 0.05)
                measured[:, 2] = np.clip(measured[:, 2], -math.pi / 2, math.pi / 2)
            all_sph.append(measured)
            for i in range(len(arr)):
                if origin == "surface":
                    all_meta.append((1, clusters[i], origin))
                else:
                    all_meta.append((0, ClusterLabel.ARTIFACTS.value, origin))
        all_sph = np.concatenate(all_sph) if all_sph else np.zeros((0, 3))

        order = rng.permutation(len(all_sph))
        all_sph = all_sph[order]
        all_meta = [all_meta[i] for i in order]

        # Doppler of a static return is the closing speed along the ray.
        lines = ["range_m,azimuth_rad,elevation_rad,doppler_mps,power_db,sensor_id"]
        boresight = pose.yaw_rad + radar_mount.yaw_rad
        for i, (r, az, el) in enumerate(all_sph):
            y, cluster, origin = all_meta[i]
            if origin == "clutter":
                doppler = rng.uniform(-5.0, 5.0)
            else:
                ray_world = np.array(
                    [math.cos(el) * math.cos(az + boresight), math.cos(el) * math.sin(az + boresight), math.sin(el)]
                )
                doppler = -float(ray_world @ v_sensor) + rng.normal(0.0, 0.05)
            power = rng.normal(-65.0, 8.0)
            lines.append(
                ",".join([repr(float(r)), repr(float(az)), repr(float(el)), repr(float(doppler)), repr(float(power)), radar_id])
            )
            truth_rows.append((ts, i, y, cluster, origin))
        (seq / "radar" / f"{ts}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

        # --- LiDAR scan (exact surface hits, occlusion via first-hit)
        lidar_origin = pose.position() + pose_rot @ rig.lidar_mount.translation()
        world_dirs = lidar_dirs @ rot_z(pose.yaw_rad + rig.lidar_mount.yaw_rad).T
        s = intersect_scene(spec.objects, lidar_origin, world_dirs)
        hit = s <= spec.lidar_range_m
        lidar_lines = ["range_m,azimuth_rad,elevation_rad"]
        for r, az, el in zip(s[hit], lidar_az[hit], lidar_el[hit]):
            lidar_lines.append(",".join([repr(float(r)), repr(float(az)), repr(float(el))]))
        (seq / "lidar" / f"{ts + 3_000_000}.csv").write_text("\n".join(lidar_lines) + "\n", encoding="utf-8")

        # --- depth images: metric ray-cast divided by the hidden per-camera scale
        for cam_id in sorted(rig.cameras):
            calib = rig.cameras[cam_id]
            cam_origin = pose.position() + pose_rot @ calib.center_vehicle()
            dirs_vehicle = cam_rays[cam_id] @ calib.rotation  # R.T applied from the right
            dirs_world = dirs_vehicle @ pose_rot.T
            depth = intersect_scene(spec.objects, cam_origin, dirs_world)
            depth = np.where(np.isfinite(depth), np.minimum(depth, spec.background_depth_m), spec.background_depth_m)
            depth = np.maximum(depth, 0.1).reshape(calib.height, calib.width)
            write_pgm_depth(seq / "depth" / cam_id / f"{ts + 7_000_000}.pgm", depth / hidden_scale[cam_id], cam_id)

    write_truth_csv(seq / "truth.csv", truth_rows)
    (seq / "scene.yaml").write_text(scene_to_yaml(spec), encoding="utf-8")
    return load_manifest(root)


def true_poses(spec: SceneSpec) -> list[VehicleState]:
    """Exact vehicle poses used during generation (world frame of scan 0)."""
    return _poses_at_frames(spec, _odometry_stream(spec))


def ground_truth(dataset_root: Path, seq_id: str) -> dict[int, np.ndarray]:
    """Per-frame ground-truth labels recorded at generation time."""
    df = read_truth_csv(Path(dataset_root) / seq_id / "truth.csv")
    out: dict[int, np.ndarray] = {}
    for ts, group in df.groupby("timestamp_ns"):
        out[int(ts)] = group.sort_values("detection_index")["y"].to_numpy()
    return out


def ground_truth_table(dataset_root: Path, seq_id: str):
    return read_truth_csv(Path(dataset_root) / seq_id / "truth.csv")


def hidden_depth_scales(spec: SceneSpec, rig: SensorRig | None = None) -> dict[str, float]:
    """Replay the per-camera hidden scale draw for verification against recovery."""
    rig = rig or default_rig()
    rng = np.random.default_rng(spec.seed)
    return {
        cam_id: float(np.exp(rng.uniform(math.log(0.25), math.log(4.0))))
        for cam_id in sorted(rig.cameras)
    }


# ---------------------------------------------------------------------------
# Scene spec serialization


def scene_to_yaml(spec: SceneSpec) -> str:
    objects = []
    for o in spec.objects:
        if isinstance(o, WallSegment):
            objects.append(
                {"kind": "wall", "x0": o.x0, "y0": o.y0, "x1": o.x1, "y1": o.y1,
                 "height_m": o.height_m, "radar_rate": o.radar_rate}
            )
        elif isinstance(o, Pole):
            objects.append(
                {"kind": "pole", "x": o.x, "y": o.y, "radius_m": o.radius_m,
                 "height_m": o.height_m, "radar_rate": o.radar_rate}
            )
        else:
            objects.append(
                {"kind": "box", "x": o.x, "y": o.y, "yaw_rad": o.yaw_rad, "length_m": o.length_m,
                 "width_m": o.width_m, "height_m": o.height_m, "radar_rate": o.radar_rate,
                 "cluster": o.cluster.value}
            )
    doc = {
        "seed": spec.seed,
        "frame_count": spec.frame_count,
        "frame_period_ns": spec.frame_period_ns,
        "clutter_rate": spec.clutter_rate,
        "mirror_artifact_rate": spec.mirror_artifact_rate,
        "intra_rate": spec.intra_rate,
        "trajectory": [
            {"t_s": k.t_s, "speed_mps": k.speed_mps, "yaw_rate_radps": k.yaw_rate_radps}
            for k in spec.trajectory
        ],
        "objects": objects,
    }
    return yaml.safe_dump(doc, sort_keys=True)


def scene_from_yaml(path: Path) -> SceneSpec:
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    objects: list[Primitive] = []
    for o in doc["objects"]:
        kind = o["kind"]
        if kind == "wall":
            objects.append(
                WallSegment(o["x0"], o["y0"], o["x1"], o["y1"], o["height_m"], o.get("radar_rate", 0.0))
            )
        elif kind == "pole":
            objects.append(Pole(o["x"], o["y"], o["radius_m"], o["height_m"], o.get("radar_rate", 0.0)))
        elif kind == "box":
            objects.append(
                BoxObject(
                    o["x"], o["y"], o.get("yaw_rad", 0.0), o["length_m"], o["width_m"], o["height_m"],
                    o.get("radar_rate", 0.0), ClusterLabel(o.get("cluster", "vehicle")),
                )
            )
        else:
            raise ValueError(f"unknown object kind: {kind}")
    return SceneSpec(
        seed=int(doc["seed"]),
        objects=tuple(objects),
        clutter_rate=float(doc["clutter_rate"]),
        trajectory=tuple(
            TrajectoryKnot(k["t_s"], k["speed_mps"], k["yaw_rate_radps"]) for k in doc["trajectory"]
        ),
        mirror_artifact_rate=float(doc.get("mirror_artifact_rate", 0.05)),
        intra_rate=float(doc.get("intra_rate", 0.04)),
        frame_count=int(doc.get("frame_count", 50)),
        frame_period_ns=int(doc.get("frame_period_ns", 100_000_000)),
    )


# ---------------------------------------------------------------------------
# Shipped scenes


def street_scene(seq_index: int, frame_count: int = 100) -> SceneSpec:
    """Low-speed street drive: building facades, poles, parked vehicles, hedges."""
    flip = -1.0 if seq_index % 2 else 1.0
    objects: list[Primitive] = [
        WallSegment(-5.0, flip * 8.0, 45.0, flip * 8.5, 3.0, radar_rate=42.0),
        WallSegment(-3.0, flip * -7.0, 40.0, flip * -7.2, 2.5, radar_rate=26.0),
        Pole(8.0, flip * 5.0, 0.15, 4.0, radar_rate=3.0),
        Pole(16.0, flip * 5.5, 0.15, 4.0, radar_rate=3.0),
        Pole(24.0, flip * 6.0, 0.15, 4.0, radar_rate=3.0),
        Pole(28.0, flip * -5.5, 0.15, 4.0, radar_rate=3.0),
        BoxObject(10.0, flip * -3.5, 0.1 * flip, 4.5, 1.8, 1.5, radar_rate=11.0),
        BoxObject(18.0, flip * -3.8, -0.05 * flip, 4.5, 1.8, 1.5, radar_rate=11.0),
        BoxObject(26.0, flip * 3.5, 0.0, 4.5, 1.8, 1.5, radar_rate=11.0),
        BoxObject(3.0, flip * 6.2, 0.0, 6.0, 1.5, 1.2, radar_rate=9.0, cluster=ClusterLabel.VEGETATION),
        BoxObject(33.0, flip * -5.2, 0.0, 5.0, 1.4, 1.1, radar_rate=8.0, cluster=ClusterLabel.VEGETATION),
    ]
    trajectory = (
        TrajectoryKnot(0.0, 0.8, 0.0),
        TrajectoryKnot(3.0, 1.5, 0.02 * flip),
        TrajectoryKnot(7.0, 1.5, -0.02 * flip),
        TrajectoryKnot(12.0, 1.2, 0.0),
    )
    return SceneSpec(
        seed=101 + seq_index,
        objects=tuple(objects),
        clutter_rate=56.0,
        trajectory=trajectory,
        mirror_artifact_rate=0.07,
        intra_rate=0.05,
        frame_count=frame_count,
    )


def generate_acceptance_suite(out_dir: Path, frames_per_sequence: int = 100) -> DatasetManifest:
    """Two street sequences used by the end-to-end acceptance checks."""
    rig = default_rig()
    for i in range(2):
        generate_dataset(street_scene(i, frames_per_sequence), out_dir, rig=rig, sequence_id=f"seq_{i:02d}")
    return load_manifest(out_dir)

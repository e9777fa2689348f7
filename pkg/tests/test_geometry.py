import math

import numpy as np
import pytest

from radarlabel.core import MountingPose, SensorUncertainty, SphericalPoint, spherical_to_cartesian
from radarlabel.geometry import (
    build_knn_index,
    distance_partials,
    filter_ground_radar,
    fit_ground_plane,
    mismatch_components,
    propagate_distance_sigma,
)


def brute_force_knn(points: np.ndarray, query: np.ndarray, k: int) -> np.ndarray:
    d2 = np.sum((points - query) ** 2, axis=1)
    return np.argsort(d2, kind="stable")[: min(k, len(points))]


class TestKnnIndex:
    def test_nearer_point_wins(self):
        index = build_knn_index(np.array([[0.0, 0, 0], [1.0, 0, 0]]))
        idx, dist = index.query(np.array([0.1, 0, 0]), k=1)
        assert idx.tolist() == [0]
        assert dist[0] == pytest.approx(0.1)

    def test_k_larger_than_point_count_returns_all_sorted(self):
        pts = np.array([[2.0, 0, 0], [1.0, 0, 0], [3.0, 0, 0]])
        idx, dist = build_knn_index(pts).query(np.zeros(3), k=10)
        assert idx.tolist() == [1, 0, 2]
        assert np.all(np.diff(dist) >= 0)

    def test_empty_index_returns_empty(self):
        idx, dist = build_knn_index(np.zeros((0, 3))).query(np.zeros(3), k=3)
        assert idx.size == 0 and dist.size == 0

    def test_tie_broken_by_lower_index(self):
        pts = np.array([[1.0, 0, 0], [-1.0, 0, 0], [0, 1.0, 0], [0, -1.0, 0]])
        idx, _ = build_knn_index(pts).query(np.zeros(3), k=2)
        assert idx.tolist() == [0, 1]

    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            n = rng.integers(1, 200)
            pts = rng.normal(size=(n, 3))
            # duplicated points provoke genuine distance ties
            if n > 4:
                pts[rng.integers(0, n, 3)] = pts[rng.integers(0, n, 3)]
            index = build_knn_index(pts)
            queries = rng.normal(size=(20, 3))
            k = int(rng.integers(1, 8))
            got_idx, got_dist = index.query_batch(queries, k)
            for q, got in zip(queries, got_idx):
                assert got.tolist() == brute_force_knn(pts, q, k).tolist()

    def test_grid_points_with_exact_ties(self):
        # Integer grid: many exactly equal distances.
        g = np.stack(np.meshgrid(*[np.arange(4.0)] * 3), axis=-1).reshape(-1, 3)
        index = build_knn_index(g)
        for q in [np.array([1.5, 1.5, 1.5]), np.array([2.0, 2.0, 2.0]), np.zeros(3)]:
            for k in (1, 4, 9):
                got, _ = index.query(q, k)
                assert got.tolist() == brute_force_knn(g, q, k).tolist()


class TestGroundPlane:
    def test_plane_with_outliers(self):
        rng = np.random.default_rng(0)
        ground = np.column_stack([rng.uniform(-10, 10, 90), rng.uniform(-10, 10, 90), np.zeros(90)])
        outliers = np.column_stack([rng.uniform(-10, 10, 10), rng.uniform(-10, 10, 10), np.full(10, 5.0)])
        plane = fit_ground_plane(np.concatenate([ground, outliers]), seed=1)
        assert plane is not None
        assert plane.normal[2] == pytest.approx(1.0, abs=1e-9)
        assert plane.offset_m == pytest.approx(0.0, abs=0.1)
        assert plane.inlier_count >= 90

    def test_exact_coplanar_offset(self):
        rng = np.random.default_rng(2)
        pts = np.column_stack([rng.uniform(-5, 5, 40), rng.uniform(-5, 5, 40), np.full(40, -0.3)])
        plane = fit_ground_plane(pts, seed=0)
        assert plane.offset_m == pytest.approx(-0.3, abs=1e-6)
        assert plane.inlier_count == 40

    def test_too_few_points(self):
        assert fit_ground_plane(np.array([[0.0, 0, 0], [1.0, 0, 0]])) is None

    def test_deterministic_for_fixed_seed(self):
        rng = np.random.default_rng(7)
        pts = rng.normal(size=(60, 3))
        a = fit_ground_plane(pts, seed=42)
        b = fit_ground_plane(pts, seed=42)
        assert np.array_equal(a.normal, b.normal)
        assert a.offset_m == b.offset_m and a.inlier_count == b.inlier_count

    def test_collinear_points_resampled(self):
        # Most triples are collinear; the fit must still land on the plane.
        line = np.column_stack([np.linspace(0, 1, 50), np.zeros(50), np.zeros(50)])
        extra = np.array([[0.5, 1.0, 0.0], [0.25, 2.0, 0.0]])
        plane = fit_ground_plane(np.concatenate([line, extra]), seed=0)
        assert plane is not None
        assert abs(plane.normal[2]) == pytest.approx(1.0, abs=1e-9)


class TestGroundFilter:
    def test_below_margin_filtered(self):
        plane = fit_ground_plane(
            np.array([[0.0, 0, 0], [1.0, 0, 0], [0, 1.0, 0], [1.0, 1.0, 0]]), seed=0
        )
        mask = filter_ground_radar(np.array([[0, 0, 0.1], [0, 0, 1.0]]), plane, margin_m=0.2)
        assert mask.tolist() == [False, True]

    def test_no_plane_keeps_everything(self):
        mask = filter_ground_radar(np.array([[0, 0, -5.0], [0, 0, 5.0]]), None, margin_m=0.2)
        assert mask.all()

    def test_matches_signed_distance_oracle(self):
        rng = np.random.default_rng(5)
        base = np.column_stack([rng.uniform(-5, 5, 50), rng.uniform(-5, 5, 50), np.zeros(50)])
        plane = fit_ground_plane(base, seed=0)
        pts = rng.normal(0, 2, size=(200, 3))
        expected = (pts @ plane.normal - plane.offset_m) > 0.3
        assert filter_ground_radar(pts, plane, 0.3).tolist() == expected.tolist()


class TestMeasurementEquations:
    def test_coincident_points(self):
        h = mismatch_components(SphericalPoint(1, 0.3, 0.1), SphericalPoint(1, 0.3, 0.1))
        assert h == pytest.approx((0, 0, 0), abs=1e-12)

    def test_on_axis_difference(self):
        h = mismatch_components(SphericalPoint(2, 0, 0), SphericalPoint(1, 0, 0))
        assert h == pytest.approx((1.0, 0.0, 0.0), abs=1e-12)

    def test_matches_conversion_difference(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            radar = SphericalPoint(rng.uniform(1, 30), rng.uniform(-3, 3), rng.uniform(-1.2, 1.2))
            lidar = SphericalPoint(rng.uniform(1, 30), rng.uniform(-3, 3), rng.uniform(-1.2, 1.2))
            rm = MountingPose(*rng.uniform(-3, 3, 3), yaw_rad=rng.uniform(-3, 3))
            lm = MountingPose(*rng.uniform(-3, 3, 3), yaw_rad=rng.uniform(-3, 3))
            h = mismatch_components(radar, lidar, rm, lm)
            a = spherical_to_cartesian(radar, rm)
            b = spherical_to_cartesian(lidar, lm)
            assert h[0] == pytest.approx(a.x_m - b.x_m, abs=1e-12)
            assert h[1] == pytest.approx(a.y_m - b.y_m, abs=1e-12)
            assert h[2] == pytest.approx(a.z_m - b.z_m, abs=1e-12)


def finite_difference_partials(radar, lidar, radar_mount, lidar_mount, step=1e-6):
    def dist(r_i, az_i, el_i, r_l):
        h = mismatch_components(
            SphericalPoint(r_i, az_i, el_i), SphericalPoint(r_l, lidar.azimuth_rad, lidar.elevation_rad),
            radar_mount, lidar_mount,
        )
        return math.sqrt(h[0] ** 2 + h[1] ** 2 + h[2] ** 2)

    base = (radar.range_m, radar.azimuth_rad, radar.elevation_rad, lidar.range_m)
    partials = []
    for j in range(4):
        hi = list(base)
        lo = list(base)
        hi[j] += step
        lo[j] -= step
        partials.append((dist(*hi) - dist(*lo)) / (2 * step))
    return partials


class TestErrorPropagation:
    def test_on_axis_hand_value(self):
        u = SensorUncertainty(0.1, 1e-12, 1e-12, 0.05)
        sigma = propagate_distance_sigma(SphericalPoint(2, 0, 0), SphericalPoint(1, 0, 0), u)
        assert sigma == pytest.approx(math.sqrt(0.1**2 + 0.05**2), rel=1e-9)

    def test_vanishing_sigmas(self):
        u = SensorUncertainty(1e-12, 1e-12, 1e-12, 1e-12)
        sigma = propagate_distance_sigma(SphericalPoint(2, 0.2, 0.1), SphericalPoint(1, -0.1, 0), u)
        assert sigma < 1e-10

    def test_floor_at_zero_distance(self):
        u = SensorUncertainty(0.1, 0.01, 0.01, 0.4)
        sigma = propagate_distance_sigma(SphericalPoint(1, 0, 0), SphericalPoint(1, 0, 0), u)
        assert sigma == 0.4

    def test_partials_match_finite_differences(self):
        rng = np.random.default_rng(23)
        checked = 0
        while checked < 200:
            radar = SphericalPoint(rng.uniform(0.5, 40), rng.uniform(-3, 3), rng.uniform(-1.3, 1.3))
            lidar = SphericalPoint(rng.uniform(0.5, 40), rng.uniform(-3, 3), rng.uniform(-1.3, 1.3))
            rm = MountingPose(*rng.uniform(-3, 3, 3), yaw_rad=rng.uniform(-3, 3))
            lm = MountingPose(*rng.uniform(-3, 3, 3), yaw_rad=rng.uniform(-3, 3))
            d, pr, pl = None, None, None
            h = mismatch_components(radar, lidar, rm, lm)
            d = math.sqrt(sum(c * c for c in h))
            if d <= 1e-3:
                continue
            checked += 1
            d_got, pr, pl = distance_partials(radar, lidar, rm, lm)
            assert d_got == pytest.approx(d, rel=1e-12)
            fd = finite_difference_partials(radar, lidar, rm, lm)
            for analytic, numeric in zip([pr[0], pr[1], pr[2], pl], fd):
                assert analytic == pytest.approx(numeric, rel=1e-5, abs=1e-7)

    def test_invariant_under_common_rig_yaw(self):
        u = SensorUncertainty(0.12, 0.01, 0.02, 0.04)
        radar = SphericalPoint(7.0, 0.4, -0.2)
        lidar = SphericalPoint(6.0, -0.3, 0.1)
        rm = MountingPose(1.0, 0.5, 0.2, 0.3)
        lm = MountingPose(-0.5, 0.1, 1.0, -0.2)
        base = propagate_distance_sigma(radar, lidar, u, rm, lm)
        for yaw in (0.7, -1.9, 2.4):
            c, s = math.cos(yaw), math.sin(yaw)
            rm2 = MountingPose(c * rm.x_m - s * rm.y_m, s * rm.x_m + c * rm.y_m, rm.z_m, rm.yaw_rad + yaw)
            lm2 = MountingPose(c * lm.x_m - s * lm.y_m, s * lm.x_m + c * lm.y_m, lm.z_m, lm.yaw_rad + yaw)
            assert propagate_distance_sigma(radar, lidar, u, rm2, lm2) == pytest.approx(base, rel=1e-9)

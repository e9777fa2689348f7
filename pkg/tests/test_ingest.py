import math

import numpy as np
import pytest

from radarlabel.core import (
    LidarFrame,
    PlausibilityRecord,
    RadarDetection,
    RadarFrame,
    SphericalPoint,
)
from radarlabel.ingest import (
    FileDepthProvider,
    OdometrySample,
    ParseError,
    interpolate_odometry,
    load_manifest,
    load_sequence,
    read_labels_csv,
    read_lidar_csv,
    read_odometry_csv,
    read_pgm_depth,
    read_radar_csv,
    write_labels_csv,
    write_lidar_csv,
    write_odometry_csv,
    write_pgm_depth,
    write_radar_csv,
)


class TestPointFileRoundTrips:
    def test_radar_round_trip_bytes(self, tmp_path):
        rng = np.random.default_rng(0)
        detections = tuple(
            RadarDetection(
                SphericalPoint(rng.uniform(1, 40), rng.uniform(-3, 3), rng.uniform(-1.2, 1.2)),
                doppler_mps=rng.normal(),
                power_db=rng.normal(-60, 5),
                sensor_id="radar_0",
            )
            for _ in range(50)
        )
        frame = RadarFrame(timestamp_ns=123456789, detections=detections)
        path = tmp_path / "123456789.csv"
        write_radar_csv(path, frame)
        first = path.read_bytes()
        loaded = read_radar_csv(path)
        assert loaded.timestamp_ns == 123456789
        write_radar_csv(path, loaded)
        assert path.read_bytes() == first

    def test_lidar_round_trip_bytes(self, tmp_path):
        rng = np.random.default_rng(1)
        frame = LidarFrame(
            timestamp_ns=42,
            points=tuple(
                SphericalPoint(rng.uniform(1, 40), rng.uniform(-3, 3), rng.uniform(-1.2, 1.2))
                for _ in range(200)
            ),
        )
        path = tmp_path / "42.csv"
        write_lidar_csv(path, frame)
        first = path.read_bytes()
        write_lidar_csv(path, read_lidar_csv(path))
        assert path.read_bytes() == first

    def test_odometry_round_trip(self, tmp_path):
        samples = [OdometrySample(10 * k, 0.1 * k, -0.01 * k) for k in range(20)]
        path = tmp_path / "odom.csv"
        write_odometry_csv(path, samples)
        assert read_odometry_csv(path) == samples

    def test_labels_round_trip_with_missing_values(self, tmp_path):
        records = [
            PlausibilityRecord(7, 0, w_lm=0.5, w_cm=None, w_opt=0.5, w_tr=0.25, w_fused=0.4, y_hat=1),
            PlausibilityRecord(7, 1, w_lm=None, w_cm=None, w_opt=None, w_tr=None, w_fused=0.0, y_hat=0, y_corrected=1),
        ]
        path = tmp_path / "7.csv"
        write_labels_csv(path, records)
        loaded = read_labels_csv(path)
        assert loaded == records
        first = path.read_bytes()
        write_labels_csv(path, loaded)
        assert path.read_bytes() == first

    def test_generated_files_round_trip_byte_identical(self, small_dataset):
        root, _, manifest = small_dataset
        seq = manifest.sequence_dir("seq_00")
        radar_path = sorted((seq / "radar").glob("*.csv"))[0]
        lidar_path = sorted((seq / "lidar").glob("*.csv"))[0]
        for path, reader, writer in (
            (radar_path, read_radar_csv, write_radar_csv),
            (lidar_path, read_lidar_csv, write_lidar_csv),
        ):
            original = path.read_bytes()
            loaded = reader(path)
            out = path.parent / f"rt_{path.name}"
            try:
                writer(out, loaded)
                assert out.read_bytes() == original
            finally:
                out.unlink()

    def test_pgm_round_trip_within_quantization(self, tmp_path):
        rng = np.random.default_rng(2)
        rel = rng.uniform(0.05, 1.0, size=(24, 32))
        path = tmp_path / "5.pgm"
        write_pgm_depth(path, rel, "cam")
        loaded = read_pgm_depth(path, "cam")
        assert loaded.width == 32 and loaded.height == 24
        assert np.max(np.abs(loaded.values - rel) / rel) < 1e-3
        provider = FileDepthProvider(tmp_path.parent)
        assert provider.depth_for("cam", 99) is None


class TestParseErrors:
    def test_bad_float_names_file_and_line(self, tmp_path):
        path = tmp_path / "1.csv"
        path.write_text("range_m,azimuth_rad,elevation_rad\n1.0,0.0,0.0\n2.0,oops,0.0\n")
        with pytest.raises(ParseError) as err:
            read_lidar_csv(path)
        assert err.value.line == 3
        assert str(path) in str(err.value)

    def test_wrong_field_count(self, tmp_path):
        path = tmp_path / "2.csv"
        path.write_text("range_m,azimuth_rad,elevation_rad\n1.0,0.0\n")
        with pytest.raises(ParseError) as err:
            read_lidar_csv(path)
        assert err.value.line == 2

    def test_wrong_header(self, tmp_path):
        path = tmp_path / "3.csv"
        path.write_text("a,b,c\n1.0,0.0,0.0\n")
        with pytest.raises(ParseError):
            read_lidar_csv(path)

    def test_truncated_pgm(self, tmp_path):
        path = tmp_path / "4.pgm"
        path.write_bytes(b"P5\n4 4\n65535\n\x00\x01")
        with pytest.raises(ParseError):
            read_pgm_depth(path, "cam")


class TestOdometryInterpolation:
    SAMPLES = [OdometrySample(0, 0.0, 0.0), OdometrySample(100, 2.0, 0.4)]

    def test_midpoint(self):
        sample, extrapolated = interpolate_odometry(self.SAMPLES, 50)
        assert sample.speed_mps == pytest.approx(1.0)
        assert sample.yaw_rate_radps == pytest.approx(0.2)
        assert not extrapolated

    def test_exact_timestamp_returns_sample(self):
        sample, extrapolated = interpolate_odometry(self.SAMPLES, 100)
        assert sample == self.SAMPLES[1]
        assert not extrapolated

    def test_clamp_beyond_range_is_flagged(self):
        sample, extrapolated = interpolate_odometry(self.SAMPLES, 500)
        assert sample == self.SAMPLES[1]
        assert extrapolated
        sample, extrapolated = interpolate_odometry(self.SAMPLES, -5)
        assert sample == self.SAMPLES[0]
        assert extrapolated


class TestSequenceAssembly:
    def test_loads_synthetic_sequence(self, small_dataset, small_frames):
        _, spec, _ = small_dataset
        assert len(small_frames) == spec.frame_count
        ts = [f.radar.timestamp_ns for f in small_frames]
        assert ts == sorted(ts)
        for frame in small_frames:
            assert frame.lidar is not None
            assert abs(frame.lidar.timestamp_ns - frame.radar.timestamp_ns) <= 50_000_000
            assert {cam for cam, _ in frame.depth_images} == {"cam_left", "cam_right"}
            assert not frame.odometry_extrapolated

    def test_partner_outside_tolerance_absent(self, small_dataset):
        _, _, manifest = small_dataset
        frames = load_sequence(manifest, "seq_00", sync_tolerance_ns=1_000_000)
        # lidar files are offset by 3 ms in the generator
        assert all(f.lidar is None for f in frames)
        assert all(len(f.depth_images) == 0 for f in frames)

    def test_nearest_partner_wins(self, tmp_path, small_dataset):
        _, _, manifest = small_dataset
        frames = load_sequence(manifest, "seq_00")
        lidar_ts = sorted(
            int(p.stem) for p in (manifest.sequence_dir("seq_00") / "lidar").glob("*.csv")
        )
        for f in frames:
            best = min(lidar_ts, key=lambda t: abs(t - f.radar.timestamp_ns))
            assert f.lidar.timestamp_ns == best

    def test_manifest_lists_sequences(self, small_dataset):
        root, _, manifest = small_dataset
        assert manifest.sequences == ("seq_00",)
        assert load_manifest(root).rig.lidar_mount == manifest.rig.lidar_mount

    def test_empty_sequence_is_empty_list(self, tmp_path, small_dataset):
        root, _, manifest = small_dataset
        empty = manifest.root_path / "seq_empty"
        (empty / "radar").mkdir(parents=True)
        (empty / "lidar").mkdir()
        write_odometry_csv(empty / "odom.csv", [OdometrySample(0, 0, 0)])
        try:
            refreshed = load_manifest(manifest.root_path)
            assert load_sequence(refreshed, "seq_empty") == []
        finally:
            import shutil

            shutil.rmtree(empty)

    def test_unknown_sequence_raises(self, small_dataset):
        _, _, manifest = small_dataset
        with pytest.raises(FileNotFoundError):
            load_sequence(manifest, "nope")

import threading

import numpy as np
import pytest
from fastapi.testclient import TestClient

from radarlabel import pipeline, synth
from radarlabel.core import spherical_to_cartesian
from radarlabel.ingest import load_manifest, read_radar_csv
from radarlabel.review_api import create_app


@pytest.fixture(scope="module")
def served(tmp_path_factory):
    root = tmp_path_factory.mktemp("api_ds")
    spec = synth.street_scene(0, frame_count=4)
    manifest = synth.generate_dataset(spec, root, sequence_id="seq_00")
    pipeline.label_sequence(manifest, "seq_00", pipeline.RunConfig())
    return root, manifest


@pytest.fixture()
def client(served):
    root, _ = served
    return TestClient(create_app(root))


def frame_timestamps(root):
    return sorted(int(p.stem) for p in (root / "seq_00" / "radar").glob("*.csv"))


class TestSequences:
    def test_listing(self, served, client):
        root, _ = served
        body = client.get("/api/sequences").json()
        assert body == [{"id": "seq_00", "frame_count": 4, "reviewed_count": body[0]["reviewed_count"]}]
        assert body[0]["frame_count"] == len(frame_timestamps(root))

    def test_frame_listing(self, served, client):
        root, _ = served
        body = client.get("/api/frames/seq_00").json()
        assert [f["frame_ts_ns"] for f in body] == frame_timestamps(root)
        assert all(isinstance(f["reviewed"], bool) for f in body)
        assert client.get("/api/frames/nope").status_code == 404


class TestFramePayload:
    def test_unknown_frame_404(self, client):
        response = client.get("/api/frame/seq_00/12345")
        assert response.status_code == 404
        assert response.json()["error"] == "unknown_frame"

    def test_unknown_sequence_404(self, client):
        assert client.get("/api/frame/nope/12345").status_code == 404

    def test_payload_counts_and_cap(self, served, client):
        root, _ = served
        ts = frame_timestamps(root)[0]
        payload = client.get(f"/api/frame/seq_00/{ts}").json()
        radar = read_radar_csv(root / "seq_00" / "radar" / f"{ts}.csv")
        assert payload["labeled"] is True
        assert len(payload["radar"]) == len(radar)
        assert 0 < len(payload["lidar"]) <= 20_000
        assert all(d["y_hat"] in (0, 1) for d in payload["radar"])

    def test_radar_coordinates_match_conversion(self, served, client):
        root, manifest = served
        ts = frame_timestamps(root)[0]
        payload = client.get(f"/api/frame/seq_00/{ts}").json()
        radar = read_radar_csv(root / "seq_00" / "radar" / f"{ts}.csv")
        for entry, det in zip(payload["radar"], radar.detections):
            expected = spherical_to_cartesian(det.position, manifest.rig.radar_mounts[det.sensor_id])
            assert entry["x_m"] == pytest.approx(expected.x_m, abs=1e-9)
            assert entry["y_m"] == pytest.approx(expected.y_m, abs=1e-9)
            assert entry["z_m"] == pytest.approx(expected.z_m, abs=1e-9)

    def test_repeated_gets_identical(self, served, client):
        root, _ = served
        ts = frame_timestamps(root)[1]
        assert client.get(f"/api/frame/seq_00/{ts}").json() == client.get(f"/api/frame/seq_00/{ts}").json()


class TestCorrections:
    def test_flip_then_get_reflects(self, served, client):
        root, _ = served
        ts = frame_timestamps(root)[2]
        before = client.get(f"/api/frame/seq_00/{ts}").json()
        flip_to = 1 - before["radar"][0]["y_hat"]
        response = client.post(
            f"/api/frame/seq_00/{ts}/labels", json=[{"detection_index": 0, "y": flip_to}]
        )
        assert response.status_code == 200
        after = client.get(f"/api/frame/seq_00/{ts}").json()
        assert after["radar"][0]["y_corrected"] == flip_to
        assert after["radar"][1]["y_corrected"] is None
        listing = client.get("/api/sequences").json()
        assert listing[0]["reviewed_count"] >= 1

    def test_out_of_range_index_422_and_untouched(self, served, client):
        root, _ = served
        ts = frame_timestamps(root)[3]
        labels_path = root / "seq_00" / "labels" / f"{ts}.csv"
        before = labels_path.read_bytes()
        response = client.post(
            f"/api/frame/seq_00/{ts}/labels",
            json=[{"detection_index": 0, "y": 1}, {"detection_index": 10**6, "y": 0}],
        )
        assert response.status_code == 422
        assert response.json()["invalid_indices"] == [10**6]
        assert labels_path.read_bytes() == before  # all-or-nothing

    def test_nonbinary_label_422(self, served, client):
        root, _ = served
        ts = frame_timestamps(root)[3]
        response = client.post(
            f"/api/frame/seq_00/{ts}/labels", json=[{"detection_index": 0, "y": 2}]
        )
        assert response.status_code == 422

    def test_corrections_survive_restart(self, served):
        root, _ = served
        ts = frame_timestamps(root)[2]
        fresh = TestClient(create_app(root))
        payload = fresh.get(f"/api/frame/seq_00/{ts}").json()
        assert payload["radar"][0]["y_corrected"] is not None

    def test_concurrent_posts_to_different_frames(self, served):
        root, _ = served
        ts_all = frame_timestamps(root)
        client = TestClient(create_app(root))
        errors = []

        def post(ts):
            try:
                r = client.post(
                    f"/api/frame/seq_00/{ts}/labels", json=[{"detection_index": 1, "y": 0}]
                )
                assert r.status_code == 200
            except Exception as exc:  # pragma: no cover
                errors.append(exc)

        threads = [threading.Thread(target=post, args=(ts,)) for ts in ts_all]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        for ts in ts_all:
            payload = client.get(f"/api/frame/seq_00/{ts}").json()
            assert payload["radar"][1]["y_corrected"] == 0


class TestStaticFallback:
    def test_root_serves_page(self, client):
        response = client.get("/")
        assert response.status_code == 200
        assert "radarlabel" in response.text

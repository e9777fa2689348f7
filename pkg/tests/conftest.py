import pytest

from radarlabel import ingest, pipeline, synth


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """A short single-sequence synthetic dataset shared by IO and pipeline tests."""
    root = tmp_path_factory.mktemp("small_ds")
    spec = synth.street_scene(0, frame_count=12)
    manifest = synth.generate_dataset(spec, root, sequence_id="seq_00")
    return root, spec, manifest


@pytest.fixture(scope="session")
def small_frames(small_dataset):
    _, _, manifest = small_dataset
    return ingest.load_sequence(manifest, "seq_00")


@pytest.fixture(scope="session")
def default_rig():
    return synth.default_rig()


@pytest.fixture()
def run_cfg():
    return pipeline.RunConfig()

import pytest

from glasstrack.cli import main as cli_main


@pytest.fixture(scope="session")
def bg_catalog(tmp_path_factory):
    """Six procedural 80x45 background clips, 12 frames each."""
    root = tmp_path_factory.mktemp("bgs")
    code = cli_main([
        "demo-assets", "--dest", str(root), "--clips", "6", "--frames", "12",
        "--width", "80", "--height", "45", "--seed", "3",
    ])
    assert code == 0
    return root


@pytest.fixture(scope="session")
def bg_paths_factory(bg_catalog):
    def paths(clip_id, n):
        clip = bg_catalog / clip_id
        out = sorted(str(p) for p in clip.glob("*.ppm"))
        assert len(out) >= n
        return out[:n]
    return paths

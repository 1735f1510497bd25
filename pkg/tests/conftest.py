import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def cylinder_scene():
    from colosynth.phantoms import closed_cylinder_mesh
    from colosynth.render import Scene

    return Scene.from_mesh(closed_cylinder_mesh())


@pytest.fixture(scope="session")
def mucosa_texture():
    from colosynth.texture import TextureSpec, generate_texture

    return generate_texture(TextureSpec(resolution=(256, 256)))


@pytest.fixture(scope="session")
def cylinder_mask_file(tmp_path_factory):
    from colosynth.phantoms import cylinder_mask
    from colosynth.volume_io import save_mask

    return save_mask(cylinder_mask(), tmp_path_factory.mktemp("mask") / "cylinder.mhdr")


@pytest.fixture
def make_config(cylinder_mask_file, tmp_path):
    """Small cylinder pipeline config writing under tmp_path/<name>."""
    from colosynth.phantoms import cylinder_axis
    from colosynth.pipeline import PipelineConfig

    def make(name="out", **kw):
        base = dict(
            mask=str(cylinder_mask_file),
            endpoints=cylinder_axis(),
            image_resolution=(64, 64),
            texture_resolution=(128, 128),
            max_frames=6,
            output_dir=str(tmp_path / name),
        )
        base.update(kw)
        return PipelineConfig(**base).validate()

    return make


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)

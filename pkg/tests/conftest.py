import numpy as np
import pytest

from splatlab import io, synthetic
from splatlab.rasterizer import render


@pytest.fixture(scope="session")
def synthetic_scene(tmp_path_factory):
    """A COLMAP-layout scene rendered from a small synthetic teacher.

    Returns ``(scene_dir, teacher, cameras)``.
    """
    root = tmp_path_factory.mktemp("scene")
    teacher = synthetic.random_teacher(30, seed=7)
    cams = synthetic.orbit_cameras(10, 48, 40, seed=7)
    names = [f"view_{i:02d}.ppm" for i in range(len(cams))]
    (root / "images").mkdir()
    for cam, name in zip(cams, names):
        io.write_image(root / "images" / name, np.clip(render(teacher, cam), 0, 1))
    cloud = synthetic.jittered_points(teacher, 80, seed=8)
    io.write_colmap_sparse(root / "sparse" / "0", cams, cloud, names)
    return root, teacher, cams

"""
Reading and writing the supported file formats
==============================================

Writes a tiny COLMAP text model plus PPM images, reads it back, and round-trips
a Gaussian checkpoint through PLY. Everything lands in ``demo_output/``.
"""

from pathlib import Path

import numpy as np

from splatlab import io, synthetic
from splatlab.rasterizer import render

out = Path("demo_output") / "scene"
teacher = synthetic.random_teacher(20, seed=3)
cams = synthetic.orbit_cameras(4, 48, 32, seed=3)
names = [f"img_{i}.ppm" for i in range(len(cams))]

(out / "images").mkdir(parents=True, exist_ok=True)
for cam, name in zip(cams, names):
    io.write_image(out / "images" / name, np.clip(render(teacher, cam), 0, 1))
io.write_colmap_sparse(out / "sparse" / "0", cams, synthetic.jittered_points(teacher, 50), names)

bundle = io.load_colmap_sparse(io.find_sparse_dir(out))
print(f"{len(bundle.cameras)} views, {len(bundle.sparse_cloud)} sparse points")
first = bundle.cameras[0]
print("first view:", bundle.images[0], f"fx={first.fx:.2f} center={np.round(first.center, 3)}")

# Gaussian checkpoints: 62 properties per vertex; double precision is bit-exact.
io.write_gaussians(out / "teacher.ply", teacher)
back = io.read_gaussians(out / "teacher.ply")
print("PLY round trip exact:", all(np.array_equal(getattr(back, f), getattr(teacher, f)) for f in teacher.PARAM_FIELDS))
print("header:", (out / "teacher.ply").read_bytes().split(b"end_header")[0].count(b"property"), "properties")

"""Seeded synthetic scenes: a random teacher model and cameras around it.

Used by the demos, the CLI fixtures and the teacher-student acceptance run.
"""

from __future__ import annotations

import numpy as np

from .model import Camera, GaussianModel, PointCloud, logit, rgb_to_sh_dc


def random_teacher(num_gaussians=200, seed=0, extent=1.0, sh_degree=1):
    """Anisotropic, mostly opaque Gaussians inside ``[-extent, extent]^3``."""
    rng = np.random.default_rng(seed)
    n = num_gaussians
    means = rng.uniform(-extent, extent, (n, 3)) * np.array([1.0, 1.0, 0.6])
    log_scales = np.log(extent * rng.uniform(0.04, 0.16, (n, 3)))
    rot = rng.normal(size=(n, 4))
    rot /= np.linalg.norm(rot, axis=1, keepdims=True)
    sh = np.zeros((n, 16, 3))
    sh[:, 0] = rgb_to_sh_dc(rng.uniform(0.1, 0.9, (n, 3)))
    if sh_degree >= 1:
        sh[:, 1:4] = rng.normal(0, 0.08, (n, 3, 3))
    return GaussianModel(means, log_scales, rot, logit(rng.uniform(0.6, 0.95, n)), sh, sh_degree)


def orbit_cameras(count, width=128, height=128, radius=4.0, fov_deg=50.0, seed=0):
    """Cameras spread over the upper part of a sphere, all looking at the origin."""
    rng = np.random.default_rng(seed)
    cams = []
    golden = np.pi * (3 - np.sqrt(5))
    for i in range(count):
        z = 0.75 - 0.9 * (i + 0.5) / count
        r = np.sqrt(1 - z * z)
        phi = i * golden + rng.uniform(-0.05, 0.05)
        eye = radius * np.array([r * np.cos(phi), r * np.sin(phi), z])
        cams.append(Camera.look_at(eye, (0, 0, 0), width, height, fov_deg, image_id=f"view_{i:03d}"))
    return cams


def jittered_points(teacher, count=500, jitter=0.05, color_noise=0.05, seed=1):
    """Noisy samples of the teacher's means, mimicking a sparse SfM cloud."""
    rng = np.random.default_rng(seed)
    pick = rng.integers(0, len(teacher), count)
    pos = teacher.means[pick] + rng.normal(0, jitter, (count, 3))
    base = np.clip(teacher.sh_coeffs[pick, 0] * 0.28209479177387814 + 0.5, 0, 1)
    colors = np.clip(base + rng.normal(0, color_noise, (count, 3)), 0, 1)
    return PointCloud(pos, colors)

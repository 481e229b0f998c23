"""Scene and camera types shared by every other module.

Images are plain ``(H, W, 3)`` float64 arrays; everything else is a small
dataclass of numpy arrays.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

SH_C0 = 0.28209479177387814
NUM_SH_COEFFS = 16
PARAMS_PER_GAUSSIAN = 3 + 3 + 4 + 1 + NUM_SH_COEFFS * 3  # 59

QUAT_TOL = 1e-6


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def logit(p):
    p = np.asarray(p, dtype=np.float64)
    return np.log(p) - np.log1p(-p)


def rgb_to_sh_dc(rgb):
    return (np.asarray(rgb, dtype=np.float64) - 0.5) / SH_C0


def sh_dc_to_rgb(dc):
    return np.maximum(np.asarray(dc) * SH_C0 + 0.5, 0.0)


@dataclass
class GaussianModel:
    """Trainable Gaussian scene.

    Scales are stored as logs and opacities as logits so that the activated
    values are always positive and in (0, 1) respectively. ``sh_coeffs`` has
    shape ``(N, 16, 3)``: coefficient index first, then color channel.
    """

    means: np.ndarray
    log_scales: np.ndarray
    rotations: np.ndarray
    opacity_logits: np.ndarray
    sh_coeffs: np.ndarray
    sh_degree_active: int = 0

    PARAM_FIELDS = ("means", "log_scales", "rotations", "opacity_logits", "sh_coeffs")

    def __len__(self):
        return self.means.shape[0]

    @classmethod
    def empty(cls):
        return cls(
            means=np.zeros((0, 3)),
            log_scales=np.zeros((0, 3)),
            rotations=np.zeros((0, 4)),
            opacity_logits=np.zeros(0),
            sh_coeffs=np.zeros((0, NUM_SH_COEFFS, 3)),
        )

    @property
    def scales(self):
        return np.exp(self.log_scales)

    @property
    def opacities(self):
        return sigmoid(self.opacity_logits)

    @property
    def num_parameters(self):
        return sum(getattr(self, f).size for f in self.PARAM_FIELDS)

    def params(self):
        return {f: getattr(self, f) for f in self.PARAM_FIELDS}

    def copy(self):
        return dataclasses.replace(self, **{f: getattr(self, f).copy() for f in self.PARAM_FIELDS})

    def select(self, index):
        """Return a new model holding the Gaussians picked by ``index``."""
        return dataclasses.replace(self, **{f: getattr(self, f)[index].copy() for f in self.PARAM_FIELDS})

    def flat_parameters(self):
        return np.concatenate([getattr(self, f).reshape(len(self), -1) for f in self.PARAM_FIELDS], axis=1)

    @classmethod
    def from_flat(cls, flat, sh_degree_active=0):
        flat = np.asarray(flat, dtype=np.float64)
        n = flat.shape[0]
        return cls(
            means=flat[:, 0:3].copy(),
            log_scales=flat[:, 3:6].copy(),
            rotations=flat[:, 6:10].copy(),
            opacity_logits=flat[:, 10].copy(),
            sh_coeffs=flat[:, 11:59].reshape(n, NUM_SH_COEFFS, 3).copy(),
            sh_degree_active=sh_degree_active,
        )


@dataclass
class Camera:
    """Pinhole camera with a world-to-camera pose (x_cam = R @ x_world + t)."""

    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    image_id: str = ""

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError(f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} image")
        R = self.rotation
        if not np.allclose(R @ R.T, np.eye(3), atol=1e-9) or abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("camera rotation must be orthonormal with determinant +1")

    @property
    def center(self):
        return -self.rotation.T @ self.translation

    def scaled(self, factor):
        """Camera for an image downsampled by an integer ``factor``."""
        return dataclasses.replace(
            self,
            width=self.width // factor,
            height=self.height // factor,
            fx=self.fx / factor,
            fy=self.fy / factor,
            cx=self.cx / factor,
            cy=self.cy / factor,
        )

    @classmethod
    def look_at(cls, eye, target, width, height, fov_deg=60.0, up=(0.0, 0.0, 1.0), image_id=""):
        eye = np.asarray(eye, dtype=np.float64)
        forward = np.asarray(target, dtype=np.float64) - eye
        forward /= np.linalg.norm(forward)
        right = np.cross(forward, up)
        if np.linalg.norm(right) < 1e-9:
            right = np.cross(forward, (0.0, 1.0, 0.0))
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        # camera axes: x right, y down, z forward
        R = np.stack([right, down, forward])
        f = 0.5 * width / np.tan(np.radians(fov_deg) / 2)
        return cls(width, height, f, f, width / 2, height / 2, R, -R @ eye, image_id)


@dataclass
class PointCloud:
    positions: np.ndarray
    colors: np.ndarray | None = None
    normals: np.ndarray | None = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        n = len(self.positions)
        for name in ("colors", "normals"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=np.float64).reshape(-1, 3)
                if len(arr) != n:
                    raise ValueError(f"{name} has {len(arr)} rows, positions has {n}")
                setattr(self, name, arr)
        if self.normals is not None and n:
            err = np.abs(np.linalg.norm(self.normals, axis=1) - 1.0).max()
            if err > 1e-6:
                raise ValueError(f"normals must be unit length (max deviation {err:.3g})")

    def __len__(self):
        return len(self.positions)

    def subset(self, index):
        return PointCloud(
            self.positions[index],
            None if self.colors is None else self.colors[index],
            None if self.normals is None else self.normals[index],
        )

    def transformed(self, rotation, translation):
        pos = self.positions @ np.asarray(rotation).T + translation
        nrm = None if self.normals is None else self.normals @ np.asarray(rotation).T
        return PointCloud(pos, self.colors, nrm)

    def bbox_diagonal(self):
        if len(self) == 0:
            return 0.0
        return float(np.linalg.norm(self.positions.max(0) - self.positions.min(0)))


@dataclass
class TrainConfig:
    iterations: int = 30000
    lambda_dssim: float = 0.2
    lr_position_init: float = 3.2e-5
    lr_position_final: float = 3.2e-7
    lr_scale: float = 2e-3
    lr_rotation: float = 1e-3
    lr_opacity: float = 0.05
    lr_sh: float = 2.5e-3
    densify_start_iter: int = 1000
    densify_interval: int = 100
    densify_grad_threshold: float = 2e-4
    split_scale_factor: float = 1.6
    split_size_threshold_fraction: float = 0.01
    prune_opacity_threshold: float = 5e-3
    opacity_reset_interval: int = 3000
    test_split_every: int = 8
    background_color: tuple = (0.0, 0.0, 0.0)
    tile_size: int = 16
    random_seed: int = 0
    # not named by the paper; decided defaults
    initial_opacity: float = 0.1
    max_sh_degree: int = 3
    sh_degree_interval: int = 1000
    densify_until_iter: int = 0  # 0 means densify until the end
    eval_interval: int = 0
    log_interval: int = 100
    checkpoint_interval: int = 0

    def __post_init__(self):
        self.background_color = tuple(float(c) for c in self.background_color)
        if len(self.background_color) != 3:
            raise ValueError("background_color needs 3 components")
        if not 0.0 <= self.lambda_dssim <= 1.0:
            raise ValueError(f"lambda_dssim must be in [0, 1], got {self.lambda_dssim}")
        for name in (
            "lr_position_init", "lr_position_final", "lr_scale", "lr_rotation", "lr_opacity", "lr_sh",
            "densify_interval", "densify_grad_threshold", "split_scale_factor",
            "split_size_threshold_fraction", "prune_opacity_threshold", "opacity_reset_interval",
            "tile_size", "test_split_every",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")


def new_model_from_pointcloud(pc, initial_opacity=0.1):
    """One isotropic Gaussian per point, scaled by the local point spacing."""
    n = len(pc)
    if n == 0:
        raise ValueError("empty initialization cloud")
    if not 0.0 < initial_opacity < 1.0:
        raise ValueError(f"initial_opacity must be in (0, 1), got {initial_opacity}")
    if n > 1:
        k = min(3, n - 1)
        dist, _ = cKDTree(pc.positions).query(pc.positions, k=k + 1)
        spacing = dist[:, 1:].reshape(n, k).mean(axis=1)
    else:
        spacing = np.ones(1)
    log_s = np.log(np.maximum(spacing, 1e-7))

    sh = np.zeros((n, NUM_SH_COEFFS, 3))
    colors = pc.colors if pc.colors is not None else np.full((n, 3), 0.5)
    sh[:, 0, :] = rgb_to_sh_dc(colors)
    rot = np.zeros((n, 4))
    rot[:, 0] = 1.0
    return GaussianModel(
        means=pc.positions.copy(),
        log_scales=np.repeat(log_s[:, None], 3, axis=1),
        rotations=rot,
        opacity_logits=np.full(n, float(logit(initial_opacity))),
        sh_coeffs=sh,
        sh_degree_active=0,
    )


def validate(model):
    """List every invariant violation as ``(field, index, message)`` tuples."""
    problems = []
    n = len(model.means)
    expected = {
        "means": (n, 3),
        "log_scales": (n, 3),
        "rotations": (n, 4),
        "opacity_logits": (n,),
        "sh_coeffs": (n, NUM_SH_COEFFS, 3),
    }
    shapes_ok = True
    for name, shape in expected.items():
        arr = np.asarray(getattr(model, name))
        if arr.shape != shape:
            problems.append((name, None, f"shape {arr.shape}, expected {shape}"))
            shapes_ok = False
    if not shapes_ok:
        return problems
    for name in expected:
        arr = getattr(model, name).reshape(n, -1)
        for i in np.flatnonzero(~np.isfinite(arr).all(axis=1)):
            problems.append((name, int(i), "non-finite value"))
    norms = np.linalg.norm(model.rotations, axis=1)
    finite = np.isfinite(norms)
    for i in np.flatnonzero(finite & (np.abs(norms - 1.0) > QUAT_TOL)):
        problems.append(("rotations", int(i), f"quaternion norm {norms[i]:.6g} is not 1"))
    if not 0 <= model.sh_degree_active <= 3:
        problems.append(("sh_degree_active", None, f"degree {model.sh_degree_active} outside 0..3"))
    return problems

"""Gaussian splatting on the CPU: training, rendering, densification, and
point-cloud / image quality evaluation."""

import numba as _numba

if _numba.config.THREADING_LAYER == "default":
    # TBB builds on some distros are too old for numba and warn on every import
    _numba.config.THREADING_LAYER = "omp"

from .model import (
    Camera,
    GaussianModel,
    PointCloud,
    TrainConfig,
    new_model_from_pointcloud,
    validate,
)

__all__ = [
    "Camera",
    "GaussianModel",
    "PointCloud",
    "TrainConfig",
    "new_model_from_pointcloud",
    "validate",
]

__version__ = "0.1.0"

"""Per-Gaussian differentiable kernels.

Every forward kernel broadcasts over leading batch dimensions, and every one
has a matching ``*_vjp`` that maps an output cotangent back onto the inputs
(vector-Jacobian product). Matrix cotangents use the full-matrix convention:
``dL/dA[i, j]`` treats every entry of ``A`` as independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NEAR_PLANE = 0.01
LOW_PASS = 0.3
FOOTPRINT_SIGMAS = 3.0

# Real spherical harmonics constants, degrees 0..3.
SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792, 0.5462742152960396)
SH_C3 = (
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
)


# ---------------------------------------------------------------------------
# rotations and covariances


def _normalize_quat(q):
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(~(norm > 1e-12)):
        raise ValueError("quaternion has zero norm")
    return q / norm, norm


def _rotation_from_unit(q):
    r, i, j, k = np.moveaxis(q, -1, 0)
    R = np.empty(q.shape[:-1] + (3, 3))
    R[..., 0, 0] = 1 - 2 * (j * j + k * k)
    R[..., 0, 1] = 2 * (i * j - k * r)
    R[..., 0, 2] = 2 * (i * k + j * r)
    R[..., 1, 0] = 2 * (i * j + k * r)
    R[..., 1, 1] = 1 - 2 * (i * i + k * k)
    R[..., 1, 2] = 2 * (j * k - i * r)
    R[..., 2, 0] = 2 * (i * k - j * r)
    R[..., 2, 1] = 2 * (j * k + i * r)
    R[..., 2, 2] = 1 - 2 * (i * i + j * j)
    return R


def quat_to_rotation(q):
    """Rotation matrix of quaternion ``(r, i, j, k)``; ``q`` is normalized first."""
    qn, _ = _normalize_quat(q)
    return _rotation_from_unit(qn)


def _rotation_unit_jacobian(q):
    """d R / d q for a unit quaternion, shape (..., 3, 3, 4)."""
    r, i, j, k = np.moveaxis(q, -1, 0)
    z = np.zeros_like(r)
    rows = [
        [(z, z, -4 * j, -4 * k), (-2 * k, 2 * j, 2 * i, -2 * r), (2 * j, 2 * k, 2 * r, 2 * i)],
        [(2 * k, 2 * j, 2 * i, 2 * r), (z, -4 * i, z, -4 * k), (-2 * i, -2 * r, 2 * k, 2 * j)],
        [(-2 * j, 2 * k, -2 * r, 2 * i), (2 * i, 2 * r, 2 * k, 2 * j), (z, -4 * i, -4 * j, z)],
    ]
    return np.stack([np.stack([np.stack(d, axis=-1) for d in row], axis=-2) for row in rows], axis=-3)


def quat_to_rotation_jacobian(q):
    """Full Jacobian d R / d q (raw, unnormalized q), shape (..., 3, 3, 4)."""
    qn, norm = _normalize_quat(q)
    dR_dqn = _rotation_unit_jacobian(qn)
    proj = (np.eye(4) - qn[..., :, None] * qn[..., None, :]) / norm[..., None]
    return dR_dqn @ proj[..., None, :, :]


def quat_to_rotation_vjp(q, dL_dR):
    qn, norm = _normalize_quat(q)
    g = np.einsum("...ab,...abc->...c", dL_dR, _rotation_unit_jacobian(qn))
    # back through q / |q|
    return (g - qn * np.sum(g * qn, axis=-1, keepdims=True)) / norm


def build_covariance(log_scale, q):
    """Sigma = R S S^T R^T with S = diag(exp(log_scale))."""
    M = quat_to_rotation(q) * np.exp(log_scale)[..., None, :]
    return M @ np.swapaxes(M, -1, -2)


def build_covariance_vjp(log_scale, q, dL_dcov):
    R = quat_to_rotation(q)
    s = np.exp(log_scale)
    M = R * s[..., None, :]
    dL_dM = (dL_dcov + np.swapaxes(dL_dcov, -1, -2)) @ M
    dL_ds = np.sum(R * dL_dM, axis=-2)
    dL_dR = dL_dM * s[..., None, :]
    return dL_ds * s, quat_to_rotation_vjp(q, dL_dR)


# ---------------------------------------------------------------------------
# projection


@dataclass
class ProjectedGaussian:
    mean2d: np.ndarray
    cov2d: np.ndarray
    depth: float
    view_color: np.ndarray | None = None

    @property
    def conic(self):
        return np.linalg.inv(self.cov2d)


def _camera_frame(means, cam):
    return means @ cam.rotation.T + cam.translation


def _projection_jacobian(t, cam):
    tx, ty, tz = np.moveaxis(t, -1, 0)
    J = np.zeros(t.shape[:-1] + (2, 3))
    J[..., 0, 0] = cam.fx / tz
    J[..., 0, 2] = -cam.fx * tx / tz**2
    J[..., 1, 1] = cam.fy / tz
    J[..., 1, 2] = -cam.fy * ty / tz**2
    return J


def project_gaussians(means, cov3d, cam):
    """Batched splat projection.

    Returns ``(mean2d, cov2d, depth, visible)``. Gaussians in front of the near
    plane whose 3-sigma box misses the image, or which lie behind it, have
    ``visible == False``; their other outputs are still filled in where finite.
    """
    means = np.asarray(means, dtype=np.float64)
    t = _camera_frame(means, cam)
    tz = t[..., 2]
    in_front = tz > NEAR_PLANE
    safe_z = np.where(in_front, tz, 1.0)
    ts = t.copy()
    ts[..., 2] = safe_z
    mean2d = np.stack([cam.fx * ts[..., 0] / safe_z + cam.cx, cam.fy * ts[..., 1] / safe_z + cam.cy], axis=-1)
    T = _projection_jacobian(ts, cam) @ cam.rotation
    cov2d = T @ cov3d @ np.swapaxes(T, -1, -2) + LOW_PASS * np.eye(2)
    hx = FOOTPRINT_SIGMAS * np.sqrt(cov2d[..., 0, 0])
    hy = FOOTPRINT_SIGMAS * np.sqrt(cov2d[..., 1, 1])
    on_screen = (
        (mean2d[..., 0] + hx >= 0)
        & (mean2d[..., 0] - hx <= cam.width - 1)
        & (mean2d[..., 1] + hy >= 0)
        & (mean2d[..., 1] - hy <= cam.height - 1)
    )
    return mean2d, cov2d, tz, in_front & on_screen


def project_gaussian(mean, cov3d, cam):
    """Project one Gaussian; ``None`` when culled."""
    mean2d, cov2d, depth, visible = project_gaussians(np.asarray(mean)[None], np.asarray(cov3d)[None], cam)
    if not visible[0]:
        return None
    return ProjectedGaussian(mean2d[0], cov2d[0], float(depth[0]))


def project_gaussians_vjp(means, cov3d, cam, dL_dmean2d, dL_dcov2d):
    """Cotangents of (means, cov3d) given those of (mean2d, cov2d)."""
    t = _camera_frame(means, cam)
    tx, ty, tz = np.moveaxis(t, -1, 0)
    fx, fy = cam.fx, cam.fy
    W = cam.rotation
    J = _projection_jacobian(t, cam)
    T = J @ W
    TS = T @ cov3d
    dL_dcov3d = np.swapaxes(T, -1, -2) @ dL_dcov2d @ T
    dL_dT = dL_dcov2d @ T @ np.swapaxes(cov3d, -1, -2) + np.swapaxes(dL_dcov2d, -1, -2) @ TS
    dJ = dL_dT @ W.T

    inv_z2 = 1.0 / tz**2
    inv_z3 = inv_z2 / tz
    dt = np.zeros_like(t)
    # mean2d = (fx tx / tz + cx, fy ty / tz + cy)
    gx, gy = dL_dmean2d[..., 0], dL_dmean2d[..., 1]
    dt[..., 0] = gx * fx / tz
    dt[..., 1] = gy * fy / tz
    dt[..., 2] = -(gx * fx * tx + gy * fy * ty) * inv_z2
    # entries of J
    dt[..., 0] += -dJ[..., 0, 2] * fx * inv_z2
    dt[..., 1] += -dJ[..., 1, 2] * fy * inv_z2
    dt[..., 2] += (
        -dJ[..., 0, 0] * fx * inv_z2
        - dJ[..., 1, 1] * fy * inv_z2
        + 2 * dJ[..., 0, 2] * fx * tx * inv_z3
        + 2 * dJ[..., 1, 2] * fy * ty * inv_z3
    )
    return dt @ W, dL_dcov3d


# ---------------------------------------------------------------------------
# 2D Gaussian


def eval_gaussian_2d(mean2d, cov2d, x):
    d = np.asarray(x, dtype=np.float64) - mean2d
    A = np.linalg.inv(cov2d)
    return np.exp(-0.5 * np.einsum("...i,...ij,...j->...", d, A, d))


def eval_gaussian_2d_vjp(mean2d, cov2d, x, dL_dG):
    """Cotangents of (mean2d, cov2d, x)."""
    d = np.asarray(x, dtype=np.float64) - mean2d
    A = np.linalg.inv(cov2d)
    G = np.exp(-0.5 * np.einsum("...i,...ij,...j->...", d, A, d))
    gG = np.asarray(dL_dG) * G
    Ad = np.einsum("...ij,...j->...i", A, d)
    d_mean = gG[..., None] * Ad
    dL_dA = -0.5 * gG[..., None, None] * d[..., :, None] * d[..., None, :]
    d_cov = -np.swapaxes(A, -1, -2) @ dL_dA @ np.swapaxes(A, -1, -2)
    return d_mean, d_cov, -d_mean


# ---------------------------------------------------------------------------
# spherical harmonics


def sh_basis(dirs, degree=3):
    """Real SH basis values, shape (..., (degree + 1) ** 2)."""
    x, y, z = np.moveaxis(np.asarray(dirs, dtype=np.float64), -1, 0)
    out = [np.full_like(x, SH_C0)]
    if degree >= 1:
        out += [-SH_C1 * y, SH_C1 * z, -SH_C1 * x]
    if degree >= 2:
        xx, yy, zz = x * x, y * y, z * z
        out += [
            SH_C2[0] * x * y,
            SH_C2[1] * y * z,
            SH_C2[2] * (2 * zz - xx - yy),
            SH_C2[3] * x * z,
            SH_C2[4] * (xx - yy),
        ]
    if degree >= 3:
        out += [
            SH_C3[0] * y * (3 * xx - yy),
            SH_C3[1] * x * y * z,
            SH_C3[2] * y * (4 * zz - xx - yy),
            SH_C3[3] * z * (2 * zz - 3 * xx - 3 * yy),
            SH_C3[4] * x * (4 * zz - xx - yy),
            SH_C3[5] * z * (xx - yy),
            SH_C3[6] * x * (xx - 3 * yy),
        ]
    return np.stack(out, axis=-1)


def sh_basis_grad(dirs, degree=3):
    """d basis / d dir, shape (..., (degree + 1) ** 2, 3)."""
    x, y, z = np.moveaxis(np.asarray(dirs, dtype=np.float64), -1, 0)
    o = np.zeros_like(x)
    rows = [(o, o, o)]
    if degree >= 1:
        c = SH_C1
        rows += [(o, o - c, o), (o, o, o + c), (o - c, o, o)]
    if degree >= 2:
        c = SH_C2
        rows += [
            (c[0] * y, c[0] * x, o),
            (o, c[1] * z, c[1] * y),
            (-2 * c[2] * x, -2 * c[2] * y, 4 * c[2] * z),
            (c[3] * z, o, c[3] * x),
            (2 * c[4] * x, -2 * c[4] * y, o),
        ]
    if degree >= 3:
        c = SH_C3
        xx, yy, zz = x * x, y * y, z * z
        rows += [
            (c[0] * 6 * x * y, c[0] * (3 * xx - 3 * yy), o),
            (c[1] * y * z, c[1] * x * z, c[1] * x * y),
            (c[2] * -2 * x * y, c[2] * (4 * zz - xx - 3 * yy), c[2] * 8 * y * z),
            (c[3] * -6 * x * z, c[3] * -6 * y * z, c[3] * (6 * zz - 3 * xx - 3 * yy)),
            (c[4] * (4 * zz - 3 * xx - yy), c[4] * -2 * x * y, c[4] * 8 * x * z),
            (c[5] * 2 * x * z, c[5] * -2 * y * z, c[5] * (xx - yy)),
            (c[6] * (3 * xx - 3 * yy), c[6] * -6 * x * y, o),
        ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def eval_sh(coeffs, dirs, degree_active):
    """View-dependent RGB: SH expansion up to ``degree_active`` plus 0.5, clamped at 0."""
    n = (degree_active + 1) ** 2
    basis = sh_basis(dirs, degree_active)
    raw = np.einsum("...k,...kc->...c", basis, np.asarray(coeffs)[..., :n, :])
    return np.maximum(raw + 0.5, 0.0)


def eval_sh_vjp(coeffs, dirs, degree_active, dL_drgb):
    """Cotangents of (coeffs, dirs); ``coeffs`` keeps its full 16-row shape."""
    coeffs = np.asarray(coeffs)
    n = (degree_active + 1) ** 2
    basis = sh_basis(dirs, degree_active)
    raw = np.einsum("...k,...kc->...c", basis, coeffs[..., :n, :])
    g = np.where(raw + 0.5 > 0, dL_drgb, 0.0)
    d_coeffs = np.zeros_like(coeffs, dtype=np.float64)
    d_coeffs[..., :n, :] = basis[..., :, None] * g[..., None, :]
    d_basis = np.einsum("...kc,...c->...k", coeffs[..., :n, :], g)
    d_dirs = np.einsum("...k,...kd->...d", d_basis, sh_basis_grad(dirs, degree_active))
    return d_coeffs, d_dirs


def view_directions(means, cam_center):
    v = means - cam_center
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def view_directions_vjp(means, cam_center, dL_ddir):
    v = means - cam_center
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    d = v / norm
    return (dL_ddir - d * np.sum(dL_ddir * d, axis=-1, keepdims=True)) / norm

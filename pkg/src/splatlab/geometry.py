"""Point-cloud extraction, registration and comparison metrics."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .model import PointCloud, sh_dc_to_rgb


class DegenerateCorrespondence(RuntimeError):
    pass


@dataclass
class RigidTransform:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if abs(np.linalg.det(self.rotation) - 1.0) > 1e-9:
            raise ValueError("rotation determinant must be +1")

    def apply(self, points):
        return np.asarray(points) @ self.rotation.T + self.translation

    def compose(self, other):
        """``self`` after ``other``."""
        return RigidTransform(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def inverse(self):
        return RigidTransform(self.rotation.T, -self.rotation.T @ self.translation)


class NearestNeighborIndex:
    """Exact nearest-neighbor queries over a fixed point set (k-d tree)."""

    def __init__(self, points):
        self.points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if len(self.points) == 0:
            raise ValueError("cannot index an empty point set")
        self._tree = cKDTree(self.points)

    def __len__(self):
        return len(self.points)

    def query(self, queries, k=1):
        """Return ``(squared_distances, indices)``; shapes gain a trailing ``k`` axis when ``k > 1``."""
        queries = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
        _, idx = self._tree.query(queries, k=k)
        diff = queries[:, None, :] - self.points[np.atleast_2d(idx.T).T]
        sq = np.sum(diff * diff, axis=-1)
        if k == 1:
            return sq[:, 0], idx
        return sq, idx


def _nonempty(*clouds):
    for pc in clouds:
        if len(pc) == 0:
            raise ValueError("point cloud is empty")


def extract_point_cloud(model, min_opacity=0.0):
    """Gaussian means (and DC colors) of every Gaussian at least ``min_opacity`` opaque."""
    keep = model.opacities >= min_opacity
    return PointCloud(model.means[keep].copy(), sh_dc_to_rgb(model.sh_coeffs[keep, 0]))


def crop_aabb(pc, box_min, box_max):
    lo = np.asarray(box_min, dtype=np.float64)
    hi = np.asarray(box_max, dtype=np.float64)
    if np.any(lo >= hi):
        raise ValueError(f"crop box is inverted or empty: min={lo}, max={hi}")
    inside = np.all((pc.positions >= lo) & (pc.positions <= hi), axis=1)
    return pc.subset(inside)


def estimate_normals(pc, k=8, return_degenerate=False):
    """PCA normals from each point's ``k`` nearest neighbors (the point included).

    Normals are oriented toward +z; points with z-less normals get their first
    nonzero component positive. Neighborhoods whose two smallest eigenvalues
    coincide get the fallback normal ``(0, 0, 1)`` and a warning.
    """
    n = len(pc)
    if k < 2 or n <= k:
        raise ValueError(f"need more than k={k} points (and k >= 2), got {n}")
    _, idx = NearestNeighborIndex(pc.positions).query(pc.positions, k=k)
    nbrs = pc.positions[idx]
    centered = nbrs - nbrs.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k
    evals, evecs = np.linalg.eigh(cov)
    normals = evecs[:, :, 0]
    degenerate = (evals[:, 1] - evals[:, 0]) <= 1e-9 * np.maximum(evals[:, 2], 1e-300)
    if degenerate.any():
        warnings.warn(f"{int(degenerate.sum())} degenerate neighborhood(s); using fallback normal (0, 0, 1)")
        normals[degenerate] = (0.0, 0.0, 1.0)

    # sign: +z, then +x, then +y
    ordered = normals[:, [2, 0, 1]]
    first = np.argmax(np.abs(ordered) > 1e-12, axis=1)
    normals[ordered[np.arange(n), first] < 0] *= -1
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    out = PointCloud(pc.positions, pc.colors, normals)
    if return_degenerate:
        return out, degenerate
    return out


def fit_rigid(src, dst, iteration=None):
    """Least-squares rotation and translation mapping ``src`` rows onto ``dst`` rows."""
    cs = src.mean(axis=0)
    cd = dst.mean(axis=0)
    H = (src - cs).T @ (dst - cd)
    U, s, Vt = np.linalg.svd(H)
    if len(src) < 3 or s[1] <= 1e-12 * max(s[0], 1e-300):
        where = "" if iteration is None else f" at iteration {iteration}"
        raise DegenerateCorrespondence(f"cross-covariance is rank deficient{where}")
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(Vt.T @ U.T))])
    R = Vt.T @ D @ U.T
    return RigidTransform(R, cd - R @ cs)


def icp_register(src, ref, max_iters=100, tol=1e-10, reject_factor=3.0, init="centroid"):
    """Point-to-point ICP aligning ``src`` onto ``ref``.

    Returns the transform mapping ``src`` into ``ref``'s frame and the RMSE
    (over all source points) after each iteration. Pairs farther than
    ``reject_factor`` times the median pair distance are ignored by the fit.
    An update that would raise the RMSE is discarded and iteration stops, so
    the history never increases.
    """
    _nonempty(src, ref)
    index = NearestNeighborIndex(ref.positions)
    pts = src.positions
    if init == "centroid":
        current = RigidTransform(np.eye(3), ref.positions.mean(0) - pts.mean(0))
    else:
        current = RigidTransform()
    sq, idx = index.query(current.apply(pts))
    rmse = float(np.sqrt(sq.mean()))
    if init == "centroid":
        sq0, _ = index.query(pts)
        rmse0 = float(np.sqrt(sq0.mean()))
        if rmse0 <= rmse:
            current, rmse = RigidTransform(), rmse0
            sq, idx = sq0, _

    history = []
    for it in range(1, max_iters + 1):
        moved = current.apply(pts)
        d = np.sqrt(sq)
        inlier = d <= reject_factor * np.median(d)
        if inlier.sum() < 3:
            inlier[:] = True
        step = fit_rigid(moved[inlier], ref.positions[idx[inlier]], iteration=it)
        candidate = step.compose(current)
        sq_new, idx_new = index.query(candidate.apply(pts))
        rmse_new = float(np.sqrt(sq_new.mean()))
        if rmse_new > rmse:
            history.append(rmse)
            break
        current, sq, idx = candidate, sq_new, idx_new
        improvement = rmse - rmse_new
        rmse = rmse_new
        history.append(rmse)
        if improvement < tol:
            break
    return current, history


def d1_mse(src, ref):
    """Mean squared distance from each ``src`` point to its nearest ``ref`` point."""
    _nonempty(src, ref)
    sq, _ = NearestNeighborIndex(ref.positions).query(src.positions)
    return float(sq.mean())


def d2_mse(src, ref):
    """Mean squared point-to-plane distance using the nearest ``ref`` point's normal."""
    _nonempty(src, ref)
    if ref.normals is None:
        raise ValueError("reference cloud has no normals (see estimate_normals)")
    _, idx = NearestNeighborIndex(ref.positions).query(src.positions)
    proj = np.sum((src.positions - ref.positions[idx]) * ref.normals[idx], axis=1)
    return float(np.mean(proj * proj))


def _directed_distances(a, b):
    sq, _ = NearestNeighborIndex(b.positions).query(a.positions)
    return np.sqrt(sq)


def hausdorff(a, b):
    _nonempty(a, b)
    return float(max(_directed_distances(a, b).max(), _directed_distances(b, a).max()))


def chamfer(a, b):
    """Sum of the two mean nearest-neighbor (unsquared) distances."""
    _nonempty(a, b)
    return float(_directed_distances(a, b).mean() + _directed_distances(b, a).mean())


def compare_point_clouds(src, ref, normals_k=8):
    """All four metrics of ``src`` against ``ref``; estimates ``ref`` normals if absent."""
    if ref.normals is None:
        ref = estimate_normals(ref, k=min(normals_k, len(ref) - 1))
    return {
        "d1_mse": d1_mse(src, ref),
        "d2_mse": d2_mse(src, ref),
        "hausdorff": hausdorff(src, ref),
        "chamfer": chamfer(src, ref),
    }

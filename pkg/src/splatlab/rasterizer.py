"""Tile-based splat rasterizer with an exact backward pass.

Gaussians are projected and shaded per view in numpy, binned into square
tiles, and blended front to back per pixel by numba kernels that run one
tile per work item. The backward kernel walks each pixel's list back to
front, recovering the transmittance from the saved terminal value, and
writes gradients per (tile, Gaussian) entry. Entries are reduced to
Gaussians in a fixed order, so results do not depend on the thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from . import gaussian_math as gm
from .model import GaussianModel, sigmoid

ALPHA_MAX = 0.99
ALPHA_MIN = 1.0 / 255.0
T_MIN = 1e-4


@dataclass
class TileBinning:
    """Per-view rasterization state saved by the forward pass.

    ``tile_ranges[t]`` is the ``[start, end)`` slice of ``gaussian_ids`` for
    tile ``t`` (row-major tile order); within a slice depths are nondecreasing.
    """

    tiles_x: int
    tiles_y: int
    tile_size: int
    gaussian_ids: np.ndarray
    depths: np.ndarray
    tile_ranges: np.ndarray
    final_T: np.ndarray | None = None
    n_contrib: np.ndarray | None = None
    num_gaussians: int = 0

    def tile_list(self, tx, ty):
        start, end = self.tile_ranges[ty * self.tiles_x + tx]
        return self.gaussian_ids[start:end]


@dataclass
class RenderGrads:
    means: np.ndarray
    log_scales: np.ndarray
    rotations: np.ndarray
    opacity_logits: np.ndarray
    sh_coeffs: np.ndarray
    viewspace_grad_norm: np.ndarray
    seen_count: np.ndarray

    PARAM_FIELDS = GaussianModel.PARAM_FIELDS

    @classmethod
    def zeros_like(cls, model):
        n = len(model)
        return cls(
            *(np.zeros_like(getattr(model, f)) for f in cls.PARAM_FIELDS),
            viewspace_grad_norm=np.zeros(n),
            seen_count=np.zeros(n, dtype=np.int64),
        )

    def params(self):
        return {f: getattr(self, f) for f in self.PARAM_FIELDS}


@dataclass
class Projection:
    """Per-view, per-Gaussian quantities needed by both passes."""

    cov3d: np.ndarray
    mean2d: np.ndarray
    cov2d: np.ndarray
    conic: np.ndarray  # (N, 3): A00, A01, A11 of the inverse 2D covariance
    depth: np.ndarray
    visible: np.ndarray
    dirs: np.ndarray
    colors: np.ndarray
    opacity: np.ndarray


def preprocess(model, cam):
    n = len(model)
    cov3d = gm.build_covariance(model.log_scales, model.rotations) if n else np.zeros((0, 3, 3))
    mean2d, cov2d, depth, visible = gm.project_gaussians(model.means, cov3d, cam)
    det = cov2d[:, 0, 0] * cov2d[:, 1, 1] - cov2d[:, 0, 1] * cov2d[:, 1, 0]
    conic = np.stack([cov2d[:, 1, 1] / det, -cov2d[:, 0, 1] / det, cov2d[:, 0, 0] / det], axis=1)
    dirs = gm.view_directions(model.means, cam.center) if n else np.zeros((0, 3))
    colors = gm.eval_sh(model.sh_coeffs, dirs, model.sh_degree_active) if n else np.zeros((0, 3))
    return Projection(cov3d, mean2d, cov2d, conic, depth, visible, dirs, colors, sigmoid(model.opacity_logits))


def bin_and_sort(mean2d, cov2d, depth, visible, width, height, tile_size=16):
    """Assign visible Gaussians to every tile their 3-sigma box overlaps.

    Within a tile, entries are ordered by depth, ties broken by index.
    """
    tiles_x = -(-width // tile_size)
    tiles_y = -(-height // tile_size)
    idx = np.flatnonzero(visible)
    hx = gm.FOOTPRINT_SIGMAS * np.sqrt(cov2d[idx, 0, 0])
    hy = gm.FOOTPRINT_SIGMAS * np.sqrt(cov2d[idx, 1, 1])
    mx, my = mean2d[idx, 0], mean2d[idx, 1]
    x0 = np.floor(np.clip(mx - hx, 0, width - 1) / tile_size).astype(np.int64)
    x1 = np.floor(np.clip(mx + hx, 0, width - 1) / tile_size).astype(np.int64)
    y0 = np.floor(np.clip(my - hy, 0, height - 1) / tile_size).astype(np.int64)
    y1 = np.floor(np.clip(my + hy, 0, height - 1) / tile_size).astype(np.int64)
    nx = x1 - x0 + 1
    counts = nx * (y1 - y0 + 1)

    owner = np.repeat(np.arange(len(idx)), counts)
    local = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    tx = x0[owner] + local % nx[owner]
    ty = y0[owner] + local // nx[owner]
    tile = ty * tiles_x + tx
    gid = idx[owner]
    d = depth[gid]
    order = np.lexsort((gid, d, tile))
    tile, gid, d = tile[order], gid[order], d[order]

    bounds = np.searchsorted(tile, np.arange(tiles_x * tiles_y + 1))
    ranges = np.stack([bounds[:-1], bounds[1:]], axis=1)
    return TileBinning(tiles_x, tiles_y, tile_size, gid.astype(np.int64), d, ranges, num_gaussians=len(mean2d))


@numba.njit(parallel=True, cache=True)
def _forward_kernel(ids, ranges, tiles_x, tile_size, width, height, mean2d, conic, opacity, colors, bg,
                    image, final_T, n_contrib):
    n_tiles = ranges.shape[0]
    for t in numba.prange(n_tiles):
        start, end = ranges[t, 0], ranges[t, 1]
        ty0 = (t // tiles_x) * tile_size
        tx0 = (t % tiles_x) * tile_size
        for py in range(ty0, min(ty0 + tile_size, height)):
            for px in range(tx0, min(tx0 + tile_size, width)):
                T = 1.0
                r = 0.0
                g = 0.0
                b = 0.0
                last = start
                for e in range(start, end):
                    gi = ids[e]
                    dx = px - mean2d[gi, 0]
                    dy = py - mean2d[gi, 1]
                    power = -0.5 * (conic[gi, 0] * dx * dx + conic[gi, 2] * dy * dy) - conic[gi, 1] * dx * dy
                    if power > 0.0:
                        continue
                    alpha = opacity[gi] * np.exp(power)
                    if alpha > ALPHA_MAX:
                        alpha = ALPHA_MAX
                    if alpha < ALPHA_MIN:
                        continue
                    w = alpha * T
                    r += colors[gi, 0] * w
                    g += colors[gi, 1] * w
                    b += colors[gi, 2] * w
                    T = T * (1.0 - alpha)
                    last = e + 1
                    if T < T_MIN:
                        break
                image[py, px, 0] = r + T * bg[0]
                image[py, px, 1] = g + T * bg[1]
                image[py, px, 2] = b + T * bg[2]
                final_T[py, px] = T
                n_contrib[py, px] = last - start


@numba.njit(parallel=True, cache=True)
def _backward_kernel(ids, ranges, tiles_x, tile_size, width, height, mean2d, conic, opacity, colors, bg,
                     final_T, n_contrib, dL_dimg, e_mean2d, e_conic, e_opacity, e_color, e_hit):
    n_tiles = ranges.shape[0]
    for t in numba.prange(n_tiles):
        start = ranges[t, 0]
        ty0 = (t // tiles_x) * tile_size
        tx0 = (t % tiles_x) * tile_size
        for py in range(ty0, min(ty0 + tile_size, height)):
            for px in range(tx0, min(tx0 + tile_size, width)):
                T = final_T[py, px]
                gr = dL_dimg[py, px, 0]
                gg = dL_dimg[py, px, 1]
                gb = dL_dimg[py, px, 2]
                # color of everything behind the current entry, including background
                sr = T * bg[0]
                sg = T * bg[1]
                sb = T * bg[2]
                for e in range(start + n_contrib[py, px] - 1, start - 1, -1):
                    gi = ids[e]
                    dx = px - mean2d[gi, 0]
                    dy = py - mean2d[gi, 1]
                    power = -0.5 * (conic[gi, 0] * dx * dx + conic[gi, 2] * dy * dy) - conic[gi, 1] * dx * dy
                    if power > 0.0:
                        continue
                    G = np.exp(power)
                    raw = opacity[gi] * G
                    alpha = raw
                    if alpha > ALPHA_MAX:
                        alpha = ALPHA_MAX
                    if alpha < ALPHA_MIN:
                        continue
                    one_minus = 1.0 - alpha
                    T = T / one_minus
                    w = alpha * T
                    e_hit[e] = 1
                    e_color[e, 0] += w * gr
                    e_color[e, 1] += w * gg
                    e_color[e, 2] += w * gb
                    cr = colors[gi, 0]
                    cg = colors[gi, 1]
                    cb = colors[gi, 2]
                    dL_dalpha = (T * cr - sr / one_minus) * gr + (T * cg - sg / one_minus) * gg \
                        + (T * cb - sb / one_minus) * gb
                    sr += cr * w
                    sg += cg * w
                    sb += cb * w
                    if raw > ALPHA_MAX:
                        continue
                    e_opacity[e] += G * dL_dalpha
                    dL_dpower = raw * dL_dalpha
                    # power = -0.5 (A00 dx^2 + 2 A01 dx dy + A11 dy^2)
                    e_mean2d[e, 0] += dL_dpower * (conic[gi, 0] * dx + conic[gi, 1] * dy)
                    e_mean2d[e, 1] += dL_dpower * (conic[gi, 1] * dx + conic[gi, 2] * dy)
                    e_conic[e, 0] += -0.5 * dL_dpower * dx * dx
                    e_conic[e, 1] += -dL_dpower * dx * dy
                    e_conic[e, 2] += -0.5 * dL_dpower * dy * dy


def rasterize(proj, binning, width, height, background):
    """Blend already-projected Gaussians; fills ``binning.final_T``/``n_contrib``."""
    image = np.empty((height, width, 3))
    binning.final_T = np.empty((height, width))
    binning.n_contrib = np.empty((height, width), dtype=np.int64)
    _forward_kernel(
        binning.gaussian_ids, binning.tile_ranges, binning.tiles_x, binning.tile_size, width, height,
        proj.mean2d, proj.conic, proj.opacity, proj.colors, np.asarray(background, dtype=np.float64),
        image, binning.final_T, binning.n_contrib,
    )
    return image


def render_forward(model, cam, cfg=None, background=None, tile_size=None, return_projection=False):
    """Render ``model`` from ``cam``. Returns ``(image, binning)``."""
    if background is None:
        background = cfg.background_color if cfg is not None else (0.0, 0.0, 0.0)
    if tile_size is None:
        tile_size = cfg.tile_size if cfg is not None else 16
    proj = preprocess(model, cam)
    binning = bin_and_sort(proj.mean2d, proj.cov2d, proj.depth, proj.visible, cam.width, cam.height, tile_size)
    image = rasterize(proj, binning, cam.width, cam.height, background)
    if return_projection:
        return image, binning, proj
    return image, binning


def render(model, cam, cfg=None, **kw):
    return render_forward(model, cam, cfg, **kw)[0]


def render_backward(model, cam, binning, dL_dimage, cfg=None, background=None, proj=None, grads=None):
    """Gradients of a scalar loss w.r.t. every model parameter.

    ``grads`` may be passed in to accumulate across views; the view-space
    gradient statistic is the norm of the loss gradient w.r.t. the projected
    mean expressed in normalized device coordinates (pixels scaled by
    half the image size).
    """
    n = len(model)
    if binning.num_gaussians != n or binning.final_T is None:
        raise ValueError(f"binning was built for {binning.num_gaussians} Gaussians, model has {n}")
    dL_dimage = np.asarray(dL_dimage, dtype=np.float64)
    if dL_dimage.shape != (cam.height, cam.width, 3):
        raise ValueError(f"gradient image shape {dL_dimage.shape} does not match camera")
    if background is None:
        background = cfg.background_color if cfg is not None else (0.0, 0.0, 0.0)
    if proj is None:
        proj = preprocess(model, cam)
    if grads is None:
        grads = RenderGrads.zeros_like(model)

    ids = binning.gaussian_ids
    E = len(ids)
    e_mean2d = np.zeros((E, 2))
    e_conic = np.zeros((E, 3))
    e_opacity = np.zeros(E)
    e_color = np.zeros((E, 3))
    e_hit = np.zeros(E, dtype=np.int64)
    _backward_kernel(
        ids, binning.tile_ranges, binning.tiles_x, binning.tile_size, cam.width, cam.height,
        proj.mean2d, proj.conic, proj.opacity, proj.colors, np.asarray(background, dtype=np.float64),
        binning.final_T, binning.n_contrib, dL_dimage,
        e_mean2d, e_conic, e_opacity, e_color, e_hit,
    )

    def reduce(x):
        out = np.zeros((n,) + x.shape[1:])
        np.add.at(out, ids, x)
        return out

    d_mean2d = reduce(e_mean2d)
    d_conic = reduce(e_conic)
    d_opacity = reduce(e_opacity)
    d_color = reduce(e_color)
    hit = np.zeros(n, dtype=bool)
    hit[ids[e_hit > 0]] = True

    sel = np.flatnonzero(hit)
    if len(sel):
        # conic -> cov2d: dL/dcov = -A^T dL/dA A^T
        A = np.linalg.inv(proj.cov2d[sel])
        gA = np.empty((len(sel), 2, 2))
        gA[:, 0, 0] = d_conic[sel, 0]
        gA[:, 0, 1] = gA[:, 1, 0] = 0.5 * d_conic[sel, 1]
        gA[:, 1, 1] = d_conic[sel, 2]
        d_cov2d = -np.swapaxes(A, -1, -2) @ gA @ np.swapaxes(A, -1, -2)

        means = model.means[sel]
        d_means, d_cov3d = gm.project_gaussians_vjp(means, proj.cov3d[sel], cam, d_mean2d[sel], d_cov2d)
        d_logs, d_rot = gm.build_covariance_vjp(model.log_scales[sel], model.rotations[sel], d_cov3d)
        d_sh, d_dirs = gm.eval_sh_vjp(model.sh_coeffs[sel], proj.dirs[sel], model.sh_degree_active, d_color[sel])
        d_means += gm.view_directions_vjp(means, cam.center, d_dirs)
        op = proj.opacity[sel]

        grads.means[sel] += d_means
        grads.log_scales[sel] += d_logs
        grads.rotations[sel] += d_rot
        grads.sh_coeffs[sel] += d_sh
        grads.opacity_logits[sel] += d_opacity[sel] * op * (1 - op)

        ndc = d_mean2d[sel] * np.array([0.5 * cam.width, 0.5 * cam.height])
        grads.viewspace_grad_norm[sel] += np.linalg.norm(ndc, axis=1)
        grads.seen_count[sel] += 1
    return grads

"""Optimization loop, Adam, and adaptive density control."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .model import GaussianModel, logit, new_model_from_pointcloud, sigmoid
from .rasterizer import RenderGrads, render_backward, render_forward

log = logging.getLogger(__name__)

OPACITY_RESET_CEILING = 0.01
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-15
SH_REST_LR_DIVISOR = 20.0


class TrainingDiverged(RuntimeError):
    pass


def compute_loss(render, truth, lam=0.2):
    """``(1 - lam) * L1 + lam * (1 - SSIM) / 2`` and its gradient w.r.t. ``render``."""
    render = np.asarray(render, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if render.shape != truth.shape:
        raise ValueError(f"render {render.shape} and ground truth {truth.shape} differ in shape")
    diff = render - truth
    l1 = np.abs(diff).mean()
    grad = (1 - lam) * np.sign(diff) / diff.size
    loss = (1 - lam) * l1
    if lam > 0:
        s, ds = metrics.ssim(render, truth, return_grad=True)
        loss += lam * (1 - s) / 2
        grad -= lam * ds / 2
    return float(loss), grad


def split_dataset(items, every_k=8):
    """Every ``every_k``-th item (starting with the first) goes to the test split."""
    if every_k < 2:
        raise ValueError("every_k must be at least 2")
    items = list(items)
    test = items[::every_k]
    train = [x for i, x in enumerate(items) if i % every_k]
    if items and not train:
        log.warning("only %d item(s); the training split is empty", len(items))
    return train, test


def position_lr(step, cfg):
    """Log-linear decay from ``lr_position_init`` (step 0) to ``lr_position_final``."""
    if cfg.iterations <= 0:
        return cfg.lr_position_init
    t = min(max(step / cfg.iterations, 0.0), 1.0)
    return math.exp((1 - t) * math.log(cfg.lr_position_init) + t * math.log(cfg.lr_position_final))


@dataclass
class Adam:
    """Adam with moments stored per model field so rows track densification."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step_count: int = 0
    betas: tuple = ADAM_BETAS
    eps: float = ADAM_EPS

    @classmethod
    def for_model(cls, model):
        return cls(
            m={f: np.zeros_like(a) for f, a in model.params().items()},
            v={f: np.zeros_like(a) for f, a in model.params().items()},
        )

    def step(self, model, grads, lrs):
        self.step_count += 1
        b1, b2 = self.betas
        c1 = 1 - b1**self.step_count
        c2 = 1 - b2**self.step_count
        for name, p in model.params().items():
            g = getattr(grads, name)
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= lrs[name] * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def select(self, index):
        for d in (self.m, self.v):
            for k in d:
                d[k] = d[k][index]

    def append_zeros(self, count):
        for d in (self.m, self.v):
            for k in d:
                d[k] = np.concatenate([d[k], np.zeros((count,) + d[k].shape[1:])])

    def zero_field(self, name):
        self.m[name][:] = 0
        self.v[name][:] = 0


def learning_rates(cfg, step):
    sh_lr = np.full((16, 1), cfg.lr_sh / SH_REST_LR_DIVISOR)
    sh_lr[0] = cfg.lr_sh
    return {
        "means": position_lr(step, cfg),
        "log_scales": cfg.lr_scale,
        "rotations": cfg.lr_rotation,
        "opacity_logits": cfg.lr_opacity,
        "sh_coeffs": sh_lr,
    }


def _concat(a, b):
    return GaussianModel(
        **{f: np.concatenate([getattr(a, f), getattr(b, f)]) for f in GaussianModel.PARAM_FIELDS},
        sh_degree_active=a.sh_degree_active,
    )


def densify_and_prune(model, grads, cfg, scene_extent, rng=None, optimizer=None):
    """Clone small and split large high-gradient Gaussians, then prune transparent ones.

    The trigger statistic is the view-space gradient norm averaged over the
    views in which each Gaussian was seen. Split children are drawn from the
    parent's own distribution with scales divided by ``cfg.split_scale_factor``;
    the parent is removed. ``optimizer`` rows, when given, follow the model.
    """
    if len(grads.viewspace_grad_norm) != len(model):
        raise ValueError("gradient statistics do not match the model")
    rng = np.random.default_rng(cfg.random_seed) if rng is None else rng
    n = len(model)
    g = grads.viewspace_grad_norm / np.maximum(grads.seen_count, 1)
    hot = g > cfg.densify_grad_threshold
    small = model.scales.max(axis=1) < cfg.split_size_threshold_fraction * scene_extent
    clone_idx = np.flatnonzero(hot & small)
    split_idx = np.flatnonzero(hot & ~small)

    clones = model.select(clone_idx)
    parents = model.select(split_idx)
    children = parents.select(np.repeat(np.arange(len(split_idx)), 2))
    if len(split_idx):
        from .gaussian_math import quat_to_rotation

        R = quat_to_rotation(children.rotations)
        z = rng.standard_normal((len(children), 3)) * children.scales
        children.means = children.means + np.einsum("nij,nj->ni", R, z)
        children.log_scales = children.log_scales - math.log(cfg.split_scale_factor)

    keep = np.ones(n, dtype=bool)
    keep[split_idx] = False
    out = _concat(_concat(model.select(keep), clones), children)
    if optimizer is not None:
        optimizer.select(keep)
        optimizer.append_zeros(len(clones) + len(children))

    alive = out.opacities >= cfg.prune_opacity_threshold
    if not alive.all():
        out = out.select(alive)
        if optimizer is not None:
            optimizer.select(alive)
    log.debug("densify: %d cloned, %d split, %d pruned -> %d", len(clone_idx), len(split_idx),
              int((~alive).sum()), len(out))
    return out


def reset_opacity(model, cfg=None, optimizer=None):
    """Clamp every activated opacity to at most 0.01 and clear opacity moments."""
    out = model.copy()
    ceiling = float(logit(OPACITY_RESET_CEILING))
    out.opacity_logits = np.minimum(out.opacity_logits, ceiling)
    if optimizer is not None:
        optimizer.zero_field("opacity_logits")
    return out


def _normalize_rotations(model):
    model.rotations /= np.linalg.norm(model.rotations, axis=1, keepdims=True)


def evaluate(model, views, cfg):
    """Mean PSNR/SSIM of ``model`` over ``(camera, image)`` pairs."""
    ps, ss = [], []
    for cam, img in views:
        out = render_forward(model, cam, cfg)[0]
        ps.append(metrics.psnr(out, img))
        ss.append(metrics.ssim(out, img))
    return float(np.mean(ps)), float(np.mean(ss))


def train(dataset, init_pc, cfg, test_views=None, model=None, callback=None):
    """Fit a Gaussian model to ``dataset``.

    ``dataset`` is a list of ``(Camera, image)`` pairs used for training; pass
    held-out pairs as ``test_views`` to have them evaluated every
    ``cfg.eval_interval`` iterations. Returns ``(model, log)`` where ``log`` is a
    list of dicts.
    """
    if not dataset:
        raise ValueError("training split is empty")
    rng = np.random.default_rng(cfg.random_seed)
    if model is None:
        model = new_model_from_pointcloud(init_pc, cfg.initial_opacity)
    else:
        model = model.copy()
    scene_extent = init_pc.bbox_diagonal() if init_pc is not None and len(init_pc) else 1.0
    opt = Adam.for_model(model)
    stats = RenderGrads.zeros_like(model)
    history = []
    order = []
    t0 = time.perf_counter()

    for it in range(1, cfg.iterations + 1):
        if not order:
            order = list(rng.permutation(len(dataset)))
        view = int(order.pop())
        cam, truth = dataset[view]

        image, binning, proj = render_forward(model, cam, cfg, return_projection=True)
        loss, dL = compute_loss(image, truth, cfg.lambda_dssim)
        if not math.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at iteration {it} (view {view}, {cam.image_id!r})")
        grads = render_backward(model, cam, binning, dL, cfg, proj=proj)
        stats.viewspace_grad_norm += grads.viewspace_grad_norm
        stats.seen_count += grads.seen_count

        opt.step(model, grads, learning_rates(cfg, it - 1))
        _normalize_rotations(model)

        if it % cfg.sh_degree_interval == 0 and model.sh_degree_active < cfg.max_sh_degree:
            model.sh_degree_active += 1

        densify_active = cfg.densify_until_iter <= 0 or it <= cfg.densify_until_iter
        if densify_active and it >= cfg.densify_start_iter and it % cfg.densify_interval == 0:
            model = densify_and_prune(model, stats, cfg, scene_extent, rng, opt)
            stats = RenderGrads.zeros_like(model)
        if it % cfg.opacity_reset_interval == 0:
            model = reset_opacity(model, cfg, opt)

        record = None
        if cfg.log_interval and it % cfg.log_interval == 0:
            record = {"iteration": it, "loss": loss, "train_psnr": metrics.psnr(image, truth),
                      "num_gaussians": len(model), "elapsed": time.perf_counter() - t0}
        if test_views and cfg.eval_interval and it % cfg.eval_interval == 0:
            record = record or {"iteration": it, "num_gaussians": len(model)}
            record["test_psnr"], record["test_ssim"] = evaluate(model, test_views, cfg)
        if record is not None:
            history.append(record)
            log.info(" ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in record.items()))
        if callback is not None:
            callback(it, model)
    return model, history

"""Command-line entry point: ``splatlab <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import geometry, io, metrics, trainer
from .model import TrainConfig
from .rasterizer import render

log = logging.getLogger("splatlab")


def _floats(text, count, what):
    vals = [float(v) for v in text.split(",")]
    if len(vals) != count:
        raise ValueError(f"{what} needs {count} comma-separated numbers, got {len(vals)}")
    return vals


def load_views(scene_dir, downsample=1):
    """``(bundle, [(camera, image), ...])`` for a COLMAP scene directory."""
    bundle = io.load_colmap_sparse(io.find_sparse_dir(scene_dir))
    views = []
    for i, cam in enumerate(bundle.cameras):
        img = io.read_image(bundle.image_path(i))
        if img.shape[:2] != (cam.height, cam.width):
            raise io.FormatError(
                f"image is {img.shape[1]}x{img.shape[0]}, camera says {cam.width}x{cam.height}",
                bundle.image_path(i),
            )
        if downsample > 1:
            cam = cam.scaled(downsample)
            img = io.downsample_image(img, downsample)[: cam.height, : cam.width]
        views.append((cam, np.clip(img, 0.0, 1.0)))
    return bundle, views


def cmd_train(args):
    cfg = io.load_config(args.config) if args.config else TrainConfig()
    bundle, views = load_views(args.scene, args.downsample)
    train_views, test_views = trainer.split_dataset(views, cfg.test_split_every)
    out = Path(args.out)
    (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(io.config_to_text(cfg))

    def checkpoint(it, model):
        if cfg.checkpoint_interval and it % cfg.checkpoint_interval == 0:
            io.write_gaussians(out / "checkpoints" / f"iter_{it:06d}.ply", model)

    model, history = trainer.train(train_views, bundle.sparse_cloud, cfg, test_views=test_views, callback=checkpoint)
    io.write_gaussians(out / "point_cloud.ply", model)
    with open(out / "metrics.log", "w") as fh:
        for rec in history:
            fh.write(" ".join(f"{k}={io.format_number(v)}" for k, v in rec.items()) + "\n")
    summary = {"num_gaussians": len(model)}
    if test_views:
        summary["test_psnr_mean"], summary["test_ssim_mean"] = trainer.evaluate(model, test_views, cfg)
    sys.stdout.write(io.format_metrics(summary))
    return 0


def cmd_render(args):
    model = io.read_gaussians(args.model)
    if args.pose:
        cam = io.read_pose(args.pose)
    else:
        if not args.scene:
            raise ValueError("--camera-id needs --scene")
        bundle = io.load_colmap_sparse(io.find_sparse_dir(args.scene))
        matches = [c for c in bundle.cameras if c.image_id == args.camera_id]
        if not matches:
            raise ValueError(f"no image named {args.camera_id!r} in {args.scene}")
        cam = matches[0]
    if args.downsample > 1:
        cam = cam.scaled(args.downsample)
    image = render(model, cam, background=_floats(args.background, 3, "--background"))
    io.write_image(args.out, np.clip(image, 0, 1))
    return 0


def cmd_eval(args):
    model = io.read_gaussians(args.model)
    _, views = load_views(args.scene, args.downsample)
    _, test_views = trainer.split_dataset(views, args.split_every)
    bg = _floats(args.background, 3, "--background")
    ps, ss = [], []
    for cam, truth in test_views:
        out = render(model, cam, background=bg)
        ps.append(metrics.psnr(out, truth))
        ss.append(metrics.ssim(out, truth))
        sys.stdout.write(f"# view {cam.image_id}\n" + io.format_metrics({"psnr": ps[-1], "ssim": ss[-1]}))
    sys.stdout.write(io.format_metrics({
        "test_views": len(test_views),
        "test_psnr_mean": float(np.mean(ps)),
        "test_ssim_mean": float(np.mean(ss)),
    }))
    return 0


def cmd_extract(args):
    model = io.read_gaussians(args.model)
    pc = geometry.extract_point_cloud(model, args.min_opacity)
    io.write_point_cloud(args.out, pc)
    sys.stdout.write(io.format_metrics({"points": len(pc)}))
    return 0


def cmd_compare(args):
    src = io.read_point_cloud(args.src)
    ref = io.read_point_cloud(args.ref)
    if args.crop:
        box = _floats(args.crop, 6, "--crop")
        src = geometry.crop_aabb(src, box[:3], box[3:])
        ref = geometry.crop_aabb(ref, box[:3], box[3:])
    if args.icp:
        tf, hist = geometry.icp_register(src, ref)
        src = src.transformed(tf.rotation, tf.translation)
        sys.stdout.write(io.format_metrics({"icp_iterations": len(hist), "icp_rmse": hist[-1]}))
    result = geometry.compare_point_clouds(src, ref, normals_k=args.normals_k)
    sys.stdout.write(io.format_metrics({"src_points": len(src), "ref_points": len(ref), **result}))
    return 0


def cmd_register(args):
    src = io.read_point_cloud(args.src)
    ref = io.read_point_cloud(args.ref)
    tf, hist = geometry.icp_register(src, ref, max_iters=args.max_iters, tol=args.tol)
    io.write_transform(args.out_transform, tf)
    sys.stdout.write(io.format_metrics({"icp_iterations": len(hist), "icp_rmse": hist[-1]}))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="splatlab", description="Gaussian splatting training and evaluation")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("train", help="train a model from a COLMAP scene")
    s.add_argument("--scene", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--downsample", type=int, default=1)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("render", help="render one view of a model")
    s.add_argument("--model", required=True)
    cam = s.add_mutually_exclusive_group(required=True)
    cam.add_argument("--camera-id")
    cam.add_argument("--pose")
    s.add_argument("--scene")
    s.add_argument("--out", required=True)
    s.add_argument("--downsample", type=int, default=1)
    s.add_argument("--background", default="0,0,0")
    s.set_defaults(func=cmd_render)

    s = sub.add_parser("eval", help="PSNR/SSIM on held-out views")
    s.add_argument("--model", required=True)
    s.add_argument("--scene", required=True)
    s.add_argument("--split-every", type=int, default=8)
    s.add_argument("--downsample", type=int, default=1)
    s.add_argument("--background", default="0,0,0")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("extract-pc", help="Gaussian means as a point cloud")
    s.add_argument("--model", required=True)
    s.add_argument("--min-opacity", type=float, default=0.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("compare-pc", help="D1/D2/Hausdorff/Chamfer between point clouds")
    s.add_argument("--src", required=True)
    s.add_argument("--ref", required=True)
    s.add_argument("--crop", help="xmin,ymin,zmin,xmax,ymax,zmax")
    s.add_argument("--icp", action="store_true")
    s.add_argument("--normals-k", type=int, default=8)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("register", help="ICP-align --src onto --ref")
    s.add_argument("--src", required=True)
    s.add_argument("--ref", required=True)
    s.add_argument("--out-transform", required=True)
    s.add_argument("--max-iters", type=int, default=100)
    s.add_argument("--tol", type=float, default=1e-10)
    s.set_defaults(func=cmd_register)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        sys.stderr.write(f"splatlab {args.command}: error: {msg}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())

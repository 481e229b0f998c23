"""
Fitting a student model to a synthetic teacher
==============================================

A random 200-Gaussian "teacher" is rendered from cameras spread around it.
A student starts from 500 jittered points and is trained on 5 of every 6
views; the remaining views measure novel-view quality. The full acceptance
run uses 5000 iterations; this demo defaults to fewer so it finishes in a
few minutes. Pass an iteration count as the first argument to change it.
"""

import logging
import sys
from pathlib import Path

import numpy as np

from splatlab import io, synthetic
from splatlab.model import TrainConfig
from splatlab.rasterizer import render
from splatlab.trainer import evaluate, split_dataset, train

logging.basicConfig(level=logging.INFO, format="%(message)s")
iterations = int(sys.argv[1]) if len(sys.argv) > 1 else 1500
out = Path("demo_output")
out.mkdir(exist_ok=True)

teacher = synthetic.random_teacher(200, seed=0)
cameras = synthetic.orbit_cameras(36, 128, 128, seed=0)
views = [(cam, render(teacher, cam)) for cam in cameras]
train_views, test_views = split_dataset(views, every_k=6)
print(f"{len(train_views)} training views, {len(test_views)} held-out views")

init = synthetic.jittered_points(teacher, count=500, seed=1)
cfg = TrainConfig(iterations=iterations, test_split_every=6, log_interval=250, eval_interval=500)
student, history = train(train_views, init, cfg, test_views=test_views)

psnr, ssim = evaluate(student, test_views, cfg)
print(f"held-out PSNR {psnr:.2f} dB, SSIM {ssim:.4f} with {len(student)} Gaussians")

# Side by side: ground truth | student render for the first held-out view.
cam, truth = test_views[0]
io.write_image(out / "student_vs_teacher.ppm", np.clip(np.hstack([truth, render(student, cam)]), 0, 1))
io.write_gaussians(out / "student.ply", student)

"""
Rendering a handful of Gaussians and checking their gradients
=============================================================

Builds three colored Gaussians by hand, renders them through the tiled
rasterizer, and compares one analytic gradient against a finite difference.
Output images go to ``demo_output/``.
"""

from pathlib import Path

import numpy as np

from splatlab import io
from splatlab.model import Camera, GaussianModel, logit, rgb_to_sh_dc
from splatlab.rasterizer import render, render_backward, render_forward
from splatlab.trainer import compute_loss

out = Path("demo_output")
out.mkdir(exist_ok=True)

# A red, a green and a blue blob at increasing depth, slightly overlapping.
colors = np.array([[1.0, 0.1, 0.1], [0.1, 1.0, 0.1], [0.1, 0.1, 1.0]])
sh = np.zeros((3, 16, 3))
sh[:, 0] = rgb_to_sh_dc(colors)
model = GaussianModel(
    means=np.array([[-0.3, 0.0, 0.0], [0.0, 0.1, 0.3], [0.3, -0.1, 0.6]]),
    log_scales=np.log([[0.3, 0.1, 0.1], [0.15, 0.15, 0.15], [0.1, 0.35, 0.1]]),
    rotations=np.tile([1.0, 0.0, 0.0, 0.0], (3, 1)),
    opacity_logits=logit(np.array([0.8, 0.7, 0.9])),
    sh_coeffs=sh,
)

# Camera on the -z side looking at the origin; x right, y down, z forward.
cam = Camera.look_at(eye=[0, 0, -3], target=[0, 0, 0], width=96, height=96, fov_deg=45, up=[0, -1, 0])
image = render(model, cam, background=(1.0, 1.0, 1.0))
io.write_image(out / "three_blobs.ppm", image)
print("rendered", image.shape, "mean color", image.reshape(-1, 3).mean(0).round(3))

# Pretend the target is a flat gray image and backpropagate the training loss.
target = np.full_like(image, 0.5)
image, binning, proj = render_forward(model, cam, background=(1.0, 1.0, 1.0), return_projection=True)
loss, dloss = compute_loss(image, target, lam=0.2)
grads = render_backward(model, cam, binning, dloss, background=(1.0, 1.0, 1.0), proj=proj)
print("loss", round(loss, 6))
print("d loss / d opacity logits", grads.opacity_logits)

# A central difference on the first Gaussian's opacity agrees with the analytic value
# (no pixel crosses a blending threshold for a step this small).
h = 1e-6
plus, minus = model.copy(), model.copy()
plus.opacity_logits[0] += h
minus.opacity_logits[0] -= h
fd = (compute_loss(render(plus, cam, background=(1.0, 1.0, 1.0)), target)[0]
      - compute_loss(render(minus, cam, background=(1.0, 1.0, 1.0)), target)[0]) / (2 * h)
print("finite difference", fd, "analytic", grads.opacity_logits[0])

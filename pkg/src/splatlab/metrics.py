"""Full-reference image metrics on ``(H, W, 3)`` float arrays."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b):
    a, b = _check_pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b, peak=1.0):
    """PSNR in dB; identical images give ``inf``."""
    err = mse(a, b)
    if err == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak**2 / err))


def gaussian_window_1d(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    x = np.arange(size) - (size - 1) / 2
    w = np.exp(-(x**2) / (2 * sigma**2))
    return w / w.sum()


@lru_cache(maxsize=32)
def _band(n, k=SSIM_WINDOW, sigma=SSIM_SIGMA):
    """(n - k + 1, n) matrix whose rows are the shifted 1D window."""
    w = gaussian_window_1d(k, sigma)
    M = np.zeros((n - k + 1, n))
    for i in range(n - k + 1):
        M[i, i:i + k] = w
    M.setflags(write=False)
    return M


def _filter_valid(x):
    """Separable valid-region Gaussian filter over the two leading axes."""
    y = np.tensordot(_band(x.shape[0]), x, axes=(1, 0))
    return np.swapaxes(np.tensordot(_band(x.shape[1]), y, axes=(1, 1)), 0, 1)


def _filter_transpose(m, shape):
    """Adjoint of ``_filter_valid``, scattering window values back onto pixels."""
    y = np.tensordot(_band(shape[0]).T, m, axes=(1, 0))
    return np.swapaxes(np.tensordot(_band(shape[1]).T, y, axes=(1, 1)), 0, 1)


def _ssim_terms(a, b):
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise ValueError(f"image {a.shape[1]}x{a.shape[0]} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    C1 = SSIM_K1**2
    C2 = SSIM_K2**2
    mu_a = _filter_valid(a)
    mu_b = _filter_valid(b)
    var_a = _filter_valid(a * a) - mu_a * mu_a
    var_b = _filter_valid(b * b) - mu_b * mu_b
    cov = _filter_valid(a * b) - mu_a * mu_b
    l_num = 2 * mu_a * mu_b + C1
    l_den = mu_a * mu_a + mu_b * mu_b + C1
    c_num = 2 * cov + C2
    c_den = var_a + var_b + C2
    smap = (l_num * c_num) / (l_den * c_den)
    return mu_a, mu_b, l_num, l_den, c_num, c_den, smap


def ssim_map(a, b):
    """Local SSIM over valid windows of the two leading axes; trailing axes pass through."""
    a, b = _check_pair(a, b)
    return _ssim_terms(a, b)[-1]


def ssim(a, b, return_grad=False):
    """Mean SSIM over valid 11x11 windows, averaged over channels.

    With ``return_grad`` also returns ``d SSIM / d a`` with the shape of ``a``.
    """
    a, b = _check_pair(a, b)
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
        squeeze = True
    else:
        squeeze = False
    mu_a, mu_b, l_num, l_den, c_num, c_den, smap = _ssim_terms(a, b)
    value = float(smap.mean())
    if not return_grad:
        return value

    scale = 1.0 / smap.size
    # partials of the local SSIM w.r.t. (mu_a, var_a, cov)
    d_mu_a = scale * (2 * mu_b * c_num / (l_den * c_den) - smap * 2 * mu_a / l_den)
    d_var_a = scale * (-smap / c_den)
    d_cov = scale * (2 * l_num / (l_den * c_den))
    # var_a = E[a^2] - mu_a^2 and cov = E[ab] - mu_a mu_b
    d_mu_total = d_mu_a - 2 * mu_a * d_var_a - mu_b * d_cov
    grad = (
        _filter_transpose(d_mu_total, a.shape)
        + 2 * a * _filter_transpose(d_var_a, a.shape)
        + b * _filter_transpose(d_cov, a.shape)
    )
    if squeeze:
        grad = grad[..., 0]
    return value, grad


def dssim(a, b):
    return (1.0 - ssim(a, b)) / 2.0

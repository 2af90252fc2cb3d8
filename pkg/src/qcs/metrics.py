"""Reconstruction quality metrics: MSE, PSNR, SSIM, up-to-scale cosine."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .exceptions import DimensionError, InputError

PSNR_CAP_DB = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass
class MetricReport:
    psnr: float
    ssim: float
    cosine: float
    mse: float


def mse(x, ref) -> float:
    x, ref = np.asarray(x, float), np.asarray(ref, float)
    if x.shape != ref.shape:
        raise DimensionError(f"shape mismatch {x.shape} vs {ref.shape}")
    return float(np.mean((x - ref) ** 2))


def psnr(x, ref, peak: float = 1.0) -> float:
    """10 log10(peak^2 / mse), capped at the 99 dB report sentinel."""
    if peak <= 0:
        raise InputError(f"peak must be > 0, got {peak}")
    err = mse(x, ref)
    if err == 0.0:
        return PSNR_CAP_DB
    return float(min(10.0 * np.log10(peak * peak / err), PSNR_CAP_DB))


def _gaussian_profile(size: int, sigma: float) -> np.ndarray:
    coords = np.arange(size) - (size - 1) / 2.0
    return np.exp(-(coords ** 2) / (2.0 * sigma * sigma))


def _ssim_single(x: np.ndarray, ref: np.ndarray) -> float:
    # Window shrinks (to the largest odd size) when the image is smaller
    # than 11x11 along an axis.
    wy = max(min(SSIM_WINDOW, x.shape[0] - (x.shape[0] + 1) % 2), 1)
    wx = max(min(SSIM_WINDOW, x.shape[1] - (x.shape[1] + 1) % 2), 1)
    window = np.outer(_gaussian_profile(wy, SSIM_SIGMA),
                      _gaussian_profile(wx, SSIM_SIGMA))
    window /= window.sum()

    def local(img):
        return convolve2d(img, window, mode="valid")

    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    mu_x, mu_r = local(x), local(ref)
    var_x = local(x * x) - mu_x ** 2
    var_r = local(ref * ref) - mu_r ** 2
    cov = local(x * ref) - mu_x * mu_r
    num = (2 * mu_x * mu_r + c1) * (2 * cov + c2)
    den = (mu_x ** 2 + mu_r ** 2 + c1) * (var_x + var_r + c2)
    return float(np.mean(num / den))


def ssim(x, ref) -> float:
    """Mean local SSIM, Gaussian 11x11 window sigma 1.5, dynamic range 1.

    Accepts 2D images or (H, W, channels) stacks; channels are averaged.
    """
    x, ref = np.asarray(x, float), np.asarray(ref, float)
    if x.shape != ref.shape:
        raise DimensionError(f"shape mismatch {x.shape} vs {ref.shape}")
    if x.ndim == 2:
        return _ssim_single(x, ref)
    if x.ndim == 3:
        return float(np.mean([_ssim_single(x[..., c], ref[..., c])
                              for c in range(x.shape[-1])]))
    raise DimensionError(f"ssim expects 2D or 3D images, got ndim={x.ndim}")


def cosine_similarity(x, ref) -> float:
    """<x, ref> / (|x| |ref|); scale-free, the right yardstick for 1-bit."""
    x, ref = np.ravel(np.asarray(x, float)), np.ravel(np.asarray(ref, float))
    if x.shape != ref.shape:
        raise DimensionError(f"shape mismatch {x.shape} vs {ref.shape}")
    ref_norm = np.linalg.norm(ref)
    if ref_norm == 0:
        raise InputError("reference vector is zero")
    x_norm = np.linalg.norm(x)
    if x_norm == 0:
        return 0.0
    return float(np.dot(x, ref) / (x_norm * ref_norm))


def evaluate(x, ref, image_shape=None, peak: float = 1.0) -> MetricReport:
    """Full report; SSIM uses image_shape when given, else a 1 x N strip."""
    x, ref = np.asarray(x, float), np.asarray(ref, float)
    if image_shape is not None:
        xi, ri = x.reshape(image_shape), ref.reshape(image_shape)
    else:
        xi, ri = x.reshape(1, -1), ref.reshape(1, -1)
    return MetricReport(
        psnr=psnr(x, ref, peak=peak),
        ssim=ssim(xi, ri),
        cosine=cosine_similarity(x, ref),
        mse=mse(x, ref),
    )

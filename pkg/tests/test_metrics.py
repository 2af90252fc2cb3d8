import numpy as np
import pytest

from qcs.exceptions import DimensionError, InputError
from qcs.metrics import (MetricReport, cosine_similarity, evaluate, mse, psnr,
                         ssim)


def test_psnr_identical_hits_cap():
    x = np.linspace(0, 1, 32)
    assert psnr(x, x) == 99.0


def test_psnr_formula():
    ref = np.zeros(100)
    x = np.full(100, 0.1)   # mse = 0.01
    assert psnr(x, ref) == pytest.approx(20.0, rel=1e-12)
    assert psnr(np.ones(100), ref) == pytest.approx(0.0, abs=1e-12)


def test_psnr_strictly_decreasing_in_mse():
    ref = np.zeros(50)
    errs = [1e-4, 1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0]
    values = [psnr(np.full(50, np.sqrt(e)), ref) for e in errs]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_psnr_peak_validation():
    with pytest.raises(InputError):
        psnr(np.zeros(4), np.zeros(4), peak=0.0)


def test_ssim_identical():
    rng = np.random.default_rng(0)
    img = rng.uniform(0, 1, size=(32, 32))
    assert ssim(img, img) == pytest.approx(1.0, rel=1e-12)


def test_ssim_constant_complement_degenerate():
    ref = np.full((16, 16), 0.5)
    assert ssim(1.0 - ref, ref) == pytest.approx(1.0, rel=1e-12)


def test_ssim_checkerboard_inverse_negative():
    yy, xx = np.mgrid[0:24, 0:24]
    board = ((yy + xx) % 2).astype(float)
    assert ssim(board, 1.0 - board) < 0.0


def test_ssim_symmetric():
    rng = np.random.default_rng(1)
    a = rng.uniform(0, 1, size=(20, 20))
    b = rng.uniform(0, 1, size=(20, 20))
    assert ssim(a, b) == pytest.approx(ssim(b, a), rel=1e-12)


def test_ssim_small_image_window_shrinks():
    rng = np.random.default_rng(2)
    img = rng.uniform(0, 1, size=(5, 7))
    assert ssim(img, img) == pytest.approx(1.0, rel=1e-12)


def test_ssim_channels_averaged():
    rng = np.random.default_rng(3)
    img = rng.uniform(0, 1, size=(16, 16, 3))
    per_channel = np.mean([ssim(img[..., c], img[..., c] * 0.5 + 0.1)
                           for c in range(3)])
    assert ssim(img, img * 0.5 + 0.1) == pytest.approx(per_channel, rel=1e-12)


def test_cosine_scale_invariance():
    rng = np.random.default_rng(4)
    x = rng.normal(size=64)
    assert cosine_similarity(3.0 * x, x) == pytest.approx(1.0, abs=1e-12)
    for c in (1e-6, 0.5, 7.0, 1e8):
        assert cosine_similarity(c * x, x) == pytest.approx(1.0, abs=1e-12)


def test_cosine_orthogonal_and_opposite():
    assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0
    x = np.array([0.3, -2.0, 1.1])
    assert cosine_similarity(-x, x) == pytest.approx(-1.0, abs=1e-12)


def test_cosine_zero_cases():
    assert cosine_similarity(np.zeros(3), np.ones(3)) == 0.0
    with pytest.raises(InputError):
        cosine_similarity(np.ones(3), np.zeros(3))


def test_mse_shape_mismatch():
    with pytest.raises(DimensionError):
        mse(np.zeros(3), np.zeros(4))


def test_evaluate_self_report():
    rng = np.random.default_rng(5)
    img = rng.uniform(0, 1, size=256)
    report = evaluate(img, img, image_shape=(16, 16))
    assert isinstance(report, MetricReport)
    assert report.psnr == 99.0
    assert report.ssim == pytest.approx(1.0, rel=1e-12)
    assert report.cosine == pytest.approx(1.0, abs=1e-12)
    assert report.mse == 0.0

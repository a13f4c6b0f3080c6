import math

import numpy as np
import pytest

from aquagate.errors import DimensionMismatchError, EmptyInputError, TooSmallError
from aquagate.images import ImageBuf
from aquagate.quality import (
    MetricSet,
    dataset_means,
    evaluate_pair,
    fsim,
    psnr,
    ssim,
    uciqe,
    uiqm,
)

from conftest import random_image, smooth_image
from oracles import fsim_oracle, ssim_oracle, uciqe_oracle, uiqm_oracle


def noisy_variant(img: ImageBuf, rng, sigma=0.03) -> ImageBuf:
    return ImageBuf(np.clip(img.data + rng.normal(0, sigma, img.data.shape), 0, 1))


# --- PSNR ---------------------------------------------------------------


def test_psnr_identity_caps_at_100(rng):
    img = random_image(rng)
    assert psnr(img, img) == 100.0


def test_psnr_uniform_error_closed_form():
    a = ImageBuf(np.full((16, 16, 3), 0.4))
    b = ImageBuf(np.full((16, 16, 3), 0.5))
    assert psnr(a, b) == pytest.approx(20.0, abs=1e-12)


def test_psnr_symmetry(rng):
    a, b = random_image(rng), random_image(rng)
    assert psnr(a, b) == psnr(b, a)


def test_psnr_dimension_mismatch(rng):
    with pytest.raises(DimensionMismatchError):
        psnr(random_image(rng, 16, 16), random_image(rng, 16, 17))


def test_psnr_decreases_with_noise_amplitude(rng):
    base = smooth_image(rng, 32, 32)
    values = []
    for sigma in (0.01, 0.05, 0.1):
        noise_rng = np.random.default_rng(99)
        values.append(psnr(base, noisy_variant(base, noise_rng, sigma)))
    assert values[0] > values[1] > values[2]


# --- SSIM ---------------------------------------------------------------


def test_ssim_identity_exact(rng):
    for _ in range(5):
        img = random_image(rng, 16, 20)
        assert ssim(img, img) == 1.0


def test_ssim_symmetry(rng):
    a = random_image(rng, 24, 24)
    b = noisy_variant(a, rng)
    assert ssim(a, b) == ssim(b, a)


def test_ssim_matches_sliding_window_oracle(rng):
    a = random_image(rng, 32, 32)
    b = noisy_variant(a, rng, 0.05)
    assert ssim(a, b) == pytest.approx(ssim_oracle(a.data, b.data), abs=1e-6)


def test_ssim_too_small(rng):
    with pytest.raises(TooSmallError):
        ssim(random_image(rng, 10, 32), random_image(rng, 10, 32))


# --- FSIM ---------------------------------------------------------------


def test_fsim_identity(rng):
    img = random_image(rng, 32, 32)
    value = fsim(img, img)
    assert 1 - 1e-9 <= value <= 1.0


def test_fsim_symmetry(rng):
    a = random_image(rng, 32, 32)
    b = noisy_variant(a, rng)
    assert fsim(a, b) == pytest.approx(fsim(b, a), abs=1e-12)


def test_fsim_matches_second_implementation(rng):
    for _ in range(3):
        a = smooth_image(rng, 40, 36)
        b = noisy_variant(a, rng, 0.08)
        assert fsim(a, b) == pytest.approx(fsim_oracle(a.data, b.data), abs=1e-3)


def test_fsim_too_small(rng):
    with pytest.raises(TooSmallError):
        fsim(random_image(rng, 16, 64), random_image(rng, 16, 64))


def test_fsim_constant_pair_defined_as_one():
    a = ImageBuf(np.full((32, 32, 3), 0.4))
    b = ImageBuf(np.full((32, 32, 3), 0.6))
    assert fsim(a, b) == 1.0


# --- UIQM ---------------------------------------------------------------


def test_uiqm_constant_gray_is_zero():
    assert uiqm(ImageBuf(np.full((16, 16, 3), 0.5))) == 0.0


def test_uiqm_matches_oracle(rng):
    for _ in range(3):
        img = random_image(rng, 16, 16)
        assert uiqm(img) == pytest.approx(uiqm_oracle(img.data), abs=1e-6)


def test_uiqm_contrast_stretch_never_decreases_sharpness(rng):
    # Blockwise log-ratio sharpness is scale invariant, so an unclipped
    # stretch can only leave UISM equal (up to float noise) or larger.
    # Ramp images keep every Sobel magnitude bounded away from zero.
    from aquagate.quality import _uism

    for _ in range(50):
        coeffs = 0.05 + 0.1 * rng.random((2, 3))
        ys, xs = np.mgrid[0:16, 0:16]
        data = 0.4 + coeffs[0][None, None, :] * (xs / 16)[:, :, None]
        data = data + coeffs[1][None, None, :] * (ys / 16)[:, :, None]
        low = ImageBuf(data)
        stretched = ImageBuf((low.data - 0.35) * 1.5)
        assert _uism(stretched) >= _uism(low) - 1e-9


def test_uiqm_too_small(rng):
    with pytest.raises(TooSmallError):
        uiqm(random_image(rng, 4, 16))


def test_uiqm_deterministic(rng):
    img = random_image(rng, 24, 24)
    assert uiqm(img) == uiqm(img)


# --- UCIQE --------------------------------------------------------------


def test_uciqe_constant_gray_is_zero():
    assert uciqe(ImageBuf(np.full((16, 16, 3), 0.5))) == 0.0


def test_uciqe_two_color_matches_hand_lab():
    data = np.empty((16, 16, 3))
    data[:, :8] = [0.8, 0.2, 0.1]
    data[:, 8:] = [0.1, 0.4, 0.7]
    img = ImageBuf(data)
    assert uciqe(img) == pytest.approx(uciqe_oracle(img.data), abs=1e-4)


def test_uciqe_matches_oracle_random(rng):
    img = random_image(rng, 12, 12)
    assert uciqe(img) == pytest.approx(uciqe_oracle(img.data), abs=1e-6)


def test_uciqe_deterministic(rng):
    img = random_image(rng, 24, 24)
    assert uciqe(img) == uciqe(img)


# --- aggregation ---------------------------------------------------------


def test_evaluate_pair_and_single_mean(rng):
    out = smooth_image(rng, 32, 32)
    gt = noisy_variant(out, rng)
    metrics = evaluate_pair(out, gt)
    means = dataset_means([metrics])
    assert means == metrics
    assert -1 <= metrics.ssim <= 1
    assert 0 < metrics.fsim <= 1
    assert 0 < metrics.psnr_db <= 100


def test_dataset_means_averages_fields():
    a = MetricSet(ssim=0.8, psnr_db=20.0, uiqm=1.0, uciqe=0.5, fsim=0.9)
    b = MetricSet(ssim=0.6, psnr_db=30.0, uiqm=2.0, uciqe=0.7, fsim=1.0)
    means = dataset_means([a, b])
    assert means.ssim == pytest.approx(0.7)
    assert means.psnr_db == pytest.approx(25.0)


def test_dataset_means_empty():
    with pytest.raises(EmptyInputError):
        dataset_means([])


def test_metrics_permuted_rows_still_deterministic(rng):
    img = random_image(rng, 24, 24)
    permuted = ImageBuf(img.data[::-1].copy())
    first = (uiqm(permuted), uciqe(permuted))
    second = (uiqm(permuted), uciqe(permuted))
    assert first == second

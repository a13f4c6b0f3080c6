"""Full- and no-reference image quality metrics.

Definitions and constants follow the metrics' original publications and are
pinned here so results are reproducible:

* PSNR on RGB mean-squared error with MAX=1, capped at 100 dB.
* SSIM on BT.601 luma, 11x11 Gaussian window sigma 1.5, K1=0.01, K2=0.03,
  L=1, valid-window map mean.
* FSIM on luma scaled to [0,255]: phase congruency from a log-Gabor bank
  (4 scales, 4 orientations, min wavelength 6, scale factor 2,
  sigma_on_f 0.55, angular ratio 1.2) and Scharr gradient magnitude;
  T1=0.85, T2=160.
* UIQM = 0.0282 UICM + 0.2953 UISM + 3.5753 UIConM with 0.1-per-tail
  trimmed opponent statistics, Sobel-edge EME and PLIP logAMEE over
  8x8-pixel blocks.
* UCIQE = 0.4680 sigma_chroma + 0.2745 contrast_l + 0.2576 mu_saturation
  in CIELab (sRGB, D65), chroma and L normalized by 100.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage, signal

from .errors import DimensionMismatchError, EmptyInputError, TooSmallError
from .images import ImageBuf, luma

PSNR_CAP_DB = 100.0

_SSIM_WIN = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03

_FSIM_T1 = 0.85
_FSIM_T2 = 160.0
_FSIM_SCALES = 4
_FSIM_ORIENTS = 4
_FSIM_MIN_WAVELENGTH = 6.0
_FSIM_MULT = 2.0
_FSIM_SIGMA_ONF = 0.55
_FSIM_DTHETA_RATIO = 1.2
_FSIM_NOISE_K = 2.0
_FSIM_EPS = 1e-4

_UIQM_C = (0.0282, 0.2953, 3.5753)
_UIQM_TRIM = 0.1
_UIQM_BLOCK = 8
_PLIP_GAMMA = 1026.0 / 255.0
# Edge magnitudes below this floor count as no edge. True zero gradients
# cancel only to ~1e-16 in float, and ln(max/min) would explode on that
# noise; real 8-bit-derived gradients are never below ~2e-3.
_EDGE_FLOOR = 1e-8

_UCIQE_C = (0.4680, 0.2745, 0.2576)

_METRIC_FIELDS = ("ssim", "psnr_db", "uiqm", "uciqe", "fsim")

#: Tag recorded in reports so numbers stay comparable across runs.
METRIC_DEFS_TAG = "luma-ssim/rgb-psnr/luma-fsim/v1"


@dataclass(frozen=True)
class MetricSet:
    ssim: float
    psnr_db: float
    uiqm: float
    uciqe: float
    fsim: float

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in _METRIC_FIELDS}


def _require_same_shape(a: ImageBuf, b: ImageBuf) -> None:
    if a.data.shape != b.data.shape:
        raise DimensionMismatchError(
            f"shapes {a.data.shape} and {b.data.shape} differ"
        )


def psnr(a: ImageBuf, b: ImageBuf) -> float:
    """Peak signal-to-noise ratio in dB over all pixels and channels, MAX=1."""
    _require_same_shape(a, b)
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(1.0 / mse))


@lru_cache(maxsize=8)
def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


def ssim(a: ImageBuf, b: ImageBuf) -> float:
    """Mean SSIM over valid 11x11 Gaussian windows of the luma planes."""
    _require_same_shape(a, b)
    if min(a.height, a.width) < _SSIM_WIN:
        raise TooSmallError(f"min side {min(a.height, a.width)} < {_SSIM_WIN}")
    x = luma(a).data
    y = luma(b).data
    win = _gaussian_window(_SSIM_WIN, _SSIM_SIGMA)

    def local(img):
        return signal.correlate2d(img, win, mode="valid")

    mu_x = local(x)
    mu_y = local(y)
    var_x = local(x * x) - mu_x * mu_x
    var_y = local(y * y) - mu_y * mu_y
    cov = local(x * y) - mu_x * mu_y
    c1 = _SSIM_K1**2
    c2 = _SSIM_K2**2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def _freq_grid(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    # Frequency coordinates in [-0.5, 0.5), quadrant-shifted so that the
    # zero frequency sits at index [0, 0].
    if w % 2:
        xs = np.arange(-(w - 1) // 2, (w - 1) // 2 + 1) / (w - 1)
    else:
        xs = np.arange(-(w // 2), w // 2) / w
    if h % 2:
        ys = np.arange(-(h - 1) // 2, (h - 1) // 2 + 1) / (h - 1)
    else:
        ys = np.arange(-(h // 2), h // 2) / h
    gx, gy = np.meshgrid(xs, ys)
    return np.fft.ifftshift(gx), np.fft.ifftshift(gy)


@lru_cache(maxsize=8)
def _log_gabor_bank(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-(orientation, scale) frequency filters and their spatial energies.

    Returns (filters[o, s, h, w], ifft_filters[o, s, h, w]) where the
    spatial versions are real inverse transforms scaled by sqrt(h*w),
    used for the noise-energy estimate.
    """
    gx, gy = _freq_grid(h, w)
    radius = np.sqrt(gx**2 + gy**2)
    radius[0, 0] = 1.0
    theta = np.arctan2(-gy, gx)
    sin_t, cos_t = np.sin(theta), np.cos(theta)

    lowpass = 1.0 / (1.0 + (np.sqrt(gx**2 + gy**2) / 0.45) ** (2 * 15))

    log_gabor = np.empty((_FSIM_SCALES, h, w))
    for s in range(_FSIM_SCALES):
        wavelength = _FSIM_MIN_WAVELENGTH * _FSIM_MULT**s
        f0 = 1.0 / wavelength
        lg = np.exp(-(np.log(radius / f0) ** 2) / (2.0 * math.log(_FSIM_SIGMA_ONF) ** 2))
        lg *= lowpass
        lg[0, 0] = 0.0
        log_gabor[s] = lg

    theta_sigma = math.pi / (_FSIM_ORIENTS * _FSIM_DTHETA_RATIO)
    spread = np.empty((_FSIM_ORIENTS, h, w))
    for o in range(_FSIM_ORIENTS):
        angle = o * math.pi / _FSIM_ORIENTS
        ds = sin_t * math.cos(angle) - cos_t * math.sin(angle)
        dc = cos_t * math.cos(angle) + sin_t * math.sin(angle)
        dtheta = np.abs(np.arctan2(ds, dc))
        spread[o] = np.exp(-(dtheta**2) / (2.0 * theta_sigma**2))

    filters = spread[:, None, :, :] * log_gabor[None, :, :, :]
    ifft_filters = np.real(np.fft.ifft2(filters)) * math.sqrt(h * w)
    filters.flags.writeable = False
    ifft_filters.flags.writeable = False
    return filters, ifft_filters


def phase_congruency(plane: np.ndarray) -> np.ndarray:
    """Phase congruency map of a 2-D plane (log-Gabor bank, noise-compensated)."""
    h, w = plane.shape
    filters, ifft_filters = _log_gabor_bank(h, w)
    im_fft = np.fft.fft2(plane)

    energy_all = np.zeros((h, w))
    an_all = np.zeros((h, w))
    for o in range(_FSIM_ORIENTS):
        eo = np.fft.ifft2(im_fft[None, :, :] * filters[o])  # (scales, h, w)
        an = np.abs(eo)
        sum_an = an.sum(axis=0)
        sum_e = eo.real.sum(axis=0)
        sum_o = eo.imag.sum(axis=0)

        x_energy = np.sqrt(sum_e**2 + sum_o**2) + _FSIM_EPS
        mean_e = sum_e / x_energy
        mean_o = sum_o / x_energy
        energy = (
            eo.real * mean_e[None] + eo.imag * mean_o[None]
            - np.abs(eo.real * mean_o[None] - eo.imag * mean_e[None])
        ).sum(axis=0)

        # Noise threshold from the smallest-scale response (Rayleigh model).
        em_n = float((filters[o, 0] ** 2).sum())
        median_e2n = float(np.median(an[0] ** 2))
        mean_e2n = -median_e2n / math.log(0.5)
        noise_power = mean_e2n / em_n
        sum_an2 = float((ifft_filters[o] ** 2).sum())
        sum_ai_aj = 0.0
        for s1 in range(_FSIM_SCALES - 1):
            sum_ai_aj += float(
                (ifft_filters[o, s1] * ifft_filters[o, s1 + 1 :].sum(axis=0)).sum()
            )
        noise_energy2 = 2.0 * noise_power * sum_an2 + 4.0 * noise_power * sum_ai_aj
        tau = math.sqrt(noise_energy2 / 2.0)
        noise_energy = tau * math.sqrt(math.pi / 2.0)
        noise_sigma = math.sqrt((2.0 - math.pi / 2.0) * tau**2)
        threshold = (noise_energy + _FSIM_NOISE_K * noise_sigma) / 1.7

        energy_all += np.maximum(energy - threshold, 0.0)
        an_all += sum_an

    return np.divide(
        energy_all, an_all, out=np.zeros_like(energy_all), where=an_all > 0
    )


def _scharr_magnitude(plane: np.ndarray) -> np.ndarray:
    dx = np.array([[3.0, 0.0, -3.0], [10.0, 0.0, -10.0], [3.0, 0.0, -3.0]]) / 16.0
    gx = ndimage.convolve(plane, dx, mode="constant", cval=0.0)
    gy = ndimage.convolve(plane, dx.T, mode="constant", cval=0.0)
    return np.sqrt(gx**2 + gy**2)


def fsim(a: ImageBuf, b: ImageBuf) -> float:
    """Feature similarity on the luma plane scaled to [0, 255].

    Degenerate case: if both phase-congruency maps are identically zero
    (phase-flat inputs) the score is defined as 1.0.
    """
    _require_same_shape(a, b)
    if min(a.height, a.width) < 32:
        raise TooSmallError(f"min side {min(a.height, a.width)} < 32")
    x = luma(a).data * 255.0
    y = luma(b).data * 255.0
    pc_x = phase_congruency(x)
    pc_y = phase_congruency(y)
    g_x = _scharr_magnitude(x)
    g_y = _scharr_magnitude(y)
    s_pc = (2.0 * pc_x * pc_y + _FSIM_T1) / (pc_x**2 + pc_y**2 + _FSIM_T1)
    s_g = (2.0 * g_x * g_y + _FSIM_T2) / (g_x**2 + g_y**2 + _FSIM_T2)
    pc_m = np.maximum(pc_x, pc_y)
    weight_total = float(pc_m.sum())
    if weight_total == 0.0:
        return 1.0
    return min(1.0, float((s_pc * s_g * pc_m).sum() / weight_total))


def _trimmed_stats(values: np.ndarray, trim: float = _UIQM_TRIM) -> tuple[float, float]:
    flat = np.sort(values, axis=None)
    cut = int(trim * flat.size)
    trimmed = flat[cut : flat.size - cut] if cut > 0 else flat
    mean = float(trimmed.mean())
    var = float(np.mean((trimmed - mean) ** 2))
    return mean, var


def _block_slices(h: int, w: int, block: int = _UIQM_BLOCK):
    for y0 in range(0, h, block):
        for x0 in range(0, w, block):
            yield slice(y0, min(y0 + block, h)), slice(x0, min(x0 + block, w))


def _uicm(img: ImageBuf) -> float:
    r = img.data[:, :, 0]
    g = img.data[:, :, 1]
    b = img.data[:, :, 2]
    rg = r - g
    yb = (r + g) / 2.0 - b
    mean_rg, var_rg = _trimmed_stats(rg)
    mean_yb, var_yb = _trimmed_stats(yb)
    return -0.0268 * math.sqrt(mean_rg**2 + mean_yb**2) + 0.1586 * math.sqrt(
        var_rg + var_yb
    )


def _sobel_magnitude(plane: np.ndarray) -> np.ndarray:
    sx = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
    gx = ndimage.correlate(plane, sx, mode="mirror")
    gy = ndimage.correlate(plane, sx.T, mode="mirror")
    return np.sqrt(gx**2 + gy**2)


def _eme(plane: np.ndarray) -> float:
    h, w = plane.shape
    total = 0.0
    count = 0
    for ys, xs in _block_slices(h, w):
        block = plane[ys, xs]
        mn = float(block.min())
        mx = float(block.max())
        if mn > _EDGE_FLOOR and mx > mn:
            total += math.log(mx / mn)
        count += 1
    return 2.0 * total / count


def _uism(img: ImageBuf) -> float:
    weights = (0.299, 0.587, 0.114)
    return sum(
        wgt * _eme(_sobel_magnitude(img.data[:, :, c])) for c, wgt in enumerate(weights)
    )


def _uiconm(img: ImageBuf) -> float:
    plane = luma(img).data
    gamma = _PLIP_GAMMA
    total = 0.0
    count = 0
    for ys, xs in _block_slices(plane.shape[0], plane.shape[1]):
        block = plane[ys, xs]
        mn = float(block.min())
        mx = float(block.max())
        count += 1
        if mx <= mn:
            continue  # degenerate block contributes 0
        top = gamma * (mx - mn) / (gamma - mn)
        bottom = mx + mn - mx * mn / gamma
        m = top / bottom
        total += m * math.log(m)
    w = 1.0 / count
    return gamma - gamma * (1.0 - total / gamma) ** w


def uiqm(img: ImageBuf) -> float:
    """Weighted colorfulness + sharpness + contrast, underwater-specific."""
    if min(img.height, img.width) < 8:
        raise TooSmallError(f"min side {min(img.height, img.width)} < 8")
    c1, c2, c3 = _UIQM_C
    return c1 * _uicm(img) + c2 * _uism(img) + c3 * _uiconm(img)


def _srgb_to_lab(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    linear = np.where(
        rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4
    )
    m = np.array(
        [
            [0.4124564, 0.3575761, 0.1804375],
            [0.2126729, 0.7151522, 0.0721750],
            [0.0193339, 0.1191920, 0.9503041],
        ]
    )
    xyz = linear @ m.T
    white = np.array([0.95047, 1.0, 1.08883])
    t = xyz / white
    delta = 6.0 / 29.0
    f = np.where(t > delta**3, np.cbrt(t), t / (3.0 * delta**2) + 4.0 / 29.0)
    l_chan = 116.0 * f[:, :, 1] - 16.0
    a_chan = 500.0 * (f[:, :, 0] - f[:, :, 1])
    b_chan = 200.0 * (f[:, :, 1] - f[:, :, 2])
    # Achromatic pixels have zero chroma by definition; pin it so rounding
    # in the two normalizations cannot leave ~1e-13 residue.
    gray = (rgb[:, :, 0] == rgb[:, :, 1]) & (rgb[:, :, 1] == rgb[:, :, 2])
    a_chan = np.where(gray, 0.0, a_chan)
    b_chan = np.where(gray, 0.0, b_chan)
    return l_chan, a_chan, b_chan


def uciqe(img: ImageBuf) -> float:
    """Chroma spread + luminance contrast + mean saturation in CIELab."""
    if min(img.height, img.width) < 8:
        raise TooSmallError(f"min side {min(img.height, img.width)} < 8")
    l_chan, a_chan, b_chan = _srgb_to_lab(img.data)
    chroma = np.sqrt(a_chan**2 + b_chan**2)
    sigma_chroma = float(np.std(chroma)) / 100.0
    contrast_l = float(np.percentile(l_chan, 99) - np.percentile(l_chan, 1)) / 100.0
    denom = np.sqrt(chroma**2 + l_chan**2)
    saturation = np.divide(
        chroma, denom, out=np.zeros_like(chroma), where=denom > 0
    )
    mu_saturation = float(saturation.mean())
    c1, c2, c3 = _UCIQE_C
    return c1 * sigma_chroma + c2 * contrast_l + c3 * mu_saturation


def evaluate_pair(out: ImageBuf, gt: ImageBuf) -> MetricSet:
    """Full battery: reference metrics vs gt, no-reference metrics on out."""
    _require_same_shape(out, gt)
    return MetricSet(
        ssim=ssim(out, gt),
        psnr_db=psnr(out, gt),
        uiqm=uiqm(out),
        uciqe=uciqe(out),
        fsim=fsim(out, gt),
    )


def dataset_means(sets: list[MetricSet]) -> MetricSet:
    """Arithmetic mean per metric field."""
    if not sets:
        raise EmptyInputError("no metric sets to average")
    n = len(sets)
    return MetricSet(
        **{name: sum(getattr(s, name) for s in sets) / n for name in _METRIC_FIELDS}
    )

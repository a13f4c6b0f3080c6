"""Independent straight-line metric implementations used as test oracles.

Everything here is written from the published definitions with plain
loops and math-module scalars, deliberately sharing no code with the
package implementations.
"""

import cmath
import math

import numpy as np


def luma_plane(img_data):
    h, w, _ = img_data.shape
    out = np.empty((h, w))
    for y in range(h):
        for x in range(w):
            r, g, b = img_data[y, x]
            out[y, x] = 0.299 * r + 0.587 * g + 0.114 * b
    return out


def box_mean_reflect101(plane, window):
    """Box mean with reflect-101 padding, direct per-pixel summation."""
    h, w = plane.shape
    half = window // 2
    out = np.empty_like(plane)

    def reflect(i, n):
        while i < 0 or i >= n:
            if i < 0:
                i = -i
            if i >= n:
                i = 2 * (n - 1) - i
        return i

    for y in range(h):
        for x in range(w):
            total = 0.0
            for dy in range(-half, half + 1):
                for dx in range(-half, half + 1):
                    total += plane[reflect(y + dy, h), reflect(x + dx, w)]
            out[y, x] = total / (window * window)
    return out


def ssim_oracle(a_data, b_data):
    """Direct sliding-window SSIM on luma, 11x11 Gaussian sigma 1.5."""
    x = luma_plane(a_data)
    y = luma_plane(b_data)
    size, sigma = 11, 1.5
    weights = np.empty((size, size))
    for i in range(size):
        for j in range(size):
            di, dj = i - 5, j - 5
            weights[i, j] = math.exp(-(di * di + dj * dj) / (2 * sigma * sigma))
    weights /= weights.sum()
    c1 = (0.01 * 1.0) ** 2
    c2 = (0.03 * 1.0) ** 2
    h, w = x.shape
    values = []
    for top in range(h - size + 1):
        for left in range(w - size + 1):
            wx = x[top : top + size, left : left + size]
            wy = y[top : top + size, left : left + size]
            mu_x = float((weights * wx).sum())
            mu_y = float((weights * wy).sum())
            var_x = float((weights * wx * wx).sum()) - mu_x * mu_x
            var_y = float((weights * wy * wy).sum()) - mu_y * mu_y
            cov = float((weights * wx * wy).sum()) - mu_x * mu_y
            num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
            den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
            values.append(num / den)
    return sum(values) / len(values)


def uiqm_oracle(img_data):
    h, w, _ = img_data.shape

    # UICM: alpha-trimmed opponent statistics.
    rg = sorted(
        img_data[y, x, 0] - img_data[y, x, 1] for y in range(h) for x in range(w)
    )
    yb = sorted(
        (img_data[y, x, 0] + img_data[y, x, 1]) / 2 - img_data[y, x, 2]
        for y in range(h)
        for x in range(w)
    )
    cut = int(0.1 * len(rg))
    rg_t = rg[cut : len(rg) - cut] if cut else rg
    yb_t = yb[cut : len(yb) - cut] if cut else yb
    mu_rg = sum(rg_t) / len(rg_t)
    mu_yb = sum(yb_t) / len(yb_t)
    var_rg = sum((v - mu_rg) ** 2 for v in rg_t) / len(rg_t)
    var_yb = sum((v - mu_yb) ** 2 for v in yb_t) / len(yb_t)
    uicm = -0.0268 * math.sqrt(mu_rg**2 + mu_yb**2) + 0.1586 * math.sqrt(
        var_rg + var_yb
    )

    # UISM: Sobel magnitude (reflect-101 border), blockwise log ratios.
    def sobel_mag(channel):
        def px(y, x):
            y = min(max(y, -y), 2 * (h - 1) - y) if (y < 0 or y >= h) else y
            x = min(max(x, -x), 2 * (w - 1) - x) if (x < 0 or x >= w) else x
            return channel[y, x]

        mag = np.empty((h, w))
        for y in range(h):
            for x in range(w):
                gx = (
                    -px(y - 1, x - 1) + px(y - 1, x + 1)
                    - 2 * px(y, x - 1) + 2 * px(y, x + 1)
                    - px(y + 1, x - 1) + px(y + 1, x + 1)
                )
                gy = (
                    -px(y - 1, x - 1) - 2 * px(y - 1, x) - px(y - 1, x + 1)
                    + px(y + 1, x - 1) + 2 * px(y + 1, x) + px(y + 1, x + 1)
                )
                mag[y, x] = math.sqrt(gx * gx + gy * gy)
        return mag

    def eme(plane):
        total, count = 0.0, 0
        for y0 in range(0, h, 8):
            for x0 in range(0, w, 8):
                block = plane[y0 : min(y0 + 8, h), x0 : min(x0 + 8, w)]
                mn, mx = float(block.min()), float(block.max())
                if mn > 1e-8 and mx > mn:  # same no-edge floor as the package
                    total += math.log(mx / mn)
                count += 1
        return 2.0 * total / count

    uism = (
        0.299 * eme(sobel_mag(img_data[:, :, 0]))
        + 0.587 * eme(sobel_mag(img_data[:, :, 1]))
        + 0.114 * eme(sobel_mag(img_data[:, :, 2]))
    )

    # UIConM: PLIP logAMEE on luma.
    gamma = 1026.0 / 255.0
    lum = luma_plane(img_data)
    s, count = 0.0, 0
    for y0 in range(0, h, 8):
        for x0 in range(0, w, 8):
            block = lum[y0 : min(y0 + 8, h), x0 : min(x0 + 8, w)]
            mn, mx = float(block.min()), float(block.max())
            count += 1
            if mx <= mn:
                continue
            m = (gamma * (mx - mn) / (gamma - mn)) / (mx + mn - mx * mn / gamma)
            s += m * math.log(m)
    uiconm = gamma - gamma * (1.0 - s / gamma) ** (1.0 / count)

    return 0.0282 * uicm + 0.2953 * uism + 3.5753 * uiconm


def rgb_to_lab_oracle(r, g, b):
    """Scalar sRGB (D65) -> CIELab conversion."""

    def linearize(c):
        return c / 12.92 if c <= 0.04045 else ((c + 0.055) / 1.055) ** 2.4

    rl, gl, bl = linearize(r), linearize(g), linearize(b)
    x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl
    y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl
    z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl

    def f(t):
        return t ** (1.0 / 3.0) if t > (6 / 29) ** 3 else t / (3 * (6 / 29) ** 2) + 4 / 29

    fx, fy, fz = f(x / 0.95047), f(y / 1.0), f(z / 1.08883)
    return 116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz)


def uciqe_oracle(img_data):
    h, w, _ = img_data.shape
    l_vals, chroma_vals, sat_vals = [], [], []
    for y in range(h):
        for x in range(w):
            ll, aa, bb = rgb_to_lab_oracle(*img_data[y, x])
            c = math.sqrt(aa * aa + bb * bb)
            l_vals.append(ll)
            chroma_vals.append(c)
            denom = math.sqrt(c * c + ll * ll)
            sat_vals.append(c / denom if denom > 0 else 0.0)
    n = len(chroma_vals)
    mu_c = sum(chroma_vals) / n
    sigma_c = math.sqrt(sum((c - mu_c) ** 2 for c in chroma_vals) / n) / 100.0
    contrast = (np.percentile(np.array(l_vals), 99) - np.percentile(np.array(l_vals), 1)) / 100.0
    mu_s = sum(sat_vals) / n
    return 0.4680 * sigma_c + 0.2745 * contrast + 0.2576 * mu_s


def _fsim_grid(n):
    if n % 2:
        return np.arange(-(n - 1) / 2, (n - 1) / 2 + 1) / (n - 1)
    return np.arange(-n / 2, n / 2) / n


def _fsim_filters(h, w):
    """Log-Gabor filter bank as a nested list bank[orientation][scale]."""
    xs = np.fft.ifftshift(_fsim_grid(w))
    ys = np.fft.ifftshift(_fsim_grid(h))
    u = np.tile(xs, (h, 1))
    v = np.tile(ys.reshape(-1, 1), (1, w))
    radius = np.hypot(u, v)
    lowpass = 1.0 / (1.0 + (radius / 0.45) ** 30)
    radius_safe = radius.copy()
    radius_safe[0, 0] = 1.0
    angle = np.arctan2(-v, u)
    nscale, norient = 4, 4
    theta_sigma = math.pi / (norient * 1.2)
    bank = []
    for o in range(norient):
        phi = o * math.pi / norient
        d_theta = np.abs(
            np.arctan2(
                np.sin(angle) * math.cos(phi) - np.cos(angle) * math.sin(phi),
                np.cos(angle) * math.cos(phi) + np.sin(angle) * math.sin(phi),
            )
        )
        spread = np.exp(-(d_theta**2) / (2 * theta_sigma**2))
        per_scale = []
        for s in range(nscale):
            wavelength = 6.0 * 2.0**s
            gabor = np.exp(
                -((np.log(radius_safe * wavelength)) ** 2) / (2 * math.log(0.55) ** 2)
            )
            gabor = gabor * lowpass
            gabor[0, 0] = 0.0
            per_scale.append(gabor * spread)
        bank.append(per_scale)
    return bank


def _pc_oracle(plane, bank):
    """Phase congruency with Rayleigh noise compensation, loop form."""
    h, w = plane.shape
    fft_plane = np.fft.fft2(plane)
    energy_total = np.zeros((h, w))
    amplitude_total = np.zeros((h, w))
    for per_scale in bank:
        responses = [np.fft.ifft2(fft_plane * filt) for filt in per_scale]
        spatial = [
            np.real(np.fft.ifft2(filt)) * math.sqrt(h * w) for filt in per_scale
        ]
        sum_re = sum(r.real for r in responses)
        sum_im = sum(r.imag for r in responses)
        magnitude = np.sqrt(sum_re**2 + sum_im**2) + 1e-4
        unit_re, unit_im = sum_re / magnitude, sum_im / magnitude
        energy = np.zeros((h, w))
        for r in responses:
            energy += (
                r.real * unit_re + r.imag * unit_im
                - np.abs(r.real * unit_im - r.imag * unit_re)
            )
        median_e2n = float(np.median(np.abs(responses[0]) ** 2))
        mean_e2n = -median_e2n / math.log(0.5)
        noise_power = mean_e2n / float((per_scale[0] ** 2).sum())
        sum_an2 = sum(float((f**2).sum()) for f in spatial)
        sum_ai_aj = 0.0
        for i in range(len(spatial)):
            for j in range(i + 1, len(spatial)):
                sum_ai_aj += float((spatial[i] * spatial[j]).sum())
        noise_energy2 = 2 * noise_power * sum_an2 + 4 * noise_power * sum_ai_aj
        tau = math.sqrt(noise_energy2 / 2)
        threshold = (
            tau * math.sqrt(math.pi / 2)
            + 2.0 * math.sqrt((2 - math.pi / 2) * tau**2)
        ) / 1.7
        energy_total += np.maximum(energy - threshold, 0.0)
        amplitude_total += sum(np.abs(r) for r in responses)
    pc = np.zeros((h, w))
    nonzero = amplitude_total > 0
    pc[nonzero] = energy_total[nonzero] / amplitude_total[nonzero]
    return pc


def _scharr_oracle(plane):
    h, w = plane.shape
    kx = [[3, 0, -3], [10, 0, -10], [3, 0, -3]]
    out = np.empty((h, w))
    for y in range(h):
        for x in range(w):
            gx = gy = 0.0
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w:
                        gx += plane[yy, xx] * kx[dy + 1][dx + 1] / 16.0
                        gy += plane[yy, xx] * kx[dx + 1][dy + 1] / 16.0
            out[y, x] = math.hypot(gx, gy)
    return out


def fsim_oracle(a_data, b_data):
    """Second FSIM implementation assembled from the loop-form pieces."""
    x = luma_plane(a_data) * 255.0
    y = luma_plane(b_data) * 255.0
    h, w = x.shape
    bank = _fsim_filters(h, w)
    pc_x = _pc_oracle(x, bank)
    pc_y = _pc_oracle(y, bank)
    g_x = _scharr_oracle(x)
    g_y = _scharr_oracle(y)
    t1, t2 = 0.85, 160.0
    s_pc = (2 * pc_x * pc_y + t1) / (pc_x**2 + pc_y**2 + t1)
    s_g = (2 * g_x * g_y + t2) / (g_x**2 + g_y**2 + t2)
    pc_m = np.maximum(pc_x, pc_y)
    if float(pc_m.sum()) == 0.0:
        return 1.0
    return float((s_pc * s_g * pc_m).sum() / pc_m.sum())

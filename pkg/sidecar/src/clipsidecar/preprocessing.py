"""Deterministic image preprocessing shared by every backend.

Shortest side resized to 224 with bicubic resampling, center crop to
224x224, then per-channel normalization with the CLIP statistics.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

TARGET_SIZE = 224

CLIP_MEAN = np.array([0.48145466, 0.4578275, 0.40821073], dtype=np.float32)
CLIP_STD = np.array([0.26862954, 0.26130258, 0.27577711], dtype=np.float32)


def preprocess(image: Image.Image) -> np.ndarray:
    """PIL image -> normalized float32 array of shape (3, 224, 224)."""
    rgb = image.convert("RGB")
    w, h = rgb.size
    if w <= h:
        new_w = TARGET_SIZE
        new_h = max(TARGET_SIZE, round(h * TARGET_SIZE / w))
    else:
        new_h = TARGET_SIZE
        new_w = max(TARGET_SIZE, round(w * TARGET_SIZE / h))
    resized = rgb.resize((new_w, new_h), resample=Image.Resampling.BICUBIC)
    left = (new_w - TARGET_SIZE) // 2
    top = (new_h - TARGET_SIZE) // 2
    cropped = resized.crop((left, top, left + TARGET_SIZE, top + TARGET_SIZE))
    pixels = np.asarray(cropped, dtype=np.float32) / 255.0
    normalized = (pixels - CLIP_MEAN[None, None, :]) / CLIP_STD[None, None, :]
    return np.ascontiguousarray(normalized.transpose(2, 0, 1))

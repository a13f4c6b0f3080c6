"""Monte-Carlo variance over stochastic enhancement passes.

Each pass perturbs the enhancer (white-balance gain jitter, refinement-pass
dropout) on its own RNG stream; the per-pixel population variance across
passes is the reliability signal, and its mean drives review flagging.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .adaptive import DepthPlan
from .errors import IoError
from .images import ImageBuf

EBAV_MAGIC = b"EBAV"

DEFAULT_REVIEW_THRESHOLD = 1e-3


@dataclass(frozen=True)
class StochasticConfig:
    passes: int = 20
    gain_jitter_sigma: float = 0.02
    pass_drop_prob: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.passes < 1:
            raise ValueError("passes must be >= 1")
        if self.gain_jitter_sigma < 0:
            raise ValueError("gain_jitter_sigma must be >= 0")
        if not 0.0 <= self.pass_drop_prob < 1.0:
            raise ValueError("pass_drop_prob must be in [0, 1)")


@dataclass(frozen=True)
class VarianceResult:
    mean_image: ImageBuf
    variance_map: np.ndarray
    scalar: float
    flagged: bool

    def __post_init__(self):
        arr = np.asarray(self.variance_map, dtype=np.float64)
        if arr.ndim != 2 or arr.min() < 0 or not np.all(np.isfinite(arr)):
            raise ValueError("variance map must be a finite non-negative HxW array")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "variance_map", arr)


def pass_seed(seed: int, index: int) -> int:
    """Stable per-pass (or per-image) RNG seed derived from a base seed."""
    digest = hashlib.sha256(f"{seed}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def flag(scalar: float, review_threshold: float = DEFAULT_REVIEW_THRESHOLD) -> bool:
    """True when the variance score strictly exceeds the review threshold."""
    return scalar > review_threshold


def mc_variance(
    img: ImageBuf,
    plan: DepthPlan,
    enhancer,
    cfg: StochasticConfig,
    review_threshold: float = DEFAULT_REVIEW_THRESHOLD,
) -> VarianceResult:
    """Run the enhancer cfg.passes times on derived RNG streams.

    Variance is the population variance across passes (divide by T),
    averaged over channels.
    """
    outputs = []
    for t in range(cfg.passes):
        noise = replace(cfg, seed=pass_seed(cfg.seed, t), passes=1)
        outputs.append(enhancer.enhance(img, plan, noise=noise).data)
    stack = np.stack(outputs)
    if bool(np.all(stack == stack[0])):
        # Identical passes: the variance is exactly zero by definition.
        variance = np.zeros(stack.shape[1:3])
        mean = stack[0]
    else:
        mean = stack.mean(axis=0)
        variance = ((stack - mean) ** 2).mean(axis=0).mean(axis=2)
    scalar = float(variance.mean())
    return VarianceResult(
        mean_image=ImageBuf(np.clip(mean, 0.0, 1.0)),
        variance_map=variance,
        scalar=scalar,
        flagged=flag(scalar, review_threshold),
    )


def write_variance_raw(variance_map: np.ndarray, path: str | Path) -> None:
    """Flat binary export: magic "EBAV", u32 H, u32 W, then H*W float32."""
    arr = np.asarray(variance_map, dtype=np.float64)
    h, w = arr.shape
    try:
        with open(path, "wb") as fh:
            fh.write(EBAV_MAGIC)
            fh.write(struct.pack("<II", h, w))
            fh.write(arr.astype("<f4").tobytes())
    except OSError as exc:
        raise IoError(f"{path}: {exc}") from exc


def load_variance_raw(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if blob[:4] != EBAV_MAGIC:
        raise IoError(f"{path}: bad magic {blob[:4]!r}")
    h, w = struct.unpack_from("<II", blob, 4)
    return np.frombuffer(blob, dtype="<f4", count=h * w, offset=12).reshape(h, w).astype(
        np.float64
    )


def write_variance_png(variance_map: np.ndarray, path: str | Path) -> float:
    """16-bit grayscale heat map; returns the value->intensity scale factor."""
    arr = np.asarray(variance_map, dtype=np.float64)
    peak = float(arr.max())
    scale = 65535.0 / peak if peak > 0 else 0.0
    coded = np.clip(np.floor(arr * scale + 0.5), 0, 65535).astype(np.uint16)
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(coded).save(path, format="PNG")
    except OSError as exc:
        raise IoError(f"{path}: {exc}") from exc
    return scale

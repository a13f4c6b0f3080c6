import json
from pathlib import Path

import numpy as np
import pytest

from aquagate.images import ImageBuf, save_image


def random_image(rng: np.random.Generator, h: int = 32, w: int = 32) -> ImageBuf:
    return ImageBuf(rng.random((h, w, 3)))


def smooth_image(rng: np.random.Generator, h: int = 64, w: int = 64) -> ImageBuf:
    """Low-frequency color field, closer to a photo than white noise."""
    from scipy import ndimage

    base = rng.random((h, w, 3))
    smooth = ndimage.gaussian_filter(base, sigma=(6, 6, 0))
    lo, hi = smooth.min(), smooth.max()
    return ImageBuf((smooth - lo) / (hi - lo) if hi > lo else smooth)


def write_dataset(
    root: Path,
    n: int,
    rng: np.random.Generator,
    size: int = 48,
    with_gt: bool = True,
    dataset_label: str = "synthA",
    id_prefix: str = "img",
) -> Path:
    """Seeded synthetic dataset with manifest; returns the manifest path."""
    (root / "in").mkdir(parents=True, exist_ok=True)
    if with_gt:
        (root / "gt").mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(n):
        img_id = f"{id_prefix}{i:04d}"
        img = smooth_image(rng, size, size)
        save_image(img, root / "in" / f"{img_id}.png")
        entry = {
            "id": img_id,
            "input": str(root / "in" / f"{img_id}.png"),
            "dataset": dataset_label,
        }
        if with_gt:
            gt = ImageBuf(np.clip(img.data * 0.9 + 0.05 + rng.normal(0, 0.01, img.data.shape), 0, 1))
            save_image(gt, root / "gt" / f"{img_id}.png")
            entry["gt"] = str(root / "gt" / f"{img_id}.png")
        entries.append(entry)
    manifest_path = root / "manifest.json"
    manifest_path.write_text(json.dumps({"entries": entries}, indent=2))
    return manifest_path


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def dataset(tmp_path, rng):
    return write_dataset(tmp_path, n=6, rng=rng)

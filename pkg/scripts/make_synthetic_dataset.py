#!/usr/bin/env python3
"""Generate a synthetic underwater-style dataset with a manifest.

Inputs get a blue-green cast, haze, and blur; ground-truth images are the
clean renders. Useful for exercising the full pipeline without real data.
"""

import argparse
import json
from pathlib import Path

import numpy as np
from scipy import ndimage

from aquagate.images import ImageBuf, save_image


def clean_scene(rng: np.random.Generator, size: int) -> np.ndarray:
    """Colorful low-frequency scene with some sharp structures."""
    field = ndimage.gaussian_filter(rng.random((size, size, 3)), sigma=(size / 10, size / 10, 0))
    lo, hi = field.min(), field.max()
    scene = (field - lo) / (hi - lo)
    # Sprinkle sharp blobs to give the degradation map real structure.
    for _ in range(rng.integers(3, 9)):
        cy, cx = rng.integers(0, size, 2)
        r = int(rng.integers(2, max(3, size // 12)))
        color = rng.random(3)
        ys, xs = np.ogrid[:size, :size]
        mask = (ys - cy) ** 2 + (xs - cx) ** 2 <= r * r
        scene[mask] = color
    return scene


def degrade(scene: np.ndarray, rng: np.random.Generator, haze: float) -> np.ndarray:
    """Underwater look: attenuate red, add veiling light, soften."""
    tint = scene * np.array([0.45, 0.85, 1.0])[None, None, :]
    veil = np.array([0.20, 0.45, 0.50])[None, None, :]
    hazy = (1.0 - haze) * tint + haze * veil
    blurred = ndimage.gaussian_filter(hazy, sigma=(0.6 + 2.0 * haze, 0.6 + 2.0 * haze, 0))
    noisy = blurred + rng.normal(0, 0.01, blurred.shape)
    return np.clip(noisy, 0.0, 1.0)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="dataset directory to create")
    parser.add_argument("--count", type=int, default=40)
    parser.add_argument("--size", type=int, default=96)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--dataset-label", default="SYNTH")
    parser.add_argument(
        "--clear-fraction", type=float, default=0.25,
        help="fraction of images rendered almost haze-free",
    )
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    root = Path(args.out)
    (root / "in").mkdir(parents=True, exist_ok=True)
    (root / "gt").mkdir(parents=True, exist_ok=True)

    entries = []
    for i in range(args.count):
        img_id = f"{args.dataset_label.lower()}{i:04d}"
        scene = clean_scene(rng, args.size)
        clear = rng.random() < args.clear_fraction
        haze = rng.uniform(0.02, 0.12) if clear else rng.uniform(0.35, 0.75)
        save_image(ImageBuf(degrade(scene, rng, haze)), root / "in" / f"{img_id}.png")
        save_image(ImageBuf(scene), root / "gt" / f"{img_id}.png")
        entries.append(
            {
                "id": img_id,
                "input": str(root / "in" / f"{img_id}.png"),
                "gt": str(root / "gt" / f"{img_id}.png"),
                "dataset": args.dataset_label,
            }
        )
    manifest = root / "manifest.json"
    manifest.write_text(json.dumps({"entries": entries}, indent=2) + "\n")
    print(f"wrote {args.count} image pairs and {manifest}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""Shared helpers for the sidecar test suite."""

import io
import json

import numpy as np
from PIL import Image


def image_bytes(seed: int, w: int = 320, h: int = 240, fmt: str = "PNG") -> bytes:
    rng = np.random.default_rng(seed)
    arr = (rng.random((h, w, 3)) * 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format=fmt)
    return buf.getvalue()


def write_manifest(tmp_path, n: int, seed: int = 0):
    (tmp_path / "in").mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(n):
        img_id = f"img{i:03d}"
        path = tmp_path / "in" / f"{img_id}.png"
        path.write_bytes(image_bytes(seed + i))
        entries.append({"id": img_id, "input": str(path), "dataset": "synth"})
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"entries": entries}, indent=2))
    return manifest

"""Image buffers, PNG/JPEG IO, luma conversion, and dataset manifests.

Pixel domain is float64 in [0, 1] throughout the pipeline; 8-bit files map
byte v to v/255 on load and back with round-half-up on save.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    DecodeError,
    DuplicateIdError,
    IoError,
    ParseError,
    TooSmallError,
)

MIN_SIDE = 8

# BT.601 luma coefficients.
_LUMA_R = 0.299
_LUMA_B = 0.114


@dataclass(frozen=True)
class ImageBuf:
    """H x W x 3 float image, channels R,G,B, values in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected HxWx3 array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("image values outside [0, 1]")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class LumaBuf:
    """H x W float plane in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"expected HxW array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("luma contains non-finite values")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    input_path: str
    gt_path: str | None = None
    dataset_label: str = "unlabeled"


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> list[str]:
        return [e.id for e in self.entries]


def load_image(path: str | Path) -> ImageBuf:
    """Decode a PNG/JPEG file to an ImageBuf.

    Grayscale sources are replicated to 3 channels; alpha is dropped.
    Raises FileNotFoundError, DecodeError, or TooSmallError.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    try:
        with Image.open(path) as im:
            im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.float64)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise DecodeError(f"{path}: {exc}") from exc
    if arr.shape[0] < MIN_SIDE or arr.shape[1] < MIN_SIDE:
        raise TooSmallError(
            f"{path}: {arr.shape[1]}x{arr.shape[0]} below {MIN_SIDE}x{MIN_SIDE}"
        )
    return ImageBuf(arr / 255.0)


def save_image(img: ImageBuf, path: str | Path) -> None:
    """Write an ImageBuf as PNG, quantizing with round-half-up."""
    path = Path(path)
    bytes_ = quantize(img.data)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(bytes_, mode="RGB").save(path, format="PNG")
    except OSError as exc:
        raise IoError(f"{path}: {exc}") from exc


def quantize(values: np.ndarray) -> np.ndarray:
    """Map [0,1] floats to uint8 with round-half-up, clamped to [0, 255]."""
    return np.clip(np.floor(np.asarray(values) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def luma(img: ImageBuf) -> LumaBuf:
    """BT.601 luma: 0.299 R + 0.587 G + 0.114 B.

    Evaluated as G + 0.299 (R - G) + 0.114 (B - G) so that gray pixels map
    to themselves exactly.
    """
    r = img.data[:, :, 0]
    g = img.data[:, :, 1]
    b = img.data[:, :, 2]
    out = g + _LUMA_R * (r - g) + _LUMA_B * (b - g)
    return LumaBuf(np.clip(out, 0.0, 1.0))


def load_manifest(path: str | Path) -> DatasetManifest:
    """Parse a manifest JSON file: {"entries": [{"id", "input", "gt"?, "dataset"?}]}."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise
    except (json.JSONDecodeError, OSError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("entries"), list):
        raise ParseError(f"{path}: top-level object with 'entries' list required")
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    for i, item in enumerate(raw["entries"]):
        if not isinstance(item, dict):
            raise ParseError(f"{path}: entry {i} is not an object")
        try:
            entry_id = str(item["id"])
            input_path = str(item["input"])
        except KeyError as exc:
            raise ParseError(f"{path}: entry {i} missing {exc}") from exc
        if not entry_id or not input_path:
            raise ParseError(f"{path}: entry {i} has empty id or input path")
        if entry_id in seen:
            raise DuplicateIdError(f"{path}: duplicate id {entry_id!r}")
        seen.add(entry_id)
        gt = item.get("gt")
        if gt is not None:
            gt = str(gt)
            if not gt:
                raise ParseError(f"{path}: entry {entry_id!r} has empty gt path")
        entries.append(
            ManifestEntry(
                id=entry_id,
                input_path=input_path,
                gt_path=gt,
                dataset_label=str(item.get("dataset", "unlabeled")),
            )
        )
    return DatasetManifest(tuple(entries))


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Write a manifest back to its JSON schema."""
    items = []
    for e in manifest.entries:
        item: dict = {"id": e.id, "input": e.input_path}
        if e.gt_path is not None:
            item["gt"] = e.gt_path
        item["dataset"] = e.dataset_label
        items.append(item)
    Path(path).write_text(json.dumps({"entries": items}, indent=2) + "\n")

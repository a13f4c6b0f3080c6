"""EBAE binary embeddings file writer (little-endian).

Layout: magic "EBAE", u32 version=1, u32 dim, then per record a u16 id
byte-length, the UTF-8 id, and dim float32 components.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

MAGIC = b"EBAE"
VERSION = 1


def write_ebae(records: dict[str, np.ndarray], path: str | Path) -> None:
    if not records:
        raise ValueError("no records to write")
    dims = {len(v) for v in records.values()}
    if len(dims) != 1:
        raise ValueError(f"mixed dimensions {sorted(dims)}")
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<II", VERSION, dims.pop()))
    for rec_id, vec in records.items():
        raw = rec_id.encode("utf-8")
        out.write(struct.pack("<H", len(raw)))
        out.write(raw)
        out.write(np.asarray(vec, dtype="<f4").tobytes())
    Path(path).write_bytes(out.getvalue())


def prompts_companion_path(path: str | Path) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".prompts")

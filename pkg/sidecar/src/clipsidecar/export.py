"""Batch exporter: manifest images -> EBAE file plus prompt companion.

Keys image records by manifest id and writes the five condition-prompt
text embeddings to `<out>.prompts`, matching what the pipeline expects.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from .ebae import prompts_companion_path, write_ebae

CONDITIONS = (
    "clear water",
    "murky water",
    "high turbidity",
    "deep-sea environment",
    "artificial lighting",
)
DEFAULT_PROMPT_PREFIX = "a photo of "


def load_manifest_entries(path: str | Path) -> list[dict]:
    payload = json.loads(Path(path).read_text())
    return payload["entries"]


def batch_export(
    manifest_path: str | Path,
    out_path: str | Path,
    backend,
    prompt_prefix: str = DEFAULT_PROMPT_PREFIX,
) -> list[str]:
    """Embed every manifest image; returns per-image failure messages."""
    entries = load_manifest_entries(manifest_path)
    records: dict[str, np.ndarray] = {}
    failures: list[str] = []
    for entry in entries:
        try:
            with Image.open(entry["input"]) as im:
                im.load()
                records[entry["id"]] = backend.embed_image(im)
        except Exception as exc:
            failures.append(f"{entry['id']}: {type(exc).__name__}: {exc}")
    if records:
        write_ebae(records, out_path)
        prompts = {
            prompt_prefix + c: backend.embed_text(prompt_prefix + c)
            for c in CONDITIONS
        }
        write_ebae(prompts, prompts_companion_path(out_path))
    for line in failures:
        print(f"error: {line}", file=sys.stderr)
    return failures

"""Embedding backends: real CLIP via transformers, or a deterministic stub.

The stub hashes the preprocessed tensor (or text) onto the unit sphere, so
every service and export contract can be tested without model weights.
Selection: EBAAI_SVC_MODEL, default "openai/clip-vit-base-patch32";
the value "hash" picks the stub.
"""

from __future__ import annotations

import hashlib
import os

import numpy as np
from PIL import Image

from .preprocessing import preprocess

MODEL_ENV = "EBAAI_SVC_MODEL"
DEFAULT_MODEL = "openai/clip-vit-base-patch32"
HASH_BACKEND = "hash"


class HashBackend:
    """Stand-in backend: reproducible unit vectors from content digests."""

    model_id = "hash-512"
    dim = 512

    def _direction(self, payload: bytes) -> np.ndarray:
        digest = hashlib.sha256(payload).digest()
        rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest[:8], "little")))
        vec = rng.standard_normal(self.dim).astype(np.float32)
        return vec / np.linalg.norm(vec)

    def embed_image(self, image: Image.Image) -> np.ndarray:
        tensor = preprocess(image)
        return self._direction(b"image:" + tensor.tobytes())

    def embed_text(self, text: str) -> np.ndarray:
        return self._direction(b"text:" + text.encode("utf-8"))


class ClipBackend:
    """CLIP through transformers, eval mode, deterministic preprocessing."""

    def __init__(self, model_id: str = DEFAULT_MODEL):
        import torch
        from transformers import CLIPModel, CLIPTokenizer

        self.model_id = model_id
        self._torch = torch
        self._model = CLIPModel.from_pretrained(model_id)
        self._model.eval()
        self._tokenizer = CLIPTokenizer.from_pretrained(model_id)
        self.dim = int(self._model.config.projection_dim)

    def embed_image(self, image: Image.Image) -> np.ndarray:
        torch = self._torch
        tensor = torch.from_numpy(preprocess(image)).unsqueeze(0)
        with torch.no_grad():
            features = self._model.get_image_features(pixel_values=tensor)
        vec = features[0].numpy().astype(np.float32)
        return vec / np.linalg.norm(vec)

    def embed_text(self, text: str) -> np.ndarray:
        torch = self._torch
        tokens = self._tokenizer([text], padding=True, return_tensors="pt")
        with torch.no_grad():
            features = self._model.get_text_features(**tokens)
        vec = features[0].numpy().astype(np.float32)
        return vec / np.linalg.norm(vec)


def load_backend(model_id: str | None = None):
    """Instantiate the backend selected by argument or environment."""
    selected = model_id or os.environ.get(MODEL_ENV, DEFAULT_MODEL)
    if selected == HASH_BACKEND:
        return HashBackend()
    return ClipBackend(selected)

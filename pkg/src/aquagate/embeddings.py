"""Embedding acquisition, prompt similarity, and clarity scoring.

Three providers share one behavioral contract: a deterministic test
provider (seeded hash onto the unit sphere), an HTTP client for the
embedding sidecar, and a lookup over precomputed EBAE files.
"""

from __future__ import annotations

import hashlib
import io
import struct
import threading
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Protocol, runtime_checkable

import numpy as np

from .errors import (
    BadMagicError,
    DimMismatchError,
    DuplicateIdError,
    MissingEmbeddingError,
    ProviderUnavailableError,
    TruncatedRecordError,
    ZeroNormEmbeddingError,
)
from .images import ImageBuf

DEFAULT_DIM = 512

#: The five environmental conditions scored against every image, fixed order.
CONDITIONS = (
    "clear water",
    "murky water",
    "high turbidity",
    "deep-sea environment",
    "artificial lighting",
)

DEFAULT_PROMPT_PREFIX = "a photo of "

#: Logit scale applied to cosine similarities before the softmax.
CLARITY_SCALE = 100.0

EBAE_MAGIC = b"EBAE"
EBAE_VERSION = 1

# Norms this close to 1 are trusted as already normalized, which keeps
# write -> load round trips bit-exact for unit-norm records.
_RENORM_BAND = 1e-6


@dataclass(frozen=True)
class Embedding:
    """Unit-norm direction in embedding space."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError(f"expected 1-D vector, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embedding contains non-finite values")
        norm = float(np.linalg.norm(arr))
        if abs(norm - 1.0) > 1e-3:
            raise ValueError(f"embedding norm {norm} not within 1e-3 of 1")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class PromptSet:
    """The five condition prompts and their text embeddings, fixed order."""

    prompts: tuple[str, ...]
    prompt_embeddings: tuple[Embedding, ...]

    def __post_init__(self):
        if len(self.prompts) != len(CONDITIONS) or len(self.prompt_embeddings) != len(
            CONDITIONS
        ):
            raise ValueError(f"prompt set must hold exactly {len(CONDITIONS)} entries")
        dims = {e.dim for e in self.prompt_embeddings}
        if len(dims) != 1:
            raise DimMismatchError(f"prompt embeddings mix dimensions {sorted(dims)}")

    @property
    def dim(self) -> int:
        return self.prompt_embeddings[0].dim


@dataclass(frozen=True)
class SimilarityProfile:
    """Cosine similarity to each condition prompt, order matching CONDITIONS."""

    scores: tuple[float, ...]

    def __post_init__(self):
        if len(self.scores) != len(CONDITIONS):
            raise ValueError(f"profile must hold exactly {len(CONDITIONS)} scores")
        for s in self.scores:
            if not -1.0 <= s <= 1.0:
                raise ValueError(f"similarity {s} outside [-1, 1]")


@runtime_checkable
class EmbeddingProvider(Protocol):
    """Deterministic mapping from images/text to unit-norm embeddings."""

    def embed_image(self, source: ImageBuf | str | Path) -> Embedding: ...

    def embed_text(self, text: str) -> Embedding: ...


def cosine(a: Embedding, b: Embedding) -> float:
    """Cosine similarity of two unit vectors, clamped to [-1, 1]."""
    if a.dim != b.dim:
        raise DimMismatchError(f"dims {a.dim} and {b.dim}")
    return float(np.clip(np.dot(a.values, b.values), -1.0, 1.0))


def similarity_profile(img_emb: Embedding, prompts: PromptSet) -> SimilarityProfile:
    """Score an image embedding against every condition prompt."""
    if img_emb.dim != prompts.dim:
        raise DimMismatchError(f"dims {img_emb.dim} and {prompts.dim}")
    return SimilarityProfile(
        tuple(cosine(img_emb, p) for p in prompts.prompt_embeddings)
    )


def clarity_score(profile: SimilarityProfile, scale: float = CLARITY_SCALE) -> float:
    """Softmax over scaled similarities, returning the clear-water component.

    Strictly inside (0, 1); equal similarities give exactly 1/5.
    """
    logits = scale * np.asarray(profile.scores, dtype=np.float64)
    logits -= logits.max()
    weights = np.exp(logits)
    return float(weights[0] / weights.sum())


class TestProvider:
    """Seeded hash provider: reproducible pseudo-random unit directions.

    Paths are keyed by their filename stem, text by the string itself, and
    in-memory images by a digest of their pixel bytes.
    """

    __test__ = False  # not a pytest collection target

    def __init__(self, seed: int, dim: int = DEFAULT_DIM):
        self.seed = int(seed)
        self.dim = int(dim)

    def _direction(self, key: str) -> Embedding:
        digest = hashlib.sha256(f"{self.seed}|{key}".encode()).digest()
        rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest[:8], "little")))
        vec = rng.standard_normal(self.dim)
        return Embedding(vec / np.linalg.norm(vec))

    def embed_image(self, source: ImageBuf | str | Path) -> Embedding:
        if isinstance(source, ImageBuf):
            key = "bytes:" + hashlib.sha256(source.data.tobytes()).hexdigest()
        else:
            key = "image:" + Path(source).stem
        return self._direction(key)

    def embed_text(self, text: str) -> Embedding:
        return self._direction("text:" + text)


class RemoteProvider:
    """HTTP client for the embedding sidecar, with bounded in-flight requests."""

    def __init__(self, base_url: str, max_in_flight: int = 4, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._slots = threading.Semaphore(max_in_flight)

    def _post(self, endpoint: str, **kwargs) -> Embedding:
        import requests

        with self._slots:
            try:
                resp = requests.post(
                    f"{self.base_url}{endpoint}", timeout=self.timeout, **kwargs
                )
            except requests.RequestException as exc:
                raise ProviderUnavailableError(f"{self.base_url}{endpoint}: {exc}") from exc
        if resp.status_code != 200:
            raise ProviderUnavailableError(
                f"{self.base_url}{endpoint}: HTTP {resp.status_code}: {resp.text[:200]}"
            )
        payload = resp.json()
        vec = np.asarray(payload["embedding"], dtype=np.float64)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise ZeroNormEmbeddingError(f"{self.base_url}{endpoint} returned zero vector")
        if abs(norm - 1.0) > _RENORM_BAND:
            vec = vec / norm
        return Embedding(vec)

    def embed_image(self, source: ImageBuf | str | Path) -> Embedding:
        if isinstance(source, ImageBuf):
            from .images import quantize
            from PIL import Image as PILImage

            buf = io.BytesIO()
            PILImage.fromarray(quantize(source.data), mode="RGB").save(buf, format="PNG")
            body = buf.getvalue()
        else:
            body = Path(source).read_bytes()
        return self._post("/embed_image", data=body, headers={"Content-Type": "application/octet-stream"})

    def embed_text(self, text: str) -> Embedding:
        return self._post("/embed_text", json={"text": text})


class PrecomputedProvider:
    """Provider backed by EBAE files: image records by id, text records by prompt."""

    def __init__(self, images: Mapping[str, Embedding], texts: Mapping[str, Embedding]):
        self._images = images
        self._texts = texts

    def embed_image(self, source: ImageBuf | str | Path) -> Embedding:
        if isinstance(source, ImageBuf):
            raise MissingEmbeddingError("precomputed provider needs an id or path")
        key = str(source)
        if key not in self._images:
            key = Path(source).stem
        try:
            return self._images[key]
        except KeyError:
            raise MissingEmbeddingError(f"no embedding record for {source!r}") from None

    def embed_text(self, text: str) -> Embedding:
        try:
            return self._texts[text]
        except KeyError:
            raise MissingEmbeddingError(f"no embedding record for prompt {text!r}") from None


def build_prompt_set(
    provider: EmbeddingProvider, prefix: str = DEFAULT_PROMPT_PREFIX
) -> PromptSet:
    """Embed the five condition prompts through a provider."""
    prompts = tuple(prefix + c for c in CONDITIONS)
    return PromptSet(prompts, tuple(provider.embed_text(p) for p in prompts))


class EmbeddingsFile(Mapping):
    """Mapping id -> Embedding parsed from an EBAE file.

    ``prenorm`` keeps each record's norm as stored, before renormalization.
    """

    def __init__(self, dim: int, embeddings: dict[str, Embedding], prenorm: dict[str, float]):
        self.dim = dim
        self._embeddings = embeddings
        self.prenorm = prenorm

    def __getitem__(self, key: str) -> Embedding:
        return self._embeddings[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._embeddings)

    def __len__(self) -> int:
        return len(self._embeddings)


def write_embeddings_file(embeddings: Mapping[str, Embedding], path: str | Path) -> None:
    """Serialize embeddings to the EBAE binary format (little-endian).

    Layout: magic "EBAE", u32 version, u32 dim, then per record a u16 id
    byte-length, the UTF-8 id, and dim float32 components. Records are
    written in mapping order.
    """
    items = list(embeddings.items())
    if not items:
        raise ValueError("refusing to write an empty embeddings file")
    dims = {e.dim for _, e in items}
    if len(dims) != 1:
        raise DimMismatchError(f"mixed dimensions {sorted(dims)}")
    dim = dims.pop()
    out = io.BytesIO()
    out.write(EBAE_MAGIC)
    out.write(struct.pack("<II", EBAE_VERSION, dim))
    for rec_id, emb in items:
        raw = rec_id.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValueError(f"id too long: {rec_id[:32]!r}...")
        out.write(struct.pack("<H", len(raw)))
        out.write(raw)
        out.write(emb.values.astype("<f4").tobytes())
    Path(path).write_bytes(out.getvalue())


def load_embeddings_file(path: str | Path) -> EmbeddingsFile:
    """Parse an EBAE file, renormalizing any record whose norm drifted."""
    blob = Path(path).read_bytes()
    if blob[:4] != EBAE_MAGIC:
        raise BadMagicError(f"{path}: magic {blob[:4]!r}")
    if len(blob) < 12:
        raise TruncatedRecordError(f"{path}: truncated header")
    version, dim = struct.unpack_from("<II", blob, 4)
    if version != EBAE_VERSION:
        raise BadMagicError(f"{path}: unsupported version {version}")
    if dim == 0:
        raise DimMismatchError(f"{path}: header dim 0")
    pos = 12
    embeddings: dict[str, Embedding] = {}
    prenorm: dict[str, float] = {}
    rec_bytes = 4 * dim
    while pos < len(blob):
        if pos + 2 > len(blob):
            raise TruncatedRecordError(f"{path}: truncated id length at byte {pos}")
        (id_len,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        if pos + id_len + rec_bytes > len(blob):
            raise TruncatedRecordError(f"{path}: truncated record at byte {pos}")
        rec_id = blob[pos : pos + id_len].decode("utf-8")
        pos += id_len
        vec = np.frombuffer(blob, dtype="<f4", count=dim, offset=pos).astype(np.float64)
        pos += rec_bytes
        if rec_id in embeddings:
            raise DuplicateIdError(f"{path}: duplicate record id {rec_id!r}")
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise ZeroNormEmbeddingError(f"{path}: record {rec_id!r} has zero norm")
        prenorm[rec_id] = norm
        if abs(norm - 1.0) > _RENORM_BAND:
            vec = vec / norm
        embeddings[rec_id] = Embedding(vec)
    return EmbeddingsFile(dim, embeddings, prenorm)


def prompts_sidecar_path(path: str | Path) -> Path:
    """Companion EBAE file holding the prompt-text embeddings for a run."""
    p = Path(path)
    return p.with_name(p.name + ".prompts")

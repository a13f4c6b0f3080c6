"""Sidecar acceptance: service/file contract against the pipeline package.

Run with `pytest sidecar/tests/test_acceptance.py -v -s`. The qualitative
dataset check needs real benchmark images and a real CLIP backend; point
EBAAI_OCEAN_EX_MANIFEST at a manifest and set EBAAI_SVC_MODEL to run it.
"""

import io
import json
import os
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from clipsidecar.backends import HashBackend, load_backend
from clipsidecar.ebae import prompts_companion_path
from clipsidecar.export import CONDITIONS, batch_export

from support import image_bytes, write_manifest

PROMPTS = [f"a photo of {c}" for c in CONDITIONS]


def _verdict(name: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[acceptance] criterion 10 {name}: {status}{suffix}")
    assert ok, f"criterion 10 {name} failed{suffix}"


def test_criterion_10_prompt_vectors_unit_norm(client):
    ok = True
    for prompt in PROMPTS:
        vec = np.asarray(client.post("/embed_text", json={"text": prompt}).json()["embedding"])
        ok &= abs(np.linalg.norm(vec) - 1.0) <= 1e-3
    _verdict("prompt unit norms", ok)


def test_criterion_10_wire_and_export_agree(client, tmp_path):
    manifest = write_manifest(tmp_path, 3, seed=50)
    out = tmp_path / "emb.ebae"
    assert batch_export(manifest, out, HashBackend()) == []

    from aquagate.embeddings import load_embeddings_file

    exported = load_embeddings_file(out)
    worst = 0.0
    for entry in json.loads(manifest.read_text())["entries"]:
        body = Path(entry["input"]).read_bytes()
        wire = np.asarray(
            client.post("/embed_image", content=body).json()["embedding"]
        )
        worst = max(worst, float(np.abs(wire - exported[entry["id"]].values).max()))
    _verdict("wire/file agreement", worst <= 1e-6, f"max diff {worst:.2e}")


def test_criterion_10_ebae_loads_in_pipeline_bit_exact(tmp_path):
    manifest = write_manifest(tmp_path, 4, seed=60)
    out = tmp_path / "emb.ebae"
    backend = HashBackend()
    assert batch_export(manifest, out, backend) == []

    from aquagate.embeddings import load_embeddings_file

    loaded = load_embeddings_file(out)
    prompts = load_embeddings_file(prompts_companion_path(out))
    ok = len(loaded) == 4 and len(prompts) == len(CONDITIONS)
    for entry in json.loads(manifest.read_text())["entries"]:
        with Image.open(entry["input"]) as im:
            expected = backend.embed_image(im)
        ok &= np.array_equal(
            loaded[entry["id"]].values.astype("<f4"), expected.astype("<f4")
        )
    _verdict("EBAE bit-exact in pipeline", ok)


def test_criterion_10_pipeline_gating_over_exported_file(tmp_path):
    # Full cross-package path: export embeddings here, gate over them there.
    manifest = write_manifest(tmp_path, 5, seed=70)
    out = tmp_path / "emb.ebae"
    assert batch_export(manifest, out, HashBackend()) == []

    from aquagate.cli import main as aquagate_main

    code = aquagate_main(
        ["run", "--manifest", str(manifest), "--embeddings", str(out),
         "--threshold", "0.35", "--out", str(tmp_path / "run"), "--window", "5"]
    )
    payload = json.loads((tmp_path / "run" / "run.json").read_text())
    ok = code == 0 and len(payload["records"]) == 5
    _verdict("pipeline consumes exported file", ok)


def test_criterion_10_qualitative_dataset_bias():
    manifest_path = os.environ.get("EBAAI_OCEAN_EX_MANIFEST")
    if not manifest_path:
        print(
            "[acceptance] criterion 10 deep-sea vs clear-water ordering: SKIP "
            "(set EBAAI_OCEAN_EX_MANIFEST and EBAAI_SVC_MODEL to run)"
        )
        pytest.skip("benchmark dataset not supplied")
    backend = load_backend()
    entries = json.loads(Path(manifest_path).read_text())["entries"]
    deep, clear = [], []
    prompt_deep = backend.embed_text("a photo of deep-sea environment")
    prompt_clear = backend.embed_text("a photo of clear water")
    for entry in entries:
        with Image.open(entry["input"]) as im:
            vec = backend.embed_image(im)
        deep.append(float(vec @ prompt_deep))
        clear.append(float(vec @ prompt_clear))
    ok = np.mean(deep) > np.mean(clear)
    _verdict(
        "deep-sea vs clear-water ordering",
        ok,
        f"deep={np.mean(deep):.4f} clear={np.mean(clear):.4f}",
    )

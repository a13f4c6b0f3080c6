#!/usr/bin/env python3
"""End-to-end demo: embed, audit, gated vs full run, ablation table.

Builds everything from a synthetic dataset (or an existing manifest), so it
runs anywhere without model weights or benchmark data.
"""

import argparse
import json
import subprocess
import sys
from pathlib import Path

from aquagate.cli import main as aquagate_main


def run(argv: list[str]) -> None:
    print(f"$ aquagate {' '.join(argv)}")
    code = aquagate_main(argv)
    if code != 0:
        sys.exit(code)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", required=True)
    parser.add_argument("--manifest", help="reuse an existing manifest instead")
    parser.add_argument("--count", type=int, default=40)
    parser.add_argument("--target-skip", type=float, default=0.25)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)

    manifest = args.manifest
    if manifest is None:
        dataset_dir = workdir / "dataset"
        subprocess.run(
            [
                sys.executable,
                str(Path(__file__).with_name("make_synthetic_dataset.py")),
                "--out", str(dataset_dir),
                "--count", str(args.count),
                "--seed", str(args.seed),
            ],
            check=True,
        )
        manifest = str(dataset_dir / "manifest.json")

    n_images = len(json.loads(Path(manifest).read_text())["entries"])
    perplexity = min(8.0, max(2.0, (n_images - 1) / 3 - 1))

    embeddings = workdir / "embeddings.ebae"
    run(["embed", "--manifest", manifest, "--provider", "test",
         "--out", str(embeddings), "--seed", str(args.seed)])
    run(["audit", "--manifest", manifest, "--embeddings", str(embeddings),
         "--tsne", "--perplexity", str(perplexity), "--out", str(workdir / "audit"),
         "--seed", str(args.seed)])
    run(["run", "--manifest", manifest, "--embeddings", str(embeddings),
         "--target-skip", str(args.target_skip), "--out", str(workdir / "gated"),
         "--uncertainty", "--seed", str(args.seed)])
    run(["run", "--manifest", manifest, "--embeddings", str(embeddings),
         "--threshold", "1.0", "--out", str(workdir / "full"),
         "--seed", str(args.seed)])
    run(["ablation", "--gated", str(workdir / "gated" / "run.json"),
         "--full", str(workdir / "full" / "run.json"),
         "--out", str(workdir / "ablation")])
    print(f"artifacts under {workdir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

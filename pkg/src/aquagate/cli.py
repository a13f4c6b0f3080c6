"""Command-line surface: embed, audit, run, eval, ablation.

Exit codes: 0 success, 2 configuration/input error, 3 partial data failure.
Every command is deterministic for a fixed seed regardless of --workers.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import embeddings as emb
from . import report as rep
from .adaptive import AdaptiveParams, format_savings
from .audit import build_bias_report, render_prompt_table
from .enhance import (
    BaselineConfig,
    BaselineEnhancer,
    ExternalResultsEnhancer,
    PipelineOptions,
    calibrate_threshold,
    compute_clarity_scores,
    external_enhance,
    run_pipeline,
)
from .errors import AquagateError, ParseError, ProviderUnavailableError
from .images import load_image, load_manifest
from .projection import tsne
from .quality import METRIC_DEFS_TAG, evaluate_pair
from .uncertainty import StochasticConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3

PROVIDER_URL_ENV = "EBAAI_PROVIDER_URL"

# Builtin defaults resolved after the config file layer; argparse itself
# leaves everything at None so explicit flags can be told apart.
_DEFAULTS = {
    "seed": 42,
    "workers": os.cpu_count() or 1,
    "clusters": 8,
    "perplexity": 30.0,
    "tsne_iters": 1000,
    "tsne": False,
    "alpha": 8.0,
    "beta": 1.0,
    "dmax": 4,
    "window": 15,
    "tile": 64,
    "overlap": 16,
    "epsilon": 1e-6,
    "enhancer": "baseline",
    "uncertainty": False,
    "mc_passes": 20,
    "gain_jitter": 0.02,
    "pass_drop": 0.1,
    "review_threshold": 1e-3,
    "base_strength": 0.5,
    "saturation_boost": 0.1,
    "percentile_clip": 1.0,
    "prompt_prefix": emb.DEFAULT_PROMPT_PREFIX,
    "on_provider_error": "abort",
}

_CASTS = {
    "seed": int,
    "workers": int,
    "clusters": int,
    "tsne_iters": int,
    "dmax": int,
    "window": int,
    "tile": int,
    "overlap": int,
    "mc_passes": int,
    "perplexity": float,
    "alpha": float,
    "beta": float,
    "epsilon": float,
    "gain_jitter": float,
    "pass_drop": float,
    "review_threshold": float,
    "base_strength": float,
    "saturation_boost": float,
    "percentile_clip": float,
    "threshold": float,
    "target_skip": float,
    "tsne": lambda s: s.lower() in ("1", "true", "yes"),
    "uncertainty": lambda s: s.lower() in ("1", "true", "yes"),
}


def _load_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ParseError(f"{path}:{lineno}: expected key = value")
        key, _, value = stripped.partition("=")
        value = value.strip()
        if len(value) >= 2 and value[0] in "\"'" and value[-1] == value[0]:
            value = value[1:-1]
        values[key.strip().replace("-", "_")] = value
    return values


def _resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Layer values: explicit flag > config file > builtin default."""
    file_values = _load_config_file(args.config) if args.config else {}
    # An explicit threshold/target-skip flag suppresses the file's values
    # for the whole mutually-exclusive group.
    if getattr(args, "threshold", None) is not None or getattr(args, "target_skip", None) is not None:
        file_values.pop("threshold", None)
        file_values.pop("target_skip", None)
    for name, value in vars(args).items():
        if value is not None:
            continue
        if name in file_values:
            cast = _CASTS.get(name, str)
            try:
                setattr(args, name, cast(file_values[name]))
            except ValueError as exc:
                raise ParseError(f"config key {name}: {exc}") from exc
        elif name in _DEFAULTS:
            setattr(args, name, _DEFAULTS[name])
    if getattr(args, "threshold", None) is not None and getattr(args, "target_skip", None) is not None:
        raise ParseError("threshold and target-skip are mutually exclusive")
    return args


def _make_provider(spec: str, seed: int):
    if spec == "test":
        return emb.TestProvider(seed)
    if spec == "remote":
        url = os.environ.get(PROVIDER_URL_ENV)
        if not url:
            raise ParseError(f"--provider remote needs {PROVIDER_URL_ENV} or remote:URL")
        return emb.RemoteProvider(url)
    if spec.startswith("remote:"):
        return emb.RemoteProvider(spec.split(":", 1)[1])
    raise ParseError(f"unknown provider spec {spec!r} (use test or remote:URL)")


def _load_precomputed(path: str) -> emb.PrecomputedProvider:
    images = emb.load_embeddings_file(path)
    prompts_path = emb.prompts_sidecar_path(path)
    if not prompts_path.exists():
        raise ParseError(f"prompt embeddings file {prompts_path} not found")
    texts = emb.load_embeddings_file(prompts_path)
    provider = emb.PrecomputedProvider(images, texts)
    provider.embed_id = images.__getitem__  # type: ignore[attr-defined]
    return provider


def cmd_embed(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    provider = _make_provider(args.provider, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp_main = out.with_name(out.name + ".tmp")
    prompts_path = emb.prompts_sidecar_path(out)
    tmp_prompts = prompts_path.with_name(prompts_path.name + ".tmp")
    try:
        records = {e.id: provider.embed_image(e.input_path) for e in manifest.entries}
        prompt_set = emb.build_prompt_set(provider, args.prompt_prefix)
        emb.write_embeddings_file(records, tmp_main)
        emb.write_embeddings_file(
            dict(zip(prompt_set.prompts, prompt_set.prompt_embeddings)), tmp_prompts
        )
    except ProviderUnavailableError as exc:
        tmp_main.unlink(missing_ok=True)
        tmp_prompts.unlink(missing_ok=True)
        print(f"error: provider unavailable: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    tmp_main.replace(out)
    tmp_prompts.replace(prompts_path)
    print(f"wrote {len(records)} embeddings to {out}")
    return EXIT_OK


def cmd_audit(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    provider = _load_precomputed(args.embeddings)
    prompt_set = emb.build_prompt_set(provider, args.prompt_prefix)
    embeddings_by_id = {e.id: provider.embed_id(e.id) for e in manifest.entries}
    profiles = {
        e.id: emb.similarity_profile(embeddings_by_id[e.id], prompt_set)
        for e in manifest.entries
    }
    bias, model, assignment = build_bias_report(
        embeddings_by_id, profiles, manifest, clusters=args.clusters, seed=args.seed
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    tsne_params = None
    if args.tsne:
        layout = tsne(
            [embeddings_by_id[e.id] for e in manifest.entries],
            perplexity=args.perplexity,
            seed=args.seed,
            iterations=args.tsne_iters,
        )
        ids = manifest.ids()
        labels = [e.dataset_label for e in manifest.entries]
        rep.write_tsne_csv(layout, ids, labels, out_dir / "tsne.csv")
        rep.plot_tsne_svg(layout, labels, out_dir / "tsne.svg")
        tsne_params = {
            "perplexity": args.perplexity,
            "iterations": args.tsne_iters,
            "final_kl": layout.final_kl,
        }

    payload = rep.bias_report_to_json(bias, args.clusters, args.seed, tsne_params)
    rep.write_bias_report(payload, out_dir / "bias_report.json")
    table = render_prompt_table(bias.prompt_means)
    (out_dir / "prompt_table.txt").write_text(table)
    print(table, end="")
    print(f"entropy={bias.entropy_nats:.6f} nats normalized={bias.normalized_entropy:.6f}")
    return EXIT_OK


def _build_run_config(args: argparse.Namespace, threshold: float) -> dict:
    # Worker count is deliberately absent: outputs are bit-identical for any
    # --workers, so the snapshot only holds result-determining settings.
    return {
        "seed": args.seed,
        "threshold": threshold,
        "target_skip": args.target_skip,
        "provider": args.provider if args.provider else f"embeddings:{args.embeddings}",
        "enhancer": args.enhancer,
        "prompt_prefix": args.prompt_prefix,
        "on_provider_error": args.on_provider_error,
        "adaptive": {
            "window": args.window,
            "epsilon": args.epsilon,
            "alpha": args.alpha,
            "beta": args.beta,
            "d_max": args.dmax,
            "tile": args.tile,
            "overlap": args.overlap,
        },
        "baseline": {
            "base_strength": args.base_strength,
            "saturation_boost": args.saturation_boost,
            "percentile_clip": args.percentile_clip,
        },
        "uncertainty": (
            {
                "passes": args.mc_passes,
                "gain_jitter_sigma": args.gain_jitter,
                "pass_drop_prob": args.pass_drop,
                "review_threshold": args.review_threshold,
            }
            if args.uncertainty
            else None
        ),
        "metric_defs": METRIC_DEFS_TAG,
    }


def cmd_run(args: argparse.Namespace) -> int:
    if (args.embeddings is None) == (args.provider is None):
        raise ParseError("exactly one of --embeddings or --provider is required")
    if args.threshold is None and args.target_skip is None:
        raise ParseError("one of --threshold or --target-skip is required")
    manifest = load_manifest(args.manifest)
    provider = (
        _load_precomputed(args.embeddings)
        if args.embeddings
        else _make_provider(args.provider, args.seed)
    )
    if args.enhancer == "baseline":
        enhancer = BaselineEnhancer(
            BaselineConfig(
                base_strength=args.base_strength,
                saturation_boost=args.saturation_boost,
                percentile_clip=args.percentile_clip,
            )
        )
    elif args.enhancer.startswith("external:"):
        enhancer = ExternalResultsEnhancer(args.enhancer.split(":", 1)[1])
    else:
        raise ParseError(f"unknown enhancer {args.enhancer!r}")

    params = AdaptiveParams(
        window=args.window,
        epsilon=args.epsilon,
        alpha=args.alpha,
        beta=args.beta,
        d_max=args.dmax,
        tile=args.tile,
        overlap=args.overlap,
    )
    options = PipelineOptions(
        out_dir=Path(args.out),
        seed=args.seed,
        workers=args.workers,
        stochastic=(
            StochasticConfig(
                passes=args.mc_passes,
                gain_jitter_sigma=args.gain_jitter,
                pass_drop_prob=args.pass_drop,
                seed=args.seed,
            )
            if args.uncertainty
            else None
        ),
        review_threshold=args.review_threshold,
        on_provider_error=args.on_provider_error,
        prompt_prefix=args.prompt_prefix,
    )

    scores = None
    try:
        prompt_set = emb.build_prompt_set(provider, args.prompt_prefix)
        scores = compute_clarity_scores(manifest, provider, prompt_set)
    except ProviderUnavailableError as exc:
        if args.on_provider_error == "abort":
            print(f"error: provider unavailable: {exc}", file=sys.stderr)
            return EXIT_CONFIG

    if args.target_skip is not None:
        if scores is None:
            raise ParseError("cannot calibrate a skip target without clarity scores")
        threshold = calibrate_threshold(list(scores.values()), args.target_skip)
    else:
        threshold = args.threshold

    records = run_pipeline(
        manifest, provider, enhancer, threshold, params, options,
        precomputed_scores=scores,
    )
    report = rep.make_run_report(records, _build_run_config(args, threshold))
    out_dir = Path(args.out)
    rep.write_run_report(report, out_dir / "run.json")
    rep.write_csv(records, out_dir / "run.csv")

    agg = report.aggregates
    label_rows = {
        label: info["metric_means"] for label, info in agg["by_dataset"].items()
    }
    if any(v is not None for v in label_rows.values()):
        (out_dir / "metrics_table.txt").write_text(rep.render_metric_table(label_rows))

    summary = (
        f"skipped={agg['skipped']}/{agg['processed']} "
        f"savings={format_savings(agg['skip_fraction'])}"
    )
    if agg["metric_means"] is not None:
        summary += f" mean_psnr={agg['metric_means']['psnr_db']:.3f}"
    print(summary)

    if agg["processed"] and agg["failed"] / agg["n"] > 0.10:
        for r in records:
            if r.error:
                print(f"error: {r.id}: {r.error}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.pairs)
    missing_gt = [e.id for e in manifest.entries if e.gt_path is None]
    if missing_gt:
        raise ParseError(f"entries without gt: {', '.join(missing_gt[:5])}")
    results_dir = Path(args.results)
    model_dirs = sorted(p for p in results_dir.iterdir() if p.is_dir())
    if not model_dirs:
        raise ParseError(f"{results_dir} holds no model sub-directories")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    failures: list[str] = []
    rows: dict[str, dict | None] = {}
    per_model: dict[str, dict] = {}
    for model_dir in model_dirs:
        sets = []
        per_image = {}
        for entry in manifest.entries:
            try:
                out_img = external_enhance(model_dir, entry.id)
                gt = load_image(entry.gt_path)
                metrics = evaluate_pair(out_img, gt)
            except AquagateError as exc:
                failures.append(f"{model_dir.name}/{entry.id}: {type(exc).__name__}: {exc}")
                continue
            sets.append(metrics)
            per_image[entry.id] = metrics.as_dict()
        means = (
            {
                name: sum(getattr(s, name) for s in sets) / len(sets)
                for name in ("ssim", "psnr_db", "uiqm", "uciqe", "fsim")
            }
            if sets
            else None
        )
        rows[model_dir.name] = means
        per_model[model_dir.name] = {"means": means, "per_image": per_image}

    table = rep.render_metric_table(rows)
    (out_dir / "eval_table.txt").write_text(table)
    (out_dir / "eval.json").write_text(
        json.dumps(
            {"schema_version": rep.SCHEMA_VERSION, "models": per_model},
            indent=2,
            allow_nan=False,
        )
        + "\n"
    )
    print(table, end="")
    if failures:
        for line in failures:
            print(f"error: {line}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_ablation(args: argparse.Namespace) -> int:
    gated = rep.load_run_report(args.gated)
    full = rep.load_run_report(args.full)
    reference = {}
    for item in args.reference_drop or []:
        label, _, value = item.partition("=")
        if not value:
            raise ParseError(f"--reference-drop expects LABEL=PCT, got {item!r}")
        reference[label] = float(value)
    table = rep.ablation_table(gated, full, reference)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "ablation.json").write_text(
        json.dumps(table, indent=2, allow_nan=False) + "\n"
    )
    text = rep.render_ablation_table(table)
    (out_dir / "ablation.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aquagate",
        description="Clarity-gated adaptive underwater image enhancement pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--config", default=None, help="flat key=value config file")
        p.add_argument("--prompt-prefix", dest="prompt_prefix", default=None)

    p_embed = sub.add_parser("embed", help="embed manifest images to an EBAE file")
    common(p_embed)
    p_embed.add_argument("--manifest", required=True)
    p_embed.add_argument("--provider", required=True, help="test or remote:URL")
    p_embed.add_argument("--out", required=True)
    p_embed.set_defaults(func=cmd_embed)

    p_audit = sub.add_parser("audit", help="dataset bias report from embeddings")
    common(p_audit)
    p_audit.add_argument("--manifest", required=True)
    p_audit.add_argument("--embeddings", required=True)
    p_audit.add_argument("--clusters", type=int, default=None)
    p_audit.add_argument("--tsne", action=argparse.BooleanOptionalAction, default=None)
    p_audit.add_argument("--perplexity", type=float, default=None)
    p_audit.add_argument("--tsne-iters", dest="tsne_iters", type=int, default=None)
    p_audit.add_argument("--out", required=True)
    p_audit.set_defaults(func=cmd_audit)

    p_run = sub.add_parser("run", help="gated enhancement over a manifest")
    common(p_run)
    p_run.add_argument("--manifest", required=True)
    p_run.add_argument("--embeddings", default=None)
    p_run.add_argument("--provider", default=None)
    p_run.add_argument("--threshold", type=float, default=None)
    p_run.add_argument("--target-skip", dest="target_skip", type=float, default=None)
    p_run.add_argument("--alpha", type=float, default=None)
    p_run.add_argument("--beta", type=float, default=None)
    p_run.add_argument("--dmax", type=int, default=None)
    p_run.add_argument("--window", type=int, default=None)
    p_run.add_argument("--tile", type=int, default=None)
    p_run.add_argument("--overlap", type=int, default=None)
    p_run.add_argument("--epsilon", type=float, default=None)
    p_run.add_argument("--enhancer", default=None, help="baseline or external:DIR")
    p_run.add_argument(
        "--uncertainty", action=argparse.BooleanOptionalAction, default=None
    )
    p_run.add_argument("--mc-passes", dest="mc_passes", type=int, default=None)
    p_run.add_argument("--gain-jitter", dest="gain_jitter", type=float, default=None)
    p_run.add_argument("--pass-drop", dest="pass_drop", type=float, default=None)
    p_run.add_argument(
        "--review-threshold", dest="review_threshold", type=float, default=None
    )
    p_run.add_argument("--base-strength", dest="base_strength", type=float, default=None)
    p_run.add_argument(
        "--saturation-boost", dest="saturation_boost", type=float, default=None
    )
    p_run.add_argument(
        "--percentile-clip", dest="percentile_clip", type=float, default=None
    )
    p_run.add_argument(
        "--on-provider-error",
        dest="on_provider_error",
        choices=["abort", "skip-gating"],
        default=None,
    )
    p_run.add_argument("--out", required=True)
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="evaluate precomputed results against GT")
    common(p_eval)
    p_eval.add_argument("--pairs", required=True, help="manifest with gt paths")
    p_eval.add_argument("--results", required=True, help="dir of per-model subdirs")
    p_eval.add_argument("--out", required=True)
    p_eval.set_defaults(func=cmd_eval)

    p_abl = sub.add_parser("ablation", help="compare gated vs full run reports")
    common(p_abl)
    p_abl.add_argument("--gated", required=True)
    p_abl.add_argument("--full", required=True)
    p_abl.add_argument(
        "--reference-drop",
        dest="reference_drop",
        action="append",
        help="LABEL=PCT reference PSNR drop to print beside the recomputed one",
    )
    p_abl.add_argument("--out", required=True)
    p_abl.set_defaults(func=cmd_ablation)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _resolve(args)
        return args.func(args)
    except (AquagateError, FileNotFoundError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

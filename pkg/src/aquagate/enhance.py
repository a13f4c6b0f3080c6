"""Clarity gating, the multi-pass baseline enhancer, and the pipeline run.

Gating skips images whose clarity score strictly exceeds the threshold;
everything else gets a depth plan and tile-wise enhancement. The baseline
enhancer is a fully specified classical stand-in for an offline model:
gray-world white balance, then per tile `depth` refinement passes of
percentile contrast stretching with halving strengths.
"""

from __future__ import annotations

import enum
import math
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from .adaptive import AdaptiveParams, CostUnits, DepthPlan, plan as make_plan
from .embeddings import (
    DEFAULT_PROMPT_PREFIX,
    EmbeddingProvider,
    PromptSet,
    build_prompt_set,
    clarity_score,
    similarity_profile,
)
from .errors import (
    AquagateError,
    EmptyInputError,
    EmptyScoresError,
    MissingResultError,
    PlanMismatchError,
    ProviderUnavailableError,
)
from .images import ImageBuf, DatasetManifest, ManifestEntry, load_image, save_image
from .quality import MetricSet, evaluate_pair
from .uncertainty import (
    StochasticConfig,
    mc_variance,
    pass_seed,
    write_variance_png,
    write_variance_raw,
)

_LUMA_R = 0.299
_LUMA_B = 0.114

_WB_GAIN_MIN = 0.5
_WB_GAIN_MAX = 2.0

_DEGENERATE_SPAN = 1e-6


class Decision(enum.Enum):
    SKIP = "skip"
    ENHANCE = "enhance"


@dataclass(frozen=True)
class GateDecision:
    decision: Decision
    score: float | None
    threshold: float

    @property
    def skipped(self) -> bool:
        return self.decision is Decision.SKIP


@dataclass(frozen=True)
class BaselineConfig:
    base_strength: float = 0.5
    saturation_boost: float = 0.1
    percentile_clip: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.base_strength <= 1.0:
            raise ValueError("base_strength must be in (0, 1]")
        if self.saturation_boost < 0:
            raise ValueError("saturation_boost must be >= 0")
        if not 0.0 <= self.percentile_clip < 50.0:
            raise ValueError("percentile_clip must be in [0, 50)")


@runtime_checkable
class Enhancer(Protocol):
    def enhance(
        self,
        img: ImageBuf,
        plan: DepthPlan,
        noise: StochasticConfig | None = None,
        image_id: str | None = None,
    ) -> ImageBuf: ...


def gate(score: float, threshold: float) -> GateDecision:
    """Skip when the clarity score strictly exceeds the threshold."""
    decision = Decision.SKIP if score > threshold else Decision.ENHANCE
    return GateDecision(decision=decision, score=score, threshold=threshold)


def calibrate_threshold(scores: list[float], target_skip_rate: float) -> float:
    """Threshold whose strict-greater gate skips ~target_skip_rate of scores.

    Returns the (1 - rate)-quantile with linear interpolation; a rate of 1
    returns a value just below the minimum so every score passes the gate.
    """
    if not scores:
        raise EmptyScoresError("no scores to calibrate against")
    if not 0.0 <= target_skip_rate <= 1.0:
        raise ValueError("target skip rate must be in [0, 1]")
    if target_skip_rate == 1.0:
        return math.nextafter(min(scores), -math.inf)
    return float(np.quantile(np.asarray(scores, dtype=np.float64), 1.0 - target_skip_rate))


def _plain_luma(region: np.ndarray) -> np.ndarray:
    # Working-range luma (no clamp): mid-pipeline values may leave [0, 1].
    r, g, b = region[:, :, 0], region[:, :, 1], region[:, :, 2]
    return g + _LUMA_R * (r - g) + _LUMA_B * (b - g)


def _feather_weights(lo: int, hi: int, core0: int, core1: int) -> np.ndarray:
    """1-D blend weights: 1 inside the core, linear ramp over the expansion."""
    w = np.ones(hi - lo)
    left = core0 - lo
    if left > 0:
        w[:left] = (np.arange(1, left + 1)) / (left + 1)
    right = hi - core1
    if right > 0:
        w[hi - lo - right :] = (np.arange(right, 0, -1)) / (right + 1)
    return w


class BaselineEnhancer:
    """Deterministic multi-pass enhancer driven by a depth plan."""

    reports_plan_cost = True
    supports_noise = True

    def __init__(self, cfg: BaselineConfig | None = None):
        self.cfg = cfg or BaselineConfig()

    def enhance(
        self,
        img: ImageBuf,
        plan: DepthPlan,
        noise: StochasticConfig | None = None,
        image_id: str | None = None,
    ) -> ImageBuf:
        if plan.height != img.height or plan.width != img.width:
            raise PlanMismatchError(
                f"plan {plan.height}x{plan.width} vs image {img.height}x{img.width}"
            )
        rng = np.random.Generator(np.random.PCG64(noise.seed)) if noise else None

        # Stage 1: gray-world white balance over the whole image.
        data = img.data
        l_mean = float(_plain_luma(data).mean())
        ch_means = data.mean(axis=(0, 1))
        gains = np.ones(3)
        nonzero = ch_means > 0
        gains[nonzero] = l_mean / ch_means[nonzero]
        gains = np.clip(gains, _WB_GAIN_MIN, _WB_GAIN_MAX)
        if rng is not None:
            gains = gains * np.exp(rng.normal(0.0, noise.gain_jitter_sigma, size=3))
        base = data * gains[None, None, :]

        # Stage 2: per-tile refinement passes, feather-blended over overlaps.
        accum = np.zeros_like(base)
        weight = np.zeros((img.height, img.width))
        ov = plan.overlap
        for tile in plan.tiles:
            y0 = max(0, tile.y0 - ov)
            y1 = min(img.height, tile.y1 + ov)
            x0 = max(0, tile.x0 - ov)
            x1 = min(img.width, tile.x1 + ov)
            region = base[y0:y1, x0:x1].copy()
            for k in range(1, tile.depth + 1):
                if rng is not None and rng.random() < noise.pass_drop_prob:
                    continue
                strength = self.cfg.base_strength / 2.0 ** (k - 1)
                region = self._refine(region, strength)
            w2d = np.outer(
                _feather_weights(y0, y1, tile.y0, tile.y1),
                _feather_weights(x0, x1, tile.x0, tile.x1),
            )
            accum[y0:y1, x0:x1] += region * w2d[:, :, None]
            weight[y0:y1, x0:x1] += w2d
        out = accum / weight[:, :, None]
        return ImageBuf(np.clip(out, 0.0, 1.0))

    def _refine(self, region: np.ndarray, strength: float) -> np.ndarray:
        lum = _plain_luma(region)
        clip = self.cfg.percentile_clip
        p_lo, p_hi = np.percentile(lum, [clip, 100.0 - clip])
        if p_hi - p_lo < _DEGENERATE_SPAN:
            return region
        stretched = np.clip((lum - p_lo) / (p_hi - p_lo), 0.0, 1.0)
        new_lum = (1.0 - strength) * lum + strength * stretched
        chroma = region - lum[:, :, None]
        sat = 1.0 + self.cfg.saturation_boost * strength
        return new_lum[:, :, None] + chroma * sat


def external_enhance(directory: str | Path, image_id: str) -> ImageBuf:
    """Load a pre-computed result image `<dir>/<id>.png|jpg`."""
    directory = Path(directory)
    for ext in ("png", "jpg", "jpeg"):
        candidate = directory / f"{image_id}.{ext}"
        if candidate.exists():
            return load_image(candidate)
    raise MissingResultError(f"{directory}/{image_id}.(png|jpg) not found")


class ExternalResultsEnhancer:
    """Adapter serving pre-computed model outputs from a directory."""

    reports_plan_cost = False
    supports_noise = False

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def enhance(
        self,
        img: ImageBuf,
        plan: DepthPlan,
        noise: StochasticConfig | None = None,
        image_id: str | None = None,
    ) -> ImageBuf:
        if image_id is None:
            raise MissingResultError("external results need the image id")
        return external_enhance(self.directory, image_id)


@dataclass
class RunRecord:
    id: str
    dataset_label: str
    decision: str
    clarity: float | None
    threshold: float
    cost_units: float
    full_units: float
    output_path: str | None
    metrics: MetricSet | None = None
    uncertainty: float | None = None
    flagged: bool | None = None
    uncertainty_scale: float | None = None
    error: str | None = None


@dataclass(frozen=True)
class PipelineOptions:
    out_dir: Path
    seed: int = 42
    workers: int = 1
    stochastic: StochasticConfig | None = None
    review_threshold: float = 1e-3
    on_provider_error: str = "abort"  # or "skip-gating"
    prompt_prefix: str = DEFAULT_PROMPT_PREFIX
    baseline: BaselineConfig | None = None

    def __post_init__(self):
        if self.on_provider_error not in ("abort", "skip-gating"):
            raise ValueError("on_provider_error must be 'abort' or 'skip-gating'")


def _image_embedding(provider: EmbeddingProvider, entry: ManifestEntry):
    by_id = getattr(provider, "embed_id", None)
    if by_id is not None:
        return by_id(entry.id)
    return provider.embed_image(entry.input_path)


def compute_clarity_scores(
    manifest: DatasetManifest,
    provider: EmbeddingProvider,
    prompts: PromptSet,
) -> dict[str, float]:
    """Clarity score per manifest id; raises per-provider errors unwrapped."""
    scores: dict[str, float] = {}
    for entry in manifest.entries:
        profile = similarity_profile(_image_embedding(provider, entry), prompts)
        scores[entry.id] = clarity_score(profile)
    return scores


def run_pipeline(
    manifest: DatasetManifest,
    provider: EmbeddingProvider,
    enhancer: Enhancer,
    threshold: float,
    params: AdaptiveParams,
    options: PipelineOptions,
    precomputed_scores: dict[str, float] | None = None,
) -> list[RunRecord]:
    """Gate, plan, and enhance every manifest image; write outputs.

    Skipped inputs are byte-copied to out/skipped, enhanced ones written as
    PNG to out/enhanced; per-image failures are recorded, not raised.
    Records follow manifest order regardless of worker scheduling.
    """
    if len(manifest) == 0:
        raise EmptyInputError("manifest holds no entries")
    out_dir = Path(options.out_dir)
    (out_dir / "enhanced").mkdir(parents=True, exist_ok=True)
    (out_dir / "skipped").mkdir(parents=True, exist_ok=True)

    gating_enabled = True
    scores: dict[str, float] = {}
    if precomputed_scores is not None:
        scores = dict(precomputed_scores)
    else:
        try:
            prompts = build_prompt_set(provider, options.prompt_prefix)
            scores = compute_clarity_scores(manifest, provider, prompts)
        except ProviderUnavailableError:
            if options.on_provider_error == "abort":
                raise
            gating_enabled = False

    def process(entry: ManifestEntry) -> RunRecord:
        try:
            return _process_entry(
                entry,
                scores.get(entry.id) if gating_enabled else None,
                enhancer,
                threshold,
                params,
                options,
                out_dir,
            )
        except (AquagateError, OSError) as exc:
            return RunRecord(
                id=entry.id,
                dataset_label=entry.dataset_label,
                decision="error",
                clarity=scores.get(entry.id) if gating_enabled else None,
                threshold=threshold,
                cost_units=0.0,
                full_units=0.0,
                output_path=None,
                error=f"{type(exc).__name__}: {exc}",
            )

    if options.workers > 1:
        with ThreadPoolExecutor(max_workers=options.workers) as pool:
            records = list(pool.map(process, manifest.entries))
    else:
        records = [process(e) for e in manifest.entries]
    return records


def _process_entry(
    entry: ManifestEntry,
    score: float | None,
    enhancer: Enhancer,
    threshold: float,
    params: AdaptiveParams,
    options: PipelineOptions,
    out_dir: Path,
) -> RunRecord:
    img = load_image(entry.input_path)
    full_units = float(params.d_max * img.height * img.width)
    if score is None:
        decision = GateDecision(Decision.ENHANCE, None, threshold)
    else:
        decision = gate(score, threshold)

    uncertainty_scalar = None
    flagged = None
    uncertainty_scale = None
    if decision.skipped:
        src = Path(entry.input_path)
        out_path = out_dir / "skipped" / (entry.id + src.suffix)
        shutil.copyfile(src, out_path)
        cost = CostUnits(units=0.0, full_units=full_units)
        result_img = img
    else:
        depth_plan, cost = make_plan(img, params)
        if not getattr(enhancer, "reports_plan_cost", False):
            cost = CostUnits(units=full_units, full_units=full_units)
        result_img = enhancer.enhance(img, depth_plan, image_id=entry.id)
        out_path = out_dir / "enhanced" / f"{entry.id}.png"
        save_image(result_img, out_path)
        if options.stochastic is not None and getattr(enhancer, "supports_noise", False):
            cfg = StochasticConfig(
                passes=options.stochastic.passes,
                gain_jitter_sigma=options.stochastic.gain_jitter_sigma,
                pass_drop_prob=options.stochastic.pass_drop_prob,
                seed=pass_seed(options.seed, _stable_id_index(entry.id)),
            )
            var = mc_variance(
                img, depth_plan, enhancer, cfg, options.review_threshold
            )
            unc_dir = out_dir / "uncertainty"
            unc_dir.mkdir(parents=True, exist_ok=True)
            uncertainty_scale = write_variance_png(
                var.variance_map, unc_dir / f"{entry.id}.png"
            )
            write_variance_raw(var.variance_map, unc_dir / f"{entry.id}.ebav")
            uncertainty_scalar = var.scalar
            flagged = var.flagged

    metrics = None
    if entry.gt_path is not None:
        gt = load_image(entry.gt_path)
        metrics = evaluate_pair(result_img, gt)

    return RunRecord(
        id=entry.id,
        dataset_label=entry.dataset_label,
        decision=decision.decision.value,
        clarity=decision.score,
        threshold=threshold,
        cost_units=cost.units,
        full_units=cost.full_units,
        # Relative to the run directory so reports are relocatable and
        # byte-identical across output locations.
        output_path=str(out_path.relative_to(out_dir)),
        metrics=metrics,
        uncertainty=uncertainty_scalar,
        flagged=flagged,
        uncertainty_scale=uncertainty_scale,
    )


def _stable_id_index(image_id: str) -> int:
    import hashlib

    return int.from_bytes(hashlib.sha256(image_id.encode()).digest()[:4], "little")

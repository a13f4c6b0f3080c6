"""Clarity-gated adaptive underwater image enhancement toolkit."""

from .adaptive import (
    AdaptiveParams,
    CostUnits,
    DegradationMap,
    DepthPlan,
    degradation_map,
    dynamic_depth,
    format_savings,
    plan,
    savings_fraction,
)
from .audit import (
    Assignment,
    BiasReport,
    ClusterModel,
    Weights,
    dataset_entropy,
    kmeans,
    normalized_entropy,
    prompt_bias_table,
    reweight,
    weighted_aggregate,
)
from .embeddings import (
    CONDITIONS,
    Embedding,
    EmbeddingProvider,
    PromptSet,
    RemoteProvider,
    SimilarityProfile,
    TestProvider,
    clarity_score,
    cosine,
    load_embeddings_file,
    similarity_profile,
    write_embeddings_file,
)
from .enhance import (
    BaselineConfig,
    BaselineEnhancer,
    Decision,
    ExternalResultsEnhancer,
    GateDecision,
    RunRecord,
    calibrate_threshold,
    external_enhance,
    gate,
    run_pipeline,
)
from .errors import AquagateError
from .images import (
    DatasetManifest,
    ImageBuf,
    LumaBuf,
    ManifestEntry,
    load_image,
    load_manifest,
    luma,
    save_image,
)
from .projection import TsneLayout, tsne
from .quality import (
    MetricSet,
    dataset_means,
    evaluate_pair,
    fsim,
    psnr,
    ssim,
    uciqe,
    uiqm,
)
from .uncertainty import StochasticConfig, VarianceResult, flag, mc_variance

__version__ = "0.1.0"

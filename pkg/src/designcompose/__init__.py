"""designcompose: identity-preserving compositing of layered design documents.

Places foreground elements (images, SVGs) onto a background canvas at given
layout positions, harmonizing style while preserving element identity via
attention-guided token blending and flow-matched latent initialization.
Ships with a fully deterministic mock model backend for desk-scale runs.
"""

from .backend import (
    AttentionStack,
    CompositionPrompt,
    Latent,
    MockBackend,
    ModelBackend,
    TokenSet,
)
from .compose import (
    ComposeConfig,
    CompositionTrace,
    ElementRecord,
    compose_document,
    compose_element,
    init_canvas,
)
from .config import PipelineConfig, load_pipeline_config
from .document import (
    BoundingBox,
    Canvas,
    DesignDocument,
    DesignElement,
    dump_design,
    foreground_elements,
    load_design,
)
from .identity import (
    EmbeddingVector,
    IdentityReport,
    ReferenceEmbedder,
    cosine_similarity,
    embed,
    euclidean,
    evaluate_pairs,
    get_embedder,
    manhattan,
    register_embedder,
)
from .injection import InjectionConfig, InjectionTrace, blend_tokens, run_token_injection
from .masks import (
    BinaryMask,
    complement,
    downsample_to_latent,
    mask_from_alpha,
    mask_from_bbox,
    naive_composite,
    placed_alpha_mask,
)
from .relevance import (
    RelevanceScores,
    TokenIndexSet,
    aggregate_attention,
    relevance,
    select_top,
)
from .scheduler import (
    SchedulerConfig,
    SigmaSchedule,
    add_noise,
    denoise,
    invert_canvas,
    make_schedule,
)

__version__ = "0.1.0"

__all__ = [
    "AttentionStack",
    "BinaryMask",
    "BoundingBox",
    "Canvas",
    "ComposeConfig",
    "CompositionPrompt",
    "CompositionTrace",
    "DesignDocument",
    "DesignElement",
    "ElementRecord",
    "EmbeddingVector",
    "IdentityReport",
    "InjectionConfig",
    "InjectionTrace",
    "Latent",
    "MockBackend",
    "ModelBackend",
    "PipelineConfig",
    "ReferenceEmbedder",
    "RelevanceScores",
    "SchedulerConfig",
    "SigmaSchedule",
    "TokenIndexSet",
    "TokenSet",
    "add_noise",
    "aggregate_attention",
    "blend_tokens",
    "complement",
    "compose_document",
    "compose_element",
    "cosine_similarity",
    "denoise",
    "downsample_to_latent",
    "dump_design",
    "embed",
    "euclidean",
    "evaluate_pairs",
    "foreground_elements",
    "get_embedder",
    "init_canvas",
    "invert_canvas",
    "load_design",
    "load_pipeline_config",
    "make_schedule",
    "manhattan",
    "mask_from_alpha",
    "mask_from_bbox",
    "naive_composite",
    "placed_alpha_mask",
    "register_embedder",
    "relevance",
    "run_token_injection",
    "select_top",
]

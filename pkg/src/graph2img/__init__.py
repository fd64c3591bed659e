"""graph2img: deterministic scene-graph driven image generation and editing.

The package covers the full desk-scale pipeline: scene-graph parsing and
algebra, caption/prompt construction, a hashing text encoder, toy
autoregressive token generation with a fixed palette codec, and
DDIM-based latent editing with joint source/target classifier-free
guidance, all unified behind a single dispatch entry point and CLI.
"""

from .captions import Caption, PromptPair, phrase, s2cap, sg2prompts
from .diffusion import (
    DiffusionSchedule,
    EditConfig,
    GaussianAnalyticDenoiser,
    LinearDenoiserParams,
    add_noise,
    analytic_eps,
    build_schedule,
    cfg_blend,
    ddim_denoise,
    ddim_invert,
    ddim_step,
    edit,
    noise_pred_loss,
)
from .errors import (
    CollisionError,
    ConfigurationError,
    NotFoundError,
    NumericDivergenceError,
    ParseError,
    PipelineError,
    ReferentialIntegrityError,
    SingularityError,
    ValidationError,
)
from .graphs import (
    EntityBox,
    GraphDelta,
    RelationTriplet,
    SceneGraph,
    graph_diff,
    order_by_salience,
    parse_scene_graph,
    prune_relations,
    salience,
    serialize_scene_graph,
)
from .pipeline import (
    EditRequest,
    EditScript,
    GenerateRequest,
    PipelineConfig,
    PipelineModels,
    apply_instruction,
    load_extraction,
    parse_edit_script,
    unified_dispatch,
)
from .rng import SplitMix64
from .text_encoding import TextEmbedding, encode_text, null_embedding
from .vargen import (
    ARModelParams,
    Codebook,
    ImageGrid,
    TokenSequence,
    ar_next_logits,
    decode_tokens,
    default_codebook,
    encode_image,
    init_ar_params,
    sample_tokens,
    token_nll,
    train_step,
)

__version__ = "0.1.0"

"""Training-free layout-conditional image generation engine.

Two-stage sampling over pluggable model backends: each object is first
generated alone on a flat background under prompt-adjusted cross-attention,
then the scene background is inpainted around the segmenter-refined objects
under region-grouped cross-attention with known-region anchoring. Bundled
deterministic toy backends run the whole pipeline, exactly, without model
weights.
"""

__version__ = "0.1.0"

from .backends import (
    AttentionSite,
    BackendSet,
    TextEmbedding,
    ToyWorld,
    toy_backend_set,
    toy_denoiser_predict,
)
from .composition import CcConfig, SceneResult, compose_scene, init_inpaint_latent
from .config import EngineConfig, load_config
from .diffusion import (
    Schedule,
    TimestepPlan,
    ddim_step,
    forward_noise,
    make_schedule,
    plan_timesteps,
    predict_x0,
)
from .errors import EngineError
from .evaluation import EvalReport, evaluate_pairs, local_clip_score, local_iou, prepare_layouts
from .layout import BBox, Layout, ObjectSpec, load_layout, load_layout_file, save_layout
from .paca import PacaConfig, PacaController, apply_paca, paca_weight
from .regca import GroupAssignment, RegcaController, assign_groups, build_group_prompts, regca_attention
from .segmentation import CompositeKnown, compose_known, refine_mask
from .sog import ObjectResult, SogConfig, generate_object

__all__ = [
    "__version__",
    "AttentionSite",
    "BBox",
    "BackendSet",
    "CcConfig",
    "CompositeKnown",
    "EngineConfig",
    "EngineError",
    "EvalReport",
    "GroupAssignment",
    "Layout",
    "ObjectResult",
    "ObjectSpec",
    "PacaConfig",
    "PacaController",
    "RegcaController",
    "SceneResult",
    "Schedule",
    "SogConfig",
    "TextEmbedding",
    "TimestepPlan",
    "ToyWorld",
    "apply_paca",
    "assign_groups",
    "build_group_prompts",
    "compose_known",
    "compose_scene",
    "ddim_step",
    "evaluate_pairs",
    "forward_noise",
    "generate_object",
    "init_inpaint_latent",
    "load_config",
    "load_layout",
    "load_layout_file",
    "local_clip_score",
    "local_iou",
    "make_schedule",
    "paca_weight",
    "plan_timesteps",
    "predict_x0",
    "prepare_layouts",
    "refine_mask",
    "regca_attention",
    "save_layout",
    "toy_backend_set",
    "toy_denoiser_predict",
]

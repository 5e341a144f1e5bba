from .baselines import MLPBaseline, mlp_forward
from .checkpoint import build_model, file_digest, load_checkpoint, save_checkpoint
from .config import MaskScheme, MLPConfig, ModelConfig
from .layers import (
    embed,
    encoder_block,
    expand_mask,
    inter_feature_attention,
    inter_sample_attention,
    multihead_attention,
)
from .net import MultiTabNet, forward, init_params, postprocess

__all__ = [
    "MLPBaseline", "MLPConfig", "MaskScheme", "ModelConfig", "MultiTabNet", "build_model",
    "embed", "encoder_block", "expand_mask", "file_digest", "forward", "init_params",
    "inter_feature_attention", "inter_sample_attention", "load_checkpoint", "mlp_forward",
    "multihead_attention", "postprocess", "save_checkpoint",
]

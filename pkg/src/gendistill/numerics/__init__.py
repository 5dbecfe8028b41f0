from .checkpoint import load_checkpoint, read_checkpoint, save_checkpoint
from .gradcheck import grad_check
from .kernels import BACKEND
from .layers import (
    ShapeError,
    affine_bwd,
    affine_fwd,
    conv1d_bwd,
    conv1d_fwd,
    dropout_bwd,
    dropout_fwd,
    embedding_bwd,
    embedding_fwd,
    maxpool_time_bwd,
    maxpool_time_fwd,
    mean_time_bwd,
    mean_time_fwd,
    relu_bwd,
    relu_fwd,
)
from .losses import cross_entropy_loss, kl_loss, log_softmax, soften, softmax
from .optim import Param, ParamStore, adam_step
from .rng import Rng

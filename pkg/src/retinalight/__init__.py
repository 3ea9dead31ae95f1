"""retinalight: retina-inspired low-light image restoration.

A deliberately tiny (108-parameter) depthwise convolutional enhancer with
Gaussian / difference-of-Gaussians structure, trained from scratch with a
hand-written backward pass, plus SSIM/PSNR evaluation and a CLI.
"""

from .dataio import ImagePair, PairedDataset, discover, load_pair
from .image import (
    ImageTensor,
    decode_png,
    encode_png,
    merge_channels,
    read_png,
    split_channels,
    write_png,
)
from .kernels import (
    GaussianSpec,
    PaddingMode,
    conv2d_backward,
    conv2d_same,
    dog_kernel,
    gaussian_kernel,
)
from .metrics import EvalReport, ImageScore, evaluate, psnr, ssim
from .model import (
    ForwardTape,
    ModelGrads,
    RetinaModel,
    StageParams,
    VariantConfig,
    backward,
    bc_fir,
    bc_recursive,
    bc_residual,
    forward,
    init_model,
    load_checkpoint,
    save_checkpoint,
)
from .training import (
    GradCheckReport,
    OptimizerState,
    TrainConfig,
    adam_step,
    grad_check,
    mse_loss,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "ImagePair",
    "PairedDataset",
    "discover",
    "load_pair",
    "ImageTensor",
    "decode_png",
    "encode_png",
    "merge_channels",
    "read_png",
    "split_channels",
    "write_png",
    "GaussianSpec",
    "PaddingMode",
    "conv2d_backward",
    "conv2d_same",
    "dog_kernel",
    "gaussian_kernel",
    "EvalReport",
    "ImageScore",
    "evaluate",
    "psnr",
    "ssim",
    "ForwardTape",
    "ModelGrads",
    "RetinaModel",
    "StageParams",
    "VariantConfig",
    "backward",
    "bc_fir",
    "bc_recursive",
    "bc_residual",
    "forward",
    "init_model",
    "load_checkpoint",
    "save_checkpoint",
    "GradCheckReport",
    "OptimizerState",
    "TrainConfig",
    "adam_step",
    "grad_check",
    "mse_loss",
    "train",
    "__version__",
]

"""Multi-coordinate mixer MLP for image classification.

The package bundles four layers that can be used independently:

* :mod:`mcmlp.autograd` — a minimal reverse-mode tensor engine;
* :mod:`mcmlp.transforms` — fast orthonormal DCT and Walsh-Hadamard kernels
  with differentiable batched 2-D wrappers;
* :mod:`mcmlp.model` / :mod:`mcmlp.training` — the mixer network and its
  training recipe;
* :mod:`mcmlp.data` / :mod:`mcmlp.cli` — CIFAR-100 binary ingestion,
  checkpoints, metrics, and the command-line interface.

Scikit-learn style wrappers live in :mod:`mcmlp.estimators`.
"""

from .__about__ import __version__
from .autograd import (
    Tensor,
    backward,
    finite_diff_grad,
    get_default_dtype,
    no_grad,
    precision,
    set_default_dtype,
)
from .errors import (
    CheckpointChecksumError,
    CheckpointError,
    CheckpointFormatError,
    CheckpointShapeError,
    CheckpointVersionError,
    ConfigError,
    DataFormatError,
    McmlpError,
    NumericsError,
    ShapeError,
)
from .estimators import DiscreteCosine2D, MixerClassifier, WalshHadamard2D
from .model import (
    Model,
    ModelConfig,
    count_macs,
    count_params,
    init_model,
    mc_block_forward,
    mixer_forward,
    model_forward,
)
from .training import (
    AdamWState,
    TrainConfig,
    adamw_step,
    cutmix,
    evaluate_top1,
    lr_at,
    mixup,
    train_epoch,
)
from .transforms import (
    DctPlan,
    dct1d_fast,
    dct1d_naive,
    dct1d_transpose,
    dct2d,
    fwht,
    get_plan,
    hadamard2d,
    hadamard_matrix,
)

__all__ = [
    "__version__",
    "Tensor",
    "backward",
    "finite_diff_grad",
    "no_grad",
    "precision",
    "set_default_dtype",
    "get_default_dtype",
    "McmlpError",
    "ShapeError",
    "ConfigError",
    "DataFormatError",
    "CheckpointError",
    "CheckpointFormatError",
    "CheckpointVersionError",
    "CheckpointChecksumError",
    "CheckpointShapeError",
    "NumericsError",
    "DctPlan",
    "get_plan",
    "dct1d_naive",
    "dct1d_fast",
    "dct1d_transpose",
    "dct2d",
    "fwht",
    "hadamard_matrix",
    "hadamard2d",
    "Model",
    "ModelConfig",
    "init_model",
    "model_forward",
    "mixer_forward",
    "mc_block_forward",
    "count_params",
    "count_macs",
    "TrainConfig",
    "AdamWState",
    "adamw_step",
    "lr_at",
    "mixup",
    "cutmix",
    "train_epoch",
    "evaluate_top1",
    "DiscreteCosine2D",
    "WalshHadamard2D",
    "MixerClassifier",
]

"""Training toolkit for neural networks with finite discrete weights.

Pipeline: continuous pretraining (``pretrain``), discretization onto a
finite value set (``domain``), coordinate global-search training
(``train``), bit-packed weight storage (``domain``), plus the reduction
tying binary-weight training to QUBO (``qubo``).  ``cli`` wires these into
the ``conntra`` command.
"""

from ._kernels import BACKEND as kernel_backend
from .domain import (
    DiscreteSet,
    MemoryAccount,
    PackedCodes,
    discretize,
    load_packed,
    memory_account,
    pack,
    save_packed,
    ternary,
    unpack,
)
from .models import (
    LabeledDataset,
    ModelSpec,
    ParamVector,
    Prediction,
    classification_error,
    cross_entropy,
    euclidean_error,
    forward,
    param_count,
    param_layout,
)
# the pretrain() entry point stays namespaced (conntra.pretrain.pretrain) so
# the submodule attribute is not shadowed
from .pretrain import PretrainConfig, backprop_gradient, init_params, load_weights, save_weights
from .qubo import (
    BinaryTrainingInstance,
    QuboInstance,
    brute_force_qubo,
    brute_force_training,
    cholesky,
    qubo_value,
    reduce_qubo,
    symmetrize,
    training_value,
)
from .report import TrainReport
from .train import ConntraConfig, conntra_train, discrete_gradients, incremental_eval, make_logit_cache

__version__ = "0.1.0"

__all__ = [
    "BinaryTrainingInstance",
    "ConntraConfig",
    "DiscreteSet",
    "LabeledDataset",
    "MemoryAccount",
    "ModelSpec",
    "PackedCodes",
    "ParamVector",
    "Prediction",
    "PretrainConfig",
    "QuboInstance",
    "TrainReport",
    "backprop_gradient",
    "brute_force_qubo",
    "brute_force_training",
    "cholesky",
    "classification_error",
    "conntra_train",
    "cross_entropy",
    "discrete_gradients",
    "discretize",
    "euclidean_error",
    "forward",
    "incremental_eval",
    "init_params",
    "kernel_backend",
    "load_packed",
    "load_weights",
    "make_logit_cache",
    "memory_account",
    "pack",
    "param_count",
    "param_layout",
    "qubo_value",
    "reduce_qubo",
    "save_packed",
    "save_weights",
    "symmetrize",
    "ternary",
    "training_value",
    "unpack",
]

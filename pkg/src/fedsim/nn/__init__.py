""" From-scratch neural-network core: fixed architectures, forward/backward passes and
    SGD over flat float64 parameter vectors."""

from .arch import CNN_EMNIST, MLP_SMALL, ModelArch, init_params, param_count
from .batch import Batch, ExampleSet
from .gradcheck import gradcheck_suite, gradient_check, relative_error
from .layers import Conv2D, Dense, Layer, MaxPool2D
from .training import TrainHyper, forward, loss_and_grad, predict, sgd_train
from .vectors import l2_norm, project_l2_ball

__all__ = [
    "CNN_EMNIST",
    "MLP_SMALL",
    "ModelArch",
    "init_params",
    "param_count",
    "Batch",
    "ExampleSet",
    "gradcheck_suite",
    "gradient_check",
    "relative_error",
    "Layer",
    "Conv2D",
    "MaxPool2D",
    "Dense",
    "TrainHyper",
    "forward",
    "loss_and_grad",
    "predict",
    "sgd_train",
    "l2_norm",
    "project_l2_ball",
]

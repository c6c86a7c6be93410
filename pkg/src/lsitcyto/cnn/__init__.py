"""From-scratch convolutional networks: layers, Adam, training and transfer learning."""

from .layers import Conv2D, Dense, Flatten, MaxPool2D, SoftmaxOutput
from .network import (
    ARCHITECTURES,
    Network,
    Tape,
    build_classifier,
    build_deep_classifier,
    build_denoiser,
    build_fc_denoiser,
    load_network,
    predict,
    prepare_images,
    save_network,
)
from .optim import AdamState, adam_step
from .training import TrainConfig, denoise_images, fit, train, transfer_learn, widen_head

__all__ = [
    "ARCHITECTURES",
    "AdamState",
    "Conv2D",
    "Dense",
    "Flatten",
    "MaxPool2D",
    "Network",
    "SoftmaxOutput",
    "Tape",
    "TrainConfig",
    "adam_step",
    "build_classifier",
    "build_deep_classifier",
    "build_denoiser",
    "build_fc_denoiser",
    "denoise_images",
    "fit",
    "load_network",
    "predict",
    "prepare_images",
    "save_network",
    "train",
    "transfer_learn",
    "widen_head",
]

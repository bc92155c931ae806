"""Plaintext reference-model training and CSV weight export for the
fheact inference CLI."""

from .export import calibrate_betas, export_csv, fold_bn, folded_tensors
from .models import LeNet5, ResNet20, build_model
from .train import (
    DatasetMissing,
    square_resnet_divergence,
    train_lenet5,
    train_resnet20,
)

__version__ = "0.1.0"

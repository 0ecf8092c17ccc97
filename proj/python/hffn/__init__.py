"""High/low frequency fusion super-resolution network."""

from ._core import (
    ImageIoError,
    Model,
    ModelConfig,
    NumericError,
    TrainingError,
    WeightFileError,
    bicubic_resize,
    decompose,
    load_png,
    ops,
    psnr,
    rgb_to_y,
    save_png,
    ssim,
    synthetic_image,
    train_toy,
)

__all__ = [
    "ImageIoError",
    "Model",
    "ModelConfig",
    "NumericError",
    "TrainingError",
    "WeightFileError",
    "bicubic_resize",
    "decompose",
    "load_png",
    "ops",
    "psnr",
    "rgb_to_y",
    "save_png",
    "ssim",
    "synthetic_image",
    "train_toy",
]

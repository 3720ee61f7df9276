"""Deep-unfolded tight-frame recovery network (toy scale)."""

from .model import UnfoldedNet, loss_terms, psnr, soft_threshold, ssim, training_loss
from .operator import SensingFiles
from .train import evaluate_psnr, train

__all__ = [
    "SensingFiles",
    "UnfoldedNet",
    "evaluate_psnr",
    "loss_terms",
    "psnr",
    "soft_threshold",
    "ssim",
    "train",
    "training_loss",
]

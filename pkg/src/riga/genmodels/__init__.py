"""Conditional generative models over transformed images."""
from .base import CodeBook, TrainedGenerative, TrainingError, vq_quantize
from .cgan import CganConfig, cgan_generate, cgan_train
from .minority import balance_gap, generate_images, generate_minority
from .priors import PriorModel, code_log_likelihood, fit_code_prior, position_entropies, sample_codes
from .vqgan import VqganConfig, vqgan_generate, vqgan_train
from .vqvae import VqConfig, encode_codes, prior_train, reconstruct, vqvae_generate, vqvae_train

__all__ = [
    "CganConfig",
    "CodeBook",
    "PriorModel",
    "TrainedGenerative",
    "TrainingError",
    "VqConfig",
    "VqganConfig",
    "balance_gap",
    "cgan_generate",
    "cgan_train",
    "code_log_likelihood",
    "encode_codes",
    "fit_code_prior",
    "generate_images",
    "generate_minority",
    "position_entropies",
    "prior_train",
    "reconstruct",
    "sample_codes",
    "vq_quantize",
    "vqgan_generate",
    "vqgan_train",
    "vqvae_generate",
    "vqvae_train",
]

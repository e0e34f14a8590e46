"""Equivariant latent diffusion over block latent point clouds."""

from .model import LATENT_SCALE, Denoiser, LatentNormalizer, denormalize, normalize
from .schedule import NoiseSchedule, cosine_schedule, forward_sample, reverse_update
from .train import (denoise_step, ldm_loss, pocket_block_count, sample_ldm, sample_normalized,
                    train_ldm)

__all__ = [
    "Denoiser", "LATENT_SCALE", "LatentNormalizer", "NoiseSchedule", "cosine_schedule",
    "denoise_step", "denormalize", "forward_sample", "ldm_loss", "normalize",
    "pocket_block_count", "reverse_update", "sample_ldm", "sample_normalized", "train_ldm",
]

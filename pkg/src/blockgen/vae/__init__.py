"""Iterative full-atom variational autoencoder."""

from .decode import DecodeOptions, decode_structure, predict_inter_bonds, sample_vae
from .featurize import Entity, entity_to_graph, featurize, lookup_entity
from .losses import kl_loss, kl_coord, kl_state
from .model import (DecodeContext, FullAtomVAE, LatentCloud, VaeConfig, perturb_latent_coords)
from .train import VaeTrainConfig, train_vae, vae_loss

__all__ = [
    "DecodeContext", "DecodeOptions", "Entity", "FullAtomVAE", "LatentCloud", "VaeConfig",
    "VaeTrainConfig", "decode_structure", "entity_to_graph", "featurize", "kl_coord", "kl_loss",
    "kl_state", "lookup_entity", "perturb_latent_coords", "predict_inter_bonds", "sample_vae",
    "train_vae", "vae_loss",
]

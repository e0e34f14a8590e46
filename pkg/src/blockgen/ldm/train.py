"""Diffusion training and ancestral sampling over latent point clouds."""

from __future__ import annotations

import csv
import logging
from typing import Optional, Sequence

import numpy as np
import torch

from ..errors import ConfigError, DataError, NumericError
from ..vae.featurize import Entity
from ..vae.model import FullAtomVAE
from .model import Denoiser, denormalize, normalize
from .schedule import NoiseSchedule, forward_sample, reverse_update

log = logging.getLogger(__name__)

def denoise_step(u_t: torch.Tensor, u_site: torch.Tensor, t: int, denoiser, schedule: NoiseSchedule,
                 prompts: Optional[torch.Tensor] = None, generator: Optional[torch.Generator] = None,
                 xi: Optional[torch.Tensor] = None) -> torch.Tensor:
    """One reverse step for the binder points; site points are read, never written."""
    eps = denoiser(u_t, u_site, t, schedule.T, prompts)
    if not torch.isfinite(eps).all():
        raise NumericError(f"non-finite denoiser output at t={t}")
    return reverse_update(u_t, eps, t, schedule, xi, generator)


@torch.no_grad()
def encode_pair(vae: FullAtomVAE, binder: Optional[Entity], site: Entity, deterministic: bool,
                generator: Optional[torch.Generator] = None):
    lb = vae.encode(binder, deterministic, generator) if binder is not None else None
    ls = vae.encode(site, deterministic, generator)
    return lb, ls


def ldm_loss(denoiser: Denoiser, u0: torch.Tensor, u_site: torch.Tensor, t: int,
             schedule: NoiseSchedule, prompts: Optional[torch.Tensor] = None,
             generator: Optional[torch.Generator] = None,
             eps: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Mean over binder points of |eps - eps_theta(u_t, site, t)|^2."""
    ut, eps = forward_sample(u0, t, schedule, generator, eps)
    pred = denoiser(ut, u_site, t, schedule.T, prompts)
    return ((pred - eps) ** 2).sum(-1).mean()


def train_ldm(denoiser: Denoiser, vae: Optional[FullAtomVAE], dataset: Sequence[tuple[Entity, Entity]],
              schedule: NoiseSchedule, steps: int, lr: float = 1e-4,
              generator: Optional[torch.Generator] = None, sample_latents: bool = True,
              curve_path: Optional[str] = None, grad_clip: float = 1.0,
              log_every: int = 100) -> list[float]:
    """Fit the noise predictor on latents of a frozen autoencoder."""
    if vae is None:
        raise ConfigError("latent diffusion training needs a trained autoencoder")
    if not dataset:
        raise DataError("empty training set")
    for p in vae.parameters():
        p.requires_grad_(False)
    vae.eval()
    opt = torch.optim.Adam(denoiser.parameters(), lr=lr)
    cached = None
    if not sample_latents:
        cached = [encode_pair(vae, b, s, True) for b, s in dataset]
    history = []
    fh = writer = None
    if curve_path is not None:
        fh = open(curve_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
    denoiser.train()
    try:
        for step in range(steps):
            k = int(torch.randint(len(dataset), (), generator=generator))
            binder, site = dataset[k]
            lb, ls = cached[k] if cached is not None else encode_pair(vae, binder, site, False, generator)
            u0, us, _ = normalize(lb.z, lb.zvec, ls.z, ls.zvec)
            t = int(torch.randint(1, schedule.T + 1, (), generator=generator))
            loss = ldm_loss(denoiser, u0, us, t, schedule, binder.prompts, generator)
            opt.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(denoiser.parameters(), grad_clip)
            opt.step()
            history.append(loss.item())
            if writer is not None:
                writer.writerow([step, f"{history[-1]:.8g}"])
            if log_every and step % log_every == 0:
                log.info("ldm step %d loss %.4f", step, history[-1])
    finally:
        if fh is not None:
            fh.close()
    denoiser.eval()
    return history


@torch.no_grad()
def sample_normalized(u_site: torch.Tensor, n_blocks: int, denoiser, schedule: NoiseSchedule,
                      prompts: Optional[torch.Tensor] = None,
                      generator: Optional[torch.Generator] = None, dim: int = 11) -> torch.Tensor:
    """Run t = T..1 from standard normal noise; returns normalized binder rows."""
    if n_blocks < 1:
        raise ValueError("n_blocks must be >= 1")
    u = torch.randn((n_blocks, dim), generator=generator, dtype=u_site.dtype)
    for t in range(schedule.T, 0, -1):
        u = denoise_step(u, u_site, t, denoiser, schedule, prompts, generator)
    return u


@torch.no_grad()
def sample_ldm(site_z: torch.Tensor, site_zvec: torch.Tensor, n_blocks: int, prompts,
               denoiser, schedule: NoiseSchedule,
               generator: Optional[torch.Generator] = None) -> tuple[torch.Tensor, torch.Tensor]:
    """Binder latent states and coordinates in the original frame."""
    _, us, norm = normalize(None, None, site_z, site_zvec)
    pr = torch.as_tensor(np.asarray(prompts, dtype=np.int64)) if prompts is not None else None
    u = sample_normalized(us, n_blocks, denoiser, schedule, pr, generator, dim=us.shape[1])
    return denormalize(u, norm)


def pocket_block_count(site_zvec: torch.Tensor, rng: np.random.Generator,
                       per_cubic_angstrom: float = 1.0 / 150.0, spread: float = 0.2,
                       minimum: int = 2) -> int:
    """Block count drawn in proportion to the pocket's bounding-sphere volume.

    An optional heuristic; sampling takes an explicit count by default.
    """
    x = site_zvec.double()
    radius = float((x - x.mean(0)).norm(dim=-1).max()) if len(x) else 0.0
    volume = 4.0 / 3.0 * np.pi * radius ** 3
    mean = max(minimum, volume * per_cubic_angstrom)
    return max(minimum, int(round(rng.normal(mean, spread * mean))))

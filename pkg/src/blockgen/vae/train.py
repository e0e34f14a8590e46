"""Autoencoder training loop."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import torch

from ..errors import DataError, NumericError
from .featurize import Entity
from .losses import (bond_ce, bond_candidates, bond_labels, concat_entities, distance_loss,
                     interpolate, kl_loss, velocity_mse)
from .model import DecodeContext, FullAtomVAE, LatentCloud, perturb_latent_coords

log = logging.getLogger(__name__)


@dataclass
class VaeTrainConfig:
    lambda1: float = 0.6
    lambda2: float = 0.8
    lambda_dist: float = 0.5
    mask_ratio: float = 0.05
    n_iters: int = 10
    teacher_force_interbond_p: float = 0.5
    dist_loss_tmax: float = 0.25
    dist_neighbor_radius: float = 6.0
    bond_candidate_radius: float = 3.5
    lr: float = 1e-4
    warmup: int = 2000
    epochs: int = 250
    latent_noise_scale: float = 1.0
    grad_clip: float = 1.0
    cosine_decay: bool = False  # anneal lr to zero over the run; off keeps Adam at a constant rate

    def __post_init__(self):
        if not 0 < self.mask_ratio < 1:
            raise ValueError("mask_ratio must lie in (0, 1)")
        if not 0 <= self.teacher_force_interbond_p <= 1:
            raise ValueError("teacher_force_interbond_p must lie in [0, 1]")
        for name in ("lambda1", "lambda2", "n_iters", "dist_loss_tmax", "dist_neighbor_radius",
                     "bond_candidate_radius", "lr", "epochs"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.lambda_dist < 0 or self.warmup < 0 or self.latent_noise_scale < 0:
            raise ValueError("lambda_dist, warmup and latent_noise_scale must be >= 0")


@dataclass
class StepDraws:
    """Random choices of one training step; fixing them makes the loss a pure function."""

    site_mask: torch.Tensor
    t: float
    teacher_force: bool
    x1_noise: Optional[torch.Tensor] = None


def draw_step(binder: Entity, site: Entity, cfg: VaeTrainConfig,
              generator: Optional[torch.Generator]) -> StepDraws:
    mask = torch.rand(site.n_blocks, generator=generator) < cfg.mask_ratio
    t = float(torch.rand((), generator=generator))
    tf = bool(torch.rand((), generator=generator) < cfg.teacher_force_interbond_p)
    return StepDraws(mask, t, tf)


def vae_loss(model: FullAtomVAE, binder: Entity, site: Entity, cfg: VaeTrainConfig,
             draws: StepDraws, generator: Optional[torch.Generator] = None,
             kl_weight: float = 1.0, deterministic: bool = False) -> dict[str, torch.Tensor]:
    """All per-block loss terms and their totals for one complex.

    Returns a dict with per-block tensors (``kl``, ``type``, ``bond``,
    ``velocity``, ``dist``) over the reconstructed blocks I (binder blocks
    followed by the masked site blocks), plus scalar ``loss_kl``,
    ``loss_rec``, ``loss_dist`` and ``total``.
    """
    lat_x = model.encode(binder, deterministic, generator)
    lat_y = model.encode(site, deterministic, generator)
    nb, ns = binder.n_blocks, site.n_blocks
    mask = draws.site_mask
    lat_in = perturb_latent_coords(lat_x, 0.0 if deterministic else cfg.latent_noise_scale, generator)

    logits = model.type_logits(lat_in, lat_y, binder.prompts, site_queries=True)
    sel = torch.cat([torch.ones(nb, dtype=torch.bool), mask])
    true_types = torch.cat([binder.block_types, site.block_types])
    type_ce = torch.nn.functional.cross_entropy(logits[sel], true_types[sel], reduction="none")

    masked_site = site.select_blocks(mask)
    gen = concat_entities(binder, masked_site) if mask.any() else binder
    ctx = site.select_blocks(~mask)
    site_rows = torch.arange(nb, nb + ns)
    dc = DecodeContext(LatentCloud.cat(lat_in, lat_y),
                       torch.cat([torch.arange(nb), site_rows[mask]]),
                       ctx if ctx.n_blocks else None, site_rows[~mask])
    n_gen_blocks = gen.n_blocks

    x0 = gen.coords
    noise = draws.x1_noise
    if noise is None:
        noise = torch.randn(x0.shape, generator=generator, dtype=x0.dtype)
    x1 = dc.latents.zvec[dc.gen_block_latent[gen.atom_block]] + noise
    t = draws.t
    xt = interpolate(x0, x1, t)
    inter_in = gen.inter if draws.teacher_force else None
    h, vel = model.structure(gen, xt, t, dc, inter_in)
    if not torch.isfinite(vel).all():
        raise NumericError("non-finite velocity during training")
    v_true = x0 - x1
    vel_term = velocity_mse(vel, v_true, gen.atom_block, n_gen_blocks)

    pairs = bond_candidates(x0, gen.atom_block, cfg.bond_candidate_radius)
    if pairs.numel():
        labels = bond_labels(pairs, gen.inter, gen.n_atoms)
        blogits = model.bond_head(h[pairs[:, 0]], h[pairs[:, 1]])
        bond_term = bond_ce(blogits, labels, pairs, gen.atom_block, n_gen_blocks)
    else:
        bond_term = torch.zeros(n_gen_blocks, dtype=x0.dtype)

    if t < cfg.dist_loss_tmax:
        x0_hat = xt + t * vel
        dist_term = distance_loss(x0_hat, x0, gen.atom_block, n_gen_blocks,
                                  ctx.coords if ctx.n_blocks else None, cfg.dist_neighbor_radius)
    else:
        dist_term = torch.zeros(n_gen_blocks, dtype=x0.dtype)

    kl = torch.cat([kl_loss(lat_x, cfg.lambda1, cfg.lambda2),
                    kl_loss(lat_y.select(mask), cfg.lambda1, cfg.lambda2)])
    rec = type_ce + bond_term + vel_term
    n_i = float(n_gen_blocks)
    total = (kl_weight * kl + rec + cfg.lambda_dist * dist_term).sum() / n_i
    return {
        "kl": kl, "type": type_ce, "bond": bond_term, "velocity": vel_term, "dist": dist_term,
        "loss_kl": kl.sum() / n_i, "loss_rec": rec.sum() / n_i, "loss_dist": dist_term.sum() / n_i,
        "total": total,
    }


def kl_warmup(step: int, warmup: int) -> float:
    return 1.0 if warmup <= 0 else min(1.0, (step + 1) / warmup)


def train_vae(model: FullAtomVAE, dataset: Sequence[tuple[Entity, Entity]], cfg: VaeTrainConfig,
              steps: int, generator: Optional[torch.Generator] = None,
              curve_path: Optional[str] = None, log_every: int = 100) -> list[dict[str, float]]:
    """Adam over randomly drawn complexes for ``steps`` updates; returns the loss history."""
    if not dataset:
        raise DataError("empty training set")
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, steps) if cfg.cosine_decay else None
    history = []
    writer = fh = None
    if curve_path is not None:
        fh = open(curve_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(["step", "loss_kl", "loss_rec", "loss_dist", "total"])
    model.train()
    try:
        for step in range(steps):
            k = int(torch.randint(len(dataset), (), generator=generator))
            binder, site = dataset[k]
            draws = draw_step(binder, site, cfg, generator)
            out = vae_loss(model, binder, site, cfg, draws, generator, kl_warmup(step, cfg.warmup))
            opt.zero_grad()
            out["total"].backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            opt.step()
            if sched is not None:
                sched.step()
            row = {key: out[key].item() for key in ("loss_kl", "loss_rec", "loss_dist", "total")}
            history.append(row)
            if writer is not None:
                writer.writerow([step] + [f"{row[k]:.8g}" for k in ("loss_kl", "loss_rec", "loss_dist", "total")])
            if log_every and step % log_every == 0:
                log.info("vae step %d total %.4f", step, row["total"])
    finally:
        if fh is not None:
            fh.close()
    model.eval()
    return history

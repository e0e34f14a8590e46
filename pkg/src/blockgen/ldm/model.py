"""Latent point-cloud normalization and the equivariant noise predictor."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
from torch import nn

from ..eqnet import (EDGE_LATENT_OTHER, EDGE_LATENT_SAME, EqNet, EqNetConfig, radius_knn_edges,
                     sinusoidal_embedding)
from ..errors import DataError, NumericError
from .schedule import NoiseSchedule

LATENT_SCALE = 10.0


@dataclass
class LatentNormalizer:
    center: torch.Tensor  # (3,)
    scale: float = LATENT_SCALE

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def coords(self, zvec: torch.Tensor) -> torch.Tensor:
        return (zvec - self.center) / self.scale

    def inverse_coords(self, zvec: torch.Tensor) -> torch.Tensor:
        return zvec * self.scale + self.center


def normalize(binder_z, binder_zvec, site_z, site_zvec, scale: float = LATENT_SCALE):
    """Stack [z, zvec'] rows with zvec' = (zvec - site center) / scale.

    Returns (u_binder, u_site, normalizer); ``u`` rows are 8 state dims
    followed by 3 coordinate dims.
    """
    if site_zvec.shape[0] == 0:
        raise DataError("cannot normalize against an empty binding site")
    norm = LatentNormalizer(site_zvec.mean(0), scale)
    ub = torch.cat([binder_z, norm.coords(binder_zvec)], -1) if binder_z is not None else None
    us = torch.cat([site_z, norm.coords(site_zvec)], -1)
    return ub, us, norm


def denormalize(u: torch.Tensor, norm: LatentNormalizer) -> tuple[torch.Tensor, torch.Tensor]:
    return u[:, :-3], norm.inverse_coords(u[:, -3:])


class Denoiser(nn.Module):
    """Predicts the 11-dim noise of every binder point from (u_t, site latents, t)."""

    def __init__(self, cfg: EqNetConfig, latent_dim: int = 8, time_embed: int = 32,
                 out_init_scale: float = 1e-3, schedule: Optional[NoiseSchedule] = None):
        super().__init__()
        h = cfg.hidden_size
        self.latent_dim = latent_dim
        self.inp = nn.Linear(latent_dim, h)
        self.role = nn.Embedding(2, h)
        self.prompt = nn.Embedding(3, h)
        self.time_dim = time_embed
        self.time = nn.Sequential(nn.Linear(time_embed, h), nn.SiLU(), nn.Linear(h, h))
        self.net = EqNet(cfg)
        self.out_state = nn.Linear(h, latent_dim)
        self.out_vec = nn.Linear(cfg.n_vec, 1, bias=False)
        # start near the zero predictor so the initial loss sits at E|eps|^2
        for lin in (self.out_state, self.out_vec):
            nn.init.uniform_(lin.weight, -out_init_scale, out_init_scale)
        nn.init.zeros_(self.out_state.bias)
        # optional skip term sqrt(1 - alpha_bar_t) * u_t: the exact noise for unit-variance
        # data, so the network only learns a residual.  Without it the clipped final
        # betas amplify any error at t ~ T about thirtyfold on the first reverse step.
        self.skip_coef: Optional[torch.Tensor]
        if schedule is not None:
            self.register_buffer("skip_coef", torch.tensor(np.sqrt(1.0 - schedule.alpha_bars)))
        else:
            self.skip_coef = None

    def forward(self, u_binder: torch.Tensor, u_site: torch.Tensor, t: int, T: int,
                prompts: Optional[torch.Tensor] = None) -> torch.Tensor:
        nb = u_binder.shape[0]
        d = self.latent_dim
        u = torch.cat([u_binder, u_site])
        role = torch.cat([torch.zeros(nb, dtype=torch.long), torch.ones(len(u_site), dtype=torch.long)])
        pr = prompts.long() if prompts is not None else torch.zeros(nb, dtype=torch.long)
        pr = torch.cat([pr, torch.full((len(u_site),), 2, dtype=torch.long)])
        x = u[:, d:]
        edges = radius_knn_edges(x, self.net.cfg.cutoff, self.net.cfg.k_neighbors)
        kinds = torch.where(role[edges[0]] == role[edges[1]], EDGE_LATENT_SAME, EDGE_LATENT_OTHER)
        temb = self.time(sinusoidal_embedding(torch.tensor([t / T], dtype=u.dtype), self.time_dim))
        h = self.inp(u[:, :d]) + self.role(role) + self.prompt(pr) + temb
        h, v = self.net(h, x, edges, kinds)
        eps_z = self.out_state(h[:nb])
        eps_x = self.out_vec(v[:nb].transpose(1, 2)).squeeze(-1)
        out = torch.cat([eps_z, eps_x], -1)
        if self.skip_coef is not None:
            if T != len(self.skip_coef) - 1:
                raise ValueError(f"denoiser was built for T={len(self.skip_coef) - 1}, called with T={T}")
            # coordinates relative to the site centroid keep the skip translation invariant
            ref = torch.cat([u_binder[:, :d], u_binder[:, d:] - u_site[:, d:].mean(0)], -1)
            out = out + self.skip_coef[t].to(out.dtype) * ref
        if not torch.isfinite(out).all():
            raise NumericError(f"non-finite denoiser output at t={t}")
        return out

"""Cosine noise schedule and closed-form forward/reverse diffusion steps."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

BETA_MAX = 0.999


@dataclass(frozen=True)
class NoiseSchedule:
    """``betas[t]``, ``alphas[t]`` and ``alpha_bars[t]`` indexed by t = 0..T (entry 0 unused for betas)."""

    T: int
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("diffusion needs at least one step")


def cosine_schedule(T: int = 100, s: float = 0.008) -> NoiseSchedule:
    if T < 1:
        raise ValueError("diffusion needs at least one step")

    def f(t):
        return math.cos((t / T + s) / (1 + s) * math.pi / 2) ** 2

    f0 = f(0)
    raw = np.array([f(t) / f0 for t in range(T + 1)])
    betas = np.zeros(T + 1)
    betas[1:] = np.minimum(1.0 - raw[1:] / raw[:-1], BETA_MAX)
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    return NoiseSchedule(T, betas, alphas, alpha_bars)


def forward_sample(u0: torch.Tensor, t: int, schedule: NoiseSchedule,
                   generator: Optional[torch.Generator] = None,
                   eps: Optional[torch.Tensor] = None) -> tuple[torch.Tensor, torch.Tensor]:
    """Draw u_t ~ q(u_t | u_0); returns (u_t, eps)."""
    if not 1 <= t <= schedule.T:
        raise ValueError(f"t={t} outside 1..{schedule.T}")
    if eps is None:
        eps = torch.randn(u0.shape, generator=generator, dtype=u0.dtype)
    ab = float(schedule.alpha_bars[t])
    return math.sqrt(ab) * u0 + math.sqrt(1.0 - ab) * eps, eps


def reverse_update(ut: torch.Tensor, eps_pred: torch.Tensor, t: int, schedule: NoiseSchedule,
                   xi: Optional[torch.Tensor] = None,
                   generator: Optional[torch.Generator] = None) -> torch.Tensor:
    """Ancestral step u_t -> u_{t-1}; the last step (t = 1) adds no noise."""
    beta = float(schedule.betas[t])
    alpha = float(schedule.alphas[t])
    ab = float(schedule.alpha_bars[t])
    mean = (ut - beta / math.sqrt(1.0 - ab) * eps_pred) / math.sqrt(alpha)
    if t == 1:
        return mean
    if xi is None:
        xi = torch.randn(ut.shape, generator=generator, dtype=ut.dtype)
    return mean + math.sqrt(beta) * xi

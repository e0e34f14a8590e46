"""Autoencoder objective: KL regularizer, reconstruction and distance terms."""

from __future__ import annotations

from typing import Optional

import torch
import torch.nn.functional as F

from .featurize import Entity


def kl_state(mu: torch.Tensor, sigma: torch.Tensor) -> torch.Tensor:
    """Per-block KL( N(0, I) || N(mu, diag sigma^2) ), summed over dimensions."""
    return (torch.log(sigma) + (1.0 + mu ** 2) / (2.0 * sigma ** 2) - 0.5).sum(-1)


def kl_coord(center: torch.Tensor, muvec: torch.Tensor, sigmavec: torch.Tensor) -> torch.Tensor:
    """Per-block KL( N(center, I) || N(muvec, diag sigmavec^2) )."""
    return (torch.log(sigmavec) + (1.0 + (center - muvec) ** 2) / (2.0 * sigmavec ** 2) - 0.5).sum(-1)


def kl_loss(points, lambda1: float = 0.6, lambda2: float = 0.8) -> torch.Tensor:
    """Weighted per-block KL with the prior as the first argument."""
    return (lambda1 * kl_state(points.mu, points.sigma)
            + lambda2 * kl_coord(points.prior_center, points.muvec, points.sigmavec))


def _scatter_sum(values: torch.Tensor, index: torch.Tensor, n: int) -> torch.Tensor:
    return torch.zeros(n, dtype=values.dtype).index_add(0, index, values)


def velocity_mse(pred: torch.Tensor, target: torch.Tensor, atom_block: torch.Tensor, n_blocks: int):
    """Per-block mean squared error over atoms and coordinates."""
    err = ((pred - target) ** 2).mean(-1)
    count = _scatter_sum(torch.ones_like(err), atom_block, n_blocks).clamp_min(1)
    return _scatter_sum(err, atom_block, n_blocks) / count


def bond_candidates(coords: torch.Tensor, atom_block: torch.Tensor, radius: float) -> torch.Tensor:
    """Pairs (p < q) of atoms in different blocks closer than ``radius``, shape (P, 2)."""
    d = torch.cdist(coords, coords)
    ok = (d < radius) & (atom_block.unsqueeze(0) != atom_block.unsqueeze(1))
    ok = torch.triu(ok, diagonal=1)
    return torch.nonzero(ok)


def bond_labels(pairs: torch.Tensor, inter: torch.Tensor, n_atoms: int) -> torch.Tensor:
    lookup = {}
    for p, q, o in inter.tolist():
        lookup[(min(p, q), max(p, q))] = o
    return torch.tensor([lookup.get((p, q), 0) for p, q in pairs.tolist()], dtype=torch.long)


def bond_ce(logits: torch.Tensor, labels: torch.Tensor, pairs: torch.Tensor,
            atom_block: torch.Tensor, n_blocks: int) -> torch.Tensor:
    """Per-block sum of pair CE; each pair is charged to both of its blocks."""
    if pairs.numel() == 0:
        return torch.zeros(n_blocks, dtype=logits.dtype)
    ce = F.cross_entropy(logits, labels, reduction="none")
    return (_scatter_sum(ce, atom_block[pairs[:, 0]], n_blocks)
            + _scatter_sum(ce, atom_block[pairs[:, 1]], n_blocks))


def distance_loss(pred_x0: torch.Tensor, true_x0: torch.Tensor, atom_block: torch.Tensor,
                  n_blocks: int, ctx_coords: Optional[torch.Tensor] = None,
                  radius: float = 6.0) -> torch.Tensor:
    """Per-block mean |d_pred - d_true| over each atom's ground-truth neighbours.

    Neighbours are all other atoms (generated or fixed context) whose true
    distance is below ``radius``; context atoms keep their true positions.
    """
    n = pred_x0.shape[0]
    if ctx_coords is not None and ctx_coords.numel():
        all_pred = torch.cat([pred_x0, ctx_coords.to(pred_x0.dtype)])
        all_true = torch.cat([true_x0, ctx_coords.to(true_x0.dtype)])
    else:
        all_pred, all_true = pred_x0, true_x0
    d_true = torch.cdist(true_x0, all_true)
    nb = d_true < radius
    nb[torch.arange(n), torch.arange(n)] = False
    p, q = torch.nonzero(nb, as_tuple=True)
    if p.numel() == 0:
        return torch.zeros(n_blocks, dtype=pred_x0.dtype)
    d_pred = (all_pred[p] - all_pred[q]).norm(dim=-1)
    # same formula on both sides so a perfect prediction gives exactly zero
    err = (d_pred - (all_true[p] - all_true[q]).norm(dim=-1)).abs()
    blk = atom_block[p]
    count = _scatter_sum(torch.ones_like(err), blk, n_blocks)
    return _scatter_sum(err, blk, n_blocks) / count.clamp_min(1)


def interpolate(x0: torch.Tensor, x1: torch.Tensor, t: float) -> torch.Tensor:
    return t * x1 + (1.0 - t) * x0


def concat_entities(a: Entity, b: Entity) -> Entity:
    na, ba = a.n_atoms, a.n_blocks

    def shift(bonds):
        return bonds + torch.tensor([na, na, 0]) if bonds.numel() else bonds

    return Entity(torch.cat([a.elements, b.elements]), torch.cat([a.atom_pos, b.atom_pos]),
                  torch.cat([a.atom_block, b.atom_block + ba]), torch.cat([a.coords, b.coords]),
                  torch.cat([a.block_types, b.block_types]), torch.cat([a.prompts, b.prompts]),
                  torch.cat([a.bonds, shift(b.bonds)]), torch.cat([a.inter, shift(b.inter)]))

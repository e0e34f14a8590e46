"""Scalarization-based E(3)-equivariant transformer.

Every node carries scalar features ``h`` (hidden_size), a stack of vector
channels ``v`` (n_vec x 3) and a position ``x``.  Attention logits and
messages are computed from invariants only: scalars, an RBF expansion of
edge length, an edge-type embedding and inner products between vectors.
Vectors are updated by bias-free linear combinations of neighbour vectors
and unit edge directions, so rotations and reflections commute with the
network and translations do not affect it at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import torch
from torch import nn

from .errors import NumericError

# edge-type ids shared by every network built on this backbone
EDGE_SPATIAL_SAME = 0
EDGE_SPATIAL_OTHER = 1
EDGE_BOND = {1: 2, 2: 3, 3: 4}
EDGE_MEMBER = 5
EDGE_LATENT_SAME = 6
EDGE_LATENT_OTHER = 7
N_EDGE_TYPES = 8


@dataclass
class EqNetConfig:
    hidden_size: int = 512
    n_layers: int = 6
    n_heads: int = 8
    n_rbf: int = 64
    cutoff: float = 10.0
    edge_embed_size: int = 64
    n_vec: int = 16
    k_neighbors: int = 16

    def __post_init__(self):
        for name in ("hidden_size", "n_layers", "n_heads", "n_rbf", "edge_embed_size", "n_vec",
                     "k_neighbors"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.cutoff <= 0:
            raise ValueError("cutoff must be positive")
        if self.hidden_size % self.n_heads:
            raise ValueError("hidden_size must be divisible by n_heads")


def rbf_centers(cfg: EqNetConfig) -> tuple[torch.Tensor, float]:
    centers = torch.linspace(0.0, cfg.cutoff, cfg.n_rbf, dtype=torch.float64)
    gamma = cfg.cutoff / (cfg.n_rbf - 1) if cfg.n_rbf > 1 else cfg.cutoff
    return centers, gamma


def rbf_embed(distance, cfg: EqNetConfig) -> torch.Tensor:
    """Gaussian basis exp(-(d - c_k)^2 / 2 gamma^2) on evenly spaced centers."""
    d = torch.as_tensor(distance)
    if not d.is_floating_point():
        d = d.double()
    centers, gamma = rbf_centers(cfg)
    centers = centers.to(d.dtype)
    return torch.exp(-((d.unsqueeze(-1) - centers) ** 2) / (2 * gamma ** 2))


def sinusoidal_embedding(t: torch.Tensor, dim: int, max_period: float = 1000.0) -> torch.Tensor:
    """Standard sin/cos features of a scalar in [0, 1] (scaled by ``max_period``)."""
    half = dim // 2
    freqs = torch.exp(-math.log(max_period) * torch.arange(half, dtype=t.dtype) / max(half, 1))
    ang = (t.reshape(-1, 1) * max_period) * freqs
    emb = torch.cat([torch.sin(ang), torch.cos(ang)], dim=-1)
    if dim % 2:
        emb = torch.cat([emb, torch.zeros_like(emb[:, :1])], dim=-1)
    return emb


@torch.no_grad()
def radius_knn_edges(x: torch.Tensor, cutoff: float, k: int,
                     allowed: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Symmetric edge list (2, E) joining each node to its k nearest neighbours within cutoff.

    ``allowed`` is an optional (N, N) boolean mask of admissible pairs.
    Returned edges are directed src -> dst and contain both directions.
    """
    n = x.shape[0]
    if n < 2:
        return torch.zeros((2, 0), dtype=torch.long)
    d = torch.cdist(x.double(), x.double())
    ok = d < cutoff
    ok.fill_diagonal_(False)
    if allowed is not None:
        ok &= allowed
    d = torch.where(ok, d, torch.full_like(d, math.inf))
    kk = min(k, n - 1)
    vals, idx = torch.topk(d, kk, dim=1, largest=False)
    keep = torch.isfinite(vals)
    dst = torch.arange(n).unsqueeze(1).expand(-1, kk)[keep]
    src = idx[keep]
    adj = torch.zeros((n, n), dtype=torch.bool)
    adj[dst, src] = True
    adj |= adj.T.clone()
    dst, src = torch.nonzero(adj, as_tuple=True)
    return torch.stack([src, dst])


def scatter_softmax(logits: torch.Tensor, index: torch.Tensor, n: int) -> torch.Tensor:
    """Softmax of (E, H) logits over edges sharing the same destination."""
    idx = index.unsqueeze(-1).expand_as(logits)
    mx = torch.full((n, logits.shape[1]), -math.inf, dtype=logits.dtype)
    mx = mx.scatter_reduce(0, idx, logits, reduce="amax", include_self=True)
    ex = torch.exp(logits - mx[index])
    den = torch.zeros((n, logits.shape[1]), dtype=logits.dtype).index_add_(0, index, ex)
    return ex / den[index]


class EqLayer(nn.Module):
    def __init__(self, cfg: EqNetConfig):
        super().__init__()
        h, c, e = cfg.hidden_size, cfg.n_vec, cfg.edge_embed_size
        self.cfg = cfg
        self.n_heads = cfg.n_heads
        self.head_dim = h // cfg.n_heads
        self.norm = nn.LayerNorm(h)
        self.edge_mlp = nn.Sequential(nn.Linear(cfg.n_rbf + e + 3 * c, e), nn.SiLU(), nn.Linear(e, e))
        self.q = nn.Linear(h, h)
        self.k = nn.Linear(h, h)
        self.val = nn.Linear(h, h)
        self.edge_k = nn.Linear(e, h, bias=False)
        self.edge_v = nn.Linear(e, h, bias=False)
        self.edge_bias = nn.Linear(e, cfg.n_heads, bias=False)
        self.out = nn.Linear(h, h)
        self.vec_gate = nn.Sequential(nn.Linear(2 * h + e, h), nn.SiLU(), nn.Linear(h, 2 * c))
        self.vec_mix = nn.Linear(c, c, bias=False)
        self.mix_gate = nn.Linear(h, c)
        self.ffn_norm = nn.LayerNorm(h)
        self.ffn = nn.Sequential(nn.Linear(h + c, 2 * h), nn.SiLU(), nn.Linear(2 * h, h))

    def forward(self, h, v, x, edges, edge_attr):
        src, dst = edges
        n = h.shape[0]
        hn = self.norm(h)
        if src.numel():
            rel = x[dst] - x[src]
            dist = rel.norm(dim=-1)
            unit = rel / dist.clamp_min(1e-6).unsqueeze(-1)
            vi, vj = v[dst], v[src]
            inner = torch.cat([(vi * vj).sum(-1), (vi * unit.unsqueeze(1)).sum(-1),
                               (vj * unit.unsqueeze(1)).sum(-1)], dim=-1)
            e = self.edge_mlp(torch.cat([rbf_embed(dist, self.cfg).to(h.dtype), edge_attr, inner], -1))

            q = self.q(hn)[dst].view(-1, self.n_heads, self.head_dim)
            k = (self.k(hn)[src] + self.edge_k(e)).view(-1, self.n_heads, self.head_dim)
            logits = (q * k).sum(-1) / math.sqrt(self.head_dim) + self.edge_bias(e)
            att = scatter_softmax(logits, dst, n)
            msg = (self.val(hn)[src] + self.edge_v(e)).view(-1, self.n_heads, self.head_dim)
            agg = torch.zeros((n, self.n_heads, self.head_dim), dtype=h.dtype)
            agg = agg.index_add(0, dst, att.unsqueeze(-1) * msg)
            h = h + self.out(agg.reshape(n, -1))

            g = self.vec_gate(torch.cat([hn[dst], hn[src], e], -1))
            g1, g2 = g.chunk(2, dim=-1)
            a = att.mean(-1, keepdim=True)
            dv = a.unsqueeze(-1) * (g1.unsqueeze(-1) * vj + g2.unsqueeze(-1) * unit.unsqueeze(1))
            v = v + torch.zeros_like(v).index_add(0, dst, dv)

        # channel mixing: bias-free in the vectors, gated by invariants
        mixed = self.vec_mix(v.transpose(1, 2)).transpose(1, 2)
        v = v + torch.sigmoid(self.mix_gate(hn)).unsqueeze(-1) * mixed
        vnorm = torch.sqrt((v ** 2).sum(-1) + 1e-8)
        h = h + self.ffn(torch.cat([self.ffn_norm(h), vnorm], -1))
        return h, v


class EqNet(nn.Module):
    """Stack of equivariant attention layers over a typed neighbour graph."""

    def __init__(self, cfg: EqNetConfig):
        super().__init__()
        self.cfg = cfg
        self.edge_type = nn.Embedding(N_EDGE_TYPES, cfg.edge_embed_size)
        self.layers = nn.ModuleList(EqLayer(cfg) for _ in range(cfg.n_layers))
        self.final_norm = nn.LayerNorm(cfg.hidden_size)

    def forward(self, h: torch.Tensor, x: torch.Tensor, edges: torch.Tensor,
                edge_type: torch.Tensor, v: Optional[torch.Tensor] = None):
        _check_finite(h, "scalar")
        _check_finite(x, "coordinate")
        if v is None:
            v = torch.zeros((h.shape[0], self.cfg.n_vec, 3), dtype=h.dtype)
        else:
            _check_finite(v, "vector")
        edge_attr = self.edge_type(edge_type)
        for layer in self.layers:
            h, v = layer(h, v, x, edges, edge_attr)
        return self.final_norm(h), v


def _check_finite(t: torch.Tensor, what: str) -> None:
    bad = ~torch.isfinite(t)
    if bad.any():
        node = int(torch.nonzero(bad.reshape(t.shape[0], -1).any(-1))[0])
        raise NumericError(f"non-finite {what} input at node {node}")

"""Iterative full-atom variational autoencoder.

The encoder maps each block to a latent state ``z`` (invariant, dim 8) and
a latent coordinate ``zvec`` (equivariant).  The decoder first predicts block
types from the latent point clouds of binder and site, then rebuilds atom
coordinates by integrating a predicted velocity field from Gaussian noise
around each block's latent coordinate, and finally classifies inter-block
bonds between nearby atoms.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import torch
from torch import nn

from ..blockrepr.vocab import Vocabulary
from ..elements import ELEMENTS
from ..eqnet import (EDGE_BOND, EDGE_LATENT_OTHER, EDGE_LATENT_SAME, EDGE_MEMBER,
                     EDGE_SPATIAL_OTHER, EDGE_SPATIAL_SAME, EqNet, EqNetConfig,
                     radius_knn_edges, sinusoidal_embedding)
from ..errors import ConfigError, NumericError
from .featurize import Entity, block_mean

LOG_SIGMA_MIN, LOG_SIGMA_MAX = -8.0, 4.0
N_BOND_CLASSES = 4  # none, single, double, triple


@dataclass
class VaeConfig:
    latent_dim: int = 8
    atom_net: EqNetConfig = field(default_factory=lambda: EqNetConfig(cutoff=10.0))
    latent_net: EqNetConfig = field(default_factory=lambda: EqNetConfig(cutoff=10.0))
    time_embed: int = 32


@dataclass
class LatentCloud:
    """Per-block latent states, coordinates and the encoder distribution parameters."""

    z: torch.Tensor           # (B, d)
    zvec: torch.Tensor        # (B, 3)
    mu: torch.Tensor
    sigma: torch.Tensor
    muvec: torch.Tensor
    sigmavec: torch.Tensor    # (B, 3), isotropic per block
    prior_center: torch.Tensor

    def __len__(self) -> int:
        return int(self.z.shape[0])

    @staticmethod
    def cat(a: "LatentCloud", b: "LatentCloud") -> "LatentCloud":
        return LatentCloud(*(torch.cat([getattr(a, f), getattr(b, f)], 0) for f in _FIELDS))

    def select(self, idx) -> "LatentCloud":
        return LatentCloud(*(getattr(self, f)[idx] for f in _FIELDS))

    def detach(self) -> "LatentCloud":
        return LatentCloud(*(getattr(self, f).detach() for f in _FIELDS))

    @classmethod
    def from_points(cls, z: torch.Tensor, zvec: torch.Tensor) -> "LatentCloud":
        """Latent points with no encoder distribution attached (e.g. diffusion samples)."""
        return cls(z, zvec, z, torch.ones_like(z), zvec, torch.ones_like(zvec), zvec)


_FIELDS = ("z", "zvec", "mu", "sigma", "muvec", "sigmavec", "prior_center")


def perturb_latent_coords(points: LatentCloud, noise_scale: float = 1.0,
                          generator: Optional[torch.Generator] = None) -> LatentCloud:
    """Add isotropic Gaussian noise to latent coordinates; states are left alone."""
    if noise_scale == 0:
        return points
    eta = torch.randn(points.zvec.shape, generator=generator, dtype=points.zvec.dtype)
    return replace(points, zvec=points.zvec + noise_scale * eta)


class AtomEmbedding(nn.Module):
    def __init__(self, hidden: int, vocab_size: int, max_pos: int):
        super().__init__()
        self.element = nn.Embedding(len(ELEMENTS), hidden)
        self.pos = nn.Embedding(max_pos, hidden)
        self.block_type = nn.Embedding(vocab_size, hidden)

    def forward(self, ent: Entity) -> torch.Tensor:
        return (self.element(ent.elements) + self.pos(ent.atom_pos)
                + self.block_type(ent.block_types[ent.atom_block]))


def _bond_edges(bonds: torch.Tensor, offset: int = 0) -> tuple[torch.Tensor, torch.Tensor]:
    if bonds.numel() == 0:
        return torch.zeros((2, 0), dtype=torch.long), torch.zeros(0, dtype=torch.long)
    p, q = bonds[:, 0] + offset, bonds[:, 1] + offset
    kinds = torch.tensor([EDGE_BOND[int(o)] for o in bonds[:, 2]], dtype=torch.long)
    return torch.stack([torch.cat([p, q]), torch.cat([q, p])]), torch.cat([kinds, kinds])


def _spatial_types(edges: torch.Tensor, block_id: torch.Tensor, is_latent: torch.Tensor) -> torch.Tensor:
    src, dst = edges
    same = block_id[src] == block_id[dst]
    lat = is_latent[src] | is_latent[dst]
    out = torch.where(same, EDGE_SPATIAL_SAME, EDGE_SPATIAL_OTHER)
    return torch.where(lat, torch.where(same, EDGE_LATENT_SAME, EDGE_LATENT_OTHER), out)


class Encoder(nn.Module):
    def __init__(self, cfg: VaeConfig, vocab_size: int, max_pos: int):
        super().__init__()
        h = cfg.atom_net.hidden_size
        self.embed = AtomEmbedding(h, vocab_size, max_pos)
        self.net = EqNet(cfg.atom_net)
        self.head = nn.Sequential(nn.Linear(h, h), nn.SiLU(), nn.Linear(h, 2 * cfg.latent_dim + 1))
        self.vec_head = nn.Linear(cfg.atom_net.n_vec, 1, bias=False)
        self.latent_dim = cfg.latent_dim

    def forward(self, ent: Entity) -> tuple[torch.Tensor, ...]:
        x = ent.coords
        blk = ent.atom_block
        sp = radius_knn_edges(x, self.net.cfg.cutoff, self.net.cfg.k_neighbors)
        sp_t = _spatial_types(sp, blk, torch.zeros_like(blk, dtype=torch.bool))
        be, bt = _bond_edges(torch.cat([ent.bonds, ent.inter]))
        h, v = self.net(self.embed(ent).to(x.dtype), x, torch.cat([sp, be], 1), torch.cat([sp_t, bt]))
        hb = block_mean(h, blk, ent.n_blocks)
        out = self.head(hb)
        d = self.latent_dim
        mu = out[:, :d]
        log_sigma = out[:, d:2 * d].clamp(LOG_SIGMA_MIN, LOG_SIGMA_MAX)
        log_sigvec = out[:, 2 * d:].clamp(LOG_SIGMA_MIN, LOG_SIGMA_MAX)
        center = ent.centers()
        shift = block_mean(self.vec_head(v.transpose(1, 2)).squeeze(-1), blk, ent.n_blocks)
        muvec = center + shift
        return mu, torch.exp(log_sigma), muvec, torch.exp(log_sigvec).expand(-1, 3), center


class TypeDecoder(nn.Module):
    """Block-type logits for every latent point, given binder and site latents."""

    def __init__(self, cfg: VaeConfig, vocab_size: int):
        super().__init__()
        h = cfg.latent_net.hidden_size
        self.inp = nn.Linear(cfg.latent_dim, h)
        self.role = nn.Embedding(2, h)       # binder / site
        self.prompt = nn.Embedding(3, h)     # 0, 1, not applicable
        self.net = EqNet(cfg.latent_net)
        self.out = nn.Sequential(nn.Linear(h, h), nn.SiLU(), nn.Linear(h, vocab_size))

    def forward(self, z, zvec, role, prompt):
        edges = radius_knn_edges(zvec, self.net.cfg.cutoff, self.net.cfg.k_neighbors)
        kinds = torch.where(role[edges[0]] == role[edges[1]], EDGE_LATENT_SAME, EDGE_LATENT_OTHER)
        h = self.inp(z) + self.role(role) + self.prompt(prompt)
        h, _ = self.net(h, zvec, edges, kinds)
        return self.out(h)


@dataclass
class DecodeContext:
    """Everything the structure module conditions on besides the moving atoms."""

    latents: LatentCloud           # binder latents first, then site latents
    gen_block_latent: torch.Tensor  # (B_gen,) latent row of each generated block
    ctx: Optional[Entity]           # fixed site atoms (may be None)
    ctx_block_latent: Optional[torch.Tensor]


class StructureModule(nn.Module):
    def __init__(self, cfg: VaeConfig, vocab_size: int, max_pos: int):
        super().__init__()
        h = cfg.atom_net.hidden_size
        self.embed = AtomEmbedding(h, vocab_size, max_pos)
        self.latent_in = nn.Linear(cfg.latent_dim, h)
        self.role = nn.Embedding(3, h)  # generated atom / context atom / latent node
        self.time = nn.Sequential(nn.Linear(cfg.time_embed, h), nn.SiLU(), nn.Linear(h, h))
        self.time_dim = cfg.time_embed
        self.net = EqNet(cfg.atom_net)
        self.vel_head = nn.Linear(cfg.atom_net.n_vec, 1, bias=False)

    def forward(self, gen: Entity, x: torch.Tensor, t: float, dc: DecodeContext,
                inter: Optional[torch.Tensor] = None):
        """Hidden states and velocities of the generated atoms at coordinates ``x``."""
        dtype = x.dtype
        n_gen = gen.n_atoms
        lat = dc.latents
        parts_h = [self.embed(gen).to(dtype) + self.role.weight[0]]
        parts_x = [x]
        parts_blk = [dc.gen_block_latent[gen.atom_block]]
        n_ctx = 0
        if dc.ctx is not None and dc.ctx.n_atoms:
            n_ctx = dc.ctx.n_atoms
            parts_h.append(self.embed(dc.ctx).to(dtype) + self.role.weight[1])
            parts_x.append(dc.ctx.coords.to(dtype))
            parts_blk.append(dc.ctx_block_latent[dc.ctx.atom_block])
        n_lat = len(lat)
        parts_h.append(self.latent_in(lat.z) + self.role.weight[2])
        parts_x.append(lat.zvec)
        parts_blk.append(torch.arange(n_lat))
        h = torch.cat(parts_h)
        h = h + self.time(sinusoidal_embedding(torch.tensor([float(t)], dtype=dtype), self.time_dim))
        xs = torch.cat(parts_x)
        blk = torch.cat(parts_blk)
        is_lat = torch.zeros(len(blk), dtype=torch.bool)
        is_lat[n_gen + n_ctx:] = True

        # latent nodes are few, so they see each other densely instead of through the k cap
        lat_pair = is_lat[:, None] & is_lat[None, :]
        sp = radius_knn_edges(xs, self.net.cfg.cutoff, self.net.cfg.k_neighbors, allowed=~lat_pair)
        dense = radius_knn_edges(xs, self.net.cfg.cutoff, len(xs), allowed=lat_pair)
        sp = torch.cat([sp, dense], 1)
        edges, kinds = [sp], [_spatial_types(sp, blk, is_lat)]
        atoms = torch.arange(n_gen + n_ctx)
        lat_node = n_gen + n_ctx + blk[:n_gen + n_ctx]
        edges.append(torch.stack([torch.cat([atoms, lat_node]), torch.cat([lat_node, atoms])]))
        kinds.append(torch.full((2 * len(atoms),), EDGE_MEMBER, dtype=torch.long))
        gen_bonds = gen.bonds if inter is None else torch.cat([gen.bonds, inter])
        for bonds, off in ((gen_bonds, 0),) + (((torch.cat([dc.ctx.bonds, dc.ctx.inter]), n_gen),)
                                              if n_ctx else ()):
            e, k = _bond_edges(bonds, off)
            edges.append(e)
            kinds.append(k)
        h, v = self.net(h, xs, torch.cat(edges, 1), torch.cat(kinds))
        vel = self.vel_head(v[:n_gen].transpose(1, 2)).squeeze(-1)
        return h[:n_gen], vel


class BondHead(nn.Module):
    """Symmetric bond classifier: logits depend on h_p + h_q only."""

    def __init__(self, hidden: int):
        super().__init__()
        self.mlp = nn.Sequential(nn.Linear(hidden, hidden), nn.SiLU(), nn.Linear(hidden, hidden),
                                 nn.SiLU(), nn.Linear(hidden, N_BOND_CLASSES))

    def forward(self, hp, hq):
        return self.mlp(hp + hq)


class FullAtomVAE(nn.Module):
    def __init__(self, vocab: Vocabulary, cfg: Optional[VaeConfig] = None):
        super().__init__()
        cfg = cfg or VaeConfig()
        self.cfg = cfg
        self.vocab_size = len(vocab)
        max_pos = vocab.max_block_atoms
        self.encoder = Encoder(cfg, self.vocab_size, max_pos)
        self.type_decoder = TypeDecoder(cfg, self.vocab_size)
        self.structure = StructureModule(cfg, self.vocab_size, max_pos)
        self.bond_head = BondHead(cfg.atom_net.hidden_size)
        aa = torch.zeros(self.vocab_size, dtype=torch.bool)
        aa[vocab.amino_acid_ids] = True
        self.register_buffer("aa_mask", aa)

    # -- encoding -----------------------------------------------------------
    def encode(self, ent: Entity, deterministic: bool = False,
               generator: Optional[torch.Generator] = None) -> LatentCloud:
        mu, sigma, muvec, sigmavec, center = self.encoder(ent)
        for name, t in (("mu", mu), ("sigma", sigma), ("muvec", muvec)):
            if not torch.isfinite(t).all():
                raise NumericError(f"encoder produced non-finite {name}")
        if deterministic:
            return LatentCloud(mu, muvec, mu, sigma, muvec, sigmavec, center)
        eps = torch.randn(mu.shape, generator=generator, dtype=mu.dtype)
        eps_v = torch.randn(muvec.shape, generator=generator, dtype=mu.dtype)
        return LatentCloud(mu + eps * sigma, muvec + eps_v * sigmavec, mu, sigma, muvec, sigmavec, center)

    # -- block types ----------------------------------------------------------
    def type_logits(self, binder: LatentCloud, site: LatentCloud, prompts: torch.Tensor,
                    site_queries: bool = False) -> torch.Tensor:
        """Masked logits for binder points (and site points when ``site_queries``)."""
        nb = len(binder)
        z = torch.cat([binder.z, site.z])
        zvec = torch.cat([binder.zvec, site.zvec])
        role = torch.cat([torch.zeros(nb, dtype=torch.long), torch.ones(len(site), dtype=torch.long)])
        prompt = torch.cat([prompts.long(), torch.full((len(site),), 2, dtype=torch.long)])
        logits = self.type_decoder(z, zvec, role, prompt)
        logits = logits if site_queries else logits[:nb]
        rows = prompt[:len(logits)] == 1
        if rows.any():
            if not self.aa_mask.any():
                raise ConfigError("prompt requests amino acids but the vocabulary has none")
            mask = rows.unsqueeze(1) & ~self.aa_mask.unsqueeze(0)
            logits = logits.masked_fill(mask, float("-inf"))
        return logits

    def decode_types(self, binder: LatentCloud, site: LatentCloud, prompts: torch.Tensor,
                     sample: bool = False, generator: Optional[torch.Generator] = None) -> torch.Tensor:
        logits = self.type_logits(binder, site, prompts)
        if sample:
            return torch.multinomial(torch.softmax(logits, -1), 1, generator=generator).squeeze(-1)
        return logits.argmax(-1)

    # -- structure ------------------------------------------------------------
    def structure_step(self, gen: Entity, x: torch.Tensor, t: float, dt: float, dc: DecodeContext,
                       inter: Optional[torch.Tensor] = None):
        """One Euler step ``x <- x + dt * V(x, t)``; returns (hidden, velocity, new x)."""
        h, vel = self.structure(gen, x, t, dc, inter)
        if not torch.isfinite(vel).all():
            raise NumericError(f"non-finite velocity at t={t:.3f}")
        return h, vel, x + dt * vel

    def bond_probs(self, hp, hq) -> torch.Tensor:
        return torch.softmax(self.bond_head(hp, hq), -1)

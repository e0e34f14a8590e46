"""Iterative structure decoding and the full sampling routine."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from ..blockrepr.vocab import Vocabulary
from ..elements import ELEMENTS, VALENCY
from ..kernels import repulsion_displacement
from ..physcorr import REPULSION_DELTA, radii_of, resolve_valency
from ..structures import BlockGraph
from .featurize import Entity, entity_to_graph, lookup_entity
from .losses import bond_candidates
from .model import DecodeContext, FullAtomVAE, LatentCloud


@dataclass
class DecodeOptions:
    n_iters: int = 10
    bond_radius: float = 3.5
    repulsion: bool = False
    repulsion_delta: float = REPULSION_DELTA
    resolve_valency: bool = False


def _element_names(ent: Entity) -> list[str]:
    return [ELEMENTS[int(e)] for e in ent.elements]


def initial_coords(gen: Entity, dc: DecodeContext, generator: Optional[torch.Generator] = None):
    centers = dc.latents.zvec[dc.gen_block_latent[gen.atom_block]]
    return centers + torch.randn(centers.shape, generator=generator, dtype=centers.dtype)


@torch.no_grad()
def predict_inter_bonds(model: FullAtomVAE, gen: Entity, h: torch.Tensor, x: torch.Tensor,
                        radius: float = 3.5, resolve: bool = False) -> torch.Tensor:
    """Argmax bond class for atom pairs of different blocks within ``radius``."""
    pairs = bond_candidates(x, gen.atom_block, radius)
    if pairs.numel() == 0:
        return torch.zeros((0, 3), dtype=torch.long)
    probs = model.bond_probs(h[pairs[:, 0]], h[pairs[:, 1]])
    conf, cls = probs.max(-1)
    keep = cls > 0
    rows = [(int(p), int(q), int(o), float(c))
            for (p, q), o, c in zip(pairs[keep].tolist(), cls[keep].tolist(), conf[keep].tolist())]
    if resolve:
        elements = _element_names(gen)
        used = [0] * gen.n_atoms
        for p, q, o in gen.bonds.tolist():
            used[p] += o
            used[q] += o
        rows = resolve_valency(rows, elements, used, VALENCY,
                               existing=[(p, q) for p, q, _ in gen.bonds.tolist()])
    return torch.tensor([(p, q, o) for p, q, o, _ in rows], dtype=torch.long).reshape(-1, 3)


@torch.no_grad()
def decode_structure(model: FullAtomVAE, gen: Entity, dc: DecodeContext,
                     inter: Optional[torch.Tensor] = None, opts: DecodeOptions = DecodeOptions(),
                     generator: Optional[torch.Generator] = None,
                     x_init: Optional[torch.Tensor] = None) -> tuple[torch.Tensor, torch.Tensor]:
    """Integrate the velocity field from t=1 to t=0 in ``n_iters`` Euler steps.

    When ``inter`` is given it is used as known inter-block bonds and returned
    unchanged; otherwise bonds are predicted from the last hidden states.
    """
    x = initial_coords(gen, dc, generator) if x_init is None else x_init
    dt = 1.0 / opts.n_iters
    ctx_x = ctx_r = None
    if opts.repulsion and dc.ctx is not None and dc.ctx.n_atoms:
        ctx_x = dc.ctx.coords.double().numpy()
        ctx_r = radii_of(_element_names(dc.ctx))
        gen_r = radii_of(_element_names(gen))
    h = None
    for n in range(opts.n_iters):
        t = 1.0 - n * dt
        h, _, x = model.structure_step(gen, x, t, dt, dc, inter)
        if ctx_x is not None:
            disp = repulsion_displacement(x.double().numpy(), gen_r, ctx_x, ctx_r, opts.repulsion_delta)
            x = x + torch.as_tensor(disp, dtype=x.dtype)
    if inter is None:
        inter = predict_inter_bonds(model, gen, h, x, opts.bond_radius, opts.resolve_valency)
    return x, inter


def _context(binder: LatentCloud, site: LatentCloud, site_ent: Optional[Entity]) -> DecodeContext:
    nb, ns = len(binder), len(site)
    return DecodeContext(LatentCloud.cat(binder, site), torch.arange(nb),
                         site_ent, torch.arange(nb, nb + ns) if site_ent is not None else None)


@dataclass
class SampleTrace:
    """Counts of the decoding stages actually executed (for inspection)."""

    structure_passes: int = 0
    re_encodes: int = 0


@torch.no_grad()
def sample_vae(model: FullAtomVAE, vocab: Vocabulary, binder: LatentCloud, site: LatentCloud,
               site_ent: Optional[Entity], prompts, opts: DecodeOptions = DecodeOptions(),
               generator: Optional[torch.Generator] = None, sample_types: bool = False,
               trace: Optional[SampleTrace] = None) -> BlockGraph:
    """Types, then structure with predicted bonds, then one re-encode and refinement pass."""
    prompts = torch.as_tensor(np.asarray(prompts, dtype=np.int64))
    types = model.decode_types(binder, site, prompts, sample=sample_types, generator=generator)
    gen = lookup_entity(types.tolist(), vocab, prompts.tolist(), dtype=binder.z.dtype)
    x, inter = decode_structure(model, gen, _context(binder, site, site_ent), None, opts, generator)
    if trace is not None:
        trace.structure_passes += 1
    draft = Entity(gen.elements, gen.atom_pos, gen.atom_block, x, gen.block_types, gen.prompts,
                   gen.bonds, inter)
    refined = model.encode(draft, deterministic=True)
    if trace is not None:
        trace.re_encodes += 1
    x, inter = decode_structure(model, gen, _context(refined, site, site_ent), inter, opts, generator)
    if trace is not None:
        trace.structure_passes += 1
    out = Entity(gen.elements, gen.atom_pos, gen.atom_block, x, gen.block_types, gen.prompts,
                 gen.bonds, inter)
    return entity_to_graph(out, vocab)

"""Binding-site extraction and prompt assignment."""

from __future__ import annotations

import copy
import logging

import numpy as np

from ..structures import Block, BlockGraph

log = logging.getLogger(__name__)


def reference_point(block: Block) -> np.ndarray:
    """C-beta when the block has one, otherwise the block's center of mass."""
    k = block.atom_index("CB")
    if k is not None:
        return np.asarray(block.atoms[k].coord, dtype=float)
    return block.center()


def select_binding_site(target: BlockGraph, binder: BlockGraph, radius: float = 10.0) -> BlockGraph:
    """Target blocks whose reference point lies within ``radius`` of any binder block's."""
    if not target.blocks or not binder.blocks:
        keep = []
    else:
        t = np.stack([reference_point(b) for b in target.blocks])
        s = np.stack([reference_point(b) for b in binder.blocks])
        d = np.linalg.norm(t[:, None, :] - s[None, :, :], axis=-1)
        keep = [int(k) for k in np.nonzero((d <= radius).any(axis=1))[0]]
    site = target.subgraph(keep)
    if not keep:
        log.warning("binding site is empty at radius %.2f", radius)
        site.metadata["empty_site"] = "1"
    return site


def assign_prompts(graph: BlockGraph, mode: str) -> BlockGraph:
    """``aa_only`` sets every prompt to 1, ``free`` sets every prompt to 0."""
    if mode not in ("aa_only", "free"):
        raise ValueError(f"unknown prompt mode {mode!r}")
    bit = 1 if mode == "aa_only" else 0
    out = copy.deepcopy(graph)
    for b in out.blocks:
        b.prompt = bit
    return out

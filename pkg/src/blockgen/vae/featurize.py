"""Tensor views of block graphs for the autoencoder."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import torch

from ..blockrepr.vocab import Vocabulary
from ..elements import ELEMENT_INDEX
from ..errors import DataError
from ..structures import Atom, Block, BlockGraph


@dataclass
class Entity:
    """Flat atom tensors of one block graph.

    ``bonds`` holds intra-block bonds and ``inter`` inter-block bonds, both as
    (p, q, order) rows over the flat atom index.
    """

    elements: torch.Tensor      # (A,) element ids
    atom_pos: torch.Tensor      # (A,) canonical position inside the block
    atom_block: torch.Tensor    # (A,) owning block
    coords: torch.Tensor        # (A, 3)
    block_types: torch.Tensor   # (B,) vocabulary ids
    prompts: torch.Tensor       # (B,)
    bonds: torch.Tensor         # (K, 3)
    inter: torch.Tensor         # (M, 3)

    @property
    def n_blocks(self) -> int:
        return int(self.block_types.shape[0])

    @property
    def n_atoms(self) -> int:
        return int(self.elements.shape[0])

    def centers(self) -> torch.Tensor:
        return block_mean(self.coords, self.atom_block, self.n_blocks)

    def to(self, dtype) -> "Entity":
        return Entity(self.elements, self.atom_pos, self.atom_block, self.coords.to(dtype),
                      self.block_types, self.prompts, self.bonds, self.inter)

    def with_coords(self, coords: torch.Tensor) -> "Entity":
        return Entity(self.elements, self.atom_pos, self.atom_block, coords,
                      self.block_types, self.prompts, self.bonds, self.inter)

    def select_blocks(self, keep: torch.Tensor) -> "Entity":
        """Sub-entity of the blocks flagged in the boolean mask ``keep``."""
        new_id = torch.full((self.n_blocks,), -1, dtype=torch.long)
        new_id[keep] = torch.arange(int(keep.sum()))
        amask = keep[self.atom_block]
        atom_id = torch.full((self.n_atoms,), -1, dtype=torch.long)
        atom_id[amask] = torch.arange(int(amask.sum()))

        def remap(b):
            if b.numel() == 0:
                return b
            ok = amask[b[:, 0]] & amask[b[:, 1]]
            b = b[ok]
            return torch.stack([atom_id[b[:, 0]], atom_id[b[:, 1]], b[:, 2]], 1)

        return Entity(self.elements[amask], self.atom_pos[amask], new_id[self.atom_block[amask]],
                      self.coords[amask], self.block_types[keep], self.prompts[keep],
                      remap(self.bonds), remap(self.inter))


def block_mean(values: torch.Tensor, index: torch.Tensor, n: int) -> torch.Tensor:
    total = torch.zeros((n,) + values.shape[1:], dtype=values.dtype).index_add(0, index, values)
    count = torch.zeros(n, dtype=values.dtype).index_add(0, index, torch.ones_like(index, dtype=values.dtype))
    return total / count.clamp_min(1).reshape((n,) + (1,) * (values.dim() - 1))


def _bond_tensor(rows) -> torch.Tensor:
    return torch.tensor(rows, dtype=torch.long).reshape(-1, 3)


def featurize(graph: BlockGraph, vocab: Vocabulary, dtype=torch.float32) -> Entity:
    if not graph.blocks:
        raise DataError("cannot featurize an empty block graph")
    elements, pos, owner, coords, types, prompts, bonds = [], [], [], [], [], [], []
    offsets = graph.atom_offsets()
    for bi, block in enumerate(graph.blocks):
        if block.block_type not in vocab:
            raise DataError(f"block {bi} has type {block.block_type!r} outside the vocabulary")
        entry = vocab[block.block_type]
        names = {n: k for k, n in enumerate(entry.atom_names)}
        types.append(vocab.id_of(block.block_type))
        prompts.append(block.prompt)
        for k, atom in enumerate(block.atoms):
            elements.append(ELEMENT_INDEX[atom.element])
            # residue atoms are matched by name so missing atoms do not shift positions
            pos.append(names.get(atom.name, k) if entry.is_amino_acid else k)
            owner.append(bi)
            coords.append(atom.coord)
        bonds.extend((offsets[bi] + p, offsets[bi] + q, o) for p, q, o in block.intra_bonds)
    inter = [(offsets[i] + p, offsets[j] + q, o) for i, p, j, q, o in graph.inter_bonds]
    return Entity(torch.tensor(elements), torch.tensor(pos), torch.tensor(owner),
                  torch.tensor(coords, dtype=dtype), torch.tensor(types), torch.tensor(prompts),
                  _bond_tensor(bonds), _bond_tensor(inter))


def lookup_entity(type_ids: list[int], vocab: Vocabulary, prompts: Optional[list[int]] = None,
                  dtype=torch.float32) -> Entity:
    """Atoms and intra-block bonds of each block type, coordinates zeroed."""
    elements, pos, owner, bonds = [], [], [], []
    n = 0
    for bi, tid in enumerate(type_ids):
        entry = vocab[int(tid)]
        for k, el in enumerate(entry.elements):
            elements.append(ELEMENT_INDEX[el])
            pos.append(k)
            owner.append(bi)
        bonds.extend((n + p, n + q, o) for p, q, o in entry.bonds)
        n += len(entry)
    prompts = prompts if prompts is not None else [0] * len(type_ids)
    return Entity(torch.tensor(elements, dtype=torch.long), torch.tensor(pos, dtype=torch.long),
                  torch.tensor(owner, dtype=torch.long), torch.zeros((n, 3), dtype=dtype),
                  torch.tensor([int(t) for t in type_ids], dtype=torch.long),
                  torch.tensor(prompts, dtype=torch.long), _bond_tensor(bonds), _bond_tensor([]))


def entity_to_graph(ent: Entity, vocab: Vocabulary) -> BlockGraph:
    """Back to a BlockGraph, naming atoms after the vocabulary entries."""
    starts = {}
    blocks = []
    for bi in range(ent.n_blocks):
        idx = torch.nonzero(ent.atom_block == bi).flatten().tolist()
        starts[bi] = idx[0] if idx else 0
        entry = vocab[int(ent.block_types[bi])]
        atoms = [Atom(entry.elements[int(ent.atom_pos[a])], entry.atom_names[int(ent.atom_pos[a])],
                      tuple(float(c) for c in ent.coords[a])) for a in idx]
        blocks.append(Block(entry.key, atoms, [], int(ent.prompts[bi])))
    for p, q, o in ent.bonds.tolist():
        bi = int(ent.atom_block[p])
        blocks[bi].intra_bonds.append((p - starts[bi], q - starts[bi], o))
    inter = []
    for p, q, o in ent.inter.tolist():
        i, j = int(ent.atom_block[p]), int(ent.atom_block[q])
        lp, lq = p - starts[i], q - starts[j]
        if i > j:
            i, j, lp, lq = j, i, lq, lp
        inter.append((i, lp, j, lq, o))
    return BlockGraph(blocks, sorted(inter))

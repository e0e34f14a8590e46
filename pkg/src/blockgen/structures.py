"""Core molecular containers: atoms, blocks, block graphs and complexes.

A ``MolGraph`` is the flat atom-level view used by decomposition and by the
substructure metrics.  A ``BlockGraph`` groups atoms into typed blocks
(residues or fragments) with intra-block and inter-block bonds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .elements import ELEMENT_INDEX, VALENCY
from .errors import IntegrityError

BOND_ORDERS = (1, 2, 3)


@dataclass
class Atom:
    element: str
    name: str
    coord: tuple[float, float, float]

    def __post_init__(self):
        if self.element not in ELEMENT_INDEX:
            raise IntegrityError(f"unknown element {self.element!r}")
        self.coord = tuple(float(c) for c in self.coord)
        if len(self.coord) != 3 or not all(math.isfinite(c) for c in self.coord):
            raise IntegrityError(f"atom {self.name!r} has invalid coordinate {self.coord}")


@dataclass
class Block:
    block_type: Optional[str]
    atoms: list[Atom]
    intra_bonds: list[tuple[int, int, int]] = field(default_factory=list)
    prompt: int = 0

    @property
    def elements(self) -> list[str]:
        return [a.element for a in self.atoms]

    @property
    def coords(self) -> np.ndarray:
        if not self.atoms:
            return np.zeros((0, 3))
        return np.array([a.coord for a in self.atoms], dtype=float)

    def atom_index(self, name: str) -> Optional[int]:
        for k, a in enumerate(self.atoms):
            if a.name == name:
                return k
        return None

    def center(self) -> np.ndarray:
        return self.coords.mean(axis=0)


@dataclass
class BlockGraph:
    blocks: list[Block]
    inter_bonds: list[tuple[int, int, int, int, int]] = field(default_factory=list)
    # free-form diagnostics (skipped residues, incomplete blocks); never serialized
    metadata: dict[str, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def n_atoms(self) -> int:
        return sum(len(b.atoms) for b in self.blocks)

    def atom_offsets(self) -> list[int]:
        offsets, n = [], 0
        for b in self.blocks:
            offsets.append(n)
            n += len(b.atoms)
        return offsets

    def all_coords(self) -> np.ndarray:
        if not self.blocks:
            return np.zeros((0, 3))
        return np.concatenate([b.coords for b in self.blocks], axis=0)

    def validate(self, whole_graph_valency: bool = False) -> None:
        """Raise IntegrityError on broken indices, bond orders, duplicates or valency.

        Valency is a per-block invariant.  Inter bonds are only counted with
        ``whole_graph_valency``: uncorrected samples may over-bond across blocks,
        and that is something to measure, not a reason to refuse the file.
        """
        for bi, block in enumerate(self.blocks):
            n = len(block.atoms)
            if block.prompt not in (0, 1):
                raise IntegrityError(f"block {bi}: prompt must be 0 or 1, got {block.prompt}")
            for p, q, order in block.intra_bonds:
                if not (0 <= p < n and 0 <= q < n) or p == q:
                    raise IntegrityError(f"block {bi}: intra bond ({p},{q}) outside 0..{n - 1}")
                if order not in BOND_ORDERS:
                    raise IntegrityError(f"block {bi}: bond order {order} not in {{1,2,3}}")
        seen: set[tuple[int, int]] = set()
        offsets = self.atom_offsets()
        for i, p, j, q, order in self.inter_bonds:
            for b, a in ((i, p), (j, q)):
                if not 0 <= b < len(self.blocks):
                    raise IntegrityError(f"inter bond references missing block {b}")
                if not 0 <= a < len(self.blocks[b].atoms):
                    raise IntegrityError(
                        f"inter bond references atom {a} of block {b} "
                        f"({len(self.blocks[b].atoms)} atoms)")
            if i == j:
                raise IntegrityError(f"inter bond within a single block {i}")
            if order not in BOND_ORDERS:
                raise IntegrityError(f"inter bond order {order} not in {{1,2,3}}")
            key = tuple(sorted((offsets[i] + p, offsets[j] + q)))
            if key in seen:
                raise IntegrityError(f"duplicate inter bond {(i, p, j, q)}")
            seen.add(key)
        for bi, block in enumerate(self.blocks):
            used = [0] * len(block.atoms)
            for p, q, order in block.intra_bonds:
                used[p] += order
                used[q] += order
            for k, a in enumerate(block.atoms):
                if used[k] > VALENCY[a.element]:
                    raise IntegrityError(f"block {bi}: atom {k} ({a.element}) carries bond order {used[k]} "
                                         f"> valency {VALENCY[a.element]}")
        if whole_graph_valency:
            mol = self.to_mol()
            used = mol.valence_used()
            for k, el in enumerate(mol.elements):
                if used[k] > VALENCY[el]:
                    raise IntegrityError(
                        f"atom {k} ({el}) carries bond order {used[k]} > valency {VALENCY[el]}")

    def to_mol(self) -> "MolGraph":
        offsets = self.atom_offsets()
        elements, names, coords, bonds, owner = [], [], [], [], []
        for bi, block in enumerate(self.blocks):
            for a in block.atoms:
                elements.append(a.element)
                names.append(a.name)
                coords.append(a.coord)
                owner.append(bi)
            for p, q, order in block.intra_bonds:
                bonds.append((offsets[bi] + p, offsets[bi] + q, order))
        for i, p, j, q, order in self.inter_bonds:
            bonds.append((offsets[i] + p, offsets[j] + q, order))
        return MolGraph(elements, bonds,
                        coords=np.array(coords, dtype=float).reshape(-1, 3),
                        names=names, residue_index=owner,
                        residue_names=[b.block_type or "" for b in self.blocks])

    def subgraph(self, keep: list[int]) -> "BlockGraph":
        """Blocks ``keep`` (in the given order) with inter bonds restricted to them."""
        remap = {old: new for new, old in enumerate(keep)}
        bonds = [(remap[i], p, remap[j], q, o) for i, p, j, q, o in self.inter_bonds
                 if i in remap and j in remap]
        return BlockGraph([self.blocks[k] for k in keep], bonds, dict(self.metadata))


@dataclass
class ComplexRecord:
    id: str
    binder: Optional[BlockGraph]
    target: BlockGraph
    metadata: dict[str, str] = field(default_factory=dict)


@dataclass
class MolGraph:
    """Atom-level molecular graph with optional coordinates and residue labels."""

    elements: list[str]
    bonds: list[tuple[int, int, int]]
    coords: Optional[np.ndarray] = None
    names: Optional[list[str]] = None
    residue_index: Optional[list[int]] = None
    residue_names: Optional[list[str]] = None

    def __len__(self) -> int:
        return len(self.elements)

    def adjacency(self) -> list[dict[int, int]]:
        adj: list[dict[int, int]] = [dict() for _ in self.elements]
        for p, q, order in self.bonds:
            adj[p][q] = order
            adj[q][p] = order
        return adj

    def valence_used(self) -> list[int]:
        used = [0] * len(self.elements)
        for p, q, order in self.bonds:
            used[p] += order
            used[q] += order
        return used

    def to_networkx(self):
        import networkx as nx

        g = nx.Graph()
        for k, el in enumerate(self.elements):
            g.add_node(k, element=el)
        for p, q, order in self.bonds:
            g.add_edge(p, q, order=order)
        return g

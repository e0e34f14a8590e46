"""Block-level decomposition of atom graphs and polymer chains."""

from __future__ import annotations

import numpy as np

from ..errors import DecompositionError
from ..structures import Atom, Block, BlockGraph, MolGraph
from .residues import TEMPLATES
from .rings import sssr
from .vocab import FragmentState, Vocabulary


def _ring_neighbors(state: FragmentState, atom_rings: list[set[int]]):
    """For each fragment root, the roots of adjacent fragments sharing a ring with it."""
    rings_of = {root: set().union(*(atom_rings[a] for a in frag))
                for root, frag in state.frags.items()}
    out: dict[int, set[int]] = {root: set() for root in state.frags}
    for p, q, _ in state.mol.bonds:
        a, b = state.owner[p], state.owner[q]
        if a != b and rings_of[a] & rings_of[b]:
            out[a].add(b)
            out[b].add(a)
    return out


def merge_fragments(mol: MolGraph, vocab: Vocabulary, ring_prior: bool = True) -> FragmentState:
    """Greedy principal-subgraph merging; returns the final atom partition.

    Each round merges the adjacent pair whose union is the most frequent
    vocabulary fragment.  Ties go to the lexicographically smallest key, then
    to the smallest (i, j) block-index pair, blocks being numbered by their
    smallest atom index.  With ``ring_prior`` a pair is skipped when exactly
    one side has a same-ring neighbour that is not the other side.
    """
    for el in set(mol.elements):
        if vocab.fragment_frequency(el) is None:
            raise DecompositionError(f"element {el} has no single-atom entry in the vocabulary")
    state = FragmentState(mol)
    atom_rings: list[set[int]] = [set() for _ in range(len(mol))]
    if ring_prior:
        for r, ring in enumerate(sssr(len(mol), mol.bonds)):
            for a in ring:
                atom_rings[a].add(r)

    while True:
        ring_nb = _ring_neighbors(state, atom_rings) if ring_prior else None
        best = None
        for fa, fb in state.adjacent_pairs():
            if ring_prior:
                ra, rb = min(fa), min(fb)
                na, nb = ring_nb[ra], ring_nb[rb]
                if (rb not in na and bool(na)) != (ra not in nb and bool(nb)):
                    continue
            key = state.canonical(fa | fb)[0]
            freq = vocab.fragment_frequency(key)
            if freq is None:
                continue
            # pairs arrive in (i, j) order, so strict comparison keeps the earliest
            cand = (-freq, key)
            if best is None or cand < best[0]:
                best = (cand, fa, fb)
        if best is None:
            return state
        state.merge(best[1], best[2])


def _blocks_from_partition(mol: MolGraph, parts: list[tuple[str, list[int]]]) -> BlockGraph:
    """Build a BlockGraph from (block_type, ordered atom indices) groups."""
    coords = mol.coords if mol.coords is not None else np.zeros((len(mol), 3))
    where: dict[int, tuple[int, int]] = {}
    blocks = []
    for bi, (btype, atoms) in enumerate(parts):
        for k, a in enumerate(atoms):
            where[a] = (bi, k)
        names = [mol.names[a] if mol.names else f"{mol.elements[a]}{k}" for k, a in enumerate(atoms)]
        blocks.append(Block(btype, [Atom(mol.elements[a], n, coords[a]) for a, n in zip(atoms, names)]))
    inter = []
    for p, q, o in mol.bonds:
        (bp, lp), (bq, lq) = where[p], where[q]
        if bp == bq:
            blocks[bp].intra_bonds.append((min(lp, lq), max(lp, lq), o))
        else:
            if bp > bq:
                bp, lp, bq, lq = bq, lq, bp, lp
            inter.append((bp, lp, bq, lq, o))
    for b in blocks:
        b.intra_bonds.sort()
    inter.sort()
    return BlockGraph(blocks, inter)


def decompose(mol: MolGraph, vocab: Vocabulary, ring_prior: bool = True) -> BlockGraph:
    """Partition an atom graph into vocabulary fragments.

    Atoms inside each block follow the fragment's canonical order, so a block
    lines up atom-for-atom with its vocabulary entry.
    """
    state = merge_fragments(mol, vocab, ring_prior)
    parts = []
    for frag in state.ordered_fragments():
        key, order = state.canonical(frag)
        parts.append((key, order))
    return _blocks_from_partition(mol, parts)


def decompose_polymer(chain: MolGraph, vocab: Vocabulary) -> BlockGraph:
    """One block per standard residue; non-standard residues are split into fragments."""
    if len(chain) == 0 or chain.residue_index is None:
        raise DecompositionError("empty or unlabeled chain")
    res_atoms: dict[int, list[int]] = {}
    for a, r in enumerate(chain.residue_index):
        res_atoms.setdefault(r, []).append(a)
    parts: list[tuple[str, list[int]]] = []
    for r in sorted(res_atoms):
        atoms = res_atoms[r]
        resname = chain.residue_names[r]
        if resname in TEMPLATES:
            names = TEMPLATES[resname].atom_names
            rank = {n: k for k, n in enumerate(names)}
            ordered = sorted(atoms, key=lambda a: (rank.get(chain.names[a], len(names)), a)
                             ) if chain.names else atoms
            parts.append((resname, ordered))
            continue
        local = {a: k for k, a in enumerate(atoms)}
        sub = MolGraph([chain.elements[a] for a in atoms],
                       [(local[p], local[q], o) for p, q, o in chain.bonds
                        if p in local and q in local])
        state = merge_fragments(sub, vocab)
        for frag in state.ordered_fragments():
            key, order = state.canonical(frag)
            parts.append((key, [atoms[k] for k in order]))
    return _blocks_from_partition(chain, parts)

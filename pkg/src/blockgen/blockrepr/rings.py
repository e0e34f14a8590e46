"""Smallest set of smallest rings."""

import networkx as nx


def sssr(n_atoms: int, bonds) -> list[frozenset[int]]:
    """Rings of a heavy-atom graph as atom-index sets (a minimum cycle basis)."""
    g = nx.Graph()
    g.add_nodes_from(range(n_atoms))
    g.add_edges_from((p, q) for p, q, *_ in bonds)
    rings = [frozenset(c) for c in nx.minimum_cycle_basis(g)]
    return sorted(rings, key=lambda r: (len(r), sorted(r)))


def ring_sizes(n_atoms: int, bonds) -> list[int]:
    return [len(r) for r in sssr(n_atoms, bonds)]

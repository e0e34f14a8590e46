"""Cluster-based diversity of generated binders."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import DisjointSet

from .alignment import sequence_identity
from .structure import rmsd


@dataclass
class Candidate:
    sequence: str
    coords: np.ndarray  # binder Cα, one row per residue


def linked(a: Candidate, b: Candidate, identity_cut: float = 0.4, rmsd_cut: float = 2.0) -> bool:
    # candidates of different length have no residue correspondence for RMSD
    if len(a.coords) != len(b.coords) or len(a.coords) == 0:
        return False
    if sequence_identity(a.sequence, b.sequence) <= identity_cut:
        return False
    return rmsd(a.coords, b.coords, "ligand_aligned") < rmsd_cut


def diversity(candidates: list[Candidate], identity_cut: float = 0.4, rmsd_cut: float = 2.0) -> float:
    """Number of single-linkage clusters divided by the number of candidates."""
    if not candidates:
        raise ValueError("need at least one candidate")
    ds = DisjointSet(range(len(candidates)))
    for i in range(len(candidates)):
        for j in range(i + 1, len(candidates)):
            if not ds.connected(i, j) and linked(candidates[i], candidates[j], identity_cut, rmsd_cut):
                ds.merge(i, j)
    return ds.n_subsets / len(candidates)

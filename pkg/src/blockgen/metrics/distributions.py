"""Histogram divergences: dihedrals, bond geometry, substructure statistics."""

from __future__ import annotations

import math
from typing import Iterable, Union

import numpy as np

from ..blockrepr.residues import CHI_ANGLES, TEMPLATES
from ..blockrepr.rings import sssr
from ..elements import METRIC_ELEMENTS
from ..kernels import dihedrals, histogram
from ..physcorr import GeomStats, bond_geometry
from ..structures import BlockGraph, MolGraph

DIHEDRAL_LO, DIHEDRAL_WIDTH, DIHEDRAL_BINS = -180.0, 10.0, 36
RING_SIZES = (3, 4, 5, 6, 7, 8)


def jsd(p, q) -> float:
    """Jensen-Shannon divergence in bits between two (unnormalized) histograms."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    if p.sum() <= 0 or q.sum() <= 0:
        return math.nan
    p = p / p.sum()
    q = q / q.sum()
    m = 0.5 * (p + q)

    def kl(a):
        nz = a > 0
        return float((a[nz] * np.log2(a[nz] / m[nz])).sum())

    return min(max(0.5 * kl(p) + 0.5 * kl(q), 0.0), 1.0)


def _coord(block, name):
    k = block.atom_index(name)
    return None if k is None else block.atoms[k].coord


def backbone_dihedrals(graph: BlockGraph) -> np.ndarray:
    """φ and ψ of consecutive residue blocks that both carry N, CA and C."""
    quads = []
    res = [b if b.block_type in TEMPLATES else None for b in graph.blocks]
    for i in range(len(res) - 1):
        a, b = res[i], res[i + 1]
        if a is None or b is None:
            continue
        pts = [_coord(a, "N"), _coord(a, "CA"), _coord(a, "C"),
               _coord(b, "N"), _coord(b, "CA"), _coord(b, "C")]
        if any(p is None for p in pts):
            continue
        quads.append(pts[0:4])  # ψ of residue i
        quads.append(pts[2:6])  # φ of residue i+1
    return _quad_dihedrals(quads)


def sidechain_dihedrals(graph: BlockGraph) -> np.ndarray:
    quads = []
    for b in graph.blocks:
        for names in CHI_ANGLES.get(b.block_type, ()):
            pts = [_coord(b, n) for n in names]
            if all(p is not None for p in pts):
                quads.append(pts)
    return _quad_dihedrals(quads)


def _quad_dihedrals(quads) -> np.ndarray:
    if not quads:
        return np.zeros(0)
    q = np.asarray(quads, float)
    return dihedrals(q[:, 0], q[:, 1], q[:, 2], q[:, 3])


def dihedral_histogram(angles) -> np.ndarray:
    # arctan2 can return exactly +180, which belongs with -180
    a = np.where(np.asarray(angles) >= 180.0, -180.0, angles)
    return histogram(a, DIHEDRAL_LO, DIHEDRAL_WIDTH, DIHEDRAL_BINS)


def dihedral_jsd(gen_set: Iterable[BlockGraph], ref_set: Iterable[BlockGraph],
                 which: str = "backbone") -> float:
    """JSD of pooled dihedrals on 10-degree bins; NaN when either pool is empty."""
    fn = {"backbone": backbone_dihedrals, "sidechain": sidechain_dihedrals}.get(which)
    if fn is None:
        raise ValueError(f"unknown dihedral set {which!r}")
    g = np.concatenate([fn(x) for x in gen_set] or [np.zeros(0)])
    r = np.concatenate([fn(x) for x in ref_set] or [np.zeros(0)])
    if len(g) == 0 or len(r) == 0:
        return math.nan
    return jsd(dihedral_histogram(g), dihedral_histogram(r))


def _mol(m) -> MolGraph:
    return m.to_mol() if isinstance(m, BlockGraph) else m


def geometry_jsd(gen_set: Iterable[Union[MolGraph, BlockGraph]], ref_stats: GeomStats) -> tuple[float, float]:
    """(bond-length JSD, bond-angle JSD) of generated molecules vs fitted statistics."""
    lh = np.zeros(len(ref_stats.length_hist))
    ah = np.zeros(len(ref_stats.angle_hist))
    for m in gen_set:
        lengths, angles, _ = bond_geometry(_mol(m))
        lh += histogram(lengths, *ref_stats.length_grid)
        ah += histogram(angles, *ref_stats.angle_grid)
    return jsd(lh, ref_stats.length_hist), jsd(ah, ref_stats.angle_hist)


def _counts(mols: list[MolGraph]) -> tuple[np.ndarray, np.ndarray]:
    atoms = np.zeros((len(mols), len(METRIC_ELEMENTS)))
    rings = np.zeros((len(mols), len(RING_SIZES)))
    for k, m in enumerate(mols):
        for el in m.elements:
            if el in METRIC_ELEMENTS:
                atoms[k, METRIC_ELEMENTS.index(el)] += 1
        for r in sssr(len(m), m.bonds):
            if len(r) in RING_SIZES:
                rings[k, RING_SIZES.index(len(r))] += 1
    return atoms, rings


def substructure_stats(gen_mols, ref_mols) -> dict[str, float]:
    """Atom-type and ring-size distribution JSD plus per-molecule mean-count MAE.

    The MAE averages ``|mean count in gen - mean count in ref|`` over the
    categories (7 elements, ring sizes 3 to 8).
    """
    gen = [_mol(m) for m in gen_mols]
    ref = [_mol(m) for m in ref_mols]
    if not gen or not ref:
        raise ValueError("both molecule sets must be non-empty")
    ga, gr = _counts(gen)
    ra, rr = _counts(ref)
    out = {}
    for name, g, r in (("atom", ga, ra), ("ring", gr, rr)):
        gs, rs = g.sum(0), r.sum(0)
        out[f"{name}_jsd"] = 0.0 if gs.sum() == 0 and rs.sum() == 0 else jsd(gs, rs)
        out[f"{name}_mae"] = float(np.abs(g.mean(0) - r.mean(0)).mean())
    return out

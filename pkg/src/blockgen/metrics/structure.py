"""Superposition, RMSD and residue-level clash ratios."""

from __future__ import annotations

import numpy as np

from ..blockrepr.residues import TEMPLATES
from ..kernels import close_pairs
from ..structures import BlockGraph

CLASH_THRESHOLD = 3.6574


def kabsch(mobile: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rotation R and translation t minimizing |mobile @ R.T + t - target|."""
    mobile = np.asarray(mobile, float)
    target = np.asarray(target, float)
    cm, ct = mobile.mean(0), target.mean(0)
    h = (mobile - cm).T @ (target - ct)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return r, ct - cm @ r.T


def _plain_rmsd(a, b) -> float:
    return float(np.sqrt(((np.asarray(a) - np.asarray(b)) ** 2).sum(-1).mean()))


def rmsd(gen_coords, ref_coords, mode: str = "ligand_aligned",
         gen_target=None, ref_target=None) -> float:
    """Binder RMSD after superposing either on the binder itself or on the target.

    ``complex_aligned`` fits the generated complex's target atoms onto the
    reference target atoms and carries the binder along; without target
    coordinates both complexes are assumed to share a frame already.
    """
    gen = np.asarray(gen_coords, float).reshape(-1, 3)
    ref = np.asarray(ref_coords, float).reshape(-1, 3)
    if gen.shape != ref.shape:
        raise ValueError(f"point-count mismatch: {len(gen)} vs {len(ref)}")
    if len(gen) == 0:
        raise ValueError("no points")
    if mode == "ligand_aligned":
        r, t = kabsch(gen, ref)
        return _plain_rmsd(gen @ r.T + t, ref)
    if mode == "complex_aligned":
        if gen_target is not None and ref_target is not None:
            gt = np.asarray(gen_target, float).reshape(-1, 3)
            rt = np.asarray(ref_target, float).reshape(-1, 3)
            if gt.shape != rt.shape:
                raise ValueError("target point-count mismatch")
            r, t = kabsch(gt, rt)
            gen = gen @ r.T + t
        return _plain_rmsd(gen, ref)
    raise ValueError(f"unknown rmsd mode {mode!r}")


def ca_coords(graph: BlockGraph) -> tuple[np.ndarray, list[int]]:
    """Cα coordinates of residue blocks and the indices of those blocks."""
    pts, idx = [], []
    for k, b in enumerate(graph.blocks):
        if b.block_type in TEMPLATES:
            a = b.atom_index("CA")
            if a is not None:
                pts.append(b.atoms[a].coord)
                idx.append(k)
    return np.array(pts, dtype=float).reshape(-1, 3), idx


def clash_ratios(binder: BlockGraph, target: BlockGraph,
                 threshold: float = CLASH_THRESHOLD) -> tuple[float, float]:
    """Fractions of binder-binder and binder-target Cα pairs closer than ``threshold``.

    Binder pairs adjacent in the chain (consecutive block indices) are not
    counted in either numerator or denominator.
    """
    xb, ib = ca_coords(binder)
    xt, _ = ca_coords(target)
    clash_in = 0.0
    if len(xb) > 1:
        close = close_pairs(xb, xb, threshold)
        iu, ju = np.triu_indices(len(xb), k=1)
        ib_arr = np.asarray(ib)
        keep = np.abs(ib_arr[iu] - ib_arr[ju]) > 1
        if keep.any():
            clash_in = float(close[iu[keep], ju[keep]].mean())
    clash_out = 0.0
    if len(xb) and len(xt):
        clash_out = float(close_pairs(xb, xt, threshold).mean())
    return clash_in, clash_out

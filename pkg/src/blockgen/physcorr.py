"""Physical corrections applied around decoding.

* clash repulsion of generated atoms away from fixed context atoms,
* greedy valency-capped acceptance of predicted bonds,
* a bond-length / bond-angle consistency filter against empirical histograms.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

import numpy as np

from .elements import VALENCY, VDW_RADII
from .errors import FormatError
from .kernels import bin_indices, histogram, repulsion_displacement
from .structures import BlockGraph, MolGraph

log = logging.getLogger(__name__)

REPULSION_DELTA = 0.3
CLASH_DELTA = 0.4

LENGTH_LO, LENGTH_WIDTH, LENGTH_BINS = 1.1, 0.005, 120
ANGLE_LO, ANGLE_WIDTH, ANGLE_BINS = 0.0, 2.0, 90
REJECT_THRESHOLD = 0.10


def radii_of(elements: Iterable[str]) -> np.ndarray:
    return np.array([VDW_RADII[e] for e in elements], dtype=float)


# ---------------------------------------------------------------------------
# clash repulsion
# ---------------------------------------------------------------------------
def repulsion_force(xi, xj, ri: float, rj: float, delta: float = REPULSION_DELTA) -> float:
    """Overlap magnitude ``ri + rj - delta - |xi - xj|`` when positive, else 0."""
    d = float(np.linalg.norm(np.asarray(xi, float) - np.asarray(xj, float)))
    lim = ri + rj - delta
    return lim - d if d < lim else 0.0


def repulsion_pass(coords: np.ndarray, elements, ctx_coords: np.ndarray, ctx_elements,
                   delta: float = REPULSION_DELTA) -> np.ndarray:
    """Push each generated atom out of overlapping context atoms (one pass)."""
    coords = np.asarray(coords, dtype=float)
    disp = repulsion_displacement(coords, radii_of(elements), ctx_coords,
                                  radii_of(ctx_elements), delta)
    return coords + disp


def count_clashes(coords, elements, ctx_coords, ctx_elements, delta: float = CLASH_DELTA) -> int:
    coords = np.asarray(coords, float).reshape(-1, 3)
    ctx = np.asarray(ctx_coords, float).reshape(-1, 3)
    if not len(coords) or not len(ctx):
        return 0
    d = np.linalg.norm(coords[:, None] - ctx[None], axis=-1)
    lim = radii_of(elements)[:, None] + radii_of(ctx_elements)[None, :] - delta
    return int((d < lim).sum())


# ---------------------------------------------------------------------------
# valency-capped bond acceptance
# ---------------------------------------------------------------------------
def resolve_valency(proposals: list[tuple[int, int, int, float]], elements: list[str],
                    committed: Optional[list[int]] = None,
                    valency: dict[str, int] = VALENCY,
                    existing: Iterable[tuple[int, int]] = ()) -> list[tuple[int, int, int, float]]:
    """Accept proposals ``(p, q, order, prob)`` in descending probability.

    ``committed`` holds bond orders already used per atom (intra-block bonds);
    a proposal is kept iff both endpoints still have room for its order and the
    pair is not bonded yet.  Ties in probability go to the lower atom pair.
    """
    used = list(committed) if committed is not None else [0] * len(elements)
    bonded = {(min(p, q), max(p, q)) for p, q in existing}
    accepted = []
    for p, q, order, prob in sorted(proposals, key=lambda b: (-b[3], min(b[0], b[1]), max(b[0], b[1]))):
        pair = (min(p, q), max(p, q))
        if p == q or pair in bonded:
            continue
        if used[p] + order <= valency[elements[p]] and used[q] + order <= valency[elements[q]]:
            used[p] += order
            used[q] += order
            bonded.add(pair)
            accepted.append((p, q, order, prob))
    return accepted


def valency_violations(mol: Union[MolGraph, BlockGraph], valency: dict[str, int] = VALENCY) -> list[int]:
    """Atom indices whose summed bond order exceeds their element's cap."""
    if isinstance(mol, BlockGraph):
        mol = mol.to_mol()
    used = mol.valence_used()
    return [k for k, el in enumerate(mol.elements) if used[k] > valency[el]]


# ---------------------------------------------------------------------------
# empirical geometry statistics
# ---------------------------------------------------------------------------
def bond_geometry(mol: MolGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bond lengths, bond angles (degrees) and, per angle, the two bond indices."""
    coords = np.asarray(mol.coords, float)
    bonds = [(p, q) for p, q, _ in mol.bonds]
    if not bonds:
        return np.zeros(0), np.zeros(0), np.zeros((0, 2), dtype=int)
    b = np.array(bonds)
    lengths = np.linalg.norm(coords[b[:, 0]] - coords[b[:, 1]], axis=-1)
    incident: list[list[int]] = [[] for _ in range(len(mol))]
    for k, (p, q) in enumerate(bonds):
        incident[p].append(k)
        incident[q].append(k)
    angles, pairs = [], []
    for center, ks in enumerate(incident):
        for a in range(len(ks)):
            for c in range(a + 1, len(ks)):
                ka, kc = ks[a], ks[c]
                u = coords[sum(bonds[ka]) - center] - coords[center]
                v = coords[sum(bonds[kc]) - center] - coords[center]
                cos = np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v))
                angles.append(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
                pairs.append((ka, kc))
    return lengths, np.array(angles), np.array(pairs, dtype=int).reshape(-1, 2)


@dataclass
class GeomStats:
    length_hist: np.ndarray
    angle_hist: np.ndarray
    reject_threshold: float = REJECT_THRESHOLD
    length_grid: tuple[float, float, int] = field(default=(LENGTH_LO, LENGTH_WIDTH, LENGTH_BINS))
    angle_grid: tuple[float, float, int] = field(default=(ANGLE_LO, ANGLE_WIDTH, ANGLE_BINS))

    @property
    def length_zero(self) -> np.ndarray:
        return self.length_hist == 0

    @property
    def angle_zero(self) -> np.ndarray:
        return self.angle_hist == 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "bin_lo", "bin_hi", "probability"])
            for kind, hist, (lo, width, _) in (("length", self.length_hist, self.length_grid),
                                               ("angle", self.angle_hist, self.angle_grid)):
                for k, p in enumerate(hist):
                    w.writerow([kind, f"{lo + k * width:.6g}", f"{lo + (k + 1) * width:.6g}", repr(float(p))])

    @classmethod
    def from_csv(cls, path) -> "GeomStats":
        rows: dict[str, list[float]] = {"length": [], "angle": []}
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["kind", "bin_lo", "bin_hi", "probability"]:
                raise FormatError(str(path), "expected header kind,bin_lo,bin_hi,probability")
            for row in reader:
                if row["kind"] not in rows:
                    raise FormatError(str(path), f"unknown kind {row['kind']!r}")
                rows[row["kind"]].append(float(row["probability"]))
        if len(rows["length"]) != LENGTH_BINS or len(rows["angle"]) != ANGLE_BINS:
            raise FormatError(str(path), "unexpected number of bins")
        return cls(np.array(rows["length"]), np.array(rows["angle"]))


def _as_mol(m) -> MolGraph:
    return m.to_mol() if isinstance(m, BlockGraph) else m


def fit_geom_stats(dataset: Iterable[Union[MolGraph, BlockGraph]]) -> GeomStats:
    """Normalized bond-length and bond-angle histograms over a set of molecules."""
    mols = [_as_mol(m) for m in dataset]
    if not mols:
        raise ValueError("empty dataset")
    lh = np.zeros(LENGTH_BINS)
    ah = np.zeros(ANGLE_BINS)
    for mol in mols:
        lengths, angles, _ = bond_geometry(mol)
        lh += histogram(lengths, LENGTH_LO, LENGTH_WIDTH, LENGTH_BINS)
        ah += histogram(angles, ANGLE_LO, ANGLE_WIDTH, ANGLE_BINS)
    if lh.sum() == 0:
        raise ValueError("no bond lengths inside the histogram support")
    return GeomStats(lh / lh.sum(), ah / max(ah.sum(), 1.0))


@dataclass
class FilterReport:
    keep: bool
    bad_fraction: float
    bad_bonds: list[tuple[int, int]]


def consistency_filter(mol: Union[MolGraph, BlockGraph], stats: GeomStats) -> FilterReport:
    """Discard molecules whose share of implausible bonds exceeds the threshold.

    A bond is implausible if its length lands in an empty length bin or any
    angle it spans lands in an empty angle bin.  Lengths outside the histogram
    support are not judged.
    """
    mol = _as_mol(mol)
    if not mol.bonds:
        return FilterReport(True, 0.0, [])
    lengths, angles, pairs = bond_geometry(mol)
    bad = np.zeros(len(lengths), dtype=bool)
    lidx = bin_indices(lengths, *stats.length_grid)
    inside = lidx >= 0
    bad[inside] = stats.length_zero[lidx[inside]]
    if len(angles):
        aidx = bin_indices(angles, *stats.angle_grid)
        bad_angle = (aidx >= 0) & stats.angle_zero[np.maximum(aidx, 0)]
        bad[pairs[bad_angle, 0]] = True
        bad[pairs[bad_angle, 1]] = True
    frac = float(bad.mean())
    offenders = [(mol.bonds[k][0], mol.bonds[k][1]) for k in np.nonzero(bad)[0]]
    return FilterReport(frac <= stats.reject_threshold, frac, offenders)

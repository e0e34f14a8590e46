"""Synthetic molecules and complexes with ideal geometry for the test-suite."""

from __future__ import annotations

import random

import numpy as np

from blockgen.blockrepr.residues import TEMPLATES
from blockgen.elements import VALENCY
from blockgen.structures import Atom, Block, BlockGraph, ComplexRecord, MolGraph

# (atom, ref1, ref2, ref3, bond length, bond angle, torsion) with torsions in degrees;
# "chi1"/"chi2" torsions are filled in per residue
_SIDE = {
    "ALA": [],
    "SER": [("OG", "N", "CA", "CB", 1.417, 110.8, "chi1")],
    "CYS": [("SG", "N", "CA", "CB", 1.808, 113.8, "chi1")],
    "VAL": [("CG1", "N", "CA", "CB", 1.527, 110.7, "chi1"),
            ("CG2", "N", "CA", "CB", 1.527, 110.4, "chi1+120")],
    "THR": [("OG1", "N", "CA", "CB", 1.43, 109.2, "chi1"),
            ("CG2", "N", "CA", "CB", 1.53, 111.1, "chi1-120")],
    "LEU": [("CG", "N", "CA", "CB", 1.53, 116.1, "chi1"),
            ("CD1", "CA", "CB", "CG", 1.524, 110.3, "chi2"),
            ("CD2", "CA", "CB", "CG", 1.525, 110.6, "chi2+120")],
    "ILE": [("CG1", "N", "CA", "CB", 1.527, 110.4, "chi1"),
            ("CG2", "N", "CA", "CB", 1.527, 110.5, "chi1-120"),
            ("CD1", "CA", "CB", "CG1", 1.52, 113.9, "chi2")],
    "ASP": [("CG", "N", "CA", "CB", 1.52, 113.0, "chi1"),
            ("OD1", "CA", "CB", "CG", 1.25, 119.2, "chi2"),
            ("OD2", "CA", "CB", "CG", 1.25, 118.2, "chi2+180")],
    "ASN": [("CG", "N", "CA", "CB", 1.52, 112.6, "chi1"),
            ("OD1", "CA", "CB", "CG", 1.23, 120.8, "chi2"),
            ("ND2", "CA", "CB", "CG", 1.33, 116.4, "chi2+180")],
    "LYS": [("CG", "N", "CA", "CB", 1.52, 114.1, "chi1"),
            ("CD", "CA", "CB", "CG", 1.52, 111.3, "chi2"),
            ("CE", "CB", "CG", "CD", 1.52, 111.3, 180.0),
            ("NZ", "CG", "CD", "CE", 1.49, 111.9, 180.0)],
    "GLU": [("CG", "N", "CA", "CB", 1.52, 114.1, "chi1"),
            ("CD", "CA", "CB", "CG", 1.52, 113.3, "chi2"),
            ("OE1", "CB", "CG", "CD", 1.25, 119.0, 0.0),
            ("OE2", "CB", "CG", "CD", 1.25, 118.1, 180.0)],
    "PHE": [("CG", "N", "CA", "CB", 1.50, 113.9, "chi1"),
            ("CD1", "CA", "CB", "CG", 1.39, 120.8, "chi2"),
            ("CD2", "CA", "CB", "CG", 1.39, 120.8, "chi2+180"),
            ("CE1", "CB", "CG", "CD1", 1.39, 120.0, 180.0),
            ("CE2", "CB", "CG", "CD2", 1.39, 120.0, 180.0),
            ("CZ", "CG", "CD1", "CE1", 1.39, 120.0, 0.0)],
}
BUILDABLE = ("GLY",) + tuple(sorted(_SIDE))


def place(a, b, c, bond, angle, torsion):
    """Position of d with |cd| = bond, angle(b, c, d) = angle, dihedral(a, b, c, d) = torsion."""
    angle, torsion = np.radians(angle), np.radians(torsion)
    bc = c - b
    bc /= np.linalg.norm(bc)
    n = np.cross(b - a, bc)
    n /= np.linalg.norm(n)
    m = np.cross(n, bc)
    d2 = np.array([-bond * np.cos(angle), bond * np.sin(angle) * np.cos(torsion),
                   bond * np.sin(angle) * np.sin(torsion)])
    return c + d2[0] * bc + d2[1] * m + d2[2] * n


def _torsion(spec, chi1, chi2):
    if not isinstance(spec, str):
        return spec
    base = chi1 if spec.startswith("chi1") else chi2
    return base + (float(spec[4:]) if len(spec) > 4 else 0.0)


def build_peptide(seq: list[str], phi: float = -120.0, psi: float = 130.0,
                  chi1: float = -60.0, chi2: float = 180.0, prompt: int = 1) -> BlockGraph:
    """Ideal-geometry chain of residue blocks (three-letter codes) with peptide bonds."""
    n = np.array([0.0, 0.0, 0.0])
    ca = np.array([1.458, 0.0, 0.0])
    c = place(np.array([0.0, 1.0, 0.0]), n, ca, 1.525, 111.2, -60.0)
    blocks, inter = [], []
    for k, res in enumerate(seq):
        pos = {"N": n, "CA": ca, "C": c}
        nxt_n = place(n, ca, c, 1.329, 116.2, psi)
        pos["O"] = place(nxt_n, ca, c, 1.231, 120.5, 180.0)
        if res != "GLY":
            pos["CB"] = place(c, n, ca, 1.53, 110.5, -122.6)
            for name, r1, r2, r3, b, a, tor in _SIDE[res]:
                pos[name] = place(pos[r1], pos[r2], pos[r3], b, a, _torsion(tor, chi1, chi2))
        tmpl = TEMPLATES[res]
        atoms = [Atom(el, nm, pos[nm]) for nm, el in zip(tmpl.atom_names, tmpl.elements)]
        blocks.append(Block(res, atoms, list(tmpl.bonds), prompt))
        if k:
            inter.append((k - 1, 2, k, 0, 1))
        nxt_ca = place(ca, c, nxt_n, 1.458, 121.7, 180.0)
        nxt_c = place(c, nxt_n, nxt_ca, 1.525, 111.2, phi)
        n, ca, c = nxt_n, nxt_ca, nxt_c
    return BlockGraph(blocks, inter)


def rigid(graph: BlockGraph, rot: np.ndarray, shift: np.ndarray) -> BlockGraph:
    blocks = [Block(b.block_type, [Atom(a.element, a.name, np.asarray(a.coord) @ rot.T + shift)
                                   for a in b.atoms], list(b.intra_bonds), b.prompt)
              for b in graph.blocks]
    return BlockGraph(blocks, list(graph.inter_bonds), dict(graph.metadata))


def toy_complex(binder_seq=("SER", "VAL", "THR", "LEU", "ASP"),
                target_seq=("ALA", "LYS", "PHE", "GLY", "ILE", "SER", "GLU", "VAL"),
                cid: str = "toy") -> ComplexRecord:
    """A 5-residue extended binder lying antiparallel next to an 8-residue target strand."""
    binder = build_peptide(list(binder_seq))
    target = build_peptide(list(target_seq), prompt=0)
    xb = binder.all_coords()
    xt = target.all_coords()
    axis_b = xb[binder.atom_offsets()[-1]] - xb[0]
    axis_t = xt[target.atom_offsets()[-1]] - xt[0]
    # rotate the target so its strand runs antiparallel to the binder
    rot = _align(axis_t, -axis_b)
    xt_rot = xt @ rot.T
    side = np.cross(axis_b, [0.0, 0.0, 1.0])
    side /= np.linalg.norm(side)
    for gap in np.arange(4.0, 15.0, 0.25):
        shift = xb.mean(0) - xt_rot.mean(0) + gap * side
        d = np.linalg.norm(xb[:, None] - (xt_rot + shift)[None], axis=-1)
        if d.min() > 3.3:
            break
    return ComplexRecord(cid, binder, rigid(target, rot, shift), {})


def _align(a, b):
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    v = np.cross(a, b)
    c = float(np.dot(a, b))
    if np.linalg.norm(v) < 1e-8:
        return np.eye(3) if c > 0 else -np.eye(3)
    vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + vx + vx @ vx * (1 / (1 + c))


def tiny_net(cutoff: float = 10.0, hidden: int = 32, layers: int = 2):
    from blockgen.eqnet import EqNetConfig
    return EqNetConfig(hidden_size=hidden, n_layers=layers, n_heads=4, n_rbf=16, cutoff=cutoff,
                       edge_embed_size=16, n_vec=8)


def tiny_vae(vocab, dtype=None, seed: int = 0):
    import torch
    from blockgen.vae import FullAtomVAE, VaeConfig
    torch.manual_seed(seed)
    model = FullAtomVAE(vocab, VaeConfig(atom_net=tiny_net(), latent_net=tiny_net()))
    return model.to(dtype) if dtype is not None else model


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


# --------------------------------------------------------------------------
# random valence-valid molecules
# --------------------------------------------------------------------------
_FUZZ_ELEMENTS = ("C", "C", "C", "C", "N", "O", "S", "F", "Cl", "P")


def random_molecule(rng: random.Random, max_atoms: int = 20) -> MolGraph:
    """Random connected heavy-atom graph that respects the valency table."""
    while True:
        n = rng.randint(1, max_atoms)
        elements = [rng.choice(_FUZZ_ELEMENTS) for _ in range(n)]
        used = [0] * n
        bonds = {}
        ok = True
        for a in range(1, n):  # spanning tree first
            cands = [b for b in range(a) if used[b] < VALENCY[elements[b]]]
            if not cands or used[a] >= VALENCY[elements[a]]:
                ok = False
                break
            b = rng.choice(cands)
            bonds[(b, a)] = 1
            used[a] += 1
            used[b] += 1
        if not ok:
            continue
        for _ in range(rng.randint(0, n)):  # extra ring closures and bond upgrades
            a, b = rng.sample(range(n), 2) if n > 1 else (0, 0)
            if a == b:
                break
            key = (min(a, b), max(a, b))
            if used[a] < VALENCY[elements[a]] and used[b] < VALENCY[elements[b]]:
                if key in bonds and bonds[key] < 3:
                    bonds[key] += 1
                elif key not in bonds:
                    bonds[key] = 1
                else:
                    continue
                used[a] += 1
                used[b] += 1
        return MolGraph(elements, [(p, q, o) for (p, q), o in sorted(bonds.items())])

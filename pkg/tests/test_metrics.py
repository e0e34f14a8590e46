import math

import numpy as np
import pytest

from fixtures import build_peptide, random_rotation
from blockgen.blockrepr import mol_from_smiles
from blockgen.metrics import (BLOSUM62, Candidate, aar, align, backbone_dihedrals, clash_ratios, dihedral_jsd,
                              diversity, geometry_jsd, jsd, rmsd, sidechain_dihedrals, substructure_stats)
from blockgen.metrics.alignment import ALPHABET
from blockgen.metrics.distributions import dihedral_histogram
from blockgen.physcorr import fit_geom_stats
from blockgen.structures import Atom, Block, BlockGraph


# -- alignment ---------------------------------------------------------------
def brute_force_alignments(a, b, gap_open=-10.0, gap_extend=-0.5):
    """Every global alignment as (score, identities), scored with affine gaps."""
    out = []

    def rec(i, j, prev, score, ident):
        if i == len(a) and j == len(b):
            out.append((score, ident))
            return
        if i < len(a) and j < len(b):
            s = BLOSUM62[ALPHABET.index(a[i]), ALPHABET.index(b[j])]
            rec(i + 1, j + 1, "M", score + s, ident + (a[i] == b[j]))
        if i < len(a):
            rec(i + 1, j, "X", score + (gap_extend if prev == "X" else gap_open), ident)
        if j < len(b):
            rec(i, j + 1, "Y", score + (gap_extend if prev == "Y" else gap_open), ident)

    rec(0, 0, "", 0.0, 0)
    return out


def oracle_aar(gen, ref):
    alns = brute_force_alignments(gen, ref)
    best = max(s for s, _ in alns)
    idents = {i for s, i in alns if s == best}
    return best, idents


def test_aar_reference_case():
    best, idents = oracle_aar("ARGFE", "RGFED")
    assert idents == {4}
    assert align("ARGFE", "RGFED")[0] == best
    assert aar("ARGFE", "RGFED") == pytest.approx(0.8)


def test_aar_trivial_cases():
    assert aar("ACDEFG", "ACDEFG") == 1.0
    assert aar("AAAA", "GGGG") == 0.0
    with pytest.raises(ValueError):
        aar("A", "")


def test_alignment_matches_brute_force_on_random_pairs():
    rng = np.random.default_rng(0)
    for _ in range(150):
        a = "".join(rng.choice(list(ALPHABET), rng.integers(1, 6)))
        b = "".join(rng.choice(list(ALPHABET), rng.integers(1, 6)))
        best, idents = oracle_aar(a, b)
        score, ident = align(a, b)
        assert score == pytest.approx(best, abs=1e-9)
        assert ident in idents


def test_blosum_symmetric_spot_values():
    assert np.array_equal(BLOSUM62, BLOSUM62.T)
    idx = ALPHABET.index
    assert BLOSUM62[idx("W"), idx("W")] == 11 and BLOSUM62[idx("A"), idx("R")] == -1
    assert BLOSUM62[idx("C"), idx("C")] == 9 and BLOSUM62[idx("I"), idx("V")] == 3


# -- rmsd ------------------------------------------------------------------------
def axis_angle(v):
    theta = np.linalg.norm(v)
    if theta < 1e-15:
        return np.eye(3)
    k = v / theta
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(theta) * K + (1 - math.cos(theta)) * K @ K


def grid_rmsd(a, b):
    """Minimum over a zooming grid of rotation vectors; no SVD involved."""
    a = a - a.mean(0)
    b = b - b.mean(0)

    def cost(v):
        return math.sqrt(((a @ axis_angle(v).T - b) ** 2).sum(-1).mean())

    best_v, best = np.zeros(3), cost(np.zeros(3))
    axis = np.linspace(-math.pi, math.pi, 21)
    for v in ((x, y, z) for x in axis for y in axis for z in axis):
        c = cost(np.array(v))
        if c < best:
            best_v, best = np.array(v), c
    step = axis[1] - axis[0]
    while step > 1e-6:
        local = np.linspace(-step, step, 7)
        for d in ((x, y, z) for x in local for y in local for z in local):
            c = cost(best_v + np.array(d))
            if c < best:
                best_v, best = best_v + np.array(d), c
        step /= 3
    return best


def test_rmsd_matches_rotation_grid_oracle():
    rng = np.random.default_rng(1)
    for _ in range(3):
        pts = rng.normal(size=(5, 3)) * 2
        noisy = pts @ random_rotation(rng).T + rng.normal(size=3) * 4 + rng.normal(size=(5, 3)) * 0.3
        assert abs(rmsd(noisy, pts) - grid_rmsd(noisy, pts)) < 1e-3


def test_rmsd_modes():
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(8, 3)) * 3
    assert rmsd(pts, pts) == pytest.approx(0, abs=1e-12)
    assert rmsd(pts, pts, "complex_aligned") == 0
    moved = pts @ random_rotation(rng).T + 5.0
    assert rmsd(moved, pts) < 1e-6
    assert rmsd(moved, pts, "complex_aligned") > 1.0
    with pytest.raises(ValueError):
        rmsd(pts[:3], pts)


def test_ligand_rmsd_invariant_to_rigid_motion():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=(10, 3)) * 3, rng.normal(size=(10, 3)) * 3
    base = rmsd(a, b)
    for _ in range(20):
        R1, R2 = random_rotation(rng), random_rotation(rng)
        assert abs(rmsd(a @ R1.T + rng.normal(size=3) * 10, b @ R2.T + rng.normal(size=3) * 10) - base) < 1e-6


def test_complex_rmsd_aligns_on_target():
    rng = np.random.default_rng(4)
    binder, target = rng.normal(size=(5, 3)), rng.normal(size=(9, 3)) * 4
    R, t = random_rotation(rng), rng.normal(size=3) * 5
    assert rmsd(binder @ R.T + t, binder, "complex_aligned", target @ R.T + t, target) < 1e-9


# -- clashes -----------------------------------------------------------------------
def ca_chain(xs, block_type="ALA"):
    return BlockGraph([Block(block_type, [Atom("C", "CA", tuple(x))]) for x in xs])


@pytest.mark.parametrize("gap,clash", [(3.0, 1.0), (4.0, 0.0), (3.6574, 0.0), (3.6573, 1.0)])
def test_clash_out_threshold(gap, clash):
    _, out = clash_ratios(ca_chain([(0, 0, 0)]), ca_chain([(gap, 0, 0)]))
    assert out == clash


def test_clash_in_excludes_chain_neighbours():
    # residues 0-1 and 1-2 are adjacent (close by construction); 0-2 clash, 0-3 and 1-3 do not
    b = ca_chain([(0, 0, 0), (1.5, 0, 0), (3.0, 0, 0), (20, 0, 0)])
    cin, _ = clash_ratios(b, BlockGraph([]))
    # non-adjacent pairs: (0,2), (0,3), (1,3) -> one clash of three
    assert cin == pytest.approx(1 / 3)


# -- divergences ---------------------------------------------------------------------
def test_jsd_cases():
    assert jsd([1, 2, 3], [1, 2, 3]) == 0.0
    assert jsd([1, 0], [0, 1]) == 1.0
    assert abs(jsd([0.5, 0.5], [1.0, 0.0]) - 0.3113) < 1e-3
    p, q = np.random.default_rng(0).random((2, 36))
    assert jsd(p, q) == pytest.approx(jsd(q, p), abs=1e-15)
    assert math.isnan(jsd([0, 0], [1, 1]))


def test_dihedral_bins_wrap():
    h = dihedral_histogram([-180.0, 180.0, 179.9, -170.0])
    assert h[0] == 2 and h[35] == 1 and h[1] == 1 and len(h) == 36


def test_dihedral_jsd_identical_and_disjoint():
    a = build_peptide(["ALA", "SER", "VAL", "THR"])
    assert dihedral_jsd([a], [a], "backbone") == 0.0
    assert dihedral_jsd([a], [a], "sidechain") == 0.0
    b = build_peptide(["ALA", "SER", "VAL", "THR"], phi=60.0, psi=-60.0)
    assert dihedral_jsd([a], [b], "backbone") == 1.0
    assert len(backbone_dihedrals(a)) == 6 and len(sidechain_dihedrals(a)) == 3
    np.testing.assert_allclose(sorted(backbone_dihedrals(a)), [-120] * 3 + [130] * 3, atol=1e-6)
    assert math.isnan(dihedral_jsd([a], [BlockGraph([])], "backbone"))


def test_geometry_jsd_cases():
    benzene = mol_from_smiles("C1=CC=CC=C1")
    ring = np.array([[1.39 * math.cos(k * math.pi / 3), 1.39 * math.sin(k * math.pi / 3), 0] for k in range(6)])
    benzene.coords = ring
    stats = fit_geom_stats([benzene])
    assert geometry_jsd([benzene], stats) == (0.0, 0.0)
    stretched = mol_from_smiles("C1=CC=CC=C1")
    stretched.coords = ring * (1.6 / 1.39)
    bl, ba = geometry_jsd([stretched], stats)
    assert bl == 1.0 and ba == 0.0


# -- diversity ----------------------------------------------------------------------
def test_diversity_cases():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(6, 3)) * 4
    same = [Candidate("ACDEFG", x) for _ in range(4)]
    assert diversity(same) == pytest.approx(1 / 4)
    far = [Candidate(s, rng.normal(size=(6, 3)) * 4) for s in ("ACDEFG", "WWWWWW", "PPPPPP", "KKKKKK")]
    assert diversity(far) == 1.0
    # one linked pair: same sequence, near-identical coordinates; the others differ in sequence
    mixed = [Candidate("ACDEFG", x), Candidate("ACDEFG", x + 0.1), Candidate("WWWWWW", x),
             Candidate("PPPPPP", x)]
    assert diversity(mixed) == pytest.approx(3 / 4)
    assert diversity(mixed + [Candidate("ACDEFG", x)]) <= diversity(mixed)


# -- substructures ---------------------------------------------------------------------
def test_substructure_stats():
    corpus = [mol_from_smiles("C1=CC=CC=C1"), mol_from_smiles("CCO")]
    same = substructure_stats(corpus, corpus)
    assert all(v == 0 for v in same.values())
    ring = substructure_stats([mol_from_smiles("C1=CC=CC=C1")], [mol_from_smiles("C1CC1")])
    assert ring["ring_jsd"] == 1.0
    # mean ring counts per size: gen has one 6-ring, ref one 3-ring -> |1-0| + |0-1| over 6 sizes
    assert ring["ring_mae"] == pytest.approx(2 / 6)
    # atoms: gen = {C:6}, ref = {C:3}; MAE over 7 element categories
    assert ring["atom_mae"] == pytest.approx(3 / 7)
    assert ring["atom_jsd"] == 0.0
    mixed = substructure_stats([mol_from_smiles("CO")], [mol_from_smiles("CC")])
    assert mixed["atom_jsd"] == pytest.approx(jsd([1, 1], [2, 0]))
    assert mixed["atom_mae"] == pytest.approx((1 + 1) / 7)

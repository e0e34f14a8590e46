"""Evaluation metrics for generated binders."""

from .alignment import BLOSUM62, AlignmentParams, aar, align, sequence_identity
from .distributions import (backbone_dihedrals, dihedral_jsd, geometry_jsd, jsd,
                            sidechain_dihedrals, substructure_stats)
from .diversity import Candidate, diversity
from .structure import CLASH_THRESHOLD, ca_coords, clash_ratios, kabsch, rmsd

__all__ = [
    "AlignmentParams", "BLOSUM62", "CLASH_THRESHOLD", "Candidate", "aar", "align",
    "backbone_dihedrals", "ca_coords", "clash_ratios", "dihedral_jsd", "diversity",
    "geometry_jsd", "jsd", "kabsch", "rmsd", "sequence_identity", "sidechain_dihedrals",
    "substructure_stats",
]

"""Unified block-graph representation."""

from ..structures import Block, BlockGraph, MolGraph
from .canon import canonical_key, canonical_smiles, parse_smiles
from .decompose import decompose, decompose_polymer, merge_fragments
from .residues import AMINO_ACIDS, TEMPLATES
from .rings import sssr
from .site import assign_prompts, reference_point, select_binding_site
from .vocab import Vocabulary, VocabEntry, entry_from_graph, extract_vocabulary


def mol_from_smiles(smiles: str) -> MolGraph:
    elements, bonds = parse_smiles(smiles)
    return MolGraph(elements, bonds)


def entry_from_smiles(smiles: str, frequency: int) -> VocabEntry:
    return entry_from_graph(*parse_smiles(smiles), frequency)


__all__ = [
    "AMINO_ACIDS", "Block", "BlockGraph", "MolGraph", "TEMPLATES", "VocabEntry", "Vocabulary",
    "assign_prompts", "canonical_key", "canonical_smiles", "decompose", "decompose_polymer",
    "entry_from_graph", "entry_from_smiles",
    "extract_vocabulary", "merge_fragments", "mol_from_smiles", "parse_smiles",
    "reference_point", "select_binding_site", "sssr",
]

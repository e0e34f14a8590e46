"""Heavy-atom templates of the 20 standard amino acids.

Aromatic rings are kekulized.  Atom order within each template is the
canonical order used everywhere a residue block is built.
"""

_BACKBONE = [("N", "N"), ("CA", "C"), ("C", "C"), ("O", "O")]
_BACKBONE_BONDS = [("N", "CA", 1), ("CA", "C", 1), ("C", "O", 2)]

_SIDECHAINS = {
    "GLY": ([], []),
    "ALA": ([("CB", "C")], [("CA", "CB", 1)]),
    "SER": ([("CB", "C"), ("OG", "O")], [("CA", "CB", 1), ("CB", "OG", 1)]),
    "CYS": ([("CB", "C"), ("SG", "S")], [("CA", "CB", 1), ("CB", "SG", 1)]),
    "VAL": ([("CB", "C"), ("CG1", "C"), ("CG2", "C")],
            [("CA", "CB", 1), ("CB", "CG1", 1), ("CB", "CG2", 1)]),
    "THR": ([("CB", "C"), ("OG1", "O"), ("CG2", "C")],
            [("CA", "CB", 1), ("CB", "OG1", 1), ("CB", "CG2", 1)]),
    "LEU": ([("CB", "C"), ("CG", "C"), ("CD1", "C"), ("CD2", "C")],
            [("CA", "CB", 1), ("CB", "CG", 1), ("CG", "CD1", 1), ("CG", "CD2", 1)]),
    "ILE": ([("CB", "C"), ("CG1", "C"), ("CG2", "C"), ("CD1", "C")],
            [("CA", "CB", 1), ("CB", "CG1", 1), ("CB", "CG2", 1), ("CG1", "CD1", 1)]),
    "MET": ([("CB", "C"), ("CG", "C"), ("SD", "S"), ("CE", "C")],
            [("CA", "CB", 1), ("CB", "CG", 1), ("CG", "SD", 1), ("SD", "CE", 1)]),
    "PRO": ([("CB", "C"), ("CG", "C"), ("CD", "C")],
            [("CA", "CB", 1), ("CB", "CG", 1), ("CG", "CD", 1), ("CD", "N", 1)]),
    "PHE": ([("CB", "C"), ("CG", "C"), ("CD1", "C"), ("CD2", "C"), ("CE1", "C"),
             ("CE2", "C"), ("CZ", "C")],
            [("CA", "CB", 1), ("CB", "CG", 1), ("CG", "CD1", 2), ("CD1", "CE1", 1),
             ("CE1", "CZ", 2), ("CZ", "CE2", 1), ("CE2", "CD2", 2), ("CD2", "CG", 1)]),
    "TYR": ([("CB", "C"), ("CG", "C"), ("CD1", "C"), ("CD2", "C"), ("CE1", "C"),
             ("CE2", "C"), ("CZ", "C"), ("OH", "O")],
            [("CA", "CB", 1), ("CB", "CG", 1), ("CG", "CD1", 2), ("CD1", "CE1", 1),
             ("CE1", "CZ", 2), ("CZ", "CE2", 1), ("CE2", "CD2", 2), ("CD2", "CG", 1),
             ("CZ", "OH", 1)]),
    "TRP": ([("CB", "C"), ("CG", "C"), ("CD1", "C"), ("CD2", "C"), ("NE1", "N"),
             ("CE2", "C"), ("CE3", "C"), ("CZ2", "C"), ("CZ3", "C"), ("CH2", "C")],
            [("CA", "CB", 1), ("CB", "CG", 1), ("CG", "CD1", 2), ("CD1", "NE1", 1),
             ("NE1", "CE2", 1), ("CE2", "CD2", 2), ("CD2", "CG", 1), ("CE2", "CZ2", 1),
             ("CZ2", "CH2", 2), ("CH2", "CZ3", 1), ("CZ3", "CE3", 2), ("CE3", "CD2", 1)]),
    "HIS": ([("CB", "C"), ("CG", "C"), ("ND1", "N"), ("CD2", "C"), ("CE1", "C"),
             ("NE2", "N")],
            [("CA", "CB", 1), ("CB", "CG", 1), ("CG", "ND1", 1), ("ND1", "CE1", 2),
             ("CE1", "NE2", 1), ("NE2", "CD2", 1), ("CD2", "CG", 2)]),
    "ASP": ([("CB", "C"), ("CG", "C"), ("OD1", "O"), ("OD2", "O")],
            [("CA", "CB", 1), ("CB", "CG", 1), ("CG", "OD1", 2), ("CG", "OD2", 1)]),
    "GLU": ([("CB", "C"), ("CG", "C"), ("CD", "C"), ("OE1", "O"), ("OE2", "O")],
            [("CA", "CB", 1), ("CB", "CG", 1), ("CG", "CD", 1), ("CD", "OE1", 2),
             ("CD", "OE2", 1)]),
    "ASN": ([("CB", "C"), ("CG", "C"), ("OD1", "O"), ("ND2", "N")],
            [("CA", "CB", 1), ("CB", "CG", 1), ("CG", "OD1", 2), ("CG", "ND2", 1)]),
    "GLN": ([("CB", "C"), ("CG", "C"), ("CD", "C"), ("OE1", "O"), ("NE2", "N")],
            [("CA", "CB", 1), ("CB", "CG", 1), ("CG", "CD", 1), ("CD", "OE1", 2),
             ("CD", "NE2", 1)]),
    "LYS": ([("CB", "C"), ("CG", "C"), ("CD", "C"), ("CE", "C"), ("NZ", "N")],
            [("CA", "CB", 1), ("CB", "CG", 1), ("CG", "CD", 1), ("CD", "CE", 1),
             ("CE", "NZ", 1)]),
    "ARG": ([("CB", "C"), ("CG", "C"), ("CD", "C"), ("NE", "N"), ("CZ", "C"),
             ("NH1", "N"), ("NH2", "N")],
            [("CA", "CB", 1), ("CB", "CG", 1), ("CG", "CD", 1), ("CD", "NE", 1),
             ("NE", "CZ", 1), ("CZ", "NH1", 2), ("CZ", "NH2", 1)]),
}

THREE_TO_ONE = {
    "ALA": "A", "ARG": "R", "ASN": "N", "ASP": "D", "CYS": "C", "GLN": "Q", "GLU": "E",
    "GLY": "G", "HIS": "H", "ILE": "I", "LEU": "L", "LYS": "K", "MET": "M", "PHE": "F",
    "PRO": "P", "SER": "S", "THR": "T", "TRP": "W", "TYR": "Y", "VAL": "V",
}
ONE_TO_THREE = {v: k for k, v in THREE_TO_ONE.items()}
AMINO_ACIDS = tuple(sorted(THREE_TO_ONE))

CHI_ANGLES = {
    "ARG": [("N", "CA", "CB", "CG"), ("CA", "CB", "CG", "CD"), ("CB", "CG", "CD", "NE"),
            ("CG", "CD", "NE", "CZ")],
    "ASN": [("N", "CA", "CB", "CG"), ("CA", "CB", "CG", "OD1")],
    "ASP": [("N", "CA", "CB", "CG"), ("CA", "CB", "CG", "OD1")],
    "CYS": [("N", "CA", "CB", "SG")],
    "GLN": [("N", "CA", "CB", "CG"), ("CA", "CB", "CG", "CD"), ("CB", "CG", "CD", "OE1")],
    "GLU": [("N", "CA", "CB", "CG"), ("CA", "CB", "CG", "CD"), ("CB", "CG", "CD", "OE1")],
    "HIS": [("N", "CA", "CB", "CG"), ("CA", "CB", "CG", "ND1")],
    "ILE": [("N", "CA", "CB", "CG1"), ("CA", "CB", "CG1", "CD1")],
    "LEU": [("N", "CA", "CB", "CG"), ("CA", "CB", "CG", "CD1")],
    "LYS": [("N", "CA", "CB", "CG"), ("CA", "CB", "CG", "CD"), ("CB", "CG", "CD", "CE"),
            ("CG", "CD", "CE", "NZ")],
    "MET": [("N", "CA", "CB", "CG"), ("CA", "CB", "CG", "SD"), ("CB", "CG", "SD", "CE")],
    "PHE": [("N", "CA", "CB", "CG"), ("CA", "CB", "CG", "CD1")],
    "PRO": [("N", "CA", "CB", "CG"), ("CA", "CB", "CG", "CD")],
    "SER": [("N", "CA", "CB", "OG")],
    "THR": [("N", "CA", "CB", "OG1")],
    "TRP": [("N", "CA", "CB", "CG"), ("CA", "CB", "CG", "CD1")],
    "TYR": [("N", "CA", "CB", "CG"), ("CA", "CB", "CG", "CD1")],
    "VAL": [("N", "CA", "CB", "CG1")],
}


class ResidueTemplate:
    __slots__ = ("name", "atom_names", "elements", "bonds")

    def __init__(self, name, atoms, bonds):
        self.name = name
        self.atom_names = tuple(a for a, _ in atoms)
        self.elements = tuple(e for _, e in atoms)
        index = {a: k for k, a in enumerate(self.atom_names)}
        self.bonds = tuple(tuple(sorted((index[p], index[q]))) + (o,) for p, q, o in bonds)

    def __len__(self):
        return len(self.atom_names)


TEMPLATES = {
    name: ResidueTemplate(name, _BACKBONE + side, _BACKBONE_BONDS + sbonds)
    for name, (side, sbonds) in _SIDECHAINS.items()
}


def is_standard(resname: str) -> bool:
    return resname in TEMPLATES

"""Element tables: allowed symbols, maximum valency, van der Waals radii."""

# Heavy atoms first; H is accepted on input but dropped at ingestion.
ELEMENTS = ("C", "N", "O", "F", "P", "S", "Cl", "Br", "I", "B", "Si", "Se", "H")
ELEMENT_INDEX = {e: i for i, e in enumerate(ELEMENTS)}

# neutral-molecule maxima
VALENCY = {
    "C": 4, "N": 3, "O": 2, "F": 1, "P": 5, "S": 6, "Cl": 1,
    "Br": 1, "I": 1, "B": 3, "Si": 4, "Se": 2, "H": 1,
}

VDW_RADII = {
    "C": 1.70, "N": 1.55, "O": 1.52, "F": 1.47, "P": 1.80, "S": 1.80, "Cl": 1.75,
    "Br": 1.85, "I": 1.98, "B": 1.92, "Si": 2.10, "Se": 1.90, "H": 1.10,
}

# element types tracked by the substructure metrics
METRIC_ELEMENTS = ("C", "N", "O", "F", "P", "S", "Cl")


def normalize_symbol(symbol: str) -> str:
    """Map 'CL', 'cl', ' C' and friends onto the canonical capitalization."""
    s = symbol.strip()
    if not s:
        raise ValueError("empty element symbol")
    s = s[0].upper() + s[1:].lower()
    if s not in ELEMENT_INDEX:
        raise ValueError(f"unknown element {symbol!r}")
    return s

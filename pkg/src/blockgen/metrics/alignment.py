"""Global sequence alignment and amino-acid recovery."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..kernels import nw_affine

ALPHABET = "ARNDCQEGHILKMFPSTWYV"

_BLOSUM62_ROWS = """
 4 -1 -2 -2  0 -1 -1  0 -2 -1 -1 -1 -1 -2 -1  1  0 -3 -2  0
-1  5  0 -2 -3  1  0 -2  0 -3 -2  2 -1 -3 -2 -1 -1 -3 -2 -3
-2  0  6  1 -3  0  0  0  1 -3 -3  0 -2 -3 -2  1  0 -4 -2 -3
-2 -2  1  6 -3  0  2 -1 -1 -3 -4 -1 -3 -3 -1  0 -1 -4 -3 -3
 0 -3 -3 -3  9 -3 -4 -3 -3 -1 -1 -3 -1 -2 -3 -1 -1 -2 -2 -1
-1  1  0  0 -3  5  2 -2  0 -3 -2  1  0 -3 -1  0 -1 -2 -1 -2
-1  0  0  2 -4  2  5 -2  0 -3 -3  1 -2 -3 -1  0 -1 -3 -2 -2
 0 -2  0 -1 -3 -2 -2  6 -2 -4 -4 -2 -3 -3 -2  0 -2 -2 -3 -3
-2  0  1 -1 -3  0  0 -2  8 -3 -3 -1 -2 -1 -2 -1 -2 -2  2 -3
-1 -3 -3 -3 -1 -3 -3 -4 -3  4  2 -3  1  0 -3 -2 -1 -3 -1  3
-1 -2 -3 -4 -1 -2 -3 -4 -3  2  4 -2  2  0 -3 -2 -1 -2 -1  1
-1  2  0 -1 -3  1  1 -2 -1 -3 -2  5 -1 -3 -1  0 -1 -3 -2 -2
-1 -1 -2 -3 -1  0 -2 -3 -2  1  2 -1  5  0 -2 -1 -1 -1 -1  1
-2 -3 -3 -3 -2 -3 -3 -3 -1  0  0 -3  0  6 -4 -2 -2  1  3 -1
-1 -2 -2 -1 -3 -1 -1 -2 -2 -3 -3 -1 -2 -4  7 -1 -1 -4 -3 -2
 1 -1  1  0 -1  0  0  0 -1 -2 -2  0 -1 -2 -1  4  1 -3 -2 -2
 0 -1  0 -1 -1 -1 -1 -2 -2 -1 -1 -1 -1 -2 -1  1  5 -2 -2  0
-3 -3 -4 -4 -2 -2 -3 -2 -2 -3 -2 -3 -1  1 -4 -3 -2 11  2 -3
-2 -2 -2 -3 -2 -1 -2 -3  2 -1 -1 -2 -1  3 -3 -2 -2  2  7 -1
 0 -3 -3 -3 -1 -2 -2 -3 -3  3  1 -2  1 -1 -2 -2  0 -3 -1  4
"""

BLOSUM62 = np.array([[int(x) for x in row.split()] for row in _BLOSUM62_ROWS.strip().splitlines()],
                    dtype=float)
_CODE = {a: k for k, a in enumerate(ALPHABET)}


@dataclass(frozen=True)
class AlignmentParams:
    gap_open: float = -10.0
    gap_extend: float = -0.5

    def __post_init__(self):
        if self.gap_open > 0 or self.gap_extend > 0:
            raise ValueError("gap penalties must be <= 0")


DEFAULT_PARAMS = AlignmentParams()


def encode(seq: str) -> np.ndarray:
    try:
        return np.array([_CODE[c] for c in seq.upper()], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"non-standard residue letter {exc.args[0]!r}") from None


def align(a: str, b: str, params: AlignmentParams = DEFAULT_PARAMS) -> tuple[float, int]:
    """Needleman-Wunsch score and number of identical aligned positions."""
    if not a or not b:
        return (params.gap_open + (max(len(a), len(b)) - 1) * params.gap_extend
                if a or b else 0.0), 0
    return nw_affine(encode(a), encode(b), BLOSUM62, params.gap_open, params.gap_extend)


def aar(generated: str, reference: str, params: AlignmentParams = DEFAULT_PARAMS) -> float:
    """Identities of the optimal global alignment divided by the reference length."""
    if not reference:
        raise ValueError("empty reference sequence")
    return align(generated, reference, params)[1] / len(reference)


def sequence_identity(a: str, b: str, params: AlignmentParams = DEFAULT_PARAMS) -> float:
    if not a and not b:
        return 1.0
    return align(a, b, params)[1] / max(len(a), len(b))

"""Block vocabulary: standard amino acids plus mined principal subgraphs."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from ..elements import ELEMENT_INDEX
from ..errors import FormatError
from ..structures import MolGraph
from .canon import canonical_smiles
from .residues import AMINO_ACIDS, TEMPLATES

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class VocabEntry:
    key: str
    atom_names: tuple[str, ...]
    elements: tuple[str, ...]
    bonds: tuple[tuple[int, int, int], ...]
    frequency: int
    is_amino_acid: bool = False

    def __len__(self) -> int:
        return len(self.elements)


def _fragment_entry(key: str, elements, bonds, frequency: int) -> VocabEntry:
    names = tuple(f"{el}{k}" for k, el in enumerate(elements))
    return VocabEntry(key, names, tuple(elements), tuple(bonds), frequency)


def entry_from_graph(elements, bonds, frequency: int) -> VocabEntry:
    """Vocabulary entry for a fragment graph, with atoms put in canonical order."""
    key, order = canonical_smiles(elements, bonds)
    pos = {a: k for k, a in enumerate(order)}
    canon_bonds = sorted((min(pos[p], pos[q]), max(pos[p], pos[q]), o) for p, q, o in bonds)
    return _fragment_entry(key, [elements[a] for a in order], canon_bonds, frequency)


def amino_acid_entries() -> list[VocabEntry]:
    return [VocabEntry(name, TEMPLATES[name].atom_names, TEMPLATES[name].elements,
                       TEMPLATES[name].bonds, 0, True)
            for name in AMINO_ACIDS]


class Vocabulary:
    """Ordered, immutable set of block types.

    Amino acids occupy ids ``0..19``; fragments follow in creation order.
    """

    def __init__(self, fragments: list[VocabEntry], include_amino_acids: bool = True):
        entries = (amino_acid_entries() if include_amino_acids else []) + list(fragments)
        self._entries = tuple(entries)
        self._index = {e.key: k for k, e in enumerate(entries)}
        if len(self._index) != len(entries):
            raise ValueError("duplicate vocabulary keys")

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key) -> bool:
        return key in self._index

    def __getitem__(self, key) -> VocabEntry:
        if isinstance(key, int):
            return self._entries[key]
        return self._entries[self._index[key]]

    def __iter__(self):
        return iter(self._entries)

    @property
    def size(self) -> int:
        return len(self._entries)

    def id_of(self, key: str) -> int:
        return self._index[key]

    @property
    def amino_acid_ids(self) -> list[int]:
        return [k for k, e in enumerate(self._entries) if e.is_amino_acid]

    @property
    def fragments(self) -> list[VocabEntry]:
        return [e for e in self._entries if not e.is_amino_acid]

    def fragment_frequency(self, key: str) -> int | None:
        k = self._index.get(key)
        if k is None or self._entries[k].is_amino_acid:
            return None
        return self._entries[k].frequency

    @property
    def max_block_atoms(self) -> int:
        return max(len(e) for e in self._entries)

    # --- text format: KEY \t FREQUENCY \t ATOMS \t BONDS ---
    def to_text(self) -> str:
        lines = []
        for e in self._entries:
            atoms = ",".join(f"{n}:{el}" for n, el in zip(e.atom_names, e.elements))
            bonds = ",".join(f"{p}-{q}-{o}" for p, q, o in e.bonds)
            lines.append(f"{e.key}\t{e.frequency}\t{atoms}\t{bonds}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        return cls.from_text(Path(path).read_text(encoding="utf-8"), str(path))

    @classmethod
    def from_text(cls, text: str, path: str = "<vocab>") -> "Vocabulary":
        fragments, has_aa = [], False
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split("\t")
            where = f"{path}:{lineno}"
            if len(parts) != 4:
                raise FormatError(where, "expected 4 tab-separated fields")
            key, freq, atoms, bonds = parts
            try:
                names, elements = zip(*(a.split(":") for a in atoms.split(","))) if atoms else ((), ())
                bond_list = tuple(tuple(int(x) for x in b.split("-")) for b in bonds.split(",")) if bonds else ()
                freq = int(freq)
            except ValueError as exc:
                raise FormatError(where, str(exc)) from None
            if key in TEMPLATES:
                has_aa = True
                continue
            fragments.append(VocabEntry(key, tuple(names), tuple(elements), bond_list, freq))
        return cls(fragments, include_amino_acids=has_aa or not fragments)


# --------------------------------------------------------------------------
# fragment bookkeeping shared by extraction and decomposition
# --------------------------------------------------------------------------
class FragmentState:
    """Partition of one molecule's atoms into connected fragments."""

    def __init__(self, mol: MolGraph):
        self.mol = mol
        self.adj = mol.adjacency()
        self.owner = list(range(len(mol)))
        self.frags: dict[int, frozenset[int]] = {k: frozenset([k]) for k in range(len(mol))}
        self._key_cache: dict[frozenset, tuple[str, list[int]]] = {}

    def canonical(self, atoms: frozenset) -> tuple[str, list[int]]:
        hit = self._key_cache.get(atoms)
        if hit is None:
            local = sorted(atoms)
            pos = {a: k for k, a in enumerate(local)}
            bonds = [(pos[p], pos[q], o) for p in local for q, o in self.adj[p].items()
                     if q in pos and p < q]
            key, order = canonical_smiles([self.mol.elements[a] for a in local], bonds)
            hit = (key, [local[k] for k in order])
            self._key_cache[atoms] = hit
        return hit

    def ordered_fragments(self) -> list[frozenset[int]]:
        return sorted(self.frags.values(), key=min)

    def adjacent_pairs(self) -> list[tuple[frozenset, frozenset]]:
        """Adjacent fragment pairs ordered by (block index i, block index j)."""
        frags = self.ordered_fragments()
        index = {min(f): k for k, f in enumerate(frags)}
        pairs = set()
        for p, q, _ in self.mol.bonds:
            a, b = self.owner[p], self.owner[q]
            if a != b:
                ia, ib = index[a], index[b]
                pairs.add((min(ia, ib), max(ia, ib)))
        return [(frags[i], frags[j]) for i, j in sorted(pairs)]

    def merge(self, fa: frozenset, fb: frozenset) -> None:
        union = fa | fb
        root = min(union)
        del self.frags[min(fa)]
        del self.frags[min(fb)]
        self.frags[root] = union
        for a in union:
            self.owner[a] = root


def extract_vocabulary(corpus: list[MolGraph], target_size: int) -> Vocabulary:
    """Mine principal subgraphs by repeatedly adding the most frequent adjacent union.

    Single-atom fragments are seeded with their corpus-wide atom counts.  Each
    round counts every adjacent fragment pair's union key over the corpus, adds
    the most frequent key (ties: smallest key) with that count as its
    frequency, and merges its non-overlapping occurrences in every molecule.
    """
    if not corpus:
        raise ValueError("empty corpus")
    atom_counts = Counter(el for mol in corpus for el in mol.elements)
    if target_size < len(atom_counts):
        raise ValueError(f"target_size {target_size} below the number of element "
                         f"types present ({len(atom_counts)})")
    entries = [_fragment_entry(el, (el,), (), n)
               for el, n in sorted(atom_counts.items(), key=lambda kv: ELEMENT_INDEX[kv[0]])]
    states = [FragmentState(mol) for mol in corpus]
    known = {e.key for e in entries}

    while len(entries) < target_size:
        counts: Counter = Counter()
        example = {}
        for st in states:
            for fa, fb in st.adjacent_pairs():
                key, order = st.canonical(fa | fb)
                counts[key] += 1
                example.setdefault(key, (st, order))
        counts = Counter({k: v for k, v in counts.items() if k not in known})
        if not counts:
            log.warning("no further merges possible; vocabulary stops at %d fragments", len(entries))
            break
        best = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        st, order = example[best]
        pos = {a: k for k, a in enumerate(order)}
        bonds = sorted((pos[p], pos[q], o) for p in order for q, o in st.adj[p].items()
                       if q in pos and pos[p] < pos[q])
        entries.append(_fragment_entry(best, [st.mol.elements[a] for a in order], bonds,
                                       counts[best]))
        known.add(best)
        for st in states:
            used: set = set()
            for fa, fb in st.adjacent_pairs():
                if min(fa) in used or min(fb) in used:
                    continue
                if st.canonical(fa | fb)[0] == best:
                    used.update((min(fa), min(fb)))
                    st.merge(fa, fb)
    return Vocabulary(entries)


"""Canonical kekulized SMILES for heavy-atom graphs, and a matching parser.

Canonical labels come from iterative neighbourhood refinement of atom
invariants (Morgan style).  Remaining ties are broken by individualizing each
member of the first tied class in turn and refining again; every discrete
labelling reached this way is written out as a DFS SMILES and the
lexicographically smallest string wins.  Taking the minimum over all
individualization branches is what makes the key independent of the input
atom order.
"""

from __future__ import annotations

import re
from functools import lru_cache

from ..elements import normalize_symbol

_BOND_SYMBOL = {1: "", 2: "=", 3: "#"}
_ORGANIC = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"}


def _dense_rank(keys: list) -> list[int]:
    order = sorted(set(keys))
    lookup = {k: r for r, k in enumerate(order)}
    return [lookup[k] for k in keys]


def _refine(ranks: list[int], adj: list[dict[int, int]]) -> list[int]:
    n_classes = len(set(ranks))
    while True:
        sig = [(ranks[i], tuple(sorted((o, ranks[j]) for j, o in adj[i].items())))
               for i in range(len(ranks))]
        new = _dense_rank(sig)
        k = len(set(new))
        if k == n_classes:
            return new
        ranks, n_classes = new, k


def _smiles_from_ranks(elements, adj, ranks) -> tuple[str, list[int]]:
    n = len(elements)
    visited = [False] * n
    parent = [-1] * n
    children: list[list[int]] = [[] for _ in range(n)]
    visit_order: list[int] = []
    pos = [0] * n
    ring_open: list[list[int]] = [[] for _ in range(n)]   # partners closing later
    ring_close: list[list[int]] = [[] for _ in range(n)]  # partners opened earlier
    roots = []

    for root in sorted(range(n), key=lambda a: ranks[a]):
        if visited[root]:
            continue
        roots.append(root)
        stack = [(root, -1)]
        while stack:
            a, par = stack.pop()
            if visited[a]:
                continue
            visited[a] = True
            parent[a] = par
            pos[a] = len(visit_order)
            visit_order.append(a)
            if par >= 0:
                children[par].append(a)
            nbrs = sorted(adj[a], key=lambda b: ranks[b], reverse=True)
            for b in nbrs:
                if not visited[b]:
                    stack.append((b, a))

    for a in range(n):
        for b in adj[a]:
            if a < b and parent[a] != b and parent[b] != a:
                first, last = (a, b) if pos[a] < pos[b] else (b, a)
                ring_open[first].append(last)
                ring_close[last].append(first)

    digits: dict[tuple[int, int], int] = {}
    free: list[int] = []
    next_digit = [1]

    def take_digit() -> int:
        if free:
            free.sort()
            return free.pop(0)
        d = next_digit[0]
        next_digit[0] += 1
        return d

    def fmt(d: int) -> str:
        return str(d) if d < 10 else f"%{d}"

    def emit(a: int, out: list[str]) -> None:
        el = elements[a]
        out.append(el if el in _ORGANIC else f"[{el}]")
        released = []
        for b in sorted(ring_close[a], key=lambda x: pos[x]):
            d = digits.pop((b, a))
            out.append(fmt(d))
            released.append(d)
        for b in sorted(ring_open[a], key=lambda x: pos[x]):
            d = take_digit()
            digits[(a, b)] = d
            out.append(_BOND_SYMBOL[adj[a][b]] + fmt(d))
        free.extend(released)
        kids = children[a]
        for k, c in enumerate(kids):
            piece = [_BOND_SYMBOL[adj[a][c]]]
            emit(c, piece)
            if k < len(kids) - 1:
                out.append("(" + "".join(piece) + ")")
            else:
                out.extend(piece)

    parts = []
    for root in roots:
        out: list[str] = []
        emit(root, out)
        parts.append("".join(out))
    return ".".join(parts), visit_order


def _canonical(elements: tuple, bonds: tuple) -> tuple[str, tuple[int, ...]]:
    n = len(elements)
    if n == 0:
        return "", ()
    adj: list[dict[int, int]] = [dict() for _ in range(n)]
    for p, q, o in bonds:
        adj[p][q] = o
        adj[q][p] = o
    init = [(elements[i], len(adj[i]), sum(adj[i].values())) for i in range(n)]
    ranks = _refine(_dense_rank(init), adj)

    best: list = [None, None]

    def search(r: list[int]) -> None:
        counts: dict[int, int] = {}
        for x in r:
            counts[x] = counts.get(x, 0) + 1
        tied = [x for x, c in counts.items() if c > 1]
        if not tied:
            s, order = _smiles_from_ranks(elements, adj, r)
            if best[0] is None or s < best[0]:
                best[0], best[1] = s, order
            return
        cell = min(tied)
        members = [i for i in range(n) if r[i] == cell]
        seen_children = set()
        for a in members:
            child = [2 * x + (1 if (x == cell and i != a) else 0) for i, x in enumerate(r)]
            child = _refine(_dense_rank(child), adj)
            key = tuple(child)
            if key in seen_children:
                continue
            seen_children.add(key)
            search(child)

    search(ranks)
    return best[0], tuple(best[1])


@lru_cache(maxsize=200_000)
def _canonical_cached(elements: tuple, bonds: tuple):
    return _canonical(elements, bonds)


def canonical_smiles(elements, bonds) -> tuple[str, list[int]]:
    """Canonical key of a heavy-atom graph and the canonical atom order.

    ``order[k]`` is the input index of the k-th atom in the canonical string.
    """
    bonds = tuple(sorted((min(p, q), max(p, q), o) for p, q, o in bonds))
    key, order = _canonical_cached(tuple(elements), bonds)
    return key, list(order)


def canonical_key(elements, bonds) -> str:
    return canonical_smiles(elements, bonds)[0]


_TOKEN = re.compile(r"Cl|Br|\[[^\]]+\]|[BCNOPSFI]|[bcnops]|%\d\d|\d|[=#\-()\.]")


def parse_smiles(smiles: str) -> tuple[list[str], list[tuple[int, int, int]]]:
    """Parse a kekulized SMILES (organic subset plus bracket elements).

    Hydrogen counts, charges and stereo marks inside brackets are ignored;
    explicit [H] atoms are dropped.  Aromatic lowercase atoms are rejected
    because keys are defined on kekulized graphs.
    """
    elements: list[str] = []
    bonds: list[tuple[int, int, int]] = []
    stack: list[int] = []
    prev = -1
    pending = 1
    rings: dict[int, tuple[int, int]] = {}
    pos = 0
    for m in _TOKEN.finditer(smiles):
        if m.start() != pos:
            raise ValueError(f"unparseable SMILES near {smiles[pos:]!r}")
        pos = m.end()
        tok = m.group()
        if tok in ("=", "#", "-"):
            pending = {"=": 2, "#": 3, "-": 1}[tok]
        elif tok == "(":
            stack.append(prev)
        elif tok == ")":
            prev = stack.pop()
        elif tok == ".":
            prev = -1
        elif tok[0] == "%" or tok.isdigit():
            d = int(tok.lstrip("%"))
            if d in rings:
                other, order = rings.pop(d)
                bonds.append((other, prev, max(order, pending)))
            else:
                rings[d] = (prev, pending)
            pending = 1
        elif tok.islower():
            raise ValueError("aromatic SMILES are not supported; kekulize first")
        else:
            sym = tok[1:-1] if tok.startswith("[") else tok
            sym = re.match(r"\d*([A-Z][a-z]?)", sym).group(1)
            if sym == "H":
                continue
            elements.append(normalize_symbol(sym))
            idx = len(elements) - 1
            if prev >= 0:
                bonds.append((prev, idx, pending))
            prev = idx
            pending = 1
    if pos != len(smiles) or rings or stack:
        raise ValueError(f"malformed SMILES {smiles!r}")
    return elements, bonds

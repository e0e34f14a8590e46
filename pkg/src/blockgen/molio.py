"""File formats: complex JSON, minimal PDB ingestion, checkpoints, config files.

Complex JSON is written canonically (sorted keys, compact separators,
coordinates with exactly four decimals) so that a load/save round trip is
byte-stable and datasets can be hashed.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import struct
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .blockrepr.residues import TEMPLATES
from .elements import ELEMENT_INDEX, normalize_symbol
from .errors import (ChecksumError, ConfigError, FormatError, IncompatibleCheckpointError,
                     IntegrityError, NotFoundError)
from .structures import Atom, Block, BlockGraph, ComplexRecord

log = logging.getLogger(__name__)

__all__ = [
    "complex_from_dict", "complex_to_dict", "dumps_canonical", "load_checkpoint",
    "load_complex", "load_pdb_protein", "read_config_file", "save_checkpoint", "save_complex",
]


# ---------------------------------------------------------------------------
# Complex JSON
# ---------------------------------------------------------------------------
def _expect(cond: bool, path: str, msg: str) -> None:
    if not cond:
        raise FormatError(path, msg)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _parse_entity(obj, path: str) -> BlockGraph:
    _expect(isinstance(obj, dict), path, "entity must be an object")
    _expect(set(obj) == {"blocks", "inter_bonds"}, path,
            f"entity keys must be blocks, inter_bonds (got {sorted(obj)})")
    blocks_raw = obj["blocks"]
    _expect(isinstance(blocks_raw, list), f"{path}.blocks", "must be a list")
    blocks = []
    for bi, b in enumerate(blocks_raw):
        bp = f"{path}.blocks[{bi}]"
        _expect(isinstance(b, dict), bp, "block must be an object")
        _expect(set(b) == {"block_type", "prompt", "atoms", "intra_bonds"}, bp,
                f"unexpected block keys {sorted(b)}")
        _expect(b["block_type"] is None or isinstance(b["block_type"], str),
                f"{bp}.block_type", "must be a string or null")
        _expect(b["prompt"] in (0, 1) and _is_int(b["prompt"]), f"{bp}.prompt", "must be 0 or 1")
        _expect(isinstance(b["atoms"], list), f"{bp}.atoms", "must be a list")
        atoms = []
        for ai, a in enumerate(b["atoms"]):
            ap = f"{bp}.atoms[{ai}]"
            _expect(isinstance(a, dict) and set(a) == {"element", "name", "coord"}, ap,
                    "atom must have exactly element, name, coord")
            _expect(isinstance(a["element"], str) and a["element"] in ELEMENT_INDEX,
                    f"{ap}.element", f"unknown element {a['element']!r}")
            _expect(isinstance(a["name"], str), f"{ap}.name", "must be a string")
            c = a["coord"]
            _expect(isinstance(c, list) and len(c) == 3 and all(
                isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)
                for x in c), f"{ap}.coord", "must be 3 finite numbers")
            atoms.append(Atom(a["element"], a["name"], tuple(float(x) for x in c)))
        _expect(isinstance(b["intra_bonds"], list), f"{bp}.intra_bonds", "must be a list")
        bonds = []
        for k, bond in enumerate(b["intra_bonds"]):
            kp = f"{bp}.intra_bonds[{k}]"
            _expect(isinstance(bond, list) and len(bond) == 3 and all(_is_int(x) for x in bond),
                    kp, "intra bond must be [p, q, order]")
            _expect(bond[2] in (1, 2, 3), kp, f"bond order {bond[2]} not in {{1,2,3}}")
            bonds.append(tuple(bond))
        blocks.append(Block(b["block_type"], atoms, bonds, b["prompt"]))
    inter = []
    _expect(isinstance(obj["inter_bonds"], list), f"{path}.inter_bonds", "must be a list")
    for k, bond in enumerate(obj["inter_bonds"]):
        kp = f"{path}.inter_bonds[{k}]"
        _expect(isinstance(bond, list) and len(bond) == 5 and all(_is_int(x) for x in bond),
                kp, "inter bond must be [i, p, j, q, order]")
        _expect(bond[4] in (1, 2, 3), kp, f"bond order {bond[4]} not in {{1,2,3}}")
        inter.append(tuple(bond))
    graph = BlockGraph(blocks, inter)
    try:
        graph.validate()
    except IntegrityError as exc:
        raise IntegrityError(f"{path}: {exc}") from None
    return graph


def complex_from_dict(obj: Any, where: str = "$") -> ComplexRecord:
    _expect(isinstance(obj, dict), where, "top level must be an object")
    _expect(set(obj) == {"id", "binder", "target", "metadata"}, where,
            f"top-level keys must be id, binder, target, metadata (got {sorted(obj)})")
    _expect(isinstance(obj["id"], str), f"{where}.id", "must be a string")
    meta = obj["metadata"]
    _expect(isinstance(meta, dict) and all(isinstance(k, str) and isinstance(v, str)
                                           for k, v in meta.items()),
            f"{where}.metadata", "must map strings to strings")
    binder = None if obj["binder"] is None else _parse_entity(obj["binder"], f"{where}.binder")
    target = _parse_entity(obj["target"], f"{where}.target")
    return ComplexRecord(obj["id"], binder, target, dict(meta))


def _entity_to_dict(g: BlockGraph) -> dict:
    return {
        "blocks": [{
            "block_type": b.block_type,
            "prompt": int(b.prompt),
            "atoms": [{"element": a.element, "name": a.name, "coord": _Coord(a.coord)}
                      for a in b.atoms],
            "intra_bonds": [list(x) for x in b.intra_bonds],
        } for b in g.blocks],
        "inter_bonds": [list(x) for x in g.inter_bonds],
    }


def complex_to_dict(rec: ComplexRecord) -> dict:
    return {
        "id": rec.id,
        "binder": None if rec.binder is None else _entity_to_dict(rec.binder),
        "target": _entity_to_dict(rec.target),
        "metadata": dict(rec.metadata),
    }


class _Coord(tuple):
    """Marker so the canonical writer knows to use fixed four-decimal floats."""


def _fmt_coord(x: float) -> str:
    s = f"{x:.4f}"
    return "0.0000" if s == "-0.0000" else s


def dumps_canonical(obj) -> str:
    if isinstance(obj, _Coord):
        return "[" + ",".join(_fmt_coord(x) for x in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(k)}:{dumps_canonical(obj[k])}"
                              for k in sorted(obj)) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dumps_canonical(x) for x in obj) + "]"
    if isinstance(obj, float):
        return repr(obj)
    return json.dumps(obj)


def save_complex(rec: ComplexRecord, path) -> None:
    Path(path).write_text(dumps_canonical(complex_to_dict(rec)) + "\n", encoding="utf-8")


def load_complex(path) -> ComplexRecord:
    p = Path(path)
    if not p.is_file():
        raise NotFoundError(f"no such complex file: {p}")
    try:
        obj = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(str(p), f"invalid JSON ({exc})") from None
    return complex_from_dict(obj, where=str(p))


# ---------------------------------------------------------------------------
# PDB (ATOM records only)
# ---------------------------------------------------------------------------
def load_pdb_protein(path, chains: list[str]) -> BlockGraph:
    """One block per standard residue of the requested chains, heavy atoms only.

    Unknown residue names are skipped (recorded in ``metadata['skipped_residues']``);
    residues missing template atoms are kept and listed in
    ``metadata['incomplete_blocks']``.  Consecutive residues whose C and N lie
    within 2.0 Å are joined by a peptide bond.
    """
    p = Path(path)
    if not p.is_file():
        raise NotFoundError(f"no such PDB file: {p}")
    residues: dict[tuple, dict] = {}
    order: list[tuple] = []
    for line in p.read_text().splitlines():
        if not line.startswith("ATOM"):
            continue
        altloc = line[16]
        if altloc not in (" ", "A"):
            continue
        chain = line[21]
        if chain not in chains:
            continue
        name = line[12:16].strip()
        resname = line[17:20].strip()
        key = (chain, line[22:26].strip(), line[26].strip())
        elem_field = line[76:78].strip() if len(line) >= 78 else ""
        try:
            element = normalize_symbol(elem_field or name.lstrip("0123456789")[0])
        except ValueError:
            continue
        if element == "H":
            continue
        coord = (float(line[30:38]), float(line[38:46]), float(line[46:54]))
        if key not in residues:
            residues[key] = {"resname": resname, "atoms": {}}
            order.append(key)
        residues[key]["atoms"].setdefault(name, (element, coord))

    found = {k[0] for k in order}
    missing = [c for c in chains if c not in found]
    if missing:
        raise NotFoundError(f"chain(s) {','.join(missing)} not found in {p}")

    blocks: list[Block] = []
    block_keys: list[tuple] = []
    skipped, incomplete = [], []
    for key in order:
        res = residues[key]
        tmpl = TEMPLATES.get(res["resname"])
        if tmpl is None:
            skipped.append(f"{key[0]}:{key[1]}{key[2]}:{res['resname']}")
            log.warning("skipping non-standard residue %s %s%s %s", *key, res["resname"])
            continue
        present = [k for k, n in enumerate(tmpl.atom_names) if n in res["atoms"]]
        local = {k: i for i, k in enumerate(present)}
        atoms = [Atom(tmpl.elements[k], tmpl.atom_names[k], res["atoms"][tmpl.atom_names[k]][1])
                 for k in present]
        bonds = [(local[a], local[b], o) for a, b, o in tmpl.bonds if a in local and b in local]
        if len(present) != len(tmpl):
            incomplete.append(str(len(blocks)))
        blocks.append(Block(res["resname"], atoms, bonds))
        block_keys.append(key)

    inter = []
    for i in range(len(blocks) - 1):
        if block_keys[i][0] != block_keys[i + 1][0]:
            continue
        c, n = blocks[i].atom_index("C"), blocks[i + 1].atom_index("N")
        if c is None or n is None:
            continue
        d = np.linalg.norm(np.subtract(blocks[i].atoms[c].coord, blocks[i + 1].atoms[n].coord))
        if d < 2.0:
            inter.append((i, c, i + 1, n, 1))
    meta = {}
    if skipped:
        meta["skipped_residues"] = ",".join(skipped)
    if incomplete:
        meta["incomplete_blocks"] = ",".join(incomplete)
    return BlockGraph(blocks, inter, meta)


# ---------------------------------------------------------------------------
# Checkpoints: magic | u32 version | u32 count | entries | u64 checksum
# entry: u32 name_len | name | u8 dtype | u8 ndim | u64 shape[ndim] | u64 nbytes | data
# ---------------------------------------------------------------------------
MAGIC = b"UNIMOMO1"
FORMAT_VERSION = 1
_DTYPES = {0: np.float32, 1: np.float64, 2: np.int64, 3: np.int32, 4: np.uint8, 5: np.bool_}
_DTYPE_CODES = {np.dtype(v): k for k, v in _DTYPES.items()}
META_KEY = "__meta__"


def _checksum(payload: bytes) -> bytes:
    return hashlib.blake2b(payload, digest_size=8).digest()


def save_checkpoint(tensors: dict[str, np.ndarray], path, meta: Optional[dict] = None) -> None:
    entries = dict(tensors)
    if meta is not None:
        entries[META_KEY] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    out = bytearray(MAGIC)
    out += struct.pack("<II", FORMAT_VERSION, len(entries))
    for name in sorted(entries):
        arr = np.ascontiguousarray(entries[name])
        code = _DTYPE_CODES.get(arr.dtype)
        if code is None:
            raise TypeError(f"unsupported dtype {arr.dtype} for {name}")
        raw = name.encode()
        out += struct.pack("<I", len(raw)) + raw
        out += struct.pack("<BB", code, arr.ndim)
        out += struct.pack(f"<{arr.ndim}Q", *arr.shape)
        data = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
        out += struct.pack("<Q", len(data)) + data
    out += _checksum(bytes(out))
    Path(path).write_bytes(bytes(out))


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    blob = Path(path).read_bytes()
    if len(blob) < 24 or blob[:8] != MAGIC:
        raise IncompatibleCheckpointError(f"{path}: bad magic bytes")
    version, count = struct.unpack_from("<II", blob, 8)
    if version != FORMAT_VERSION:
        raise IncompatibleCheckpointError(
            f"{path}: format version {version}, this build reads {FORMAT_VERSION}")
    if _checksum(blob[:-8]) != blob[-8:]:
        raise ChecksumError(f"{path}: checksum mismatch")
    off = 16
    tensors: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<I", blob, off)
            off += 4
            name = blob[off:off + n].decode()
            off += n
            code, ndim = struct.unpack_from("<BB", blob, off)
            off += 2
            shape = struct.unpack_from(f"<{ndim}Q", blob, off)
            off += 8 * ndim
            (nbytes,) = struct.unpack_from("<Q", blob, off)
            off += 8
            dtype = np.dtype(_DTYPES[code]).newbyteorder("<")
            tensors[name] = np.frombuffer(blob[off:off + nbytes], dtype=dtype).reshape(shape).copy()
            off += nbytes
    except (struct.error, KeyError, ValueError) as exc:
        raise IncompatibleCheckpointError(f"{path}: corrupt entry table ({exc})") from None
    if off != len(blob) - 8:
        raise IncompatibleCheckpointError(f"{path}: trailing bytes after entry table")
    meta = {}
    if META_KEY in tensors:
        meta = json.loads(tensors.pop(META_KEY).tobytes().decode())
    return tensors, meta


# ---------------------------------------------------------------------------
# Config files: "key = value" lines, '#' comments
# ---------------------------------------------------------------------------
def read_config_file(path, allowed: Optional[set[str]] = None) -> dict[str, str]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    out: dict[str, str] = {}
    for lineno, raw in enumerate(p.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{p}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if allowed is not None and key not in allowed:
            raise ConfigError(f"{p}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{p}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out

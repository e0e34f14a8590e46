"""Dataset loading, candidate generation and evaluation used by the CLI."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from .blockrepr import select_binding_site
from .blockrepr.residues import THREE_TO_ONE, TEMPLATES
from .blockrepr.vocab import Vocabulary
from .errors import DataError, NotFoundError
from .ldm.model import Denoiser
from .ldm.schedule import NoiseSchedule
from .ldm.train import sample_ldm
from .metrics import (Candidate, aar, ca_coords, clash_ratios, dihedral_jsd, diversity,
                      geometry_jsd, rmsd)
from .molio import load_complex
from .physcorr import GeomStats, consistency_filter, valency_violations
from .structures import BlockGraph, ComplexRecord
from .vae.decode import DecodeOptions, sample_vae
from .vae.featurize import Entity, featurize
from .vae.model import FullAtomVAE, LatentCloud

log = logging.getLogger(__name__)

RETRY_FACTOR = 5
PROMPT_MODES = {"aa_only": 1, "free": 0}


def complex_files(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise NotFoundError(f"directory not found: {d}")
    # names starting with "_" hold run reports, not complexes
    files = sorted(p for p in d.glob("*.json") if not p.name.startswith("_"))
    if not files:
        raise DataError(f"no complex files (*.json) in {d}")
    return files


def site_of(rec: ComplexRecord, radius: float) -> BlockGraph:
    if rec.binder is None:
        raise DataError(f"{rec.id}: no binder to locate the binding site")
    site = select_binding_site(rec.target, rec.binder, radius)
    if not site.blocks:
        raise DataError(f"{rec.id}: empty binding site at radius {radius}")
    return site


def load_dataset(directory, vocab: Vocabulary, radius: float = 10.0,
                 dtype=torch.float32) -> list[tuple[Entity, Entity]]:
    """(binder, binding site) entity pairs for every complex file in ``directory``."""
    pairs = []
    for path in complex_files(directory):
        rec = load_complex(path)
        site = site_of(rec, radius)
        pairs.append((featurize(rec.binder, vocab, dtype), featurize(site, vocab, dtype)))
    return pairs


def seed_for(seq: np.random.SeedSequence) -> int:
    return int(seq.generate_state(1, dtype=np.uint64)[0] & 0x7FFF_FFFF_FFFF_FFFF)


def torch_generator(seq: np.random.SeedSequence) -> torch.Generator:
    return torch.Generator().manual_seed(seed_for(seq))


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------
@dataclass
class Corrections:
    repulsion: bool = False
    valency: bool = False
    consistency: Optional[GeomStats] = None

    @property
    def any(self) -> bool:
        return self.repulsion or self.valency or self.consistency is not None


@dataclass
class SamplingSetup:
    vae: FullAtomVAE
    vocab: Vocabulary
    denoiser: Denoiser
    schedule: NoiseSchedule
    site: Entity
    prompts: list[int]
    n_iters: int = 10


@dataclass
class SamplingResult:
    accepted: list[tuple[int, BlockGraph]] = field(default_factory=list)
    attempts: int = 0
    rejections: dict[str, int] = field(default_factory=dict)


def make_setup(vae: FullAtomVAE, vocab: Vocabulary, denoiser: Denoiser, schedule: NoiseSchedule,
               rec: ComplexRecord, n_blocks: Optional[int], prompt_mode: str, radius: float,
               n_iters: int = 10) -> SamplingSetup:
    dtype = next(vae.parameters()).dtype
    site = featurize(site_of(rec, radius), vocab, dtype)
    if n_blocks is None:
        n_blocks = len(rec.binder.blocks)
    if n_blocks < 1:
        raise DataError("n_blocks must be >= 1")
    if prompt_mode not in PROMPT_MODES:
        raise DataError(f"unknown prompt mode {prompt_mode!r}")
    prompts = [PROMPT_MODES[prompt_mode]] * n_blocks
    return SamplingSetup(vae, vocab, denoiser, schedule, site, prompts, n_iters)


def sample_one(setup: SamplingSetup, corr: Corrections, seq: np.random.SeedSequence
               ) -> tuple[BlockGraph, Optional[str]]:
    """One candidate and the reason it fails the enabled checks (None when it passes)."""
    gen = torch_generator(seq)
    vae = setup.vae
    with torch.no_grad():
        site_lat = vae.encode(setup.site, deterministic=False, generator=gen)
        z, zvec = sample_ldm(site_lat.z, site_lat.zvec, len(setup.prompts), setup.prompts,
                             setup.denoiser, setup.schedule, gen)
        binder_lat = LatentCloud.from_points(z, zvec)
        opts = DecodeOptions(n_iters=setup.n_iters, repulsion=corr.repulsion,
                             resolve_valency=corr.valency)
        graph = sample_vae(vae, setup.vocab, binder_lat, site_lat, setup.site, setup.prompts, opts, gen)
    if corr.valency and valency_violations(graph):
        return graph, "valency"
    if corr.consistency is not None and not consistency_filter(graph, corr.consistency).keep:
        return graph, "consistency"
    return graph, None


def sample_candidates(setup: SamplingSetup, n: int, corr: Corrections, seed: int,
                      retry_factor: int = RETRY_FACTOR, workers: int = 1) -> SamplingResult:
    """Up to ``n`` accepted candidates from at most ``retry_factor * n`` attempts.

    Attempt k always uses the k-th child of the master seed, so the output
    does not depend on the worker count.
    """
    if n < 1:
        raise DataError("n_candidates must be >= 1")
    children = np.random.SeedSequence(seed).spawn(retry_factor * n)
    res = SamplingResult()
    next_k = 0
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        while len(res.accepted) < n and next_k < len(children):
            batch = list(range(next_k, min(len(children), next_k + n - len(res.accepted))))
            next_k = batch[-1] + 1
            for k, (graph, reason) in zip(batch, pool.map(lambda k: sample_one(setup, corr, children[k]), batch)):
                res.attempts += 1
                if reason is None and len(res.accepted) < n:
                    res.accepted.append((k, graph))
                elif reason is not None:
                    res.rejections[reason] = res.rejections.get(reason, 0) + 1
    return res


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------
def sequence_of(graph: BlockGraph) -> str:
    return "".join(THREE_TO_ONE[b.block_type] for b in graph.blocks if b.block_type in TEMPLATES)


def _target_ca(target: BlockGraph) -> np.ndarray:
    return ca_coords(target)[0]


def evaluate_pair(cand: ComplexRecord, ref: ComplexRecord) -> dict[str, float]:
    """Per-complex metrics of one candidate against its reference complex."""
    row = {"aar": math.nan, "c_rmsd": math.nan, "l_rmsd": math.nan}
    gs, rs = sequence_of(cand.binder), sequence_of(ref.binder)
    if gs and rs:
        row["aar"] = aar(gs, rs)
    gx, rx = ca_coords(cand.binder)[0], ca_coords(ref.binder)[0]
    if len(gx) and len(gx) == len(rx):
        gt, rt = _target_ca(cand.target), _target_ca(ref.target)
        same = len(gt) == len(rt) and len(gt) >= 3
        row["c_rmsd"] = rmsd(gx, rx, "complex_aligned", gt if same else None, rt if same else None)
        row["l_rmsd"] = rmsd(gx, rx, "ligand_aligned")
    row["clash_in"], row["clash_out"] = clash_ratios(cand.binder, cand.target)
    row["valency_violations"] = float(len(valency_violations(cand.binder)))
    return row


def evaluate(candidates: list[ComplexRecord], references: dict[str, ComplexRecord],
             stats: Optional[GeomStats] = None) -> tuple[list[dict], dict]:
    """Per-candidate rows and an aggregate report."""
    if not candidates:
        raise DataError("no candidates to evaluate")
    rows = []
    for c in candidates:
        key = c.metadata.get("reference_id", c.id)
        if key not in references:
            raise DataError(f"{c.id}: no reference complex with id {key!r}")
        if c.binder is None:
            raise DataError(f"{c.id}: candidate has no binder")
        row = {"id": c.id, "reference_id": key}
        row.update(evaluate_pair(c, references[key]))
        rows.append(row)
    gen = [c.binder for c in candidates]
    refs = [references[k].binder for k in sorted({r["reference_id"] for r in rows})]
    agg = {k: float(np.nanmean([r[k] for r in rows])) if not all(math.isnan(r[k]) for r in rows) else math.nan
           for k in ("aar", "c_rmsd", "l_rmsd", "clash_in", "clash_out", "valency_violations")}
    agg["n_candidates"] = len(rows)
    agg["jsd_bb"] = dihedral_jsd(gen, refs, "backbone")
    agg["jsd_sc"] = dihedral_jsd(gen, refs, "sidechain")
    if stats is not None:
        agg["jsd_bond_len"], agg["jsd_bond_angle"] = geometry_jsd(gen, stats)
    agg["diversity"] = diversity([Candidate(sequence_of(g), ca_coords(g)[0]) for g in gen])
    return rows, agg

"""Command-line interface: vocabulary, decomposition, training, sampling, evaluation."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from .blockrepr import decompose, decompose_polymer, extract_vocabulary, mol_from_smiles
from .blockrepr.residues import TEMPLATES
from .blockrepr.vocab import Vocabulary
from .checkpoints import load_denoiser, load_vae, save_denoiser, save_vae
from .config import RunConfig, build_config, config_keys
from .errors import BlockgenError, ConfigError, DataError, IncompatibleCheckpointError, NotFoundError
from .ldm.model import Denoiser
from .ldm.schedule import cosine_schedule
from .ldm.train import train_ldm
from .molio import complex_to_dict, dumps_canonical, load_complex, save_complex
from .pipeline import (Corrections, complex_files, evaluate, load_dataset, make_setup,
                       sample_candidates, seed_for)
from .physcorr import GeomStats, fit_geom_stats
from .structures import BlockGraph, ComplexRecord, MolGraph
from .vae.model import FullAtomVAE
from .vae.train import train_vae

log = logging.getLogger("blockgen")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DATA = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# corpus and vocabulary
# ---------------------------------------------------------------------------
def read_corpus(directory) -> list[MolGraph]:
    """Molecules from ``*.smi`` files (first token per line) and binders of ``*.json`` complexes."""
    d = Path(directory)
    if not d.is_dir():
        raise NotFoundError(f"corpus directory not found: {d}")
    mols = []
    for path in sorted(d.iterdir()):
        if path.suffix in (".smi", ".smiles"):
            for line in path.read_text().splitlines():
                tok = line.split()
                if tok and not tok[0].startswith("#"):
                    mols.append(mol_from_smiles(tok[0]))
        elif path.suffix == ".json":
            rec = load_complex(path)
            if rec.binder is not None:
                mols.append(rec.binder.to_mol())
    if not mols:
        raise DataError(f"no molecules found in {d}")
    return mols


def _load_vocab(path) -> Vocabulary:
    if not path:
        raise ConfigError("a vocabulary path is required")
    if not Path(path).is_file():
        raise NotFoundError(f"vocabulary not found: {path}")
    return Vocabulary.load(path)


def cmd_build_vocab(args) -> int:
    vocab = extract_vocabulary(read_corpus(args.corpus_dir), args.size)
    vocab.save(args.out)
    print(f"{len(vocab)} entries ({len(vocab.fragments)} fragments) written to {args.out}")
    return EXIT_OK


def _decompose_graph(graph: BlockGraph, vocab: Vocabulary, ring_prior: bool) -> BlockGraph:
    mol = graph.to_mol()
    if graph.blocks and all(b.block_type in TEMPLATES for b in graph.blocks):
        out = decompose_polymer(mol, vocab)
    else:
        out = decompose(mol, vocab, ring_prior)
    for b in out.blocks:
        b.prompt = graph.blocks[0].prompt if graph.blocks else 0
    return out


def cmd_decompose(args) -> int:
    vocab = _load_vocab(args.vocab)
    path = Path(args.input)
    if not path.is_file():
        raise NotFoundError(f"input not found: {path}")
    if path.suffix in (".smi", ".smiles"):
        tok = path.read_text().split()
        if not tok:
            raise DataError(f"{path}: empty SMILES file")
        graph = decompose(mol_from_smiles(tok[0]), vocab, not args.no_ring_prior)
        rec = ComplexRecord(path.stem, graph, BlockGraph([]), {})
        out = complex_to_dict(rec)
        out["target"] = None
    else:
        rec = load_complex(path)
        if rec.binder is None:
            raise DataError(f"{path}: complex has no binder to decompose")
        rec.binder = _decompose_graph(rec.binder, vocab, not args.no_ring_prior)
        out = complex_to_dict(rec)
    sys.stdout.write(dumps_canonical(out) + "\n")
    return EXIT_OK


def cmd_fit_stats(args) -> int:
    stats = fit_geom_stats(read_corpus(args.corpus_dir))
    stats.to_csv(args.out)
    print(f"geometry statistics written to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------
def _run_config(args) -> RunConfig:
    overrides = {k: v for k, v in vars(args).items() if k in set(config_keys()) and v is not None}
    return build_config(args.config, overrides)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dtype(cfg: RunConfig):
    return getattr(torch, cfg.dtype)


def _seeds(seed: int) -> tuple[int, torch.Generator]:
    """Parameter-init seed and a training-stream generator split from one master seed."""
    init, stream = np.random.SeedSequence(seed).spawn(2)
    return seed_for(init), torch.Generator().manual_seed(seed_for(stream))


def _dataset(cfg: RunConfig, vocab: Vocabulary):
    if not cfg.train_set:
        raise ConfigError("train_set is not configured")
    return load_dataset(cfg.train_set, vocab, cfg.site_radius, _dtype(cfg))


def cmd_train_vae(args) -> int:
    cfg = _run_config(args)
    vocab = _load_vocab(cfg.vocab)
    data = _dataset(cfg, vocab)
    out = _out_dir(cfg)
    init_seed, gen = _seeds(cfg.seed)
    torch.manual_seed(init_seed)
    model = FullAtomVAE(vocab, cfg.vae_model()).to(_dtype(cfg))
    steps = cfg.steps or cfg.epochs * len(data)
    hist = train_vae(model, data, cfg.vae_train(), steps, gen, str(out / "vae_curve.csv"), cfg.log_every)
    save_vae(model, vocab, out / "vae.ckpt", {"run_config": cfg.to_dict()})
    (out / "vae_config.json").write_text(json.dumps(cfg.to_dict(), indent=1, sort_keys=True))
    final = hist[-1]["total"] if hist else math.nan
    print(f"trained autoencoder for {steps} steps, final loss {final:.6g}; checkpoint {out / 'vae.ckpt'}")
    return EXIT_OK


def cmd_train_ldm(args) -> int:
    cfg = _run_config(args)
    if not args.vae_checkpoint:
        raise ConfigError("train-ldm needs --vae-checkpoint")
    vae, vocab, _ = load_vae(args.vae_checkpoint)
    if not cfg.train_set:
        raise ConfigError("train_set is not configured")
    data = load_dataset(cfg.train_set, vocab, cfg.site_radius, next(vae.parameters()).dtype)
    out = _out_dir(cfg)
    init_seed, gen = _seeds(cfg.seed)
    torch.manual_seed(init_seed)
    schedule = cosine_schedule(cfg.diffusion_steps, cfg.schedule_s)
    denoiser = Denoiser(cfg.ldm_net(), vae.cfg.latent_dim, cfg.time_embed,
                        schedule=schedule).to(next(vae.parameters()).dtype)
    steps = cfg.ldm_steps or cfg.epochs * len(data)
    hist = train_ldm(denoiser, vae, data, schedule, steps, cfg.ldm_lr, gen,
                     curve_path=str(out / "ldm_curve.csv"), grad_clip=cfg.grad_clip, log_every=cfg.log_every)
    save_denoiser(denoiser, out / "ldm.ckpt", cfg.diffusion_steps, cfg.schedule_s,
                  {"run_config": cfg.to_dict()})
    final = hist[-1] if hist else math.nan
    print(f"trained denoiser for {steps} steps, final loss {final:.6g}; checkpoint {out / 'ldm.ckpt'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sampling and evaluation
# ---------------------------------------------------------------------------
def cmd_sample(args) -> int:
    vae, vocab, _ = load_vae(args.vae_checkpoint)
    denoiser, dmeta = load_denoiser(args.ldm_checkpoint)
    schedule = cosine_schedule(dmeta["T"], dmeta["s"])
    rec = load_complex(args.target)
    repulsion = args.repulsion or args.corrections
    valency = args.valency or args.corrections
    stats: Optional[GeomStats] = None
    if args.geom_stats:
        stats = GeomStats.from_csv(args.geom_stats)
    elif args.consistency:
        raise ConfigError("--consistency needs --geom-stats")
    corr = Corrections(repulsion, valency, stats if (args.consistency or args.corrections) else None)
    setup = make_setup(vae, vocab, denoiser, schedule, rec, args.n_blocks, args.prompt_mode,
                       args.site_radius, args.n_iters)
    res = sample_candidates(setup, args.n_candidates, corr, args.seed, workers=args.workers)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for k, (attempt, graph) in enumerate(res.accepted):
        cand = ComplexRecord(f"{rec.id}_{k}", graph, rec.target,
                             {"reference_id": rec.id, "attempt": str(attempt), "seed": str(args.seed)})
        save_complex(cand, out / f"{rec.id}_{k}.json")
    report = {"requested": args.n_candidates, "written": len(res.accepted), "attempts": res.attempts,
              "rejections": res.rejections}
    (out / "_sampling_report.json").write_text(json.dumps(report, indent=1, sort_keys=True))
    if len(res.accepted) < args.n_candidates:
        print(f"shortfall: {len(res.accepted)} of {args.n_candidates} candidates after "
              f"{res.attempts} attempts; rejections {res.rejections}", file=sys.stderr)
        return EXIT_FAIL
    print(f"wrote {len(res.accepted)} candidates to {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cands = [load_complex(p) for p in complex_files(args.candidates_dir)]
    refs = {}
    for p in complex_files(args.references_dir):
        r = load_complex(p)
        refs[r.id] = r
    stats = GeomStats.from_csv(args.geom_stats) if args.geom_stats else None
    rows, agg = evaluate(cands, refs, stats)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    text = json.dumps(agg, indent=1, sort_keys=True)
    (out / "report.json").write_text(text)
    print(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------
def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file; flags below override it")
    g = p.add_argument_group("run configuration")
    for key in config_keys():
        g.add_argument("--" + key.replace("_", "-"), dest=key, default=None, metavar="VALUE")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blockgen", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-vocab", help="mine a fragment vocabulary from a corpus directory")
    p.add_argument("corpus_dir")
    p.add_argument("--size", type=int, default=300)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("decompose", help="print the block decomposition of a molecule or complex")
    p.add_argument("input", help="*.smi file or complex JSON")
    p.add_argument("--vocab", required=True)
    p.add_argument("--no-ring-prior", action="store_true")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("fit-stats", help="fit bond length/angle statistics on a corpus")
    p.add_argument("corpus_dir")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_stats)

    p = sub.add_parser("train-vae", help="train the autoencoder")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train_vae)

    p = sub.add_parser("train-ldm", help="train the latent denoiser on a frozen autoencoder")
    _add_config_flags(p)
    p.add_argument("--vae-checkpoint")
    p.set_defaults(func=cmd_train_ldm)

    p = sub.add_parser("sample", help="generate binders for a target complex")
    p.add_argument("target", help="complex JSON; its binder defines the pocket")
    p.add_argument("--vae-checkpoint", required=True)
    p.add_argument("--ldm-checkpoint", required=True)
    p.add_argument("--n-candidates", type=int, default=1)
    p.add_argument("--n-blocks", type=int, default=None, help="defaults to the reference binder size")
    p.add_argument("--prompt-mode", choices=("aa_only", "free"), default="free")
    p.add_argument("--n-iters", type=int, default=10)
    p.add_argument("--site-radius", type=float, default=10.0)
    p.add_argument("--corrections", action="store_true", help="enable every correction")
    p.add_argument("--repulsion", action="store_true")
    p.add_argument("--valency", action="store_true")
    p.add_argument("--consistency", action="store_true")
    p.add_argument("--geom-stats")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("evaluate", help="score candidates against reference complexes")
    p.add_argument("candidates_dir")
    p.add_argument("references_dir")
    p.add_argument("--geom-stats")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_evaluate)
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except IncompatibleCheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BlockgenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

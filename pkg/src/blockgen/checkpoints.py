"""Save and restore trained networks through the binary checkpoint format."""

from __future__ import annotations

import dataclasses
from typing import Optional

import numpy as np
import torch

from .blockrepr.vocab import Vocabulary
from .eqnet import EqNetConfig
from .errors import IncompatibleCheckpointError
from .ldm.model import Denoiser
from .ldm.schedule import cosine_schedule
from .molio import load_checkpoint, save_checkpoint
from .vae.model import FullAtomVAE, VaeConfig


def _tensors(module: torch.nn.Module) -> dict[str, np.ndarray]:
    return {k: v.detach().cpu().numpy().copy() for k, v in module.state_dict().items()}


def _restore(module: torch.nn.Module, tensors: dict[str, np.ndarray], path) -> None:
    state = {k: torch.from_numpy(np.array(v)) for k, v in tensors.items()}
    try:
        module.load_state_dict(state, strict=True)
    except RuntimeError as exc:
        raise IncompatibleCheckpointError(f"{path}: parameters do not match the stored config ({exc})") from None


def _expect_kind(meta: dict, kind: str, path) -> None:
    if meta.get("kind") != kind:
        raise IncompatibleCheckpointError(f"{path}: expected a {kind} checkpoint, found {meta.get('kind')!r}")


def save_vae(model: FullAtomVAE, vocab: Vocabulary, path, extra: Optional[dict] = None) -> None:
    meta = {"kind": "vae", "config": dataclasses.asdict(model.cfg), "vocab": vocab.to_text(),
            "dtype": str(next(model.parameters()).dtype).replace("torch.", "")}
    meta.update(extra or {})
    save_checkpoint(_tensors(model), path, meta)


def load_vae(path) -> tuple[FullAtomVAE, Vocabulary, dict]:
    tensors, meta = load_checkpoint(path)
    _expect_kind(meta, "vae", path)
    c = meta["config"]
    cfg = VaeConfig(c["latent_dim"], EqNetConfig(**c["atom_net"]), EqNetConfig(**c["latent_net"]),
                    c["time_embed"])
    vocab = Vocabulary.from_text(meta["vocab"], f"{path}:vocab")
    model = FullAtomVAE(vocab, cfg).to(getattr(torch, meta.get("dtype", "float32")))
    _restore(model, tensors, path)
    model.eval()
    return model, vocab, meta


def save_denoiser(model: Denoiser, path, schedule_T: int, schedule_s: float,
                  extra: Optional[dict] = None) -> None:
    meta = {"kind": "ldm", "net": dataclasses.asdict(model.net.cfg), "latent_dim": model.latent_dim,
            "time_embed": model.time_dim, "T": schedule_T, "s": schedule_s,
            "skip": model.skip_coef is not None,
            "dtype": str(next(model.parameters()).dtype).replace("torch.", "")}
    meta.update(extra or {})
    save_checkpoint(_tensors(model), path, meta)


def load_denoiser(path) -> tuple[Denoiser, dict]:
    tensors, meta = load_checkpoint(path)
    _expect_kind(meta, "ldm", path)
    schedule = cosine_schedule(meta["T"], meta["s"]) if meta.get("skip") else None
    model = Denoiser(EqNetConfig(**meta["net"]), meta["latent_dim"], meta["time_embed"], schedule=schedule)
    model = model.to(getattr(torch, meta.get("dtype", "float32")))
    _restore(model, tensors, path)
    model.eval()
    return model, meta

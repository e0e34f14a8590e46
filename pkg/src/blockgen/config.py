"""Run configuration shared by the command-line entry points."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from typing import Any, Optional

from .eqnet import EqNetConfig
from .errors import ConfigError
from .molio import read_config_file
from .vae.model import VaeConfig
from .vae.train import VaeTrainConfig


@dataclass
class RunConfig:
    # autoencoder objective and optimizer
    lambda1: float = 0.6
    lambda2: float = 0.8
    lambda_dist: float = 0.5
    mask_ratio: float = 0.05
    n_iters: int = 10
    teacher_force_interbond_p: float = 0.5
    dist_loss_tmax: float = 0.25
    dist_neighbor_radius: float = 6.0
    bond_candidate_radius: float = 3.5
    lr: float = 1e-4
    warmup: int = 2000
    epochs: int = 250
    latent_noise_scale: float = 1.0
    grad_clip: float = 1.0
    cosine_decay: bool = False
    # network shape
    latent_dim: int = 8
    hidden_size: int = 512
    n_layers: int = 6
    n_heads: int = 8
    n_rbf: int = 64
    edge_embed_size: int = 64
    n_vec: int = 16
    k_neighbors: int = 16
    vae_cutoff: float = 10.0
    ldm_cutoff: float = 3.0
    time_embed: int = 32
    # diffusion
    diffusion_steps: int = 100
    schedule_s: float = 0.008
    ldm_lr: float = 1e-4
    ldm_steps: int = 0
    # data and run plumbing
    train_set: str = ""
    vocab: str = ""
    out_dir: str = "runs"
    site_radius: float = 10.0
    steps: int = 0
    seed: int = 0
    device: str = "cpu"
    dtype: str = "float32"
    log_every: int = 100

    def __post_init__(self):
        if self.device != "cpu":
            raise ConfigError(f"device {self.device!r} is not supported; only cpu")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")
        for name in ("diffusion_steps", "site_radius", "ldm_lr"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.steps < 0 or self.ldm_steps < 0:
            raise ConfigError("step counts must be >= 0")
        try:
            self.vae_train()
            self.vae_model()
            self.ldm_net()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    # -- views ----------------------------------------------------------------
    def net(self, cutoff: float) -> EqNetConfig:
        return EqNetConfig(hidden_size=self.hidden_size, n_layers=self.n_layers, n_heads=self.n_heads,
                           n_rbf=self.n_rbf, cutoff=cutoff, edge_embed_size=self.edge_embed_size,
                           n_vec=self.n_vec, k_neighbors=self.k_neighbors)

    def vae_model(self) -> VaeConfig:
        return VaeConfig(self.latent_dim, self.net(self.vae_cutoff), self.net(self.vae_cutoff),
                         self.time_embed)

    def ldm_net(self) -> EqNetConfig:
        return self.net(self.ldm_cutoff)

    def vae_train(self) -> VaeTrainConfig:
        names = {f.name for f in fields(VaeTrainConfig)}
        return VaeTrainConfig(**{k: getattr(self, k) for k in names})

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in fields(RunConfig)}
_BOOLS = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def _coerce(name: str, raw: str):
    kind = _FIELDS[name].type
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            if raw.strip().lower() not in _BOOLS:
                raise ValueError
            return _BOOLS[raw.strip().lower()]
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind}") from None
    return raw


def build_config(path: Optional[str] = None, overrides: Optional[dict[str, str]] = None) -> RunConfig:
    """Defaults, then the ``key = value`` file, then explicit overrides."""
    values: dict[str, Any] = {}
    if path is not None:
        for k, v in read_config_file(path, allowed=set(_FIELDS)).items():
            values[k] = _coerce(k, v)
    for k, v in (overrides or {}).items():
        if k not in _FIELDS:
            raise ConfigError(f"unknown config key {k!r}")
        values[k] = _coerce(k, v) if isinstance(v, str) else v
    return RunConfig(**values)


def config_keys() -> list[str]:
    return list(_FIELDS)


def field_type(name: str) -> str:
    return _FIELDS[name].type

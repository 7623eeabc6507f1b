"""Run configuration: defaults, ``key = value`` config files and flag overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .dataset import SyntheticSpec
from .training import TrainConfig

__all__ = ["ConfigError", "RunConfig", "parse_config_file", "parse_p_grid", "resolve"]

SYNTHETIC_KEYS = (
    "num_users",
    "num_items",
    "latent_dim",
    "popularity_exponent",
    "popularity_mix",
    "interactions_per_user",
    "test_items_per_user",
    "affinity_temperature",
)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # training
    loss: str = "ssm"
    dim: int = 64
    layers: int = 3
    lr: float = 1e-3
    batch_size: int = 4096
    epochs: int = 300
    min_epoch: int = 50
    patience: int = 5
    eval_every: int = 5
    temperature: float = 0.1
    l2: float | None = None
    seed: int = 0
    # evaluation
    p: float = 1.0
    k: int = 20
    groups: int = 5
    p_grid: str = "0:1:0.1"
    popular_fraction: float = 0.2
    threads: int = 1
    # data
    train_file: str | None = None
    test_file: str | None = None
    validation_fraction: float = 0.5
    # synthetic data
    num_users: int = 2000
    num_items: int = 1000
    latent_dim: int = 16
    popularity_exponent: float = 1.0
    popularity_mix: float = 0.5
    interactions_per_user: int = 40
    test_items_per_user: int = 5
    affinity_temperature: float = 0.1
    # io
    out: str | None = None
    embeddings: str | None = None

    explicit: frozenset = frozenset()  # keys set by a config file or flag

    def uses_files(self) -> bool:
        return self.train_file is not None or self.test_file is not None

    def check_data_source(self):
        """Exactly one of dataset files or synthetic parameters."""
        synthetic = [k for k in SYNTHETIC_KEYS if k in self.explicit]
        if self.uses_files():
            if self.train_file is None or self.test_file is None:
                raise ConfigError("--train-file and --test-file must be given together")
            if synthetic:
                raise ConfigError(f"dataset files and synthetic parameters ({', '.join(synthetic)}) are exclusive")
        if self.k < 1:
            raise ConfigError("k must be >= 1")

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            loss_kind=self.loss, learning_rate=self.lr, batch_size=self.batch_size, max_epochs=self.epochs,
            early_stop_min_epoch=self.min_epoch, patience=self.patience, eval_every=self.eval_every,
            temperature=self.temperature, l2_coeff=self.l2, num_layers=self.layers, dim=self.dim,
            seed=self.seed, p=self.p, k=self.k,
        )

    def synthetic_spec(self) -> SyntheticSpec:
        kwargs = {k: getattr(self, k) for k in SYNTHETIC_KEYS}
        return SyntheticSpec(seed=self.seed, num_groups=self.groups, **kwargs)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            if f.name == "explicit":
                continue
            value = getattr(self, f.name)
            if value is not None:
                lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


_FIELDS = {f.name: f for f in fields(RunConfig) if f.name != "explicit"}


def _convert(key: str, raw: str):
    default = RunConfig.__dataclass_fields__[key].default
    kind = RunConfig.__annotations__[key]
    if raw.lower() in ("none", "") and "None" in str(kind):
        return None
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes")
    if "int" in str(kind):
        return int(raw)
    if "float" in str(kind):
        return float(raw)
    return raw


def normalize_key(key: str) -> str:
    return key.strip().lstrip("-").replace("-", "_")


def parse_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = line.split("=", 1)
        key = normalize_key(key)
        if key not in _FIELDS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _convert(key, raw.strip())
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {raw.strip()!r}") from None
    return out


def resolve(flags: dict, config_path=None) -> RunConfig:
    """Merge documented defaults < config file < command-line flags (``None`` = unset)."""
    values = parse_config_file(config_path) if config_path else {}
    for key, value in flags.items():
        if value is not None:
            values[normalize_key(key)] = value
    unknown = set(values) - set(_FIELDS)
    if unknown:
        raise ConfigError(f"unknown settings: {sorted(unknown)}")
    return dataclasses.replace(RunConfig(), explicit=frozenset(values), **values)


def parse_p_grid(text: str) -> list:
    """``start:stop:step`` with both ends included, e.g. ``0:1:0.5`` -> [0.0, 0.5, 1.0]."""
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise ConfigError(f"p grid must be start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise ConfigError(f"invalid p grid {text!r}")
    n = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 10) for i in range(n) if start + i * step <= stop + 1e-9]

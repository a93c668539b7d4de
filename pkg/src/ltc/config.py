"""One flat config file with per-module sections; flags override it.

INI syntax via configparser. Unknown keys fail loudly so typos do not
silently fall back to defaults.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .losses import LossConfig
from .training import EncoderConfig, TrainConfig

_KNOWN = {
    "run": {"seed"},
    "dataset": {"samples", "parses", "variant", "granularity", "folds"},
    "encoder": {"vocab_size", "dim", "n_layers", "n_heads", "max_len", "dropout", "chunk"},
    "loss": {"lambda", "tau", "normalize", "average"},
    "train": {"lr", "weight_decay", "epochs", "batch_size", "ablation", "verb_tags"},
    "refine": {"style", "retries"},
    "geocoder": {"cache", "min_interval"},
    "analytics": {"year_min", "year_max", "bin_width", "home_country", "top_types",
                  "group_width", "min_distance_km"},
}


class ConfigError(ValueError):
    pass


def read_config(path) -> configparser.ConfigParser:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    cp = configparser.ConfigParser()
    cp.read(path, encoding="utf-8")
    for section in cp.sections():
        if section not in _KNOWN:
            raise ConfigError(f"unknown config section [{section}]")
        unknown = set(cp[section]) - _KNOWN[section]
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {', '.join(sorted(unknown))}")
    return cp


def train_config_from(cp: configparser.ConfigParser, **overrides) -> TrainConfig:
    run = cp["run"] if cp.has_section("run") else {}
    ds = cp["dataset"] if cp.has_section("dataset") else {}
    enc = cp["encoder"] if cp.has_section("encoder") else {}
    loss = cp["loss"] if cp.has_section("loss") else {}
    tr = cp["train"] if cp.has_section("train") else {}

    def get(section, key, cast, default):
        if key in section:
            raw = section[key]
            return raw.lower() in ("1", "true", "yes") if cast is bool else cast(raw)
        return default

    cfg = TrainConfig(
        seed=get(run, "seed", int, 7),
        folds=get(ds, "folds", int, 10),
        epochs=get(tr, "epochs", int, 10),
        batch_size=get(tr, "batch_size", int, 32),
        lr=get(tr, "lr", float, 1e-5),
        weight_decay=get(tr, "weight_decay", float, 0.01),
        loss=LossConfig(
            blend=get(loss, "lambda", float, 0.7),
            tau=get(loss, "tau", float, 0.1),
            normalize=get(loss, "normalize", bool, False),
            average=get(loss, "average", str, "anchor"),
        ),
        encoder=EncoderConfig(
            vocab_size=get(enc, "vocab_size", int, 4096),
            dim=get(enc, "dim", int, 32),
            n_layers=get(enc, "n_layers", int, 2),
            n_heads=get(enc, "n_heads", int, 4),
            max_len=get(enc, "max_len", int, 128),
            dropout=get(enc, "dropout", float, 0.1),
            chunk=get(enc, "chunk", int, 4),
        ),
        dataset_variant=get(ds, "variant", str, "regular"),
        granularity=get(ds, "granularity", str, "type"),
        ablation=get(tr, "ablation", str, "none"),
        verb_tags=tuple(get(tr, "verb_tags", str, "VERB").split(",")),
    )
    if overrides:
        import dataclasses
        cfg = dataclasses.replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    return cfg


def data_paths_from(cp: configparser.ConfigParser) -> tuple[str | None, str | None]:
    if not cp.has_section("dataset"):
        return None, None
    return cp["dataset"].get("samples"), cp["dataset"].get("parses")

"""Run configuration: an INI-style key/value file validated against a fixed
schema, with the published hyperparameter defaults."""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass

from .denoiser import DenoiserConfig
from .ordering import OrderingConfig
from .training import TrainConfig


class ConfigError(ValueError):
    pass


_BOOL = {"on": True, "true": True, "1": True, "yes": True,
         "off": False, "false": False, "0": False, "no": False}

# section -> key -> (type tag, default); None default means required
_SCHEMA = {
    "run": {"seed": ("int", None)},
    "model": {
        "node_types": ("int", None),
        "edge_types": ("int", None),
        "aggregator": ("str", "gat"),
        "layers": ("int", 7),
        "hidden": ("int", 128),
        "mlp_hidden": ("int", 256),
        "mixtures": ("int", 20),
        "edge_in_attention": ("bool", True),
        "ordering_layers": ("int", 3),
        "ordering_heads": ("int", 6),
        "ordering_hidden": ("int", 32),
        "ordering_embed": ("int", 16),
        "ordering_pe": ("int", 16),
    },
    "train": {
        "epochs": ("int", 10),
        "batch_size": ("int", 8),
        "val_batch_size": ("int", 8),
        "trajectories": ("int", 4),
        "timesteps": ("int", 4),
        "lr_denoiser": ("float", 1e-4),
        "lr_ordering": ("float", 5e-4),
        "soft_label_top_k": ("int", 1),
        "baseline": ("bool", True),
        "baseline_decay": ("float", 0.9),
        "uniform_ordering": ("bool", False),
        "eval_every": ("int", 0),
        "select_samples": ("int", 0),
        "val_fraction": ("float", 0.2),
    },
    "paths": {
        "corpus": ("in_path", ""),
        "val_corpus": ("in_path", ""),
        "checkpoint_dir": ("out_dir", ""),
        "log": ("out_path", ""),
        "report": ("out_path", ""),
    },
}


@dataclass
class RunConfig:
    seed: int
    model: dict
    train: dict
    paths: dict

    @classmethod
    def load(cls, path) -> "RunConfig":
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser()
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        values: dict[str, dict] = {}
        for section in parser.sections():
            if section not in _SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
        for section, keys in _SCHEMA.items():
            got = dict(parser[section]) if parser.has_section(section) else {}
            for key in got:
                if key not in keys:
                    raise ConfigError(f"unknown key '{key}' in [{section}]")
            out = {}
            for key, (kind, default) in keys.items():
                if key in got:
                    out[key] = _parse(section, key, kind, got[key])
                elif default is None:
                    raise ConfigError(f"missing required key '{key}' in [{section}]")
                else:
                    out[key] = default
            values[section] = out
        paths = values["paths"]
        for key, (kind, _) in _SCHEMA["paths"].items():
            if kind == "in_path" and paths[key] and not os.path.exists(paths[key]):
                raise ConfigError(f"path for '{key}' does not exist: {paths[key]}")
        return cls(seed=values["run"]["seed"], model=values["model"],
                   train=values["train"], paths=paths)

    def ordering_config(self) -> OrderingConfig:
        m = self.model
        return OrderingConfig(num_node_types=m["node_types"],
                              layers=m["ordering_layers"],
                              heads=m["ordering_heads"],
                              hidden=m["ordering_hidden"],
                              embed_dim=m["ordering_embed"],
                              pe_dim=m["ordering_pe"])

    def denoiser_config(self) -> DenoiserConfig:
        m = self.model
        return DenoiserConfig(num_node_types=m["node_types"],
                              num_edge_types=m["edge_types"],
                              aggregator=m["aggregator"],
                              layers=m["layers"], hidden=m["hidden"],
                              mlp_hidden=m["mlp_hidden"],
                              mixtures=m["mixtures"],
                              edge_in_attention=m["edge_in_attention"])

    def train_config(self) -> TrainConfig:
        t = {k: v for k, v in self.train.items() if k != "val_fraction"}
        return TrainConfig(seed=self.seed, **t)


def _parse(section, key, kind, raw):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            if raw.lower() not in _BOOL:
                raise ValueError(f"not a boolean: {raw!r}")
            return _BOOL[raw.lower()]
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for '{key}' in [{section}]: {exc}") from None

"""Flat key=value run configuration with three-layer precedence.

Defaults (below) < config file < command-line flags. Unknown keys are
rejected, and every run writes a resolved echo file that can replay it.
"""

from __future__ import annotations

from typing import Dict, Optional

from .evalkit import SplitSpec
from .fusion import TrainConfig
from .metamae import MaskSpec
from .structenc import WalkConfig


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected a boolean, got '{text}'")


# key -> (converter, default)
SCHEMA = {
    "walks_per_node": (int, 10),
    "walk_length": (int, 20),
    "window": (int, 5),
    "negatives": (int, 5),
    "struct_dim": (int, 64),
    "struct_epochs": (int, 5),
    "struct_lr": (float, 0.025),
    "struct_lr_min": (float, 0.0001),
    "neg_distribution": (str, "uniform"),
    "sample_size": (int, 128),
    "unified_dim": (int, 64),
    "edge_mask_rate": (float, 0.5),
    "resample_mask": (_bool, True),
    "gamma": (float, 2.0),
    "lambda_align": (float, 1.0),
    "lambda_recon": (float, 1.0),
    "lambda_scatter": (float, 0.1),
    "epochs": (int, 400),
    "learning_rate": (float, 1e-3),
    "optimizer": (str, "adam"),
    "seed": (int, 0),
    "threads": (int, 1),
    "per_class_train": (int, 60),
    "val_size": (int, 1000),
    "test_size": (int, 1000),
    "repeats": (int, 50),
    "kshot_repeats": (int, 20),
    "no_cse": (_bool, False),
    "no_align": (_bool, False),
    "no_scatter": (_bool, False),
}


def defaults() -> Dict[str, object]:
    return {k: v for k, (_, v) in SCHEMA.items()}


def parse_config_file(path: str) -> Dict[str, object]:
    out: Dict[str, object] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in SCHEMA:
                raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
            conv = SCHEMA[key][0]
            try:
                out[key] = conv(value)
            except ConfigError:
                raise
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: bad value for '{key}': '{value}'")
    return out


def resolve(file_values: Optional[Dict[str, object]] = None,
            flag_values: Optional[Dict[str, object]] = None) -> Dict[str, object]:
    cfg = defaults()
    cfg.update(file_values or {})
    cfg.update({k: v for k, v in (flag_values or {}).items() if v is not None})
    return cfg


def write_echo(cfg: Dict[str, object], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(cfg):
            fh.write(f"{key} = {cfg[key]}\n")


def to_train_config(cfg: Dict[str, object]) -> TrainConfig:
    return TrainConfig(
        lambda_align=cfg["lambda_align"],
        lambda_recon=cfg["lambda_recon"],
        lambda_scatter=cfg["lambda_scatter"],
        epochs=cfg["epochs"],
        learning_rate=cfg["learning_rate"],
        optimizer=cfg["optimizer"],
        seed=cfg["seed"],
        no_cse=cfg["no_cse"],
        no_align=cfg["no_align"],
        no_scatter=cfg["no_scatter"],
        sample_size=cfg["sample_size"],
        unified_dim=cfg["unified_dim"],
        gamma=cfg["gamma"],
        walk=WalkConfig(
            walks_per_node=cfg["walks_per_node"],
            walk_length=cfg["walk_length"],
            window=cfg["window"],
            negatives=cfg["negatives"],
            dim=cfg["struct_dim"],
            epochs=cfg["struct_epochs"],
            lr=cfg["struct_lr"],
            lr_min=cfg["struct_lr_min"],
            neg_distribution=cfg["neg_distribution"],
        ),
        mask=MaskSpec(
            edge_mask_rate=cfg["edge_mask_rate"],
            resample_per_epoch=cfg["resample_mask"],
        ),
    )


def to_split_spec(cfg: Dict[str, object], shots: int = 0) -> SplitSpec:
    if shots:
        return SplitSpec.kshot(shots, repeats=cfg["kshot_repeats"],
                               seed=cfg["seed"])
    return SplitSpec(
        per_class_train=cfg["per_class_train"],
        val_size=cfg["val_size"],
        test_size=cfg["test_size"],
        repeats=cfg["repeats"],
        seed=cfg["seed"],
    )

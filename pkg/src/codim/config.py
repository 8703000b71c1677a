"""Flat ``key = value`` run configuration files.

Section-less, ``#`` comments, every key has a documented default, unknown
keys are a hard error so typos never pass silently.
"""

from __future__ import annotations

import os

from .contrastive import AugmentSpec
from .data import BlobSpec, Dataset, RingSpec, gen_blobs, gen_rings
from .errors import ConfigError
from .mixmatch import SslHyper
from .noise import NoiseSpec, adjacent_pair_map
from .trainers import TrainConfig


def _bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(*options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {options}, got {text!r}")
        return text
    return parse


# key -> (parser, default)
SCHEMA: dict[str, tuple] = {
    # dataset
    "dataset": (_choice("blobs", "rings"), "blobs"),
    "num_classes": (int, 4),
    "dim": (int, 2),
    "samples_per_class": (int, 750),
    "class_separation": (float, 3.0),
    "intra_std": (float, 1.0),
    "data_seed": (int, 0),
    # noise
    "noise_kind": (_choice("none", "symmetric", "asymmetric"), "symmetric"),
    "noise_ratio": (float, 0.4),
    "noise_seed": (int, 1),
    "redraw_over_all": (_bool, True),
    # augmentation
    "weak_jitter_sigma": (float, 0.1),
    "strong_jitter_sigma": (float, 0.3),
    "mask_prob": (float, 0.15),
    "scale_lo": (float, 0.9),
    "scale_hi": (float, 1.1),
    # semi-supervised hyperparameters
    "lambda_u": (float, 25.0),
    "lambda_r": (float, 1.0),
    "sharpen_t": (float, 0.5),
    "mixup_alpha": (float, 4.0),
    "num_augs": (int, 2),
    "warmup_ramp_epochs": (int, 16),
    "unlabeled_loss": (_choice("l2", "ce"), "l2"),
    # training
    "pretrain_steps": (int, 500),
    "warmup_epochs": (int, 5),
    "epochs": (int, 30),
    "iters_per_epoch": (int, 30),
    "batch_size": (int, 64),
    "lr": (float, 0.05),
    "lr_drop_epoch": (int, -1),
    "lr_drop_factor": (float, 10.0),
    "momentum": (float, 0.9),
    "weight_decay": (float, 5e-4),
    "lambda_cl": (float, 1.0),
    "lambda_sup": (float, 1.0),
    "lambda_self": (float, 1.0),
    "tau1": (float, 0.5),
    "tau2": (float, 0.5),
    "tau3": (float, 0.07),
    "mode": (_choice("bare", "cssl", "self", "sup", "ce", "dividemix"), "sup"),
    "gmm_threshold": (float, 0.5),
    "label_correction": (_bool, False),
    "label_correction_epochs": (int, 50),
    "label_correction_lr": (float, 0.05),
    "feat_hidden": (str, "64,64"),
    "proj_hidden": (int, 64),
    "proj_dim": (int, 16),
    "seed": (int, 0),
    # run
    "labeled_ratio": (float, 0.2),
    "out_dir": (str, "runs/default"),
}


def parse_config_text(text: str) -> dict:
    values = {key: default for key, (_, default) in SCHEMA.items()}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        parser = SCHEMA[key][0]
        try:
            values[key] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    return values


def load_config(path) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def resolved_config_text(values: dict) -> str:
    return "\n".join(f"{key} = {values[key]}" for key in SCHEMA) + "\n"


def make_dataset(values: dict) -> Dataset:
    if values["dataset"] == "blobs":
        ds = gen_blobs(BlobSpec(num_classes=values["num_classes"],
                                dim=values["dim"],
                                samples_per_class=values["samples_per_class"],
                                class_separation=values["class_separation"],
                                intra_std=values["intra_std"],
                                seed=values["data_seed"]))
    else:
        ds = gen_rings(RingSpec(num_classes=values["num_classes"],
                                samples_per_class=values["samples_per_class"],
                                seed=values["data_seed"]))
    if values["noise_kind"] != "none" and values["noise_ratio"] > 0:
        class_map = (adjacent_pair_map(ds.num_classes)
                     if values["noise_kind"] == "asymmetric" else None)
        ds = ds.with_noise(NoiseSpec(kind=values["noise_kind"],
                                     ratio=values["noise_ratio"],
                                     seed=values["noise_seed"],
                                     class_map=class_map,
                                     redraw_over_all=values["redraw_over_all"]))
    return ds


def make_train_config(values: dict, mode: str | None = None) -> TrainConfig:
    mode = mode if mode is not None else values["mode"]
    pretrain_steps = values["pretrain_steps"]
    if mode == "dividemix":  # bare phase-2 without pre-training
        mode, pretrain_steps = "bare", 0
    if mode == "ce":
        mode = "bare"  # mode is unused by the CE baseline trainer
    try:
        feat_hidden = tuple(int(s) for s in values["feat_hidden"].split(","))
    except ValueError as exc:
        raise ConfigError(f"bad feat_hidden {values['feat_hidden']!r}") from exc
    return TrainConfig(
        pretrain_steps=pretrain_steps,
        warmup_epochs=values["warmup_epochs"],
        epochs=values["epochs"],
        iters_per_epoch=values["iters_per_epoch"],
        batch_size=values["batch_size"],
        lr=values["lr"],
        lr_drop_epoch=values["lr_drop_epoch"],
        lr_drop_factor=values["lr_drop_factor"],
        momentum=values["momentum"],
        weight_decay=values["weight_decay"],
        lambda_cl=values["lambda_cl"],
        lambda_sup=values["lambda_sup"],
        lambda_self=values["lambda_self"],
        tau1=values["tau1"], tau2=values["tau2"], tau3=values["tau3"],
        mode=mode,
        ssl=SslHyper(lambda_u=values["lambda_u"], lambda_r=values["lambda_r"],
                     sharpen_t=values["sharpen_t"],
                     mixup_alpha=values["mixup_alpha"],
                     num_augs=values["num_augs"],
                     warmup_ramp_epochs=values["warmup_ramp_epochs"],
                     unlabeled_loss=values["unlabeled_loss"]),
        aug=AugmentSpec(weak_jitter_sigma=values["weak_jitter_sigma"],
                        strong_jitter_sigma=values["strong_jitter_sigma"],
                        mask_prob=values["mask_prob"],
                        scale_range=(values["scale_lo"], values["scale_hi"])),
        gmm_threshold=values["gmm_threshold"],
        label_correction=values["label_correction"],
        label_correction_epochs=values["label_correction_epochs"],
        label_correction_lr=values["label_correction_lr"],
        feat_hidden=feat_hidden,
        proj_hidden=values["proj_hidden"],
        proj_dim=values["proj_dim"],
        seed=values["seed"],
    )

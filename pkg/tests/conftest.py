"""Shared fixtures: the desk-scale datasets and trained models used by the
acceptance suite.  Training runs once per session and dominates the suite's
runtime (~an hour for 5 seeds x 3 condition modes)."""

import numpy as np
import pytest

from scenediff.gpnet import HyperParams
from scenediff.synthdata import GenConfig, default_split, generate_dataset
from scenediff.training import TrainConfig, train

DESK_SEEDS = (0, 1, 2, 3, 4)

DESK_GEN = GenConfig(n_points=256, max_objects=2)


def desk_hyperparams(**overrides):
    base = dict(learning_rate=3e-3)
    base.update(overrides)
    return HyperParams.desk(**base)


def desk_train_config(mode: str, seed: int, **overrides) -> TrainConfig:
    base = dict(hyperparams=desk_hyperparams(), epochs=200, seed=seed,
                ablation=mode, warmup_epochs=5, lr_decay="cosine")
    base.update(overrides)
    return TrainConfig(**base)


@pytest.fixture(scope="session")
def desk_split():
    train_seeds, test_seeds = default_split(180, 20)
    return (generate_dataset(train_seeds, DESK_GEN),
            generate_dataset(test_seeds, DESK_GEN))


@pytest.fixture(scope="session")
def trained_models(desk_split):
    """{mode: {seed: (model, log)}} for the acceptance orderings."""
    data, _ = desk_split
    out = {}
    for mode in ("full", "no_v", "no_F"):
        out[mode] = {}
        for seed in DESK_SEEDS:
            cfg = desk_train_config(mode, seed)
            out[mode][seed] = train(data, cfg)
    return out

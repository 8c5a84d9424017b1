"""Reproducible end-to-end runs: desk-scale clustered dataset and model training."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import warnings
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .generators import DESK, DrawingDataset, clustered_preset, split_dataset
from .layouts import Canvas, PmdsConfig, layout_pivotmds
from .model import ModelConfig, init_params
from .train import TrainConfig, checkpoint_load, checkpoint_save, evaluate_split, fit

log = logging.getLogger(__name__)

DESK_SEED = 2024
DESK_HIDDEN = 64
DESK_TRAIN = TrainConfig(batch=16, max_epochs=30, patience=20)


def desk_models(hidden: int = DESK_HIDDEN) -> dict[str, ModelConfig]:
    """Graph-LSTM and 4-layer baseline at a CPU-friendly hidden size."""
    return {"graph_lstm": ModelConfig("graph_lstm", hidden, 35, 1),
            "baseline": ModelConfig("baseline", hidden, 35, 4)}


def cache_path(mcfg: ModelConfig, tcfg: TrainConfig, cache_dir, data_seed: int = DESK_SEED) -> Path:
    return Path(cache_dir) / f"{mcfg.kind}-{run_key(mcfg, tcfg, data_seed)}.zip"


def desk_dataset(seed: int = DESK_SEED, sizes: dict | None = None) -> DrawingDataset:
    """Clustered graphs with PivotMDS ground truth split 2000/250/250."""
    sizes = sizes or DESK["general"]
    counts = (sizes["train"], sizes["val"], sizes["test"])
    graphs = clustered_preset(sum(counts), seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ds = split_dataset(graphs, seed=seed, counts=counts)
    canvas = Canvas()
    for e in ds.entries:
        e.layout = layout_pivotmds(e.graph, PmdsConfig(), canvas)
    ds.style = "pivotmds"
    return ds


def run_key(mcfg: ModelConfig, tcfg: TrainConfig, data_seed: int) -> str:
    blob = json.dumps({"model": asdict(mcfg), "train": asdict(tcfg), "data": data_seed}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def trained_params(ds: DrawingDataset, mcfg: ModelConfig, tcfg: TrainConfig, cache_dir=None,
                   data_seed: int = DESK_SEED):
    """Train on ``ds`` or reuse a checkpoint cached under the same configuration key."""
    path = None
    if cache_dir is not None:
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
        path = cache_path(mcfg, tcfg, cache_dir, data_seed)
        if path.exists():
            log.info("using cached checkpoint %s", path)
            return checkpoint_load(path).params
    res = fit(ds.split("train"), ds.split("val"), mcfg, tcfg,
              log_path=None if path is None else path.with_suffix(".jsonl"))
    if path is not None:
        tmp = path.with_suffix(".tmp")
        checkpoint_save(tmp, res.params, mcfg, tcfg, res.state, res.epochs, res.best_val)
        os.replace(tmp, path)
    return res.params


def compare_models(ds: DrawingDataset, configs: dict[str, ModelConfig], tcfg: TrainConfig, cache_dir=None):
    """Test-set Procrustes means for each trained model and its untrained initialisation."""
    test = ds.split("test")
    out = {}
    for name, mcfg in configs.items():
        params = trained_params(ds, mcfg, tcfg, cache_dir)
        out[name] = evaluate_split(test, params, mcfg)[0]
        out[name + "_untrained"] = evaluate_split(test, init_params(mcfg, tcfg.seed), mcfg)[0]
    return out

"""Adam training loop, evaluation and checkpoints."""

from __future__ import annotations

import io
import json
import logging
import time
import zipfile
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .autodiff import Tape
from .graph import Graph, NodeSequence, bfs_order, encode_adjacency_vectors, skip_predecessors
from .model import BASELINE, ModelConfig, init_params, model_forward
from .procrustes import DegenerateLayoutError, _parts, procrustes_loss, procrustes_statistic

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "lstmlayout-checkpoint"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.0015
    batch: int = 128
    max_epochs: int = 350
    patience: int = 20
    seed: int = 0
    k: int = 35
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    augment: bool = True

    def __post_init__(self):
        if self.lr < 0 or self.batch < 1 or self.max_epochs < 0 or self.patience < 1 or self.k < 1:
            raise ValueError(f"invalid training configuration: {self}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise ValueError("Adam betas must lie in [0, 1) and eps must be > 0")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    skipped: int = 0

    @classmethod
    def zeros(cls, params: Mapping[str, np.ndarray]) -> "AdamState":
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params: dict[str, np.ndarray], grads: Mapping[str, np.ndarray], state: AdamState,
              cfg: TrainConfig) -> bool:
    """One bias-corrected Adam update in place. Returns False if skipped.

    An update with any non-finite gradient is skipped and counted in
    ``state.skipped``.
    """
    for k, g in grads.items():
        if g.shape != params[k].shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {k} {params[k].shape}")
        if not np.all(np.isfinite(g)):
            state.skipped += 1
            log.warning("non-finite gradient in %s; update skipped", k)
            return False
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for k, g in grads.items():
        m = state.m[k] = b1 * state.m[k] + (1.0 - b1) * g
        v = state.v[k] = b2 * state.v[k] + (1.0 - b2) * g * g
        params[k] -= cfg.lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)
    return True


@dataclass
class Example:
    """Encoded graph with its target rows in sequence order."""

    seq: NodeSequence
    skips: list[list[int]]
    target: np.ndarray


def encode_example(g: Graph, layout: np.ndarray, start: int, k: int) -> Example:
    order = bfs_order(g, start)
    seq = encode_adjacency_vectors(g, order, k)
    return Example(seq, skip_predecessors(g, order), np.asarray(layout, dtype=np.float64)[list(order)])


def augment_random_bfs_start(g: Graph, layout: np.ndarray, rng: np.random.Generator, k: int) -> Example:
    """Encode ``g`` from a uniformly drawn BFS start; target rows follow the order."""
    return encode_example(g, layout, int(rng.integers(g.n)), k)


def example_loss(params, mcfg: ModelConfig, ex: Example):
    pred = model_forward(params, mcfg, ex.seq, skips=None if mcfg.kind == BASELINE else ex.skips)
    return procrustes_loss(pred, ex.target)


def loss_and_grad(params: Mapping[str, np.ndarray], mcfg: ModelConfig, ex: Example):
    tape = Tape()
    leaves = {k: tape.leaf(v) for k, v in params.items()}
    loss = example_loss(leaves, mcfg, ex)
    grads = tape.backward(loss)
    return float(loss.value), {k: grads[v] for k, v in leaves.items()}


def usable(entries: Sequence) -> list:
    """Entries with a non-degenerate target layout; the rest are logged and dropped."""
    out = []
    for e in entries:
        lay = None if e.layout is None else np.asarray(e.layout, dtype=np.float64)
        try:
            if lay is None:
                raise DegenerateLayoutError("missing layout")
            _parts(lay, lay)
        except DegenerateLayoutError as err:
            log.warning("skipping %s: %s", getattr(e, "id", "?"), err)
            continue
        out.append(e)
    return out


@dataclass
class EpochResult:
    batch_losses: list[float]
    mean: float
    skipped_updates: int = 0


def train_epoch(entries: Sequence, params: dict[str, np.ndarray], state: AdamState, mcfg: ModelConfig,
                cfg: TrainConfig, rng: np.random.Generator) -> EpochResult:
    """One pass over ``entries`` in seeded random order, one Adam step per batch."""
    if not entries:
        raise ValueError("empty training set")
    order = rng.permutation(len(entries))
    losses = []
    skipped = state.skipped
    for s in range(0, len(order), cfg.batch):
        members = [entries[i] for i in order[s:s + cfg.batch]]
        total = None
        batch_loss = 0.0
        for e in members:
            ex = (augment_random_bfs_start(e.graph, e.layout, rng, mcfg.k) if cfg.augment
                  else encode_example(e.graph, e.layout, 0, mcfg.k))
            val, g = loss_and_grad(params, mcfg, ex)
            batch_loss += val
            if total is None:
                total = g
            else:
                for k in total:
                    total[k] = total[k] + g[k]
        inv = 1.0 / len(members)
        adam_step(params, {k: v * inv for k, v in total.items()}, state, cfg)
        losses.append(batch_loss * inv)
    sizes = [min(cfg.batch, len(order) - s) for s in range(0, len(order), cfg.batch)]
    return EpochResult(losses, float(np.dot(losses, sizes) / len(order)), state.skipped - skipped)


def evaluate_split(entries: Sequence, params: Mapping[str, np.ndarray], mcfg: ModelConfig):
    """Procrustes statistic per entry using the BFS from node 0; returns (mean, values)."""
    vals = []
    for e in entries:
        ex = encode_example(e.graph, e.layout, 0, mcfg.k)
        pred = model_forward(params, mcfg, ex.seq, skips=None if mcfg.kind == BASELINE else ex.skips).value
        vals.append(procrustes_statistic(pred, ex.target))
    return (float(np.mean(vals)) if vals else float("nan")), vals


@dataclass
class FitResult:
    params: dict[str, np.ndarray]
    state: AdamState
    history: list[dict] = field(default_factory=list)
    best_val: float = float("inf")
    best_epoch: int = 0
    epochs: int = 0


def fit(train: Sequence, val: Sequence, mcfg: ModelConfig, cfg: TrainConfig,
        params: dict[str, np.ndarray] | None = None, log_path=None,
        callback: Callable[[dict], None] | None = None) -> FitResult:
    """Train with early stopping on the validation Procrustes mean.

    The returned parameters are those of the best validation epoch. With an
    empty ``val`` the last epoch is kept. ``log_path`` receives one JSON
    line per batch and per epoch.
    """
    train = usable(train)
    val = usable(val)
    params = init_params(mcfg, cfg.seed) if params is None else {k: v.copy() for k, v in params.items()}
    state = AdamState.zeros(params)
    rng = np.random.default_rng(cfg.seed)
    res = FitResult(params, state)
    best = {k: v.copy() for k, v in params.items()}
    fh = open(log_path, "w") if log_path else None
    try:
        stale = 0
        for epoch in range(1, cfg.max_epochs + 1):
            t0 = time.perf_counter()
            ep = train_epoch(train, params, state, mcfg, cfg, rng)
            val_mean = evaluate_split(val, params, mcfg)[0] if val else float("nan")
            rec = {"epoch": epoch, "loss": ep.mean, "val": val_mean, "skipped": ep.skipped_updates,
                   "seconds": time.perf_counter() - t0}
            res.history.append(rec)
            res.epochs = epoch
            if fh:
                for b, l in enumerate(ep.batch_losses):
                    fh.write(json.dumps({"epoch": epoch, "batch": b, "loss": l}) + "\n")
                fh.write(json.dumps(rec) + "\n")
                fh.flush()
            if callback:
                callback(rec)
            log.info("epoch %d loss %.5f val %.5f", epoch, ep.mean, val_mean)
            if not val:
                best = params
                res.best_epoch = epoch
                continue
            if val_mean < res.best_val:
                res.best_val, res.best_epoch, stale = val_mean, epoch, 0
                best = {k: v.copy() for k, v in params.items()}
            else:
                stale += 1
                if stale >= cfg.patience:
                    break
    finally:
        if fh:
            fh.close()
    res.params = {k: v.copy() for k, v in best.items()}
    return res


# ---------------------------------------------------------------- checkpoints

def _npy(a: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.save(buf, np.ascontiguousarray(a, dtype=a.dtype.newbyteorder("<")), allow_pickle=False)
    return buf.getvalue()


def checkpoint_save(path, params: Mapping[str, np.ndarray], mcfg: ModelConfig,
                    tcfg: TrainConfig | None = None, state: AdamState | None = None,
                    epoch: int = 0, best_val: float | None = None) -> None:
    tensors = {f"params/{k}": v for k, v in params.items()}
    if state is not None:
        tensors.update({f"adam_m/{k}": v for k, v in state.m.items()})
        tensors.update({f"adam_v/{k}": v for k, v in state.v.items()})
    manifest = {
        "format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION,
        "model": asdict(mcfg), "train": asdict(tcfg) if tcfg else None,
        "epoch": epoch, "best_val": best_val, "adam_t": state.t if state else None,
        "tensors": {k: {"shape": list(v.shape), "dtype": v.dtype.newbyteorder("<").str} for k, v in tensors.items()},
    }
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as z:
        z.writestr("manifest.json", json.dumps(manifest, indent=1, sort_keys=True))
        for k, v in tensors.items():
            z.writestr(k + ".npy", _npy(v))


@dataclass
class Checkpoint:
    params: dict[str, np.ndarray]
    model: ModelConfig
    train: TrainConfig | None
    state: AdamState | None
    epoch: int
    best_val: float | None


def checkpoint_load(path) -> Checkpoint:
    try:
        with zipfile.ZipFile(path) as z:
            manifest = json.loads(z.read("manifest.json"))
            if manifest.get("format") != CHECKPOINT_FORMAT:
                raise CheckpointError(f"{path}: not a checkpoint file")
            if manifest.get("version") != CHECKPOINT_VERSION:
                raise CheckpointError(f"{path}: checkpoint version {manifest.get('version')} is not supported "
                                      f"(expected {CHECKPOINT_VERSION})")
            tensors = {}
            for k, info in manifest["tensors"].items():
                a = np.load(io.BytesIO(z.read(k + ".npy")), allow_pickle=False)
                if list(a.shape) != info["shape"]:
                    raise CheckpointError(f"{path}: tensor {k} has shape {a.shape}, manifest says {info['shape']}")
                tensors[k] = a
    except (zipfile.BadZipFile, KeyError, EOFError, OSError, json.JSONDecodeError, ValueError) as err:
        if isinstance(err, CheckpointError):
            raise
        raise CheckpointError(f"{path}: unreadable or truncated checkpoint ({err})") from None

    def group(prefix):
        return {k[len(prefix):]: v for k, v in tensors.items() if k.startswith(prefix)}

    params = group("params/")
    state = None
    if manifest.get("adam_t") is not None:
        state = AdamState(group("adam_m/"), group("adam_v/"), manifest["adam_t"])
    tcfg = TrainConfig(**manifest["train"]) if manifest.get("train") else None
    return Checkpoint(params, ModelConfig(**manifest["model"]), tcfg, state,
                      manifest.get("epoch", 0), manifest.get("best_val"))

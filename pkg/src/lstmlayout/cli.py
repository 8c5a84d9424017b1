"""Command-line entry point: ``lstmlayout {gen,layout,train,draw,eval,render}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import zipfile
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import generators as gen
from .generators import DatasetEntry, DrawingDataset, GenSpec
from .io import load_dataset, save_dataset
from .layouts import (Canvas, Fa2Config, PmdsConfig, layout_forceatlas2, layout_grid_perfect, layout_pivotmds,
                      layout_star_perfect, normalize_to_canvas)
from .metrics import MetricReport, time_layout
from .model import BASELINE, GRAPH_LSTM, ModelConfig, predict
from .procrustes import procrustes_statistic
from .render import render_side_by_side, render_svg
from .train import TrainConfig, checkpoint_load, checkpoint_save, fit

STYLES = ("grid-perfect", "star-perfect", "pivotmds", "forceatlas2")
MODELS = {"ours": GRAPH_LSTM, "baseline": BASELINE}


class CliError(Exception):
    pass


def parse_overrides(items) -> dict:
    """``key=value`` pairs; values are parsed as JSON when possible."""
    out = {}
    for item in items or []:
        if "=" not in item:
            raise CliError(f"--config expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = json.loads(v)
        except json.JSONDecodeError:
            out[k.strip()] = v
    return out


def apply_overrides(obj, overrides: dict, prefix: str = ""):
    names = {f.name for f in fields(obj)}
    mine = {k[len(prefix):]: v for k, v in overrides.items() if k.startswith(prefix) and k[len(prefix):] in names}
    return replace(obj, **mine) if mine else obj


def _check_overrides(overrides: dict, *objs_and_prefixes):
    known = set()
    for obj, prefix in objs_and_prefixes:
        known |= {prefix + f.name for f in fields(obj)}
    unknown = sorted(set(overrides) - known)
    if unknown:
        raise CliError(f"unknown --config key(s): {', '.join(unknown)}")


# ---------------------------------------------------------------- commands

def cmd_gen(a) -> None:
    if a.spec:
        specs = json.loads(Path(a.spec).read_text())
        graphs = []
        for d in specs:
            s = GenSpec.from_dict(d)
            if s.kind == "grid":
                graphs.append(gen.gen_grid(s.rows, s.cols))
            elif s.kind == "star":
                graphs.append(gen.gen_star(s.leaves))
            elif s.kind == "clustered":
                graphs.append(gen.gen_clustered(s))
            else:
                raise CliError(f"unknown graph kind {s.kind!r}")
        counts = None
    elif a.preset == "grid":
        graphs, counts = gen.grid_preset(), tuple(gen.TABLE1["grid"].values())
    elif a.preset == "star":
        graphs, counts = gen.star_preset(), tuple(gen.TABLE1["star"].values())
    else:
        sizes = gen.DESK["general"] if a.count is None else None
        n = sum(sizes.values()) if sizes else a.count
        graphs = gen.clustered_preset(n, a.seed)
        counts = tuple(sizes.values()) if sizes else None
    if a.count is not None and a.preset != "clustered":
        graphs = graphs[:a.count]
        counts = None
    ds = gen.split_dataset(graphs, seed=a.seed, counts=counts)
    ds.meta.update({"preset": a.preset, "spec_file": a.spec})
    save_dataset(a.out, ds)
    print(f"wrote {len(ds)} graphs to {a.out}")


def _layout_one(e: DatasetEntry, style: str, fa2: Fa2Config, pmds: PmdsConfig, canvas: Canvas) -> np.ndarray:
    g = e.graph
    if style == "grid-perfect":
        if g.meta.get("kind") != "grid":
            raise CliError(f"{e.id}: grid-perfect layout needs a grid graph")
        return layout_grid_perfect(g.meta["rows"], g.meta["cols"], canvas)
    if style == "star-perfect":
        if g.meta.get("kind") != "star":
            raise CliError(f"{e.id}: star-perfect layout needs a star graph")
        return layout_star_perfect(g.meta["leaves"], canvas)
    init = layout_pivotmds(g, pmds, canvas)
    if style == "pivotmds":
        return init
    return normalize_to_canvas(layout_forceatlas2(g, init, fa2), canvas)


def cmd_layout(a) -> None:
    ds = load_dataset(a.input)
    ov = parse_overrides(a.config)
    _check_overrides(ov, (Fa2Config(), "fa2."), (PmdsConfig(), "pmds."))
    fa2 = apply_overrides(Fa2Config(), ov, "fa2.")
    pmds = apply_overrides(PmdsConfig(), ov, "pmds.")
    canvas = Canvas()
    for e in ds.entries:
        e.layout = _layout_one(e, a.style, fa2, pmds, canvas)
    ds.style = a.style
    ds.meta["layout"] = {"style": a.style, "fa2": fa2.to_dict(), "pmds": pmds.to_dict()}
    save_dataset(a.out, ds, canvas)
    print(f"laid out {len(ds)} graphs with {a.style} -> {a.out}")


def _model_config(a, default_k: int) -> ModelConfig:
    kind = MODELS[a.model]
    return ModelConfig(kind, a.hidden, a.k or default_k, 1 if kind == GRAPH_LSTM else 4)


def cmd_train(a) -> None:
    ds = load_dataset(a.data)
    train = ds.split("train")
    if not train:
        raise CliError(f"{a.data}: no training entries")
    if any(e.layout is None for e in train):
        raise CliError(f"{a.data}: training entries need layouts (run `layout` first)")
    default_k = 208 if train[0].graph.meta.get("kind") == "star" else 35
    mcfg = _model_config(a, default_k)
    ov = parse_overrides(a.config)
    tcfg = TrainConfig(seed=a.seed, k=mcfg.k, batch=a.batch, max_epochs=a.epochs)
    _check_overrides(ov, (tcfg, ""))
    tcfg = apply_overrides(tcfg, ov)
    log_path = a.log or str(Path(a.out).with_suffix(".log.jsonl"))
    res = fit(train, ds.split("val"), mcfg, tcfg, log_path=log_path)
    checkpoint_save(a.out, res.params, mcfg, tcfg, res.state, res.epochs,
                    None if not np.isfinite(res.best_val) else res.best_val)
    print(f"trained {a.model} for {res.epochs} epochs (best val {res.best_val:.4f} at epoch {res.best_epoch}) "
          f"-> {a.out}")


def cmd_draw(a) -> None:
    ck = checkpoint_load(a.checkpoint)
    ds = load_dataset(a.input)
    entries = ds.entries if a.split is None else ds.split(a.split)
    out = []
    for e in entries:
        out.append(DatasetEntry(e.graph, normalize_to_canvas(predict(ck.params, ck.model, e.graph), Canvas()),
                                e.split, e.id))
    res = DrawingDataset(out, f"predicted:{ck.model.kind}", {"checkpoint": str(a.checkpoint)})
    save_dataset(a.out, res)
    print(f"drew {len(out)} graphs -> {a.out}")


def cmd_eval(a) -> None:
    pred = load_dataset(a.pred)
    truth = {e.id: e for e in load_dataset(a.truth).entries}
    report = MetricReport()
    stats = []
    for e in pred.entries:
        if a.split and e.split != a.split:
            continue
        t = truth.get(e.id)
        if t is None:
            raise CliError(f"{e.id} missing from {a.truth}")
        if e.layout is None or t.layout is None:
            raise CliError(f"{e.id}: missing coordinates")
        stats.append(procrustes_statistic(e.layout, t.layout))
        report.add(e.graph, e.layout, t.layout)
    if not stats:
        raise CliError("nothing to evaluate")
    if a.checkpoint:
        ck = checkpoint_load(a.checkpoint)
        graphs = [e.graph for e in pred.entries[:a.timing_graphs]]
        report.timing["model"] = time_layout(lambda g: predict(ck.params, ck.model, g), graphs, a.repeats)
        report.timing["forceatlas2"] = time_layout(
            lambda g: layout_forceatlas2(g, layout_pivotmds(g)), graphs, a.repeats)
    result = {"procrustes_mean": float(np.mean(stats)), "procrustes": stats, **report.to_dict()}
    print(f"procrustes mean {np.mean(stats):.4f} over {len(stats)} graphs")
    print(report.to_text())
    if a.out:
        Path(a.out).write_text(json.dumps(result, indent=1))


def cmd_render(a) -> None:
    ds = load_dataset(a.input)
    truth = {e.id: e for e in load_dataset(a.truth).entries} if a.truth else None
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    count = 0
    for e in ds.entries[:a.limit]:
        if e.layout is None:
            raise CliError(f"{e.id}: no coordinates to render")
        if truth is not None:
            t = truth.get(e.id)
            if t is None or t.layout is None:
                raise CliError(f"{e.id}: no ground-truth coordinates")
            svg = render_side_by_side(e.graph, t.layout, e.layout, title=e.id)
        else:
            svg = render_svg(e.graph, e.layout, title=e.id)
        (out / f"{e.id}.svg").write_text(svg)
        count += 1
    print(f"rendered {count} drawings into {out}")


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lstmlayout", description="Learn graph drawing styles with a graph-LSTM.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen", help="generate graphs")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=("grid", "star", "clustered"))
    src.add_argument("--spec", help="JSON list of generator specs")
    s.add_argument("--count", type=int, help="number of graphs (clustered) or cap on the preset")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("layout", help="compute ground-truth layouts")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--style", choices=STYLES, required=True)
    s.add_argument("--config", action="append", help="fa2.<field>=v or pmds.<field>=v")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_layout)

    s = sub.add_parser("train", help="train a model")
    s.add_argument("--data", required=True)
    s.add_argument("--model", choices=tuple(MODELS), default="ours")
    s.add_argument("--k", type=int, help="adjacency vector size (default 35, 208 for stars)")
    s.add_argument("--hidden", type=int, default=256)
    s.add_argument("--epochs", type=int, default=350)
    s.add_argument("--batch", type=int, default=128)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--config", action="append", help="TrainConfig field overrides, e.g. lr=0.001")
    s.add_argument("--log")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("draw", help="predict layouts with a checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--split", choices=gen.SPLITS)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_draw)

    s = sub.add_parser("eval", help="compare predicted and ground-truth layouts")
    s.add_argument("--pred", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--split", choices=gen.SPLITS)
    s.add_argument("--checkpoint", help="also time model inference against ForceAtlas2")
    s.add_argument("--repeats", type=int, default=10)
    s.add_argument("--timing-graphs", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("render", help="write SVG drawings")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--truth", help="dataset with ground truth for side-by-side views")
    s.add_argument("--limit", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except (CliError, ValueError, KeyError, OSError, zipfile.BadZipFile) as err:
        msg = str(err).splitlines()[0] if str(err) else type(err).__name__
        print(f"lstmlayout {args.command}: error: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from lstmlayout.cli import main
from lstmlayout.generators import DatasetEntry, DrawingDataset, clustered_preset
from lstmlayout.io import DatasetFormatError, load_dataset, save_dataset
from lstmlayout.layouts import layout_pivotmds
from lstmlayout.render import PALETTE, render_side_by_side, render_svg

SVG = "{http://www.w3.org/2000/svg}"


def test_dataset_roundtrip_is_exact(tmp_path):
    graphs = clustered_preset(5, seed=1)
    rng = np.random.default_rng(0)
    ents = [DatasetEntry(g, rng.normal(size=(g.n, 2)) * 1e3 / 7, "val", f"x{i}") for i, g in enumerate(graphs)]
    ents.append(DatasetEntry(graphs[0], None, "test", "nolayout"))
    ds = DrawingDataset(ents, "pivotmds", {"note": "t"})
    path = tmp_path / "d.jsonl"
    save_dataset(path, ds)
    back = load_dataset(path)
    assert back.style == "pivotmds" and back.meta == {"note": "t"}
    for a, b in zip(ds.entries, back.entries):
        assert a.graph == b.graph and a.id == b.id and a.split == b.split
        assert a.graph.meta == b.graph.meta
        if a.layout is None:
            assert b.layout is None
        else:
            assert a.layout.tobytes() == b.layout.tobytes()


def test_dataset_format_errors(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text(json.dumps({"format": "lstmlayout-dataset", "version": 7}) + "\n")
    with pytest.raises(DatasetFormatError, match="version 7"):
        load_dataset(p)
    p.write_text('{"nope": 1}\n')
    with pytest.raises(DatasetFormatError, match="header"):
        load_dataset(p)


def check_svg(text, n_nodes, n_edges, width=800):
    root = ET.fromstring(text)
    circles = root.findall(f".//{SVG}circle")
    lines = root.findall(f".//{SVG}line")
    assert len(circles) == n_nodes and len(lines) == n_edges
    for c in circles:
        assert 0 <= float(c.get("cx")) <= width and 0 <= float(c.get("cy")) <= 800
    return circles


def test_render_svg_and_palette():
    g = clustered_preset(1, seed=2)[0]
    lay = layout_pivotmds(g) * 5 - 999
    circles = check_svg(render_svg(g, lay, title="a<b"), g.n, g.m)
    assert {c.get("fill") for c in circles} <= set(PALETTE)
    assert len(PALETTE) == 12
    side = render_side_by_side(g, lay, lay @ np.array([[0, 1], [-1, 0]]))
    check_svg(side, 2 * g.n, 2 * g.m, width=1600)


def run(*args):
    return main([str(a) for a in args])


def test_cli_grid_pipeline(tmp_path):
    g, gl, out = tmp_path / "g.jsonl", tmp_path / "gl.jsonl", tmp_path / "svg"
    assert run("gen", "--preset", "grid", "--out", g) == 0
    assert run("layout", "--in", g, "--style", "grid-perfect", "--out", gl) == 0
    assert run("render", "--in", gl, "--out", out) == 0
    files = sorted(out.glob("*.svg"))
    assert len(files) == 120
    ds = {e.id: e for e in load_dataset(gl).entries}
    for f in files[:5]:
        e = ds[f.stem]
        circles = check_svg(f.read_text(), e.graph.n, e.graph.m)
        xs = sorted({float(c.get("cx")) for c in circles})
        steps = np.diff(xs)
        np.testing.assert_allclose(steps, steps[0], atol=2e-3)  # 3-decimal SVG output


def test_cli_end_to_end_and_self_eval(tmp_path, capsys):
    c, cl, m, p, rep = (tmp_path / x for x in ("c.jsonl", "cl.jsonl", "m.zip", "p.jsonl", "r.json"))
    assert run("gen", "--preset", "clustered", "--count", "12", "--seed", 4, "--out", c) == 0
    assert run("layout", "--in", c, "--style", "pivotmds", "--out", cl) == 0
    assert run("train", "--data", cl, "--hidden", 8, "--epochs", 2, "--batch", 4, "--config", "lr=0.01",
               "--out", m) == 0
    assert run("draw", "--checkpoint", m, "--in", cl, "--out", p) == 0
    assert run("eval", "--pred", p, "--truth", cl, "--out", rep) == 0
    assert 0 < json.loads(rep.read_text())["procrustes_mean"] <= 1
    assert run("eval", "--pred", cl, "--truth", cl, "--out", rep) == 0
    r = json.loads(rep.read_text())
    assert r["procrustes_mean"] < 1e-12
    assert all(v == 0 for v in r["rmse"].values())
    assert run("render", "--in", p, "--truth", cl, "--limit", 2, "--out", tmp_path / "side") == 0
    assert len(list((tmp_path / "side").glob("*.svg"))) == 2


def test_cli_is_deterministic(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for path in (a, b):
        assert run("gen", "--preset", "clustered", "--count", 6, "--seed", 9, "--out", path) == 0
        assert run("layout", "--in", path, "--style", "forceatlas2", "--config", "fa2.iterations=30",
                   "--out", path) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_errors_are_one_line(tmp_path, capsys):
    c = tmp_path / "c.jsonl"
    run("gen", "--preset", "clustered", "--count", 3, "--out", c)
    capsys.readouterr()
    assert run("layout", "--in", c, "--style", "grid-perfect", "--out", tmp_path / "x") == 2
    err = capsys.readouterr().err.strip()
    assert err.count("\n") == 0 and "grid-perfect" in err
    assert run("layout", "--in", c, "--style", "pivotmds", "--config", "bogus=1", "--out", tmp_path / "x") == 2
    assert run("eval", "--pred", c, "--truth", c) == 2
    assert "missing coordinates" in capsys.readouterr().err
    assert run("draw", "--checkpoint", c, "--in", c, "--out", tmp_path / "x") == 2
    assert run("train", "--data", tmp_path / "missing.jsonl", "--out", tmp_path / "m.zip") == 2
    with pytest.raises(SystemExit):
        run("layout", "--in", c, "--style", "unknown", "--out", tmp_path / "x")

"""Rendering: determinism, envelope overlays, schema errors."""

import hashlib
import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from plotkit import PlotkitError, build_figure, load_csv, render, spec_from_manifest

DATA = Path(__file__).parent / "data"


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@pytest.mark.parametrize("name", ["fig1", "fig2", "fig3"])
def test_render_deterministic(tmp_path, name):
    spec = spec_from_manifest(DATA / name, name)
    p1 = render(spec, tmp_path / "a")
    p2 = render(spec_from_manifest(DATA / name, name), tmp_path / "b")
    assert p1.exists() and p1.suffix == ".png"
    assert sha256(p1) == sha256(p2)


def test_fig1_layout_and_input_overlay():
    spec = spec_from_manifest(DATA / "fig1", "fig1")
    assert len(spec.panels) == 2  # the two worst-case columns
    assert spec.overlays == {"input": 0.1}
    fig = build_figure(spec)
    axes = np.asarray(fig.axes).reshape(2, -1)
    # the input row carries the +-0.1 envelope lines
    for ax in axes[1]:
        levels = sorted(ln.get_ydata()[0] for ln in ax.lines
                        if len(set(np.asarray(ln.get_ydata()))) == 1)
        assert levels == [-0.1, 0.1]
    for ax in axes[0]:
        consts = [ln for ln in ax.lines if len(set(np.asarray(ln.get_ydata()))) == 1]
        assert not consts  # no state envelope for this preset
    # and the certified controller's data respects the budget
    for panel in spec.panels:
        assert np.max(np.abs(panel.ours["u_1"])) <= 0.1


def test_fig2_state_overlay_matches_preset():
    spec = spec_from_manifest(DATA / "fig2", "fig2")
    assert len(spec.panels) == 3  # white / uniform / laplace columns
    assert spec.overlays == {"state": 0.2}
    fig = build_figure(spec)
    axes = np.asarray(fig.axes).reshape(2, -1)
    for ax in axes[0]:
        levels = sorted(ln.get_ydata()[0] for ln in ax.lines
                        if len(set(np.asarray(ln.get_ydata()))) == 1)
        assert levels == [-0.2, 0.2]
    for panel in spec.panels:
        assert np.max(np.abs(panel.ours["x_1"])) <= 0.2 + 1e-12


def test_fig3_three_noise_columns():
    spec = spec_from_manifest(DATA / "fig3", "fig3")
    assert len(spec.panels) == 3
    assert spec.overlays == {}
    labels = [p.label for p in spec.panels]
    assert any("white" in l for l in labels)
    assert any("uniform" in l for l in labels)
    assert any("laplace" in l for l in labels)


def test_csv_loader_round_trip():
    entry = json.loads((DATA / "fig1" / "manifest.json").read_text())["models"][0]
    cols = load_csv(DATA / "fig1" / entry["csv_ours"])
    assert set(cols) == {"k", "x_1", "u_1", "w_1", "q", "r", "s", "p"}
    assert cols["k"][0] == 0.0
    assert len(cols["k"]) == 61  # horizon 60 -> rows k = 0..60


def test_schema_mismatch_names_column(tmp_path):
    src = DATA / "fig1"
    entry = json.loads((src / "manifest.json").read_text())["models"][0]
    broken = tmp_path / "broken.csv"
    lines = (src / entry["csv_ours"]).read_text().splitlines()
    lines[0] = lines[0].replace("u_1", "input")
    broken.write_text("\n".join(lines))
    with pytest.raises(PlotkitError, match="u_1"):
        load_csv(broken)


def test_empty_trajectory_rejected(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(PlotkitError, match="empty"):
        load_csv(empty)
    header_only = tmp_path / "h.csv"
    header_only.write_text("k,x_1,u_1,w_1,q,r,s,p\n")
    with pytest.raises(PlotkitError, match="no data rows"):
        load_csv(header_only)


def test_missing_manifest_rejected(tmp_path):
    with pytest.raises(PlotkitError, match="manifest"):
        spec_from_manifest(tmp_path, "fig1")


def test_cli_end_to_end(tmp_path):
    from plotkit.cli import main

    assert main(["--figure", "fig1", "--in", str(DATA / "fig1"), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "fig1.png").exists()
    assert main(["--figure", "fig2", "--in", str(tmp_path), "--out", str(tmp_path)]) == 1


def test_cli_rejects_corrupted_inputs(tmp_path):
    from plotkit.cli import main

    work = tmp_path / "work"
    shutil.copytree(DATA / "fig1", work)
    manifest = json.loads((work / "manifest.json").read_text())
    # corrupt the exact file the figure will plot (median scale of one kind)
    entries = sorted((e for e in manifest["models"] if e["kind"] == "white_gaussian"),
                     key=lambda e: e["scale"])
    plotted = entries[len(entries) // 2]
    (work / plotted["csv_ours"]).write_text("k,x_1\n0,1\n")
    manifest["plot_models"] = ["white_gaussian"]
    (work / "manifest.json").write_text(json.dumps(manifest))
    assert main(["--figure", "fig1", "--in", str(work), "--out", str(tmp_path / "o")]) == 1

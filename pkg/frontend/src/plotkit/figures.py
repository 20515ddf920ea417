"""Figure assembly from simulator CSV pairs.

Reads the run manifest and trajectory CSVs written by the simulator, builds a
two-row panel grid (states on top, inputs below; one column per disturbance
model) comparing the certified controller against the quadratic baseline, and
overlays the hard envelopes where the preset declares them.  Rendering is
pure: the same input files produce byte-identical PNGs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

STYLE_FILE = Path(__file__).parent / "style" / "paper.mplstyle"
REQUIRED_COLUMNS = ("k", "x_1", "u_1", "w_1", "q", "r", "s", "p")


class PlotkitError(Exception):
    pass


@dataclass
class Panel:
    label: str
    ours: dict
    quad: dict


@dataclass
class FigureSpec:
    name: str
    panels: list
    overlays: dict = field(default_factory=dict)   # {"state": t} and/or {"input": t}
    horizon: int = 0


def load_csv(path) -> dict:
    """Parse one trajectory CSV into named columns.

    Raises with the offending column name on schema mismatch and rejects
    empty trajectory files.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise PlotkitError(f"trajectory file not found: {path}")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise PlotkitError(f"empty trajectory file: {path}")
    header = lines[0].split(",")
    for col in REQUIRED_COLUMNS:
        if col not in header:
            raise PlotkitError(f"schema mismatch in {path.name}: missing column {col!r}")
    if len(lines) < 2:
        raise PlotkitError(f"no data rows in {path}")
    data = np.genfromtxt(lines[1:], delimiter=",", dtype=float)
    data = np.atleast_2d(data)
    if data.shape[1] != len(header):
        raise PlotkitError(f"schema mismatch in {path.name}: row width {data.shape[1]} "
                           f"!= header width {len(header)}")
    return {name: data[:, i] for i, name in enumerate(header)}


def _pick_models(manifest: dict) -> list:
    """One manifest entry per plotted model; stochastic kinds use the median scale."""
    wanted = manifest.get("plot_models")
    if not wanted:
        raise PlotkitError("manifest has no plot_models entry (not a preset run?)")
    chosen = []
    for kind in wanted:
        entries = [e for e in manifest["models"] if e["kind"] == kind]
        if not entries:
            raise PlotkitError(f"manifest has no runs for model kind {kind!r}")
        entries.sort(key=lambda e: e["scale"])
        chosen.append(entries[len(entries) // 2])
    return chosen


def spec_from_manifest(in_dir, name: str) -> FigureSpec:
    in_dir = Path(in_dir)
    mpath = in_dir / "manifest.json"
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise PlotkitError(f"manifest not found in {in_dir}")
    panels = []
    horizon = None
    for entry in _pick_models(manifest):
        ours = load_csv(in_dir / entry["csv_ours"])
        quad = load_csv(in_dir / entry["csv_quad"])
        for cols in (ours, quad):
            h = len(cols["k"])
            if horizon is None:
                horizon = h
            elif h != horizon:
                raise PlotkitError("trajectory files disagree on the horizon")
        label = entry["kind"].replace("_", " ")
        if entry["kind"] not in ("worst_case_central", "worst_case_quadratic"):
            label += f" (scale {entry['scale']:g})"
        panels.append(Panel(label=label, ours=ours, quad=quad))
    return FigureSpec(name=name, panels=panels,
                      overlays=manifest.get("overlay", {}), horizon=horizon or 0)


ROW_COLUMN = {"state": "x_1", "input": "u_1"}
ROW_LABEL = {"state": "state x", "input": "input u"}


def build_figure(spec: FigureSpec):
    """Assemble the panel grid; separated from file output for testing."""
    if not spec.panels:
        raise PlotkitError("figure spec has no panels")
    with plt.style.context(str(STYLE_FILE)):
        ncols = len(spec.panels)
        fig, axes = plt.subplots(2, ncols, sharex=True, squeeze=False)
        for col, panel in enumerate(spec.panels):
            for row, kind in enumerate(("state", "input")):
                ax = axes[row][col]
                key = ROW_COLUMN[kind]
                ax.plot(panel.ours["k"], panel.ours[key], color="#1f5fa6", label="convex-cost design")
                ax.plot(panel.quad["k"], panel.quad[key], color="#c44e52", linestyle="--",
                        label="quadratic baseline")
                bound = spec.overlays.get(kind)
                if bound is not None:
                    ax.axhline(bound, color="#444444", linewidth=0.8, linestyle=":",
                               label=f"envelope ±{bound:g}")
                    ax.axhline(-bound, color="#444444", linewidth=0.8, linestyle=":")
                if row == 0:
                    ax.set_title(panel.label)
                if row == 1:
                    ax.set_xlabel("step k")
                if col == 0:
                    ax.set_ylabel(ROW_LABEL[kind])
        axes[0][0].legend(loc="upper right")
        fig.suptitle(spec.name)
        fig.tight_layout()
    return fig


def render(spec: FigureSpec, out_dir) -> Path:
    """Write `<name>.png`; deterministic for identical inputs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fig = build_figure(spec)
    out = out_dir / f"{spec.name}.png"
    fig.savefig(out, metadata={"Software": "plotkit"})
    plt.close(fig)
    return out

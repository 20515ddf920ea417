"""Figure rendering for the simulator's CSV/manifest output."""

from .figures import FigureSpec, Panel, PlotkitError, build_figure, load_csv, render, spec_from_manifest

__all__ = [
    "FigureSpec",
    "Panel",
    "PlotkitError",
    "build_figure",
    "load_csv",
    "render",
    "spec_from_manifest",
]

__version__ = "0.1.0"

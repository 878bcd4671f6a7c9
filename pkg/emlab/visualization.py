"""
emlab — Plot Renderer
Byte-deterministic SVG line plots of result tables, drawn with matplotlib.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import matplotlib
import numpy as np
import pandas as pd

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from emlab.errors import InvalidArgument  # noqa: E402

FIGSIZE = (6.4, 4.2)
MARKER_LIMIT = 64
PALETTE = ("#1f5f99", "#c0392b", "#27865f", "#8e44ad", "#d68910")
SERIES_GID = "series-{}"

# fixed hash salt and no timestamp: identical tables give identical bytes
SVG_RC = {
    "svg.hashsalt": "emlab",
    "svg.fonttype": "none",
    "path.simplify": False,
}


@dataclass(frozen=True)
class PlotSpec:
    x: str
    y: tuple[str, ...]
    title: str = ""
    log_y: bool = False
    markers: bool = True


def _series(table: pd.DataFrame, spec: PlotSpec) -> list[tuple[str, np.ndarray, np.ndarray]]:
    x_all = table[spec.x].to_numpy(dtype=float)
    series = []
    for column in spec.y:
        y = table[column].to_numpy(dtype=float)
        keep = np.isfinite(x_all) & np.isfinite(y)
        if spec.log_y:
            keep &= y > 0
        if keep.any():
            series.append((column, x_all[keep], y[keep]))
    return series


def render_svg(table: pd.DataFrame, spec: PlotSpec, caption: str = "") -> str:
    """
    One line per y column against spec.x, each in a group with id `series-<column>`.
    With log_y nonpositive entries are dropped.
    """
    if table.empty:
        raise InvalidArgument("cannot plot an empty table.")
    missing = [c for c in (spec.x, *spec.y) if c not in table.columns]
    if missing:
        raise InvalidArgument(f"plot columns missing from table: {', '.join(missing)}.")
    series = _series(table, spec)
    if not series:
        raise InvalidArgument("no finite values to plot.")

    buffer = io.StringIO()
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        try:
            for index, (column, x, y) in enumerate(series):
                ax.plot(
                    x, y,
                    color=PALETTE[index % len(PALETTE)],
                    lw=1.5,
                    marker="o" if spec.markers and len(x) <= MARKER_LIMIT else None,
                    ms=3,
                    label=column,
                    gid=SERIES_GID.format(column),
                )
            if spec.log_y:
                ax.set_yscale("log")
            ax.set_xlabel(spec.x)
            ax.set_ylabel(", ".join(spec.y))
            if spec.title:
                ax.set_title(spec.title)
            ax.grid(alpha=0.3)
            ax.legend(fontsize=8, frameon=False)
            if caption:
                fig.text(0.01, 0.01, caption, fontsize=7, color="#555555")
            fig.savefig(buffer, format="svg", bbox_inches="tight", metadata={"Date": None})
        finally:
            plt.close(fig)
    return buffer.getvalue()

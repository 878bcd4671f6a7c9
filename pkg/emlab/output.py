"""
emlab — Output Writer
Writes suite tables as full-precision CSV and, on request, SVG plots into the run directory.
"""

from __future__ import annotations

import logging
from pathlib import Path

import pandas as pd

from emlab.suites import SuiteReport
from emlab.visualization import PlotSpec, render_svg

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"

PLOTS = {
    "riesz": [
        ("norms", PlotSpec("j", ("l2", "l2_closed_form"), "L2 norm of the Riesz product", log_y=True)),
        ("contrast", PlotSpec("j", ("l2sq_sqrt", "l2sq_linear"), "sqrt vs linear schedule")),
    ],
    "weights": [
        ("stress", PlotSpec("j", ("rh2_closed_form", "rh2_sampled"), "RH2 under the stress schedule")),
    ],
    "kp": [
        ("kp", PlotSpec("j", ("kp_value", "kp_lower_bound"), "Kenig-Pipher functional", log_y=True)),
    ],
    "solve": [
        ("doubling", PlotSpec("left", ("ratio",), "doubling ratios of the elliptic measure")),
    ],
    "kernel-compare": [
        ("profile", PlotSpec("x", ("ratio",), "kernel / Riesz ratio", markers=False)),
    ],
}


def write_csv(table: pd.DataFrame, path: Path) -> Path:
    table.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def write_report(report: SuiteReport) -> list[Path]:
    """
    `<suite>_<table>.csv` for every table plus `<suite>_checks.csv`;
    `<suite>_<table>.svg` for the suite's plots when svg is requested.
    """
    cfg = report.config
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = report.suite.replace("-", "_")

    written = []
    for name, table in report.tables.items():
        written.append(write_csv(table, out_dir / f"{prefix}_{name}.csv"))
    written.append(write_csv(report.checks_frame(), out_dir / f"{prefix}_checks.csv"))

    if "svg" in cfg.formats:
        for name, spec in PLOTS.get(report.suite, []):
            if name not in report.tables:
                continue
            path = out_dir / f"{prefix}_{name}.svg"
            path.write_text(render_svg(report.tables[name], spec, cfg.caption), encoding="utf-8")
            written.append(path)

    logger.info("wrote %d files to %s", len(written), out_dir)
    return written

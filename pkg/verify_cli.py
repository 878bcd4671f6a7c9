"""Command line, configuration precedence, result files and plots."""

import re

import click
import numpy as np
import pandas as pd
import pytest

import emlab.cli as cli_module
from emlab.cli import main, parse_config
from emlab.config import RunConfig, build_config, load_config_file, parse_config_text, thread_count
from emlab.construction import ScheduleKind, Variant
from emlab.errors import (
    EXIT_INVARIANT_FAILURE,
    EXIT_OK,
    EXIT_RESOURCE,
    EXIT_USAGE,
    ConfigError,
    InvalidArgument,
    ResourceLimitError,
    SuiteError,
)
from emlab.output import write_report
from emlab.suites import SuiteReport, run_suite
from emlab.visualization import PlotSpec, render_svg


# ─────────────────────────────────────────────
#  CONFIGURATION
# ─────────────────────────────────────────────

def test_flags_map_to_config():
    cfg = parse_config(["riesz", "--jmax", "12", "--schedule", "sqrt"])
    assert cfg.suite == "riesz"
    assert cfg.j_max == 12
    assert cfg.schedule.kind is ScheduleKind.SQRT
    assert cfg.formats == frozenset({"csv"})


def test_defaults_per_suite():
    assert parse_config(["kp"]).j_max == 5
    assert parse_config(["kernel-compare"]).j_max == 2
    cfg = parse_config(["solve"])
    assert cfg.tol == 1e-10 and cfg.seed == 0 and cfg.grid is None


def test_all_flags(tmp_path):
    cfg = parse_config([
        "solve", "--jmax", "1", "--schedule", "scaled:0.5", "--variant", "strong", "--grid", "64,32",
        "--tol", "1e-8", "--seed", "11", "--out", str(tmp_path), "--format", "svg", "--threads", "3",
    ])
    assert cfg.schedule.label == "scaled:0.5"
    assert cfg.variant is Variant.STRONG
    assert cfg.grid == (64, 32)
    assert cfg.tol == 1e-8
    assert cfg.seed == 11
    assert cfg.out_dir == tmp_path
    assert cfg.formats == frozenset({"csv", "svg"})
    assert cfg.threads == 3


def test_flag_beats_file_beats_default(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# weights study\nsuite = weights\njmax=4\nseed=7\n\nschedule=linear\n")
    cfg = parse_config(["weights", "--config", str(path), "--jmax", "6"])
    assert cfg.j_max == 6
    assert cfg.seed == 7
    assert cfg.schedule.kind is ScheduleKind.LINEAR
    assert cfg.tol == 1e-10


def test_file_selecting_other_suite(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("suite=kp\n")
    with pytest.raises(ConfigError, match="suite"):
        parse_config(["riesz", "--config", str(path)])


@pytest.mark.parametrize("text", ["colour=blue\n", "jmax\n", "grid=64\n", "format=png\n", "variant=weak\n"])
def test_bad_config_lines(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config_file(tmp_path / "absent.cfg")


@pytest.mark.parametrize("args", [
    ["riesz", "--tol", "0.1"],
    ["riesz", "--jmax", "0"],
    ["riesz", "--jmax", "two"],
    ["riesz", "--schedule", "scaled:2"],
    ["solve", "--grid", "4,4"],
    ["riesz", "--bogus"],
    ["spectral"],
])
def test_usage_errors(args):
    with pytest.raises(ConfigError):
        parse_config(args)


def test_run_config_is_frozen():
    cfg = build_config("riesz", {}, {})
    assert isinstance(cfg, RunConfig)
    with pytest.raises(AttributeError):
        cfg.j_max = 3


def test_caption_names_run():
    cfg = build_config("kp", {}, {"jmax": 3, "seed": 5})
    assert cfg.caption == "emlab kp jmax=3 schedule=sqrt variant=standard grid=auto tol=1e-10 seed=5"


def test_thread_count_sources(monkeypatch):
    assert thread_count() == 2
    assert thread_count(5) == 5
    monkeypatch.setenv("EMLAB_THREADS", "many")
    with pytest.raises(ConfigError):
        thread_count()
    assert thread_count(1) == 1


# ─────────────────────────────────────────────
#  PLOTS
# ─────────────────────────────────────────────

def _series_vertices(svg: str, column: str) -> int:
    """Vertex count of the line drawn for `column`."""
    group = svg.split(f'<g id="series-{column}">', 1)[1]
    path = re.search(r'\sd="([^"]*)"', group).group(1)
    return len(re.findall(r"[ML] ", path))


def test_two_points_make_one_line():
    svg = render_svg(pd.DataFrame({"j": [1, 2], "v": [0.5, 2.0]}), PlotSpec("j", ("v",), "demo"))
    assert svg.count('<g id="series-') == 1
    assert _series_vertices(svg, "v") == 2
    assert "demo" in svg
    assert svg.rstrip().endswith("</svg>")


def test_svg_is_deterministic():
    table = pd.DataFrame({"x": [0.0, 0.5, 1.0], "a": [1.0, 4.0, 9.0], "b": [2.0, 1.0, 0.5]})
    spec = PlotSpec("x", ("a", "b"), "two series", log_y=True)
    first = render_svg(table, spec, "caption")
    assert first == render_svg(table.copy(), spec, "caption")
    assert first.count('<g id="series-') == 2
    assert _series_vertices(first, "a") == _series_vertices(first, "b") == 3
    assert "caption" in first


def test_log_axis_drops_nonpositive():
    svg = render_svg(pd.DataFrame({"j": [1, 2, 3], "v": [0.0, 1.0, 10.0]}), PlotSpec("j", ("v",), log_y=True))
    assert _series_vertices(svg, "v") == 2


def test_series_without_finite_values_is_skipped():
    table = pd.DataFrame({"j": [1, 2, 3], "v": [1.0, 2.0, 3.0], "w": [np.nan] * 3})
    svg = render_svg(table, PlotSpec("j", ("v", "w")))
    assert svg.count('<g id="series-') == 1


def test_plot_rejects_bad_tables():
    with pytest.raises(InvalidArgument):
        render_svg(pd.DataFrame({"j": [], "v": []}), PlotSpec("j", ("v",)))
    with pytest.raises(InvalidArgument):
        render_svg(pd.DataFrame({"j": [1]}), PlotSpec("j", ("v",)))


# ─────────────────────────────────────────────
#  RUNS AND RESULT FILES
# ─────────────────────────────────────────────

def test_riesz_run_writes_reproducible_files(tmp_path):
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert main(["riesz", "--jmax", "3", "--out", str(out), "--format", "csv,svg"]) == EXIT_OK
        outputs.append(out)
    names = sorted(p.name for p in outputs[0].iterdir())
    assert names == [
        "riesz_checks.csv", "riesz_contrast.csv", "riesz_contrast.svg", "riesz_norms.csv", "riesz_norms.svg",
    ]
    for name in names:
        assert (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes()

    norms = pd.read_csv(outputs[0] / "riesz_norms.csv")
    assert list(norms["j"]) == [1, 2, 3]
    assert (norms["l1"] - 1.0).abs().max() <= 1e-10
    checks = pd.read_csv(outputs[0] / "riesz_checks.csv")
    assert set(checks["status"]) <= {"pass", "reported"}
    assert "emlab riesz jmax=3" in (outputs[0] / "riesz_norms.svg").read_text()


def test_run_suite_reports_checks():
    report = run_suite(build_config("riesz", {}, {"jmax": 2}))
    assert report.ok
    assert {"l1[j=1]", "parseval[j=2]", "sqrt_dominates_linear"} <= {c.name for c in report.checks}


def test_invariant_failure_exit_code(tmp_path, monkeypatch):
    cfg = build_config("riesz", {}, {"out": tmp_path})

    def failing(_cfg):
        report = SuiteReport("riesz", cfg)
        report.check("l1[j=1]", False, 0.5, 1e-10)
        report.tables["norms"] = pd.DataFrame({"j": [1], "l1": [1.5]})
        return report

    monkeypatch.setattr(cli_module, "run_suite", failing)
    assert main(["riesz", "--out", str(tmp_path)]) == EXIT_INVARIANT_FAILURE
    assert (tmp_path / "riesz_checks.csv").read_text().splitlines()[1].startswith("l1[j=1],hard,FAIL")


def test_resource_exit_code(monkeypatch):
    def exhausted(cfg):
        raise SuiteError(cfg.suite, ResourceLimitError("expansion needs 3^17 terms"))

    monkeypatch.setattr(cli_module, "run_suite", exhausted)
    assert main(["riesz", "--jmax", "17"]) == EXIT_RESOURCE


def test_usage_exit_codes():
    assert main(["riesz", "--tol", "0.1"]) == EXIT_USAGE
    assert main(["spectral"]) == EXIT_USAGE
    assert main(["--help"]) == EXIT_OK


def test_help_exits_through_click():
    with pytest.raises(click.exceptions.Exit):
        parse_config(["riesz", "--help"])


def test_write_report_csv_only(tmp_path):
    cfg = build_config("riesz", {}, {"out": tmp_path / "nested"})
    report = SuiteReport("riesz", cfg)
    report.tables["norms"] = pd.DataFrame({"j": [1], "l2": [1.0 / 3.0]})
    written = write_report(report)
    assert [p.name for p in written] == ["riesz_norms.csv", "riesz_checks.csv"]
    assert (tmp_path / "nested" / "riesz_norms.csv").read_text() == "j,l2\n1,0.33333333333333331\n"


@pytest.mark.parametrize("args", [["solve", "--jmax", "4"], ["solve", "--jmax", "1", "--grid", "4096,4096"]])
def test_oversized_solve_grid_is_a_resource_error(args, tmp_path):
    assert main([*args, "--out", str(tmp_path)]) == EXIT_RESOURCE


@pytest.mark.slow
def test_weights_past_cell_budget_is_a_resource_error(tmp_path):
    assert main(["weights", "--jmax", "11", "--out", str(tmp_path)]) == EXIT_RESOURCE


SUITE_RUNS = [
    ("weights", "3", ["constants", "fixtures", "stress"]),
    ("kp", "2", ["kp"]),
    ("solve", "1", ["doubling", "measure", "sides"]),
    ("kernel-compare", "1", ["profile", "summary"]),
]


@pytest.mark.slow
@pytest.mark.parametrize("suite, jmax, tables", SUITE_RUNS, ids=[run[0] for run in SUITE_RUNS])
def test_suite_run_passes_and_is_reproducible(suite, jmax, tables, tmp_path):
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert main([suite, "--jmax", jmax, "--out", str(out)]) == EXIT_OK
        outputs.append(out)
    prefix = suite.replace("-", "_")
    names = sorted(p.name for p in outputs[0].iterdir())
    assert names == sorted([f"{prefix}_checks.csv", *(f"{prefix}_{t}.csv" for t in tables)])
    for name in names:
        assert (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes(), name

    checks = pd.read_csv(outputs[0] / f"{prefix}_checks.csv")
    assert set(checks["status"]) <= {"pass", "reported"}
    assert (checks["kind"] == "hard").any()


@pytest.mark.slow
def test_weights_stress_mean_is_computed(tmp_path):
    report = run_suite(build_config("weights", {}, {"jmax": 2, "out": tmp_path}))
    assert report.ok
    stress = report.tables["stress"].set_index("j")
    assert bool(stress.loc[16, "sampled"])
    assert stress.loc[16, "mean"] == 1.0
    assert stress.loc[16, "sample_mean"] != 1.0
    assert (stress["mean"] - 1.0).abs().max() <= 1e-10

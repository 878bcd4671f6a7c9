"""
emlab — Command Line
`emlab <suite> [flags]`: builds the RunConfig, runs the suite, writes results, maps errors to exit codes.
"""

from __future__ import annotations

import logging
import sys

import click

from emlab.config import FORMATS, RunConfig, build_config, coerce, load_config_file
from emlab.errors import EXIT_USAGE, ConfigError, EmlabError
from emlab.output import write_report
from emlab.suites import run_suite

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT, stream=sys.stderr)


def run_options(func):
    """Flags shared by every suite; values stay raw strings until coerced with their key."""
    options = [
        click.option("--jmax", help="Largest level j."),
        click.option("--schedule", help="sqrt | linear | flat | scaled:A0"),
        click.option("--variant", help="standard | strong"),
        click.option("--grid", help="NX,NY cell counts (default: resolution rule)."),
        click.option("--tol", help="Relative solver tolerance in (0, 1e-4]."),
        click.option("--seed", help="Master random seed."),
        click.option("--out", help="Output directory."),
        click.option("--format", "format_", help=f"Comma-separated subset of {','.join(FORMATS)}."),
        click.option("--threads", help="Worker threads (overrides EMLAB_THREADS)."),
        click.option("--config", "config_file", type=click.Path(dir_okay=False), help="key=value config file."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _make_config(suite: str, config_file: str | None, format_: str | None, **flags) -> RunConfig:
    file_values = load_config_file(config_file) if config_file else {}
    flags["format"] = format_
    flag_values = {key: coerce(key, text) for key, text in flags.items() if text is not None}
    return build_config(suite, file_values, flag_values)


@click.group()
@click.option("--verbose", is_flag=True, help="Debug logging.")
def cli(verbose: bool):
    """Numerical laboratory for elliptic measures of oscillating coefficient fields."""
    configure_logging(verbose)


def _suite_command(suite: str, summary: str):
    @cli.command(name=suite, help=summary)
    @run_options
    def command(**kwargs) -> RunConfig:
        return _make_config(suite, **kwargs)

    return command


_suite_command("riesz", "L1/L2 identities and singularity diagnostics of Riesz products.")
_suite_command("weights", "RH_q, A_inf and L log L constants of Riesz-product weights.")
_suite_command("kp", "Kenig-Pipher functional against its analytic lower bound.")
_suite_command("solve", "Discrete elliptic measure: probability, duality, random-walk oracle.")
_suite_command("kernel-compare", "Poisson-kernel profile compared to the Riesz product.")


def parse_config(args: list[str]) -> RunConfig:
    """Parse `<suite> [flags]` into a RunConfig without running anything."""
    try:
        result = cli.main(args=list(args), prog_name="emlab", standalone_mode=False)
    except click.UsageError as e:
        raise ConfigError(e.format_message()) from e
    if isinstance(result, int):
        # --help and friends exit through click
        raise click.exceptions.Exit(result)
    if not isinstance(result, RunConfig):
        raise ConfigError("a suite command is required.")
    return result


def main(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(args)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.Abort:
        return EXIT_USAGE
    except ConfigError as e:
        click.echo(f"emlab: {e}", err=True)
        return EXIT_USAGE

    try:
        report = run_suite(cfg)
        write_report(report)
    except EmlabError as e:
        logger.error("%s", e)
        return e.exit_code

    for check in report.hard_failures:
        click.echo(f"FAIL {check.name}: {check.value:.6g} (threshold {check.threshold:.6g})", err=True)
    return report.exit_code

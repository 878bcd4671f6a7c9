"""
emlab — Run Configuration
Config-file parsing, value coercion and precedence merging into an immutable RunConfig.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from emlab.construction import AmplitudeSchedule, Variant
from emlab.errors import ConfigError, InvalidArgument

SUITES = ("riesz", "weights", "kp", "solve", "kernel-compare")
FORMATS = ("csv", "svg")
CONFIG_KEYS = ("suite", "jmax", "schedule", "variant", "grid", "tol", "seed", "out", "format", "threads")

DEFAULT_JMAX = {"riesz": 12, "weights": 9, "kp": 5, "solve": 2, "kernel-compare": 2}
MAX_TOL = 1e-4
THREADS_ENV = "EMLAB_THREADS"


@dataclass(frozen=True)
class RunConfig:
    suite: str
    j_max: int
    schedule: AmplitudeSchedule = field(default_factory=AmplitudeSchedule)
    variant: Variant = Variant.STANDARD
    grid: tuple[int, int] | None = None
    tol: float = 1e-10
    seed: int = 0
    out_dir: Path = Path("results")
    formats: frozenset[str] = frozenset({"csv"})
    threads: int | None = None

    def __post_init__(self):
        if self.suite not in SUITES:
            raise ConfigError(f"suite must be one of {', '.join(SUITES)}; got {self.suite!r}.")
        if self.j_max < 1:
            raise ConfigError(f"jmax must be ≥ 1; got {self.j_max}.")
        if not 0 < self.tol <= MAX_TOL:
            raise ConfigError(f"tol must lie in (0, {MAX_TOL:g}]; got {self.tol:g}.")
        if self.grid is not None and min(self.grid) < 8:
            raise ConfigError(f"grid must have at least 8 cells per side; got {self.grid}.")
        if "csv" not in self.formats:
            object.__setattr__(self, "formats", frozenset(self.formats | {"csv"}))

    @property
    def caption(self) -> str:
        """One-line stamp of the run, used in plot captions and logs."""
        grid = "auto" if self.grid is None else f"{self.grid[0]}x{self.grid[1]}"
        return (
            f"emlab {self.suite} jmax={self.j_max} schedule={self.schedule.label} "
            f"variant={self.variant.value} grid={grid} tol={self.tol:g} seed={self.seed}"
        )


def thread_count(override: int | None = None) -> int:
    """Worker threads for internal pools: `override`, else EMLAB_THREADS, else the CPU count."""
    if override is not None:
        return max(1, override)
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return max(1, os.cpu_count() or 1)
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer; got {raw!r}.") from None
    return max(1, value)


# ─────────────────────────────────────────────
#  VALUE COERCION
# ─────────────────────────────────────────────

def _int(key: str, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key} must be an integer; got {text!r}.") from None


def _float(key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key} must be a number; got {text!r}.") from None


def _grid(text: str) -> tuple[int, int]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"grid must be NX,NY; got {text!r}.")
    return _int("grid", parts[0]), _int("grid", parts[1])


def _formats(text: str) -> frozenset[str]:
    chosen = frozenset(p.strip() for p in text.split(",") if p.strip())
    unknown = chosen - set(FORMATS)
    if not chosen or unknown:
        raise ConfigError(f"format must be a subset of {', '.join(FORMATS)}; got {text!r}.")
    return chosen


def coerce(key: str, text: str):
    """Turn one raw `key=value` string into its typed RunConfig value."""
    text = text.strip()
    try:
        if key == "suite":
            if text not in SUITES:
                raise ConfigError(f"suite must be one of {', '.join(SUITES)}; got {text!r}.")
            return text
        if key == "jmax":
            return _int(key, text)
        if key == "schedule":
            return AmplitudeSchedule.parse(text)
        if key == "variant":
            return Variant(text)
        if key == "grid":
            return _grid(text)
        if key == "tol":
            return _float(key, text)
        if key in ("seed", "threads"):
            return _int(key, text)
        if key == "out":
            return Path(text)
        if key == "format":
            return _formats(text)
    except ConfigError:
        raise
    except (InvalidArgument, ValueError) as e:
        raise ConfigError(f"invalid value for {key}: {e}") from e
    raise ConfigError(f"unknown config key {key!r}; expected one of {', '.join(CONFIG_KEYS)}.")


# ─────────────────────────────────────────────
#  CONFIG FILE
# ─────────────────────────────────────────────

def parse_config_text(text: str) -> dict:
    """
    Parse `key=value` lines into typed values.
    Blank lines and `#` comments are skipped; unknown keys are rejected.
    """
    values = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {number} must be key=value; got {raw.strip()!r}.")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = coerce(key, value)
    return values


def load_config_file(path: str | Path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e.strerror}.") from e
    except UnicodeDecodeError:
        raise ConfigError(f"config file {path} must be UTF-8.") from None
    return parse_config_text(text)


_FIELD_FOR_KEY = {"jmax": "j_max", "out": "out_dir", "format": "formats"}


def build_config(suite: str, file_values: dict, flag_values: dict) -> RunConfig:
    """flag > file > default, for the sub-command `suite`."""
    file_suite = file_values.get("suite")
    if file_suite is not None and file_suite != suite:
        raise ConfigError(f"config file selects suite {file_suite!r} but the command is {suite!r}.")

    cfg = RunConfig(suite=suite, j_max=DEFAULT_JMAX[suite])
    merged = {**file_values, **{k: v for k, v in flag_values.items() if v is not None}}
    merged.pop("suite", None)
    updates = {_FIELD_FOR_KEY.get(key, key): value for key, value in merged.items()}
    return replace(cfg, **updates)

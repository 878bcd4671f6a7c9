"""
emlab — Coefficient Construction
Lacunary sequences, the cutoff ψ, amplitude schedules and the layered coefficient
fields α (Limit) and α_j (Level j), with analytic gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from emlab.errors import InvalidArgument, UndefinedGradientError


class Variant(str, Enum):
    STANDARD = "standard"
    STRONG = "strong"

    def weight(self, j: int) -> int:
        """Growth weight w(j) in h_j ≥ w(j)·k_j."""
        return j if self is Variant.STANDARD else j**3


class ScheduleKind(str, Enum):
    SQRT = "sqrt"
    LINEAR = "linear"
    SCALED = "scaled"
    FLAT = "flat"


# ─────────────────────────────────────────────
#  LACUNARY PAIRS
# ─────────────────────────────────────────────

@dataclass(frozen=True)
class LacunaryPair:
    """Frequencies h and layer scales k, 1-indexed in every public accessor."""

    h: tuple[int, ...]
    k: tuple[int, ...]
    variant: Variant = Variant.STANDARD

    def __post_init__(self):
        object.__setattr__(self, "h", tuple(int(v) for v in self.h))
        object.__setattr__(self, "k", tuple(int(v) for v in self.k))
        object.__setattr__(self, "variant", Variant(self.variant))
        if len(self.h) == 0 or len(self.h) != len(self.k):
            raise InvalidArgument(
                f"h and k must be non-empty and of equal length; got {len(self.h)} and {len(self.k)}."
            )
        if min(self.h) < 1 or min(self.k) < 1:
            raise InvalidArgument("h and k entries must be positive integers.")

    def __len__(self) -> int:
        return len(self.h)

    def frequency(self, j: int) -> int:
        self.check_index(j)
        return self.h[j - 1]

    def scale(self, j: int) -> int:
        self.check_index(j)
        return self.k[j - 1]

    def next_scale(self, j: int) -> int:
        """k_{j+1}, or 2·k_j when the pair stops at j."""
        self.check_index(j)
        return self.k[j] if j < len(self) else 2 * self.k[j - 1]

    def check_index(self, j: int) -> None:
        if not 1 <= j <= len(self):
            raise InvalidArgument(f"index j must lie in [1, {len(self)}]; got {j}.")


@dataclass(frozen=True)
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def make_lacunary(j_max: int, variant: Variant | str = Variant.STANDARD) -> LacunaryPair:
    """
    Minimal deterministic pair: k_1 = 2, k_{j+1} = 2k_j;
    h_1 = max(4, w(1)k_1), h_{j+1} = max(4h_j, w(j+1)k_{j+1}).
    """
    if int(j_max) != j_max or j_max < 1:
        raise InvalidArgument(f"j_max must be a positive integer; got {j_max}.")
    variant = Variant(variant)

    h, k = [], []
    for j in range(1, int(j_max) + 1):
        kj = 2 if j == 1 else 2 * k[-1]
        floor_h = 4 if j == 1 else 4 * h[-1]
        k.append(kj)
        h.append(max(floor_h, variant.weight(j) * kj))
    return LacunaryPair(tuple(h), tuple(k), variant)


def validate_lacunary(pair: LacunaryPair) -> ValidationReport:
    """Report every violated inequality; never raises."""
    violations = []
    w_label = "j" if pair.variant is Variant.STANDARD else "j³"

    for j in range(1, len(pair) + 1):
        hj, kj = pair.h[j - 1], pair.k[j - 1]
        if hj < 2:
            violations.append(f"h[{j}] ≥ 2 fails at j={j} ({hj})")
        if kj < 2:
            violations.append(f"k[{j}] ≥ 2 fails at j={j} ({kj})")
        w = pair.variant.weight(j)
        if hj < w * kj:
            violations.append(f"h[{j}] ≥ {w_label}·k[{j}] fails at j={j} ({hj} < {w * kj})")
        if j < len(pair):
            h_next, k_next = pair.h[j], pair.k[j]
            if h_next < 4 * hj:
                violations.append(f"h[{j + 1}] ≥ 4·h[{j}] fails at j={j} ({h_next} < {4 * hj})")
            if k_next < 2 * kj:
                violations.append(f"k[{j + 1}] ≥ 2·k[{j}] fails at j={j} ({k_next} < {2 * kj})")

    return ValidationReport(violations)


def dump_pair(pair: LacunaryPair) -> str:
    return (
        "h: " + " ".join(str(v) for v in pair.h) + "\n"
        + "k: " + " ".join(str(v) for v in pair.k) + "\n"
        + f"variant: {pair.variant.value}\n"
    )


def parse_pair(text: str) -> LacunaryPair:
    """
    Parse the three-line pair format. Raises InvalidArgument naming the bad line.
    """
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        key, sep, value = line.partition(":")
        key = key.strip().lower()
        if not sep or key not in ("h", "k", "variant"):
            raise InvalidArgument(f"Line {lineno} is not 'h:', 'k:' or 'variant:': {raw!r}.")
        if key in fields:
            raise InvalidArgument(f"Line {lineno} repeats key '{key}'.")
        fields[key] = (lineno, value.strip())

    missing = [key for key in ("h", "k", "variant") if key not in fields]
    if missing:
        raise InvalidArgument(f"Pair file is missing: {', '.join(missing)}.")

    lists = {}
    for key in ("h", "k"):
        lineno, value = fields[key]
        try:
            lists[key] = tuple(int(tok) for tok in value.split())
        except ValueError:
            raise InvalidArgument(f"Line {lineno}: '{key}' must be whitespace-separated integers.")

    lineno, value = fields["variant"]
    try:
        variant = Variant(value.lower())
    except ValueError:
        raise InvalidArgument(f"Line {lineno}: variant must be 'standard' or 'strong'; got {value!r}.")

    return LacunaryPair(lists["h"], lists["k"], variant)


def save_pair(pair: LacunaryPair, path: str | Path) -> None:
    Path(path).write_text(dump_pair(pair), encoding="utf-8")


def load_pair(path: str | Path) -> LacunaryPair:
    return parse_pair(Path(path).read_text(encoding="utf-8"))


# ─────────────────────────────────────────────
#  AMPLITUDE SCHEDULES
# ─────────────────────────────────────────────

@dataclass(frozen=True)
class AmplitudeSchedule:
    kind: ScheduleKind = ScheduleKind.SQRT
    scale: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ScheduleKind(self.kind))
        if self.kind is ScheduleKind.SCALED:
            if self.scale is None or not 0.0 < self.scale < 1.0:
                raise InvalidArgument(f"scaled schedule needs 0 < scale < 1; got {self.scale}.")
        elif self.scale is not None:
            raise InvalidArgument(f"only the scaled schedule takes a scale; got {self.scale} for {self.kind.value}.")

    @classmethod
    def parse(cls, text: str) -> "AmplitudeSchedule":
        """'sqrt', 'linear', 'flat' or 'scaled:A0'."""
        name, _, arg = text.strip().lower().partition(":")
        try:
            kind = ScheduleKind(name)
        except ValueError:
            raise InvalidArgument(f"schedule must be sqrt, linear, flat or scaled:A0; got {text!r}.")
        if kind is ScheduleKind.SCALED:
            try:
                return cls(kind, float(arg))
            except ValueError:
                raise InvalidArgument(f"scaled schedule needs a numeric amplitude; got {text!r}.")
        if arg:
            raise InvalidArgument(f"schedule {name} takes no argument; got {text!r}.")
        return cls(kind)

    @property
    def label(self) -> str:
        if self.kind is ScheduleKind.SCALED:
            return f"scaled:{self.scale:g}"
        return self.kind.value

    @property
    def base_amplitude(self) -> float:
        """A₀ = a_1."""
        return self.amplitude(1)

    def amplitude(self, j: int) -> float:
        if j < 1:
            raise InvalidArgument(f"amplitude index must be ≥ 1; got {j}.")
        if self.kind is ScheduleKind.SQRT:
            return 1.0 / (4.0 * math.pi * math.sqrt(j))
        if self.kind is ScheduleKind.LINEAR:
            return 1.0 / (4.0 * math.pi * j)
        if self.kind is ScheduleKind.SCALED:
            return self.scale / math.sqrt(j)
        return 0.0

    def amplitudes(self, n: int) -> np.ndarray:
        return np.array([self.amplitude(j) for j in range(1, n + 1)], dtype=float)


# ─────────────────────────────────────────────
#  CUTOFF ψ
# ─────────────────────────────────────────────

def _bump(s):
    """f(s) = exp(-1/s) for s > 0, else 0."""
    s = np.asarray(s, dtype=float)
    positive = s > 0
    safe = np.where(positive, s, 1.0)
    return np.where(positive, np.exp(-1.0 / safe), 0.0)


def _bump_derivative(s):
    s = np.asarray(s, dtype=float)
    positive = s > 0
    safe = np.where(positive, s, 1.0)
    return np.where(positive, np.exp(-1.0 / safe) / safe**2, 0.0)


def cutoff_eval(t):
    """ψ(t) = f(2-|t|) / (f(2-|t|) + f(|t|-1)); scalar in, scalar out."""
    s = np.abs(np.asarray(t, dtype=float))
    up, down = _bump(2.0 - s), _bump(s - 1.0)
    value = up / (up + down)
    return float(value) if value.ndim == 0 else value


def cutoff_derivative(t):
    t = np.asarray(t, dtype=float)
    s = np.abs(t)
    u, v = 2.0 - s, s - 1.0
    fu, fv = _bump(u), _bump(v)
    dfu, dfv = _bump_derivative(u), _bump_derivative(v)
    # d/ds of fu/(fu+fv) with du/ds = -1, dv/ds = +1
    d_ds = -(dfu * fv + fu * dfv) / (fu + fv) ** 2
    value = np.sign(t) * d_ds
    return float(value) if value.ndim == 0 else value


# ─────────────────────────────────────────────
#  φ_j
# ─────────────────────────────────────────────

def _phase(h, x):
    """2π·frac(h·x); reducing before scaling keeps large h·x accurate."""
    return 2.0 * np.pi * np.mod(h * x, 1.0)


def phi(j: int, x, schedule: AmplitudeSchedule, pair: LacunaryPair):
    """φ_j(x) = 1 + a_j cos(2π h_j x)."""
    h = pair.frequency(j)
    value = 1.0 + schedule.amplitude(j) * np.cos(_phase(h, np.asarray(x, dtype=float)))
    return float(value) if np.ndim(value) == 0 else value


def phi_derivative(j: int, x, schedule: AmplitudeSchedule, pair: LacunaryPair):
    h = pair.frequency(j)
    value = -2.0 * np.pi * h * schedule.amplitude(j) * np.sin(_phase(h, np.asarray(x, dtype=float)))
    return float(value) if np.ndim(value) == 0 else value


# ─────────────────────────────────────────────
#  COEFFICIENT FIELDS
# ─────────────────────────────────────────────

@dataclass(frozen=True)
class CoefficientField:
    """
    α when `level` is None (Limit), α_j when `level` = j (Level(j)).

    A finite pair of length J resolves the Limit field only down to |y| ≥ 1/k_J;
    deeper points need φ_{J+1} and raise InvalidArgument.
    """

    pair: LacunaryPair
    schedule: AmplitudeSchedule = AmplitudeSchedule()
    level: int | None = None

    def __post_init__(self):
        if self.level is not None:
            self.pair.check_index(self.level)

    @property
    def is_limit(self) -> bool:
        return self.level is None

    @property
    def max_frequency(self) -> int:
        """Largest frequency the field can show."""
        return self.pair.h[-1] if self.level is None else self.pair.h[self.level - 1]

    def _tables(self):
        n = len(self.pair)
        return (
            np.asarray(self.pair.h, dtype=float),
            np.asarray(self.pair.k, dtype=float),
            self.schedule.amplitudes(n),
        )

    def _layers(self, s):
        """
        Layer index per point: 0 above 1/k_1, i for 1/k_{i+1} ≤ s < 1/k_i,
        J below 1/k_J. Level(j) points below 1/k_j are tagged -1.
        """
        _, k, _ = self._tables()
        thresholds = np.sort(1.0 / k)
        index = len(k) - np.searchsorted(thresholds, s, side="right")
        if self.level is not None:
            index = np.where(s < 1.0 / k[self.level - 1], -1, index)
        elif np.any((index == len(k)) & (s > 0)):
            raise InvalidArgument(
                f"Limit field needs |y| ≥ 1/k_{len(k)} = {1.0 / k[-1]:g} (or y = 0) with a pair of length {len(k)}."
            )
        return index


def _phi_table(idx, x, h, a):
    """φ_idx(x) and φ'_idx(x) for 1-based index arrays."""
    hh, aa = h[idx - 1], a[idx - 1]
    ph = _phase(hh, x)
    return 1.0 + aa * np.cos(ph), -2.0 * np.pi * hh * aa * np.sin(ph)


def _evaluate(fld: CoefficientField, x, y, want_gradient: bool):
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    shape = x.shape
    x, y = x.ravel(), y.ravel()
    s = np.abs(y)
    h, k, a = fld._tables()
    J = len(k)

    layer = fld._layers(s)
    value = np.ones_like(x)
    gx = np.zeros_like(x)
    gy = np.zeros_like(x)

    top = layer == 0
    if top.any():
        value[top], gx[top] = _phi_table(np.ones(top.sum(), dtype=int), x[top], h, a)

    blend = (layer >= 1) & (layer <= J - 1)
    if blend.any():
        i = layer[blend]
        xb, sb = x[blend], s[blend]
        lo, dlo = _phi_table(i, xb, h, a)
        hi, dhi = _phi_table(i + 1, xb, h, a)
        k_next = k[i]
        psi = np.asarray(cutoff_eval(k_next * sb))
        value[blend] = psi * hi + (1.0 - psi) * lo
        gx[blend] = psi * dhi + (1.0 - psi) * dlo
        gy[blend] = k_next * np.asarray(cutoff_derivative(k_next * sb)) * (hi - lo) * np.sign(y[blend])

    if fld.level is not None:
        bottom = layer == -1
        if bottom.any():
            idx = np.full(bottom.sum(), fld.level, dtype=int)
            value[bottom], gx[bottom] = _phi_table(idx, x[bottom], h, a)
    else:
        axis = s == 0
        if want_gradient and axis.any():
            raise UndefinedGradientError("the Limit field has no gradient on y = 0.")

    if want_gradient:
        return gx.reshape(shape), gy.reshape(shape)
    return value.reshape(shape)


def field_eval(fld: CoefficientField, x, y):
    """Piecewise layer evaluation; array-friendly, scalars return floats."""
    value = _evaluate(fld, x, y, want_gradient=False)
    return float(value) if value.ndim == 0 else value


def field_gradient(fld: CoefficientField, x, y):
    """(∂α/∂x, ∂α/∂y) from the closed-form layer formulas."""
    gx, gy = _evaluate(fld, x, y, want_gradient=True)
    if gx.ndim == 0:
        return float(gx), float(gy)
    return gx, gy

"""Lacunary pairs, amplitude schedules, the cutoff and the layered coefficient fields."""

import math

import numpy as np
import pytest

from emlab.construction import (
    AmplitudeSchedule,
    CoefficientField,
    LacunaryPair,
    ScheduleKind,
    Variant,
    cutoff_derivative,
    cutoff_eval,
    dump_pair,
    field_eval,
    field_gradient,
    load_pair,
    make_lacunary,
    parse_pair,
    phi,
    save_pair,
    validate_lacunary,
)
from emlab.errors import InvalidArgument, UndefinedGradientError


# ─────────────────────────────────────────────
#  PAIRS
# ─────────────────────────────────────────────

def test_minimal_standard_pair():
    pair = make_lacunary(5)
    assert pair.h == (4, 16, 64, 256, 1024)
    assert pair.k == (2, 4, 8, 16, 32)
    assert validate_lacunary(pair).ok


def test_strong_pair_meets_cubic_weight():
    pair = make_lacunary(4, Variant.STRONG)
    assert pair.h == (4, 32, 216, 1024)
    assert all(pair.frequency(j) >= j**3 * pair.scale(j) for j in range(1, 5))
    assert validate_lacunary(pair).ok


def test_validate_reports_each_violation():
    report = validate_lacunary(LacunaryPair((4, 8), (2, 4)))
    assert not report.ok
    assert report.violations == ["h[2] ≥ 4·h[1] fails at j=1 (8 < 16)"]


def test_make_lacunary_rejects_nonpositive():
    with pytest.raises(InvalidArgument):
        make_lacunary(0)


def test_pair_file_round_trip(tmp_path, strong_pair):
    path = tmp_path / "pair.txt"
    save_pair(strong_pair, path)
    assert path.read_text().splitlines()[0] == "h: 4 32 216 1024"
    assert load_pair(path) == strong_pair


def test_parse_pair_names_bad_line():
    with pytest.raises(InvalidArgument, match="Line 2"):
        parse_pair("h: 4 16\nk: 2 x\nvariant: standard\n")
    with pytest.raises(InvalidArgument, match="missing: variant"):
        parse_pair("h: 4\nk: 2\n")


def test_dump_pair_format(standard_pair):
    assert dump_pair(standard_pair).endswith("variant: standard\n")


def test_next_scale_falls_back_to_doubling():
    pair = make_lacunary(2)
    assert pair.next_scale(1) == 4
    assert pair.next_scale(2) == 8


# ─────────────────────────────────────────────
#  SCHEDULES
# ─────────────────────────────────────────────

def test_schedule_parse_and_amplitudes():
    assert AmplitudeSchedule.parse("sqrt").amplitude(4) == pytest.approx(1 / (8 * math.pi))
    assert AmplitudeSchedule.parse("linear").amplitude(2) == pytest.approx(1 / (8 * math.pi))
    scaled = AmplitudeSchedule.parse("scaled:0.5")
    assert scaled.amplitude(4) == pytest.approx(0.25)
    assert scaled.label == "scaled:0.5"
    assert AmplitudeSchedule.parse("flat").amplitudes(3).tolist() == [0.0, 0.0, 0.0]


@pytest.mark.parametrize("text", ["scaled:1.5", "scaled:0", "cubic", "sqrt:2"])
def test_schedule_parse_rejects(text):
    with pytest.raises(InvalidArgument):
        AmplitudeSchedule.parse(text)


def test_schedules_strictly_decrease():
    for kind in (ScheduleKind.SQRT, ScheduleKind.LINEAR):
        a = AmplitudeSchedule(kind).amplitudes(20)
        assert np.all(np.diff(a) < 0)


# ─────────────────────────────────────────────
#  CUTOFF
# ─────────────────────────────────────────────

def test_cutoff_plateaus_and_midpoint():
    assert cutoff_eval(0.0) == 1.0
    assert cutoff_eval(1.0) == 1.0
    assert cutoff_eval(-0.7) == 1.0
    assert cutoff_eval(2.0) == 0.0
    assert cutoff_eval(3.5) == 0.0
    assert cutoff_eval(1.5) == pytest.approx(0.5, abs=1e-15)
    assert cutoff_eval(-1.3) == pytest.approx(cutoff_eval(1.3), abs=1e-15)


def test_cutoff_derivative_matches_difference_quotient():
    t = np.linspace(1.05, 1.95, 19)
    step = 1e-6
    numeric = (cutoff_eval(t + step) - cutoff_eval(t - step)) / (2 * step)
    assert np.allclose(cutoff_derivative(t), numeric, rtol=1e-5, atol=1e-9)
    assert cutoff_derivative(0.5) == 0.0


# ─────────────────────────────────────────────
#  FIELDS
# ─────────────────────────────────────────────

def test_level_field_bounds_on_grid(standard_pair, sqrt_schedule):
    a1 = sqrt_schedule.amplitude(1)
    x, y = np.meshgrid(np.linspace(-1, 2, 512), np.linspace(0, 3, 512))
    for j in (1, 3, 5):
        alpha = field_eval(CoefficientField(standard_pair, sqrt_schedule, level=j), x, y)
        assert alpha.min() >= 1 - a1 - 1e-15
        assert alpha.max() <= 1 + a1 + 1e-15


def test_level_field_close_to_limit(standard_pair, sqrt_schedule):
    limit = CoefficientField(standard_pair, sqrt_schedule)
    # the finite pair resolves the limit down to 1/k_J
    x, y = np.meshgrid(np.linspace(0, 1, 301), np.linspace(1 / standard_pair.k[-1], 1.0, 301))
    for j in (2, 4):
        level = CoefficientField(standard_pair, sqrt_schedule, level=j)
        gap = np.abs(field_eval(level, x, y) - field_eval(limit, x, y)).max()
        assert gap <= 2 * sqrt_schedule.amplitude(j) + 1e-15


def test_level_field_bottom_is_phi(standard_pair, sqrt_schedule):
    fld = CoefficientField(standard_pair, sqrt_schedule, level=3)
    x = np.linspace(0, 1, 97)
    y = np.full_like(x, 0.5 / standard_pair.scale(3))
    assert np.allclose(field_eval(fld, x, y), phi(3, x, sqrt_schedule, standard_pair), atol=1e-15)
    gx, gy = field_gradient(fld, x, y)
    assert np.all(gy == 0.0)


def test_field_is_even_in_y(standard_pair, sqrt_schedule):
    fld = CoefficientField(standard_pair, sqrt_schedule, level=4)
    x, y = np.meshgrid(np.linspace(0, 1, 41), np.linspace(0.01, 0.8, 41))
    assert np.array_equal(field_eval(fld, x, y), field_eval(fld, x, -y))


def test_gradient_matches_finite_differences(standard_pair, sqrt_schedule, rng):
    fld = CoefficientField(standard_pair, sqrt_schedule, level=3)
    x = rng.uniform(0, 1, 100)
    y = rng.uniform(0.02, 1.5, 100)
    step = 1e-7
    gx, gy = field_gradient(fld, x, y)
    nx = (field_eval(fld, x + step, y) - field_eval(fld, x - step, y)) / (2 * step)
    ny = (field_eval(fld, x, y + step) - field_eval(fld, x, y - step)) / (2 * step)
    scale = np.maximum(np.hypot(gx, gy), 1e-3)
    assert np.all(np.abs(gx - nx) / scale < 1e-5)
    assert np.all(np.abs(gy - ny) / scale < 1e-5)


def test_level_field_equals_limit_above_its_layer(standard_pair, sqrt_schedule):
    limit = CoefficientField(standard_pair, sqrt_schedule)
    x = np.linspace(-1, 2, 61)
    for j in range(1, len(standard_pair) + 1):
        level = CoefficientField(standard_pair, sqrt_schedule, level=j)
        y = np.concatenate([np.geomspace(1 / standard_pair.scale(j), 2.0, 40), [1 / standard_pair.scale(j)]])
        xx, yy = np.meshgrid(x, np.concatenate([y, -y]))
        assert np.array_equal(field_eval(level, xx, yy), field_eval(limit, xx, yy)), j


def test_limit_gradient_matches_finite_differences(standard_pair, sqrt_schedule, rng):
    limit = CoefficientField(standard_pair, sqrt_schedule)
    x = rng.uniform(0, 1, 100)
    y = rng.uniform(0.04, 1.5, 100) * rng.choice([-1.0, 1.0], 100)
    step = 1e-7
    gx, gy = field_gradient(limit, x, y)
    nx = (field_eval(limit, x + step, y) - field_eval(limit, x - step, y)) / (2 * step)
    ny = (field_eval(limit, x, y + step) - field_eval(limit, x, y - step)) / (2 * step)
    scale = np.maximum(np.hypot(gx, gy), 1e-3)
    assert np.all(np.abs(gx - nx) / scale < 1e-5)
    assert np.all(np.abs(gy - ny) / scale < 1e-5)


def test_limit_field_on_axis(standard_pair, sqrt_schedule):
    limit = CoefficientField(standard_pair, sqrt_schedule)
    assert field_eval(limit, 0.3, 0.0) == 1.0
    with pytest.raises(UndefinedGradientError):
        field_gradient(limit, 0.3, 0.0)


def test_limit_field_needs_deeper_pair(standard_pair, sqrt_schedule):
    limit = CoefficientField(standard_pair, sqrt_schedule)
    with pytest.raises(InvalidArgument):
        field_eval(limit, 0.3, 0.25 / standard_pair.k[-1])


def test_flat_schedule_field_is_one(standard_pair, flat_schedule):
    fld = CoefficientField(standard_pair, flat_schedule, level=2)
    x, y = np.meshgrid(np.linspace(0, 1, 33), np.linspace(0, 1, 33))
    assert np.allclose(field_eval(fld, x, y), 1.0, atol=1e-15)


def test_level_out_of_range(standard_pair):
    with pytest.raises(InvalidArgument):
        CoefficientField(standard_pair, level=7)


def test_phi_plug_in_values(standard_pair, sqrt_schedule, linear_schedule):
    assert phi(1, 0.0, sqrt_schedule, standard_pair) == pytest.approx(1.0795775, abs=1e-7)
    assert phi(1, 1 / 8, sqrt_schedule, standard_pair) == pytest.approx(0.9204225, abs=1e-7)
    assert phi(2, 0.0, linear_schedule, standard_pair) == pytest.approx(1.0397887, abs=1e-7)
    with pytest.raises(InvalidArgument):
        phi(7, 0.0, sqrt_schedule, standard_pair)


def test_level_one_at_origin(standard_pair, sqrt_schedule):
    fld = CoefficientField(standard_pair, sqrt_schedule, level=1)
    assert field_eval(fld, 0.0, 0.0) == pytest.approx(1 + 1 / (4 * math.pi), rel=1e-15)

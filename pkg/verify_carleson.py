"""Kenig–Pipher functional: sampling, analytic lower bound and the growth along j."""

import math

import numpy as np
import pytest

from emlab.carleson import (
    KPSampling,
    Region,
    disk_offsets,
    dyadic_radii,
    kp_chain_constant,
    kp_functional,
    kp_local_density,
    kp_lower_bound_analytic,
)
from emlab.construction import AmplitudeSchedule, CoefficientField, LacunaryPair, make_lacunary
from emlab.errors import InvalidArgument, ResolutionError


QUICK = KPSampling(ball_centers=2, radii_per_center=2, quad_points=16, sup_samples=8)


def test_chain_constant():
    assert kp_chain_constant(AmplitudeSchedule.parse("sqrt")) == pytest.approx(math.sqrt(3) / 64, rel=1e-14)
    assert kp_chain_constant(AmplitudeSchedule.parse("linear")) == pytest.approx(math.sqrt(3) / 64, rel=1e-14)


def test_standard_lower_bounds(sqrt_schedule):
    pair = make_lacunary(5)
    c0 = kp_chain_constant(sqrt_schedule)
    expected = [4, 8, 64 / 3, 64, 204.8]
    for j, factor in enumerate(expected, start=1):
        assert kp_lower_bound_analytic(j, pair, sqrt_schedule) == pytest.approx(c0 * factor, rel=1e-12)


def test_linear_bound_decays_faster(sqrt_schedule, linear_schedule):
    pair = make_lacunary(4)
    for j in range(2, 5):
        ratio = kp_lower_bound_analytic(j, pair, sqrt_schedule) / kp_lower_bound_analytic(j, pair, linear_schedule)
        assert ratio == pytest.approx(j, rel=1e-12)


def test_strong_bound_grows_like_j5(strong_pair, sqrt_schedule):
    c0 = kp_chain_constant(sqrt_schedule)
    for j in range(1, 5):
        assert kp_lower_bound_analytic(j, strong_pair, sqrt_schedule) >= c0 * j**5


def test_bound_rejections(standard_pair, flat_schedule, sqrt_schedule):
    with pytest.raises(InvalidArgument):
        kp_lower_bound_analytic(2, standard_pair, flat_schedule)
    with pytest.raises(InvalidArgument, match="h_j ≥ 2k_j"):
        kp_lower_bound_analytic(2, LacunaryPair((4, 16), (2, 16)), sqrt_schedule)


def test_constant_field_has_zero_functional(standard_pair, flat_schedule):
    est = kp_functional(CoefficientField(standard_pair, flat_schedule, level=3), sampling=QUICK)
    assert est.value == 0.0


def test_quad_points_below_resolution(standard_pair, sqrt_schedule):
    fld = CoefficientField(standard_pair, sqrt_schedule, level=2)
    with pytest.raises(ResolutionError):
        kp_functional(fld, sampling=KPSampling(quad_points=8))


def test_limit_field_rejected(standard_pair, sqrt_schedule):
    with pytest.raises(InvalidArgument):
        kp_functional(CoefficientField(standard_pair, sqrt_schedule), sampling=QUICK)


def test_disk_offsets_nested_and_inside():
    small, large = disk_offsets(8), disk_offsets(32)
    assert np.array_equal(large[:8], small)
    assert np.all(np.hypot(large[:, 0], large[:, 1]) < 1.0)


def test_local_density_monotone_in_samples(standard_pair, sqrt_schedule):
    fld = CoefficientField(standard_pair, sqrt_schedule, level=3)
    values = [kp_local_density(fld, 0.37, 0.05, n) for n in (4, 16, 64)]
    assert values == sorted(values)
    with pytest.raises(InvalidArgument):
        kp_local_density(fld, 0.37, 0.0, 4)


def test_functional_monotone_in_sup_samples(standard_pair, sqrt_schedule):
    fld = CoefficientField(standard_pair, sqrt_schedule, level=2)
    coarse = kp_functional(fld, sampling=KPSampling(2, 2, 16, 8))
    fine = kp_functional(fld, sampling=KPSampling(2, 2, 16, 32))
    assert fine.value >= coarse.value


def test_amplitude_scaling_is_quadratic(standard_pair):
    big = CoefficientField(standard_pair, AmplitudeSchedule.parse("scaled:0.5"), level=2)
    small = CoefficientField(standard_pair, AmplitudeSchedule.parse("scaled:0.25"), level=2)
    ratio = kp_functional(big, sampling=QUICK).value / kp_functional(small, sampling=QUICK).value
    assert ratio == pytest.approx(4.0, rel=1e-10)


def test_dyadic_radii_range(standard_pair, sqrt_schedule):
    fld = CoefficientField(standard_pair, sqrt_schedule, level=3)
    assert dyadic_radii(fld, Region(), 10) == [1 / 16, 1 / 8, 1 / 4, 1 / 2]
    assert dyadic_radii(fld, Region(y1=0.2), 2) == [1 / 16, 1 / 8]


def test_thread_count_does_not_change_result(standard_pair, sqrt_schedule):
    fld = CoefficientField(standard_pair, sqrt_schedule, level=2)
    assert kp_functional(fld, sampling=QUICK, threads=1) == kp_functional(fld, sampling=QUICK, threads=3)


@pytest.mark.slow
def test_functional_dominates_bound_and_grows(sqrt_schedule):
    pair = make_lacunary(5)
    values = []
    for j in range(1, 6):
        est = kp_functional(CoefficientField(pair, sqrt_schedule, level=j))
        assert est.value >= kp_lower_bound_analytic(j, pair, sqrt_schedule)
        values.append(est.value)
    assert np.all(np.diff(values) > 0)

"""Weight constants over dyadic interval families."""

import math

import numpy as np
import pytest

from emlab.construction import AmplitudeSchedule, make_lacunary
from emlab.errors import InvalidArgument, ResourceLimitError, ZeroAverageError
from emlab.riesz import RieszProduct, riesz_l2_closed_form
from emlab.weights import (
    T_STAR,
    IntervalFamily,
    WeightSample,
    a_inf_constant,
    llogl_constant,
    luxemburg_norm,
    rh_constant,
    riesz_weight,
    weight_constants,
    young,
)


@pytest.fixture
def step_weight():
    return WeightSample((0.0, 1.0), np.repeat([1.0, 3.0], 32))


def test_constant_weight_is_ideal():
    w = WeightSample((0.0, 1.0), np.full(256, 7.5))
    fam = IntervalFamily(8)
    for q in (1.5, 2.0, 4.0):
        assert rh_constant(w, q, fam) == pytest.approx(1.0, abs=1e-12)
    assert a_inf_constant(w, fam) == pytest.approx(1.0, abs=1e-12)


def test_constant_llogl_is_inverse_of_young_root():
    assert young(T_STAR) == pytest.approx(1.0, abs=1e-14)
    assert T_STAR == pytest.approx(0.7957, abs=1e-4)
    w = WeightSample((0.0, 1.0), np.ones(64))
    assert llogl_constant(w, IntervalFamily(6)) == pytest.approx(1 / T_STAR, rel=1e-9)


def test_step_weight_on_whole_interval(step_weight):
    whole = IntervalFamily(0)
    assert abs(rh_constant(step_weight, 2.0, whole) - math.sqrt(5) / 2) <= 1e-12
    assert abs(a_inf_constant(step_weight, whole) - 2 / math.sqrt(3)) <= 1e-12


def test_step_weight_children_are_constant(step_weight):
    # every finer member sits inside one step
    assert rh_constant(step_weight, 2.0, IntervalFamily(3)) == pytest.approx(math.sqrt(5) / 2, abs=1e-12)


def test_constants_scale_invariant(step_weight, rng):
    w = WeightSample((0.0, 1.0), rng.uniform(0.5, 2.0, 128))
    scaled = WeightSample((0.0, 1.0), 3.7 * w.values)
    fam = IntervalFamily(5)
    assert rh_constant(scaled, 2.0, fam) == pytest.approx(rh_constant(w, 2.0, fam), rel=1e-12)
    assert a_inf_constant(scaled, fam) == pytest.approx(a_inf_constant(w, fam), rel=1e-12)
    assert llogl_constant(scaled, fam) >= 1.0


def test_rh_nondecreasing_in_q(rng):
    w = WeightSample((0.0, 1.0), rng.uniform(0.1, 5.0, 64))
    fam = IntervalFamily(4)
    values = [rh_constant(w, q, fam) for q in (1.5, 2.0, 3.0, 6.0)]
    assert values == sorted(values)


def test_riesz_weight_rh2_matches_closed_form(standard_pair, sqrt_schedule):
    for j in range(1, 6):
        rp = RieszProduct(standard_pair, sqrt_schedule, j)
        w = riesz_weight(rp)
        assert len(w.values) == 16 * standard_pair.frequency(j)
        assert abs(rh_constant(w, 2.0, IntervalFamily(0)) - riesz_l2_closed_form(rp)) <= 1e-8


def test_stress_rh2_grows():
    stress = AmplitudeSchedule.parse("scaled:0.9")
    pair = make_lacunary(16)
    near = rh_constant(riesz_weight(RieszProduct(pair, stress, 4)), 2.0, IntervalFamily(0))
    far = riesz_l2_closed_form(RieszProduct(pair, stress, 16))
    assert far >= 1.05 * near


def test_zero_average_member_is_named():
    w = WeightSample((0.0, 1.0), np.array([0.0, 0.0, 1.0, 1.0]))
    with pytest.raises(ZeroAverageError) as info:
        rh_constant(w, 2.0, IntervalFamily(1))
    assert info.value.member == (0.0, 0.5)


def test_a_inf_rejects_zero_cells():
    w = WeightSample((0.0, 1.0), np.array([0.0, 1.0, 1.0, 1.0]))
    with pytest.raises(InvalidArgument):
        a_inf_constant(w, IntervalFamily(0))
    assert weight_constants(w, [2.0], IntervalFamily(0)).a_inf == math.inf


def test_family_deeper_than_grid():
    w = WeightSample((0.0, 1.0), np.ones(8))
    with pytest.raises(InvalidArgument):
        rh_constant(w, 2.0, IntervalFamily(4))


def test_family_members():
    w = WeightSample((-1.0, 1.0), np.ones(8))
    members = IntervalFamily(2).members(w)
    assert len(members) == IntervalFamily(2).member_count == 7
    assert members[:3] == [(-1.0, 1.0), (-1.0, 0.0), (0.0, 1.0)]


@pytest.mark.parametrize("values", [np.ones(6), -np.ones(4), np.zeros(4)])
def test_weight_sample_validation(values):
    with pytest.raises(InvalidArgument):
        WeightSample((0.0, 1.0), values)


def test_luxemburg_definition(rng):
    values = rng.uniform(0.0, 4.0, 256)
    lam = luxemburg_norm(values)
    assert np.mean(young(values / lam)) == pytest.approx(1.0, abs=1e-8)


def test_step_weight_depth_one_a_inf(step_weight):
    assert a_inf_constant(step_weight, IntervalFamily(1)) == pytest.approx(2 / math.sqrt(3), abs=1e-12)


def test_step_llogl_exceeds_constant(step_weight):
    assert llogl_constant(step_weight, IntervalFamily(0)) > 1 / T_STAR


def test_constants_grow_with_depth(rng):
    w = WeightSample((0.0, 1.0), rng.lognormal(0.0, 1.0, 256))
    rh = [rh_constant(w, 2.0, IntervalFamily(d)) for d in range(6)]
    a_inf = [a_inf_constant(w, IntervalFamily(d)) for d in range(6)]
    assert rh == sorted(rh)
    assert a_inf == sorted(a_inf)


def test_riesz_weight_respects_cell_budget(sqrt_schedule):
    pair = make_lacunary(11)
    with pytest.raises(ResourceLimitError):
        riesz_weight(RieszProduct(pair, sqrt_schedule, 11))
    with pytest.raises(ResourceLimitError):
        riesz_weight(RieszProduct(pair, sqrt_schedule, 3), cell_budget=2**9)
    assert len(riesz_weight(RieszProduct(pair, sqrt_schedule, 3), cell_budget=2**10).values) == 2**10

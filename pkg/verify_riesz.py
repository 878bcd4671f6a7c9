"""Riesz products: expansions, norms, the distribution function and concentration diagnostics."""

import math

import numpy as np
import pytest
from scipy.integrate import simpson

import emlab.riesz as riesz_module
from emlab.construction import AmplitudeSchedule, LacunaryPair, make_lacunary
from emlab.errors import InvalidArgument, ResolutionError, ResourceLimitError
from emlab.riesz import (
    RieszProduct,
    l2_limit_closed_form,
    riesz_cdf,
    riesz_eval,
    riesz_fourier,
    riesz_l1,
    riesz_l1_quadrature,
    riesz_l2,
    riesz_l2_closed_form,
    riesz_lp,
    riesz_mean,
    singularity_diagnostics,
)


@pytest.fixture(scope="module")
def pair12():
    return make_lacunary(12)


def test_expansion_has_three_to_the_j_terms(standard_pair, sqrt_schedule):
    for j in (1, 3, 5):
        expansion = riesz_fourier(RieszProduct(standard_pair, sqrt_schedule, j))
        assert len(expansion) == 3**j
        assert expansion.coefficient(0) == 1.0
        assert np.all(np.diff(expansion.frequencies) > 0)


def test_expansion_order_one(standard_pair, sqrt_schedule):
    a = sqrt_schedule.amplitude(1)
    expansion = riesz_fourier(RieszProduct(standard_pair, sqrt_schedule, 1)).as_dict()
    assert expansion == {-4: a / 2, 0: 1.0, 4: a / 2}


def test_expansion_matches_pointwise_product(standard_pair, sqrt_schedule, rng):
    rp = RieszProduct(standard_pair, sqrt_schedule, 4)
    expansion = riesz_fourier(rp)
    x = rng.uniform(0, 1, 50)
    series = np.cos(2 * np.pi * np.outer(x, expansion.frequencies)) @ expansion.coefficients
    assert np.allclose(series, riesz_eval(rp, x), atol=1e-13)


def test_expansion_budget(sqrt_schedule):
    rp = RieszProduct(make_lacunary(17), sqrt_schedule, 17)
    with pytest.raises(ResourceLimitError):
        riesz_fourier(rp)


@pytest.mark.parametrize("schedule", ["sqrt", "linear"])
def test_l1_identity(pair12, schedule):
    schedule = AmplitudeSchedule.parse(schedule)
    for j in range(1, 13):
        assert abs(riesz_l1(RieszProduct(pair12, schedule, j)) - 1.0) <= 1e-10


@pytest.mark.parametrize("schedule", ["sqrt", "linear"])
def test_parseval_closed_form(pair12, schedule):
    schedule = AmplitudeSchedule.parse(schedule)
    for j in range(1, 13):
        rp = RieszProduct(pair12, schedule, j)
        closed = math.prod(1 + a**2 / 2 for a in schedule.amplitudes(j))
        assert abs(riesz_l2(rp) ** 2 - closed) <= 1e-8
        assert riesz_l2_closed_form(rp) == pytest.approx(math.sqrt(closed), rel=1e-15)


def test_fourier_and_quadrature_routes_agree(pair12, sqrt_schedule):
    for j in range(1, 9):
        rp = RieszProduct(pair12, sqrt_schedule, j)
        assert abs(riesz_lp(rp, 2.0) - riesz_l2(rp)) <= 1e-8
        assert abs(riesz_l1_quadrature(rp) - 1.0) <= 1e-12


def test_quadrature_below_resolution(standard_pair, sqrt_schedule):
    rp = RieszProduct(standard_pair, sqrt_schedule, 3)
    with pytest.raises(ResolutionError):
        riesz_l1_quadrature(rp, grid_size=512)


def test_lp_rejects_small_p(standard_pair, sqrt_schedule):
    with pytest.raises(InvalidArgument):
        riesz_lp(RieszProduct(standard_pair, sqrt_schedule, 2), 1.0)


def test_order_out_of_range(standard_pair, sqrt_schedule):
    with pytest.raises(InvalidArgument):
        RieszProduct(standard_pair, sqrt_schedule, 0)


def test_sqrt_dominates_linear():
    sqrt = np.cumprod(1 + AmplitudeSchedule.parse("sqrt").amplitudes(12) ** 2 / 2)
    linear = np.cumprod(1 + AmplitudeSchedule.parse("linear").amplitudes(12) ** 2 / 2)
    assert np.all(sqrt > linear)


def test_linear_products_converge_to_limit():
    linear = AmplitudeSchedule.parse("linear")
    limit = l2_limit_closed_form(linear)
    products = np.cumprod(1 + linear.amplitudes(2000) ** 2 / 2)
    gaps = limit - products
    assert np.all(gaps > 0)
    assert np.all(np.diff(gaps) < 0)
    assert gaps[-1] < 2e-6


def test_limit_closed_form_kinds():
    assert l2_limit_closed_form(AmplitudeSchedule.parse("flat")) == 1.0
    assert l2_limit_closed_form(AmplitudeSchedule.parse("sqrt")) is None


def test_cdf_endpoints_and_monotone(standard_pair, sqrt_schedule):
    rp = RieszProduct(standard_pair, sqrt_schedule, 3)
    assert riesz_cdf(rp, 0.0) == 0.0
    assert riesz_cdf(rp, 1.0) == pytest.approx(1.0, abs=1e-12)
    values = riesz_cdf(rp, np.linspace(0, 1, 2001))
    assert np.all(np.diff(values) > 0)


def test_cdf_matches_quadrature(standard_pair, sqrt_schedule):
    rp = RieszProduct(standard_pair, sqrt_schedule, 2)
    x = 0.3137
    grid = np.linspace(0, x, 20001)
    assert riesz_cdf(rp, x) == pytest.approx(simpson(riesz_eval(rp, grid), x=grid), abs=1e-10)


def test_cdf_domain(standard_pair, sqrt_schedule):
    with pytest.raises(InvalidArgument):
        riesz_cdf(RieszProduct(standard_pair, sqrt_schedule, 2), 1.5)


def test_flat_schedule_diagnostics(standard_pair):
    rp = RieszProduct(standard_pair, AmplitudeSchedule.parse("flat"), 3)
    diag = singularity_diagnostics(rp, 1024, [0.5, 0.9, 1.0])
    assert diag.mean == 1.0
    assert diag.median == 1.0
    assert diag.mass_support_fraction == {0.5: 0.5, 0.9: 0.900390625, 1.0: 1.0}
    assert not diag.sampled


def test_diagnostics_concentrate_with_j(pair12):
    stress = AmplitudeSchedule.parse("scaled:0.9")
    low = singularity_diagnostics(RieszProduct(pair12, stress, 2), 2**10, [0.9])
    high = singularity_diagnostics(RieszProduct(pair12, stress, 6), 2**16, [0.9])
    assert high.median < low.median
    assert high.mass_support_fraction[0.9] < low.mass_support_fraction[0.9]
    assert abs(high.mean - 1.0) < 1e-12


def test_diagnostics_subsample_over_budget(pair12, sqrt_schedule):
    rp = RieszProduct(pair12, sqrt_schedule, 6)
    full = singularity_diagnostics(rp, 2**16, [0.9])
    sampled = singularity_diagnostics(rp, 2**16, [0.9], cell_budget=2**12, seed=3)
    again = singularity_diagnostics(rp, 2**16, [0.9], cell_budget=2**12, seed=3)
    assert sampled.sampled and sampled.mean == 1.0
    assert sampled.mean_standard_error == 0.0
    assert sampled == again
    assert sampled.sample_mean == pytest.approx(full.mean, abs=0.01)


def test_subsampled_mean_for_repeated_frequencies():
    pair = LacunaryPair((4, 4), (2, 2))
    rp = RieszProduct(pair, AmplitudeSchedule.parse("scaled:0.9"), 2)
    a1, a2 = rp.amplitudes
    full = singularity_diagnostics(rp, 2**10, [0.9])
    sampled = singularity_diagnostics(rp, 2**10, [0.9], cell_budget=2**8, seed=1)
    assert sampled.sampled
    assert full.mean == pytest.approx(1 + a1 * a2 / 2, rel=1e-12)
    assert sampled.mean == pytest.approx(full.mean, rel=1e-12)
    assert sampled.mean == pytest.approx(riesz_l1(rp), rel=1e-12)


def test_mean_from_split_expansion(standard_pair, sqrt_schedule):
    for j in (1, 2, 5, 6):
        assert riesz_mean(RieszProduct(standard_pair, sqrt_schedule, j)) == 1.0
    crowded = LacunaryPair((4, 8, 12, 16, 20), (2, 4, 6, 8, 10))
    stress = AmplitudeSchedule.parse("scaled:0.9")
    for j in range(1, 6):
        rp = RieszProduct(crowded, stress, j)
        assert riesz_mean(rp) == pytest.approx(riesz_fourier(rp).coefficient(0), rel=1e-13)
    assert riesz_mean(RieszProduct(crowded, stress, 5)) > 1.0
    with pytest.raises(ResourceLimitError):
        riesz_mean(RieszProduct(crowded, stress, 3), max_order=2)


def test_mean_estimated_past_split_budget(monkeypatch, pair12, sqrt_schedule):
    def exhausted(rp, max_order=0):
        raise ResourceLimitError("split expansion over budget")

    monkeypatch.setattr(riesz_module, "riesz_mean", exhausted)
    diag = singularity_diagnostics(RieszProduct(pair12, sqrt_schedule, 6), 2**16, [0.9], cell_budget=2**12, seed=3)
    assert diag.mean == diag.sample_mean
    assert diag.mean_standard_error > 0
    assert abs(diag.mean - 1.0) <= 4 * diag.mean_standard_error


def test_diagnostics_resolution(standard_pair, sqrt_schedule):
    with pytest.raises(ResolutionError):
        singularity_diagnostics(RieszProduct(standard_pair, sqrt_schedule, 3), 256, [0.9])


def test_pointwise_values_at_origin(standard_pair, sqrt_schedule):
    a1 = 1 / (4 * math.pi)
    assert riesz_eval(RieszProduct(standard_pair, sqrt_schedule, 1), 0.0) == pytest.approx(1 + a1, rel=1e-15)
    two = riesz_eval(RieszProduct(standard_pair, sqrt_schedule, 2), 0.0)
    assert two == pytest.approx((1 + a1) * (1 + a1 / math.sqrt(2)), rel=1e-15)
    assert two == pytest.approx(1.1403252, abs=1e-7)


def test_positive_everywhere(pair12, sqrt_schedule, rng):
    values = riesz_eval(RieszProduct(pair12, sqrt_schedule, 12), rng.uniform(0, 1, 10_000))
    assert values.min() > (1 - 1 / (4 * math.pi)) ** 12


def test_two_factor_expansion(standard_pair, sqrt_schedule):
    expansion = riesz_fourier(RieszProduct(standard_pair, sqrt_schedule, 2))
    assert expansion.frequencies.tolist() == [-20, -16, -12, -4, 0, 4, 12, 16, 20]
    a1, a2 = sqrt_schedule.amplitudes(2)
    assert expansion.coefficient(20) == pytest.approx(a1 * a2 / 4, rel=1e-15)
    assert expansion.coefficient(20) == pytest.approx(0.0011194, abs=1e-7)
    assert expansion.coefficient(8) == 0.0


def test_expansion_matches_dft(standard_pair, sqrt_schedule):
    rp = RieszProduct(standard_pair, sqrt_schedule, 3)
    n = 512
    dft = np.fft.fft(riesz_eval(rp, np.arange(n) / n)) / n
    dense = np.zeros(n)
    for freq, coef in riesz_fourier(rp).as_dict().items():
        dense[freq % n] = coef
    assert np.abs(dft - dense).max() <= 1e-10


def test_first_order_l2(standard_pair, sqrt_schedule):
    assert riesz_l2(RieszProduct(standard_pair, sqrt_schedule, 1)) == pytest.approx(
        math.sqrt(1 + 1 / (32 * math.pi**2)), rel=1e-14)


def test_flat_schedule_norms(standard_pair, flat_schedule):
    rp = RieszProduct(standard_pair, flat_schedule, 4)
    assert riesz_l1(rp) == 1.0
    for p in (1.5, 2.0, 5.0):
        assert riesz_lp(rp, p) == pytest.approx(1.0, abs=1e-14)

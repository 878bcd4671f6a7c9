"""Shared fixtures for the verify_*.py suites."""

import numpy as np
import pytest

from emlab.construction import AmplitudeSchedule, ScheduleKind, Variant, make_lacunary


@pytest.fixture
def standard_pair():
    return make_lacunary(6, Variant.STANDARD)


@pytest.fixture
def strong_pair():
    return make_lacunary(4, Variant.STRONG)


@pytest.fixture
def sqrt_schedule():
    return AmplitudeSchedule(ScheduleKind.SQRT)


@pytest.fixture
def linear_schedule():
    return AmplitudeSchedule(ScheduleKind.LINEAR)


@pytest.fixture
def flat_schedule():
    return AmplitudeSchedule(ScheduleKind.FLAT)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(autouse=True)
def _limit_threads(monkeypatch):
    monkeypatch.setenv("EMLAB_THREADS", "2")

import math

import numpy as np
import pytest
from scipy import stats

from anonrelay.point_process import (
    EmptyScheduleError,
    GenSpec,
    MissingBoundError,
    RateBound,
    Schedule,
    ScheduleError,
    empirical_rate,
    gen_poisson,
    schedule_from_text,
    schedule_to_text,
    validate_network_schedule,
)


def test_zero_horizon_gives_empty_schedule():
    s = gen_poisson(GenSpec(rate=1.0, horizon=0.0, seed=7))
    assert len(s) == 0


def test_identical_seed_identical_epochs():
    spec = GenSpec(rate=3.0, horizon=1000.0, seed=42)
    a = gen_poisson(spec, node_id="x")
    b = gen_poisson(spec, node_id="x")
    assert np.array_equal(a.epochs, b.epochs)
    c = gen_poisson(spec, node_id="y")
    assert not np.array_equal(a.epochs[: len(c)], c.epochs[: len(a)])


def test_empirical_rate_examples():
    assert empirical_rate(Schedule("n", [2.0])) == 0.5
    assert empirical_rate(Schedule("n", [1.0, 2.0, 3.0, 4.0])) == 1.0
    with pytest.raises(EmptyScheduleError):
        empirical_rate(Schedule("n", []))


def test_poisson_rate_concentration():
    rate, horizon = 2.0, 1e6
    s = gen_poisson(GenSpec(rate=rate, horizon=horizon, seed=5))
    sigma = math.sqrt(rate / horizon)
    assert abs(empirical_rate(s) - rate) <= 3 * sigma


def test_merged_independent_schedules_add_rates():
    h = 2e5
    a = gen_poisson(GenSpec(rate=1.5, horizon=h, seed=1), node_id="a")
    b = gen_poisson(GenSpec(rate=0.7, horizon=h, seed=2), node_id="b")
    merged = np.sort(np.concatenate([a.epochs, b.epochs]))
    rate = len(merged) / merged[-1]
    sigma = math.sqrt(2.2 / h)
    assert abs(rate - 2.2) <= 3 * sigma


def test_interarrivals_pass_ks_against_exponential():
    rate = 1.3
    s = gen_poisson(GenSpec(rate=rate, horizon=1e5, seed=9))
    inter = np.diff(s.epochs)
    assert inter.size >= 1e5
    p = stats.kstest(inter, "expon", args=(0.0, 1.0 / rate)).pvalue
    assert p >= 0.001


def test_validate_network_schedule():
    ok = Schedule("a", [1.0, 2.0, 3.0, 4.0])
    assert validate_network_schedule([ok], [RateBound("a", 1.0)])
    fast = Schedule("a", [0.5 * k for k in range(1, 9)])  # 8 packets by t=4
    assert not validate_network_schedule([fast], [RateBound("a", 1.0)])
    with pytest.raises(MissingBoundError):
        validate_network_schedule([ok], [RateBound("b", 1.0)])


def test_full_duplex_bounds_are_per_node():
    # both endpoints at their own caps simultaneously is valid
    a = Schedule("a", [1.0, 2.0, 3.0, 4.0])
    b = Schedule("b", [0.5, 1.0, 1.5, 2.0])
    bounds = [RateBound("a", 1.0), RateBound("b", 2.0)]
    assert validate_network_schedule([a, b], bounds)


def test_text_round_trip_is_lossless():
    s = gen_poisson(GenSpec(rate=2.0, horizon=500.0, seed=11), node_id="relay-7")
    bound = RateBound("relay-7", 2.5)
    s2, b2 = schedule_from_text(schedule_to_text(s, bound))
    assert s2.node_id == s.node_id
    assert b2 == bound
    assert np.array_equal(s2.epochs, s.epochs)


def test_schedule_validation():
    with pytest.raises(ScheduleError):
        Schedule("n", [1.0, 1.0])
    with pytest.raises(ScheduleError):
        Schedule("n", [2.0, 1.0])
    with pytest.raises(ScheduleError):
        Schedule("n", [-1.0, 1.0])
    with pytest.raises(ScheduleError):
        GenSpec(rate=0.0, horizon=1.0, seed=0)
    with pytest.raises(ScheduleError):
        GenSpec(rate=1.0, horizon=-2.0, seed=0)
    with pytest.raises(ScheduleError):
        RateBound("n", 0.0)

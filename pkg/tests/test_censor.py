import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from lehybrid.censor import (
    CensoredSample,
    CensoringScheme,
    case_b_mass,
    complete_sample,
    format_scheme,
    generate_sample,
    observed_sample,
    parse_scheme,
    progressive_type2_uniforms,
)
from lehybrid.dist import Params, le_cdf, le_quantile
from lehybrid.errors import DataError, SchemeError

P = Params(1.5, 0.75)


def test_parse_examples():
    assert parse_scheme("(0*9,25)", 35, 10, 0.5).R == (0,) * 9 + (25,)
    assert parse_scheme("(0*3)", 3, 3, 1.0).R == (0, 0, 0)
    assert parse_scheme("25, 0*9", 35, 10, 0.5).R == (25,) + (0,) * 9
    assert parse_scheme("(1*5)", 10, 5, 1.0).R == (1,) * 5


@pytest.mark.parametrize(
    "text,n,m,msg",
    [
        ("(25,0*9)", 34, 10, "does not equal n"),
        ("(0*8,25)", 34, 10, "length 9"),
        ("(0*9,-1)", 9, 10, "negative"),
        ("(0*9,x)", 35, 10, "bad token"),
        ("()", 35, 10, "no tokens"),
        ("(0**9)", 35, 10, "bad token"),
    ],
)
def test_parse_errors(text, n, m, msg):
    with pytest.raises(SchemeError, match=msg):
        parse_scheme(text, n, m, 1.0)


@given(st.lists(st.integers(0, 5), min_size=1, max_size=30))
def test_format_parse_round_trip(R):
    n = len(R) + sum(R)
    assert parse_scheme(format_scheme(R), n, len(R), 1.0).R == tuple(R)


def test_scheme_validation():
    with pytest.raises(SchemeError):
        CensoringScheme(5, 6, (0,) * 6, 1.0)
    with pytest.raises(SchemeError):
        CensoringScheme(5, 2, (1, 2), 0.0)
    CensoringScheme(5, 5, (0,) * 5, math.inf)


def test_case_b_mass_examples():
    scheme = CensoringScheme(35, 10, (0,) * 9 + (25,), 0.5)
    s = observed_sample([0.1, 0.2, 0.3], scheme)
    assert s.case == "B" and case_b_mass(s) == 32
    scheme = CensoringScheme(35, 6, (0, 0, 0, 0, 25, 4), 5.0)
    s = observed_sample([0.1, 0.2, 0.3, 0.4, 0.5], scheme)
    assert case_b_mass(s) == 35 - 25 - 5 == 5
    s = observed_sample([0.1, 0.2, 0.3], CensoringScheme(5, 3, (1, 0, 1), 1.0))
    assert s.case == "A" and case_b_mass(s) == 0


def test_sample_validation():
    scheme = CensoringScheme(5, 3, (1, 0, 1), 1.0)
    with pytest.raises(DataError):
        observed_sample([0.1, 0.2, 1.5], scheme)
    with pytest.raises(DataError):
        observed_sample([0.1, 0.2, 0.3, 0.4], scheme)
    with pytest.raises(DataError):
        CensoredSample(np.array([0.2, 0.1]), (1, 0), "B", 2, 3, 1.0, scheme)
    with pytest.raises(DataError):
        CensoredSample(np.array([0.1, 0.2]), (1, 0), "B", 2, 1, 1.0, scheme)
    with pytest.raises(DataError):
        CensoredSample(np.array([0.1, 0.2]), (1, 0), "A", 2, 0, 1.0, scheme)


def test_tampered_r_star_is_caught():
    scheme = CensoringScheme(5, 3, (1, 0, 1), 1.0)
    s = observed_sample([0.1], scheme)
    object.__setattr__(s, "r_star", 1)
    with pytest.raises(AssertionError):
        case_b_mass(s)


def test_json_round_trip():
    scheme = parse_scheme("(25,0*9)", 35, 10, 0.5)
    s = generate_sample(scheme, P, np.random.default_rng(7))
    back = CensoredSample.from_json(s.to_json())
    assert back.to_json() == s.to_json()
    assert np.array_equal(back.times, s.times)
    c = complete_sample([3.0, 1.0, 2.0])
    assert CensoredSample.from_json(c.to_json()).T == math.inf
    assert c.to_dict()["T"] is None


def test_generate_infinite_cap_is_case_a():
    scheme = parse_scheme("(0*4,5)", 10, 5, math.inf)
    rng = np.random.default_rng(1)
    for _ in range(200):
        s = generate_sample(scheme, P, rng)
        assert s.case == "A" and s.D == 5 and s.r_star == 0


def test_deterministic_replay():
    scheme = parse_scheme("(25,0*9)", 35, 10, 0.5)
    a = generate_sample(scheme, P, np.random.default_rng(99))
    b = generate_sample(scheme, P, np.random.default_rng(99))
    assert a.to_json() == b.to_json()


def test_increasing_T_never_decreases_D():
    base = parse_scheme("(0*9,25)", 35, 10, 0.3)
    for seed in range(100):
        Ds = [generate_sample(base.with_T(T), P, np.random.default_rng(seed)).D for T in (0.3, 0.5, 0.8, 2.0)]
        assert Ds == sorted(Ds)


def test_complete_order_statistics_minimum_law():
    # first order statistic of n iid draws versus directly simulated minima
    n = 8
    scheme = CensoringScheme(n, n, (0,) * n, math.inf)
    rng = np.random.default_rng(2)
    first = np.array([generate_sample(scheme, P, rng).times[0] for _ in range(10_000)])
    oracle = rng.random((10_000, n))
    minima = le_quantile(oracle, P).min(axis=1)
    assert stats.ks_2samp(first, minima).statistic < 0.02
    # and against the exact law of the minimum
    assert stats.kstest(first, lambda x: 1 - (1 - le_cdf(x, P)) ** n).statistic < 0.02


def test_case_b_fraction_matches_type2_stage():
    scheme = parse_scheme("(25,0*9)", 35, 10, 0.5)
    rng = np.random.default_rng(4)
    frac_b = np.mean([generate_sample(scheme, P, rng).case == "B" for _ in range(10_000)])
    rng2 = np.random.default_rng(5)
    u_last = np.array([progressive_type2_uniforms(scheme.R, rng2)[-1] for _ in range(10_000)])
    oracle = np.mean(le_quantile(u_last, P) >= 0.5)
    assert abs(frac_b - oracle) < 0.02


def test_uniform_spacings_marginals():
    # U_1 of a progressive type-II sample is Beta(1, n)
    R = (3, 0, 2, 0)
    n = len(R) + sum(R)
    rng = np.random.default_rng(8)
    u1 = np.array([progressive_type2_uniforms(R, rng)[0] for _ in range(20_000)])
    assert stats.kstest(u1, stats.beta(1, n).cdf).statistic < 0.015


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=200)
def test_conservation(seed):
    scheme = parse_scheme("(25,0*9)", 35, 10, 0.5)
    s = generate_sample(scheme, P, np.random.default_rng(seed))
    assert np.all(np.diff(s.times) > 0) and np.all(s.times < s.T)
    if s.case == "B":
        assert s.D + sum(s.removals) + s.r_star == s.n
    else:
        assert s.D == s.m and s.r_star == 0 and s.D + sum(s.removals) == s.n

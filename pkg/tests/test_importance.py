import math

import numpy as np
import pytest
from conftest import draw
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import naive_loglik, posterior_moments
from scipy import stats

from lehybrid.bayes import SQ, LossSpec, PriorSpec, log_prior
from lehybrid.censor import complete_sample
from lehybrid.errors import DomainError, ProposalError, UnreliableIntervalError
from lehybrid.importance import (
    WeightedDraws,
    _log_h,
    equal_tail_interval,
    hpd_interval,
    is_available,
    is_draws,
    is_estimate,
    is_report,
)
from lehybrid.lindley import lindley_estimate

U = PriorSpec.independent(3, 2, 3, 4)


@pytest.fixture(scope="module")
def sample():
    return draw("(25,0*9)", 35, 10, 0.5, 1)


@pytest.fixture(scope="module")
def draws(sample):
    return is_draws(sample, U, 20000, np.random.default_rng(7))


def test_case_a_has_no_terminal_factor():
    s = draw("(0*9,25)", 35, 10, 5.0, 0)
    assert s.case == "A" and s.r_star == 0
    a = np.array([0.8, 1.5, 2.5])
    l = np.array([0.4, 0.75, 1.1])
    ra = U.b - np.sum(np.log(np.expm1(l[:, None] * s.times)), axis=1)
    got = _log_h(s, U, a, l, ra, 1.0)
    for k in range(3):
        L = [math.log(math.expm1(l[k] * x)) for x in s.times]
        expect = (-(s.D + U.a) * math.log(ra[k])
                  - sum((r + 2) * math.log1p(math.exp(a[k] * v)) for r, v in zip(s.removals, L))
                  - sum(L))
        assert got[k] == pytest.approx(expect, rel=1e-13)


def test_log_weight_matches_posterior_over_proposal(sample, draws):
    # log h = log posterior - log proposal + const, checked against plain math
    s = sample
    sx = float(np.sum(s.times))
    idx = np.arange(0, draws.N, 997)
    vals = []
    for i in idx:
        a, l = float(draws.alpha[i]), float(draws.lam[i])
        rate_a = U.b - sum(math.log(math.exp(l * x) - 1.0) for x in s.times)
        lp = naive_loglik(s.times, s.removals, s.r_star, s.T, a, l) + float(log_prior(U, a, l))
        lq = (stats.gamma.logpdf(l, s.D + U.c, scale=1.0 / (U.d - sx))
              + stats.gamma.logpdf(a, s.D + U.a, scale=1.0 / rate_a))
        vals.append(lp - lq - float(draws.log_w[i]))
    assert np.ptp(vals) < 1e-8 * max(1.0, abs(vals[0]))


def test_draws_positive_and_ess_range(draws):
    assert np.all(draws.alpha > 0) and np.all(draws.lam > 0)
    assert 1.0 <= draws.ess <= draws.N
    assert draws.rejections >= 0


def test_reproducible(sample):
    a = is_draws(sample, U, 10000, np.random.default_rng(3))
    b = is_draws(sample, U, 10000, np.random.default_rng(3))
    assert np.array_equal(a.alpha, b.alpha) and np.array_equal(a.log_w, b.log_w)
    for loss in (SQ, LossSpec.linex(0.5)):
        assert is_estimate(a, loss, "alpha") == is_estimate(b, loss, "alpha")
    assert hpd_interval(a, "alpha", 0.1) == hpd_interval(b, "alpha", 0.1)


def test_guinea_data_proposal_invalid(guinea_sample):
    prior = PriorSpec.independent(3, 2, 3, 4)
    assert not is_available(guinea_sample, prior)
    with pytest.raises(ProposalError, match="rescale"):
        is_draws(guinea_sample, prior, 100, np.random.default_rng(0))


def test_guinea_data_in_years_is_usable(guinea):
    s = complete_sample(np.asarray(guinea) / 3652.5)
    assert is_available(s, U)
    d = is_draws(s, U, 500, np.random.default_rng(0))
    assert d.N == 500


def test_bivariate_prior_rejected(sample):
    assert not is_available(sample, PriorSpec.bivariate(3, 4))
    with pytest.raises(DomainError):
        is_draws(sample, PriorSpec.bivariate(3, 4), 10, np.random.default_rng(0))


def test_equal_weights_log_mean_exp():
    rng = np.random.default_rng(1)
    a = rng.gamma(3.0, 0.5, 500)
    d = WeightedDraws(a, a.copy(), np.zeros(500))
    for p in (0.5, -1.0, 2.0):
        expect = -math.log(math.fsum(np.exp(-p * a)) / a.size) / p
        assert is_estimate(d, LossSpec.linex(p), "alpha") == pytest.approx(expect, rel=1e-13)
    assert is_estimate(d, SQ, "alpha") == pytest.approx(math.fsum(a) / a.size, rel=1e-13)


def test_ge_minus_one_is_sq_bitwise(draws):
    for target in ("alpha", "lambda"):
        assert is_estimate(draws, LossSpec.ge(-1.0), target) == is_estimate(draws, SQ, target)


def test_linex_small_p_tends_to_sq(draws):
    for target in ("alpha", "lambda"):
        sq = is_estimate(draws, SQ, target)
        for p in (1e-6, -1e-6):
            assert abs(is_estimate(draws, LossSpec.linex(p), target) - sq) < 1e-4


def test_monotone_in_loss_parameters(draws):
    for target in ("alpha", "lambda"):
        li = [is_estimate(draws, LossSpec.linex(p), target) for p in (-0.05, 0.5, 1.0)]
        ge = [is_estimate(draws, LossSpec.ge(q), target) for q in (-0.5, -0.25, 0.25)]
        assert li == sorted(li, reverse=True)
        assert ge == sorted(ge, reverse=True)


def test_exact_shift_invariance_is_bitwise(draws):
    # shifts that are exact in binary leave every output bit-identical
    lw = np.round(draws.log_w * 2**20) / 2**20
    base = WeightedDraws(draws.alpha, draws.lam, lw)
    for c in (1.0, -64.0, 1024.0):
        moved = WeightedDraws(draws.alpha, draws.lam, lw + c)
        assert np.array_equal(moved.log_w - c, lw)
        for loss in (SQ, LossSpec.linex(0.5), LossSpec.ge(0.25)):
            assert is_estimate(moved, loss, "alpha") == is_estimate(base, loss, "alpha")
        assert hpd_interval(moved, "alpha", 0.1) == hpd_interval(base, "alpha", 0.1)


@settings(max_examples=30, deadline=None)
@given(st.floats(-1e3, 1e3, allow_nan=False))
def test_shift_invariance_general(c):
    rng = np.random.default_rng(11)
    a = rng.gamma(4.0, 0.4, 400)
    lw = rng.normal(0.0, 2.0, 400)
    d0 = WeightedDraws(a, a, lw)
    d1 = WeightedDraws(a, a, lw + c)
    for loss in (SQ, LossSpec.linex(-0.7)):
        assert is_estimate(d1, loss, "alpha") == pytest.approx(is_estimate(d0, loss, "alpha"), rel=1e-12)


def test_hpd_uniform_grid():
    x = np.arange(1, 1001) / 1000.0
    d = WeightedDraws(x, x, np.zeros(1000))
    iv = hpd_interval(d, "alpha", 0.05)
    assert iv.length == pytest.approx(0.949, abs=0.002)
    assert iv.lower == 0.001  # ties go to the smaller lower endpoint


def test_hpd_endpoints_are_draws(draws):
    iv = hpd_interval(draws, "alpha", 0.1)
    assert iv.lower in set(draws.alpha) and iv.upper in set(draws.alpha)
    w = draws.normalized_weights()
    inside = (draws.alpha >= iv.lower) & (draws.alpha <= iv.upper)
    assert w[inside].sum() >= 0.9 - 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([0.05, 0.1, 0.3]))
def test_hpd_not_longer_than_equal_tail(seed, beta):
    rng = np.random.default_rng(seed)
    a = rng.lognormal(0.0, 0.7, 300)
    lw = rng.normal(0.0, 0.5, 300)
    d = WeightedDraws(a, a, lw)
    if d.ess < 50:
        return
    assert hpd_interval(d, "alpha", beta).length <= equal_tail_interval(d, "alpha", beta).length


def test_hpd_ess_floor():
    a = np.linspace(1.0, 2.0, 100)
    lw = np.zeros(100)
    lw[:97] = -50.0
    d = WeightedDraws(a, a, lw)
    assert d.ess < 50
    with pytest.raises(UnreliableIntervalError):
        hpd_interval(d, "alpha", 0.1)
    with pytest.raises(DomainError):
        hpd_interval(WeightedDraws(a, a, np.zeros(100)), "alpha", 1.0)


def test_weighted_draws_validation():
    with pytest.raises(DomainError):
        WeightedDraws(np.ones(3), np.ones(2), np.zeros(3))
    with pytest.raises(DomainError):
        WeightedDraws(np.ones(2), np.ones(2), np.array([0.0, np.inf]))
    with pytest.raises(DomainError):
        is_estimate(WeightedDraws(np.ones(1), np.ones(1), np.zeros(1)), SQ, "alpha")


def test_merge_of_streams(sample):
    a = is_draws(sample, U, 1000, np.random.default_rng(1))
    b = is_draws(sample, U, 1000, np.random.default_rng(2))
    m = a.merge(b)
    assert m.N == 2000 and m.rejections == a.rejections + b.rejections
    wa = np.exp(a.log_w - m.log_w.max())
    wb = np.exp(b.log_w - m.log_w.max())
    expect = (np.sum(wa * a.alpha) + np.sum(wb * b.alpha)) / (wa.sum() + wb.sum())
    assert is_estimate(m, SQ, "alpha") == pytest.approx(expect, rel=1e-12)


def test_report_and_csv(draws):
    rep = is_report(draws, U, [SQ, LossSpec.linex(0.5)])
    assert len(rep.rows) == 4 and all(r.method == "is" for r in rep.rows)
    lines = draws.to_csv().splitlines()
    assert lines[0] == "alpha,lambda,log_weight" and len(lines) == draws.N + 1
    assert float(lines[1].split(",")[0]) == draws.alpha[0]


def test_quadrature_agreement(sample):
    d = is_draws(sample, U, 50000, np.random.default_rng(2024))
    ea, el = posterior_moments(sample, lambda a, l: float(log_prior(U, a, l)))
    assert abs(is_estimate(d, SQ, "alpha") - ea) < 0.02
    assert abs(is_estimate(d, SQ, "lambda") - el) < 0.02


@pytest.mark.xfail(strict=True, reason="the gamma proposal degenerates on this design; ESS is a handful of draws")
def test_ess_health_floor_late_removal_design():
    s = draw("(0*9,25)", 35, 10, 0.5, 0)
    d = is_draws(s, U, 20000, np.random.default_rng(0))
    assert d.ess >= 0.05 * d.N


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="Lindley expansion is unreliable at D of a few failures")
def test_lindley_quadrature_small_D():
    for seed in range(10):
        s = draw("(25,0*9)", 35, 10, 0.5, seed)
        ea, _ = posterior_moments(s, lambda a, l: float(log_prior(U, a, l)))
        assert abs(lindley_estimate(s, U, SQ, "alpha") - ea) < 0.05

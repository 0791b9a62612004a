import math

import numpy as np
import pytest
from conftest import draw
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from lehybrid.censor import CensoringScheme, complete_sample, observed_sample
from lehybrid.dist import Params
from lehybrid.errors import DegenerateSampleError, DomainError
from lehybrid.lik import deriv_bundle, loglik, loglik_grid, score
from lehybrid.mle import MleFit, fit_mle, na_interval, nl_interval, profile_loglik, z_quantile


def nelder_mead_oracle(s):
    res = optimize.minimize(
        lambda th: -loglik(s, Params(math.exp(th[0]), math.exp(th[1]))),
        x0=np.array([0.0, math.log(math.log(2) / np.median(s.times))]),
        method="Nelder-Mead", options={"xatol": 1e-11, "fatol": 1e-13, "maxiter": 10000},
    )
    return np.exp(res.x), -res.fun


@pytest.fixture(scope="module")
def guinea_fit(guinea_sample):
    return fit_mle(guinea_sample)


def test_guinea_fit(guinea_fit, guinea_sample):
    f = guinea_fit
    assert f.converged
    (a, l), ll = nelder_mead_oracle(guinea_sample)
    assert f.alpha == pytest.approx(a, rel=1e-6)
    assert f.lam == pytest.approx(l, rel=1e-6)
    assert f.loglik >= ll - 1e-9
    assert abs(f.lam - 0.008596) < 1e-5
    assert abs(-f.loglik - 393.1994) < 1e-3
    assert f.se[0] == pytest.approx(0.171128, rel=0.05)
    assert f.se[1] == pytest.approx(0.000695, rel=0.05)


def test_fisher_matrix(guinea_fit):
    info = -guinea_fit.bundle.hessian()
    np.testing.assert_allclose(guinea_fit.tau @ info, np.eye(2), atol=1e-8)
    assert guinea_fit.se == (math.sqrt(guinea_fit.tau[0, 0]), math.sqrt(guinea_fit.tau[1, 1]))
    assert np.array_equal(guinea_fit.tau, guinea_fit.tau.T)
    np.linalg.cholesky(guinea_fit.tau)


def test_scale_equivariance(guinea, guinea_fit):
    f = fit_mle(complete_sample(guinea * 100))
    assert f.alpha == pytest.approx(guinea_fit.alpha, rel=1e-6)
    assert f.lam == pytest.approx(guinea_fit.lam / 100, rel=1e-6)


def test_needs_two_failures():
    s = observed_sample([0.3], CensoringScheme(10, 3, (0, 0, 7), 1.0))
    with pytest.raises(DegenerateSampleError):
        fit_mle(s)


def _grid_max(s, k=400):
    # chunked 400 x 400 log grid around the data scale
    alphas = np.geomspace(0.05, 20.0, k)
    lams = np.geomspace(0.05, 20.0, k) / np.median(s.times)
    best = -np.inf
    for chunk in np.array_split(alphas, 8):
        A, L = np.meshgrid(chunk, lams, indexing="ij")
        with np.errstate(all="ignore"):
            v = loglik_grid(s, A, L)
        best = max(best, float(np.nanmax(np.where(np.isfinite(v), v, -np.inf))))
    return best


def test_grid_oracle_table_scheme():
    s = draw("(0*24,10)", 35, 25, 0.65, 2024)
    f = fit_mle(s)
    assert f.converged
    assert f.loglik - _grid_max(s) >= -1e-6


def test_grid_oracle_dominance_random_samples():
    schemes = [("(0*24,10)", 35, 25, 0.65), ("(25,0*9)", 35, 10, 0.5), ("(0*9,25)", 35, 10, 0.5),
               ("(5*5,0*5)", 35, 10, 0.65)]
    for i in range(20):
        s = draw(*schemes[i % 4], seed=100 + i)
        f = fit_mle(s)
        if f.converged:
            assert f.loglik - _grid_max(s, k=200) >= -1e-6


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_converged_fit_is_stationary(seed):
    s = draw("(0*24,10)", 35, 25, 0.65, seed)
    f = fit_mle(s)
    assert f.converged
    assert f.grad_norm < 1e-8
    g = score(s, f.params)
    assert abs(g[0]) < 1e-6 and abs(g[1]) < 1e-6
    np.linalg.cholesky(f.tau)


def test_fit_never_worse_than_start():
    s = draw("(25,0*9)", 35, 10, 0.5, 3)
    start = Params(1.0, math.log(2) / float(np.median(s.times)))
    f = fit_mle(s, init=start)
    assert f.loglik >= loglik(s, start)


def test_profile_identities(guinea_sample, guinea_fit):
    f = guinea_fit
    grid = np.linspace(f.alpha * 0.8, f.alpha * 1.2, 41)
    grid[20] = f.alpha
    prof = profile_loglik(guinea_sample, "alpha", grid, f)
    assert all(p.ok for p in prof)
    assert max(p.profile_loglik for p in prof) == pytest.approx(f.loglik, abs=1e-6)
    assert prof[20].inner_argmax == pytest.approx(f.lam, rel=1e-4)
    prof_l = profile_loglik(guinea_sample, "lambda", [f.lam * 0.9, f.lam, f.lam * 1.1], f)
    assert prof_l[1].inner_argmax == pytest.approx(f.alpha, abs=1e-4)


def test_profile_unimodal(guinea_sample, guinea_fit):
    prof = profile_loglik(guinea_sample, "alpha", np.linspace(0.5, 3.0, 100), guinea_fit)
    slope = np.diff([p.profile_loglik for p in prof])
    assert np.count_nonzero(np.diff(np.sign(slope)) != 0) == 1


def test_profile_bad_grid(guinea_sample):
    with pytest.raises(DomainError):
        profile_loglik(guinea_sample, "alpha", [1.0])
    with pytest.raises(DomainError):
        profile_loglik(guinea_sample, "beta", [1.0, 2.0])


def _fake_fit(alpha, lam, se_a, se_l):
    tau = np.diag([se_a ** 2, se_l ** 2])
    b = deriv_bundle(complete_sample([1.0, 2.0]), Params(1, 1))
    return MleFit(Params(alpha, lam), (se_a, se_l), tau, 0, True, 0.0, 0.0, b)


def test_z_quantile():
    assert abs(z_quantile(0.05) - 1.959964) < 1e-6
    assert z_quantile(0.10) == pytest.approx(1.6448536269514722, rel=1e-12)
    with pytest.raises(DomainError):
        z_quantile(1.0)


def test_na_interval_arithmetic():
    f = _fake_fit(1.680051, 0.008596, 0.171128, 0.000695)
    iv = na_interval(f, 0.05)["alpha"]
    assert iv.lower == pytest.approx(1.3446, abs=1e-4)
    assert iv.upper == pytest.approx(2.0155, abs=1e-4)
    assert iv.length == pytest.approx(2 * z_quantile(0.05) * 0.171128, rel=1e-14)
    assert 1.680051 in iv


def test_na_can_go_negative_nl_cannot():
    f = _fake_fit(0.3, 0.1, 0.5, 0.2)
    assert na_interval(f, 0.05)["alpha"].lower < 0
    assert nl_interval(f, 0.05)["alpha"].lower > 0
    assert nl_interval(f, 0.05)["lambda"].lower > 0


def test_nl_geometric_midpoint():
    f = _fake_fit(1.7, 0.8, 0.3, 0.1)
    for name, est in (("alpha", 1.7), ("lambda", 0.8)):
        iv = nl_interval(f, 0.1)[name]
        assert math.sqrt(iv.lower * iv.upper) == pytest.approx(est, rel=1e-14)


def test_nl_na_first_order_agreement():
    # endpoints differ only at second order: alpha * (z k)^2 / 2 with k = se / alpha
    z = z_quantile(0.05)
    for k in (0.01, 0.001):
        f = _fake_fit(2.0, 1.0, 2.0 * k, 0.01)
        na, nl = na_interval(f, 0.05)["alpha"], nl_interval(f, 0.05)["alpha"]
        for a, b in ((nl.lower, na.lower), (nl.upper, na.upper)):
            rel = (a - b) / 2.0
            assert rel == pytest.approx((z * k) ** 2 / 2, rel=5 * z * k)

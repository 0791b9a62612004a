"""Fitting the candidate lifetime families to complete data, and plot data.

Each two-parameter family reduces to a one-dimensional score equation after
profiling out its second parameter, so the MLE is found by ``brentq`` rather
than a general optimiser.  Standard errors come from a central-difference
Hessian of the log-likelihood.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize, special

from .censor import complete_sample
from .dist import FAMILY_TAGS, Family
from .errors import DataError, DomainError, LEHybridError
from .mle import fit_mle

log = logging.getLogger(__name__)

__all__ = [
    "FitSummary",
    "fit_family",
    "fit_all",
    "fit_family_numeric",
    "neg_loglik",
    "numeric_hessian",
    "qq_points",
    "pp_points",
    "ecdf_points",
    "hist_density",
]

# bracket for the Burr XII shape c; the likelihood can rise along c -> inf
_BURR_LOGC = (math.log(1e-3), math.log(1e3))


@dataclass(frozen=True)
class FitSummary:
    family: str
    params: tuple[float, ...]
    se: tuple[float, ...]
    neg_loglik: float
    n: int
    converged: bool = True
    note: str = ""

    @property
    def k(self) -> int:
        return len(self.params)

    @property
    def aic(self) -> float:
        return 2.0 * self.k + 2.0 * self.neg_loglik

    @property
    def aicc(self) -> float:
        return self.aic + 2.0 * self.k * (self.k + 1) / (self.n - self.k - 1)

    @property
    def bic(self) -> float:
        return self.k * math.log(self.n) + 2.0 * self.neg_loglik

    @property
    def dist(self) -> Family:
        return Family(self.family, self.params)

    def to_dict(self) -> dict:
        names = Family(self.family, self.params).param_names
        out = {"family": self.family, "k": self.k, "n": self.n}
        for i in range(2):
            out[f"param{i + 1}_name"] = names[i] if i < len(names) else ""
            out[f"param{i + 1}"] = self.params[i] if i < len(names) else None
            out[f"se{i + 1}"] = self.se[i] if i < len(names) else None
        out.update(neg_loglik=self.neg_loglik, aic=self.aic, aicc=self.aicc, bic=self.bic,
                   converged=self.converged, note=self.note)
        return out


SUMMARY_COLUMNS = (
    "family", "k", "n", "param1_name", "param1", "se1", "param2_name", "param2", "se2",
    "neg_loglik", "aic", "aicc", "bic", "converged", "note",
)


def _check_data(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 3:
        raise DataError("need at least 3 observations")
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise DataError("data must be positive and finite")
    return np.sort(x)


def neg_loglik(x, tag: str, params: Sequence[float]) -> float:
    """``-sum log f(x)``, or ``inf`` outside the parameter space."""
    try:
        f = Family(tag, tuple(params))
    except DomainError:
        return math.inf
    with np.errstate(all="ignore"):
        v = -float(np.sum(f.logpdf(x)))
    return v if math.isfinite(v) else math.inf


def numeric_hessian(fn, theta: Sequence[float], rel_step: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian of ``fn`` with steps relative to ``|theta|``."""
    theta = np.asarray(theta, dtype=float)
    k = theta.size
    h = rel_step * np.maximum(np.abs(theta), 1e-8)
    H = np.empty((k, k))
    f0 = fn(theta)
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h[i]
        # five-point stencil on the diagonal
        H[i, i] = (-fn(theta + 2 * ei) + 16 * fn(theta + ei) - 30 * f0
                   + 16 * fn(theta - ei) - fn(theta - 2 * ei)) / (12 * h[i] ** 2)
        for j in range(i + 1, k):
            ej = np.zeros(k)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (
                fn(theta + ei + ej) - fn(theta + ei - ej) - fn(theta - ei + ej) + fn(theta - ei - ej)
            ) / (4 * h[i] * h[j])
    return H


def _se_from_nll(x, tag, params) -> tuple[float, ...]:
    H = numeric_hessian(lambda th: neg_loglik(x, tag, th), params)
    try:
        cov = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        return tuple(math.nan for _ in params)
    d = np.diag(cov)
    return tuple(float(math.sqrt(v)) if v > 0 else math.nan for v in d)


def _weibull_shape(y: np.ndarray) -> float:
    """Root of the Weibull profile score ``1/k + mean log y - sum y^k log y / sum y^k``."""
    ly = np.log(y)
    ly_c = ly - ly.max()  # scale-free form, avoids overflow in y^k

    def score(k):
        w = np.exp(k * ly_c)
        return 1.0 / k + ly.mean() - float(np.sum(w * ly) / np.sum(w))

    lo, hi = 1e-3, 1.0
    while score(hi) > 0:
        hi *= 2.0
        if hi > 1e4:
            raise LEHybridError("Weibull shape score has no root below 1e4")
    return optimize.brentq(score, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)


def _weibull_scale(y: np.ndarray, k: float) -> float:
    ly = np.log(y)
    m = ly.max()
    return float(math.exp(m + math.log(np.mean(np.exp(k * (ly - m)))) / k))


def _burr_profile(x: np.ndarray, logc: float) -> tuple[float, float]:
    """``(k_hat(c), negative profile log-likelihood)`` of Burr XII at ``c``."""
    c = math.exp(logc)
    s = np.logaddexp(0.0, c * np.log(x))
    kk = x.size / float(np.sum(s))
    return kk, neg_loglik(x, "Burr", (c, kk))


def fit_family(data, tag: str) -> FitSummary:
    """Complete-sample MLE of one family.

    ED and IED are closed form; WD, IWD, Gamma and Burr solve a profile
    score equation; LED uses the Newton fit of :func:`lehybrid.mle.fit_mle`.
    Failures are reported through ``converged`` rather than raised.
    """
    if tag not in FAMILY_TAGS:
        raise DomainError(f"unknown family {tag!r}; expected one of {FAMILY_TAGS}")
    x = _check_data(data)
    n = x.size
    note = ""
    converged = True
    if tag == "LED":
        fit = fit_mle(complete_sample(x))
        params = fit.params.as_tuple()
        converged = fit.converged
        se = _se_from_nll(x, tag, params)
    elif tag == "ED":
        params = (n / math.fsum(x),)
        se = (params[0] / math.sqrt(n),)
    elif tag == "IED":
        params = (n / math.fsum(1.0 / x),)
        se = (params[0] / math.sqrt(n),)
    elif tag in ("WD", "IWD"):
        y = x if tag == "WD" else 1.0 / x
        k = _weibull_shape(y)
        s = _weibull_scale(y, k)
        params = (k, s if tag == "WD" else 1.0 / s)
        se = _se_from_nll(x, tag, params)
    elif tag == "Gamma":
        rhs = math.log(float(np.mean(x))) - float(np.mean(np.log(x)))
        fn = lambda a: math.log(a) - special.digamma(a) - rhs  # noqa: E731
        lo, hi = 1e-8, 1.0
        while fn(hi) > 0:
            hi *= 2.0
        a = optimize.brentq(fn, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
        params = (a, a / float(np.mean(x)))
        se = _se_from_nll(x, tag, params)
    else:
        res = optimize.minimize_scalar(
            lambda lc: _burr_profile(x, lc)[1], bounds=_BURR_LOGC, method="bounded",
            options={"xatol": 1e-10},
        )
        logc = float(res.x)
        kk, _ = _burr_profile(x, logc)
        params = (math.exp(logc), kk)
        edge = min(abs(logc - _BURR_LOGC[0]), abs(logc - _BURR_LOGC[1])) < 1e-3
        # a ridge towards c -> inf shows up as the boundary doing as well
        ridge = _burr_profile(x, _BURR_LOGC[1])[1] <= float(res.fun) + 1e-6
        if edge or ridge or not res.success:
            converged = False
            note = "likelihood supremum not attained inside the search range"
            se = (math.nan, math.nan)
        else:
            se = _se_from_nll(x, tag, params)
    nll = neg_loglik(x, tag, params)
    if not math.isfinite(nll):
        converged = False
        note = note or "non-finite log-likelihood at the estimate"
    if not converged:
        log.warning("%s fit flagged: %s", tag, note or "did not converge")
    return FitSummary(tag, tuple(float(v) for v in params), tuple(float(v) for v in se), nll, n, converged, note)


def fit_all(data, families: Sequence[str] = FAMILY_TAGS) -> list[FitSummary]:
    return [fit_family(data, tag) for tag in families]


def fit_family_numeric(data, tag: str, x0: Sequence[float]) -> FitSummary:
    """Generic MLE: Nelder-Mead on log-parameters, then Newton polish.

    Independent of the closed forms above; used to cross-check them.
    """
    x = _check_data(data)
    f = lambda th: neg_loglik(x, tag, np.exp(th))  # noqa: E731
    res = optimize.minimize(f, np.log(np.asarray(x0, dtype=float)), method="Nelder-Mead",
                            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000})
    th = np.asarray(res.x, dtype=float)
    for _ in range(20):
        # Newton polish in log coordinates with a 5-point gradient
        k = th.size
        h = 1e-5
        g = np.array([(-f(th + 2 * h * e) + 8 * f(th + h * e) - 8 * f(th - h * e) + f(th - 2 * h * e)) / (12 * h)
                      for e in np.eye(k)])
        H = numeric_hessian(f, th, rel_step=1e-4) if np.all(np.abs(th) > 1e-3) else numeric_hessian(
            lambda t: f(t), th, rel_step=1.0)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        f0 = f(th)
        # near the optimum f is flat to rounding, so allow a relative slack
        if f(th - step) > f0 + 1e-12 * abs(f0):
            break
        th = th - step
        if np.max(np.abs(step)) < 1e-13:
            break
    params = tuple(float(v) for v in np.exp(th))
    return FitSummary(tag, params, _se_from_nll(x, tag, params), neg_loglik(x, tag, params), x.size, bool(res.success))


# ---------------------------------------------------------------------------
# plot data

def qq_points(data, family: Family) -> np.ndarray:
    """``(F^{-1}(i/(n+1)), x_(i))`` for ``i = 1..n`` as an ``(n, 2)`` array."""
    x = _check_data(data)
    n = x.size
    u = np.arange(1, n + 1) / (n + 1.0)
    return np.column_stack([np.asarray(family.ppf(u), dtype=float), x])


def pp_points(data, family: Family) -> np.ndarray:
    """``(F(x_(i)), i/n)`` for ``i = 1..n``."""
    x = _check_data(data)
    n = x.size
    return np.column_stack([np.asarray(family.cdf(x), dtype=float), np.arange(1, n + 1) / n])


def ecdf_points(data) -> np.ndarray:
    """Right-continuous steps ``(x_(i), i/n)``."""
    x = _check_data(data)
    return np.column_stack([x, np.arange(1, x.size + 1) / x.size])


def hist_density(data, families: Sequence[Family], bins: int = 10, grid_size: int = 200):
    """Density-normalised histogram and fitted densities on an even grid.

    Returns ``(hist, curves)``: ``hist`` rows are ``(left, right, density)``;
    ``curves`` has the grid in column 0 and one density column per family.
    """
    if int(bins) != bins or bins < 1:
        raise DomainError("bins must be a positive integer")
    x = _check_data(data)
    dens, edges = np.histogram(x, bins=int(bins), density=True)
    hist = np.column_stack([edges[:-1], edges[1:], dens])
    grid = np.linspace(x[0], x[-1], grid_size)
    cols = [grid] + [np.exp(np.asarray(f.logpdf(grid), dtype=float)) for f in families]
    return hist, np.column_stack(cols)

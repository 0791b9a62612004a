"""Maximum likelihood: damped Newton fit, profile curves and Wald intervals."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize, special

from .censor import CensoredSample
from .dist import Params
from .errors import DegenerateSampleError, DomainError, NumericError, SingularFitError
from .lik import DerivBundle, deriv_bundle, loglik, loglik_grid

log = logging.getLogger(__name__)

__all__ = [
    "MleFit",
    "Interval",
    "ProfilePoint",
    "fit_mle",
    "profile_loglik",
    "z_quantile",
    "na_interval",
    "nl_interval",
]


@dataclass(frozen=True)
class MleFit:
    """Result of :func:`fit_mle`.

    ``tau`` is the inverse observed information at the estimate and
    ``grad_norm`` the max-norm of the score in log-parameter coordinates,
    i.e. of ``(alpha dl/d alpha, lam dl/d lam)``, which does not depend on
    the time unit.
    """

    params: Params
    se: tuple[float, float]
    tau: np.ndarray
    iterations: int
    converged: bool
    grad_norm: float
    loglik: float
    bundle: DerivBundle

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @property
    def lam(self) -> float:
        return self.params.lam

    def to_dict(self) -> dict:
        return {
            "alpha": self.params.alpha,
            "lambda": self.params.lam,
            "se_alpha": self.se[0],
            "se_lambda": self.se[1],
            "tau11": float(self.tau[0, 0]),
            "tau12": float(self.tau[0, 1]),
            "tau22": float(self.tau[1, 1]),
            "loglik": self.loglik,
            "iterations": self.iterations,
            "converged": self.converged,
            "grad_norm": self.grad_norm,
        }


def _log_coords(b: DerivBundle, a: float, lam: float):
    """Gradient and Hessian of the log-likelihood in (log alpha, log lam)."""
    g = np.array([a * b.l10, lam * b.l01])
    H = np.array(
        [
            [a * a * b.l20 + a * b.l10, a * lam * b.l11],
            [a * lam * b.l11, lam * lam * b.l02 + lam * b.l01],
        ]
    )
    return g, H


def _safe_loglik(s: CensoredSample, theta: np.ndarray) -> float:
    try:
        return loglik(s, Params(math.exp(theta[0]), math.exp(theta[1])))
    except (NumericError, DomainError, OverflowError):
        return -math.inf


def _newton(s, theta, tol, max_iter):
    """Damped Newton ascent; returns (theta, iterations, converged)."""
    cur = _safe_loglik(s, theta)
    if not math.isfinite(cur):
        return theta, 0, False
    for it in range(1, max_iter + 1):
        a, lam = math.exp(theta[0]), math.exp(theta[1])
        try:
            b = deriv_bundle(s, Params(a, lam))
        except (NumericError, DomainError):
            return theta, it, False
        g, H = _log_coords(b, a, lam)
        if np.max(np.abs(g)) < tol:
            return theta, it - 1, True
        # ascent direction: Newton if -H is positive definite, else shifted
        negH = -H
        shift = 0.0
        for _ in range(60):
            try:
                np.linalg.cholesky(negH + shift * np.eye(2))
                break
            except np.linalg.LinAlgError:
                shift = max(2.0 * shift, 1e-8 * (1.0 + np.abs(negH).max()))
        step = np.linalg.solve(negH + shift * np.eye(2), g)
        # log-scale steps beyond e^5 are never sensible
        biggest = np.max(np.abs(step))
        if biggest > 5.0:
            step *= 5.0 / biggest
        t = 1.0
        # changes below this are rounding noise in the log-likelihood sum
        slack = 1e-12 * (1.0 + abs(cur))
        for _ in range(31):
            cand = theta + t * step
            val = _safe_loglik(s, cand)
            if val >= cur - slack:
                break
            t *= 0.5
        else:
            # no ascent possible along the step: stationary up to rounding
            return theta, it, bool(np.max(np.abs(g)) < tol)
        theta, cur = cand, val
    a, lam = math.exp(theta[0]), math.exp(theta[1])
    try:
        b = deriv_bundle(s, Params(a, lam))
    except (NumericError, DomainError):
        return theta, max_iter, False
    g, _ = _log_coords(b, a, lam)
    return theta, max_iter, bool(np.max(np.abs(g)) < tol)


def _grid_start(s: CensoredSample) -> np.ndarray:
    """Best point of a 30 x 30 log grid, ``lam`` in units of 1/median(x)."""
    med = float(np.median(s.times))
    grid = np.geomspace(0.05, 20.0, 30)
    A, Lm = np.meshgrid(grid, grid / med, indexing="ij")
    with np.errstate(all="ignore"):
        vals = loglik_grid(s, A, Lm)
    vals = np.where(np.isfinite(vals), vals, -np.inf)
    i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
    return np.array([math.log(A[i, j]), math.log(Lm[i, j])])


def fit_mle(
    s: CensoredSample,
    init: Params | None = None,
    tol: float = 1e-8,
    max_iter: int = 200,
) -> MleFit:
    """Maximise the log-likelihood by damped Newton in (log alpha, log lam).

    Starts from ``init`` or from ``alpha = 1, lam = ln 2 / median(x)``; if
    that run does not converge it restarts from the best point of a coarse
    grid.

    Raises
    ------
    DegenerateSampleError
        Fewer than two observed failures.
    SingularFitError
        The observed information at the optimum is not positive definite.
    """
    if s.D < 2:
        raise DegenerateSampleError(f"need at least 2 observed failures, got D = {s.D}")
    if init is None:
        theta0 = np.array([0.0, math.log(math.log(2.0) / float(np.median(s.times)))])
    else:
        theta0 = np.log(init.as_tuple())
    theta, iters, ok = _newton(s, theta0, tol, max_iter)
    if not ok:
        log.debug("Newton from default start failed; restarting from grid")
        theta2, iters2, ok2 = _newton(s, _grid_start(s), tol, max_iter)
        iters += iters2
        if ok2 or _safe_loglik(s, theta2) > _safe_loglik(s, theta):
            theta, ok = theta2, ok2
    params = Params(math.exp(theta[0]), math.exp(theta[1]))
    b = deriv_bundle(s, params)
    g, _ = _log_coords(b, params.alpha, params.lam)
    info = -b.hessian()
    try:
        np.linalg.cholesky(info)
        tau = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        if ok:
            raise SingularFitError("observed information is not positive definite at the MLE")
        tau = np.full((2, 2), np.nan)
    tau = 0.5 * (tau + tau.T)
    se = (math.sqrt(tau[0, 0]), math.sqrt(tau[1, 1])) if np.all(np.isfinite(tau)) else (math.nan, math.nan)
    return MleFit(
        params=params,
        se=se,
        tau=tau,
        iterations=iters,
        converged=bool(ok),
        grad_norm=float(np.max(np.abs(g))),
        loglik=b.l,
        bundle=b,
    )


# ---------------------------------------------------------------------------
# profile likelihood

@dataclass(frozen=True)
class ProfilePoint:
    value: float
    profile_loglik: float
    inner_argmax: float
    ok: bool


def profile_loglik(
    s: CensoredSample,
    which: str,
    grid: Sequence[float],
    fit: MleFit | None = None,
) -> list[ProfilePoint]:
    """Profile log-likelihood of ``alpha`` or ``lam`` over ``grid``.

    The nuisance parameter is maximised by golden-section search on its log
    (tolerance 1e-10) inside a bracket found by a coarse scan around its MLE.
    Points whose maximiser sits on the scan boundary are flagged ``ok=False``.
    """
    if which not in ("alpha", "lambda", "lam"):
        raise DomainError("which must be 'alpha' or 'lambda'")
    grid = [float(g) for g in grid]
    if len(grid) < 2 or any(not g > 0 for g in grid):
        raise DomainError("grid needs at least two positive values")
    if fit is None:
        fit = fit_mle(s)
    profile_alpha = which == "alpha"
    centre = math.log(fit.lam if profile_alpha else fit.alpha)
    scan = centre + np.linspace(-6.0, 6.0, 121)

    def f(fixed, log_other):
        if profile_alpha:
            return _safe_loglik(s, np.array([math.log(fixed), log_other]))
        return _safe_loglik(s, np.array([log_other, math.log(fixed)]))

    out = []
    for g in grid:
        vals = np.array([f(g, v) for v in scan])
        k = int(np.argmax(vals))
        if not math.isfinite(vals[k]) or k in (0, len(scan) - 1):
            out.append(ProfilePoint(g, float(vals[k]), math.exp(scan[k]), False))
            continue
        try:
            res = optimize.minimize_scalar(
                lambda v: -f(g, v),
                bracket=(scan[k - 1], scan[k], scan[k + 1]),
                method="golden",
                tol=1e-10,
            )
            out.append(ProfilePoint(g, float(-res.fun), math.exp(res.x), bool(res.success)))
        except (ValueError, RuntimeError) as exc:
            log.warning("profile optimisation failed at %s=%g: %s", which, g, exc)
            out.append(ProfilePoint(g, float(vals[k]), math.exp(scan[k]), False))
    return out


# ---------------------------------------------------------------------------
# Wald-type intervals

@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def __contains__(self, v: float) -> bool:
        return self.lower <= v <= self.upper


def z_quantile(beta: float) -> float:
    """Upper ``beta / 2`` point of the standard normal."""
    if not 0 < beta < 1:
        raise DomainError("beta must lie in (0, 1)")
    return float(-special.ndtri(beta / 2.0))


def na_interval(fit: MleFit, beta: float) -> dict[str, Interval]:
    """Normal-approximation intervals ``estimate -/+ z se`` (may go negative)."""
    z = z_quantile(beta)
    a, lam = fit.params.as_tuple()
    ha, hl = z * fit.se[0], z * fit.se[1]
    return {"alpha": Interval(a - ha, a + ha), "lambda": Interval(lam - hl, lam + hl)}


def nl_interval(fit: MleFit, beta: float) -> dict[str, Interval]:
    """Log-transformed intervals ``estimate * exp(-/+ z se / estimate)``."""
    z = z_quantile(beta)
    out = {}
    for name, est, se in (("alpha", fit.alpha, fit.se[0]), ("lambda", fit.lam, fit.se[1])):
        k = z * se / est
        out[name] = Interval(est * math.exp(-k), est * math.exp(k))
    return out

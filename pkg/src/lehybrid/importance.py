"""Importance-sampling Bayes estimates and HPD intervals (independent gamma priors).

The posterior under independent gamma priors factors as

    Gamma_lam(D + c, d - sum x) * Gamma_{alpha|lam}(D + a, b - sum log(e^{lam x} - 1)) * h(alpha, lam)

so draws from the two gamma proposals, reweighted by ``h``, target the
posterior.  ``h`` collects the ``U`` factors, ``prod (e^{lam x_i} - 1)^{-1}``
and the proposal normalising rates.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .bayes import EstimateReport, EstimateRow, LossSpec, PriorSpec
from .censor import CensoredSample
from .dist import log_expm1
from .errors import DegenerateSampleError, DomainError, LEHybridError, ProposalError, UnreliableIntervalError
from .mle import Interval

__all__ = [
    "WeightedDraws",
    "is_available",
    "is_draws",
    "is_estimate",
    "is_report",
    "hpd_interval",
    "equal_tail_interval",
]

MIN_HPD_ESS = 50.0


@dataclass(frozen=True)
class WeightedDraws:
    alpha: np.ndarray
    lam: np.ndarray
    log_w: np.ndarray
    rejections: int = 0

    def __post_init__(self):
        if self.alpha.shape != self.lam.shape or self.alpha.shape != self.log_w.shape:
            raise DomainError("draw arrays must share one shape")
        if self.alpha.size < 1:
            raise DomainError("need at least one draw")
        if not np.all(np.isfinite(self.log_w)):
            raise DomainError("log weights must be finite")

    @property
    def N(self) -> int:
        return int(self.alpha.size)

    def normalized_weights(self) -> np.ndarray:
        w = np.exp(self.log_w - self.log_w.max())
        return w / w.sum()

    @property
    def ess(self) -> float:
        w = self.normalized_weights()
        return float(1.0 / np.sum(w * w))

    def target(self, name: str) -> np.ndarray:
        if name == "alpha":
            return self.alpha
        if name in ("lambda", "lam"):
            return self.lam
        raise DomainError(f"target must be 'alpha' or 'lambda', got {name!r}")

    def merge(self, other: "WeightedDraws") -> "WeightedDraws":
        """Concatenate two independent shards drawn for the same sample."""
        return WeightedDraws(
            np.concatenate([self.alpha, other.alpha]),
            np.concatenate([self.lam, other.lam]),
            np.concatenate([self.log_w, other.log_w]),
            self.rejections + other.rejections,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["alpha", "lambda", "log_weight"])
        for a, l, w in zip(self.alpha, self.lam, self.log_w):
            wr.writerow([f"{a:.17g}", f"{l:.17g}", f"{w:.17g}"])
        return buf.getvalue()


def _require_independent(prior: PriorSpec):
    if prior.kind != "independent":
        raise DomainError("importance sampling is defined for independent gamma priors only")


def is_available(s: CensoredSample, prior: PriorSpec) -> bool:
    """Whether the lam proposal is proper, i.e. ``d > sum(x)``."""
    return prior.kind == "independent" and s.D >= 1 and prior.d > float(np.sum(s.times))


def _log_h(s: CensoredSample, prior: PriorSpec, alpha, lam, rate_alpha, rate_lam):
    """Log of the weight function at draws ``(alpha, lam)``."""
    x = s.times
    Lx = log_expm1(lam[:, None] * x[None, :])
    w = np.asarray(s.removals, dtype=float) + 2.0
    out = (
        -(s.D + prior.a) * np.log(rate_alpha)
        - (s.D + prior.c) * math.log(rate_lam)
        - np.sum(w * np.logaddexp(0.0, alpha[:, None] * Lx), axis=1)
        - np.sum(Lx, axis=1)
    )
    if s.r_star > 0:
        out -= s.r_star * np.logaddexp(0.0, alpha * log_expm1(lam * s.T))
    return out


def is_draws(
    s: CensoredSample,
    prior: PriorSpec,
    N: int,
    rng: np.random.Generator,
) -> WeightedDraws:
    """Draw ``N`` weighted pairs from the gamma proposals.

    A ``lam`` draw whose conditional alpha-rate ``b - sum log(e^{lam x} - 1)``
    is not positive is rejected and redrawn; more than ``50 N`` rejections
    raise :class:`ProposalError`.

    Raises
    ------
    ProposalError
        ``d <= sum(x)``: the lam proposal is improper.  Rescale the time unit
        (e.g. days to years) so that the sum of failure times falls below d.
    """
    _require_independent(prior)
    if s.D < 1:
        raise DegenerateSampleError("importance sampling needs at least one failure")
    if N < 1:
        raise DomainError("N must be positive")
    sx = float(np.sum(s.times))
    rate_lam = prior.d - sx
    if not rate_lam > 0:
        raise ProposalError(
            f"lambda proposal rate d - sum(x) = {prior.d:g} - {sx:g} is not positive; "
            "rescale the time unit so that sum(x) < d"
        )
    shape_lam = s.D + prior.c
    shape_alpha = s.D + prior.a
    lam_parts, rate_parts = [], []
    have = rejected = 0
    while have < N:
        need = N - have
        lam = rng.gamma(shape_lam, 1.0 / rate_lam, size=need)
        rate_a = prior.b - np.sum(log_expm1(lam[:, None] * s.times[None, :]), axis=1)
        ok = rate_a > 0
        rejected += int(need - ok.sum())
        if rejected > 50 * N:
            raise ProposalError(
                f"alpha proposal rate was non-positive for {rejected} lambda draws (cap {50 * N})"
            )
        lam_parts.append(lam[ok])
        rate_parts.append(rate_a[ok])
        have += int(ok.sum())
    lam = np.concatenate(lam_parts)
    rate_a = np.concatenate(rate_parts)
    alpha = rng.gamma(shape_alpha, 1.0 / rate_a)
    log_w = _log_h(s, prior, alpha, lam, rate_a, rate_lam)
    return WeightedDraws(alpha, lam, log_w, rejected)


def is_estimate(draws: WeightedDraws, loss: LossSpec, target: str) -> float:
    """Self-normalised Bayes estimate of ``target`` under ``loss``."""
    if draws.N < 2:
        raise DomainError("need at least two draws")
    eta = draws.target(target)
    lw = draws.log_w - draws.log_w.max()
    if loss.kind == "LINEX":
        log_mean = special.logsumexp(lw - loss.param * eta) - special.logsumexp(lw)
        return float(-log_mean / loss.param)
    log_mean = special.logsumexp(lw - loss.param * np.log(eta)) - special.logsumexp(lw)
    return float(math.exp(-log_mean / loss.param))


def _sorted_weights(draws: WeightedDraws, target: str):
    x = draws.target(target)
    order = np.argsort(x, kind="stable")
    return x[order], draws.normalized_weights()[order]


def hpd_interval(draws: WeightedDraws, target: str, beta: float) -> Interval:
    """Shortest window of sorted draws holding weight ``>= 1 - beta``.

    Ties in length go to the smaller lower endpoint; both ends are draws.
    """
    if not 0 < beta < 1:
        raise DomainError("beta must lie in (0, 1)")
    ess = draws.ess
    if ess < MIN_HPD_ESS:
        raise UnreliableIntervalError(f"effective sample size {ess:.1f} is below {MIN_HPD_ESS:g}")
    x, w = _sorted_weights(draws, target)
    cum = np.concatenate([[0.0], np.cumsum(w)])
    need = 1.0 - beta
    # guard against the total drifting below 1 by rounding
    need = min(need, cum[-1])
    # window [i, j] holds cum[j + 1] - cum[i]
    j = np.searchsorted(cum, cum[:-1] + need * (1.0 - 1e-12), side="left") - 1
    valid = j < x.size
    i = np.flatnonzero(valid)
    j = j[valid]
    lengths = x[j] - x[i]
    k = int(np.argmin(lengths))  # first minimum = smallest lower endpoint
    return Interval(float(x[i[k]]), float(x[j[k]]))


def equal_tail_interval(draws: WeightedDraws, target: str, beta: float) -> Interval:
    """Weighted ``beta/2`` and ``1 - beta/2`` quantiles (first draw reaching each)."""
    x, w = _sorted_weights(draws, target)
    cum = np.cumsum(w)
    lo = int(np.searchsorted(cum, beta / 2.0, side="left"))
    hi = int(np.searchsorted(cum, (1.0 - beta / 2.0) * (1.0 - 1e-12), side="left"))
    return Interval(float(x[min(lo, x.size - 1)]), float(x[min(hi, x.size - 1)]))


def is_report(draws: WeightedDraws, prior: PriorSpec, losses) -> EstimateReport:
    rows = []
    for target in ("alpha", "lambda"):
        for loss in losses:
            try:
                est, status = is_estimate(draws, loss, target), "ok"
            except LEHybridError as exc:
                est, status = float("nan"), f"error: {exc}"
            rows.append(EstimateRow("is", target, prior.label, loss.label, prior.hyperparams, est, status))
    return EstimateReport(rows)

"""Bayes estimates by Lindley's expansion around the maximum likelihood point.

For a function ``phi`` of ``theta = (alpha, lam)`` the posterior mean is
approximated by

    phi + 1/2 (A + l30 B12 + l03 B21 + l21 C12 + l12 C21 + 2 P1 A12 + 2 P2 A21)

with ``A = sum v_ij tau_ij``, ``A_ij = v_i tau_ii + v_j tau_ji``,
``B_ij = (v_i tau_ii + v_j tau_ij) tau_ii`` and
``C_ij = 3 v_i tau_ii tau_ij + v_j (tau_ii tau_jj + 2 tau_ij^2)``, all
evaluated at the MLE.  ``v_i`` are derivatives of ``phi``, ``l_ij`` of the
log-likelihood, ``P_i`` of the log prior and ``tau`` the inverse observed
information.
"""
from __future__ import annotations

import logging
from typing import Iterable

import numpy as np

from .bayes import EstimateReport, EstimateRow, LossSpec, PriorSpec, log_prior_grad
from .censor import CensoredSample
from .errors import DomainError, LEHybridError, NumericError
from .lik import DerivBundle
from .mle import MleFit, fit_mle

log = logging.getLogger(__name__)

__all__ = ["lindley_expectation", "lindley_estimate", "lindley_from_fit", "lindley_report"]

_TARGETS = ("alpha", "lambda")


def lindley_expectation(
    phi: float,
    v: tuple[float, float],
    vv: np.ndarray,
    bundle: DerivBundle,
    tau: np.ndarray,
    P: tuple[float, float],
) -> float:
    """Second-order approximation of ``E[phi | data]``."""
    v1, v2 = v
    t11, t12, t21, t22 = tau[0, 0], tau[0, 1], tau[1, 0], tau[1, 1]
    A = float(np.sum(np.asarray(vv) * tau))
    B12 = (v1 * t11 + v2 * t12) * t11
    B21 = (v2 * t22 + v1 * t21) * t22
    C12 = 3.0 * v1 * t11 * t12 + v2 * (t11 * t22 + 2.0 * t12 ** 2)
    C21 = 3.0 * v2 * t22 * t21 + v1 * (t22 * t11 + 2.0 * t21 ** 2)
    A12 = v1 * t11 + v2 * t21
    A21 = v2 * t22 + v1 * t12
    b = bundle
    return phi + 0.5 * (
        A + b.l30 * B12 + b.l03 * B21 + b.l21 * C12 + b.l12 * C21
        + 2.0 * P[0] * A12 + 2.0 * P[1] * A21
    )


def _check_target(target: str) -> int:
    if target in ("alpha",):
        return 0
    if target in ("lambda", "lam"):
        return 1
    raise DomainError(f"target must be 'alpha' or 'lambda', got {target!r}")


def lindley_from_fit(fit: MleFit, prior: PriorSpec, loss: LossSpec, idx: int) -> float:
    eta = fit.params.as_tuple()[idx]
    phi, d1, d2 = loss.phi(eta)
    v = [0.0, 0.0]
    v[idx] = d1
    vv = np.zeros((2, 2))
    vv[idx, idx] = d2
    P = log_prior_grad(prior, fit.params)
    expectation = lindley_expectation(phi, (v[0], v[1]), vv, fit.bundle, fit.tau, P)
    return loss.invert(expectation)


def _usable_fit(s: CensoredSample, fit: MleFit | None) -> MleFit:
    if fit is None:
        fit = fit_mle(s)
    if not fit.converged:
        raise NumericError("MLE did not converge; Lindley expansion undefined")
    if not np.all(np.isfinite(fit.tau)):
        raise NumericError("inverse observed information unavailable")
    return fit


def lindley_estimate(
    s: CensoredSample,
    prior: PriorSpec,
    loss: LossSpec,
    target: str,
    fit: MleFit | None = None,
) -> float:
    """Approximate Bayes estimate of ``target`` under ``loss`` and ``prior``.

    ``fit`` may be passed to reuse an existing MLE; otherwise one is computed.

    Raises
    ------
    ApproximationError
        The approximated expectation of ``e^{-p eta}`` or ``eta^{-q}`` is not
        positive, so the loss transform cannot be inverted.
    """
    idx = _check_target(target)
    return lindley_from_fit(_usable_fit(s, fit), prior, loss, idx)


def lindley_report(
    s: CensoredSample,
    prior: PriorSpec,
    losses: Iterable[LossSpec],
    fit: MleFit | None = None,
) -> EstimateReport:
    """Both targets under every loss, sharing one MLE and derivative bundle.

    Failures are recorded per cell in the ``status`` column.
    """
    losses = list(losses)
    try:
        fit = _usable_fit(s, fit)
    except LEHybridError as exc:
        rows = [
            EstimateRow("lindley", t, prior.label, l.label, prior.hyperparams, float("nan"), f"error: {exc}")
            for t in _TARGETS
            for l in losses
        ]
        return EstimateReport(rows)
    rows = []
    for target in _TARGETS:
        idx = _check_target(target)
        for loss in losses:
            try:
                est, status = lindley_from_fit(fit, prior, loss, idx), "ok"
            except LEHybridError as exc:
                est, status = float("nan"), f"error: {exc}"
            rows.append(EstimateRow("lindley", target, prior.label, loss.label, prior.hyperparams, est, status))
    return EstimateReport(rows)

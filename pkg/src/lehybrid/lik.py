"""Log-likelihood of a censored LE sample and its derivatives up to third order.

Every censoring contribution has the form ``-w * log U(t)`` with
``U = 1 + (e^{lam t} - 1)^alpha``: ``w = R_i + 2`` at each observed failure
``x_i`` and ``w = r_star`` at the cap ``T``.  The brackets of the analytic
derivatives, e.g. ``(U U_aa - U_a^2) / U^2``, are evaluated through the
normalised partials ``U_* / U`` which stay bounded for large ``lam t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np
from scipy import special

from .censor import CensoredSample
from .dist import Params, log_expm1
from .errors import DegenerateSampleError, NumericError

__all__ = ["UVTerms", "DerivBundle", "uv_terms", "loglik", "loglik_grid", "score", "deriv_bundle"]


@dataclass(frozen=True)
class UVTerms:
    """``U`` and its partials at points ``t``, stored relative to ``U``.

    ``a``, ``l``, ``aa``, ... are ``U_alpha / U``, ``U_lambda / U``,
    ``U_alpha_alpha / U`` and so on; :meth:`raw` multiplies them back.
    """

    U: np.ndarray
    a: np.ndarray
    l: np.ndarray
    aa: np.ndarray
    ll: np.ndarray
    al: np.ndarray
    aaa: np.ndarray
    lll: np.ndarray
    aal: np.ndarray
    all: np.ndarray

    def raw(self, name: str) -> np.ndarray:
        """Unnormalised partial, e.g. ``raw("al")`` is ``U_alpha_lambda``."""
        return self.U * getattr(self, name)


def uv_terms(t, p: Params) -> UVTerms:
    """Partials of ``U(t) = 1 + (e^{lam t} - 1)^alpha`` for every ``t``."""
    a, lam = p.alpha, p.lam
    t = np.asarray(t, dtype=float)
    y = lam * t
    L = log_expm1(y)                     # log(e^{lam t} - 1)
    e = np.exp(-y)
    om = -np.expm1(-y)                   # 1 - e^{-lam t}
    r = 1.0 / om                         # e^{lam t} / (e^{lam t} - 1)
    s = special.expit(a * L)             # G / (1 + G), G = (e^{lam t} - 1)^alpha
    with np.errstate(over="ignore"):
        U = 1.0 + np.exp(a * L)
    trs = t * r * s
    return UVTerms(
        U=U,
        a=s * L,
        l=a * trs,
        aa=s * L ** 2,
        ll=a * t * trs * (a - e) / om,
        al=trs * (a * L + 1.0),
        aaa=s * L ** 3,
        lll=a * t ** 2 * trs * (a * a + (1.0 - 3.0 * a) * e + e * e) / om ** 2,
        aal=trs * L * (a * L + 2.0),
        all=t * trs * (a * (a - e) * L + 2.0 * a - e) / om,
    )


@dataclass(frozen=True)
class DerivBundle:
    l: float
    l10: float
    l01: float
    l20: float
    l02: float
    l11: float
    l30: float
    l03: float
    l21: float
    l12: float

    def hessian(self) -> np.ndarray:
        return np.array([[self.l20, self.l11], [self.l11, self.l02]])

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _require_data(s: CensoredSample) -> None:
    if s.D < 1:
        raise DegenerateSampleError("sample has no observed failures (D = 0)")


def _check_finite(name: str, value, where=None):
    if not np.all(np.isfinite(value)):
        if where is not None:
            bad = int(np.flatnonzero(~np.isfinite(where))[0])
            raise NumericError(f"{name} is not finite (first offending index {bad})")
        raise NumericError(f"{name} is not finite")


def _censor_points(s: CensoredSample):
    """Evaluation points and weights of the ``-w log U`` terms."""
    x = s.times
    w = np.asarray(s.removals, dtype=float) + 2.0
    if s.r_star > 0:
        return np.append(x, s.T), np.append(w, float(s.r_star))
    return x, w


def loglik(s: CensoredSample, p: Params) -> float:
    """Log-likelihood including all normalising factors of the density."""
    _require_data(s)
    a, lam = p.alpha, p.lam
    x = s.times
    D = s.D
    Lx = log_expm1(lam * x)
    _check_finite("log(e^{lam x} - 1)", Lx, Lx)
    val = (
        D * math.log(a) + D * math.log(lam) + lam * math.fsum(x)
        + (a - 1.0) * float(np.sum(Lx))
        - float(np.sum((np.asarray(s.removals) + 2.0) * np.logaddexp(0.0, a * Lx)))
    )
    if s.r_star > 0:
        val -= s.r_star * float(np.logaddexp(0.0, a * log_expm1(lam * s.T)))
    if not math.isfinite(val):
        raise NumericError("log-likelihood is not finite")
    return val


def loglik_grid(s: CensoredSample, alpha, lam) -> np.ndarray:
    """Vectorised log-likelihood over broadcast arrays of ``alpha`` and ``lam``."""
    _require_data(s)
    alpha = np.asarray(alpha, dtype=float)
    lam = np.asarray(lam, dtype=float)
    shape = np.broadcast_shapes(alpha.shape, lam.shape)
    a = np.broadcast_to(alpha, shape)[..., None]
    b = np.broadcast_to(lam, shape)[..., None]
    x = s.times
    D = s.D
    Lx = log_expm1(b * x)
    w = np.asarray(s.removals, dtype=float) + 2.0
    out = (
        D * np.log(a[..., 0]) + D * np.log(b[..., 0]) + b[..., 0] * x.sum()
        + (a[..., 0] - 1.0) * Lx.sum(axis=-1)
        - (w * np.logaddexp(0.0, a * Lx)).sum(axis=-1)
    )
    if s.r_star > 0:
        out = out - s.r_star * np.logaddexp(0.0, a[..., 0] * log_expm1(b[..., 0] * s.T))
    return out


def score(s: CensoredSample, p: Params) -> tuple[float, float]:
    """Gradient ``(d/d alpha, d/d lam)`` of :func:`loglik`."""
    _require_data(s)
    a, lam = p.alpha, p.lam
    x = s.times
    D = s.D
    t, w = _censor_points(s)
    uv = uv_terms(t, p)
    Lx = log_expm1(lam * x)
    xr = x / -np.expm1(-lam * x)          # x e^{lam x} / (e^{lam x} - 1)
    g_a = D / a + np.sum(Lx) - np.sum(w * uv.a)
    g_l = D / lam + np.sum(x) + (a - 1.0) * np.sum(xr) - np.sum(w * uv.l)
    _check_finite("score", (g_a, g_l))
    return float(g_a), float(g_l)


def deriv_bundle(s: CensoredSample, p: Params) -> DerivBundle:
    """Log-likelihood with all partials needed by Newton and Lindley."""
    _require_data(s)
    a, lam = p.alpha, p.lam
    x = s.times
    D = s.D
    t, w = _censor_points(s)
    u = uv_terms(t, p)

    Lx = log_expm1(lam * x)
    ex = np.exp(-lam * x)
    omx = -np.expm1(-lam * x)
    x_r = x / omx                                   # x E / (E - 1)
    x2_q = x ** 2 * ex / omx ** 2                   # x^2 E / (E - 1)^2
    x3_c = x ** 3 * ex * (1.0 + ex) / omx ** 3      # x^3 E (1 + E) / (E - 1)^3

    value = loglik(s, p)
    l10 = D / a + np.sum(Lx) - np.sum(w * u.a)
    l01 = D / lam + np.sum(x) + (a - 1.0) * np.sum(x_r) - np.sum(w * u.l)
    l20 = -D / a ** 2 - np.sum(w * (u.aa - u.a ** 2))
    l02 = -D / lam ** 2 - (a - 1.0) * np.sum(x2_q) - np.sum(w * (u.ll - u.l ** 2))
    l11 = np.sum(x_r) - np.sum(w * (u.al - u.a * u.l))
    l30 = 2.0 * D / a ** 3 - np.sum(w * (u.aaa - 3.0 * u.a * u.aa + 2.0 * u.a ** 3))
    l03 = (
        (a - 1.0) * np.sum(x3_c)
        - np.sum(w * (u.lll - 3.0 * u.l * u.ll + 2.0 * u.l ** 3))
        + 2.0 * D / lam ** 3
    )
    l21 = -np.sum(w * (u.aal - u.l * u.aa - 2.0 * u.a * u.al + 2.0 * u.a ** 2 * u.l))
    l12 = (
        -np.sum(w * (u.all - u.a * u.ll - 2.0 * u.l * u.al + 2.0 * u.a * u.l ** 2))
        - np.sum(x2_q)
    )
    out = DerivBundle(
        float(value), float(l10), float(l01), float(l20), float(l02), float(l11),
        float(l30), float(l03), float(l21), float(l12),
    )
    _check_finite("derivative bundle", list(out.as_dict().values()))
    return out

"""Prior families and loss functions shared by the Bayes estimators."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .dist import Params
from .errors import ApproximationError, DomainError

__all__ = ["PriorSpec", "LossSpec", "SQ", "log_prior", "log_prior_grad", "parse_loss"]


@dataclass(frozen=True)
class PriorSpec:
    """Independent gamma priors or the bivariate (noninformative-in-alpha) prior.

    ``independent``: alpha ~ Gamma(a, rate b), lam ~ Gamma(c, rate d).
    ``bivariate``:   pi(alpha, lam) proportional to lam^(c-2) e^(-d lam).

    Shapes must be positive; rates may be zero to allow flat limits.
    """

    kind: str
    a: float | None = None
    b: float | None = None
    c: float = 1.0
    d: float = 0.0

    def __post_init__(self):
        if self.kind not in ("independent", "bivariate"):
            raise DomainError(f"unknown prior kind {self.kind!r}")
        names = ("a", "b", "c", "d") if self.kind == "independent" else ("c", "d")
        for name in names:
            v = getattr(self, name)
            if v is None or not math.isfinite(v):
                raise DomainError(f"prior hyperparameter {name} must be finite")
            if name in ("a", "c") and v <= 0:
                raise DomainError(f"prior shape {name} must be positive, got {v}")
            if name in ("b", "d") and v < 0:
                raise DomainError(f"prior rate {name} must be nonnegative, got {v}")

    @classmethod
    def independent(cls, a: float, b: float, c: float, d: float) -> "PriorSpec":
        return cls("independent", float(a), float(b), float(c), float(d))

    @classmethod
    def bivariate(cls, c: float, d: float) -> "PriorSpec":
        return cls("bivariate", None, None, float(c), float(d))

    @property
    def label(self) -> str:
        return "U" if self.kind == "independent" else "B"

    @property
    def hyperparams(self) -> str:
        if self.kind == "independent":
            return f"a={self.a:g};b={self.b:g};c={self.c:g};d={self.d:g}"
        return f"c={self.c:g};d={self.d:g}"


def log_prior(prior: PriorSpec, alpha, lam):
    """Unnormalised log prior density (works on numpy arrays)."""
    import numpy as np

    alpha = np.asarray(alpha, dtype=float)
    lam = np.asarray(lam, dtype=float)
    out = (prior.c - (2.0 if prior.kind == "bivariate" else 1.0)) * np.log(lam) - prior.d * lam
    if prior.kind == "independent":
        out = out + (prior.a - 1.0) * np.log(alpha) - prior.b * alpha
    return out


def log_prior_grad(prior: PriorSpec, p: Params) -> tuple[float, float]:
    """Gradient ``(P1, P2)`` of the log prior."""
    if prior.kind == "independent":
        return ((prior.a - 1.0) / p.alpha - prior.b, (prior.c - 1.0) / p.lam - prior.d)
    return (0.0, (prior.c - 2.0) / p.lam - prior.d)


@dataclass(frozen=True)
class LossSpec:
    """Squared error, LINEX(p) or generalised entropy GE(q).

    Squared error is carried as GE with ``q = -1`` so the two share every
    arithmetic step.
    """

    kind: str
    param: float = -1.0
    requested: str = "SQ"

    def __post_init__(self):
        if self.kind not in ("LINEX", "GE"):
            raise DomainError(f"unknown loss kind {self.kind!r}")
        if not math.isfinite(self.param) or self.param == 0:
            raise DomainError(f"{self.kind} parameter must be finite and nonzero")

    @classmethod
    def linex(cls, p: float) -> "LossSpec":
        return cls("LINEX", float(p), "LINEX")

    @classmethod
    def ge(cls, q: float) -> "LossSpec":
        return cls("GE", float(q), "GE")

    @classmethod
    def sq(cls) -> "LossSpec":
        return cls("GE", -1.0, "SQ")

    @property
    def label(self) -> str:
        if self.requested == "SQ":
            return "SQ"
        key = "p" if self.kind == "LINEX" else "q"
        return f"{self.kind}({key}={self.param:g})"

    # Forward transform phi(eta) and its first two derivatives.
    def phi(self, eta: float) -> tuple[float, float, float]:
        k = self.param
        if self.kind == "LINEX":
            e = math.exp(-k * eta)
            return e, -k * e, k * k * e
        return eta ** -k, -k * eta ** (-k - 1.0), k * (k + 1.0) * eta ** (-k - 2.0)

    def forward(self, eta):
        """``E[phi]`` argument map: ``e^{-p eta}`` or ``eta^{-q}`` (numpy-aware)."""
        import numpy as np

        eta = np.asarray(eta, dtype=float)
        if self.kind == "LINEX":
            return np.exp(-self.param * eta)
        return eta ** -self.param

    def invert(self, expectation: float) -> float:
        """Map a posterior expectation of ``phi`` back to the Bayes estimate."""
        if not expectation > 0 or not math.isfinite(expectation):
            raise ApproximationError(
                f"{self.label}: approximated posterior expectation {float(expectation):.6g} is not positive"
            )
        if self.kind == "LINEX":
            return -math.log(expectation) / self.param
        return expectation ** (-1.0 / self.param)


SQ = LossSpec.sq()


def parse_loss(text: str) -> LossSpec:
    """``"SQ"``, ``"LINEX:0.5"`` / ``"p=0.5"`` or ``"GE:-0.25"`` / ``"q=-0.25"``."""
    t = text.strip()
    if t.upper() == "SQ":
        return LossSpec.sq()
    for sep in (":", "="):
        if sep in t:
            head, val = t.split(sep, 1)
            head = head.strip().upper()
            if head in ("LINEX", "P"):
                return LossSpec.linex(float(val))
            if head in ("GE", "Q"):
                return LossSpec.ge(float(val))
    raise DomainError(f"cannot parse loss {text!r}")


@dataclass(frozen=True)
class EstimateRow:
    method: str
    target: str
    prior: str
    loss: str
    hyperparams: str
    estimate: float
    status: str = "ok"


@dataclass
class EstimateReport:
    """Point estimates keyed by (method, target, prior, loss)."""

    rows: list

    COLUMNS = ("method", "target", "prior", "loss", "hyperparams", "estimate", "status")

    def get(self, target: str, loss: str, prior: str | None = None, method: str | None = None):
        for r in self.rows:
            if r.target == target and r.loss == loss and (prior is None or r.prior == prior) and (
                method is None or r.method == method
            ):
                return r
        raise KeyError((target, loss, prior, method))

    def as_records(self) -> list[dict]:
        return [{c: getattr(r, c) for c in self.COLUMNS} for r in self.rows]

"""Progressive type-I hybrid censoring: designs, observed samples, simulation.

A design places ``n`` units on test with a failure budget ``m``, planned
removals ``R[0..m-1]`` and a time cap ``T``.  The test stops at the earlier of
the m-th failure (Case-A) or ``T`` (Case-B).  In Case-B the ``r_star``
survivors still on test at ``T`` are withdrawn there.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dist import Params, le_quantile
from .errors import DataError, SchemeError

__all__ = [
    "CensoringScheme",
    "CensoredSample",
    "parse_scheme",
    "format_scheme",
    "complete_sample",
    "observed_sample",
    "progressive_type2_uniforms",
    "generate_sample",
    "case_b_mass",
]

_TOKEN = re.compile(r"^\s*(\d+)\s*(?:\*\s*(\d+)\s*)?$")


@dataclass(frozen=True)
class CensoringScheme:
    n: int
    m: int
    R: tuple[int, ...]
    T: float

    def __post_init__(self):
        R = tuple(int(r) for r in self.R)
        object.__setattr__(self, "R", R)
        if int(self.n) != self.n or self.n < 1:
            raise SchemeError(f"n must be a positive integer, got {self.n!r}")
        if int(self.m) != self.m or not 1 <= self.m <= self.n:
            raise SchemeError(f"m must be an integer in [1, n], got {self.m!r}")
        if len(R) != self.m:
            raise SchemeError(f"removal sequence has length {len(R)}, expected m = {self.m}")
        if any(r < 0 for r in R):
            raise SchemeError("removals must be nonnegative")
        if self.m + sum(R) != self.n:
            raise SchemeError(
                f"m + sum(R) = {self.m + sum(R)} does not equal n = {self.n}"
            )
        T = float(self.T)
        if math.isnan(T) or T <= 0:
            raise SchemeError(f"T must be positive, got {self.T!r}")
        object.__setattr__(self, "T", T)

    @property
    def text(self) -> str:
        return format_scheme(self.R)

    def with_T(self, T: float) -> "CensoringScheme":
        return CensoringScheme(self.n, self.m, self.R, T)


def parse_scheme(text: str, n: int, m: int, T: float) -> CensoringScheme:
    """Expand shorthand such as ``"(0*9,25)"`` into a validated scheme.

    Each comma-separated token is either ``k`` or ``k*r`` (``k`` repeated
    ``r`` times).  Parentheses are optional.
    """
    body = text.strip()
    if body.startswith("(") and body.endswith(")"):
        body = body[1:-1]
    if not body.strip():
        raise SchemeError(f"malformed scheme {text!r}: no tokens")
    R: list[int] = []
    for tok in body.split(","):
        if tok.strip().startswith("-"):
            raise SchemeError(f"malformed scheme {text!r}: negative removal in token {tok.strip()!r}")
        match = _TOKEN.match(tok)
        if match is None:
            raise SchemeError(f"malformed scheme {text!r}: bad token {tok.strip()!r}")
        value = int(match.group(1))
        reps = int(match.group(2)) if match.group(2) is not None else 1
        R.extend([value] * reps)
    return CensoringScheme(n, m, tuple(R), T)


def format_scheme(R: Sequence[int]) -> str:
    """Inverse of :func:`parse_scheme` using run-length shorthand."""
    parts = []
    i = 0
    R = list(R)
    while i < len(R):
        j = i
        while j < len(R) and R[j] == R[i]:
            j += 1
        run = j - i
        parts.append(f"{R[i]}*{run}" if run > 1 else str(R[i]))
        i = j
    return "(" + ",".join(parts) + ")"


@dataclass(frozen=True)
class CensoredSample:
    """Observed failure times of one progressive type-I hybrid test.

    ``removals`` holds the planned removals actually applied (one per
    observed failure); ``r_star`` is the number withdrawn at ``T`` (zero in
    Case-A).
    """

    times: np.ndarray
    removals: tuple[int, ...]
    case: str
    D: int
    r_star: int
    T: float
    scheme: CensoringScheme = field(repr=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "removals", tuple(int(r) for r in self.removals))
        D = int(self.D)
        if times.shape != (D,) or len(self.removals) != D:
            raise DataError("times and removals must both have length D")
        if np.any(~np.isfinite(times)) or np.any(times <= 0):
            raise DataError("failure times must be positive and finite")
        if np.any(np.diff(times) < 0):
            raise DataError("failure times must be sorted")
        if D and times[-1] >= self.T:
            raise DataError("every observed failure must precede T")
        if self.case == "A":
            if D != self.scheme.m or self.r_star != 0:
                raise DataError("Case-A requires D = m and r_star = 0")
        elif self.case == "B":
            if D >= self.scheme.m:
                raise DataError("Case-B requires D < m")
            if self.r_star != self.scheme.n - sum(self.removals) - D or self.r_star < 0:
                raise DataError("Case-B requires r_star = n - sum(R[:D]) - D >= 0")
        else:
            raise DataError(f"case must be 'A' or 'B', got {self.case!r}")
        if self.removals != self.scheme.R[:D]:
            raise DataError("removals must be the first D planned removals")

    @property
    def n(self) -> int:
        return self.scheme.n

    @property
    def m(self) -> int:
        return self.scheme.m

    def to_dict(self) -> dict:
        return {
            "n": self.scheme.n,
            "m": self.scheme.m,
            "R": list(self.scheme.R),
            "T": self.T if math.isfinite(self.T) else None,
            "case": self.case,
            "D": self.D,
            "r_star": self.r_star,
            "times": [float(t) for t in self.times],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "CensoredSample":
        T = math.inf if d.get("T") is None else float(d["T"])
        scheme = CensoringScheme(int(d["n"]), int(d["m"]), tuple(d["R"]), T)
        D = int(d["D"])
        return cls(
            times=np.asarray(d["times"], dtype=float),
            removals=scheme.R[:D],
            case=d["case"],
            D=D,
            r_star=int(d["r_star"]),
            T=T,
            scheme=scheme,
        )

    @classmethod
    def from_json(cls, text: str) -> "CensoredSample":
        return cls.from_dict(json.loads(text))


def observed_sample(times: Sequence[float], scheme: CensoringScheme) -> CensoredSample:
    """Wrap observed failure times under ``scheme``, inferring the case.

    Ties are accepted (real data are often recorded on a coarse grid).
    """
    x = np.sort(np.asarray(times, dtype=float))
    D = x.size
    if D > scheme.m:
        raise DataError(f"{D} failures observed but the design allows only m = {scheme.m}")
    if D and x[-1] >= scheme.T:
        raise DataError(f"failure at {x[-1]} is not before T = {scheme.T}")
    if D == scheme.m:
        case, r_star = "A", 0
    else:
        case, r_star = "B", scheme.n - sum(scheme.R[:D]) - D
        if r_star < 0:
            raise DataError("removals exceed the units on test")
    return CensoredSample(x, scheme.R[:D], case, D, r_star, scheme.T, scheme)


def complete_sample(times: Sequence[float]) -> CensoredSample:
    """Uncensored data as the degenerate design m = n, R = 0, T = inf."""
    x = np.asarray(times, dtype=float)
    n = x.size
    if n < 1:
        raise DataError("no observations")
    return observed_sample(x, CensoringScheme(n, n, (0,) * n, math.inf))


def progressive_type2_uniforms(R: Sequence[int], rng: np.random.Generator) -> np.ndarray:
    """Progressive type-II censored order statistics from U(0, 1).

    Uniform-spacings construction: ``V_i = W_i ** (1 / (i + R_m + ... +
    R_{m-i+1}))`` and ``U_i = 1 - V_m V_{m-1} ... V_{m-i+1}``.
    """
    R = np.asarray(R, dtype=float)
    m = R.size
    i = np.arange(1, m + 1)
    tail = np.cumsum(R[::-1])  # R_m + ... + R_{m-i+1}
    w = rng.random(m)
    w[w == 0.0] = np.nextafter(0.0, 1.0)
    log_v = np.log(w) / (i + tail)  # log V_i
    # U_i = 1 - prod_{k=m-i+1}^{m} V_k
    log_prod = np.cumsum(log_v[::-1])
    return -np.expm1(log_prod)


def generate_sample(
    scheme: CensoringScheme,
    p: Params,
    rng: np.random.Generator,
    quantile: Callable | None = None,
) -> CensoredSample:
    """Simulate one progressive type-I hybrid censored sample.

    A full progressive type-II sample of size m is drawn, then truncated at
    ``T``.  ``quantile`` maps uniforms to lifetimes; it defaults to the
    logistic-exponential quantile at ``p``.  ``D = 0`` is a legal outcome.
    """
    u = progressive_type2_uniforms(scheme.R, rng)
    u = np.clip(u, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    x = le_quantile(u, p) if quantile is None else quantile(u)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x[-1] < scheme.T:
        return CensoredSample(x, scheme.R, "A", scheme.m, 0, scheme.T, scheme)
    D = int(np.count_nonzero(x < scheme.T))
    r_star = scheme.n - sum(scheme.R[:D]) - D
    return CensoredSample(x[:D], scheme.R[:D], "B", D, r_star, scheme.T, scheme)


def case_b_mass(sample: CensoredSample) -> int:
    """Units withdrawn at ``T``, re-derived from the design and checked."""
    if sample.case == "A":
        expected = 0
    else:
        expected = sample.scheme.n - sum(sample.scheme.R[: sample.D]) - sample.D
    if expected != sample.r_star:
        raise AssertionError(
            f"stored r_star {sample.r_star} disagrees with recomputed {expected}"
        )
    return expected

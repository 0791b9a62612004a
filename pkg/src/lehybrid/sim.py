"""Monte Carlo harness: replicate samples, evaluate estimators, aggregate tables.

Every replicate owns a random stream derived from ``(seed, scheme index,
replicate index)``, and every aggregate is a correctly rounded sum
(``math.fsum``).  Tables therefore do not depend on how replicates are split
into shards or in which order shards finish.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .bayes import LossSpec, PriorSpec
from .censor import CensoringScheme, generate_sample, parse_scheme
from .dist import Params
from .errors import DataError, DomainError, LEHybridError
from .importance import hpd_interval, is_available, is_draws, is_estimate
from .lindley import lindley_from_fit
from .mle import MleFit, fit_mle, na_interval, nl_interval

log = logging.getLogger(__name__)

__all__ = [
    "SchemeSpec",
    "SimConfig",
    "SimTable",
    "ReplicateResult",
    "mse",
    "pivot_value",
    "coverage",
    "replicate_rng",
    "run_replicate",
    "run_shard",
    "merge_shards",
    "run_simulation",
    "load_config",
]

PIVOTS = ("Q1", "Q2", "Q3")
PIVOT_MODES = ("printed", "corrected")
MAX_REDRAWS = 1000
FLAG_FRACTION = 0.2


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class SchemeSpec:
    n: int
    m: int
    scheme: str
    T: float

    def build(self) -> CensoringScheme:
        return parse_scheme(self.scheme, self.n, self.m, self.T)

    @property
    def key(self) -> str:
        return f"n={self.n};m={self.m};R={self.scheme};T={self.T:g}"


@dataclass(frozen=True)
class SimConfig:
    """Settings of one simulation study.

    ``levels`` are confidence levels ``1 - beta`` for the NA, NL and HPD
    intervals; ``coverage_z`` are the cut-offs for the pivot coverage table.
    SQ is always evaluated in addition to the LINEX ``p_grid`` and GE
    ``q_grid``.  ``N_is = 0`` switches importance sampling off.
    """

    truth: Params
    schemes: tuple[SchemeSpec, ...]
    M: int = 2000
    priors: tuple[PriorSpec, ...] = (PriorSpec.independent(3, 2, 3, 4), PriorSpec.bivariate(3, 4))
    p_grid: tuple[float, ...] = (-0.05, 0.5, 1.0)
    q_grid: tuple[float, ...] = (-0.5, -0.25, 0.25)
    levels: tuple[float, ...] = (0.90, 0.95)
    coverage_z: tuple[float, ...] = (1.65, 1.96)
    seed: int = 20240601
    N_is: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "schemes", tuple(self.schemes))
        object.__setattr__(self, "priors", tuple(self.priors))
        for name in ("p_grid", "q_grid", "levels", "coverage_z"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if int(self.M) != self.M or self.M < 1:
            raise DomainError("M must be a positive integer")
        if not self.schemes:
            raise DomainError("at least one scheme is required")
        if not self.priors:
            raise DomainError("at least one prior is required")
        if not self.levels or any(not 0 < v < 1 for v in self.levels):
            raise DomainError("levels must be a nonempty list in (0, 1)")
        if not self.coverage_z or any(not v > 0 for v in self.coverage_z):
            raise DomainError("coverage_z must be a nonempty list of positive reals")
        if self.N_is < 0:
            raise DomainError("N_is must be nonnegative")
        for s in self.schemes:
            s.build()

    @property
    def losses(self) -> tuple[LossSpec, ...]:
        out = [LossSpec.sq()]
        out += [LossSpec.linex(p) for p in self.p_grid]
        out += [LossSpec.ge(q) for q in self.q_grid]
        return tuple(out)

    def to_dict(self) -> dict:
        return {
            "truth": {"alpha": self.truth.alpha, "lambda": self.truth.lam},
            "schemes": [asdict(s) for s in self.schemes],
            "M": self.M,
            "priors": [
                {"kind": p.kind, "a": p.a, "b": p.b, "c": p.c, "d": p.d} if p.kind == "independent"
                else {"kind": p.kind, "c": p.c, "d": p.d}
                for p in self.priors
            ],
            "p_grid": list(self.p_grid),
            "q_grid": list(self.q_grid),
            "levels": list(self.levels),
            "coverage_z": list(self.coverage_z),
            "seed": self.seed,
            "N_is": self.N_is,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        try:
            truth = d["truth"]
            priors = []
            for p in d.get("priors", [{"kind": "independent", "a": 3, "b": 2, "c": 3, "d": 4},
                                      {"kind": "bivariate", "c": 3, "d": 4}]):
                if p["kind"] == "independent":
                    priors.append(PriorSpec.independent(p["a"], p["b"], p["c"], p["d"]))
                else:
                    priors.append(PriorSpec.bivariate(p["c"], p["d"]))
            kwargs = {k: d[k] for k in ("M", "p_grid", "q_grid", "levels", "coverage_z", "seed", "N_is") if k in d}
            return cls(
                truth=Params(float(truth["alpha"]), float(truth.get("lambda", truth.get("lam")))),
                schemes=tuple(
                    SchemeSpec(int(s["n"]), int(s["m"]), str(s["scheme"]), float(s["T"])) for s in d["schemes"]
                ),
                priors=tuple(priors),
                **kwargs,
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"invalid simulation config: {exc!r}") from exc


def load_config(path) -> SimConfig:
    """Read a :class:`SimConfig` from a ``.json`` or ``.toml`` file."""
    path = str(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    if path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        try:
            data = tomllib.loads(raw.decode("utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise DataError(f"{path}: {exc}") from exc
    else:
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: {exc}") from exc
    return SimConfig.from_dict(data)


# ---------------------------------------------------------------------------
# statistics

def mse(values: Sequence[float], truth: float) -> float:
    """Mean squared deviation from ``truth`` (correctly rounded sum)."""
    values = list(values)
    if not values:
        raise DomainError("mse of an empty sequence")
    return math.fsum((v - truth) ** 2 for v in values) / len(values)


def _mean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values)


def pivot_value(fit: MleFit, truth: Params, pivot: str, mode: str = "printed") -> float:
    """Studentised pivot ``Q1``, ``Q2`` or ``Q3`` of one fit.

    ``printed`` keeps the multipliers in the denominators:
    ``Q1 = (a - alpha) / (lam_hat sqrt(tau11))``,
    ``Q2 = (a - alpha) / (lam sqrt(tau11))``,
    ``Q3 = (l - lam) / (lam_hat sqrt(tau22))``.
    ``corrected`` divides by the plain standard error.
    """
    if mode not in PIVOT_MODES:
        raise DomainError(f"pivot mode must be one of {PIVOT_MODES}")
    se_a, se_l = math.sqrt(fit.tau[0, 0]), math.sqrt(fit.tau[1, 1])
    if pivot == "Q1":
        mult = fit.lam if mode == "printed" else 1.0
        return (fit.alpha - truth.alpha) / (mult * se_a)
    if pivot == "Q2":
        mult = truth.lam if mode == "printed" else 1.0
        return (fit.alpha - truth.alpha) / (mult * se_a)
    if pivot == "Q3":
        mult = fit.lam if mode == "printed" else 1.0
        return (fit.lam - truth.lam) / (mult * se_l)
    raise DomainError(f"pivot must be one of {PIVOTS}")


def coverage(fits: Iterable[tuple[MleFit, Params]], pivot: str, z: float, mode: str = "printed") -> float:
    """Fraction of converged fits whose pivot lies in ``[-z, z]``."""
    inside = total = 0
    for fit, truth in fits:
        if not fit.converged:
            continue
        total += 1
        inside += abs(pivot_value(fit, truth, pivot, mode)) <= z
    if total == 0:
        raise DomainError("no converged fits")
    return inside / total


# ---------------------------------------------------------------------------
# one replicate

@dataclass
class ReplicateResult:
    """Everything one replicate contributes to the tables.

    ``estimates`` maps ``(estimator, prior, loss, target)`` to a value, NaN on
    a per-cell failure or None when the estimator is structurally
    unavailable.  ``lengths`` maps ``(method, level, target)`` to interval
    lengths and ``pivots`` maps ``(pivot, mode)`` to values.
    """

    scheme_idx: int
    rep: int
    redraws: int = 0
    discarded: str | None = None
    D: int = 0
    estimates: dict = field(default_factory=dict)
    lengths: dict = field(default_factory=dict)
    pivots: dict = field(default_factory=dict)


def replicate_rng(seed: int, scheme_idx: int, rep: int) -> np.random.Generator:
    """Counter-derived stream of one replicate, independent of run layout."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(scheme_idx, rep)))


def run_replicate(cfg: SimConfig, scheme_idx: int, rep: int) -> ReplicateResult:
    out = ReplicateResult(scheme_idx, rep)
    scheme = cfg.schemes[scheme_idx].build()
    rng = replicate_rng(cfg.seed, scheme_idx, rep)
    for _ in range(MAX_REDRAWS):
        s = generate_sample(scheme, cfg.truth, rng)
        if s.D >= 2:
            break
        out.redraws += 1
    else:
        out.discarded = "D<2"
        return out
    out.D = s.D
    try:
        fit = fit_mle(s)
    except LEHybridError as exc:
        out.discarded = f"mle: {exc}"
        return out
    if not fit.converged:
        out.discarded = "mle: not converged"
        return out

    out.estimates[("MLE", "-", "-", "alpha")] = fit.alpha
    out.estimates[("MLE", "-", "-", "lambda")] = fit.lam
    losses = cfg.losses
    for prior in cfg.priors:
        for idx, target in enumerate(("alpha", "lambda")):
            for loss in losses:
                try:
                    v = lindley_from_fit(fit, prior, loss, idx)
                except LEHybridError:
                    v = math.nan
                out.estimates[("Lindley", prior.label, loss.label, target)] = v

    for level in cfg.levels:
        beta = 1.0 - level
        for method, fn in (("NA", na_interval), ("NL", nl_interval)):
            for target, iv in fn(fit, beta).items():
                out.lengths[(method, level, target)] = iv.length

    if cfg.N_is > 0:
        for prior in cfg.priors:
            if prior.kind != "independent":
                continue
            draws = None
            # None marks a structurally unavailable cell, NaN a failed one
            missing = None
            if is_available(s, prior):
                try:
                    draws = is_draws(s, prior, cfg.N_is, rng)
                except LEHybridError:
                    missing = math.nan
            for target in ("alpha", "lambda"):
                for loss in losses:
                    key = ("IS", prior.label, loss.label, target)
                    out.estimates[key] = missing if draws is None else is_estimate(draws, loss, target)
                for level in cfg.levels:
                    key = ("HPD", level, target)
                    if draws is None:
                        out.lengths[key] = missing
                        continue
                    try:
                        out.lengths[key] = hpd_interval(draws, target, 1.0 - level).length
                    except LEHybridError:
                        out.lengths[key] = math.nan
            break  # HPD/IS columns follow the first independent prior

    for pivot in PIVOTS:
        for mode in PIVOT_MODES:
            out.pivots[(pivot, mode)] = pivot_value(fit, cfg.truth, pivot, mode)
    return out


# ---------------------------------------------------------------------------
# shards and aggregation

def _work_units(cfg: SimConfig):
    return [(i, r) for i in range(len(cfg.schemes)) for r in range(cfg.M)]


def run_shard(cfg: SimConfig, shard: int = 0, n_shards: int = 1) -> list[ReplicateResult]:
    """Replicates whose global index is congruent to ``shard`` mod ``n_shards``."""
    if not 0 <= shard < n_shards:
        raise DomainError("shard index out of range")
    units = _work_units(cfg)[shard::n_shards]
    return [run_replicate(cfg, i, r) for i, r in units]


def _run_shard_args(args):
    return run_shard(*args)


@dataclass
class SimTable:
    """Aggregated simulation output, one row list per table kind."""

    estimates: list[dict]
    intervals: list[dict]
    coverage: list[dict]
    schemes: list[dict]

    ESTIMATE_COLUMNS = ("scheme", "estimator", "prior", "loss", "target", "n", "n_failed", "n_unavailable", "average", "mse")
    INTERVAL_COLUMNS = ("scheme", "method", "level", "target", "n", "n_failed", "n_unavailable", "average_length")
    COVERAGE_COLUMNS = ("scheme", "pivot", "mode", "z", "n", "coverage")
    SCHEME_COLUMNS = ("scheme", "M", "used", "discarded", "redraws", "flagged")

    def estimate(self, scheme: str, estimator: str, target: str, loss: str = "-", prior: str = "-") -> dict:
        for r in self.estimates:
            if (r["scheme"], r["estimator"], r["target"], r["loss"], r["prior"]) == (scheme, estimator, target, loss, prior):
                return r
        raise KeyError((scheme, estimator, target, loss, prior))

    def interval(self, scheme: str, method: str, level: float, target: str) -> dict:
        for r in self.intervals:
            if (r["scheme"], r["method"], r["level"], r["target"]) == (scheme, method, level, target):
                return r
        raise KeyError((scheme, method, level, target))

    def coverage_of(self, scheme: str, pivot: str, z: float, mode: str = "printed") -> dict:
        for r in self.coverage:
            if (r["scheme"], r["pivot"], r["mode"], r["z"]) == (scheme, pivot, mode, z):
                return r
        raise KeyError((scheme, pivot, mode, z))

    def to_csv(self, kind: str) -> str:
        rows = getattr(self, kind)
        columns = getattr(self, f"{kind.rstrip('s').upper()}_COLUMNS")
        return rows_to_csv(rows, columns)


def format_value(v) -> str:
    """Fixed CSV rendering: 9 significant digits, blank for missing."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.9g}"
    return str(v)


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(columns)
    for r in rows:
        wr.writerow([format_value(r[c]) for c in columns])
    return buf.getvalue()


def _cell_stats(values, truth=None):
    ok = [v for v in values if v is not None and math.isfinite(v)]
    failed = sum(1 for v in values if v is not None and not math.isfinite(v))
    unavailable = sum(1 for v in values if v is None)
    row = {"n": len(ok), "n_failed": failed, "n_unavailable": unavailable}
    row["average"] = _mean(ok) if ok else math.nan
    if truth is not None:
        row["mse"] = mse(ok, truth) if ok else math.nan
    return row


def merge_shards(cfg: SimConfig, shards: Iterable[Sequence[ReplicateResult]]) -> SimTable:
    """Aggregate replicate results from any shard layout into a table."""
    results = sorted((r for sh in shards for r in sh), key=lambda r: (r.scheme_idx, r.rep))
    expected = _work_units(cfg)
    if [(r.scheme_idx, r.rep) for r in results] != expected:
        raise DomainError("shards do not cover every replicate exactly once")
    truth = {"alpha": cfg.truth.alpha, "lambda": cfg.truth.lam}
    est_rows, int_rows, cov_rows, scheme_rows = [], [], [], []
    for si, spec in enumerate(cfg.schemes):
        reps = [r for r in results if r.scheme_idx == si]
        used = [r for r in reps if r.discarded is None]
        discarded = len(reps) - len(used)
        scheme_rows.append({
            "scheme": spec.key,
            "M": cfg.M,
            "used": len(used),
            "discarded": discarded,
            "redraws": sum(r.redraws for r in reps),
            "flagged": discarded > FLAG_FRACTION * cfg.M,
        })
        if discarded > FLAG_FRACTION * cfg.M:
            log.warning("scheme %s: %d of %d replicates discarded", spec.key, discarded, cfg.M)
        est_keys = list(used[0].estimates) if used else []
        for key in est_keys:
            estimator, prior, loss, target = key
            stats = _cell_stats([r.estimates.get(key) for r in used], truth[target])
            est_rows.append({"scheme": spec.key, "estimator": estimator, "prior": prior, "loss": loss,
                             "target": target, **stats})
        len_keys = list(used[0].lengths) if used else []
        for key in len_keys:
            method, level, target = key
            stats = _cell_stats([r.lengths.get(key) for r in used])
            int_rows.append({"scheme": spec.key, "method": method, "level": level, "target": target,
                             "n": stats["n"], "n_failed": stats["n_failed"],
                             "n_unavailable": stats["n_unavailable"], "average_length": stats["average"]})
        for pivot in PIVOTS:
            for mode in PIVOT_MODES:
                vals = [r.pivots[(pivot, mode)] for r in used]
                for z in cfg.coverage_z:
                    cov = sum(1 for v in vals if abs(v) <= z) / len(vals) if vals else math.nan
                    cov_rows.append({"scheme": spec.key, "pivot": pivot, "mode": mode, "z": z,
                                     "n": len(vals), "coverage": cov})
    return SimTable(est_rows, int_rows, cov_rows, scheme_rows)


def run_simulation(cfg: SimConfig, n_shards: int = 1, jobs: int = 1) -> SimTable:
    """Run every replicate of ``cfg`` and aggregate.

    ``n_shards`` splits the work; ``jobs > 1`` runs shards in worker
    processes.  The table is identical for every choice of both.
    """
    if n_shards < 1 or jobs < 1:
        raise DomainError("n_shards and jobs must be positive")
    args = [(cfg, k, n_shards) for k in range(n_shards)]
    if jobs > 1 and n_shards > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            shards = list(pool.map(_run_shard_args, args))
    else:
        shards = [_run_shard_args(a) for a in args]
    return merge_shards(cfg, shards)

"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data or I/O error, 3 numeric or
model failure.  Outputs are pure functions of inputs, flags and seed; the
run manifest lists every file with its sha256.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bayes import LossSpec, PriorSpec
from .censor import CensoringScheme, complete_sample, generate_sample, observed_sample, parse_scheme
from .datasets import guinea_pigs, read_values
from .dist import FAMILY_TAGS, Params
from .errors import DataError, DomainError, LEHybridError, NumericError, SchemeError
from .gof import SUMMARY_COLUMNS, ecdf_points, fit_all, hist_density, pp_points, qq_points
from .importance import hpd_interval, is_available, is_draws, is_report
from .lindley import lindley_report
from .mle import fit_mle, na_interval, nl_interval, profile_loglik
from .sim import SimConfig, load_config, rows_to_csv, run_simulation

log = logging.getLogger("lehybrid")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# helpers

def _floats(text: str, count: int | None = None, name: str = "value") -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{name}: expected comma-separated numbers, got {text!r}") from None
    if count is not None and len(vals) != count:
        raise UsageError(f"{name}: expected {count} numbers, got {len(vals)}")
    return vals


def _grid(values: list[str] | None, default: list[float], name: str) -> list[float]:
    if not values:
        return default
    out: list[float] = []
    for v in values:
        out += _floats(v, name=name)
    return out


class _Outputs:
    """Collects written files so the manifest can list their digests."""

    def __init__(self, out_dir: str):
        self.dir = Path(out_dir)
        self.files: list[tuple[str, str]] = []

    def write(self, name: str, text: str) -> None:
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
            data = text.encode("utf-8")
            (self.dir / name).write_bytes(data)
        except OSError as exc:
            raise DataError(f"cannot write {str(self.dir / name)!r}: {exc.strerror or exc}") from exc
        self.files.append((name, hashlib.sha256(data).hexdigest()))

    def manifest(self, command: str, config: dict, seed=None, counts=None, extra=None, wall_time=None):
        canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
        body = {
            "command": command,
            "version": __version__,
            "config": config,
            "config_sha256": hashlib.sha256(canon.encode()).hexdigest(),
            "seed": seed,
            "counts": counts or {},
            "outputs": [{"file": f, "sha256": d} for f, d in self.files],
        }
        if extra:
            body.update(extra)
        if wall_time is not None:
            body["wall_time_s"] = wall_time
        self.write("manifest.json", json.dumps(body, indent=2, sort_keys=True) + "\n")


def _load_times(path: str) -> np.ndarray:
    if path in ("guinea-pigs", ":guinea-pigs"):
        return guinea_pigs()
    return read_values(path)


def _sample_from_args(args, times: np.ndarray):
    if args.complete:
        if any(v is not None for v in (args.n, args.m, args.scheme, args.T)):
            raise UsageError("--complete cannot be combined with --n/--m/--scheme/--T")
        return complete_sample(times)
    if args.n is None or args.m is None or args.scheme is None or args.T is None:
        raise UsageError("give --complete or all of --n, --m, --scheme and --T")
    return observed_sample(times, parse_scheme(args.scheme, args.n, args.m, args.T))


def _add_scheme_args(p, with_complete=True):
    if with_complete:
        p.add_argument("--complete", action="store_true", help="data are uncensored (m = n, R = 0, no cap)")
    p.add_argument("--n", type=int, help="units on test")
    p.add_argument("--m", type=int, help="failure budget")
    p.add_argument("--scheme", help='removal pattern, e.g. "(25,0*9)"')
    p.add_argument("--T", type=float, help="time cap")


def _fmt(v) -> str:
    from .sim import format_value

    return format_value(v)


# ---------------------------------------------------------------------------
# commands

def cmd_fit(args) -> dict:
    times = _load_times(args.data)
    s = _sample_from_args(args, times)
    fit = fit_mle(s, tol=args.tol, max_iter=args.max_iter)
    if not fit.converged:
        raise NumericError(f"Newton iterations did not converge (score norm {fit.grad_norm:.3g})")
    k, n = 2, s.D
    nll = -fit.loglik
    aic = 2 * k + 2 * nll
    res = fit.to_dict()
    res.update(
        n=n, neg_loglik=nll, aic=aic,
        aicc=aic + 2 * k * (k + 1) / (n - k - 1) if n > k + 1 else None,
        bic=k * math.log(n) + 2 * nll,
        case=s.case, D=s.D, r_star=s.r_star,
    )
    out = _Outputs(args.out)
    out.write("fit.json", json.dumps(res, indent=2, sort_keys=True) + "\n")
    levels = args.level or [0.95]
    rows = []
    for level in levels:
        if not 0 < level < 1:
            raise UsageError(f"--level must lie in (0, 1), got {level}")
        for method, fn in (("NA", na_interval), ("NL", nl_interval)):
            for target, iv in fn(fit, 1.0 - level).items():
                rows.append({"method": method, "level": level, "parameter": target,
                             "lower": iv.lower, "upper": iv.upper, "length": iv.length})
    out.write("intervals.csv", rows_to_csv(rows, ("method", "level", "parameter", "lower", "upper", "length")))
    for spec in args.profile or []:
        try:
            which, lo, hi, pts = spec.split(":")
            grid = np.linspace(float(lo), float(hi), int(pts))
        except ValueError:
            raise UsageError(f"--profile expects NAME:LO:HI:POINTS, got {spec!r}") from None
        which = {"lam": "lambda"}.get(which, which)
        prof = profile_loglik(s, which, grid, fit)
        prow = [{which: p.value, "profile_loglik": p.profile_loglik, "inner_argmax": p.inner_argmax, "ok": p.ok}
                for p in prof]
        out.write(f"profile_{which}.csv", rows_to_csv(prow, (which, "profile_loglik", "inner_argmax", "ok")))
    config = {"data": args.data, "complete": args.complete, "n": args.n, "m": args.m, "scheme": args.scheme,
              "T": args.T, "tol": args.tol, "max_iter": args.max_iter, "levels": levels, "profile": args.profile}
    print(f"alpha  = {_fmt(fit.alpha)}  (se {_fmt(fit.se[0])})")
    print(f"lambda = {_fmt(fit.lam)}  (se {_fmt(fit.se[1])})")
    print(f"-logL  = {_fmt(nll)}   AIC = {_fmt(aic)}")
    return {"out": out, "command": "fit", "config": config}


def _prior_from_args(args) -> PriorSpec:
    if (args.prior is None) == (args.prior_biv is None):
        raise UsageError("give exactly one of --prior a,b,c,d or --prior-biv c,d")
    if args.prior is not None:
        return PriorSpec.independent(*_floats(args.prior, 4, "--prior"))
    return PriorSpec.bivariate(*_floats(args.prior_biv, 2, "--prior-biv"))


def cmd_bayes(args) -> dict:
    times = _load_times(args.data)
    s = _sample_from_args(args, times)
    prior = _prior_from_args(args)
    losses = [LossSpec.sq()]
    losses += [LossSpec.linex(p) for p in _grid(args.p, [], "--p")]
    losses += [LossSpec.ge(q) for q in _grid(args.q, [], "--q")]
    levels = args.level or [0.95]
    out = _Outputs(args.out)
    rows = []
    extra = {"sum_x": math.fsum(s.times)}
    if args.method in ("lindley", "both"):
        rows += lindley_report(s, prior, losses).rows
    if args.method in ("is", "both"):
        avail = is_available(s, prior)
        extra["is_available"] = avail
        if not avail:
            why = ("importance sampling needs independent gamma priors" if prior.kind != "independent"
                   else f"d = {prior.d:g} does not exceed sum(x) = {extra['sum_x']:g}; rescale the time unit")
            extra["is_unavailable_reason"] = why
            if args.method == "is":
                raise NumericError(why)
            log.warning("importance sampling unavailable: %s", why)
        else:
            rng = np.random.default_rng(args.seed)
            draws = is_draws(s, prior, args.n_draws, rng)
            extra["is_ess"] = draws.ess
            extra["is_rejections"] = draws.rejections
            rows += is_report(draws, prior, losses).rows
            hrows = []
            for level in levels:
                for target in ("alpha", "lambda"):
                    try:
                        iv = hpd_interval(draws, target, 1.0 - level)
                        hrows.append({"parameter": target, "level": level, "lower": iv.lower,
                                      "upper": iv.upper, "length": iv.length, "status": "ok"})
                    except LEHybridError as exc:
                        hrows.append({"parameter": target, "level": level, "lower": None, "upper": None,
                                      "length": None, "status": f"error: {exc}"})
            out.write("hpd.csv", rows_to_csv(hrows, ("parameter", "level", "lower", "upper", "length", "status")))
            if args.save_draws:
                out.write("draws.csv", draws.to_csv())
    cols = ("method", "target", "prior", "loss", "hyperparams", "estimate", "status")
    out.write("estimates.csv", rows_to_csv([{c: getattr(r, c) for c in cols} for r in rows], cols))
    for r in rows:
        print(f"{r.method:8s} {r.target:7s} {r.loss:16s} {_fmt(r.estimate)}")
    config = {"data": args.data, "complete": args.complete, "n": args.n, "m": args.m, "scheme": args.scheme,
              "T": args.T, "prior": prior.hyperparams, "prior_kind": prior.kind,
              "losses": [l.label for l in losses], "method": args.method, "n_draws": args.n_draws,
              "levels": levels}
    failed = sum(1 for r in rows if r.status != "ok")
    return {"out": out, "command": "bayes", "config": config, "seed": args.seed,
            "counts": {"failed_cells": failed}, "extra": extra}


def cmd_simulate(args) -> dict:
    cfg = load_config(args.config)
    d = cfg.to_dict()
    if args.seed is not None:
        d["seed"] = args.seed
    if args.M is not None:
        d["M"] = args.M
    if args.N_is is not None:
        d["N_is"] = args.N_is
    cfg = SimConfig.from_dict(d)
    table = run_simulation(cfg, n_shards=args.shards, jobs=args.jobs)
    out = _Outputs(args.out)
    for kind in ("estimates", "intervals", "coverage", "schemes"):
        out.write(f"{kind}.csv", table.to_csv(kind))
    discarded = sum(r["discarded"] for r in table.schemes)
    redraws = sum(r["redraws"] for r in table.schemes)
    flagged = [r["scheme"] for r in table.schemes if r["flagged"]]
    for r in table.schemes:
        print(f"{r['scheme']}: used {r['used']}/{r['M']} (redraws {r['redraws']})"
              + ("  FLAGGED" if r["flagged"] else ""))
    # shard layout does not change results, so it stays out of the config digest
    return {"out": out, "command": "simulate", "config": cfg.to_dict(), "seed": cfg.seed,
            "counts": {"discarded": discarded, "redraws": redraws, "flagged_schemes": len(flagged)},
            "extra": {"flagged": flagged}}


def cmd_gof(args) -> dict:
    x = _load_times(args.data)
    if args.families in (None, "all"):
        families = list(FAMILY_TAGS)
    else:
        families = [f.strip() for f in args.families.split(",") if f.strip()]
        bad = [f for f in families if f not in FAMILY_TAGS]
        if bad:
            raise UsageError(f"unknown families {bad}; choose from {', '.join(FAMILY_TAGS)}")
    if args.bins < 1:
        raise UsageError("--bins must be at least 1")
    fits = fit_all(x, families)
    out = _Outputs(args.out)
    out.write("summary.csv", rows_to_csv([f.to_dict() for f in fits], SUMMARY_COLUMNS))
    for f in fits:
        dist = f.dist
        qq = qq_points(x, dist)
        out.write(f"qq_{f.family}.csv", rows_to_csv(
            [{"theoretical": a, "observed": b} for a, b in qq], ("theoretical", "observed")))
        pp = pp_points(x, dist)
        out.write(f"pp_{f.family}.csv", rows_to_csv(
            [{"fitted_cdf": a, "empirical_cdf": b} for a, b in pp], ("fitted_cdf", "empirical_cdf")))
        ec = ecdf_points(x)
        out.write(f"ecdf_{f.family}.csv", rows_to_csv(
            [{"x": a, "ecdf": b, "fitted_cdf": c} for (a, b), c in zip(ec, np.atleast_1d(dist.cdf(ec[:, 0])))],
            ("x", "ecdf", "fitted_cdf")))
        hist, curve = hist_density(x, [dist], args.bins)
        hrows = [{"kind": "bin", "x_left": a, "x_right": b, "density": c} for a, b, c in hist]
        hrows += [{"kind": "curve", "x_left": a, "x_right": a, "density": c} for a, c in curve]
        out.write(f"hist_{f.family}.csv", rows_to_csv(hrows, ("kind", "x_left", "x_right", "density")))
    ranked = sorted(fits, key=lambda f: f.aic)
    for f in ranked:
        print(f"{f.family:6s} -logL {_fmt(f.neg_loglik):>12s}  AIC {_fmt(f.aic):>12s}"
              + ("" if f.converged else f"  [flagged: {f.note}]"))
    config = {"data": args.data, "families": families, "bins": args.bins}
    return {"out": out, "command": "gof", "config": config,
            "counts": {"flagged_fits": sum(not f.converged for f in fits)}}


def cmd_sample(args) -> dict:
    for name in ("n", "m", "scheme", "T"):
        if getattr(args, name) is None:
            raise UsageError(f"--{name} is required")
    scheme = parse_scheme(args.scheme, args.n, args.m, args.T)
    a, lam = _floats(args.params, 2, "--params")
    p = Params(a, lam)
    if args.reps < 1:
        raise UsageError("--reps must be positive")
    ss = np.random.SeedSequence(args.seed)
    lines = []
    for child in ss.spawn(args.reps):
        s = generate_sample(scheme, p, np.random.default_rng(child))
        lines.append(s.to_json())
    text = "\n".join(lines) + "\n"
    out = _Outputs(args.out)
    out.write("samples.jsonl", text)
    sys.stdout.write(text)
    config = {"n": args.n, "m": args.m, "scheme": args.scheme, "T": args.T, "params": [a, lam], "reps": args.reps}
    return {"out": out, "command": "sample", "config": config, "seed": args.seed}


def cmd_dataset(args) -> dict | None:
    x = guinea_pigs()
    sys.stdout.write("\n".join(str(int(v)) if v == int(v) else repr(float(v)) for v in x) + "\n")
    return None


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="lehybrid", description="Inference for the logistic-exponential lifetime model "
                                              "under progressive type-I hybrid censoring.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--timing", action="store_true", help="record wall time in the manifest (breaks byte-identity)")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="maximum likelihood fit with NA/NL intervals")
    p.add_argument("data", help="data file, or 'guinea-pigs' for the bundled set")
    _add_scheme_args(p)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--level", type=float, action="append", help="confidence level (repeatable)")
    p.add_argument("--profile", action="append", metavar="NAME:LO:HI:POINTS",
                   help="profile log-likelihood grid for alpha or lambda")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bayes", help="Bayes estimates by Lindley and/or importance sampling")
    p.add_argument("data")
    _add_scheme_args(p)
    p.add_argument("--prior", metavar="a,b,c,d", help="independent gamma priors")
    p.add_argument("--prior-biv", metavar="c,d", help="bivariate prior")
    p.add_argument("--p", action="append", metavar="P[,P...]", help="LINEX parameters")
    p.add_argument("--q", action="append", metavar="Q[,Q...]", help="GE parameters")
    p.add_argument("--method", choices=("lindley", "is", "both"), default="lindley")
    p.add_argument("--n-draws", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--level", type=float, action="append", help="HPD credibility level (repeatable)")
    p.add_argument("--save-draws", action="store_true")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_bayes)

    p = sub.add_parser("simulate", help="Monte Carlo study from a JSON/TOML config")
    p.add_argument("config")
    p.add_argument("--shards", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1, help="worker processes for the shards")
    p.add_argument("--seed", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--N-is", dest="N_is", type=int)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gof", help="fit all candidate families to complete data")
    p.add_argument("data")
    p.add_argument("--families", default="all", help=f"comma list from {','.join(FAMILY_TAGS)} or 'all'")
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_gof)

    p = sub.add_parser("sample", help="simulate censored samples as JSON lines")
    _add_scheme_args(p, with_complete=False)
    p.add_argument("--params", required=True, metavar="alpha,lambda")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("dataset", help="print the bundled guinea-pig survival times")
    p.add_argument("name", choices=("guinea-pigs",))
    p.set_defaults(func=cmd_dataset)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    t0 = time.perf_counter()
    try:
        res = args.func(args)
        if res is not None:
            res["out"].manifest(res["command"], res["config"], seed=res.get("seed"), counts=res.get("counts"),
                                extra=res.get("extra"),
                                wall_time=time.perf_counter() - t0 if args.timing else None)
    except UsageError as exc:
        print(f"lehybrid: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"lehybrid: invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, SchemeError) as exc:
        print(f"lehybrid: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"lehybrid: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

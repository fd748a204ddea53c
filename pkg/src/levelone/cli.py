"""Command-line front end: ``levelone simulate | analyze | estimate | verify``.

Exit codes: 0 success, 1 validation error, 2 IO error, 3 verification
failure.  JSON output carries ``schema_version``.

Model config files are flat ``key = value`` text, one entry per line, ``#``
starting a comment.  Keys::

    model.delta          tick size (default 1)
    model.lambda_a       ask limit-order rate (required)
    model.mu_a           ask market-order + cancellation rate (required)
    model.lambda_b       bid limit-order rate (required)
    model.mu_b           bid market-order + cancellation rate (required)
    model.s0             initial price (default 0)
    schedule.breakpoints comma list, starts at 0 (default 0)
    schedule.values      comma list of alpha values (default 1)
    schedule.period      seconds (default 23400)
    f.kind               geometric | degenerate | table (default geometric)
    f.mean_bid, f.mean_ask, f.truncate    geometric parameters (5, 5, 200)
    f.x, f.y             degenerate sizes
    f.file               CSV with header x,y,p (relative to the config file)
    f_tilde.kind         same | swapped | geometric | degenerate | table (default same)
    f0.kind              same | geometric | degenerate | table (default same)
    sim.horizon, sim.paths   defaults for ``simulate``

``f_tilde.*`` and ``f0.*`` accept the same parameters as ``f.*``.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analytics, estimation, lob
from .birth_death import QueueRates, RateSchedule, survival_grid
from .lob import ConfigError, ModelConfig, RedrawDistribution

__all__ = ["RunConfig", "load_config", "parse_config_text", "build_model", "main"]

SCHEMA_VERSION = 1
EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_VERIFY = 0, 1, 2, 3

_DIST_KEYS = {"kind", "mean_bid", "mean_ask", "truncate", "x", "y", "file"}
_KNOWN = (
    {f"model.{k}" for k in ("delta", "lambda_a", "mu_a", "lambda_b", "mu_b", "s0")}
    | {f"schedule.{k}" for k in ("breakpoints", "values", "period")}
    | {f"{p}.{k}" for p in ("f", "f_tilde", "f0") for k in _DIST_KEYS}
    | {"sim.horizon", "sim.paths"}
)


class ValidationError(ValueError):
    pass


@dataclass
class RunConfig:
    """Model plus simulation defaults read from a config file."""

    model: ModelConfig
    horizon: float | None = None
    paths: int = 1
    source: Path | None = None
    raw: dict = field(default_factory=dict)


def parse_config_text(text: str, where: str = "<config>") -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{where}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KNOWN:
            raise ValidationError(f"{where}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ValidationError(f"{where}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _num(raw, key, default=None, cast=float):
    if key not in raw:
        if default is None:
            raise ValidationError(f"missing required key {key}")
        return default
    try:
        return cast(raw[key])
    except ValueError:
        raise ValidationError(f"{key}: cannot parse {raw[key]!r}") from None


def _floats(text: str, key: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"{key}: expected a comma-separated list of numbers") from None


def _read_table(path: Path) -> RedrawDistribution:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"x", "y", "p"}:
        raise ValidationError(f"{path}: expected header x,y,p")
    try:
        xs = [int(r["x"]) for r in rows]
        ys = [int(r["y"]) for r in rows]
        ps = [float(r["p"]) for r in rows]
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    return RedrawDistribution(xs, ys, ps)


def _dist(raw, prefix, base_dir, base=None):
    kind = raw.get(f"{prefix}.kind", "geometric" if base is None else "same")
    if kind == "same" and base is not None:
        return base
    if kind == "swapped" and base is not None:
        return base.swapped()
    if kind == "geometric":
        return RedrawDistribution.geometric(_num(raw, f"{prefix}.mean_bid", 5.0),
                                            _num(raw, f"{prefix}.mean_ask", 5.0),
                                            _num(raw, f"{prefix}.truncate", 200, int))
    if kind == "degenerate":
        return RedrawDistribution.degenerate(_num(raw, f"{prefix}.x", cast=int),
                                             _num(raw, f"{prefix}.y", cast=int))
    if kind == "table":
        if f"{prefix}.file" not in raw:
            raise ValidationError(f"{prefix}.kind = table needs {prefix}.file")
        return _read_table(base_dir / raw[f"{prefix}.file"])
    raise ValidationError(f"{prefix}.kind: unknown kind {kind!r}")


def build_model(raw: dict, base_dir: Path = Path(".")) -> ModelConfig:
    ra = QueueRates(_num(raw, "model.lambda_a"), _num(raw, "model.mu_a"))
    rb = QueueRates(_num(raw, "model.lambda_b"), _num(raw, "model.mu_b"))
    bp = _floats(raw.get("schedule.breakpoints", "0"), "schedule.breakpoints")
    vals = _floats(raw.get("schedule.values", "1"), "schedule.values")
    sched = RateSchedule(bp, vals, _num(raw, "schedule.period", lob.DAY_SECONDS))
    f = _dist(raw, "f", base_dir)
    cfg = ModelConfig(_num(raw, "model.delta", 1.0), ra, rb, sched, f,
                      _dist(raw, "f_tilde", base_dir, f), _dist(raw, "f0", base_dir, f),
                      _num(raw, "model.s0", 0.0))
    return lob.validate_config(cfg)


def load_config(path) -> RunConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    raw = parse_config_text(text, str(path))
    model = build_model(raw, path.parent)
    horizon = _num(raw, "sim.horizon", math.nan)
    return RunConfig(model, None if math.isnan(horizon) else horizon,
                     _num(raw, "sim.paths", 1, int), path, raw)


def _emit(obj, path=None):
    obj = {"schema_version": SCHEMA_VERSION, **obj}
    text = json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


# --------------------------------------------------------------------------
# simulate

def _one_path(args):
    model, horizon, child, events = args
    return lob.simulate(model, horizon, seed=child, record_events=events)


def cmd_simulate(a) -> int:
    rc = load_config(a.config)
    horizon = a.horizon if a.horizon is not None else rc.horizon
    if horizon is None or not horizon > 0:
        raise ValidationError("a positive horizon is required (--horizon or sim.horizon)")
    paths = a.paths if a.paths is not None else rc.paths
    if paths < 1:
        raise ValidationError("paths must be at least 1")
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    children = np.random.SeedSequence(a.seed).spawn(paths)
    jobs = [(rc.model, horizon, c, a.events) for c in children]
    if a.workers > 1:
        with ProcessPoolExecutor(a.workers) as ex:
            records = list(ex.map(_one_path, jobs))
    else:
        records = [_one_path(j) for j in jobs]
    grid = np.linspace(0.0, 1.0, a.grid + 1)
    summary = []
    with open(out / "rescaled.csv", "w", encoding="utf-8") as fh:
        fh.write("path,u,value\n")
        for k, rec in enumerate(records):
            name = f"path_{k:04d}"
            lob.write_record_csv(rec, out / f"{name}.csv")
            if a.events:
                lob.write_events_csv(rec, out / f"{name}_events.csv")
            pp = lob.price_path(rec)
            vals = (pp.price(grid * horizon) - rec.s0) / math.sqrt(horizon)
            for u, v in zip(grid, vals):
                fh.write(f"{k},{u:.6f},{v:.9f}\n")
            summary.append({"path": k, "spawn_key": list(children[k].spawn_key),
                            "n_jumps": rec.n_jumps,
                            "terminal_price": float(pp.price(horizon))})
    _emit({"command": "simulate", "seed": a.seed, "horizon": horizon, "paths": summary},
          out / "summary.json")
    return EXIT_OK


# --------------------------------------------------------------------------
# analyze

def _rates_from(a):
    if getattr(a, "config", None):
        m = load_config(a.config).model
        return m.rates_ask, m.rates_bid
    if a.symmetric_rates is not None:
        vals = _floats(a.symmetric_rates, "--symmetric-rates")
        lam, mu = (vals[0], vals[0]) if len(vals) == 1 else vals[:2]
        return QueueRates(lam, mu), QueueRates(lam, mu)
    need = [a.lambda_a, a.mu_a, a.lambda_b, a.mu_b]
    if any(v is None for v in need):
        raise ValidationError("give --config, --symmetric-rates or all four rates")
    return QueueRates(a.lambda_a, a.mu_a), QueueRates(a.lambda_b, a.mu_b)


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(f"{v:.10g}" if isinstance(v, float) else str(v) for v in r) + "\n")


def cmd_analyze(a) -> int:
    q = a.quantity
    if q == "pup":
        ra, rb = _rates_from(a)
        val = analytics.p_up(a.x, a.y, ra, rb, method=a.method)
        _emit({"quantity": "pup", "x": a.x, "y": a.y, "value": val})
    elif q == "nu":
        if a.pi is None:
            raise ValidationError("--pi is required")
        p = _floats(a.pi, "--pi")
        if len(p) != 4:
            raise ValidationError("--pi takes four entries, row by row")
        st = analytics.sign_chain_from_matrix(np.reshape(p, (2, 2)), a.delta)
        _emit({"quantity": "nu", "value": st.nu, "mean_xi": st.mean_xi,
               "sigma2": st.sigma2, "eta": st.eta})
    elif q == "sigma-tilde":
        if a.sigma is None or a.mean_xi is None or (a.c1_inv is None) == (a.c1 is None):
            raise ValidationError("give --sigma, --mean-xi and one of --c1-inv, --c1")
        c1 = a.c1 if a.c1 is not None else 1.0 / a.c1_inv
        _emit({"quantity": "sigma-tilde", "value": analytics.sigma_tilde(a.sigma ** 2, a.mean_xi, c1)})
    elif q in ("sign-chain", "constants"):
        if not a.config:
            raise ValidationError("--config is required")
        m = load_config(a.config).model
        sc = analytics.sign_chain(m.f, m.f_tilde, m.rates_ask, m.rates_bid, m.delta)
        lc = analytics.limit_constants(m)
        res = {"quantity": q, "Pi": sc.Pi, "nu": sc.nu, "mean_xi": sc.mean_xi,
               "sigma2": sc.sigma2, "regime": lc.regime, "c0": lc.c0, "c1": lc.c1,
               "gamma0": lc.gamma0, "gamma1": lc.gamma1, "v": lc.v}
        if lc.regime == "diffusive":
            res["sigma_tilde"] = analytics.sigma_tilde(sc.sigma2, sc.mean_xi, lc.c1)
        _emit(res)
    elif q == "survival":
        if a.lam is None or a.mu is None:
            raise ValidationError("--lam and --mu are required")
        xs = [int(v) for v in _floats(a.xs, "--xs")]
        ts = np.linspace(0.0, a.t_max, a.points + 1)[1:]
        surv = survival_grid(QueueRates(a.lam, a.mu), xs, ts)
        rows = [(float(t), *map(float, row)) for t, row in zip(ts, surv)]
        if a.out:
            _write_csv(a.out, ["t"] + [f"x={x}" for x in xs], rows)
        _emit({"quantity": "survival", "xs": xs, "t": ts, "survival": surv.T,
               "csv": a.out})
    elif q == "tau1-tail":
        if not a.config or a.T is None:
            raise ValidationError("--config and --T are required")
        m = load_config(a.config).model
        _emit({"quantity": "tau1-tail", "T": a.T,
               "exact": float(analytics.tau1_survival(m, a.x, a.y, a.T)),
               "asymptotic_displayed": analytics.tau1_tail(m, a.x, a.y, a.T, printed=True),
               "asymptotic_corrected": analytics.tau1_tail(m, a.x, a.y, a.T, printed=False)})
    elif q == "meander":
        ys = np.linspace(0.0, a.y_max, a.points + 1)[1:]
        dens = analytics.meander_density(a.s, a.xm, a.t, ys)
        if a.out:
            _write_csv(a.out, ["y", "density"], zip(map(float, ys), map(float, dens)))
        _emit({"quantity": "meander", "mass": analytics.meander_mass(a.s, a.xm, a.t),
               "y": ys, "density": dens, "csv": a.out})
    return EXIT_OK


# --------------------------------------------------------------------------
# estimate

def cmd_estimate(a) -> int:
    log = estimation.ingest_events(a.events, base_lot=a.base_lot, t_d=a.t_d)
    if a.spread_table and a.prices is None:
        raise ValidationError("--spread-table needs a prices file (--prices)")
    prices = estimation.ingest_prices(a.prices, t_d=a.t_d) if a.prices else None
    windows = _floats(a.windows, "--windows")
    est = estimation.estimate_all(log, prices, delta=a.delta, windows=windows)
    res = {"command": "estimate", "estimates": est.to_dict()}
    daily = log.daily_totals() / log.t_d
    res["daily_rates"] = [dict(day=int(d), **{k: float(v) for k, v in zip(estimation.STREAMS, row)})
                          for d, row in zip(log.days, daily)]
    out = Path(a.out_dir) if a.out_dir else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    if a.bins:
        prof = estimation.estimate_alpha_profile(log, a.bins)
        width = log.t_d / a.bins
        target = (out or Path(".")) / "alpha_profile.csv"
        _write_csv(target, ["t", "alpha"],
                   [(float(i * width), float(v)) for i, v in enumerate(prof.values)])
        res["alpha_profile_csv"] = str(target)
    if a.spread_table:
        res["spread_table_text"] = est.spread_table.format() if est.spread_table else None
        if est.spread_table is None:
            raise ValidationError("prices file has no spread column")
    _emit(res, out / "estimates.json" if out is not None else None)
    return EXIT_OK


# --------------------------------------------------------------------------
# verify

def cmd_verify(a) -> int:
    from . import verification
    kw = {}
    if a.perturb_sigma2 != 1.0:
        if a.suite != "limits":
            raise ValidationError("--perturb-sigma2 applies to the limits suite only")
        kw = {"perturb_sigma2": a.perturb_sigma2, "diffusion": False}
    rep = verification.run_suite(a.suite, a.seed, **kw)
    for c in rep.checks:
        mark = "PASS" if c.passed else ("FAIL" if c.required else "info")
        print(f"[{mark}] {c.name}: {c.statistic:.6g} (threshold {c.threshold:.6g})", file=sys.stderr)
    _emit({"command": "verify", "report": rep.to_dict()}, a.json)
    return EXIT_OK if rep.passed else EXIT_VERIFY


# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    # usage errors are validation errors (exit 1), not IO errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="levelone", description=__doc__.split("\n")[0], allow_abbrev=False)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate price paths from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--horizon", type=float)
    s.add_argument("--paths", type=int)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--events", action="store_true", help="also write the order stream")
    s.add_argument("--grid", type=int, default=100, help="points of the rescaled path CSV")
    s.set_defaults(func=cmd_simulate)

    an = sub.add_parser("analyze", help="closed-form and quadrature quantities")
    an.add_argument("quantity", choices=["pup", "nu", "sigma-tilde", "sign-chain", "constants",
                                         "survival", "tau1-tail", "meander"])
    an.add_argument("--config")
    an.add_argument("--symmetric-rates", help="LAM or LAM,MU used for both sides")
    for k in ("lambda-a", "mu-a", "lambda-b", "mu-b"):
        an.add_argument(f"--{k}", type=float)
    an.add_argument("--x", type=int, default=1)
    an.add_argument("--y", type=int, default=1)
    an.add_argument("--method", default="auto", choices=["auto", "integral", "integration"])
    an.add_argument("--pi", help="transition matrix entries, row by row")
    an.add_argument("--delta", type=float, default=1.0)
    an.add_argument("--sigma", type=float)
    an.add_argument("--mean-xi", type=float)
    an.add_argument("--c1-inv", type=float)
    an.add_argument("--c1", type=float)
    an.add_argument("--lam", type=float)
    an.add_argument("--mu", type=float)
    an.add_argument("--xs", default="1")
    an.add_argument("--t-max", type=float, default=10.0)
    an.add_argument("--points", type=int, default=100)
    an.add_argument("--T", type=float)
    an.add_argument("--s", type=float, default=0.3)
    an.add_argument("--xm", type=float, default=0.5, help="meander start level")
    an.add_argument("--t", type=float, default=0.7)
    an.add_argument("--y-max", type=float, default=3.0)
    an.add_argument("--out", help="CSV target for curve quantities")
    an.set_defaults(func=cmd_analyze)

    e = sub.add_parser("estimate", help="calibrate from order-flow and price logs")
    e.add_argument("--events", required=True)
    e.add_argument("--prices")
    e.add_argument("--delta", type=float, default=1.0)
    e.add_argument("--base-lot", type=float, default=100.0)
    e.add_argument("--t-d", type=float, default=lob.DAY_SECONDS)
    e.add_argument("--bins", type=int, default=0, help="write an alpha profile with this many bins")
    e.add_argument("--windows", default="600", help="seconds, comma list")
    e.add_argument("--spread-table", action="store_true")
    e.add_argument("--out-dir")
    e.set_defaults(func=cmd_estimate)

    v = sub.add_parser("verify", help="run verification suites")
    v.add_argument("--suite", required=True,
                   choices=["specfun", "survival", "timechange", "pup", "limits", "scaling",
                            "meander", "roundtrip", "all"])
    v.add_argument("--seed", type=int, required=True)
    v.add_argument("--json", help="write the report here instead of stdout")
    v.add_argument("--perturb-sigma2", type=float, default=1.0, help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"levelone: IO error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ConfigError, estimation.SchemaError, estimation.EstimationError) as exc:
        print(f"levelone: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

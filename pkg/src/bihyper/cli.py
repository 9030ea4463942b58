"""Command-line front end: ``bihyper list | verify | refine``.

Settings are resolved in increasing priority from built-in defaults, a YAML
config file (``--config``), ``BIHYPER_*`` environment variables and command
line flags. Exit codes: 0 on success, 1 when a check fails, 2 for bad
configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .charts import _DEFAULTS, catalog_names, get_entry
from .identities import CHECKS, FLOOR, run_suite, suite_passed

ENV_PREFIX = "BIHYPER_"
CSV_FIELDS = ("entry", "check", "resolution", "residual_linf", "residual_l2",
              "integral_residual", "order", "passed")
FORMATS = ("json", "csv", "text")
REFINE_MIN_SLOPE = 2.0


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    entries: list = field(default_factory=lambda: [f"{k}:{v}" for k, v in sorted(_DEFAULTS.items())])
    resolutions: list = field(default_factory=lambda: [16, 32])
    seeds: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    tolerances: dict = field(default_factory=dict)
    base_point: Optional[list] = None
    checks: Optional[list] = None
    format: str = "json"
    out: Optional[str] = None
    jobs: object = 1

    def validate(self) -> "RunConfig":
        if not self.entries:
            raise ConfigError("at least one entry is required")
        if not self.resolutions:
            raise ConfigError("at least one resolution is required")
        try:
            self.resolutions = sorted(int(m) for m in self.resolutions)
            self.seeds = [int(s) for s in self.seeds]
            self.tolerances = {str(k): float(v) for k, v in self.tolerances.items()}
            if self.base_point is not None:
                self.base_point = [float(x) for x in self.base_point]
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if len(set(self.resolutions)) != len(self.resolutions):
            raise ConfigError("resolutions must be distinct")
        bad = [k for k in self.tolerances if k not in CHECKS]
        if bad:
            raise ConfigError(f"tolerance for unknown check(s): {bad}")
        if self.checks is not None:
            bad = [k for k in self.checks if k not in CHECKS]
            if bad:
                raise ConfigError(f"unknown check(s): {bad}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.jobs != "auto":
            try:
                self.jobs = int(self.jobs)
            except (TypeError, ValueError):
                raise ConfigError("jobs must be a positive integer or 'auto'") from None
            if self.jobs < 1:
                raise ConfigError("jobs must be a positive integer or 'auto'")
        return self

    @property
    def workers(self) -> int:
        return os.cpu_count() or 1 if self.jobs == "auto" else int(self.jobs)

    def recorded(self) -> dict:
        """The settings that determine the results (not where or how fast they are written)."""
        d = asdict(self)
        for k in ("out", "jobs", "format"):
            d.pop(k)
        return d


_KEYS = {f for f in RunConfig.__dataclass_fields__}


# -- parsing -------------------------------------------------------------------------

def _split_list(text: str, sep: str = ","):
    return [t.strip() for t in str(text).split(sep) if t.strip()]


def _parse_entries(values):
    out = []
    for v in values:
        out.extend(_split_list(v, ";"))
    return out


def _parse_tol(items):
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"tolerance override must look like check=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise ConfigError(f"bad tolerance value {v!r}") from None
    return out


def _ints(text):
    try:
        return [int(t) for t in _split_list(text)]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def _floats(text):
    try:
        return [float(t) for t in _split_list(text)]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    unknown = sorted(set(data) - _KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    for key in ("entries", "resolutions", "seeds", "checks", "base_point"):
        if key in data and data[key] is not None and not isinstance(data[key], list):
            raise ConfigError(f"config key {key!r} must be a list")
    if "tolerances" in data and not isinstance(data["tolerances"], dict):
        raise ConfigError("config key 'tolerances' must be a mapping")
    return data


def _from_env(environ) -> dict:
    conv = {
        "ENTRIES": ("entries", lambda s: _split_list(s, ";")),
        "RES": ("resolutions", _ints),
        "SEEDS": ("seeds", _ints),
        "TOL": ("tolerances", lambda s: _parse_tol(_split_list(s))),
        "BASE_POINT": ("base_point", _floats),
        "CHECKS": ("checks", _split_list),
        "FORMAT": ("format", str),
        "OUT": ("out", str),
        "JOBS": ("jobs", str),
    }
    out = {}
    for name, (key, fn) in conv.items():
        if ENV_PREFIX + name in environ:
            out[key] = fn(environ[ENV_PREFIX + name])
    return out


def resolve_config(args, environ=None) -> RunConfig:
    environ = os.environ if environ is None else environ
    values = {}
    if args.config:
        values.update(load_config_file(args.config))
    values.update(_from_env(environ))
    if args.entries:
        values["entries"] = _parse_entries(args.entries)
    if args.res:
        values["resolutions"] = _ints(args.res)
    if args.seeds:
        values["seeds"] = _ints(args.seeds)
    if args.tol:
        values["tolerances"] = {**values.get("tolerances", {}), **_parse_tol(args.tol)}
    if args.base_point:
        values["base_point"] = _floats(args.base_point)
    if args.checks:
        values["checks"] = _split_list(args.checks)
    for key in ("format", "out", "jobs"):
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


# -- output ---------------------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    return str(v)


def _res_label(res) -> str:
    return "x".join(str(m) for m in res)


def reports_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in reports:
        d = r.to_dict()
        w.writerow([_res_label(r.resolution) if k == "resolution" else _fmt(d[k]) for k in CSV_FIELDS])
    return buf.getvalue()


def reports_json(reports, config: RunConfig) -> str:
    doc = {"version": __version__, "config": config.recorded(),
           "reports": [r.to_dict() for r in reports]}
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def reports_text(reports) -> str:
    lines = [f"{'entry':34s} {'check':22s} {'res':>10s} {'residual':>10s} {'tol':>9s} "
             f"{'order':>6s}  role              verdict"]
    for r in reports:
        v = "" if r.value is None else f"{r.value:.2e}"
        tol = "" if r.tolerance is None else f"{r.tolerance:.1e}"
        order = "floor" if r.details.get("at_floor") else ("" if r.order is None else f"{r.order:.2f}")
        verdict = "-" if not r.counts else ("pass" if r.passed else "FAIL")
        lines.append(f"{r.entry:34s} {r.check:22s} {_res_label(r.resolution):>10s} {v:>10s} "
                     f"{tol:>9s} {order:>6s}  {r.role:16s}  {verdict}")
    return "\n".join(lines) + "\n"


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- commands -------------------------------------------------------------------------

def cmd_list(fmt: str = "text") -> str:
    rows = []
    for kind in catalog_names():
        e = get_entry(f"{kind}:{_DEFAULTS[kind]}")
        rows.append({"name": kind, "default": _DEFAULTS[kind], "n": e.model.n, "c": e.model.c,
                     "is_biharmonic": e.is_biharmonic, "is_minimal": e.is_minimal,
                     "is_cmc": e.is_cmc})
    if fmt == "json":
        return json.dumps(rows, indent=2) + "\n"
    lines = []
    for r in rows:
        flags = " ".join(f"{k}={str(r[k]).lower()}" for k in ("is_biharmonic", "is_minimal", "is_cmc"))
        lines.append(f"{r['name']:18s} {r['default']:26s} n={r['n']} c={r['c']:g}  {flags}")
    return "\n".join(lines) + "\n"


def _suite(cfg: RunConfig):
    return run_suite(cfg.entries, cfg.resolutions, cfg.seeds, tolerances=cfg.tolerances,
                     base_point=cfg.base_point, checks=cfg.checks, jobs=cfg.workers)


def cmd_verify(cfg: RunConfig) -> int:
    reports = _suite(cfg)
    if cfg.format == "json":
        text = reports_json(reports, cfg)
    elif cfg.format == "csv":
        text = reports_csv(reports)
    else:
        text = reports_text(reports)
    _emit(text, cfg.out)
    return 0 if suite_passed(reports) else 1


def slope_table(reports) -> list:
    """Log-log slopes of every (entry, check) series across resolutions."""
    series = {}
    for r in reports:
        if r.role == "skipped":
            continue
        series.setdefault((r.entry, r.check), []).append(r)
    rows = []
    for (entry, check), reps in series.items():
        h = np.array([1.0 / r.resolution[0] for r in reps])
        v = np.array([np.nan if r.value is None else r.value for r in reps])
        pairs = []
        for i in range(1, len(reps)):
            if v[i - 1] > 0 and v[i] > 0:
                pairs.append(float(np.log(v[i - 1] / v[i]) / np.log(h[i - 1] / h[i])))
            else:
                pairs.append(None)
        last = reps[-1]
        at_floor = bool(last.details.get("at_floor")) or bool(v[-1] < last.details.get("floor", FLOOR))
        ok = v > 0
        fit = float(np.polyfit(np.log(h[ok]), np.log(v[ok]), 1)[0]) if ok.sum() >= 2 else None
        judged = reps[0].role == "identity"
        flagged = judged and not at_floor and (fit is None or fit < REFINE_MIN_SLOPE)
        rows.append({"entry": entry, "check": check, "role": reps[0].role,
                     "resolutions": [r.resolution[0] for r in reps],
                     "residuals": [None if np.isnan(x) else float(x) for x in v],
                     "slopes": pairs, "fit": fit, "at_floor": at_floor, "flagged": flagged})
    return rows


def cmd_refine(cfg: RunConfig) -> int:
    if len(cfg.resolutions) < 3:
        raise ConfigError("refine needs at least three resolutions")
    rows = slope_table(_suite(cfg))
    if cfg.format == "json":
        text = json.dumps({"version": __version__, "config": cfg.recorded(), "slopes": rows},
                          indent=2, allow_nan=False) + "\n"
    elif cfg.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("entry", "check", "resolutions", "slopes", "fit", "at_floor", "flagged"))
        for r in rows:
            w.writerow((r["entry"], r["check"], " ".join(map(str, r["resolutions"])),
                        " ".join(_fmt(s) for s in r["slopes"]), _fmt(r["fit"]),
                        _fmt(r["at_floor"]), _fmt(r["flagged"])))
        text = buf.getvalue()
    else:
        lines = [f"{'entry':34s} {'check':22s} {'slopes':>18s} {'fit':>6s}  note"]
        for r in rows:
            slopes = " ".join("-" if s is None else f"{s:.2f}" for s in r["slopes"])
            fit = "-" if r["fit"] is None else f"{r['fit']:.2f}"
            note = "at floor" if r["at_floor"] else ("SLOPE < 2" if r["flagged"] else "")
            lines.append(f"{r['entry']:34s} {r['check']:22s} {slopes:>18s} {fit:>6s}  {note}")
        text = "\n".join(lines) + "\n"
    _emit(text, cfg.out)
    return 1 if any(r["flagged"] for r in rows) else 0


# -- entry point ----------------------------------------------------------------------

def _run_options(p):
    p.add_argument("--config", help="YAML file with run settings")
    p.add_argument("--entries", nargs="+", help="catalog entries, e.g. clifford:1x2 'ellipsoid:2x1x1'; "
                   "';' also separates")
    p.add_argument("--res", help="comma-separated nodes per axis, e.g. 16,32,64")
    p.add_argument("--seeds", help="comma-separated seeds for the random test fields")
    p.add_argument("--tol", action="append", metavar="CHECK=VALUE", help="fixed tolerance override")
    p.add_argument("--base-point", help="comma-separated ambient coordinates of the base point")
    p.add_argument("--checks", help="comma-separated subset of checks to run")
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--jobs", help="worker threads, or 'auto'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bihyper", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    lp = sub.add_parser("list", help="show the catalog")
    lp.add_argument("--format", choices=("text", "json"), default="text")
    _run_options(sub.add_parser("verify", help="run the identity checks"))
    _run_options(sub.add_parser("refine", help="convergence slopes across resolutions"))
    return parser


def main(argv=None, environ=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        sys.stdout.write(cmd_list(args.format))
        return 0
    try:
        cfg = resolve_config(args, environ)
        if args.command == "verify":
            return cmd_verify(cfg)
        return cmd_refine(cfg)
    except ConfigError as exc:
        print(f"bihyper: configuration error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        # unknown entries, malformed entry parameters, bad base points
        print(f"bihyper: invalid input: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

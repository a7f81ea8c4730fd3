"""Command-line front end.

Usage::

    kexclusion <subcommand> [--config FILE] [--set section.key=value ...]
                            [--seed N] [--out DIR] [shortcut flags]

Configuration is an INI file with the sections ``model``, ``profile``,
``run`` and ``tolerances`` (see ``SCHEMA``).  Unknown sections or keys are
rejected.  ``--set`` overrides and the shortcut flags (``--k``, ``--n``,
``--t``, ``--s``, ``--replicas``, ``--instances``) are applied on top of the
file.  Output goes to ``--out``, else ``$KEXCL_OUT``, else the working
directory.

Exit codes: 0 when every declared check passes, 1 when a check fails,
2 on a configuration error (including a missing seed for a stochastic
subcommand).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import os
import sys
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import experiments as ex
from .clocks import RateSpec, generate
from .dynamics import evolve_occupancy, second_class_direct
from .lattice import INF, ProfileSpec, check_capacity, is_infinite, sample_initial, window_for
from .macroflux import (
    FluxFunction,
    HopfLaxField,
    conjugate,
    current_compare,
    riemann_solution,
    standing_shock,
)
from .verify import SUITES, VerifyConfig, run_verify

OUT_ENV = "KEXCL_OUT"
STOCHASTIC = {"simulate", "verify", "flux", "lln"}
SUBCOMMANDS = ("simulate", "verify", "flux", "hopflax", "lln", "current-compare")


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# value parsers


def _float(v: str) -> float:
    s = v.strip().lower()
    if s in ("inf", "+inf", "infinity"):
        return math.inf
    if s in ("-inf", "-infinity"):
        return -math.inf
    return float(s)


def _capacity(v: str) -> float:
    return check_capacity(INF if v.strip().lower() in ("inf", "infinity") else int(v))


def _floats(v: str) -> list[float]:
    return [_float(p) for p in v.split(",") if p.strip()]


def _words(v: str) -> list[str]:
    return [p.strip() for p in v.split(",") if p.strip()]


def _capacities(v: str) -> list[float]:
    return [_capacity(p) for p in _words(v)]


def _pair(v: str) -> tuple[float, float]:
    p = _floats(v)
    if len(p) != 2:
        raise ValueError(f"expected two numbers, got {v!r}")
    return p[0], p[1]


def _grid(v: str) -> list[float]:
    """``a:b:count`` for an even grid, or a comma list."""
    if ":" in v:
        a, b, m = v.split(":")
        return np.linspace(_float(a), _float(b), int(m)).tolist()
    return _floats(v)


def _rates(v: str) -> RateSpec:
    """``single`` or batch pairs ``h:beta,h:beta``."""
    if v.strip().lower() == "single":
        return RateSpec.single()
    pairs = []
    for item in _words(v):
        h, b = item.split(":")
        pairs.append((int(h), float(b)))
    return RateSpec.batch(pairs)


def _pieces(v: str) -> ProfileSpec:
    """Profile pieces ``a,b,rho`` separated by ``;``."""
    out = []
    for chunk in v.split(";"):
        if chunk.strip():
            p = _floats(chunk)
            if len(p) != 3:
                raise ValueError(f"profile piece needs a,b,rho; got {chunk!r}")
            out.append(tuple(p))
    return ProfileSpec(tuple(out))


def _table(v: str) -> list[tuple[float, float]]:
    """Flux breakpoints ``rho:f,rho:f``."""
    out = []
    for item in _words(v):
        a, b = item.split(":")
        out.append((_float(a), _float(b)))
    return out


def _intervals(v: str) -> list[tuple[float, float]]:
    return [_pair(c) for c in v.split(";") if c.strip()]


SCHEMA: dict[str, dict[str, Callable[[str], object]]] = {
    "model": {"k": _capacity, "rates": _rates, "flux_table": _table},
    "profile": {"pieces": _pieces, "family": str.strip},
    "run": {
        "experiment": str.strip, "seed": int, "n": int, "t": _float, "s": _float,
        "replicas": int, "deadline": _float, "instances": int, "window": int,
        "max_t": _float, "suites": _words, "ks": _capacities, "x_range": _pair,
        "snapshots": int, "b": _float, "rho": _float, "lam": _float, "rhos": _floats,
        "xs": _grid, "x": _float, "left": _float, "right": _float,
        "candidate": str.strip, "dy": _float, "intervals": _intervals,
        "expected": _float,
    },
    "tolerances": {
        "tol": _float, "delta": _float, "sigmas": _float, "min_fraction": _float,
        "ks_max": _float, "u": _float,
    },
}


@dataclass
class RunConfig:
    subcommand: str
    config_path: str | None = None
    overrides: list[str] = field(default_factory=list)
    out_dir: str | None = None
    seed: int | None = None
    raw: dict[str, dict[str, str]] = field(default_factory=dict)
    values: dict[str, dict[str, object]] = field(default_factory=dict)

    def get(self, section: str, key: str, default=None):
        return self.values.get(section, {}).get(key, default)

    def require(self, section: str, key: str):
        v = self.get(section, key)
        if v is None:
            raise ConfigError(f"missing required key {section}.{key}")
        return v

    def digest(self) -> str:
        canon = json.dumps({"subcommand": self.subcommand, "config": self.raw},
                           sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def header(self) -> dict:
        return {"version": __version__, "config_hash": self.digest(), "seed": self.seed}

    def out_path(self) -> Path:
        p = Path(self.out_dir or os.environ.get(OUT_ENV) or ".")
        p.mkdir(parents=True, exist_ok=True)
        return p


def load_config(rc: RunConfig) -> RunConfig:
    """Read the config file, apply overrides, validate and parse every value."""
    raw: dict[str, dict[str, str]] = {}
    if rc.config_path:
        cp = configparser.ConfigParser(interpolation=None)
        try:
            with open(rc.config_path, encoding="utf-8") as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as e:
            raise ConfigError(f"cannot read config: {e}") from e
        for sec in cp.sections():
            raw[sec] = dict(cp[sec])
    for item in rc.overrides:
        key, sep, val = item.partition("=")
        sec, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        raw.setdefault(sec, {})[name.strip()] = val.strip()
    if rc.seed is not None:
        raw.setdefault("run", {})["seed"] = str(rc.seed)
    values: dict[str, dict[str, object]] = {}
    for sec, items in raw.items():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key, val in items.items():
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {sec}.{key}")
            try:
                values.setdefault(sec, {})[key] = SCHEMA[sec][key](val)
            except (ValueError, TypeError) as e:
                raise ConfigError(f"bad value for {sec}.{key}: {val!r} ({e})") from e
    rc.raw = raw
    rc.values = values
    seed = values.get("run", {}).get("seed")
    rc.seed = None if seed is None else int(seed)
    if rc.subcommand in STOCHASTIC and rc.seed is None:
        raise ConfigError(f"{rc.subcommand} is stochastic and needs a seed")
    return rc


# --------------------------------------------------------------------------
# output


def _header_lines(rc: RunConfig) -> str:
    h = rc.header()
    return "".join(f"# {k}: {h[k]}\n" for k in ("version", "config_hash", "seed"))


def write_csv(rc: RunConfig, name: str, columns: Sequence[str], rows) -> Path:
    buf = io.StringIO()
    buf.write(_header_lines(rc))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    path = rc.out_path() / name
    path.write_bytes(buf.getvalue().encode())
    return path


def write_json(rc: RunConfig, name: str, payload: dict) -> Path:
    body = {"header": rc.header(), **payload}
    path = rc.out_path() / name
    path.write_bytes((json.dumps(ex._plain(body), indent=2, sort_keys=True) + "\n").encode())
    return path


def _write_report(rc: RunConfig, rep: ex.EstimateReport) -> int:
    write_json(rc, f"{rep.name}.json", json.loads(rep.to_json()))
    for key, vals in rep.samples.items():
        if isinstance(vals, list) and vals and np.isscalar(vals[0]):
            write_csv(rc, f"{rep.name}_{key}.csv", ["index", "value"], enumerate(vals))
    for k, ok in rep.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {rep.name}.{k}")
    if rep.truncated:
        print(f"note: {rep.name} truncated at the deadline")
    return 0 if rep.passed else 1


# --------------------------------------------------------------------------
# model helpers


def _K(rc: RunConfig) -> float:
    return rc.get("model", "k", 1)


def _profile(rc: RunConfig) -> ProfileSpec:
    p = rc.get("profile", "pieces")
    if p is None:
        rho = rc.get("run", "rho")
        if rho is None:
            raise ConfigError("missing profile.pieces (or run.rho for a constant profile)")
        p = ProfileSpec.constant(rho)
    return p


def _flux(rc: RunConfig) -> FluxFunction | None:
    table = rc.get("model", "flux_table")
    K = _K(rc)
    if table is not None:
        xs, ys = zip(*table)
        return FluxFunction.tabulated(xs, ys, K)
    return ex.closed_flux(K, rc.get("model", "rates"))


def _need_flux(rc: RunConfig) -> FluxFunction:
    f = _flux(rc)
    if f is None:
        raise ConfigError("no closed-form flux for this K; give model.flux_table")
    return f


# --------------------------------------------------------------------------
# subcommands


def cmd_simulate(rc: RunConfig) -> int:
    K = _K(rc)
    rates = rc.get("model", "rates", RateSpec.single())
    n = rc.get("run", "n", 100)
    t = rc.get("run", "t", 1.0)
    T = n * t
    prof = _profile(rc)
    family = rc.get("profile", "family", "deterministic")
    lo, hi = window_for([rc.get("run", "x_range", (0.0, 1.0))], n, T)
    init = sample_initial(prof, n, (lo, hi), K, family, rc.seed)
    clk = generate(rates, (lo, hi - 1), T, rc.seed)
    m = rc.get("run", "snapshots", 2)
    snaps = np.linspace(0.0, T, max(m, 2)).tolist()
    b = rc.get("run", "b")
    if b is not None:
        X0 = math.floor(n * b)
        init = ex.place_second_class(init, X0)
        traj, path = second_class_direct(init, X0, clk, T, snaps)
        write_csv(rc, "second_class.csv", ["time", "site"],
                  zip(path.times.tolist(), path.positions.tolist()))
    else:
        traj = evolve_occupancy(init, clk, T, snaps)
    rows = ((t_, cfg.lo + i, int(v)) for t_, cfg in traj.snapshots
            for i, v in enumerate(cfg.occ))
    path = write_csv(rc, "trajectory.csv", ["time", "site", "value"], rows)
    print(f"wrote {path}")
    return 0


def cmd_verify(rc: RunConfig) -> int:
    Ks = rc.get("run", "ks") or [rc.get("model", "k", None)]
    Ks = [K for K in Ks if K is not None] or [1, 2, 3, INF]
    cfg = VerifyConfig(instances=rc.get("run", "instances", 200), Ks=tuple(Ks),
                       max_window=rc.get("run", "window", 40),
                       max_T=rc.get("run", "max_t", 5.0), seed=rc.seed)
    suites = rc.get("run", "suites", list(SUITES))
    for s in suites:
        if s not in SUITES:
            raise ConfigError(f"unknown suite {s!r}")
    results = run_verify(cfg, suites)
    for r in results:
        print(r.line())
    write_json(rc, "verify.json", {
        "suites": {r.name: {"instances": r.instances, "failures": r.failures,
                            "passed": r.passed} for r in results},
        "passed": all(r.passed for r in results)})
    return 0 if all(r.passed for r in results) else 1


def cmd_flux(rc: RunConfig) -> int:
    kind = rc.get("run", "experiment", "current")
    K = _K(rc)
    n = rc.get("run", "n", 1000)
    reps = rc.get("run", "replicas", 10)
    dl = rc.get("run", "deadline")
    if kind == "current":
        rates = rc.get("model", "rates")
        rep = ex.estimate_flux_current(
            rc.require("run", "rho"), K, n, rc.get("run", "t", 100.0), reps, rc.seed,
            rc.get("profile", "family"), rates, rc.get("run", "expected"),
            rc.get("tolerances", "tol"), dl)
    elif kind == "batch":
        rep = ex.batch_flux_check(rc.require("model", "rates"), rc.require("run", "rho"), n,
                                  rc.get("run", "t", 100.0), reps, rc.seed,
                                  rc.get("tolerances", "tol", 0.015), dl)
    elif kind == "bounds":
        rep = ex.flux_bounds_check(int(K), rc.require("run", "rhos"), n,
                                   rc.get("run", "t", 100.0), reps, rc.seed,
                                   rc.get("tolerances", "sigmas", 3.0), dl)
    elif kind == "g":
        rep = ex.estimate_g(K, rc.require("run", "xs"), n, rc.get("run", "t", 1.0), reps,
                            rc.seed, dl)
    else:
        raise ConfigError(f"unknown flux experiment {kind!r} (current, batch, bounds, g)")
    return _write_report(rc, rep)


def cmd_hopflax(rc: RunConfig) -> int:
    f = _need_flux(rc)
    prof = _profile(rc)
    t = rc.get("run", "t", 1.0)
    xs = rc.get("run", "xs", np.linspace(-1.0, 1.0, 21).tolist())
    fld = HopfLaxField.from_profile(prof, conjugate(f), dy=rc.get("run", "dy", 1e-4))
    rows = []
    for x in xs:
        d = fld.density(x, t)
        ym, yp = fld.minimizers(x, t)
        xm, xp = fld.characteristics(x, t)
        rows.append((x, fld.u(x, t), d.rho_minus, d.rho_plus, d.rho_numeric, ym, yp, xm, xp))
    cols = ["x", "u", "rho_minus", "rho_plus", "rho_numeric", "y_minus", "y_plus",
            "x_minus", "x_plus"]
    write_csv(rc, "hopflax.csv", cols, rows)
    code = 0
    if len(prof.pieces) == 1:
        # constant data: u = rho x - t f(rho)
        rho = prof.pieces[0][2]
        tol = rc.get("tolerances", "u", 1e-3)
        err = max(abs(r[1] - (rho * r[0] - t * float(f(rho)))) for r in rows)
        ok = err <= tol
        print(f"{'PASS' if ok else 'FAIL'} hopflax.constant_identity (max error {err:.2e})")
        code = 0 if ok else 1
    return code


def cmd_lln(rc: RunConfig) -> int:
    kind = rc.get("run", "experiment", "second_class")
    K = _K(rc)
    n = rc.get("run", "n", 1000)
    t = rc.get("run", "t", 1.0)
    reps = rc.get("run", "replicas", 100)
    dl = rc.get("run", "deadline")
    tol = rc.values.get("tolerances", {})
    if kind == "second_class":
        rep = ex.second_class_lln(_profile(rc), K, rc.get("run", "b", 0.0), n, t, reps,
                                  rc.seed, tol.get("delta", 0.05), rc.get("profile", "family"),
                                  _flux(rc), dl, tol.get("min_fraction", 0.95))
    elif kind == "rarefaction":
        rep = ex.rarefaction_fan(rc.require("run", "rho"), rc.require("run", "lam"), n, t,
                                 reps, rc.seed, tol.get("delta", 0.05),
                                 tol.get("ks_max", 0.1), dl)
    elif kind == "restart":
        rep = ex.restart_lln(_profile(rc), K, rc.get("run", "b", 0.0), n,
                             rc.require("run", "s"), t, reps, rc.seed,
                             tol.get("tol", 0.07), _flux(rc), dl,
                             tol.get("min_fraction", 0.9))
    elif kind == "hydro":
        rep = ex.hydrodynamic_profile(_profile(rc), K, n, t,
                                      rc.get("run", "intervals", [(0.0, 1.0)]), reps,
                                      rc.seed, rc.get("profile", "family", "deterministic"),
                                      _flux(rc), tol.get("tol", 0.03), dl)
    elif kind == "light_cone":
        rep = ex.light_cone(K, rc.require("run", "rho"), n, t, reps, rc.seed)
    else:
        raise ConfigError(f"unknown lln experiment {kind!r} "
                          "(second_class, rarefaction, restart, hydro, light_cone)")
    return _write_report(rc, rep)


def cmd_current_compare(rc: RunConfig) -> int:
    f = _need_flux(rc)
    left, right = rc.require("run", "left"), rc.require("run", "right")
    t = rc.get("run", "t", 1.0)
    x = rc.get("run", "x", 0.0)
    fld = HopfLaxField.from_profile(ProfileSpec.riemann(left, right), conjugate(f))
    cand = rc.get("run", "candidate", "standing-shock")
    if cand == "standing-shock":
        lam = standing_shock(left, right)
    elif cand == "riemann":
        lam = riemann_solution(f, left, right)
    else:
        raise ConfigError(f"unknown candidate {cand!r} (standing-shock, riemann)")
    res = current_compare(fld, f, lam, x, t, tol=rc.get("tolerances", "tol"))
    write_json(rc, "current_compare.json", {
        "x": res.x, "t": res.t, "lambda_current": res.lambda_current,
        "rho_current": res.rho_current, "verdict": res.verdict, "tol": res.tol})
    print(f"lambda current {res.lambda_current:.6f}, rho current {res.rho_current:.6f}: "
          f"{res.verdict}")
    return 1 if res.verdict == "violated" else 0


COMMANDS = {
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "flux": cmd_flux,
    "hopflax": cmd_hopflax,
    "lln": cmd_lln,
    "current-compare": cmd_current_compare,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kexclusion", description="K-exclusion experiments")
    ap.add_argument("--version", action="version", version=f"kexclusion {__version__}")
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI config file")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="SECTION.KEY=VALUE")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
        p.add_argument("--k", help="capacity K (integer or inf)")
        for flag in ("n", "t", "s", "replicas", "instances"):
            p.add_argument(f"--{flag}")
    return ap


def run(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else 2
    overrides = list(args.overrides)
    if args.k is not None:
        overrides.append(f"model.k={args.k}")
    for flag in ("n", "t", "s", "replicas", "instances"):
        v = getattr(args, flag)
        if v is not None:
            overrides.append(f"run.{flag}={v}")
    rc = RunConfig(args.subcommand, args.config, overrides, args.out, args.seed)
    try:
        load_config(rc)
        return COMMANDS[rc.subcommand](rc)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

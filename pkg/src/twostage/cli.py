"""Command-line front end: simulate, sweep-az, predict, channel, resum, exact.

Every output file starts with '#' lines carrying the package version, the
RunConfig (JSON) and the time-unit convention.  Exit codes: 0 ok, 2 bad
configuration, 3 numerical failure.
"""
from __future__ import annotations

import argparse
from concurrent.futures import ProcessPoolExecutor
import csv
import dataclasses
import io
import json
import logging
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .effective_magnet import Haar, XYZAveraged, family_from_dict, local_transfer
from .propagator import (NumericalError, build_schedule, partition_free_boundary,
                         default_windows, fit_rate, pinned_table)
from .resummation import resummed_rate, reduce_space, METHODS
from .theory import predict_rates, averaged_channel, r_mag_analytic
from . import exact_circuit as ec

log = logging.getLogger("twostage")

EXIT_CONFIG, EXIT_NUMERIC = 2, 3


@dataclasses.dataclass
class RunConfig:
    subcommand: str
    family: dict = dataclasses.field(default_factory=dict)
    geometry: str = "brickwall"
    boundary: str = "open"
    L: int = 12
    T: int | None = None
    window1: list | None = None
    window2: list | None = None
    method: str = "sum_x"
    out: str | None = None
    seed: int = 1234
    extra: dict = dataclasses.field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, s: str):
        return cls(**json.loads(s))


# ---------------------------------------------------------------------------
# output helpers

def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _header(cfg: RunConfig, convention: str):
    return [f"# twostage {__version__}", f"# config: {cfg.to_json()}", f"# time: {convention}"]


def write_csv(path, cfg, convention, columns, rows):
    buf = io.StringIO()
    buf.write("\n".join(_header(cfg, convention)) + "\r\n")
    w = csv.writer(buf)           # RFC 4180 line endings
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    _atomic_write(path, buf.getvalue())


def write_json(path, cfg, convention, payload):
    doc = {"version": __version__, "config": json.loads(cfg.to_json()),
           "time_convention": convention, **payload}
    _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return doc


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not serializable: {type(o)}")


def write_gnuplot(path, csv_path, xcol, ycol, logy=True, title=""):
    lines = ["set datafile separator ','", "set datafile commentschars '#'",
             "set key autotitle columnhead", f"set title '{title}'"]
    if logy:
        lines.append("set logscale y")
    lines.append(f"plot '{os.path.basename(csv_path)}' using {xcol}:(abs(${ycol})) with linespoints")
    _atomic_write(path, "\n".join(lines) + "\n")


def _paths(cfg, *suffixes):
    prefix = cfg.out or cfg.subcommand
    return [f"{prefix}{s}" for s in suffixes]


# ---------------------------------------------------------------------------
# family / window parsing

def _family(args):
    if args.family == "haar":
        return Haar(args.q)
    if args.family == "xyz":
        return XYZAveraged(args.ax, args.ay, args.az)
    raise ValueError(f"family must be haar or xyz, got {args.family!r}")


def _window(s):
    if s is None:
        return None
    a, b = (float(v) for v in s.split(","))
    if b < a:
        raise ValueError(f"window {s!r} has t_max < t_min")
    return [a, b]


def _grid(s):
    if ":" in s:
        a, b, h = (float(v) for v in s.split(":"))
        n = int(round((b - a) / h)) + 1
        return [round(a + k * h, 12) for k in range(n)]
    return [float(v) for v in s.split(",")]


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(cfg: RunConfig):
    fam = family_from_dict(cfg.family)
    sch = build_schedule(cfg.geometry, cfg.boundary, cfg.L)
    x0 = cfg.extra.get("x0", cfg.L // 2)
    T = cfg.T if cfg.T is not None else 4 * cfg.L
    s = partition_free_boundary(x0, sch, fam, T)
    w1, w2 = default_windows(sch, s.t[-1], L_A=x0 if sch.boundary == "open" else None)
    w1 = cfg.window1 or list(w1)
    w2 = cfg.window2 or list(w2)
    fits = {}
    for name, w in (("r1", w1), ("r2", w2)):
        try:
            fits[name] = fit_rate(s.t, s.dz, w).to_dict()
        except ValueError as e:
            fits[name] = {"error": str(e), "window": w}
    csvp, jsp, gp = _paths(cfg, ".csv", ".json", ".gp")
    write_csv(csvp, cfg, sch.time_convention, ["t", "deltaZ"], zip(s.t.tolist(), s.dz))
    pred = None
    try:
        pred = predict_rates(fam, cfg.geometry, cfg.boundary).to_dict()
    except TypeError:
        pass
    doc = write_json(jsp, cfg, sch.time_convention,
                     {"fits": fits, "prediction": pred, "truncated": s.truncated, "path": s.path,
                      "family": {"family": fam.name, "params": fam.params(),
                                 "weights": local_transfer(fam).m.tolist()}})
    if cfg.extra.get("gnuplot"):
        write_gnuplot(gp, csvp, 1, 2, title="deltaZ(t)")
    return doc


def _sweep_point(args):
    az, L, tau, method = args
    sch = build_schedule("brickwall", "open", L)
    tab = pinned_table("magnon", sch, XYZAveraged(1.0, 1.0, az), tau)
    r = resummed_rate(tab, method)
    return az, r.rate, r.oscillating


def cmd_sweep_az(cfg: RunConfig):
    grid = cfg.extra["grid"]
    for az in grid:
        if not 0 <= az <= 1:
            raise ValueError(f"a_z={az} outside [0, 1]")
    tau = cfg.T if cfg.T is not None else cfg.L - 1
    tasks = [(az, cfg.L, tau, cfg.method) for az in grid]
    workers = int(cfg.extra.get("workers", 1))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            res = list(ex.map(_sweep_point_safe, tasks))
    else:
        res = [_sweep_point_safe(t) for t in tasks]
    rows = []
    for az, r, osc in res:
        rm = r_mag_analytic(az)
        rows.append([az, r, min(1.0, rm), "open", int(osc)])
        rows.append([az, r, rm, "periodic", int(osc)])
    csvp, gp = _paths(cfg, ".csv", ".gp")
    write_csv(csvp, cfg, "brickwall: 1 time unit per layer",
              ["a_z", "r_measured", "r_analytic", "boundary", "oscillating"], rows)
    if cfg.extra.get("gnuplot"):
        write_gnuplot(gp, csvp, 1, 2, logy=False, title="magnon rate vs a_z")
    return {"rows": rows, "r_measured": {f"{az:g}": r for az, r, _ in res}}


def _sweep_point_safe(t):
    try:
        return _sweep_point(t)
    except NumericalError as e:
        log.warning("a_z=%s: %s", t[0], e)
        return t[0], float("nan"), False


def cmd_predict(cfg: RunConfig):
    fam = family_from_dict(cfg.family)
    p = predict_rates(fam, cfg.geometry, cfg.boundary)
    (jsp,) = _paths(cfg, ".json")
    return write_json(jsp, cfg, build_schedule(cfg.geometry, cfg.boundary, 4).time_convention, p.to_dict())


def cmd_channel(cfg: RunConfig):
    f = cfg.family.get("params", {})
    az = f.get("az", 0.5)
    ch = averaged_channel(az)
    payload = {"averaged": {"matrix": ch.matrix.tolist(), "eigenvalues": list(ch.eigenvalues),
                            "lambda_minus": ch.lam_minus, "r_mag": ch.rate}}
    if "phi" in f:
        g = ec.floquet_gate(f.get("ax", 1.0), f.get("ay", 1.0), az, f["phi"])
        payload["fixed"] = ec.light_cone_channel(g, "left").report()
    (jsp,) = _paths(cfg, ".json")
    return write_json(jsp, cfg, "brickwall: 1 time unit per layer", payload)


def _trace_rows(r):
    return [[int(t), float(x), float(rt)] for t, x, rt in zip(r.taus, r.x0_trace, r.rate_trace)]


def cmd_resum(cfg: RunConfig):
    fam = family_from_dict(cfg.family)
    sch = build_schedule(cfg.geometry, cfg.boundary, cfg.L)
    T = cfg.T if cfg.T is not None else cfg.L - 1
    tab = pinned_table(cfg.extra.get("pinning", "magnon"), sch, fam, T)
    r = resummed_rate(tab, cfg.method)
    csvp, jsp, gp = _paths(cfg, ".csv", ".json", ".gp")
    write_csv(csvp, cfg, sch.time_convention, ["tau", "x0", "rate"], _trace_rows(r))
    doc = write_json(jsp, cfg, sch.time_convention, r.to_dict())
    if cfg.extra.get("gnuplot"):
        write_gnuplot(gp, csvp, 1, 3, logy=False, title="resummed rate vs truncation order")
    return doc


def cmd_exact(cfg: RunConfig):
    f = cfg.family.get("params", {})
    ax, ay, az, phi = f.get("ax", 1.0), f.get("ay", 1.0), f.get("az", 0.5), f.get("phi", 0.6)
    mode = cfg.extra.get("mode", "magnon")
    conv = "brickwall: 1 time unit per layer"
    csvp, jsp, gp = _paths(cfg, ".csv", ".json", ".gp")
    g = ec.floquet_gate(ax, ay, az, phi)
    ch = ec.light_cone_channel(g, "left")
    if mode == "channel":
        return write_json(jsp, cfg, conv, ch.report())
    if mode == "magnon":
        T = cfg.T if cfg.T is not None else cfg.L - 1
        tab = ec.magnon_overlap_table(g, cfg.L, T)
        r = resummed_rate(tab, cfg.method)
        write_csv(csvp, cfg, conv, ["tau", "x0", "rate"], _trace_rows(r))
        doc = write_json(jsp, cfg, conv, {**r.to_dict(), "channel_prediction": ch.r_mag_fixed(),
                                          "Z_reduced": reduce_space(tab, r.method).z})
        if cfg.extra.get("gnuplot"):
            write_gnuplot(gp, csvp, 1, 3, logy=False, title="exact magnon rate vs truncation order")
        return doc
    if mode == "reverse":
        rt = ec.reverse_transition_correlator(az, phi, cfg.L, cfg.T, cfg.extra.get("n_states", 32),
                                              cfg.seed, cfg.window1)
        write_csv(csvp, cfg, conv, ["t", "C2_sampled", "C2_product_average"],
                  zip(rt.t.tolist(), rt.sampled, rt.exact_average))
        doc = write_json(jsp, cfg, conv, {"fit": rt.fit.to_dict(), "fit_product_average": rt.fit_exact.to_dict(),
                                          "seed": rt.seed, "n_states": rt.n_states,
                                          "r_mag_analytic": r_mag_analytic(az)})
        if cfg.extra.get("gnuplot"):
            write_gnuplot(gp, csvp, 1, 2, title="|C(t)|^2")
        return doc
    raise ValueError(f"unknown exact mode {mode!r}")


COMMANDS = {"simulate": cmd_simulate, "sweep-az": cmd_sweep_az, "predict": cmd_predict,
            "channel": cmd_channel, "resum": cmd_resum, "exact": cmd_exact}


# ---------------------------------------------------------------------------
# argument parsing

def build_parser():
    p = argparse.ArgumentParser(prog="twostage", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp, family=True, geometry=True):
        if family:
            sp.add_argument("--family", choices=["haar", "xyz"], default="xyz")
            sp.add_argument("--q", type=int, default=2)
        sp.add_argument("--ax", type=float, default=1.0)
        sp.add_argument("--ay", type=float, default=1.0)
        sp.add_argument("--az", type=float, default=0.5)
        if geometry:
            sp.add_argument("--geometry", choices=["brickwall", "staircase"], default="brickwall")
            sp.add_argument("--bc", choices=["open", "periodic"], default="open")
        sp.add_argument("--out", help="output path prefix (default: subcommand name)")
        sp.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script")
        sp.add_argument("-v", "--verbose", action="store_true")

    s = sub.add_parser("simulate", help="free-boundary purity decay and two-stage fit")
    common(s)
    s.add_argument("--L", type=int, default=12)
    s.add_argument("--T", type=int, help="number of layers (default 4L)")
    s.add_argument("--x0", type=int, help="initial domain-wall position (default L/2)")
    s.add_argument("--window1", help="first-stage fit window t_min,t_max")
    s.add_argument("--window2", help="second-stage fit window t_min,t_max")

    s = sub.add_parser("sweep-az", help="resummed magnon rate over an a_z grid")
    common(s, family=False, geometry=False)
    s.add_argument("--grid", default="0.1:0.9:0.1", help="start:stop:step or comma list")
    s.add_argument("--L", type=int, default=16)
    s.add_argument("--tau", type=int, help="truncation order (default L-1)")
    s.add_argument("--method", choices=METHODS, default="sum_x")
    s.add_argument("--workers", type=int, default=1)

    s = sub.add_parser("predict", help="closed-form r1, r2 and scenario")
    common(s)

    s = sub.add_parser("channel", help="averaged (and optionally fixed) light-cone channel")
    common(s, family=False, geometry=False)
    s.add_argument("--phi", type=float, help="also report the fixed Floquet channel")

    s = sub.add_parser("resum", help="W/Z resummation of a pinned table")
    common(s)
    s.add_argument("--L", type=int, default=16)
    s.add_argument("--tau", type=int, help="truncation order (default L-1)")
    s.add_argument("--pinning", choices=["magnon", "domain_wall", "modified_magnon"], default="magnon")
    s.add_argument("--method", choices=METHODS, default="sum_x")

    s = sub.add_parser("exact", help="exact Floquet circuit: magnon table, reverse transition, channel")
    common(s, family=False, geometry=False)
    s.add_argument("--phi", type=float, default=0.6)
    s.add_argument("--L", type=int, default=8)
    s.add_argument("--T", type=int)
    s.add_argument("--mode", choices=["magnon", "reverse", "channel"], default="magnon")
    s.add_argument("--method", choices=METHODS, default="sum_x")
    s.add_argument("--seed", type=int, default=1234)
    s.add_argument("--n-states", type=int, default=32)
    s.add_argument("--window", help="reverse-transition fit window t_min,t_max")
    return p


def config_from_args(a) -> RunConfig:
    sc = a.subcommand
    extra = {"gnuplot": bool(a.gnuplot)}
    fam = {}
    if sc in ("simulate", "predict", "resum"):
        f = _family(a)
        fam = {"family": f.name, "params": f.params()}
    elif sc == "channel":
        params = {"ax": a.ax, "ay": a.ay, "az": a.az}
        if a.phi is not None:
            params["phi"] = a.phi
        fam = {"family": "floquet" if a.phi is not None else "xyz", "params": params}
    elif sc == "exact":
        fam = {"family": "floquet", "params": {"ax": a.ax, "ay": a.ay, "az": a.az, "phi": a.phi}}
    elif sc == "sweep-az":
        fam = {"family": "xyz", "params": {"ax": 1.0, "ay": 1.0}}
    cfg = RunConfig(sc, fam, out=a.out, extra=extra)
    if hasattr(a, "geometry"):
        cfg.geometry, cfg.boundary = a.geometry, a.bc
    if hasattr(a, "L"):
        cfg.L = a.L
    if sc == "simulate":
        cfg.T = a.T
        cfg.window1, cfg.window2 = _window(a.window1), _window(a.window2)
        if a.x0 is not None:
            extra["x0"] = a.x0
    elif sc in ("sweep-az", "resum"):
        cfg.T = a.tau
        cfg.method = a.method
        if sc == "sweep-az":
            extra["grid"] = _grid(a.grid)
            extra["workers"] = a.workers
        else:
            extra["pinning"] = a.pinning
    elif sc == "exact":
        cfg.T, cfg.method, cfg.seed = a.T, a.method, a.seed
        cfg.window1 = _window(a.window)
        extra.update(mode=a.mode, n_states=a.n_states)
        if a.L > ec.MAX_EXACT_L:
            raise ValueError(f"exact mode supports L <= {ec.MAX_EXACT_L}")
    if sc in ("simulate", "resum") and cfg.L % 2:
        raise ValueError(f"L must be even, got {cfg.L}")
    return cfg


def run(cfg: RunConfig):
    return COMMANDS[cfg.subcommand](cfg)


def main(argv=None):
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(a)
        doc = run(cfg)
    except (ValueError, TypeError, KeyError) as e:
        print(f"twostage {a.subcommand}: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"twostage {a.subcommand}: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    summary = {k: v for k, v in (doc or {}).items() if k not in ("config", "rows", "Z_reduced", "family")}
    print(json.dumps(summary, indent=2, sort_keys=True, default=_jsonable))
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Irreducible-diagram (W/Z) resummation and generating-function roots.

Z(t) = W(t) + sum_{t'=1}^{t-1} Z(t') W(t - t'), so that the generating
function of Z is W(x) / (1 - W(x)).  The asymptotic decay factor is set by the
smallest positive root x0 of 1 - sum_t W(t) x^t, and the rate by log2(x0).
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging

import numpy as np
from scipy.optimize import brentq

from .propagator import NumericalError, SpaceTimeTable

log = logging.getLogger(__name__)

METHODS = ("sum_x", "max_x", "abs_sum_x", "abs_max_x")
_ABS = {"sum_x": "abs_sum_x", "max_x": "abs_max_x", "abs_sum_x": "abs_sum_x", "abs_max_x": "abs_max_x"}


class NoRootError(NumericalError):
    pass


@dataclass
class ReducedSeries:
    z: np.ndarray
    method: str
    dt: float = 1.0            # time units per index step
    meta: dict = field(default_factory=dict)

    @property
    def oscillating(self) -> bool:
        # any sign change over the whole series, Z(0) included
        s = np.sign(self.z[self.z != 0])
        return bool(np.any(s[1:] != s[:-1]))


def reduce_space(table: SpaceTimeTable, method: str = "sum_x") -> ReducedSeries:
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    v = np.asarray(table.values, dtype=float)
    if v.size == 0:
        raise ValueError("empty table")
    if method.startswith("abs_"):
        v = np.abs(v)
    z = v.sum(axis=1) if method.endswith("sum_x") else v.max(axis=1)
    t = np.asarray(table.t, dtype=float)
    dt = float(t[1] - t[0]) if t.size > 1 else 1.0
    return ReducedSeries(z, method, dt, dict(table.meta, pinning=table.pinning))


@dataclass
class IrreducibleWeights:
    w: np.ndarray      # w[0] unused (= 0), w[t] for t = 1..T
    dt: float = 1.0

    @property
    def T(self):
        return len(self.w) - 1


def solve_irreducible(series) -> IrreducibleWeights:
    """Forward substitution W(t) = Z(t) - sum_{t'=1}^{t-1} Z(t') W(t-t')."""
    if isinstance(series, ReducedSeries):
        z, dt = np.asarray(series.z, dtype=float), series.dt
    else:
        z, dt = np.asarray(series, dtype=float), 1.0
    if z.size < 3:
        raise ValueError("need Z(0..T) with T >= 2")
    if not np.isfinite(z[0]):
        raise ValueError("Z(0) must be finite")
    T = z.size - 1
    w = np.zeros(T + 1)
    for t in range(1, T + 1):
        w[t] = z[t] - np.dot(z[1:t], w[t - 1:0:-1])
    return IrreducibleWeights(w, dt)


def reconstruct(W: IrreducibleWeights, z0: float = 1.0) -> np.ndarray:
    """Inverse of solve_irreducible."""
    w = W.w
    z = np.zeros_like(w)
    z[0] = z0
    for t in range(1, len(w)):
        z[t] = w[t] + np.dot(z[1:t], w[t - 1:0:-1])
    return z


@dataclass
class RootResult:
    x0: float
    rate: float
    residual: float
    taus: np.ndarray
    x0_trace: np.ndarray
    rate_trace: np.ndarray
    oscillating: bool = False
    method: str = ""

    def last_quartile(self):
        n = len(self.rate_trace)
        k = max(1, int(np.ceil(n / 4)))
        return self.taus[-k:], self.rate_trace[-k:]

    def to_dict(self):
        return {"method": self.method, "x0": self.x0, "rate": self.rate, "residual": self.residual,
                "flag": "oscillating" if self.oscillating else "monotone"}


def _poly(w, tau):
    # coefficients of 1 - sum_{t=1}^{tau} w_t x^t, highest power first for polyval
    c = np.concatenate(([1.0], -w[1:tau + 1]))
    return c[::-1]


def _min_root(w, tau, x_max=64.0, x_cap=2.0 ** 20, n_grid=4000):
    c = _poly(w, tau)
    f = lambda x: np.polyval(c, x)
    lo = 0.0
    while True:
        grid = np.concatenate((np.linspace(lo, 1.0, 200)[:-1] if lo < 1 else [],
                               np.geomspace(max(lo, 1 + 1e-9), x_max, n_grid)))
        fv = f(grid)
        ch = np.nonzero(np.sign(fv[1:]) * np.sign(fv[:-1]) <= 0)[0]
        if ch.size:
            k = ch[0]
            a, b = grid[k], grid[k + 1]
            if fv[k] == 0:
                return a, 0.0
            x0 = brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
            return x0, abs(f(x0))
        if x_max >= x_cap:
            raise NoRootError(f"no root of 1 - sum W(t) x^t up to x_max={x_max:g} "
                              f"(tau={tau}, f(x_max)={fv[-1]:.3g})")
        lo, x_max = x_max, x_max * 8


def generating_root(W: IrreducibleWeights, taus=None, x_max=64.0) -> RootResult:
    """Smallest positive root of 1 - sum_{t<=tau} W(t) x^t for tau = 2..T."""
    T = W.T
    if T < 1:
        raise ValueError("W is empty")
    taus = np.arange(min(2, T), T + 1) if taus is None else np.asarray(taus)
    xs, res = [], []
    for tau in taus:
        try:
            x0, r = _min_root(W.w, int(tau), x_max)
        except NoRootError:
            if tau == taus[-1]:
                raise
            x0, r = np.nan, np.nan
        xs.append(x0)
        res.append(r)
    xs = np.array(xs)
    rates = np.log2(xs) / W.dt
    if res[-1] > 1e-10:
        log.warning("root residual %.2e above 1e-10", res[-1])
    return RootResult(float(xs[-1]), float(rates[-1]), float(res[-1]), taus, xs, rates)


def resummed_rate(table: SpaceTimeTable, method: str = "sum_x", tau_max: int | None = None) -> RootResult:
    """reduce_space -> solve_irreducible -> generating_root, with the oscillation rule."""
    s = reduce_space(table, method)
    osc = s.oscillating
    if osc and not method.startswith("abs_"):
        log.info("series oscillates in sign; searching roots on %s", _ABS[method])
        s = reduce_space(table, _ABS[method])
    if tau_max is not None:
        s = ReducedSeries(s.z[:tau_max + 1], s.method, s.dt, s.meta)
    r = generating_root(solve_irreducible(s))
    r.oscillating = osc
    r.method = s.method
    return r

"""Gate schedules, coordinate-vector evolution and decay-rate fits.

The purity coordinate vector has one entry per spin configuration (see
``effective_magnet`` for the bit convention).  One gate on sites (i, j)
contracts the 4x4 LocalTransfer into the two corresponding axes; columns of
the transfer matrix are images of input states, so the update is new = M @ old.
All-plus and all-minus configurations are absorbing and are drained into
``absorbed_plus`` / ``absorbed_minus`` after every layer.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging

import numpy as np

from .effective_magnet import (Haar, XYZAveraged, LocalTransfer, local_transfer, gram,
                               dw_config, magnon_config)

log = logging.getLogger(__name__)

MAX_DENSE_L = 24
BRICKWALL, STAIRCASE = "brickwall", "staircase"
OPEN, PERIODIC = "open", "periodic"

# swaps the (+-) and (-+) entries: converts left-major to right-major pair index
_PAIR_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=float)


class NumericalError(ArithmeticError):
    """Raised when a computation cannot produce a trustworthy number."""


# ---------------------------------------------------------------------------
# schedules

@dataclass(frozen=True)
class Schedule:
    geometry: str
    boundary: str
    L: int
    layers: tuple          # brickwall: (even, odd), even applied first; staircase: (sweep,)
    time_per_layer: int    # time units advanced by one layer
    flagged: bool = False  # staircase + periodic

    def layer(self, k: int):
        """Gates of the k-th applied layer (0-based)."""
        if k < 0:
            raise IndexError(f"layer index {k} < 0")
        return self.layers[k % len(self.layers)]

    @property
    def even(self):
        return self.layers[0] if self.geometry == BRICKWALL else None

    @property
    def odd(self):
        return self.layers[1] if self.geometry == BRICKWALL else None

    @property
    def time_convention(self) -> str:
        if self.geometry == BRICKWALL:
            return "brickwall: 1 time unit per layer"
        return "staircase: 2 time units per sweep of L-1 (open) or L (periodic) gates"

    def to_dict(self):
        return {"geometry": self.geometry, "boundary": self.boundary, "L": self.L,
                "time_per_layer": self.time_per_layer, "flagged": self.flagged}


def build_schedule(geometry: str, boundary: str, L: int) -> Schedule:
    geometry, boundary = geometry.lower(), boundary.lower()
    if geometry not in (BRICKWALL, STAIRCASE):
        raise ValueError(f"geometry must be brickwall or staircase, got {geometry!r}")
    if boundary not in (OPEN, PERIODIC):
        raise ValueError(f"boundary must be open or periodic, got {boundary!r}")
    if int(L) != L or L < 4 or L % 2:
        raise ValueError(f"L must be an even integer >= 4, got {L}")
    L = int(L)
    pbc = boundary == PERIODIC
    if geometry == BRICKWALL:
        even = tuple((i, i + 1) for i in range(1, L, 2))
        odd = tuple((i, i + 1) for i in range(2, L - 1, 2)) + (((L, 1),) if pbc else ())
        # even layer first, so a magnon at site 1 is hit by the first layer
        return Schedule(geometry, boundary, L, (even, odd), 1)
    sweep = tuple((i, i + 1) for i in range(1, L)) + (((L, 1),) if pbc else ())
    if pbc:
        log.warning("staircase with periodic boundary: flagged, no closed-form coverage")
    return Schedule(geometry, boundary, L, (sweep,), 2, flagged=pbc)


# ---------------------------------------------------------------------------
# dense coordinate vector

@dataclass
class PurityVector:
    coeffs: np.ndarray
    L: int
    time_layers: int = 0
    time_units: int = 0
    absorbed_plus: float = 0.0
    absorbed_minus: float = 0.0

    @classmethod
    def indicator(cls, config: int, L: int):
        if L > MAX_DENSE_L:
            raise ValueError(f"dense evolution capped at L <= {MAX_DENSE_L}, got L={L}")
        c = np.zeros(2 ** L)
        c[config] = 1.0
        return cls(c, L)

    def total(self) -> float:
        """All-ones contraction of the unabsorbed remainder."""
        return float(self.coeffs.sum())

    def copy(self):
        return PurityVector(self.coeffs.copy(), self.L, self.time_layers, self.time_units,
                            self.absorbed_plus, self.absorbed_minus)


def apply_gate(v: np.ndarray, L: int, m: np.ndarray, i: int, j: int) -> np.ndarray:
    """Contract the 4x4 matrix ``m`` (left site i major) into sites (i, j)."""
    if j == i + 1:
        # site k <-> bit k-1, so (i, i+1) are adjacent bits; pair index is right-major
        t = v.reshape(2 ** (L - i - 1), 4, 2 ** (i - 1))
        return np.matmul(_PAIR_SWAP @ m @ _PAIR_SWAP, t).reshape(-1)
    a, b = L - i, L - j
    t = np.moveaxis(v.reshape((2,) * L), (a, b), (0, 1))
    sh = t.shape
    t = (m @ t.reshape(4, -1)).reshape(sh)
    return np.ascontiguousarray(np.moveaxis(t, (0, 1), (a, b))).reshape(-1)


def _drain(c: np.ndarray):
    p, mn = float(c[0]), float(c[-1])
    c[0] = 0.0
    c[-1] = 0.0
    return p, mn


def apply_layer(state: PurityVector, schedule: Schedule, layer_index: int, M) -> PurityVector:
    if state.L != schedule.L:
        raise ValueError(f"state has L={state.L}, schedule has L={schedule.L}")
    m = M.m if isinstance(M, LocalTransfer) else np.asarray(M, dtype=float)
    c = state.coeffs
    for i, j in schedule.layer(layer_index):
        c = apply_gate(c, state.L, m, i, j)
    if c is state.coeffs:
        c = c.copy()
    p, mn = _drain(c)
    return PurityVector(c, state.L, state.time_layers + 1,
                        state.time_units + schedule.time_per_layer,
                        state.absorbed_plus + p, state.absorbed_minus + mn)


def _evolve(state, schedule, M, T, readout):
    """Apply T layers starting at layer 0; collect readout(state) at every step."""
    out = [readout(state)]
    for k in range(T):
        state = apply_layer(state, schedule, k, M)
        out.append(readout(state))
    return state, out


# ---------------------------------------------------------------------------
# domain-wall sector (Haar, open boundary)

@dataclass
class DWSeries:
    z: np.ndarray           # (T+1, L+1)
    t: np.ndarray           # time units
    absorbed: np.ndarray    # cumulative mass absorbed at x = 0 and x = L, shape (T+1, 2)


def dw_sector_evolve(x0: int, schedule: Schedule, T: int, family=None) -> DWSeries:
    """O(L) per layer evolution of the L+1 domain-wall amplitudes (Haar only)."""
    family = Haar(2) if family is None else family
    if not isinstance(family, Haar):
        raise TypeError("domain-wall sector is closed only for Haar gates")
    if schedule.boundary != OPEN:
        raise ValueError("domain-wall sector path supports open boundaries only")
    L = schedule.L
    if not 0 <= x0 <= L:
        raise ValueError(f"x0={x0} outside 0..{L}")
    w = local_transfer(family).m[0, 1]
    z = np.zeros(L + 1)
    z[x0] = 1.0
    zs, absd = [z.copy()], [np.zeros(2)]
    acc = np.zeros(2)
    for k in range(T):
        for i, _ in schedule.layer(k):
            m = z[i]
            if m:
                z[i] = 0.0
                z[i - 1] += w * m
                z[i + 1] += w * m
        # x = 0 is all-minus, x = L is all-plus
        acc = acc + [z[L], z[0]]
        z[0] = z[L] = 0.0
        zs.append(z.copy())
        absd.append(acc.copy())
    t = np.arange(T + 1) * schedule.time_per_layer
    return DWSeries(np.array(zs), t, np.array(absd))


# ---------------------------------------------------------------------------
# partition functions

@dataclass
class FreeBoundarySeries:
    t: np.ndarray
    dz: np.ndarray
    truncated: bool
    absorbed_plus: np.ndarray
    absorbed_minus: np.ndarray
    prefactor: float
    path: str
    schedule: Schedule
    family: object


def partition_free_boundary(x0: int, schedule: Schedule, family, T: int,
                            path: str = "auto") -> FreeBoundarySeries:
    """Delta Z(t): all-ones overlap of the unabsorbed coordinates, T layers."""
    L = schedule.L
    if not 0 <= x0 <= L:
        raise ValueError(f"x0={x0} outside 0..{L}")
    if T < 0:
        raise ValueError("T must be >= 0")
    q = family.q
    pref = float((q * q + q) ** (-float(L)))
    if path == "auto":
        path = "dw" if isinstance(family, Haar) and schedule.boundary == OPEN else "dense"
    if path == "dw":
        s = dw_sector_evolve(x0, schedule, T, family)
        raw = s.z.sum(axis=1)
        ap, am = s.absorbed[:, 0], s.absorbed[:, 1]
    elif path == "dense":
        M = local_transfer(family)
        st = PurityVector.indicator(dw_config(x0, L), L)
        _, rows = _evolve(st, schedule, M, T,
                          lambda s: (s.total(), s.absorbed_plus, s.absorbed_minus))
        raw, ap, am = (np.array(c) for c in zip(*rows))
    else:
        raise ValueError(f"unknown path {path!r}")
    t = np.arange(T + 1) * schedule.time_per_layer
    dz = pref * raw
    truncated = False
    dead = np.nonzero(np.abs(dz) < 1e-300)[0]
    if dead.size:
        n = int(dead[0])
        if n < 3:
            raise NumericalError("all mass absorbed before three time steps")
        log.warning("series truncated at layer %d: remaining mass below 1e-300", n)
        t, dz, ap, am = t[:n], dz[:n], ap[:n], am[:n]
        truncated = True
    return FreeBoundarySeries(t, dz, truncated, pref * ap, pref * am, pref, path, schedule, family)


@dataclass
class SpaceTimeTable:
    values: np.ndarray      # (n_t, n_x)
    xs: np.ndarray
    t: np.ndarray
    pinning: str
    meta: dict = field(default_factory=dict)

    def rows(self):
        for a, tt in enumerate(self.t):
            for b, x in enumerate(self.xs):
                yield int(x), int(tt), float(self.values[a, b])


PINNINGS = ("magnon", "domain_wall", "modified_magnon")


def _overlap_with(c: np.ndarray, L: int, vecs) -> float:
    """sum_s c_s prod_k vecs[k][s_k]; vecs indexed by 1-based site."""
    t = c.reshape((2,) * L)
    # axis 0 is site L; contract from the last axis (site 1) upward
    for k in range(1, L + 1):
        t = t @ vecs[k]
    return float(t)


def pinned_table(pinning: str, schedule: Schedule, family, T: int, x0: int | None = None) -> SpaceTimeTable:
    if pinning not in PINNINGS:
        raise ValueError(f"pinning must be one of {PINNINGS}")
    if not isinstance(family, (Haar, XYZAveraged)):
        raise TypeError("pinned_table needs a Haar or XYZAveraged family")
    L = schedule.L
    M = local_transfer(family)
    if pinning == "domain_wall":
        x0 = L // 2 if x0 is None else x0
        xs = np.arange(L + 1)
        idx = np.array([dw_config(x, L) for x in xs])
        init = dw_config(x0, L)
        readout = lambda s: s.coeffs[idx].copy()
    else:
        xs = np.arange(1, L + 1)
        init = magnon_config(1, L)
        if pinning == "magnon":
            idx = np.array([magnon_config(x, L) for x in xs])
            readout = lambda s: s.coeffs[idx].copy()
        else:
            g = gram(family.q) / float(family.q) ** 2
            gp, gm = g[0], g[1]

            def readout(s):
                return np.array([_overlap_with(s.coeffs, L, {k: (gm if k == x else gp) for k in range(1, L + 1)})
                                 for x in xs])
    st = PurityVector.indicator(init, L)
    _, rows = _evolve(st, schedule, M, T, readout)
    meta = {"schedule": schedule.to_dict(), "family": family.name, "params": family.params()}
    if pinning == "domain_wall":
        meta["x0"] = x0
    return SpaceTimeTable(np.array(rows), xs, np.arange(T + 1) * schedule.time_per_layer, pinning, meta)


# ---------------------------------------------------------------------------
# rate fits

@dataclass(frozen=True)
class RateEstimate:
    rate: float
    window: tuple
    residual: float
    oscillating: bool
    n_points: int
    units: str = "bits per time unit"

    def to_dict(self):
        return {"rate": self.rate, "window": list(self.window), "residual": self.residual,
                "oscillating": self.oscillating, "n_points": self.n_points, "units": self.units}


def fit_rate(t, dz, window) -> RateEstimate:
    """Negated least-squares slope of log2|dz| against t inside ``window``."""
    t = np.asarray(t, dtype=float)
    dz = np.asarray(dz, dtype=float)
    lo, hi = window
    sel = (t >= lo) & (t <= hi)
    tw, zw = t[sel], dz[sel]
    if tw.size and np.all(zw == 0):
        raise ValueError(f"all-zero window {window}")
    use = zw != 0
    if use.sum() < 3:
        raise ValueError(f"window {window} holds {int(use.sum())} usable points, need >= 3")
    tw, zw = tw[use], zw[use]
    y = np.log2(np.abs(zw))
    if np.ptp(y) == 0 and np.ptp(zw) == 0:
        raise ValueError("degenerate (constant) series")
    A = np.vstack([tw, np.ones_like(tw)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    osc = bool(np.any(np.sign(zw[1:]) != np.sign(zw[:-1])))
    return RateEstimate(float(-coef[0]), (float(lo), float(hi)), res, osc, int(tw.size))


def saturation_time(schedule: Schedule, L_A: int | None = None) -> float:
    """Light-cone estimate of t_sat for a wall starting at L_A (default L/2)."""
    L_A = schedule.L // 2 if L_A is None else L_A
    per_site = 1 if schedule.geometry == BRICKWALL else 2
    if schedule.boundary == PERIODIC:
        return per_site * L_A / 2
    return per_site * L_A


def default_windows(schedule: Schedule, t_end: float, L_A: int | None = None):
    """([2, t_sat-2], [t_sat+2, t_end]); the first falls back to [1, t_sat] if too short."""
    ts = saturation_time(schedule, L_A)
    step = schedule.time_per_layer
    w1 = (2.0, ts - 2)
    if (w1[1] - w1[0]) / step + 1 < 3:
        w1 = (1.0, float(ts))
    return w1, (ts + 2, float(t_end))


def two_stage_fit(series: FreeBoundarySeries, windows=None, L_A=None):
    if windows is None:
        windows = default_windows(series.schedule, series.t[-1], L_A)
    return tuple(fit_rate(series.t, series.dz, w) for w in windows)

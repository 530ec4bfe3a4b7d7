"""Closed-form rate predictions: membrane line tension, staircase minimization,
averaged light-cone channel and scenario classification.

Rates are in bits per time unit (purity factor 2^(-r t)).  The line tension is
dimensionless, i.e. in units of ln q.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.optimize import brentq

from .effective_magnet import Haar, XYZAveraged, xyz_weights

SCENARIO_TOL = 1e-9
_GOLD = (math.sqrt(5) - 1) / 2


def _xlogx(p):
    return 0.0 if p == 0 else p * math.log(p)


def line_tension_ruc(v, q=2) -> float:
    """E(v) for Haar random circuits, in units of ln q."""
    if abs(v) > 1:
        raise ValueError(f"|v| must be <= 1, got {v}")
    if q < 2:
        raise ValueError("q must be >= 2")
    a, b = (1 + v) / 2, (1 - v) / 2
    return (math.log((q * q + 1) / q) + _xlogx(a) + _xlogx(b)) / math.log(q)


def _dline_tension_ruc(v, q):
    return 0.5 * math.log((1 + v) / (1 - v)) / math.log(q)


def golden_section(f, a, b, tol=1e-10, maxiter=500):
    """Minimize a unimodal f on [a, b]; returns the midpoint of the final bracket."""
    c, d = b - _GOLD * (b - a), a + _GOLD * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(maxiter):
        if b - a < tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLD * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLD * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    # endpoint limit: the minimum may sit on the boundary v = 1
    if f(b) <= f(x):
        x = b
    return x


@dataclass(frozen=True)
class StaircaseMin:
    v_star: float
    f_min: float       # min_v E(v)/(1+v), units of ln q
    q: int

    @property
    def F_nats(self):
        return self.f_min * math.log(self.q)

    @property
    def r1(self):
        """First-stage rate in bits per time unit."""
        return self.F_nats / math.log(2)

    def closed_form(self):
        q = self.q
        return (q - 1) ** 2 / (q * q + 1), 0.5 * math.log((q * q - q + 1) / q)


def staircase_minimize(q=2, tension=None, dtension=None, tol=1e-10) -> StaircaseMin:
    """min over v in (-1, 1] of E(v)/(1+v).

    Golden-section search to ``tol``; for the Haar tension (or when a derivative
    is supplied) the bracket is then polished by a root search on dF/dv, since
    golden section alone resolves v only to about sqrt(machine eps).
    """
    if q < 2:
        raise ValueError("q must be >= 2")
    if tension is None:
        tension = lambda v: line_tension_ruc(v, q)
        dtension = lambda v: _dline_tension_ruc(v, q)
    F = lambda v: tension(v) / (1 + v)
    lo = -1 + 1e-6
    v = golden_section(F, lo, 1.0, tol)
    if dtension is not None and v < 1 - 1e-6:
        dF = lambda x: dtension(x) * (1 + x) - tension(x)
        a, b = max(lo, v - 1e-4), min(1 - 1e-12, v + 1e-4)
        if dF(a) * dF(b) < 0:
            v = brentq(dF, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return StaircaseMin(float(v), float(F(v)), int(q))


def r_mag_analytic(a_z) -> float:
    if not 0 <= a_z <= 1:
        raise ValueError(f"a_z={a_z} outside [0, 1]")
    return math.log2(3 / (2 - math.cos(math.pi * a_z)))


@dataclass(frozen=True)
class AveragedChannel:
    matrix: np.ndarray
    a_z: float

    @property
    def eigenvalues(self):
        return float(self.matrix[0, 0]), float(self.matrix[1, 1])

    @property
    def lam_minus(self):
        return float(self.matrix[1, 1])

    @property
    def rate(self):
        return -math.log2(self.lam_minus)


def averaged_channel(a_z) -> AveragedChannel:
    """Doubled light-cone channel on span{|+>, |->} for (1, 1, a_z), q = 2."""
    w = xyz_weights(1.0, 1.0, a_z)
    q = 2
    m = np.array([[1.0, 0.0],
                  [w.b_plus / q + w.h, w.h / q + w.b_minus]])
    return AveragedChannel(m, float(a_z))


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RatePrediction:
    r1: float | None
    r2: float | None
    scenario: str
    notes: tuple = field(default_factory=tuple)
    formulas: tuple = field(default_factory=tuple)

    def to_dict(self):
        return {"r1": self.r1, "r2": self.r2, "scenario": self.scenario,
                "formulas_used": list(self.formulas), "notes": list(self.notes)}


def classify(r1, r2, tol=SCENARIO_TOL) -> str:
    d = r2 - r1
    if abs(d) <= tol:
        return "equal"
    return "phantom" if d > 0 else "magnon"


def predict_rates(family, geometry: str, boundary: str) -> RatePrediction:
    geometry, boundary = geometry.lower(), boundary.lower()
    pbc = boundary == "periodic"
    walls = 2 if pbc else 1
    if isinstance(family, Haar):
        q = family.q
        e0 = line_tension_ruc(0.0, q) * math.log2(q)
        if geometry == "brickwall":
            r = walls * e0
            return RatePrediction(r, r, "equal", (),
                                  ("r1 = r2 = E(0) log2 q" + (" x 2 walls" if pbc else ""),))
        st = staircase_minimize(q)
        r1, r2 = walls * st.r1, walls * e0
        notes = ("staircase + periodic is outside the closed-form coverage",) if pbc else ()
        return RatePrediction(r1, r2, classify(r1, r2), notes,
                              ("r1 = min_v E(v)/(1+v) (staircase)", "r2 = E(0)"))
    if isinstance(family, XYZAveraged):
        if not family.dual_unitary:
            return RatePrediction(None, None, "unknown",
                                  ("no closed form; use resummation",), ())
        rm = r_mag_analytic(family.az)
        if geometry == "brickwall":
            r1 = 2.0 if pbc else 1.0
            r2 = min(r1, rm)
            f = ("r1 = 1 (open) / 2 (periodic)", "r2 = min(r1, log2(3/(2 - cos pi a_z)))")
        else:
            r1 = 1.0 if pbc else 0.5
            r2 = min(r1, rm / 2)
            f = ("r1 = 1/2 (open) / 1 (periodic): domain wall on the light cone",
                 "r2 = min(r1, r_mag/2): magnon on the light cone")
        return RatePrediction(r1, r2, classify(r1, r2), (), f)
    raise TypeError(f"predict_rates needs Haar or XYZAveraged, got {type(family).__name__}")

"""Two-state effective magnet: pairing states, dual basis, local transfer matrices.

Each effective site carries one of two pairings of (U, U*, U, U*): ``plus``
(identity permutation) or ``minus`` (swap).  Configurations of L sites are
encoded as integers, site i <-> bit i-1, minus = 1.  Two-site quantities use
the basis order (++, +-, -+, --) with the left site as the major index.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

PLUS, MINUS = 0, 1
BASIS_LABELS = ("++", "+-", "-+", "--")
DU_TOL = 1e-12

# reversal permutation of the two-site basis: global + <-> - exchange
FLIP = np.array([[0, 0, 0, 1],
                 [0, 0, 1, 0],
                 [0, 1, 0, 0],
                 [1, 0, 0, 0]], dtype=float)


@dataclass(frozen=True)
class SpinConfig:
    """Configuration of L effective spins stored as a bit mask."""
    bits: int
    L: int

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("L must be positive")
        if not 0 <= self.bits < 2 ** self.L:
            raise ValueError(f"bits={self.bits} outside [0, 2^{self.L})")

    @classmethod
    def from_labels(cls, labels):
        """Build from a sequence of '+'/'-' (or 0/1) for sites 1..L."""
        bits = 0
        for i, s in enumerate(labels):
            if s in ("-", MINUS, "minus"):
                bits |= 1 << i
            elif s not in ("+", PLUS, "plus"):
                raise ValueError(f"bad spin label {s!r}")
        return cls(bits, len(labels))

    def labels(self) -> str:
        return "".join("-" if (self.bits >> i) & 1 else "+" for i in range(self.L))

    def spin(self, site: int) -> int:
        """Spin at 1-based ``site`` (PLUS or MINUS)."""
        return (self.bits >> (site - 1)) & 1

    @property
    def n_minus(self) -> int:
        return bin(self.bits).count("1")

    def is_domain_wall(self) -> bool:
        # plus block followed by minus block, i.e. bits = 1...10...0
        return dw_position(self.bits, self.L) is not None


def dw_config(x: int, L: int) -> int:
    """Domain wall |+...+ (sites 1..x) - ... -> as integer; x in 0..L."""
    if not 0 <= x <= L:
        raise ValueError(f"domain-wall position {x} outside 0..{L}")
    return ((1 << L) - 1) ^ ((1 << x) - 1)


def dw_position(bits: int, L: int):
    """Inverse of dw_config; None if ``bits`` is not a domain wall."""
    for x in range(L + 1):
        if dw_config(x, L) == bits:
            return x
    return None


def magnon_config(x: int, L: int) -> int:
    """Single minus at 1-based site x in a plus background."""
    if not 1 <= x <= L:
        raise ValueError(f"magnon site {x} outside 1..{L}")
    return 1 << (x - 1)


# ---------------------------------------------------------------------------
# gate families

@dataclass(frozen=True)
class Haar:
    q: int = 2

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 2:
            raise ValueError(f"Haar family needs integer q >= 2, got {self.q}")

    name = "haar"
    dual_unitary = False

    def params(self):
        return {"q": int(self.q)}


def _check_unit(**kw):
    for k, a in kw.items():
        if not (0.0 <= a <= 1.0) or not np.isfinite(a):
            raise ValueError(f"{k}={a} outside [0, 1]")


@dataclass(frozen=True)
class XYZAveraged:
    """Single-site Haar averaged XYZ gates; q fixed to 2."""
    ax: float = 1.0
    ay: float = 1.0
    az: float = 0.5

    def __post_init__(self):
        _check_unit(ax=self.ax, ay=self.ay, az=self.az)

    name = "xyz"
    q = 2

    @property
    def dual_unitary(self):
        return abs(self.ax - 1) < DU_TOL and abs(self.ay - 1) < DU_TOL

    def params(self):
        return {"ax": self.ax, "ay": self.ay, "az": self.az}


@dataclass(frozen=True)
class FixedFloquet:
    ax: float = 1.0
    ay: float = 1.0
    az: float = 0.5
    phi: float = 0.6

    def __post_init__(self):
        _check_unit(ax=self.ax, ay=self.ay, az=self.az)
        if not np.isfinite(self.phi):
            raise ValueError("phi must be finite")

    name = "floquet"
    q = 2

    @property
    def dual_unitary(self):
        return abs(self.ax - 1) < DU_TOL and abs(self.ay - 1) < DU_TOL

    def params(self):
        return {"ax": self.ax, "ay": self.ay, "az": self.az, "phi": self.phi}


def family_from_dict(d: dict):
    kind = d["family"]
    p = d.get("params", {})
    if kind == "haar":
        return Haar(**p)
    if kind == "xyz":
        return XYZAveraged(**p)
    if kind == "floquet":
        return FixedFloquet(**p)
    raise ValueError(f"unknown family {kind!r}")


# ---------------------------------------------------------------------------
# weights

@dataclass(frozen=True)
class TransferWeights:
    kind: str
    K: float | None = None
    h: float | None = None
    b_plus: float | None = None
    b_minus: float | None = None
    u: float | None = None
    v: float | None = None

    @property
    def per_branch(self) -> float:
        """Haar weight of one outgoing branch (|+-> -> |++> or |-->) = K/2."""
        if self.K is None:
            raise AttributeError("per_branch only defined for Haar weights")
        return self.K / 2

    def to_dict(self):
        return {k: getattr(self, k) for k in ("kind", "K", "h", "b_plus", "b_minus", "u", "v")
                if getattr(self, k) is not None}


def haar_weight(q) -> TransferWeights:
    """K = 2q/(q^2+1), the total decay factor of a local domain wall per gate."""
    if q < 2:
        raise ValueError(f"q must be >= 2, got {q}")
    return TransferWeights("haar", K=2 * q / (q * q + 1))


def haar_weight_exact(q: int) -> Fraction:
    return Fraction(2 * q, q * q + 1)


def xyz_weights(ax, ay, az) -> TransferWeights:
    _check_unit(ax=ax, ay=ay, az=az)
    c = np.cos(np.pi * np.array([ax, ay, az], dtype=float))
    u = float(c.sum())
    v = float(c[0] * c[1] + c[1] * c[2] + c[2] * c[0])
    return TransferWeights("xyz", h=(3 - v) / 9, b_plus=(3 + 6 * u + 5 * v) / 36,
                           b_minus=(3 - 6 * u + 5 * v) / 36, u=u, v=v)


@dataclass(frozen=True)
class LocalTransfer:
    """4x4 two-site update; column j is the image of basis state j."""
    m: np.ndarray = field(repr=False)
    family: object = None

    def __post_init__(self):
        m = np.array(self.m, dtype=float)
        if m.shape != (4, 4):
            raise ValueError("LocalTransfer must be 4x4")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    def image(self, label: str) -> np.ndarray:
        return self.m[:, BASIS_LABELS.index(label)].copy()

    def exchange_symmetric(self, tol=0.0) -> bool:
        return bool(np.max(np.abs(FLIP @ self.m @ FLIP - self.m)) <= tol)


def local_transfer(family) -> LocalTransfer:
    if isinstance(family, Haar):
        # each of the two branches carries q/(q^2+1) = K/2
        w = haar_weight(family.q).per_branch
        m = [[1, w, w, 0],
             [0, 0, 0, 0],
             [0, 0, 0, 0],
             [0, w, w, 1]]
    elif isinstance(family, XYZAveraged):
        wt = xyz_weights(family.ax, family.ay, family.az)
        h, bp, bm = wt.h, wt.b_plus, wt.b_minus
        m = [[1, h, h, 0],
             [0, bp, bm, 0],
             [0, bm, bp, 0],
             [0, h, h, 1]]
    else:
        raise TypeError(f"local_transfer needs Haar or XYZAveraged, got {type(family).__name__}")
    return LocalTransfer(np.array(m, dtype=float), family)


# ---------------------------------------------------------------------------
# Gram matrix and dual basis

def gram(q) -> np.ndarray:
    """<mu|nu> for mu, nu in (+, -)."""
    return np.array([[q * q, q], [q, q * q]], dtype=float)


@dataclass(frozen=True)
class DualBasisCoeffs:
    """|mu*> = sum_nu coeffs[mu, nu] |nu>."""
    q: int
    plus: tuple
    minus: tuple

    @property
    def matrix(self) -> np.ndarray:
        return np.array([self.plus, self.minus], dtype=float)

    def exact(self):
        q = self.q
        a = Fraction(1, q * q - 1)
        b = -Fraction(1, q * (q * q - 1))
        return [[a, b], [b, a]]


def dual_basis(q) -> DualBasisCoeffs:
    if q < 2:
        raise ValueError(f"q must be >= 2, got {q}")
    a = 1.0 / (q * q - 1)
    b = -1.0 / (q * (q * q - 1))
    return DualBasisCoeffs(int(q), (a, b), (b, a))

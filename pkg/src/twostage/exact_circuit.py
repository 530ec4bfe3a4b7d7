"""Exact small-L simulation of fixed Floquet circuits.

Operators on L qubits are 2^L x 2^L matrices in kron order (site 1 is the most
significant qubit).  A brickwall period is (even layer, odd layer) as in
``propagator``; a Heisenberg step conjugates a <- G^dag a G gate by gate.

The magnon overlap <s_B| U(t) x U(t) |-+...+> of configuration B (minus sites
= swap pairing on the output legs) with the site-1 magnon on the input legs is

    T(B) = Tr[(U x U) S_1 (U x U)^dag S_B] = 1/2 sum_P q^(2L-|B|) sum_{S subset B} w_P(S),

with w_P(S) the Pauli weight of U P_1 U^dag on support S (P = I, X, Y, Z).
T(B) / q^(2L) is the operator purity of in_1 + out_B of the state |U>.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math

import numpy as np
from scipy.linalg import expm
from scipy.stats import unitary_group

from .effective_magnet import dual_basis, FixedFloquet
from .propagator import SpaceTimeTable, build_schedule, fit_rate, RateEstimate

log = logging.getLogger(__name__)

MAX_EXACT_L = 12
I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"I": I2, "X": SX, "Y": SY, "Z": SZ}
PAULI_LIST = (I2, SX, SY, SZ)


def _is_unitary(u, tol=1e-10):
    u = np.asarray(u)
    return np.allclose(u @ u.conj().T, np.eye(u.shape[0]), atol=tol)


@dataclass(frozen=True)
class TwoQubitGate:
    U: np.ndarray = field(repr=False)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        U = np.array(self.U, dtype=complex)
        if U.shape != (4, 4):
            raise ValueError("two-qubit gate must be 4x4")
        U.setflags(write=False)
        object.__setattr__(self, "U", U)

    @property
    def dag(self):
        return self.U.conj().T

    def unitarity_residual(self):
        return float(np.max(np.abs(self.U @ self.dag - np.eye(4))))


def u_sym(ax, ay, az):
    H = ax * np.kron(SX, SX) + ay * np.kron(SY, SY) + az * np.kron(SZ, SZ)
    return expm(-1j * math.pi / 4 * H)


def floquet_single(phi):
    return expm(1j * (math.sin(phi) * SX + math.cos(phi) * SZ))


def build_gate(ax, ay, az, u1=None, u2=None, u3=None, u4=None) -> TwoQubitGate:
    """(u1 x u2) u_sym (u3 x u4); missing single-qubit factors are identities."""
    us = [I2 if u is None else np.asarray(u, dtype=complex) for u in (u1, u2, u3, u4)]
    for k, u in enumerate(us, 1):
        if u.shape != (2, 2) or not _is_unitary(u):
            raise ValueError(f"u{k} is not a 2x2 unitary")
    U = np.kron(us[0], us[1]) @ u_sym(ax, ay, az) @ np.kron(us[2], us[3])
    return TwoQubitGate(U, {"ax": ax, "ay": ay, "az": az})


def floquet_gate(ax=1.0, ay=1.0, az=0.5, phi=0.6) -> TwoQubitGate:
    u = floquet_single(phi)
    g = build_gate(ax, ay, az, None, None, u, u)
    return TwoQubitGate(g.U, {"ax": ax, "ay": ay, "az": az, "phi": phi})


def gate_for(family: FixedFloquet) -> TwoQubitGate:
    return floquet_gate(family.ax, family.ay, family.az, family.phi)


def reshuffle(U):
    """(out1, out2; in1, in2) -> (out2, in2; out1, in1)."""
    t = np.asarray(U).reshape(2, 2, 2, 2)
    return t.transpose(1, 3, 0, 2).reshape(4, 4)


def check_dual_unitarity(U, tol=1e-12):
    U = U.U if isinstance(U, TwoQubitGate) else np.asarray(U)
    R = reshuffle(U)
    res = float(np.max(np.abs(R @ R.conj().T - np.eye(4))))
    return res < tol, res


# ---------------------------------------------------------------------------
# operator evolution

def _conj_adjacent(A, L, G, i):
    """G^dag A G for G on sites (i, i+1), A a 2^L x 2^L matrix."""
    n = 2 ** L
    Gd = G.conj().T
    t = np.matmul(Gd, A.reshape(2 ** (i - 1), 4, -1))
    t = np.matmul(G.T, t.reshape(n * 2 ** (i - 1), 4, -1))
    return t.reshape(n, n)


def _conj_general(A, L, G, i, j):
    t = A.reshape((2,) * (2 * L))
    a, b = i - 1, j - 1
    t = np.moveaxis(t, (a, b), (0, 1))
    sh = t.shape
    t = (G.conj().T @ t.reshape(4, -1)).reshape(sh)
    t = np.moveaxis(t, (0, 1), (a, b))
    t = np.moveaxis(t, (L + a, L + b), (2 * L - 2, 2 * L - 1))
    sh = t.shape
    t = (t.reshape(-1, 4) @ G).reshape(sh)
    t = np.moveaxis(t, (2 * L - 2, 2 * L - 1), (L + a, L + b))
    n = 2 ** L
    return np.ascontiguousarray(t).reshape(n, n)


def _embed(L, G, i, j):
    """G acting on sites (i, j) as a 2^L matrix; site i is G's first qubit."""
    t = np.eye(2 ** L, dtype=complex).reshape((2,) * (2 * L))
    a, b = i - 1, j - 1
    t = np.moveaxis(t, (a, b), (0, 1))
    sh = t.shape
    t = (G @ t.reshape(4, -1)).reshape(sh)
    t = np.moveaxis(t, (0, 1), (a, b))
    return np.ascontiguousarray(t).reshape(2 ** L, 2 ** L)


def heisenberg_layer(A, L, G, gates):
    for i, j in gates:
        A = _conj_adjacent(A, L, G, i) if j == i + 1 else _conj_general(A, L, G, i, j)
    return A


def layer_unitary(L, G, gates):
    """Full 2^L matrix of one layer (small L only)."""
    U = np.eye(2 ** L, dtype=complex)
    for i, j in gates:
        if j == i + 1:
            g = np.kron(np.kron(np.eye(2 ** (i - 1)), G), np.eye(2 ** (L - i - 1)))
        else:
            g = _embed(L, G, i, j)
        U = g @ U
    return U


def site_operator(P, site, L):
    """P acting on 1-based ``site``."""
    P = PAULIS[P] if isinstance(P, str) else P
    return np.kron(np.kron(np.eye(2 ** (site - 1)), P), np.eye(2 ** (L - site)))


def _check_L(L, schedule):
    if L > MAX_EXACT_L:
        raise ValueError(f"exact evolution limited to L <= {MAX_EXACT_L}, got {L}")
    if schedule.geometry != "brickwall":
        raise ValueError("exact circuits use brickwall schedules")
    if schedule.L != L:
        raise ValueError("schedule L mismatch")


@dataclass
class EvolutionState:
    """Vectorized U(t) = L_t ... L_1 as a (normalized) state on 2L qubits."""
    U: np.ndarray
    L: int
    t: int

    @property
    def vec(self):
        # |U> = sum_{o,i} U_{oi} |o>|i> / 2^(L/2), out legs first
        return self.U.reshape(-1) / 2 ** (self.L / 2)

    def norm(self):
        return float(np.linalg.norm(self.vec))

    def operator_purity(self, out_sites=(), in_sites=()):
        """Tr rho_R^2 for R = out_sites (output legs) + in_sites (input legs)."""
        L = self.L
        keep = [s - 1 for s in out_sites] + [L + s - 1 for s in in_sites]
        rest = [k for k in range(2 * L) if k not in keep]
        psi = self.vec.reshape((2,) * (2 * L)).transpose(keep + rest)
        m = psi.reshape(2 ** len(keep), -1)
        rho = m @ m.conj().T
        return float(np.real(np.vdot(rho, rho)))


def evolve_operator_state(L, gate, schedule=None, T=None):
    """Yield EvolutionState for t = 0..T (T defaults to L)."""
    schedule = build_schedule("brickwall", "open", L) if schedule is None else schedule
    _check_L(L, schedule)
    G = gate.U if isinstance(gate, TwoQubitGate) else np.asarray(gate)
    T = L if T is None else T
    U = np.eye(2 ** L, dtype=complex)
    yield EvolutionState(U, L, 0)
    for k in range(T):
        U = layer_unitary(L, G, schedule.layer(k)) @ U
        yield EvolutionState(U, L, k + 1)


def operator_series(L, gate, ops, schedule=None, T=None, picture="heisenberg"):
    """Yield (t, evolved ops) for t = 0..T, one brickwall layer per step.

    heisenberg:   a -> G^dag a G, gate by gate, layer 0 (even) first.  This is
                  U(t)^dag a U(t) for the circuit whose last layer is even, i.e.
                  an operator measured next to the even layer.
    schrodinger:  a -> G a G^dag, layer 0 first: U(t) a U(t)^dag with
                  U(t) = L_t ... L_1, an operator inserted at the input.
    """
    schedule = build_schedule("brickwall", "open", L) if schedule is None else schedule
    _check_L(L, schedule)
    G = gate.U if isinstance(gate, TwoQubitGate) else np.asarray(gate)
    if picture == "schrodinger":
        G = G.conj().T
    elif picture != "heisenberg":
        raise ValueError("picture must be heisenberg or schrodinger")
    T = L if T is None else T
    ops = [np.array(a, dtype=complex) for a in ops]
    yield 0, ops
    for k in range(T):
        ops = [heisenberg_layer(a, L, G, schedule.layer(k)) for a in ops]
        yield k + 1, ops


def pauli_support_weights(A, L):
    """w(S): Pauli weight of A on support S, shape (2,)*L (axis k <-> site k+1).

    Normalized so that sum_S w(S) = Tr(A^dag A) / 2^L.  Only the split identity
    versus traceless matters per site, so each site's (out, in) 2x2 block is
    rotated to {(00+11), (00-11), 01, 10}.
    """
    t = np.asarray(A).reshape((2,) * (2 * L))
    perm = [x for k in range(L) for x in (k, L + k)]
    t = t.transpose(perm).reshape((4,) * L).copy()
    r = 1 / math.sqrt(2)
    for k in range(L):
        x = np.moveaxis(t, k, 0)
        s = (x[0] + x[3]) * r
        x[3] = (x[0] - x[3]) * r
        x[0] = s
    w = t.real ** 2 + t.imag ** 2
    del t
    for k in range(L):
        x = np.moveaxis(w, k, 0)
        w = np.moveaxis(np.stack([x[0], x[1] + x[2] + x[3]]), 0, k)
    return w / 2.0 ** L


def _subset_sums(w):
    """zeta transform: z(B) = sum_{S subset B} w(S)."""
    z = w
    for k in range(w.ndim):
        z = np.cumsum(z, axis=k)
    return z


def _to_config_vector(a):
    # axis k <-> site k+1  ->  integer index with site 1 as bit 0
    return np.ascontiguousarray(a.transpose(tuple(reversed(range(a.ndim))))).reshape(-1)


def configuration_overlaps(weights, L, q=2):
    """T(B) for all 2^L configurations from the Pauli weights of U^dag P_1 U (P = X, Y, Z)."""
    nminus = np.array([bin(b).count("1") for b in range(2 ** L)])
    tot = np.ones(2 ** L)      # identity term: w_I = delta_{S, empty}
    for w in weights:
        tot = tot + _to_config_vector(_subset_sums(w))
    return 0.5 * float(q) ** (2 * L - nminus) * tot


def _magnon_row(weights, L, q=2):
    """Z_mag(x) = sum_B d_x(B) T(B), contracted per site with the dual coefficients."""
    db = dual_basis(q).matrix
    # sum over B containing S factorizes per site: S_i = 0 allows s_i = +/- with
    # Gram factors q^2 / q, S_i = 1 forces s_i = - (factor q)
    fac = np.array([[q * q, 0.0], [q, q]])          # rows: s_i = +/-, cols: S_i = 0/1
    gp = db[0] @ fac
    gm = db[1] @ fac
    row = np.zeros(L)
    for x in range(L):
        vecs = [gm if k == x else gp for k in range(L)]
        tot = 0.0
        for w in list(weights) + [None]:
            if w is None:
                # identity Pauli: weight 1 on the empty support
                tot += np.prod([v[0] for v in vecs])
                continue
            t = w
            for k in range(L - 1, -1, -1):
                t = t @ vecs[k]
            tot += float(t)
        row[x] = 0.5 * tot
    return row


def magnon_overlap_table(gate, L, T=None, schedule=None) -> SpaceTimeTable:
    """Z_mag(x, t) for the fixed circuit, x = 1..L, t = 0..T (T defaults to L).

    Uses the Pauli-weight route: one pass per t over U P_1 U^dag for P = X, Y, Z
    yields all 2^L configuration overlaps at once.
    """
    schedule = build_schedule("brickwall", "open", L) if schedule is None else schedule
    T = L if T is None else T
    ops = [site_operator(P, 1, L) for P in ("X", "Y", "Z")]
    rows = []
    for t, As in operator_series(L, gate, ops, schedule, T, "schrodinger"):
        rows.append(_magnon_row([pauli_support_weights(A, L) for A in As], L))
        log.debug("magnon table t=%d", t)
    params = gate.params if isinstance(gate, TwoQubitGate) else {}
    meta = {"schedule": schedule.to_dict(), "family": "floquet", "params": params}
    return SpaceTimeTable(np.array(rows), np.arange(1, L + 1), np.arange(T + 1), "magnon", meta)


def magnon_from_overlaps(overlaps, L, q=2):
    """Dual-basis expansion sum_B d_x(B) T(B) done explicitly over all 2^L configurations."""
    db = dual_basis(q).matrix
    out = np.zeros(L)
    for x in range(1, L + 1):
        tot = 0.0
        for B in range(2 ** L):
            c = 1.0
            for k in range(1, L + 1):
                s = (B >> (k - 1)) & 1
                c *= db[1 if k == x else 0, s]
            tot += c * overlaps[B]
        out[x - 1] = tot
    return out


def overlaps_from_state(state: EvolutionState):
    """T(B) = q^(2L) * operator purity of in_1 + out_B, via reduced density matrices."""
    L = state.L
    out = np.zeros(2 ** L)
    for B in range(2 ** L):
        outs = [k for k in range(1, L + 1) if (B >> (k - 1)) & 1]
        out[B] = 4.0 ** L * state.operator_purity(outs, (1,))
    return out


# ---------------------------------------------------------------------------
# light-cone channel

@dataclass(frozen=True)
class PauliChannel:
    C: np.ndarray                 # 4x4 on (I, X, Y, Z); column a is the image of P_a
    side: str
    exact: bool                   # False when the gate is not dual-unitary

    @property
    def doubled(self):
        return np.kron(self.C, self.C)

    def eigenvalues(self):
        ev = np.linalg.eigvals(self.C)
        return ev[np.argsort(-np.abs(ev))]

    def doubled_eigenvalues(self):
        ev = np.linalg.eigvals(self.doubled)
        return ev[np.argsort(-np.abs(ev))]

    def magnon_eigenvalue(self):
        """Largest modulus eigenvalue of the doubled channel in the traceless x traceless sector."""
        ev = np.linalg.eigvals(np.kron(self.C[1:, 1:], self.C[1:, 1:]))
        return ev[np.argmax(np.abs(ev))]

    def r_mag_fixed(self):
        return float(-math.log2(abs(self.magnon_eigenvalue())))

    def report(self):
        lam = self.magnon_eigenvalue()
        return {"side": self.side, "exact": self.exact,
                "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues()],
                "doubled_eigenvalues": [[float(z.real), float(z.imag)] for z in self.doubled_eigenvalues()],
                "selected_lambda": [float(lam.real), float(lam.imag)],
                "r_mag_fixed": self.r_mag_fixed()}


def light_cone_channel(U, side="left") -> PauliChannel:
    """C_l(a) = 1/2 Tr_1[U^dag (a x I) U]; C_r(a) = 1/2 Tr_2[U^dag (I x a) U].

    C_l carries an operator entering on qubit 1 to qubit 2, C_r the reverse.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be left or right")
    G = U.U if isinstance(U, TwoQubitGate) else np.asarray(U)
    ok, _ = check_dual_unitarity(G)
    if not ok:
        log.warning("gate is not dual-unitary: channel is not exact off the light cone")
    C = np.zeros((4, 4))
    for a, Pa in enumerate(PAULI_LIST):
        op = np.kron(Pa, I2) if side == "left" else np.kron(I2, Pa)
        t = (G.conj().T @ op @ G).reshape(2, 2, 2, 2)
        red = (np.einsum("ijik->jk", t) if side == "left" else np.einsum("ijkj->ik", t)) / 2
        for b, Pb in enumerate(PAULI_LIST):
            C[b, a] = np.real(np.trace(Pb @ red)) / 2
    return PauliChannel(C, side, ok)


def twirled_doubled_channel(channel: PauliChannel):
    """Doubled channel averaged over independent single-site Haar rotations.

    The adjoint SO(3) action on traceless Paulis has E[R x R] = |s><s|/3 with
    s = sum_a e_a x e_a, so the traceless x traceless block collapses onto s.
    """
    c = channel.C[1:, 1:]
    s = np.eye(3).reshape(-1)
    P = np.outer(s, s) / 3
    return P @ np.kron(c, c) @ P


def two_point_correlator(a, b, x, t, U, leg="left") -> float:
    """2^-L Tr(a_0(t) b_x) in an infinite dual-unitary brickwall.

    ``leg`` is the leg of the first gate that carries a at t = 0: an operator on
    the left leg moves to x = +t with C_l, on the right leg to x = -t with C_r.
    """
    ia, ib = "IXYZ".index(a), "IXYZ".index(b)
    if t == 0:
        return 1.0 if (x == 0 and ia == ib) else 0.0
    target = t if leg == "left" else -t
    if x != target:
        return 0.0
    C = light_cone_channel(U, leg).C
    v = np.zeros(4)
    v[ia] = 1.0
    return float((np.linalg.matrix_power(C, t) @ v)[ib])


# ---------------------------------------------------------------------------
# reverse transition

@dataclass
class ReverseTransition:
    t: np.ndarray
    sampled: np.ndarray        # mean over the seeded product states
    exact_average: np.ndarray  # Haar average over product states, closed form
    fit: RateEstimate
    fit_exact: RateEstimate
    seed: int
    n_states: int
    window: tuple


def random_product_states(L, n, seed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        psi = np.ones(1, dtype=complex)
        for _ in range(L):
            psi = np.kron(psi, unitary_group.rvs(2, random_state=rng)[:, 0])
        out.append(psi)
    return np.array(out)


def reverse_transition_correlator(a_z, phi=0.6, L=10, T=None, n_states=32, seed=1234,
                                  window=None) -> ReverseTransition:
    """|C(t)|^2 = (|X_1(t)|^2 + |Y_1(t)|^2 + |Z_1(t)|^2)/3 over random product states."""
    if L > MAX_EXACT_L:
        raise ValueError(f"L <= {MAX_EXACT_L} required")
    T = L if T is None else T
    gate = floquet_gate(1.0, 1.0, a_z, phi)
    S = random_product_states(L, n_states, seed)
    ops = [site_operator(P, 1, L) for P in ("X", "Y", "Z")]
    # Haar average of <psi|A|psi>^2 over product states: sum_S w(S) 3^-|S|
    f = np.array([1.0, 1.0 / 3.0])
    samp, ex = [], []
    for _, As in operator_series(L, gate, ops, None, T, "heisenberg"):
        s = e = 0.0
        for A in As:
            vals = np.sum((S.conj() @ A) * S, axis=1).real
            s += np.mean(vals ** 2) / 3
            w = pauli_support_weights(A, L)
            for _ in range(L):
                w = w @ f
            e += float(w) / 3
        samp.append(s)
        ex.append(e)
    t = np.arange(T + 1)
    # t = L is the first layer at which the open boundary feeds back (even layer first)
    window = (2, min(T, L - 1)) if window is None else window
    samp, ex = np.array(samp), np.array(ex)
    return ReverseTransition(t, samp, ex, fit_rate(t, samp, window), fit_rate(t, ex, window),
                             seed, n_states, tuple(window))

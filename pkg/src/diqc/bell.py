"""Bell expressions and operators for the certification tests.

Three expressions appear:

* CHSH, evaluated on a correlator table with the sign pattern
  (-1)^(k j) on the joint terms; classical bound 2, quantum bound 2 sqrt 2.
* The symmetric inequality used to self-test cos(theta)|00> + sin(theta)|11>,
  normalized so its quantum maximum is one.
* The normalized tilted-CHSH expression, for comparison; also with quantum
  maximum one.

Every expression has two evaluation routes: on a table of measured
correlators and as a 4x4 Bell operator at given measurement angles. The two
routes agree, Tr(B(a, b) rho) = value(correlators_from_state(rho, a, b)),
which the test suite checks against random states.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .matrixcore import as_matrix, kron
from .quantum import (
    DomainError,
    IDENTITY_2,
    ROT_X_PI,
    SIGMA_X,
    SIGMA_Z,
    alice_observable,
    bob_ideal_angle,
    bob_observable,
)

THETA_LO = 0.05
THETA_HI = np.pi / 4


def _check_theta(theta: float) -> float:
    theta = float(theta)
    if not (THETA_LO - 1e-12 <= theta <= THETA_HI + 1e-12):
        raise DomainError(f"theta={theta!r} outside [{THETA_LO}, pi/4]")
    return theta


@dataclass(frozen=True)
class CorrelatorTable:
    """Expectation values of one Bell round.

    ``joint[k, j]`` is <A_k B_j>; ``marginal_a[k]`` is <A_k> and
    ``marginal_b[j]`` is <B_j>. All entries lie in [-1, 1].
    """

    joint: np.ndarray
    marginal_a: np.ndarray
    marginal_b: np.ndarray

    def __post_init__(self) -> None:
        joint = np.asarray(self.joint, dtype=float).reshape(2, 2).copy()
        ma = np.asarray(self.marginal_a, dtype=float).reshape(2).copy()
        mb = np.asarray(self.marginal_b, dtype=float).reshape(2).copy()
        for name, arr in (("joint", joint), ("marginal_a", ma), ("marginal_b", mb)):
            if np.max(np.abs(arr)) > 1.0 + 1e-9:
                raise ValueError(f"{name} has entries outside [-1, 1]")
        for arr in (joint, ma, mb):
            arr.setflags(write=False)
        object.__setattr__(self, "joint", joint)
        object.__setattr__(self, "marginal_a", ma)
        object.__setattr__(self, "marginal_b", mb)


@dataclass(frozen=True)
class BellKind:
    """Which Bell expression to use; 'new' and 'tilted' carry an angle."""

    family: str
    theta: float | None = None

    def __post_init__(self) -> None:
        if self.family not in ("chsh", "new", "tilted"):
            raise DomainError(f"unknown Bell family {self.family!r}")
        if self.family == "chsh":
            if self.theta is not None:
                raise DomainError("chsh takes no angle")
        else:
            if self.theta is None:
                raise DomainError(f"{self.family} requires an angle")
            object.__setattr__(self, "theta", _check_theta(self.theta))

    @classmethod
    def chsh(cls) -> "BellKind":
        return cls("chsh")

    @classmethod
    def new(cls, theta: float) -> "BellKind":
        return cls("new", theta)

    @classmethod
    def tilted(cls, theta: float) -> "BellKind":
        return cls("tilted", theta)


def correlators_from_state(rho: np.ndarray, a: float, b: float) -> CorrelatorTable:
    """Measure all eight expectation values of a two-qubit state."""
    rho = as_matrix(rho, "rho")
    if rho.shape != (4, 4):
        raise ValueError("rho must be a two-qubit (4x4) state")
    aa = [alice_observable(k, a) for k in (0, 1)]
    bb = [bob_observable(j, b) for j in (0, 1)]
    joint = np.empty((2, 2))
    for k, j in itertools.product(range(2), range(2)):
        joint[k, j] = np.trace(rho @ kron(aa[k], bb[j])).real
    ma = np.array([np.trace(rho @ kron(aa[k], IDENTITY_2)).real for k in (0, 1)])
    mb = np.array([np.trace(rho @ kron(IDENTITY_2, bb[j])).real for j in (0, 1)])
    return CorrelatorTable(joint, ma, mb)


def chsh_value(t: CorrelatorTable) -> float:
    """CHSH value <A0B0> + <A0B1> + <A1B0> - <A1B1>."""
    j = t.joint
    return float(j[0, 0] + j[0, 1] + j[1, 0] - j[1, 1])


def _new_coeffs(theta: float) -> tuple[float, float, float, float]:
    bt = bob_ideal_angle(theta, "new")
    return np.sin(bt), np.cos(bt), np.sin(2 * theta), np.cos(2 * theta)


def new_bell_value(t: CorrelatorTable, theta: float) -> float:
    """Symmetric Bell expression, quantum maximum one.

    (1/4) [ <A0(B0 - B1)>/sin(b_t) + sin(2 theta)/cos(b_t) <A1(B0 + B1)>
            + cos(2 theta) (<A0> + <B0 - B1>/(2 sin(b_t))) ]
    """
    theta = _check_theta(theta)
    sb, cb, s2, c2 = _new_coeffs(theta)
    j = t.joint
    return float(0.25 * ((j[0, 0] - j[0, 1]) / sb
                         + (s2 / cb) * (j[1, 0] + j[1, 1])
                         + c2 * (t.marginal_a[0]
                                 + (t.marginal_b[0] - t.marginal_b[1]) / (2 * sb))))


def tilted_alpha(theta: float) -> float:
    """Tilt parameter 2/sqrt(1 + 2 tan^2(2 theta)); zero at theta = pi/4."""
    theta = _check_theta(theta)
    if abs(theta - np.pi / 4) < 1e-12:
        return 0.0
    tan2 = np.tan(2 * theta)
    return float(2.0 / np.sqrt(1.0 + 2.0 * tan2 * tan2))


def tilted_bell_value(t: CorrelatorTable, theta: float) -> float:
    """Normalized tilted-CHSH value, quantum maximum one.

    In this package's observable convention (Bob's bisector along sigma_x)
    the marginal term pairs with A0 and the difference B0 - B1; the
    conventional form with B0 + B1 corresponds to parametrizing Bob's pair
    around sigma_z and never reaches its quantum maximum here.
    """
    theta = _check_theta(theta)
    alpha = tilted_alpha(theta)
    j = t.joint
    raw = (alpha * t.marginal_a[0]
           + (j[0, 0] - j[0, 1])
           + (j[1, 0] + j[1, 1]))
    return float(raw / np.sqrt(8.0 + 2.0 * alpha * alpha))


def bell_value(kind: BellKind, t: CorrelatorTable) -> float:
    """Evaluate any Bell expression on a correlator table."""
    if kind.family == "chsh":
        return chsh_value(t)
    if kind.family == "new":
        return new_bell_value(t, kind.theta)
    return tilted_bell_value(t, kind.theta)


def new_bell_operator(theta: float, a: float, b: float) -> np.ndarray:
    """4x4 operator of the symmetric expression at angles (a, b)."""
    theta = _check_theta(theta)
    sb, cb, s2, c2 = _new_coeffs(theta)
    a0, a1 = alice_observable(0, a), alice_observable(1, a)
    b0, b1 = bob_observable(0, b), bob_observable(1, b)
    op = (kron(a0, b0 - b1) / sb
          + (s2 / cb) * kron(a1, b0 + b1)
          + c2 * (kron(a0, IDENTITY_2) + kron(IDENTITY_2, b0 - b1) / (2 * sb)))
    return op / 4.0


def tilted_operator(theta: float, a: float, b: float) -> np.ndarray:
    """4x4 operator of the normalized tilted-CHSH expression at (a, b)."""
    theta = _check_theta(theta)
    alpha = tilted_alpha(theta)
    a0, a1 = alice_observable(0, a), alice_observable(1, a)
    b0, b1 = bob_observable(0, b), bob_observable(1, b)
    op = (alpha * kron(a0, IDENTITY_2)
          + kron(a0, b0 - b1)
          + kron(a1, b0 + b1))
    return op / np.sqrt(8.0 + 2.0 * alpha * alpha)


def bell_operator(kind: BellKind, a: float, b: float) -> np.ndarray:
    """4x4 Bell operator of any angle-carrying expression."""
    if kind.family == "new":
        return new_bell_operator(kind.theta, a, b)
    if kind.family == "tilted":
        return tilted_operator(kind.theta, a, b)
    raise DomainError("chsh has no single-parameter operator form here")


def local_bound_new(theta: float) -> float:
    """Closed-form local bound of the symmetric expression.

    (1/4) [ c2 + (2 + c2) sqrt((7 - c4)/(5 + c4)) ] with c2 = cos(2 theta),
    c4 = cos(4 theta); attained by the strategy A0 = A1 = B0 = 1, B1 = -1.
    """
    theta = _check_theta(theta)
    c2, c4 = np.cos(2 * theta), np.cos(4 * theta)
    return float(0.25 * (c2 + (2.0 + c2) * np.sqrt((7.0 - c4) / (5.0 + c4))))


def tilted_local_bound(theta: float) -> float:
    """Closed-form local bound (2 + alpha)/sqrt(8 + 2 alpha^2)."""
    alpha = tilted_alpha(theta)
    return float((2.0 + alpha) / np.sqrt(8.0 + 2.0 * alpha * alpha))


def local_bound(kind: BellKind) -> float:
    """Closed-form local bound for any expression."""
    if kind.family == "chsh":
        return 2.0
    if kind.family == "new":
        return local_bound_new(kind.theta)
    return tilted_local_bound(kind.theta)


def _deterministic_table(a0: int, a1: int, b0: int, b1: int) -> CorrelatorTable:
    # local deterministic behavior: joint terms factorize, marginals are the
    # assigned outcomes themselves
    joint = np.array([[a0 * b0, a0 * b1], [a1 * b0, a1 * b1]], dtype=float)
    return CorrelatorTable(joint, np.array([a0, a1], float), np.array([b0, b1], float))


def brute_force_local_strategy(kind: BellKind) -> tuple[tuple[int, int, int, int], float]:
    """Enumerate all 16 deterministic strategies; return the best and its value.

    Sufficient for the local bound because the expressions are affine over
    the local polytope, whose vertices are the deterministic strategies.
    """
    best_val = -np.inf
    best = (1, 1, 1, 1)
    for a0, a1, b0, b1 in itertools.product((1, -1), repeat=4):
        val = bell_value(kind, _deterministic_table(a0, a1, b0, b1))
        if val > best_val:
            best_val = val
            best = (a0, a1, b0, b1)
    return best, float(best_val)


def brute_force_local_bound(kind: BellKind) -> float:
    """Local bound by enumeration of deterministic strategies."""
    return brute_force_local_strategy(kind)[1]


def relabel_branch1(t: CorrelatorTable) -> CorrelatorTable:
    """Outcome relabeling that turns branch-1 data into the primed test.

    Bob exchanges the roles of his two settings and Alice flips the sign of
    her first observable's outcomes. (Resolved numerically: this is the
    relabeling whose value reproduces Tr(B'(a,b) rho) with
    B' = (R x R) B(pi/2 - a, b) (R x R)^dag; flipping A1 instead does not.)
    The map is an involution.
    """
    j = t.joint
    joint = np.array([[-j[0, 1], -j[0, 0]], [j[1, 1], j[1, 0]]])
    ma = np.array([-t.marginal_a[0], t.marginal_a[1]])
    mb = np.array([t.marginal_b[1], t.marginal_b[0]])
    return CorrelatorTable(joint, ma, mb)


def branch1_operator(theta: float, a: float, b: float) -> np.ndarray:
    """Bell operator of the relabeled branch-1 test.

    Built as (R x R) B(pi/2 - a, b) (R^dag x R^dag) with R the pi rotation
    around x, which realizes the branch relabeling at the operator level.
    """
    rr = kron(ROT_X_PI, ROT_X_PI)
    base = new_bell_operator(theta, np.pi / 2 - a, b)
    return rr @ base @ rr.conj().T


# ---------------------------------------------------------------------------
# vectorized operator stacks (numerical kernel used by the cutoff solver)

_ZZ = np.kron(SIGMA_Z, SIGMA_Z)
_XZ = np.kron(SIGMA_X, SIGMA_Z)
_ZX = np.kron(SIGMA_Z, SIGMA_X)
_XX = np.kron(SIGMA_X, SIGMA_X)
_ZI = np.kron(SIGMA_Z, IDENTITY_2)
_XI = np.kron(SIGMA_X, IDENTITY_2)
_IZ = np.kron(IDENTITY_2, SIGMA_Z)


def bell_operator_grid(kind: BellKind, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Stack of Bell operators over the meshgrid of angle arrays.

    Returns an array of shape (len(a), len(b), 4, 4). Decomposes the
    operator over fixed Pauli products with scalar coefficient grids; agrees
    with the single-point constructors to machine precision.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    # Alice observables A_0 = p sz + q sx, A_1 = q sz + p sx
    p = (np.cos(a) + np.sin(a)) / np.sqrt(2.0)
    q = (np.cos(a) - np.sin(a)) / np.sqrt(2.0)
    sb, cb = np.sin(b), np.cos(b)
    pa = p[:, None, None, None]
    qa = q[:, None, None, None]
    m_diff = pa * _ZZ + qa * _XZ      # A_0 (x) sz  under B0 - B1 = 2 sin(b) sz
    m_sum = qa * _ZX + pa * _XX       # A_1 (x) sx  under B0 + B1 = 2 cos(b) sx
    m_marg = pa * _ZI + qa * _XI      # A_0 (x) identity
    if kind.family == "new":
        sb_t, cb_t, s2, c2 = _new_coeffs(kind.theta)
        t_diff = (sb / (2.0 * sb_t))[None, :, None, None]
        t_sum = (cb * s2 / (2.0 * cb_t))[None, :, None, None]
        t_bmarg = (c2 * sb / (4.0 * sb_t))[None, :, None, None]
        return t_diff * m_diff + t_sum * m_sum + (c2 / 4.0) * m_marg + t_bmarg * _IZ
    if kind.family == "tilted":
        alpha = tilted_alpha(kind.theta)
        norm = np.sqrt(8.0 + 2.0 * alpha * alpha)
        t_diff = (2.0 * sb)[None, :, None, None]
        t_sum = (2.0 * cb)[None, :, None, None]
        return (t_diff * m_diff + t_sum * m_sum + alpha * m_marg) / norm
    raise DomainError("chsh has no single-parameter operator form here")

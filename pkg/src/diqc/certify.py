"""Certification core: self-testing cutoffs and the fidelity pipeline.

The central object is the linear overlap bound

    <extracted overlap>  >=  s * I + mu,      s + mu = 1,

valid whenever the operator

    (Lambda_a (x) Lambda_b)[|phi><phi|] - s B(a, b) - mu * identity

is positive semidefinite for every pair of measurement half-angles. The
cutoff I* is the violation at which the bound meets the trivial fidelity
(the largest Schmidt coefficient squared); the slope and intercept follow
from I* alone:

    s = (1 - cos^2 theta) / (1 - I*),    mu = (cos^2 theta - I*) / (1 - I*).

`find_cutoff` locates the smallest I* for which the operator stays PSD on a
dense angle grid with local refinement, by bisection. Feasibility is
monotone in I*: raising I* adds a multiple of (identity - B), which is PSD
because the Bell operators never exceed one. The solver still spot-checks
that monotonicity at the bracket, as a guard against implementation bugs.

The certificate is numerical: it reports the grid, the worst margin found
and the worst angle pair, so callers can re-verify at higher resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import bell, quantum
from .bell import BellKind
from .quantum import DomainError

BETA_STAR = 2.0 * (8.0 + 7.0 * math.sqrt(2.0)) / 17.0
CHSH_QUANTUM_BOUND = 2.0 * math.sqrt(2.0)
TRIVIAL_INPUT_FIDELITY = 1.0 / math.sqrt(2.0)

DEFAULT_GRID = (201, 201)
DEFAULT_TOL = 1e-9
DEFAULT_REFINE_LEVELS = 2
BRACKET_WIDTH = 1e-4
_REFINE_POINTS = 17


class NonQuantumValueError(ValueError):
    """An observed violation exceeds the quantum bound beyond tolerance."""


class ChannelFamilyError(RuntimeError):
    """No cutoff below one exists for this extraction-channel family."""


class SymmetryViolationError(RuntimeError):
    """Branch-1 verification failed far beyond tolerance (implementation bug)."""


# ---------------------------------------------------------------------------
# fidelity bounds


def input_fidelity_bound(beta: float, floor: bool = True) -> float:
    """Fidelity of the source state with phi+ certified by a CHSH value.

    sqrt(1/2 + (beta - beta*) / (2 (2 sqrt 2 - beta*))) with
    beta* = 2 (8 + 7 sqrt 2)/17 ~ 2.106. With ``floor`` the result is
    clamped below by 1/sqrt(2), the fidelity achievable with no violation
    at all; without it the raw value (down to 0) is returned.
    """
    beta = float(beta)
    if beta > CHSH_QUANTUM_BOUND + 1e-6:
        raise NonQuantumValueError(f"beta={beta!r} exceeds 2*sqrt(2)")
    if beta < -4.0 - 1e-9:
        raise DomainError(f"beta={beta!r} below -4")
    beta = min(beta, CHSH_QUANTUM_BOUND)
    inner = 0.5 + 0.5 * (beta - BETA_STAR) / (CHSH_QUANTUM_BOUND - BETA_STAR)
    value = math.sqrt(max(inner, 0.0))
    if floor:
        value = max(value, TRIVIAL_INPUT_FIDELITY)
    return min(value, 1.0)


def output_fidelity_bound(i: float, theta: float, i_star: float,
                          floor: bool = True) -> float:
    """Fidelity of one post-measurement branch certified by its violation.

    sqrt(cos^2 theta + (1 - cos^2 theta)(i - i*)/(1 - i*)). With ``floor``
    the result is clamped below by cos(theta), the largest Schmidt
    coefficient of the branch target.
    """
    i = float(i)
    if i > 1.0 + 1e-6:
        raise NonQuantumValueError(f"violation {i!r} exceeds the quantum bound 1")
    if not 0.0 < i_star < 1.0:
        raise DomainError(f"i_star={i_star!r} outside (0, 1)")
    i = min(i, 1.0)
    c2 = math.cos(theta) ** 2
    inner = c2 + (1.0 - c2) * (i - i_star) / (1.0 - i_star)
    value = math.sqrt(max(inner, 0.0))
    if floor:
        value = max(value, math.cos(theta))
    return min(value, 1.0)


def combine_branches(p0: float, f0: float, f1: float) -> float:
    """Combine branch fidelities into one register-state fidelity.

    sqrt(p0/2) f0 + sqrt((1 - p0)/2) f1; the reference assigns each outcome
    probability one half, hence the halved weights.
    """
    p0 = float(p0)
    if not -1e-12 <= p0 <= 1.0 + 1e-12:
        raise DomainError(f"p0={p0!r} outside [0, 1]")
    for name, f in (("f0", f0), ("f1", f1)):
        if not -1e-12 <= f <= 1.0 + 1e-9:
            raise DomainError(f"{name}={f!r} outside [0, 1]")
    p0 = min(max(p0, 0.0), 1.0)
    return math.sqrt(p0 / 2.0) * f0 + math.sqrt((1.0 - p0) / 2.0) * f1


def instrument_fidelity_bound(f_in: float, f_out: float) -> float:
    """Compose input and output state fidelities into an instrument bound.

    cos(arccos f_in + arccos f_out), clamped to zero once the angle sum
    passes pi/2; fidelities compose this way because they cannot decrease
    under trace-preserving maps and obey the arccos triangle inequality.
    """
    for name, f in (("f_in", f_in), ("f_out", f_out)):
        if not -1e-9 <= f <= 1.0 + 1e-9:
            raise DomainError(f"{name}={f!r} outside [0, 1]")
    angle = math.acos(min(max(f_in, 0.0), 1.0)) + math.acos(min(max(f_out, 0.0), 1.0))
    if angle >= math.pi / 2:
        return 0.0
    return math.cos(angle)


def slope_and_intercept(theta: float, i_star: float) -> tuple[float, float]:
    """Line through (I*, cos^2 theta) and (1, 1) in the (violation, overlap) plane."""
    c2 = math.cos(theta) ** 2
    s = (1.0 - c2) / (1.0 - i_star)
    mu = (c2 - i_star) / (1.0 - i_star)
    return s, mu


# ---------------------------------------------------------------------------
# operator-inequality verification


@dataclass(frozen=True)
class LinearBoundCertificate:
    """Accepted linear overlap bound for one inequality and angle.

    Records the full verification metadata: grid resolution, refinement
    depth, tolerance, the worst margin encountered and where, and which
    reparametrization of Bob's extraction channel was in force.
    """

    theta: float
    family: str
    i_star: float
    slope: float
    intercept: float
    grid_a: int
    grid_b: int
    refine_levels: int
    tol: float
    worst_margin: float
    worst_a: float
    worst_b: float
    delta_variant: str

    @property
    def kind(self) -> BellKind:
        return BellKind(self.family, self.theta)


def _kind(theta: float, family: str) -> BellKind:
    if family not in ("new", "tilted"):
        raise DomainError(f"cutoffs exist only for 'new' and 'tilted', got {family!r}")
    return BellKind(family, theta)


class _MarginEvaluator:
    """Margins of the operator inequality over angle grids, vectorized.

    Precomputes everything that does not depend on I*: the channel-twirled
    projector stack and the Bell operator stack. A feasibility probe at a
    new I* then costs one batched 4x4 eigensolve.
    """

    def __init__(self, theta: float, family: str, branch: int = 0,
                 warp_variant: str = quantum.WARP_AUTO):
        self.theta = float(theta)
        self.kind = _kind(theta, family)
        self.branch = int(branch)
        self.warp = quantum.bob_warp(theta, family, warp_variant)
        self.b_ideal = self.warp.b_ideal
        self.c2 = math.cos(theta) ** 2
        state = quantum.partial_entangled_state(theta, branch, theta_min=0.0)
        self._proj = quantum.projector(state)
        gam = (quantum.H_OBS, quantum.V_OBS)
        ome = (quantum.SIGMA_X, quantum.SIGMA_Z)
        e2 = quantum.IDENTITY_2
        self._conj_a = np.array(
            [np.kron(g, e2) @ self._proj @ np.kron(g, e2) for g in gam])
        self._conj_b = np.array(
            [np.kron(e2, o) @ self._proj @ np.kron(e2, o) for o in ome])
        self._conj_ab = np.array(
            [[np.kron(g, o) @ self._proj @ np.kron(g, o) for o in ome] for g in gam])
        self._rr = np.kron(quantum.ROT_X_PI, quantum.ROT_X_PI)

    def stacks(self, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Channel-twirled projector stack and Bell stack on the meshgrid."""
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        wa = np.atleast_1d(quantum.alice_dephasing_weight(a))
        wb = np.atleast_1d((1.0 + quantum.dephasing_profile(self.warp(b))) / 2.0)
        sel_a = (a > np.pi / 4).astype(int)
        sel_b = (b > self.b_ideal).astype(int)
        ca = self._conj_a[sel_a]
        cb = self._conj_b[sel_b]
        cab = self._conj_ab[sel_a[:, None], sel_b[None, :]]
        wa4 = wa[:, None, None, None]
        wb4 = wb[None, :, None, None]
        twirled = (wa4 * wb4 * self._proj
                   + wa4 * (1.0 - wb4) * cb[None, :]
                   + (1.0 - wa4) * wb4 * ca[:, None]
                   + (1.0 - wa4) * (1.0 - wb4) * cab)
        if self.branch == 0:
            bops = bell.bell_operator_grid(self.kind, a, b)
        else:
            # primed test: rotate the operator stack taken at pi/2 - a
            base = bell.bell_operator_grid(self.kind, np.pi / 2 - a, b)
            bops = np.einsum("ij,abjk,lk->abil", self._rr, base, self._rr.conj())
        return twirled, bops

    def margins(self, i_star: float, a: np.ndarray, b: np.ndarray,
                stacks: tuple[np.ndarray, np.ndarray] | None = None) -> np.ndarray:
        s, mu = slope_and_intercept(self.theta, i_star)
        twirled, bops = stacks if stacks is not None else self.stacks(a, b)
        m = twirled - s * bops - mu * np.eye(4)
        return np.linalg.eigvalsh(m)[..., 0]


def operator_margin(theta: float, kind: str | BellKind, i_star: float,
                    a: float, b: float, warp_variant: str = quantum.WARP_AUTO) -> float:
    """Smallest eigenvalue of the bound operator at one angle pair.

    Nonnegative margins at every (a, b) make the linear overlap bound with
    cutoff ``i_star`` valid.
    """
    family = kind.family if isinstance(kind, BellKind) else kind
    ev = _MarginEvaluator(theta, family, warp_variant=warp_variant)
    return float(ev.margins(i_star, np.array([a]), np.array([b]))[0, 0])


def _scan(ev: _MarginEvaluator, i_star: float, n_a: int, n_b: int,
          refine_levels: int,
          coarse: tuple[np.ndarray, np.ndarray] | None = None) -> tuple[float, float, float]:
    """Worst margin over the full grid plus local refinement passes.

    Refines around the running worst cell and around the ideal point, one
    coarse cell wide, shrinking eightfold per level. ``coarse`` carries
    precomputed full-grid stacks so bisection probes skip rebuilding them.
    """
    a = np.linspace(0.0, np.pi / 2, n_a)
    b = np.linspace(0.0, np.pi / 2, n_b)
    m = ev.margins(i_star, a, b, stacks=coarse)
    idx = np.unravel_index(np.argmin(m), m.shape)
    worst = float(m[idx])
    worst_at = (float(a[idx[0]]), float(b[idx[1]]))
    h_a = (np.pi / 2) / (n_a - 1)
    h_b = (np.pi / 2) / (n_b - 1)
    centers = [worst_at, (np.pi / 4, ev.b_ideal)]
    for _ in range(refine_levels):
        next_centers = []
        for ca, cb in centers:
            fa = np.clip(np.linspace(ca - h_a, ca + h_a, _REFINE_POINTS), 0.0, np.pi / 2)
            fb = np.clip(np.linspace(cb - h_b, cb + h_b, _REFINE_POINTS), 0.0, np.pi / 2)
            fm = ev.margins(i_star, fa, fb)
            fidx = np.unravel_index(np.argmin(fm), fm.shape)
            if float(fm[fidx]) < worst:
                worst = float(fm[fidx])
                worst_at = (float(fa[fidx[0]]), float(fb[fidx[1]]))
            next_centers.append((float(fa[fidx[0]]), float(fb[fidx[1]])))
        centers = next_centers
        h_a /= _REFINE_POINTS / 2.0
        h_b /= _REFINE_POINTS / 2.0
    return worst, worst_at[0], worst_at[1]


def find_cutoff(theta: float, kind: str | BellKind = "new",
                grid: tuple[int, int] = DEFAULT_GRID, tol: float = DEFAULT_TOL,
                refine_levels: int = DEFAULT_REFINE_LEVELS,
                warp_variant: str = quantum.WARP_AUTO) -> LinearBoundCertificate:
    """Smallest cutoff I* whose operator inequality verifies on the grid.

    Bisects I* to width 1e-4 between the local bound and one, probing PSD
    feasibility on an ``n_a x n_b`` grid (at least 101 per axis) with
    ``refine_levels`` local refinement passes. Raises ChannelFamilyError if
    even I* ~ 1 is infeasible, which indicates a broken channel family.
    """
    family = kind.family if isinstance(kind, BellKind) else kind
    bk = _kind(theta, family)
    n_a, n_b = grid
    if n_a < 101 or n_b < 101:
        raise ValueError(f"grid {grid} too coarse: need at least 101 points per axis")
    ev = _MarginEvaluator(theta, family, warp_variant=warp_variant)
    lo = bell.local_bound(bk) + 1e-6
    hi = 1.0 - 1e-6
    coarse = ev.stacks(np.linspace(0.0, np.pi / 2, n_a), np.linspace(0.0, np.pi / 2, n_b))

    def probe(i: float) -> tuple[bool, float, float, float]:
        worst, wa, wb = _scan(ev, i, n_a, n_b, refine_levels, coarse=coarse)
        return worst >= -tol, worst, wa, wb

    probe_hi = probe(hi)
    if not probe_hi[0]:
        _, m_hi, wa_hi, wb_hi = probe_hi
        raise ChannelFamilyError(
            f"infeasible even at i_star={hi}: margin {m_hi:.3e} at "
            f"(a={wa_hi:.6f}, b={wb_hi:.6f}); the extraction-channel family "
            f"cannot certify theta={theta}")
    probe_lo = probe(lo)
    mid0 = 0.5 * (lo + hi)
    probe_mid = probe(mid0)
    # monotonicity spot-check: feasibility may only switch from False to True
    flags = [probe_lo[0], probe_mid[0], probe_hi[0]]
    if sorted(flags) != flags:
        raise RuntimeError(f"feasibility not monotone across bracket: {flags}")
    if probe_lo[0]:
        hi, accepted = lo, probe_lo
    else:
        # invariant: lo infeasible, hi feasible, accepted = probe at hi
        if probe_mid[0]:
            hi, accepted = mid0, probe_mid
        else:
            lo, accepted = mid0, probe_hi
        while hi - lo > BRACKET_WIDTH:
            mid = 0.5 * (lo + hi)
            result = probe(mid)
            if result[0]:
                hi, accepted = mid, result
            else:
                lo = mid
    _, worst, wa, wb = accepted
    s, mu = slope_and_intercept(theta, hi)
    return LinearBoundCertificate(
        theta=float(theta), family=family, i_star=float(hi), slope=s, intercept=mu,
        grid_a=n_a, grid_b=n_b, refine_levels=refine_levels, tol=tol,
        worst_margin=worst, worst_a=wa, worst_b=wb,
        delta_variant=ev.warp.variant)


def verify_branch1(cert: LinearBoundCertificate,
                   grid: tuple[int, int] | None = None) -> float:
    """Re-verify an accepted certificate against the second branch state.

    Scans the operator inequality built from the branch-1 target and the
    rotated Bell operator over the full grid; by the change-of-variables
    symmetry its margins equal the branch-0 margins at mirrored Alice
    angles, so an accepted certificate must pass. Returns the worst margin;
    raises SymmetryViolationError if it is worse than ten times the
    certificate tolerance (an implementation-bug indicator, not a physical
    failure mode).
    """
    n_a, n_b = grid if grid is not None else (cert.grid_a, cert.grid_b)
    ev = _MarginEvaluator(cert.theta, cert.family, branch=1,
                          warp_variant=cert.delta_variant)
    worst, _, _ = _scan(ev, cert.i_star, n_a, n_b, cert.refine_levels)
    if worst < -10.0 * cert.tol:
        raise SymmetryViolationError(
            f"branch-1 margin {worst:.3e} violates the mirror symmetry")
    return worst


# ---------------------------------------------------------------------------
# pipeline


@dataclass(frozen=True)
class FidelityCertificate:
    """Composed instrument-fidelity lower bound and its ingredients."""

    beta: float
    i0: float
    i1: float
    p0: float
    f_in: float
    f_out0: float
    f_out1: float
    f_out: float
    bound: float


def certify_instrument(beta: float, i0: float, i1: float, p0: float,
                       theta: float, cert: LinearBoundCertificate) -> FidelityCertificate:
    """Full certification pipeline from observed statistics.

    The input fidelity comes from the CHSH value, each branch fidelity from
    its violation through the certificate's cutoff (one cutoff serves both
    branches by the mirror symmetry), the branches combine with square-root
    probability weights, and input and output compose through the arccos
    triangle inequality.
    """
    if abs(cert.theta - theta) > 1e-9:
        raise DomainError(
            f"certificate is for theta={cert.theta}, asked to certify theta={theta}")
    f_in = input_fidelity_bound(beta)
    f0 = output_fidelity_bound(i0, theta, cert.i_star)
    f1 = output_fidelity_bound(i1, theta, cert.i_star)
    f_out = combine_branches(p0, f0, f1)
    bound = instrument_fidelity_bound(f_in, min(f_out, 1.0))
    return FidelityCertificate(beta=float(beta), i0=float(i0), i1=float(i1),
                               p0=float(p0), f_in=f_in, f_out0=f0, f_out1=f1,
                               f_out=f_out, bound=bound)


def raw_pipeline_bound(beta: float, i: float, theta: float,
                       cert: LinearBoundCertificate, p0: float = 0.5) -> FidelityCertificate:
    """Pipeline without the trivial-fidelity floors, for surface sweeps.

    Both branches are assumed to reach the same violation. Dropping the
    floors lets the surface reach the zero clamp in the low-violation
    corner instead of saturating at the floor composition.
    """
    f_in = input_fidelity_bound(beta, floor=False)
    f0 = output_fidelity_bound(i, theta, cert.i_star, floor=False)
    f1 = output_fidelity_bound(i, theta, cert.i_star, floor=False)
    f_out = combine_branches(p0, f0, f1)
    bound = instrument_fidelity_bound(f_in, min(f_out, 1.0))
    return FidelityCertificate(beta=float(beta), i0=float(i), i1=float(i),
                               p0=float(p0), f_in=f_in, f_out0=f0, f_out1=f1,
                               f_out=f_out, bound=bound)

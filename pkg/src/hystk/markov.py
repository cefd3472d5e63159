"""Impulsive forward Kolmogorov equations along semi-flows.

The transition matrix pi(s, t) of a finite-state chain with intensities
phi_a(t, x) and jump kernel g_ab(t, x) solves d(pi)/dt = pi Q(t, x(t)) with
Q = diag(phi) (g - I) along the flow trajectory x(t) = u(s, t; xi).  Where
the trajectory crosses an impulse surface, pi jumps right-continuously to
pi . p(t, x).

Two independent constructions of the fundamental matrix of the transposed
system d(psi)/dt = A(t) psi with jumps psi(tau+) = B(tau) psi(tau-):

* a product of smooth-piece propagators (RK4 with step-doubling) chained
  with the impulse matrices, and
* a kernel-convolution series: Peano-Baker convolutions of A evaluated by
  Gauss-Legendre quadrature on each smooth piece, summed over all
  increasing paths through the impulse set with jump-increment factors
  B(tau) - I between smooth gaps.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import _kernels
from .geometry import BoundaryFacet, facet_contains

log = logging.getLogger(__name__)

EPS_PROB = 1e-8
NEG_CLIP = 1e-10
RK4_REFINE_TOL = 1e-9
RK4_MAX_STEPS = 1 << 18
GL_NODES = 32
SERIES_MAX_TERMS = 50
MAX_CROSSINGS = 10 ** 4
MAX_SERIES_IMPULSES = 14
BISECT_TOL = 1e-10


class MarkovError(Exception):
    pass


class FieldValidationError(MarkovError):
    pass


class NonStochasticResultError(MarkovError):
    pass


class TangentialGrazingError(MarkovError):
    pass


class TooManyCrossingsError(MarkovError):
    pass


class SeriesConvergenceError(MarkovError):
    def __init__(self, last_norm, terms):
        self.last_norm = last_norm
        self.terms = terms
        super().__init__(
            f"kernel series not converged after {terms} terms (last term norm {last_norm:.3e})")


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic matrix of transition probabilities."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise MarkovError(f"transition matrix must be square, got {e.shape}")
        if np.any(e < -EPS_PROB):
            raise NonStochasticResultError(f"negative entry {e.min():.3e}")
        dev = np.abs(e.sum(axis=1) - 1.0).max()
        if dev > EPS_PROB:
            raise NonStochasticResultError(f"row sum deviates from 1 by {dev:.3e}")
        object.__setattr__(self, "entries", e)

    @property
    def n_states(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class ImpulseSurface:
    """One sheet of the impulse set: a time instant or a spatial facet.

    ``p`` maps (t, x) to the jump's row-stochastic matrix.
    """

    p: Callable[[float, np.ndarray], np.ndarray]
    at_time: Optional[float] = None
    facet: Optional[BoundaryFacet] = None

    def __post_init__(self):
        if (self.at_time is None) == (self.facet is None):
            raise MarkovError("impulse surface needs exactly one of at_time/facet")


@dataclass(frozen=True)
class MarkovField:
    """Intensities, jump kernel and impulse set of one stochastic relay."""

    intensities: Callable[[float, np.ndarray], np.ndarray]
    jump_kernel: Callable[[float, np.ndarray], np.ndarray]
    impulse_set: Tuple[ImpulseSurface, ...]
    state_count: int

    def __post_init__(self):
        object.__setattr__(self, "impulse_set", tuple(self.impulse_set))

    def generator(self, t: float, x: np.ndarray) -> np.ndarray:
        """Q(t, x) = diag(phi) (g - I); rows sum to zero."""
        phi = np.asarray(self.intensities(t, x), dtype=float)
        g = np.asarray(self.jump_kernel(t, x), dtype=float)
        n = self.state_count
        if phi.shape != (n,):
            raise FieldValidationError(f"intensities returned shape {phi.shape}, want ({n},)")
        if np.any(phi < -1e-12):
            raise FieldValidationError(f"negative intensity {phi.min():.3e} at t={t}")
        if g.shape != (n, n):
            raise FieldValidationError(f"jump kernel returned shape {g.shape}")
        if np.abs(np.diag(g)).max(initial=0.0) > 1e-12:
            raise FieldValidationError(f"jump kernel diagonal not zero at t={t}")
        if np.any(g < -1e-12):
            raise FieldValidationError(f"negative jump probability at t={t}")
        rowdev = np.abs(g.sum(axis=1) - 1.0)
        active = phi > 0
        if np.any(rowdev[active] > 1e-9):
            raise FieldValidationError(
                f"jump kernel rows sum off 1 by {rowdev[active].max():.3e} at t={t}")
        return phi[:, None] * (g - np.eye(n))

    def impulse_matrix(self, surface: ImpulseSurface, t: float, x: np.ndarray) -> np.ndarray:
        p = np.asarray(surface.p(t, x), dtype=float)
        n = self.state_count
        if p.shape != (n, n):
            raise FieldValidationError(f"impulse matrix has shape {p.shape}")
        if np.any(p < -1e-12):
            raise FieldValidationError(f"negative impulse probability at t={t}")
        if np.abs(p.sum(axis=1) - 1.0).max() > 1e-9:
            raise FieldValidationError(f"impulse matrix rows sum off 1 at t={t}")
        return p


@dataclass(frozen=True)
class SemiFlow:
    """Two-parameter evolution map u(s, t; xi) with u(s,s;xi) = xi."""

    evaluator: Callable[[float, float, np.ndarray], np.ndarray]

    def __call__(self, s: float, t: float, xi) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.evaluator(s, t, np.atleast_1d(
            np.asarray(xi, dtype=float))), dtype=float))

    @staticmethod
    def from_map(fn) -> "SemiFlow":
        return SemiFlow(fn)

    @staticmethod
    def from_velocity(velocity, step: float = 1e-3) -> "SemiFlow":
        """Flow of dx/dt = velocity(t, x), integrated by fixed-step RK4."""

        def evaluate(s, t, xi):
            x = np.array(xi, dtype=float)
            if t == s:
                return x
            n = max(1, int(math.ceil(abs(t - s) / step)))
            h = (t - s) / n
            tt = s
            for _ in range(n):
                k1 = np.asarray(velocity(tt, x))
                k2 = np.asarray(velocity(tt + 0.5 * h, x + 0.5 * h * k1))
                k3 = np.asarray(velocity(tt + 0.5 * h, x + 0.5 * h * k2))
                k4 = np.asarray(velocity(tt + h, x + h * k3))
                x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
                tt += h
            return x

        return SemiFlow(evaluate)

    def check_axioms(self, rng: np.random.Generator, lo, hi, horizon: Tuple[float, float],
                     n_triples: int = 100, tol: float = 1e-6) -> float:
        """Largest identity/composition defect over random (r, s, t, xi)."""
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        worst = 0.0
        for _ in range(n_triples):
            xi = rng.uniform(lo, hi)
            r, s, t = np.sort(rng.uniform(horizon[0], horizon[1], size=3))
            worst = max(worst, float(np.abs(self(s, s, xi) - xi).max()))
            left = self(s, t, self(r, s, xi))
            right = self(r, t, xi)
            worst = max(worst, float(np.abs(left - right).max()))
        if worst > tol:
            raise MarkovError(f"semi-flow axioms violated: defect {worst:.3e} > {tol:g}")
        return worst


@dataclass(frozen=True)
class ImpulsiveSystem:
    """d(psi)/dt = A(t) psi with jumps psi(tau+) = B(tau) psi(tau-), psi(s) = I.

    psi is the transpose of the transition matrix pi, so A = Q^T.
    """

    generator: Callable[[float], np.ndarray]
    impulses: Tuple[Tuple[float, np.ndarray], ...]
    horizon: Tuple[float, float]

    def __post_init__(self):
        s, T = self.horizon
        imps = tuple((float(tau), np.asarray(B, dtype=float)) for tau, B in self.impulses)
        taus = [tau for tau, _ in imps]
        if any(not s < tau < T for tau in taus):
            raise MarkovError(f"impulse times must lie strictly inside {self.horizon}")
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise MarkovError("impulse times must be strictly increasing")
        object.__setattr__(self, "impulses", imps)
        object.__setattr__(self, "horizon", (float(s), float(T)))


# ---------------------------------------------------------------------------
# smooth-piece integration


def _rk4_refined(mat_fn, a: float, b: float, y0: np.ndarray) -> np.ndarray:
    """Integrate Y' = M(t) Y from a to b; steps are doubled until halving
    changes the result by less than RK4_REFINE_TOL in max norm."""
    if b <= a:
        return np.array(y0, dtype=float)
    n = max(8, int(math.ceil((b - a) / 0.05)))
    prev = None
    while True:
        h = (b - a) / n
        ts = a + 0.5 * h * np.arange(2 * n + 1)
        mats = np.stack([mat_fn(float(t)) for t in ts])
        y = _kernels.rk4_matrix_chain(mats, h, y0)
        if prev is not None and np.abs(y - prev).max() < RK4_REFINE_TOL:
            return y
        if 2 * n > RK4_MAX_STEPS:
            log.warning("RK4 refinement hit the step cap at %d steps", n)
            return y
        prev = y
        n *= 2


# ---------------------------------------------------------------------------
# impulse crossing detection

DETECT_GRID = 4096


def detect_impulse_times(field: MarkovField, flow: SemiFlow, s: float, T: float,
                         xi) -> List[float]:
    """Crossing times of the flow trajectory with the impulse set on (s, T].

    Spatial facets are located by sign-change bracketing on a uniform grid
    followed by bisection to 1e-10; near-touches without a sign change are
    reported as tangential grazing.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    out = []
    for surf in field.impulse_set:
        if surf.at_time is not None:
            if s < surf.at_time <= T:
                out.append((float(surf.at_time), surf))
            continue
        fac = surf.facet
        h = fac.hyperplane
        ts = np.linspace(s, T, DETECT_GRID + 1)
        ms = np.array([h.margin(flow(s, float(t), xi)) for t in ts])
        # near-touches below grid resolution are ambiguous: report them
        scale = 1e-6 * (1.0 + abs(h.offset))
        crossings = []
        for k in range(DETECT_GRID):
            m0, m1 = ms[k], ms[k + 1]
            if m0 == 0.0:
                if ts[k] > s:
                    crossings.append(float(ts[k]))
                continue
            if m0 * m1 < 0.0:
                lo_t, hi_t = float(ts[k]), float(ts[k + 1])
                lo_m = m0
                while hi_t - lo_t > BISECT_TOL:
                    mid = 0.5 * (lo_t + hi_t)
                    mm = h.margin(flow(s, mid, xi))
                    if mm == 0.0:
                        lo_t = hi_t = mid
                        break
                    if (mm > 0) == (lo_m > 0):
                        lo_t, lo_m = mid, mm
                    else:
                        hi_t = mid
                crossings.append(0.5 * (lo_t + hi_t))
        # tangential grazing: |margin| dips into the tolerance band between
        # grid points without changing sign
        for k in range(1, DETECT_GRID):
            if abs(ms[k]) < scale and ms[k] != 0.0 and \
                    ms[k - 1] * ms[k] > 0 and ms[k] * ms[k + 1] > 0 and \
                    abs(ms[k]) < abs(ms[k - 1]) and abs(ms[k]) < abs(ms[k + 1]):
                raise TangentialGrazingError(
                    f"trajectory grazes impulse facet near t={ts[k]:.6g} "
                    f"(margin {ms[k]:.3e}) without crossing")
        for t_c in crossings:
            x_c = flow(s, t_c, xi)
            if facet_contains(fac, x_c):
                out.append((t_c, surf))
    if len(out) > MAX_CROSSINGS:
        raise TooManyCrossingsError(f"{len(out)} impulse crossings (chatter suspected)")
    out.sort(key=lambda pair: pair[0])
    return [t for t, _ in out]


def _crossings_with_surfaces(field, flow, s, T, xi):
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    tagged = []
    for surf in field.impulse_set:
        sub = MarkovField(field.intensities, field.jump_kernel, (surf,), field.state_count)
        for t_c in detect_impulse_times(sub, flow, s, T, xi):
            tagged.append((t_c, surf))
    tagged.sort(key=lambda pair: pair[0])
    return tagged


# ---------------------------------------------------------------------------
# transition-matrix propagation (3.4)-(3.5)


def propagate(field: MarkovField, flow: SemiFlow, s: float, t: float, xi,
              diagnostics: Optional[list] = None) -> TransitionMatrix:
    """Transition matrix pi(s, t) along the flow trajectory from xi.

    Integrates the forward equation piece by piece between impulse
    crossings (which are integration breakpoints, never stepped over) and
    applies pi <- pi p at each crossing.  The result is checked for row
    sums within 1e-8 and entries above -1e-10 (small negatives are clipped
    and logged).
    """
    if t < s:
        raise MarkovError(f"need s <= t, got s={s} > t={t}")
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    n = field.state_count
    pi = np.eye(n)
    if t == s:
        return TransitionMatrix(pi)

    crossings = _crossings_with_surfaces(field, flow, s, t, xi)

    def mat_fn(tau):
        x = flow(s, tau, xi)
        return field.generator(tau, x).T

    t_cur = s
    for tau, surf in crossings:
        psi = _rk4_refined(mat_fn, t_cur, tau, pi.T)
        pi = psi.T
        x_tau = flow(s, tau, xi)
        P = field.impulse_matrix(surf, tau, x_tau)
        pi = pi @ P
        _record(diagnostics, pi)
        t_cur = tau
    psi = _rk4_refined(mat_fn, t_cur, t, pi.T)
    pi = psi.T
    _record(diagnostics, pi)

    dev = np.abs(pi.sum(axis=1) - 1.0).max()
    if dev > EPS_PROB:
        raise NonStochasticResultError(f"row sums deviate from 1 by {dev:.3e}")
    low = pi.min()
    if low < -NEG_CLIP:
        raise NonStochasticResultError(f"entry {low:.3e} below -{NEG_CLIP:g}")
    if low < 0.0:
        log.info("clipping slightly negative entries (min %.3e)", low)
        pi = np.clip(pi, 0.0, None)
    return TransitionMatrix(pi)


def _record(diagnostics, pi):
    if diagnostics is not None:
        diagnostics.append((float(np.abs(pi.sum(axis=1) - 1.0).max()), float(pi.min())))


def stochastic_relay_output(field: MarkovField, flow: SemiFlow, s: float, t: float, xi,
                            diagnostics: Optional[list] = None) -> TransitionMatrix:
    """Output of the stochastic relay: the transition matrix pi(s, t)."""
    return propagate(field, flow, s, t, xi, diagnostics)


def stochastic_hysteresis(members: Sequence[Tuple[MarkovField, float]], flow: SemiFlow,
                          s: float, t: float, xi,
                          diagnostics: Optional[list] = None) -> np.ndarray:
    """Weight-sum of member transition matrices; rows sum to the total weight."""
    if not members:
        raise MarkovError("stochastic family must not be empty")
    weights = [w for _, w in members]
    if any(not (np.isfinite(w) and w > 0) for w in weights):
        raise MarkovError(f"weights must be positive and finite, got {weights}")
    acc = None
    for k, (fld, w) in enumerate(members):
        try:
            out = propagate(fld, flow, s, t, xi, diagnostics).entries * w
        except MarkovError as e:
            raise MarkovError(f"member {k}: {e}") from e
        acc = out if acc is None else acc + out
    return acc


# ---------------------------------------------------------------------------
# fundamental matrices of the transposed impulsive system (3.8)


def _impulses_within(sys: ImpulsiveSystem, t_prime: float, t: float):
    """Impulses applied on (t_prime, t]: a start exactly on an impulse time
    excludes that impulse (right limit), an end exactly on one includes it."""
    return [(tau, B) for tau, B in sys.impulses if t_prime < tau <= t]


def fundamental_matrix_product(sys: ImpulsiveSystem, t_prime: float, t: float) -> np.ndarray:
    """Phi(t', t) as a chain of smooth-piece propagators and impulse factors.

    Each smooth piece is integrated by RK4 with step-doubling; impulse times
    bound the pieces exactly.
    """
    if t_prime >= t:
        raise MarkovError(f"need t_prime < t, got {t_prime} >= {t}")
    imps = _impulses_within(sys, t_prime, t)
    phi = np.eye(np.asarray(sys.generator(t_prime)).shape[0])
    t_cur = t_prime
    for tau, B in imps:
        phi = _rk4_refined(lambda u: np.asarray(sys.generator(u), dtype=float),
                           t_cur, tau, phi)
        phi = B @ phi
        t_cur = tau
    phi = _rk4_refined(lambda u: np.asarray(sys.generator(u), dtype=float), t_cur, t, phi)
    return phi


def enumerate_paths(i: int, j: int) -> List[Tuple[int, ...]]:
    """Increasing index paths from i to j: {i, k_1 < ... < k_r, j}.

    For j > i there are 2^(j-i-1) of them (all subsets of the interior);
    for j = i the single path {i}.
    """
    if i > j:
        raise MarkovError(f"need i <= j, got {i} > {j}")
    if i == j:
        return [(i,)]
    interior = range(i + 1, j)
    out = []
    for r in range(0, j - i):
        for combo in combinations(interior, r):
            out.append((i,) + combo + (j,))
    return out


def _peano_baker_panel(gen, a: float, b: float, tol: float,
                       quad: Tuple[np.ndarray, np.ndarray, np.ndarray]) -> np.ndarray:
    """Smooth propagator on [a, b] via the kernel-convolution (Peano-Baker)
    series: S = I + sum_m of the m-fold convolution of A, truncated when a
    term's max norm drops below tol."""
    x, w, M = quad
    half = 0.5 * (b - a)
    ts = a + (x + 1.0) * half
    A = np.stack([np.asarray(gen(float(u)), dtype=float) for u in ts])
    d = A.shape[1]
    if b <= a:
        return np.eye(d)
    P = np.broadcast_to(np.eye(d), (len(ts), d, d)).copy()
    S = np.eye(d)
    last = np.inf
    for _ in range(SERIES_MAX_TERMS):
        G = A @ P
        term = half * np.einsum("j,jkl->kl", w, G)
        S = S + term
        last = float(np.abs(term).max())
        if last < tol:
            return S
        P = half * np.einsum("ij,jkl->ikl", M, G)
    raise SeriesConvergenceError(last, SERIES_MAX_TERMS)


def _gl_quadrature(n: int = GL_NODES):
    x, w = np.polynomial.legendre.leggauss(n)
    V = np.polynomial.legendre.legvander(x, n - 1)
    Vinv = np.linalg.inv(V)
    M = np.empty((n, n))
    for j in range(n):
        coeff = np.polynomial.legendre.legint(Vinv[:, j], lbnd=-1.0)
        M[:, j] = np.polynomial.legendre.legval(x, coeff)
    return x, w, M


def fundamental_matrix_series(sys: ImpulsiveSystem, t_prime: float, t: float,
                              tol: float = 1e-10) -> np.ndarray:
    """Phi(t', t) by the increasing-paths kernel-convolution construction.

    Smooth gaps contribute Peano-Baker series evaluated by 32-node
    Gauss-Legendre quadrature per piece; the impulse set contributes a sum
    over all increasing paths (index subsets), each path chaining the
    jump increments B(tau)-I between the gap propagators it visits.  The
    zero-impulse path is the plain smooth series.
    """
    if t_prime >= t:
        raise MarkovError(f"need t_prime < t, got {t_prime} >= {t}")
    if tol <= 0:
        raise MarkovError("tol must be positive")
    imps = _impulses_within(sys, t_prime, t)
    if len(imps) > MAX_SERIES_IMPULSES:
        raise MarkovError(f"{len(imps)} impulses exceed the series cap "
                          f"{MAX_SERIES_IMPULSES}")
    quad = _gl_quadrature()
    pts = [t_prime] + [tau for tau, _ in imps] + [t]
    jumps = [np.asarray(B, dtype=float) - np.eye(np.asarray(B).shape[0])
             for _, B in imps]
    # propagator of each consecutive panel; longer gaps compose these
    panels = [_peano_baker_panel(sys.generator, pts[k], pts[k + 1], tol, quad)
              for k in range(len(pts) - 1)]

    cache = {}

    def smooth(i: int, j: int) -> np.ndarray:
        # smooth propagator from pts[i] to pts[j], ignoring impulses between
        if (i, j) not in cache:
            acc = np.eye(panels[0].shape[0])
            for k in range(i, j):
                acc = panels[k] @ acc
            cache[(i, j)] = acc
        return cache[(i, j)]

    n_imp = len(imps)
    d = panels[0].shape[0]
    total = np.zeros((d, d))
    for path in enumerate_paths(0, n_imp + 1):
        sigma = path[1:-1]  # impulse indices visited by this path (1-based)
        term = smooth(0, sigma[0] if sigma else n_imp + 1)
        for pos, kk in enumerate(sigma):
            term = jumps[kk - 1] @ term
            nxt = sigma[pos + 1] if pos + 1 < len(sigma) else n_imp + 1
            term = smooth(kk, nxt) @ term
        total += term
    return total

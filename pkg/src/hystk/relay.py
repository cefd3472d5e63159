"""Multi-state non-ideal relays: structural validation and event-driven evolution.

A relay is a family of open continuation sets covering an input domain,
with the relative boundary of each set partitioned into switching facets.
Evolution of a piecewise-linear input is computed exactly, one boundary
event at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .geometry import (
    BoundaryFacet,
    HalfSpace,
    Region,
    Signal,
    bounding_box,
    contains,
    contains_batch,
    contains_closure,
    exit_time,
    facet_contains,
    on_boundary,
    region_vertices,
    sample_on_facet,
)

MAX_EVENTS = 10 ** 6
COVER_SAMPLES = 10 ** 4


class RelayError(Exception):
    pass


class InvalidRelaySpecError(RelayError):
    def __init__(self, violations):
        self.violations = violations
        super().__init__("; ".join(v.describe() for v in violations))


class IncompatibleInitialStateError(RelayError):
    pass


class ExitPointUnclassifiedError(RelayError):
    def __init__(self, point, time, candidates=()):
        self.point = np.asarray(point)
        self.time = time
        self.candidates = tuple(candidates)
        detail = f"targets {list(candidates)}" if candidates else "no switching facet"
        super().__init__(f"exit point {self.point} at t={time}: {detail}")


class SignalLeftOmegaError(RelayError):
    def __init__(self, point, time):
        self.point = np.asarray(point)
        self.time = time
        super().__init__(f"signal left the input domain at t={time}, point {self.point}")


@dataclass(frozen=True)
class StateId:
    """Elementary output state: small index plus the payload used in superpositions."""

    index: int
    value: Union[float, np.ndarray] = 0.0

    def payload(self) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.value, dtype=float))


@dataclass
class Violation:
    condition: str
    message: str
    witness: Optional[np.ndarray] = None

    def describe(self) -> str:
        w = "" if self.witness is None else f" (witness {np.asarray(self.witness)})"
        return f"{self.condition}: {self.message}{w}"


@dataclass
class RelaySpec:
    """Input domain, states, continuation sets and switching facets of one relay.

    Immutable after validation.  ``classic_thresholds`` is set by the classic
    two-state constructor and enables fast batched evolution of families.
    """

    omega: Region
    states: List[StateId]
    continuation: Dict[int, Region]
    switch_facets: Dict[Tuple[int, int], BoundaryFacet]
    seed: int = 0
    classic_thresholds: Optional[Tuple[float, float]] = None
    _violations: Optional[list] = field(default=None, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.omega.ambient_dim

    def state_by_index(self, idx: int) -> StateId:
        for s in self.states:
            if s.index == idx:
                return s
        raise RelayError(f"unknown state index {idx}")

    def ensure_valid(self):
        if self._violations is None:
            self._violations = validate(self)
        if self._violations:
            raise InvalidRelaySpecError(self._violations)


@dataclass(frozen=True)
class SwitchEvent:
    time: float
    from_state: int
    to_state: int
    exit_point: np.ndarray


@dataclass(frozen=True)
class RelayTrajectory:
    """Right-continuous output record: value on [t_k, t_{k+1}) is the k-th state."""

    initial_state: int
    switch_events: Tuple[SwitchEvent, ...]
    start_time: float
    final_time: float


def validate(spec: RelaySpec) -> List[Violation]:
    """Check the structural conditions on a relay; violations are data, not errors.

    Covering and boundary-coverage conditions are falsified by seeded
    Monte-Carlo sampling plus all polytope vertices; subset and disjointness
    conditions are checked on facet samples.
    """
    out: List[Violation] = []
    rng = np.random.default_rng(spec.seed)
    state_idxs = [s.index for s in spec.states]

    pdim = {s.payload().shape[0] for s in spec.states}
    if len(pdim) > 1:
        out.append(Violation("payload", "state payload dimensions differ"))

    for idx in state_idxs:
        if idx not in spec.continuation:
            out.append(Violation("continuation", f"state {idx} has no continuation set"))
    if any(v.condition == "continuation" for v in out):
        return out

    regions = [spec.omega] + [spec.continuation[i] for i in state_idxs]
    lo, hi = bounding_box(regions)
    samples = rng.uniform(lo, hi, size=(COVER_SAMPLES, spec.dim))
    in_omega = contains_batch(spec.omega, samples)

    # C_alpha inside Omega: witnesses, vertices, and sampled interior points
    for idx in state_idxs:
        c = spec.continuation[idx]
        if not contains(spec.omega, c.witness):
            out.append(Violation("containment", f"witness of C_{idx} outside the domain",
                                 c.witness))
        if spec.dim <= 2:
            for v in region_vertices(c):
                if not contains_closure(spec.omega, v):
                    out.append(Violation(
                        "containment", f"vertex of C_{idx} outside closure of the domain", v))
        stray = contains_batch(c, samples) & ~in_omega
        if np.any(stray):
            out.append(Violation("containment", f"point of C_{idx} outside the domain",
                                 samples[np.argmax(stray)]))

    # covering: every sampled domain point lies in some continuation set
    covered = np.zeros(len(samples), dtype=bool)
    for idx in state_idxs:
        covered |= contains_batch(spec.continuation[idx], samples)
    gap = in_omega & ~covered
    if np.any(gap):
        out.append(Violation("covering", "domain point in no continuation set",
                             samples[np.argmax(gap)]))

    # facets: pairwise disjoint per source state, contained in their target set
    for (a, b), fac in spec.switch_facets.items():
        pts = sample_on_facet(fac, rng, 64)
        for x in pts:
            if not contains(spec.continuation[b], x):
                out.append(Violation(
                    "facet_target", f"S_{a}{b} point not inside C_{b}", x))
                break
        for (a2, b2), fac2 in spec.switch_facets.items():
            if a2 != a or b2 == b or (a2, b2) < (a, b):
                continue
            for x in pts:
                if facet_contains(fac2, x) and facet_contains(fac, x):
                    out.append(Violation(
                        "facet_disjoint", f"S_{a}{b} intersects S_{a}{b2}", x))
                    break

    # boundary coverage: rel-boundary points of C_alpha lie in some S_alpha,beta
    for idx in state_idxs:
        c = spec.continuation[idx]
        for j in range(len(c.halfspaces)):
            probe = BoundaryFacet(c, j)
            pts = _boundary_samples(c, j, spec.omega, rng)
            for x in pts:
                if not contains(spec.omega, x):
                    continue
                if not contains_closure(c, x) or not facet_contains(probe, x):
                    continue
                hits = [b for (a, b), f in spec.switch_facets.items()
                        if a == idx and facet_contains(f, x)]
                if not hits:
                    out.append(Violation(
                        "boundary_cover", f"rel-boundary point of C_{idx} in no facet", x))
                    break
    return out


def _boundary_samples(region: Region, face_index: int, omega: Region,
                      rng: np.random.Generator, count: int = 48) -> list:
    h = region.halfspaces[face_index]
    if region.ambient_dim == 1:
        return [np.array([h.offset / float(h.normal[0])])]
    if region.ambient_dim != 2:
        return []
    clip_hs = tuple(hs for k, hs in enumerate(region.halfspaces) if k != face_index)
    others = Region.whole_space(2) if not clip_hs else None
    try:
        clip = Region(clip_hs, 2, region.witness) if clip_hs else others
    except Exception:
        return []
    probe = BoundaryFacet(region, face_index, clip,
                          tuple(True for _ in clip_hs) if clip_hs else ())
    pts = sample_on_facet(probe, rng, count)
    return [x for x in pts if contains(omega, x)]


def evolve(spec: RelaySpec, signal: Signal, alpha0: int) -> RelayTrajectory:
    """Run the relay over a signal: repeated exit-time/facet-classification steps.

    The initial state must be compatible (signal start strictly inside its
    continuation set, or on its boundary moving inward).  A final signal
    point landing exactly on a facet still triggers the switch.
    """
    spec.ensure_valid()
    if signal.dim != spec.dim:
        raise RelayError(f"signal dim {signal.dim} != relay dim {spec.dim}")
    c0 = spec.continuation[alpha0]
    x_start = signal.value_at(signal.t_start)
    if not contains(c0, x_start):
        ok = False
        if contains_closure(c0, x_start) and len(signal.times) > 1:
            d = (signal.points[1] - signal.points[0]) / (signal.times[1] - signal.times[0])
            ok = all(float(np.dot(h.normal, d)) < 0.0
                     for h in c0.halfspaces if abs(h.margin(x_start)) <= h.tol())
        if not ok:
            raise IncompatibleInitialStateError(
                f"signal start {x_start} incompatible with state {alpha0}")

    events: List[SwitchEvent] = []
    t_cur = signal.t_start
    alpha = alpha0
    while True:
        if len(events) > MAX_EVENTS:
            raise RelayError(f"event cap {MAX_EVENTS} exceeded (chattering input?)")
        hit = exit_time(signal, spec.continuation[alpha], t_cur)
        if hit is None:
            break
        t_ex, x_ex = hit
        targets = [b for (a, b), fac in spec.switch_facets.items()
                   if a == alpha and facet_contains(fac, x_ex)]
        if len(targets) != 1:
            if not targets and (on_boundary(spec.omega, x_ex)
                                or not contains_closure(spec.omega, x_ex)):
                raise SignalLeftOmegaError(x_ex, t_ex)
            raise ExitPointUnclassifiedError(x_ex, t_ex, targets)
        beta = targets[0]
        events.append(SwitchEvent(float(t_ex), alpha, beta, np.asarray(x_ex)))
        alpha = beta
        t_cur = float(t_ex)
        if t_cur >= signal.t_end - 1e-15:
            break
    return RelayTrajectory(alpha0, tuple(events), signal.t_start, signal.t_end)


def output_at(traj: RelayTrajectory, t: float) -> int:
    """Right-continuous state lookup: at an event time the post-switch state."""
    t = float(t)
    if t < traj.start_time - 1e-12 or t > traj.final_time + 1e-12:
        raise RelayError(f"time {t} outside trajectory domain "
                         f"[{traj.start_time}, {traj.final_time}]")
    state = traj.initial_state
    for ev in traj.switch_events:
        if ev.time <= t:
            state = ev.to_state
        else:
            break
    return state


# ---------------------------------------------------------------------------
# named fixtures


def classic_relay(rho1: float, rho2: float,
                  payload_minus: float = -1.0, payload_plus: float = 1.0,
                  seed: int = 0) -> RelaySpec:
    """Two-state scalar relay: stays low below rho1, high above rho2 (rho1 > rho2).

    State -1 persists on (-inf, rho1), state +1 on (rho2, +inf); the switch
    points are {rho1} upward and {rho2} downward.
    """
    if not rho1 > rho2:
        raise RelayError(f"classic relay needs rho1 > rho2, got {rho1} <= {rho2}")
    omega = Region.whole_space(1, np.array([0.5 * (rho1 + rho2)]))
    c_minus = Region((HalfSpace(np.array([1.0]), float(rho1)),), 1,
                     np.array([rho1 - max(1.0, abs(rho1))]))
    c_plus = Region((HalfSpace(np.array([-1.0]), -float(rho2)),), 1,
                    np.array([rho2 + max(1.0, abs(rho2))]))
    s_up = BoundaryFacet(c_minus, 0)
    s_down = BoundaryFacet(c_plus, 0)
    states = [StateId(0, payload_minus), StateId(1, payload_plus)]
    spec = RelaySpec(
        omega=omega,
        states=states,
        continuation={0: c_minus, 1: c_plus},
        switch_facets={(0, 1): s_up, (1, 0): s_down},
        seed=seed,
        classic_thresholds=(float(rho1), float(rho2)),
    )
    # structurally valid by construction (rho1 > rho2 is enforced above);
    # skip the sampled checks when large families are built from these
    spec._violations = []
    return spec


def triangle_relay(seed: int = 0) -> RelaySpec:
    """Three-state relay on the open triangle {x > 0, y > 0, x + y < 1}.

    State 1 persists where x + y > 0.55, state 2 where x + 2y < 0.9 and
    state 3 where 2x + y < 0.9; the three sets cover the triangle.  Each
    threshold segment is split into two half-open switching facets at an
    interior point, removing the ambiguity where it meets both other sets.
    """
    omega = Region.from_inequalities(
        [[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]], [0.0, 0.0, 1.0], [0.3, 0.3])

    hs_omega = omega.halfspaces
    c1 = Region(hs_omega + (HalfSpace(np.array([-1.0, -1.0]), -0.55),), 2, [0.4, 0.4])
    c2 = Region(hs_omega + (HalfSpace(np.array([1.0, 2.0]), 0.9),), 2, [0.1, 0.1])
    c3 = Region(hs_omega + (HalfSpace(np.array([2.0, 1.0]), 0.9),), 2, [0.1, 0.1])

    # boundary of C1: the segment x + y = 0.55 inside the triangle, split at
    # D1 = (0.3, 0.25); x >= 0.3 side switches to 2, x < 0.3 side to 3
    s12 = BoundaryFacet(
        c1, 3,
        Region((HalfSpace(np.array([-1.0, 0.0]), -0.3),
                HalfSpace(np.array([0.0, -1.0]), 0.0)), 2, [0.45, 0.05]),
        (True, False))
    s13 = BoundaryFacet(
        c1, 3,
        Region((HalfSpace(np.array([1.0, 0.0]), 0.3),
                HalfSpace(np.array([-1.0, 0.0]), 0.0)), 2, [0.1, 0.4]),
        (False, False))

    # boundary of C2: x + 2y = 0.9, split at D2 = (0.25, 0.325);
    # x >= 0.25 side is inside C1, the rest inside C3
    s21 = BoundaryFacet(
        c2, 3,
        Region((HalfSpace(np.array([-1.0, 0.0]), -0.25),
                HalfSpace(np.array([0.0, -1.0]), 0.0)), 2, [0.5, 0.1]),
        (True, False))
    s23 = BoundaryFacet(
        c2, 3,
        Region((HalfSpace(np.array([1.0, 0.0]), 0.25),
                HalfSpace(np.array([-1.0, 0.0]), 0.0)), 2, [0.1, 0.35]),
        (False, False))

    # boundary of C3: 2x + y = 0.9, split at D3 = (0.32, 0.26);
    # x <= 0.32 side is inside C1, x > 0.32 inside C2
    s31 = BoundaryFacet(
        c3, 3,
        Region((HalfSpace(np.array([1.0, 0.0]), 0.32),
                HalfSpace(np.array([-1.0, 0.0]), 0.0)), 2, [0.1, 0.6]),
        (True, False))
    s32 = BoundaryFacet(
        c3, 3,
        Region((HalfSpace(np.array([-1.0, 0.0]), -0.32),
                HalfSpace(np.array([0.0, -1.0]), 0.0)), 2, [0.4, 0.05]),
        (False, False))

    states = [StateId(1, 1.0), StateId(2, 2.0), StateId(3, 3.0)]
    return RelaySpec(
        omega=omega,
        states=states,
        continuation={1: c1, 2: c2, 3: c3},
        switch_facets={(1, 2): s12, (1, 3): s13,
                       (2, 1): s21, (2, 3): s23,
                       (3, 1): s31, (3, 2): s32},
        seed=seed,
    )

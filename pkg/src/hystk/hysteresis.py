"""Weighted superposition of relays and its analysis toolkit.

The operator output at time t is the weight-sum of the member relays'
payloads.  Families of classic scalar relays take a batched fast path
through the kernel backend; general families evolve member by member.
Also here: monotropy intervals and transition points, the per-state
pre-order on members, and the local wipe-out verifier.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import _kernels
from .geometry import Region, Signal, contains, contains_batch, distance_to_facet
from .relay import (
    RelaySpec,
    RelayTrajectory,
    SwitchEvent,
    classic_relay,
    evolve,
    output_at,
)


class FamilyError(Exception):
    pass


class MemberError(FamilyError):
    """A relay error, tagged with the member it came from."""

    def __init__(self, label, cause):
        self.label = label
        self.cause = cause
        super().__init__(f"member {label!r}: {cause}")


@dataclass(frozen=True)
class FamilyMember:
    label: str
    spec: RelaySpec
    weight: float
    initial_state: int


@dataclass
class RelayFamily:
    members: List[FamilyMember]

    def __post_init__(self):
        if not self.members:
            raise FamilyError("family must have at least one member")
        dims = {m.spec.dim for m in self.members}
        if len(dims) > 1:
            raise FamilyError(f"members disagree on input dimension: {dims}")
        pdims = {m.spec.state_by_index(m.initial_state).payload().shape[0]
                 for m in self.members}
        if len(pdims) > 1:
            raise FamilyError(f"members disagree on payload dimension: {pdims}")
        for m in self.members:
            if not (np.isfinite(m.weight) and m.weight > 0):
                raise FamilyError(f"member {m.label!r} has invalid weight {m.weight}")
        labels = [m.label for m in self.members]
        if len(set(labels)) != len(labels):
            raise FamilyError("member labels must be unique")

    @property
    def dim(self) -> int:
        return self.members[0].spec.dim

    @property
    def payload_dim(self) -> int:
        return self.members[0].spec.states[0].payload().shape[0]

    @property
    def total_weight(self) -> float:
        return float(sum(m.weight for m in self.members))

    def member(self, label) -> FamilyMember:
        for m in self.members:
            if m.label == label:
                return m
        raise FamilyError(f"no member labelled {label!r}")


@dataclass(frozen=True)
class HysteresisOutput:
    """Right-continuous weighted-sum record; values[k] holds on [times[k], times[k+1])."""

    times: np.ndarray
    values: np.ndarray

    def value_at(self, t: float) -> np.ndarray:
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        if k < 0:
            raise FamilyError(f"time {t} before output start {self.times[0]}")
        return self.values[k]


@dataclass(frozen=True)
class TransitionPoint:
    time: float
    pair: Tuple[int, int]
    rho_label: str
    facet: Tuple[int, int]
    level: Optional[float] = None  # scalar signal value at the crossing (1-D only)


@dataclass
class MonotropyReport:
    t_start: float
    t_end: float
    intervals: List[Tuple[float, float, Optional[Tuple[int, int]]]]
    transition_points: List[TransitionPoint]


def preisach_family(thresholds: Sequence[Tuple[float, float, float, int]]) -> RelayFamily:
    """Family of classic scalar relays from (rho1, rho2, weight, initial) rows.

    ``initial`` is -1 or +1; rho1 > rho2 is required for every member.
    """
    members = []
    for i, (r1, r2, w, init) in enumerate(thresholds):
        if not r1 > r2:
            raise FamilyError(f"member {i}: need rho1 > rho2, got {r1} <= {r2}")
        if init not in (-1, 1):
            raise FamilyError(f"member {i}: initial must be -1 or +1, got {init}")
        spec = classic_relay(r1, r2)
        members.append(FamilyMember(
            label=f"r{i:03d}({r1:g},{r2:g})",
            spec=spec,
            weight=float(w),
            initial_state=0 if init == -1 else 1,
        ))
    return RelayFamily(members)


def preisach_grid(n: int, rho_lo: float, rho_hi: float,
                  start_value: float = None, weight: float = None) -> RelayFamily:
    """Uniform triangular grid of threshold pairs rho_lo < rho2 < rho1 < rho_hi.

    Initial states are chosen compatible with ``start_value`` (default rho_lo);
    weights default to 1/#members.
    """
    levels = np.linspace(rho_lo, rho_hi, n)
    pairs = [(levels[i], levels[j]) for i in range(n) for j in range(i)]
    if weight is None:
        weight = 1.0 / len(pairs)
    if start_value is None:
        start_value = rho_lo
    rows = [(r1, r2, weight, -1 if start_value < r1 else 1) for r1, r2 in pairs]
    return preisach_family(rows)


def _aggregate(family: RelayFamily, states: Sequence[int]) -> np.ndarray:
    acc = np.zeros(family.payload_dim)
    for m, s in zip(family.members, states):
        acc += m.weight * m.spec.state_by_index(s).payload()
    return acc


def _is_classic_fast_path(family: RelayFamily, signal: Signal) -> bool:
    if signal.dim != 1:
        return False
    u0 = float(signal.points[0, 0])
    for m in family.members:
        if m.spec.classic_thresholds is None:
            return False
        if not contains(m.spec.continuation[m.initial_state], np.array([u0])):
            return False
    return True


def evolve_family(family: RelayFamily, signal: Signal) -> List[RelayTrajectory]:
    """Per-member trajectories; classic scalar families run through the kernel."""
    if _is_classic_fast_path(family, signal):
        rho1 = np.array([m.spec.classic_thresholds[0] for m in family.members])
        rho2 = np.array([m.spec.classic_thresholds[1] for m in family.members])
        state0 = np.array([m.initial_state for m in family.members], dtype=np.int64)
        ev_t, ev_m, ev_s, _ = _kernels.sweep_classic(
            rho1, rho2, state0, signal.times, signal.points[:, 0])
        per_member: List[List[SwitchEvent]] = [[] for _ in family.members]
        for t, j, s in zip(ev_t, ev_m, ev_s):
            j = int(j)
            s = int(s)
            per_member[j].append(SwitchEvent(
                float(t), 1 - s, s,
                np.array([rho1[j] if s == 1 else rho2[j]])))
        return [RelayTrajectory(m.initial_state, tuple(evs), signal.t_start, signal.t_end)
                for m, evs in zip(family.members, per_member)]
    out = []
    for m in family.members:
        try:
            out.append(evolve(m.spec, signal, m.initial_state))
        except Exception as e:
            raise MemberError(m.label, e) from e
    return out


def apply(family: RelayFamily, signal: Signal) -> HysteresisOutput:
    """Evolve every member and emit the right-continuous weighted payload sum."""
    trajs = evolve_family(family, signal)
    merged = _merged_events(family, trajs)
    states = [m.initial_state for m in family.members]
    times = [signal.t_start]
    values = [_aggregate(family, states)]
    i = 0
    while i < len(merged):
        t = merged[i][0]
        while i < len(merged) and merged[i][0] == t:
            _, pos, _, _, to = merged[i]
            states[pos] = to
            i += 1
        times.append(t)
        values.append(_aggregate(family, states))
    return HysteresisOutput(np.asarray(times), np.vstack(values))


def _merged_events(family: RelayFamily, trajs: Sequence[RelayTrajectory]):
    """Events across members as (time, member_pos, label, from, to), sorted."""
    merged = []
    for pos, (m, traj) in enumerate(zip(family.members, trajs)):
        for ev in traj.switch_events:
            merged.append((ev.time, pos, m.label, ev.from_state, ev.to_state))
    merged.sort(key=lambda e: (e[0], e[1]))
    return merged


def monotropy_distance(family: RelayFamily, x) -> float:
    """Smallest distance from x to any member's switching facet."""
    if not family.members:
        raise FamilyError("empty family")
    best = np.inf
    for m in family.members:
        for fac in m.spec.switch_facets.values():
            best = min(best, distance_to_facet(x, fac))
    return float(best)


def analyze_monotropy(family: RelayFamily, signal: Signal,
                      trajs: Optional[Sequence[RelayTrajectory]] = None) -> MonotropyReport:
    """Partition the time domain into monotropy intervals and transition points.

    A transition point is an instant at which the signal meets a facet that
    switches some relay against the prevailing switching direction; all
    other instants belong to an interval during which a single ordered state
    pair accounts for every switching.
    """
    if trajs is None:
        trajs = evolve_family(family, signal)
    merged = _merged_events(family, trajs)
    tps: List[TransitionPoint] = []
    direction: Optional[Tuple[int, int]] = None
    i = 0
    while i < len(merged):
        t = merged[i][0]
        group = []
        while i < len(merged) and merged[i][0] == t:
            group.append(merged[i])
            i += 1
        pairs = {(g[3], g[4]) for g in group}
        flip = (direction is not None and any(p != direction for p in pairs)) \
            or (direction is None and len(pairs) > 1)
        if flip:
            _, pos, label, fr, to = group[-1]
            lvl = float(signal.value_at(t)[0]) if signal.dim == 1 else None
            tps.append(TransitionPoint(t, (fr, to), label, (fr, to), lvl))
        direction = (group[-1][3], group[-1][4])
    intervals = []
    cuts = [signal.t_start] + [tp.time for tp in tps] + [signal.t_end]
    span_dirs = _span_directions(merged, tps, signal)
    for k in range(len(cuts) - 1):
        if cuts[k + 1] > cuts[k]:
            intervals.append((cuts[k], cuts[k + 1], span_dirs[k]))
    return MonotropyReport(signal.t_start, signal.t_end, intervals, tps)


def _span_directions(merged, tps, signal):
    bounds = [signal.t_start] + [tp.time for tp in tps] + [signal.t_end]
    dirs: List[Optional[Tuple[int, int]]] = []
    for k in range(len(bounds) - 1):
        lo, hi = bounds[k], bounds[k + 1]
        d = None
        for t, _, _, fr, to in merged:
            if lo < t <= hi or (k == 0 and t == lo):
                d = (fr, to)
                break
        dirs.append(d)
    return dirs


def preorder_leq(family: RelayFamily, rho1_label, rho2_label, alpha: int,
                 window: Region) -> bool:
    """Member pre-order: continuation sets of ``alpha`` nested within the window."""
    from .geometry import region_subset_within

    a = family.member(rho1_label)
    b = family.member(rho2_label)
    return region_subset_within(a.spec.continuation[alpha],
                                b.spec.continuation[alpha], window)


@dataclass
class WipeoutPair:
    t_prime: float
    t_second: float
    rho_prime: str
    rho_second: str
    pair: Tuple[int, int]
    eligible: bool
    wiped: Optional[bool] = None
    aggregate_match: Optional[bool] = None
    skipped: Optional[str] = None


@dataclass
class WipeoutReport:
    precondition_violations: List[str] = field(default_factory=list)
    transition_points: List[TransitionPoint] = field(default_factory=list)
    pairs: List[WipeoutPair] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.precondition_violations


def check_local_wipeout(family: RelayFamily, signal: Signal, window: Region,
                        alpha0: int, alpha1: int,
                        mc_samples: int = 2000, seed: int = 0) -> WipeoutReport:
    """Verify the local wipe-out behaviour on dominant transition-point pairs.

    For every ordered pair of transition points (t', t'') relative to the same
    state pair, the t'-deleted history is formed by splicing out the signal
    excursion between the previous attainment of the t'-switching level and
    t' itself, so that the switchings at t' never happen; both histories are
    then evolved and the per-member state vectors (and the aggregate) are
    compared just after t''.  Pairs whose later switching member strictly
    dominates the earlier one in the state pre-order are the ones expected
    to wipe; the rest are reported without any expectation.

    Preconditions (two active states in the window, all members starting at
    alpha0, pre-order-coordinated switching, alternating transition points)
    are checked and reported; pair verification runs only when they hold.
    History surgery requires a scalar (1-D) family.
    """
    report = WipeoutReport()
    viol = report.precondition_violations

    if family.dim != 1:
        viol.append("history surgery implemented for scalar families only")
        return report

    rng = np.random.default_rng(seed)
    for k, p in enumerate(signal.points):
        if not contains(window, p):
            viol.append(f"signal point {p} (sample {k}) leaves the window")
            break

    lo, hi = window.interval_bounds()
    if not np.isfinite(lo):
        lo = float(signal.points.min()) - 1.0
    if not np.isfinite(hi):
        hi = float(signal.points.max()) + 1.0
    probes = rng.uniform(lo, hi, size=(mc_samples, 1))
    in_window = contains_batch(window, probes)
    for m in family.members:
        for s in m.spec.states:
            if s.index in (alpha0, alpha1):
                continue
            if np.any(in_window & contains_batch(m.spec.continuation[s.index], probes)):
                viol.append(f"member {m.label!r}: state {s.index} active inside window")

    for m in family.members:
        if m.initial_state != alpha0:
            viol.append(f"member {m.label!r} starts at {m.initial_state}, not {alpha0}")

    trajs = evolve_family(family, signal)
    mono = analyze_monotropy(family, signal, trajs)
    report.transition_points = mono.transition_points

    _check_coordination(family, trajs, window, viol)

    pairs_seq = [tp.pair for tp in mono.transition_points]
    for a, b in zip(pairs_seq, pairs_seq[1:]):
        if a == b:
            viol.append("transition points do not alternate")
            break

    if viol:
        return report

    tps = mono.transition_points
    full_states_at = {}
    for tp in tps:
        full_states_at[tp.time] = [output_at(tr, tp.time) for tr in trajs]

    for i in range(len(tps)):
        for j in range(i + 1, len(tps)):
            tp1, tp2 = tps[i], tps[j]
            if tp1.pair != tp2.pair:
                continue
            alpha_i = tp1.pair[0]
            dominant = preorder_leq(family, tp1.rho_label, tp2.rho_label,
                                    alpha_i, window) and \
                not preorder_leq(family, tp2.rho_label, tp1.rho_label, alpha_i, window)
            rec = WipeoutPair(tp1.time, tp2.time, tp1.rho_label, tp2.rho_label,
                              tp1.pair, dominant)
            spliced = _splice_excursion(signal, tp1.time, tp1.level)
            if spliced is None:
                rec.skipped = "no earlier attainment of the switching level"
            else:
                alt_trajs = evolve_family(family, spliced)
                full = full_states_at[tp2.time]
                alt = [output_at(tr, tp2.time) for tr in alt_trajs]
                rec.wiped = full == alt
                rec.aggregate_match = bool(np.allclose(
                    _aggregate(family, full), _aggregate(family, alt),
                    rtol=0.0, atol=1e-12))
            report.pairs.append(rec)
    return report


def _check_coordination(family: RelayFamily, trajs, window: Region, viol: List[str]):
    """Empirical check of pre-order-coordinated switching.

    Whenever a member switches out of a state, every member strictly below it
    in that state's pre-order must already hold the target state.
    """
    merged = _merged_events(family, trajs)
    n = len(family.members)
    states = [m.initial_state for m in family.members]
    labels = [m.label for m in family.members]
    i = 0
    while i < len(merged):
        t = merged[i][0]
        group = []
        while i < len(merged) and merged[i][0] == t:
            group.append(merged[i])
            i += 1
        for _, pos, label, fr, to in group:
            states[pos] = to
        for _, pos, label, fr, to in group:
            for q in range(n):
                if q == pos or states[q] == to:
                    continue
                below = preorder_leq(family, labels[q], label, fr, window) and \
                    not preorder_leq(family, label, labels[q], fr, window)
                if below and states[q] == fr:
                    viol.append(
                        f"coordination: {labels[q]!r} below {label!r} in state-{fr} "
                        f"pre-order still at {fr} after t={t}")
                    return


def _splice_excursion(signal: Signal, t_prime: float, level: Optional[float]):
    """Signal with the excursion (a', t') removed, a' = last earlier time at ``level``.

    The removed span is replaced by a plateau at the switching level, which
    keeps times strictly increasing and the path continuous while erasing
    every switching strictly inside the excursion.
    """
    if level is None:
        return None
    times = signal.times
    vals = signal.points[:, 0]
    hits = []
    for k in range(len(times) - 1):
        t0, t1 = times[k], times[k + 1]
        v0, v1 = vals[k], vals[k + 1]
        if t0 >= t_prime - 1e-12:
            break
        if v0 == level:
            hits.append(t0)
        if (v0 - level) * (v1 - level) < 0:
            s = t0 + (level - v0) / (v1 - v0) * (t1 - t0)
            if s < t_prime - 1e-12:
                hits.append(s)
    if not hits:
        return None
    a_prime = max(hits)
    new_t = [t for t in times if t < a_prime - 1e-15]
    new_v = [vals[k] for k in range(len(times)) if times[k] < a_prime - 1e-15]
    new_t.append(a_prime)
    new_v.append(level)
    new_t.append(t_prime)
    new_v.append(level)
    for k in range(len(times)):
        if times[k] > t_prime + 1e-15:
            new_t.append(times[k])
            new_v.append(vals[k])
    return Signal.scalar(new_t, new_v)

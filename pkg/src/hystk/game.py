"""Discrete-time minimax dynamic program with relay-state augmentation.

The value function carries the joint state (profile) of a finite relay
family alongside the continuous state.  The maximizing control doubles as
the relay input: before each backup the profile transition it induces is
applied, and the continuation is evaluated at the switched profile, so a
control on a switching facet pairs the pre-switch profile with the
post-switch value.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .geometry import facet_contains
from .hysteresis import RelayFamily
from .relay import ExitPointUnclassifiedError

MAX_FAMILY_SIZE = 8
MAX_CLAMP_FRACTION = 0.10


class GameError(Exception):
    pass


class GridClampError(GameError):
    pass


Profile = Tuple[int, ...]


def profile_transition(family: RelayFamily, profile: Profile, c1) -> Profile:
    """Switch every member whose current-state facet contains the control value.

    Members whose control sits strictly inside their continuation set keep
    their state; a control on more than one facet of the same member is a
    classification error, mirroring relay evolution.
    """
    c1 = np.atleast_1d(np.asarray(c1, dtype=float))
    out = []
    for m, alpha in zip(family.members, profile):
        hits = [b for (a, b), fac in m.spec.switch_facets.items()
                if a == alpha and facet_contains(fac, c1)]
        if len(hits) > 1:
            raise ExitPointUnclassifiedError(c1, None, hits)
        out.append(hits[0] if hits else alpha)
    return tuple(out)


def profile_switch_set(family: RelayFamily, profile: Profile, target: Profile, c1) -> bool:
    """Membership of c1 in the full-profile switching set S^{profile,target}:
    the intersection over members of S_{alpha_rho, beta_rho}."""
    c1 = np.atleast_1d(np.asarray(c1, dtype=float))
    for m, a, b in zip(family.members, profile, target):
        if a == b:
            return False
        fac = m.spec.switch_facets.get((a, b))
        if fac is None or not facet_contains(fac, c1):
            return False
    return True


@dataclass
class GameSpec:
    """Data of the discrete-time minimax game.

    ``dynamics``/``running_cost`` take (t, y, c1, u2) with u2 = (g_value, c2);
    ``coupling`` maps (t, h_value) to the hysteresis-driven control component,
    where h_value is the family's weighted payload at the current profile.
    """

    dynamics: Callable
    running_cost: Callable
    terminal_cost: Callable
    c1_grid: Sequence
    c2_grid: Sequence
    family: RelayFamily
    coupling: Callable[[float, np.ndarray], float]
    horizon: float
    time_steps: int

    def __post_init__(self):
        if len(self.family.members) > MAX_FAMILY_SIZE:
            raise GameError(
                f"family of {len(self.family.members)} relays exceeds the profile "
                f"cap of {MAX_FAMILY_SIZE}")
        if self.time_steps < 1:
            raise GameError("time_steps must be >= 1")
        if not len(self.c1_grid) or not len(self.c2_grid):
            raise GameError("control grids must be nonempty")

    @property
    def dt(self) -> float:
        return self.horizon / self.time_steps

    def profiles(self) -> List[Profile]:
        state_sets = [[s.index for s in m.spec.states] for m in self.family.members]
        return [tuple(p) for p in itertools.product(*state_sets)]

    def h_value(self, profile: Profile) -> np.ndarray:
        acc = np.zeros(self.family.payload_dim)
        for m, a in zip(self.family.members, profile):
            acc += m.weight * m.spec.state_by_index(a).payload()
        return acc


@dataclass
class SpatialGrid:
    """Rectangular grid over the continuous state; axes[i] strictly increasing."""

    axes: Tuple[np.ndarray, ...]

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        for a in axes:
            if a.ndim != 1 or len(a) < 2 or not np.all(np.diff(a) > 0):
                raise GameError("each grid axis needs >= 2 strictly increasing nodes")
        self.axes = axes

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(len(a) for a in self.axes)

    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    @staticmethod
    def uniform(lo, hi, counts) -> "SpatialGrid":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        counts = np.atleast_1d(np.asarray(counts, dtype=int))
        return SpatialGrid(tuple(np.linspace(a, b, n) for a, b, n in zip(lo, hi, counts)))


@dataclass
class ValueTable:
    """values[k][profile] is the value array over the grid at time layer k."""

    grid: SpatialGrid
    times: np.ndarray
    values: List[Dict[Profile, np.ndarray]]
    clamp_count: int = 0
    backup_count: int = 0

    def value(self, k: int, profile: Profile, x) -> float:
        arr = self.values[k][profile]
        interp = RegularGridInterpolator(self.grid.axes, arr, method="linear",
                                         bounds_error=False, fill_value=None)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        clipped = np.array([np.clip(v, a[0], a[-1]) for v, a in zip(x, self.grid.axes)])
        return float(interp(clipped)[0])


def solve(spec: GameSpec, grid: SpatialGrid) -> ValueTable:
    """Backward max-min recursion over time layers, grid nodes and profiles.

    Continuation states falling off the grid are clamped and counted; more
    than 10% clamped backups abort with an error.
    """
    n_k = spec.time_steps
    dt = spec.dt
    times = np.linspace(0.0, spec.horizon, n_k + 1)
    profiles = spec.profiles()
    nodes = grid.nodes()
    shape = grid.shape

    term = np.array([float(spec.terminal_cost(x)) for x in nodes]).reshape(shape)
    layers: List[Dict[Profile, np.ndarray]] = [dict() for _ in range(n_k + 1)]
    layers[n_k] = {p: term.copy() for p in profiles}

    clamped = 0
    total = 0

    # per-c1 profile transitions and coupling values are layer-independent
    trans: Dict[Tuple[Profile, int], Profile] = {}
    for p in profiles:
        for i1, c1 in enumerate(spec.c1_grid):
            trans[(p, i1)] = profile_transition(spec.family, p, c1)

    for k in range(n_k - 1, -1, -1):
        t_k = float(times[k])
        interps = {p: RegularGridInterpolator(grid.axes, layers[k + 1][p],
                                              method="linear", bounds_error=False,
                                              fill_value=None)
                   for p in profiles}
        for p in profiles:
            out = np.empty(len(nodes))
            for ix, x in enumerate(nodes):
                best = -np.inf
                for i1, c1 in enumerate(spec.c1_grid):
                    p_next = trans[(p, i1)]
                    g_val = spec.coupling(t_k, spec.h_value(p_next))
                    worst = np.inf
                    for c2 in spec.c2_grid:
                        u2 = (g_val, c2)
                        f = np.atleast_1d(np.asarray(
                            spec.dynamics(t_k, x, c1, u2), dtype=float))
                        x_next = x + f * dt
                        total += 1
                        x_cl = np.array([np.clip(v, a[0], a[-1])
                                         for v, a in zip(x_next, grid.axes)])
                        if np.any(x_cl != x_next):
                            clamped += 1
                        cont = float(interps[p_next](x_cl)[0])
                        val = float(spec.running_cost(t_k, x, c1, u2)) * dt + cont
                        if val < worst:
                            worst = val
                    if worst > best:
                        best = worst
                out[ix] = best
            layers[k][p] = out.reshape(shape)
        if total and clamped / total > MAX_CLAMP_FRACTION:
            raise GridClampError(
                f"{clamped}/{total} backups clamped off the grid (> 10%)")
    return ValueTable(grid, times, layers, clamped, total)


@dataclass(frozen=True)
class PolicyEntry:
    c1_index: int
    c2_index: int


def extract_policy(table: ValueTable, spec: GameSpec) -> Dict[Tuple[int, Profile, int], PolicyEntry]:
    """Argmax-argmin controls per (layer, profile, node index); ties break to
    the lowest control-grid index."""
    profiles = spec.profiles()
    nodes = table.grid.nodes()
    dt = spec.dt
    policy: Dict[Tuple[int, Profile, int], PolicyEntry] = {}
    for k in range(spec.time_steps):
        t_k = float(table.times[k])
        interps = {p: RegularGridInterpolator(table.grid.axes, table.values[k + 1][p],
                                              method="linear", bounds_error=False,
                                              fill_value=None)
                   for p in profiles}
        for p in profiles:
            for ix, x in enumerate(nodes):
                best = -np.inf
                best_i1 = 0
                best_i2 = 0
                for i1, c1 in enumerate(spec.c1_grid):
                    p_next = profile_transition(spec.family, p, c1)
                    g_val = spec.coupling(t_k, spec.h_value(p_next))
                    worst = np.inf
                    worst_i2 = 0
                    for i2, c2 in enumerate(spec.c2_grid):
                        u2 = (g_val, c2)
                        f = np.atleast_1d(np.asarray(
                            spec.dynamics(t_k, x, c1, u2), dtype=float))
                        x_next = x + f * dt
                        x_cl = np.array([np.clip(v, a[0], a[-1])
                                         for v, a in zip(x_next, table.grid.axes)])
                        cont = float(interps[p_next](x_cl)[0])
                        val = float(spec.running_cost(t_k, x, c1, u2)) * dt + cont
                        if val < worst:
                            worst = val
                            worst_i2 = i2
                    if worst > best:
                        best = worst
                        best_i1 = i1
                        best_i2 = worst_i2
                policy[(k, p, ix)] = PolicyEntry(best_i1, best_i2)
    return policy

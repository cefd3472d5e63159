"""Open convex regions, boundary facets and piecewise-linear signals.

Regions are finite intersections of open half-spaces ``{x : n.x < c}``.
They model the continuation sets of multi-state relays; boundary facets
model the switching surfaces.  Exit times of piecewise-linear signals are
computed exactly (one linear root per half-space per segment), never by
time stepping.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

# Scale-aware boundary tolerance: x is "on" {n.x = c} iff
# |n.x - c| <= EPS_GEO * (1 + |c|).
EPS_GEO = 1e-9


class GeometryError(Exception):
    pass


class DimensionMismatchError(GeometryError):
    pass


class UnsupportedDimensionError(GeometryError):
    pass


class ExitPreconditionError(GeometryError):
    """Raised when exit_time is asked to start from a point outside the region."""


def _as_vector(x, dim: Optional[int] = None) -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise DimensionMismatchError(f"expected a vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise DimensionMismatchError(f"expected dimension {dim}, got {v.shape[0]}")
    return v


@dataclass(frozen=True)
class HalfSpace:
    """Open half-space ``{x : normal . x < offset}``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = _as_vector(self.normal)
        if not np.linalg.norm(n) > 0.0:
            raise GeometryError("half-space normal must be nonzero")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dim(self) -> int:
        return self.normal.shape[0]

    def margin(self, x) -> float:
        """Signed value n.x - c; negative strictly inside."""
        return float(np.dot(self.normal, _as_vector(x, self.dim))) - self.offset

    def tol(self) -> float:
        return EPS_GEO * (1.0 + abs(self.offset))


@dataclass(frozen=True)
class Region:
    """Open convex region: intersection of open half-spaces.

    A witness point strictly inside certifies nonemptiness at construction.
    An empty half-space list denotes the whole space.
    """

    halfspaces: tuple
    ambient_dim: int
    witness: np.ndarray

    def __post_init__(self):
        hs = tuple(self.halfspaces)
        if self.ambient_dim < 1:
            raise GeometryError("ambient_dim must be positive")
        for h in hs:
            if h.dim != self.ambient_dim:
                raise DimensionMismatchError(
                    f"half-space dim {h.dim} != ambient dim {self.ambient_dim}"
                )
        w = _as_vector(self.witness, self.ambient_dim)
        object.__setattr__(self, "halfspaces", hs)
        object.__setattr__(self, "witness", w)
        if not contains(self, w):
            raise GeometryError(f"witness point {w} is not strictly inside the region")

    @staticmethod
    def whole_space(dim: int, witness=None) -> "Region":
        w = np.zeros(dim) if witness is None else witness
        return Region((), dim, w)

    @staticmethod
    def interval(lo: float, hi: float) -> "Region":
        """Open 1-D interval (lo, hi); lo/hi may be -inf/+inf."""
        hs = []
        if np.isfinite(hi):
            hs.append(HalfSpace(np.array([1.0]), hi))
        if np.isfinite(lo):
            hs.append(HalfSpace(np.array([-1.0]), -lo))
        if np.isfinite(lo) and np.isfinite(hi):
            w = 0.5 * (lo + hi)
        elif np.isfinite(lo):
            w = lo + 1.0
        elif np.isfinite(hi):
            w = hi - 1.0
        else:
            w = 0.0
        return Region(tuple(hs), 1, np.array([w]))

    @staticmethod
    def from_inequalities(rows: Sequence, offsets: Sequence[float], witness) -> "Region":
        """Region {x : rows[i].x < offsets[i] for all i}."""
        hs = tuple(HalfSpace(np.asarray(r, dtype=float), c) for r, c in zip(rows, offsets))
        dim = hs[0].dim if hs else len(_as_vector(witness))
        return Region(hs, dim, witness)

    def margins(self, x) -> np.ndarray:
        v = _as_vector(x, self.ambient_dim)
        if not self.halfspaces:
            return np.empty(0)
        return np.array([h.margin(v) for h in self.halfspaces])

    def interval_bounds(self) -> tuple:
        """(lo, hi) of a 1-D region."""
        if self.ambient_dim != 1:
            raise UnsupportedDimensionError("interval_bounds needs a 1-D region")
        lo, hi = -np.inf, np.inf
        for h in self.halfspaces:
            n = float(h.normal[0])
            bound = h.offset / n
            if n > 0:
                hi = min(hi, bound)
            else:
                lo = max(lo, bound)
        return lo, hi


def contains(region: Region, x) -> bool:
    """Strict membership: n.x < c for every half-space, outside the boundary band."""
    v = _as_vector(x, region.ambient_dim)
    for h in region.halfspaces:
        if h.margin(v) > -h.tol():
            return False
    return True


def contains_batch(region: Region, pts: np.ndarray) -> np.ndarray:
    """Vectorized strict membership for an (m, dim) array of points."""
    pts = np.asarray(pts, dtype=float)
    ok = np.ones(len(pts), dtype=bool)
    for h in region.halfspaces:
        ok &= (pts @ h.normal - h.offset) <= -h.tol()
    return ok


def contains_closure(region: Region, x) -> bool:
    """Membership in the closure, with the boundary band counted in."""
    v = _as_vector(x, region.ambient_dim)
    for h in region.halfspaces:
        if h.margin(v) > h.tol():
            return False
    return True


def on_boundary(region: Region, x) -> bool:
    """True iff x is in the closure and within tolerance of some bounding hyperplane."""
    v = _as_vector(x, region.ambient_dim)
    if not contains_closure(region, v):
        return False
    return any(abs(h.margin(v)) <= h.tol() for h in region.halfspaces)


@dataclass(frozen=True)
class BoundaryFacet:
    """Part of a region's boundary hyperplane, clipped and with open/closed ends.

    The facet lies on the hyperplane of ``region.halfspaces[supporting_index]``
    and consists of the points of that hyperplane satisfying the clip
    constraints.  ``closure_flags[i]`` marks clip constraint i as closed
    (boundary point included) or open (excluded); this is what distinguishes
    a half-open segment like [D A) from (D A).
    """

    region: Region
    supporting_index: int
    clip: Optional[Region] = None
    closure_flags: tuple = ()

    def __post_init__(self):
        if not (0 <= self.supporting_index < len(self.region.halfspaces)):
            raise GeometryError("supporting_index out of range")
        if self.clip is not None:
            if self.clip.ambient_dim != self.region.ambient_dim:
                raise DimensionMismatchError("clip dimension mismatch")
            flags = tuple(self.closure_flags)
            if len(flags) != len(self.clip.halfspaces):
                raise GeometryError("one closure flag per clip constraint required")
            object.__setattr__(self, "closure_flags", flags)

    @property
    def hyperplane(self) -> HalfSpace:
        return self.region.halfspaces[self.supporting_index]

    @property
    def dim(self) -> int:
        return self.region.ambient_dim


def facet_contains(facet: BoundaryFacet, x) -> bool:
    """True iff x is on the supporting hyperplane and inside the clip.

    Closed clip constraints admit their boundary (within tolerance), open
    ones exclude a tolerance band around it.
    """
    v = _as_vector(x, facet.dim)
    h = facet.hyperplane
    if abs(h.margin(v)) > h.tol():
        return False
    if facet.clip is None:
        return True
    for hs, closed in zip(facet.clip.halfspaces, facet.closure_flags):
        m = hs.margin(v)
        if closed:
            if m > hs.tol():
                return False
        else:
            if m > -hs.tol():
                return False
    return True


@dataclass(frozen=True)
class Signal:
    """Piecewise-linear sampled path t -> u(t) in R^n."""

    times: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.times, dtype=float))
        p = np.asarray(self.points, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        if t.ndim != 1 or p.ndim != 2 or len(t) != len(p):
            raise GeometryError("times and points must be matching 1-D/2-D arrays")
        if len(t) < 1:
            raise GeometryError("signal needs at least one sample")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise GeometryError("signal times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "points", p)

    @staticmethod
    def scalar(times, values) -> "Signal":
        return Signal(np.asarray(times, dtype=float), np.asarray(values, dtype=float))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def value_at(self, t: float) -> np.ndarray:
        t = float(t)
        if t < self.times[0] - EPS_GEO or t > self.times[-1] + EPS_GEO:
            raise GeometryError(f"time {t} outside signal domain")
        out = np.empty(self.dim)
        for j in range(self.dim):
            out[j] = np.interp(t, self.times, self.points[:, j])
        return out

    def segment_index_at(self, t: float) -> int:
        """Index k with times[k] <= t < times[k+1]; the last segment for t = t_end."""
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return min(max(k, 0), max(len(self.times) - 2, 0))

    def time_change(self, phi_times, phi_values) -> "Signal":
        """Signal u(phi(s)) for a piecewise-linear increasing phi given by samples."""
        phi_times = np.asarray(phi_times, dtype=float)
        phi_values = np.asarray(phi_values, dtype=float)
        pts = np.stack([self.value_at(v) for v in phi_values])
        return Signal(phi_times, pts)


def exit_time(signal: Signal, region: Region, t: float):
    """First time s > t with signal(s) outside the open region, with the exit point.

    Computed exactly per linear segment: the earliest root of
    ``n.(p + lam*d) = c`` over all half-spaces.  Returns None when the signal
    never leaves the region before its final time.

    A start point on the boundary counts as inside only when the signal
    immediately moves strictly inward; otherwise the exit time is t itself.
    """
    t = float(t)
    if t < signal.t_start - EPS_GEO or t > signal.t_end + EPS_GEO:
        raise GeometryError(f"start time {t} outside signal domain")
    x0 = signal.value_at(t)
    margins = region.margins(x0)
    tols = np.array([h.tol() for h in region.halfspaces]) if region.halfspaces else np.empty(0)

    if margins.size and np.any(margins > tols):
        raise ExitPreconditionError(f"signal({t}) = {x0} is not in the region")

    active = margins.size and np.any(np.abs(margins) <= tols)
    if active:
        if t >= signal.t_end - EPS_GEO:
            return None
        k = signal.segment_index_at(t)
        dt_seg = signal.times[k + 1] - signal.times[k]
        d = (signal.points[k + 1] - signal.points[k]) / dt_seg
        for h, m in zip(region.halfspaces, margins):
            if abs(m) <= h.tol() and float(np.dot(h.normal, d)) >= 0.0:
                return t, x0
        # moving strictly inward through every active facet: treat as inside

    n_seg = len(signal.times) - 1
    if n_seg == 0:
        return None
    k0 = signal.segment_index_at(t)
    for k in range(k0, n_seg):
        a = max(t, float(signal.times[k]))
        b = float(signal.times[k + 1])
        if b <= a:
            continue
        pa = signal.value_at(a)
        dt_seg = signal.times[k + 1] - signal.times[k]
        d = (signal.points[k + 1] - signal.points[k]) / dt_seg
        best = None
        for h in region.halfspaces:
            slope = float(np.dot(h.normal, d))
            if slope <= 0.0:
                continue
            m_a = h.margin(pa)
            if m_a >= 0.0:
                # numerically at/over the plane already: exit immediately
                s_star = a
            else:
                s_star = a - m_a / slope
            if a < s_star <= b or (s_star == a and s_star > t):
                if best is None or s_star < best:
                    best = s_star
        if best is not None:
            return best, signal.value_at(best)
    return None


def distance_to_facet(x, facet: BoundaryFacet) -> float:
    """Euclidean distance from x to the closure of the facet.

    Exact for 1-D facets (points), unclipped hyperplanes in any dimension,
    and clipped facets in 2-D (segments/rays).
    """
    v = _as_vector(x, facet.dim)
    h = facet.hyperplane
    nrm = np.linalg.norm(h.normal)
    if facet.clip is None or not facet.clip.halfspaces:
        return abs(h.margin(v)) / nrm
    if facet.dim == 1:
        p = np.array([h.offset / float(h.normal[0])])
        if contains_closure(facet.clip, p):
            return abs(float(v[0] - p[0]))
        return np.inf
    if facet.dim != 2:
        raise UnsupportedDimensionError("clipped facet distance supported in 1-D/2-D only")
    # parameterize the supporting line as q0 + s*dvec
    n = h.normal / nrm
    q0 = n * (h.offset / nrm)
    dvec = np.array([-n[1], n[0]])
    lo, hi = -np.inf, np.inf
    for hs in facet.clip.halfspaces:
        a = float(np.dot(hs.normal, dvec))
        b = hs.offset - float(np.dot(hs.normal, q0))
        if abs(a) <= EPS_GEO * np.linalg.norm(hs.normal):
            if b < -hs.tol():
                return np.inf  # line misses the clip entirely
            continue
        bound = b / a
        if a > 0:
            hi = min(hi, bound)
        else:
            lo = max(lo, bound)
    if lo > hi:
        return np.inf
    s = float(np.dot(v - q0, dvec))
    s = min(max(s, lo), hi)
    return float(np.linalg.norm(v - (q0 + s * dvec)))


def facet_endpoints_2d(facet: BoundaryFacet) -> tuple:
    """Endpoints of a clipped 2-D facet's closure; entries may be None if unbounded."""
    h = facet.hyperplane
    nrm = np.linalg.norm(h.normal)
    n = h.normal / nrm
    q0 = n * (h.offset / nrm)
    dvec = np.array([-n[1], n[0]])
    lo, hi = -np.inf, np.inf
    if facet.clip is not None:
        for hs in facet.clip.halfspaces:
            a = float(np.dot(hs.normal, dvec))
            b = hs.offset - float(np.dot(hs.normal, q0))
            if abs(a) <= EPS_GEO * np.linalg.norm(hs.normal):
                continue
            bound = b / a
            if a > 0:
                hi = min(hi, bound)
            else:
                lo = max(lo, bound)
    p_lo = q0 + lo * dvec if np.isfinite(lo) else None
    p_hi = q0 + hi * dvec if np.isfinite(hi) else None
    return p_lo, p_hi


def sample_on_facet(facet: BoundaryFacet, rng: np.random.Generator, count: int) -> list:
    """Points on the facet (interior of its closure), used by validation checks."""
    out = []
    if facet.dim == 1:
        h = facet.hyperplane
        p = np.array([h.offset / float(h.normal[0])])
        if facet.clip is None or contains_closure(facet.clip, p):
            out.append(p)
        return out
    if facet.dim != 2:
        raise UnsupportedDimensionError("facet sampling supported in 1-D/2-D only")
    p_lo, p_hi = facet_endpoints_2d(facet)
    if p_lo is None or p_hi is None:
        return out
    for lam in rng.uniform(1e-6, 1.0 - 1e-6, size=count):
        out.append(p_lo + lam * (p_hi - p_lo))
    return out


# ---------------------------------------------------------------------------
# exact subset testing in dimensions 1 and 2 (vertex/ray enumeration, no LP)


def _constraints(*regions: Region):
    rows, offs = [], []
    for r in regions:
        for h in r.halfspaces:
            rows.append(h.normal)
            offs.append(h.offset)
    if rows:
        return np.vstack(rows), np.asarray(offs)
    return np.empty((0, regions[0].ambient_dim)), np.empty(0)


def _feasible_vertices_2d(N: np.ndarray, c: np.ndarray) -> list:
    verts = []
    m = N.shape[0]
    for i in range(m):
        for j in range(i + 1, m):
            A = np.vstack([N[i], N[j]])
            if abs(np.linalg.det(A)) <= 1e-12 * (np.linalg.norm(N[i]) * np.linalg.norm(N[j])):
                continue
            x = np.linalg.solve(A, np.array([c[i], c[j]]))
            tol = EPS_GEO * (1.0 + np.abs(c)) + 1e-12
            if np.all(N @ x <= c + tol):
                verts.append(x)
    return verts


def _extreme_rays_2d(N: np.ndarray) -> list:
    """Extreme rays of the recession cone {d : N d <= 0} of a 2-D polyhedron."""
    if N.shape[0] == 0:
        return [np.array([1.0, 0.0]), np.array([-1.0, 0.0]),
                np.array([0.0, 1.0]), np.array([0.0, -1.0])]
    rays = []
    cands = []
    for n in N:
        n = n / np.linalg.norm(n)
        cands.append(np.array([-n[1], n[0]]))
        cands.append(np.array([n[1], -n[0]]))
    for d in cands:
        if np.all(N @ d <= 1e-12):
            if not any(np.linalg.norm(d - r) < 1e-9 for r in rays):
                rays.append(d)
    return rays


def _interior_point_2d(N: np.ndarray, c: np.ndarray, probes: list):
    """A strictly feasible point of {Nx < c} or None if the open set is empty.

    Candidates: supplied probe points, the centroid of the feasible vertices
    (interior for bounded full-dimensional polytopes), and centroids pushed
    along recession rays for unbounded ones.
    """
    verts = _feasible_vertices_2d(N, c)
    cands = list(probes)
    if verts:
        centroid = np.mean(verts, axis=0)
        cands.append(centroid)
        for d in _extreme_rays_2d(N):
            cands.append(centroid + d)
        if len(verts) == 1:
            for d in _extreme_rays_2d(N):
                cands.append(verts[0] + 0.5 * d)
    elif N.shape[0] == 0:
        cands.append(np.zeros(2))
    else:
        for d in _extreme_rays_2d(N):
            cands.append(d * (1.0 + np.max(np.abs(c), initial=0.0)))
    tol = EPS_GEO * (1.0 + np.abs(c)) if len(c) else np.empty(0)
    for x in cands:
        if N.shape[0] == 0 or np.all(N @ x < c - tol):
            return x
    return None


def region_subset_within(r1: Region, r2: Region, window: Region) -> bool:
    """Exact test of (r1 ∩ window) ⊆ (r2 ∩ window), dimensions 1 and 2 only.

    1-D reduces to interval containment.  2-D enumerates the vertices of the
    clipped polytope closure(r1 ∩ window) and its recession rays and checks
    them against closure(r2 ∩ window); empty left-hand sides are subsets.
    """
    if not (r1.ambient_dim == r2.ambient_dim == window.ambient_dim):
        raise DimensionMismatchError("subset test needs matching dimensions")
    dim = r1.ambient_dim
    if dim > 2:
        raise UnsupportedDimensionError("subset testing restricted to dimensions 1 and 2")

    if dim == 1:
        lo1, hi1 = _clipped_bounds_1d(r1, window)
        lo2, hi2 = _clipped_bounds_1d(r2, window)
        if lo1 >= hi1:  # empty open interval
            return True
        finite = [abs(v) for v in (lo1, hi1, lo2, hi2) if np.isfinite(v)]
        tol = EPS_GEO * (1.0 + (max(finite) if finite else 1.0))
        return lo2 <= lo1 + tol and hi1 <= hi2 + tol

    N1, c1 = _constraints(r1, window)
    N2, c2 = _constraints(r2, window)
    interior = _interior_point_2d(N1, c1, [r1.witness, window.witness])
    if interior is None:
        return True
    verts = _feasible_vertices_2d(N1, c1)
    tol2 = EPS_GEO * (1.0 + np.abs(c2)) + 1e-12 if len(c2) else np.empty(0)

    def in_closure2(x):
        return N2.shape[0] == 0 or np.all(N2 @ x <= c2 + tol2)

    for v in verts:
        if not in_closure2(v):
            return False
    if not in_closure2(interior):
        return False
    # unbounded parts: every recession ray of the left set must recede in the right set
    for d in _extreme_rays_2d(N1):
        far = interior + d * (1.0 + 10.0 * (np.max(np.abs(c1), initial=1.0)))
        inside_left = N1.shape[0] == 0 or np.all(
            N1 @ far <= c1 + EPS_GEO * (1.0 + np.abs(c1)))
        if inside_left and not in_closure2(far):
            return False
        if inside_left and N2.shape[0] and np.any(N2 @ d > 1e-12):
            return False
    return True


def _clipped_bounds_1d(r: Region, window: Region) -> tuple:
    lo1, hi1 = r.interval_bounds()
    lo2, hi2 = window.interval_bounds()
    return max(lo1, lo2), min(hi1, hi2)


def region_vertices(region: Region, extra: Optional[Region] = None) -> list:
    """Vertices of closure(region [∩ extra]) in dimensions 1 and 2."""
    if region.ambient_dim == 1:
        regions = (region,) if extra is None else (region, extra)
        los, his = zip(*(r.interval_bounds() for r in regions))
        lo, hi = max(los), min(his)
        out = []
        if np.isfinite(lo):
            out.append(np.array([lo]))
        if np.isfinite(hi) and hi >= lo:
            out.append(np.array([hi]))
        return out
    if region.ambient_dim != 2:
        raise UnsupportedDimensionError("vertex enumeration restricted to dimensions 1 and 2")
    N, c = _constraints(region) if extra is None else _constraints(region, extra)
    return _feasible_vertices_2d(N, c)


def bounding_box(regions: Sequence[Region], pad: float = 1.0) -> tuple:
    """Finite (lo, hi) corners covering all finite vertices/witnesses, padded.

    Used by Monte-Carlo checks on possibly unbounded regions; the box derives
    from the finite data (offsets, witnesses, vertices).
    """
    dim = regions[0].ambient_dim
    pts = []
    scale = 1.0
    for r in regions:
        pts.append(r.witness)
        for h in r.halfspaces:
            scale = max(scale, abs(h.offset) / max(np.linalg.norm(h.normal), 1e-12))
        if dim <= 2:
            try:
                pts.extend(region_vertices(r))
            except UnsupportedDimensionError:
                pass
    pts = np.array([p for p in pts if np.all(np.isfinite(p))])
    lo = pts.min(axis=0) - pad * (1.0 + scale)
    hi = pts.max(axis=0) + pad * (1.0 + scale)
    return lo, hi

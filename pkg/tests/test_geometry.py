import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hystk.geometry import (
    BoundaryFacet,
    ExitPreconditionError,
    HalfSpace,
    Region,
    Signal,
    bounding_box,
    contains,
    contains_batch,
    contains_closure,
    distance_to_facet,
    exit_time,
    facet_contains,
    region_subset_within,
)
from hystk.relay import triangle_relay


def test_halfspace_rejects_zero_normal():
    with pytest.raises(Exception):
        HalfSpace(np.zeros(2), 1.0)


def test_region_requires_interior_witness():
    with pytest.raises(Exception):
        Region((HalfSpace(np.array([1.0]), 0.0),), 1, np.array([1.0]))


class TestContains:
    def test_strictly_inside(self):
        c = Region.interval(-np.inf, 1.0)
        assert contains(c, [0.0])

    def test_boundary_point_excluded(self):
        c = Region.interval(-np.inf, 1.0)
        assert not contains(c, [1.0])
        assert contains_closure(c, [1.0])

    def test_triangle_interior(self):
        omega = Region.from_inequalities(
            [[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]], [0.0, 0.0, 1.0], [0.25, 0.25])
        assert contains(omega, [0.25, 0.25])

    def test_dimension_mismatch(self):
        c = Region.interval(0.0, 1.0)
        with pytest.raises(Exception):
            contains(c, [0.5, 0.5])

    def test_batch_matches_scalar(self):
        c = Region.from_inequalities([[1.0, 1.0], [-1.0, 0.0]], [1.0, 0.0], [0.3, 0.3])
        rng = np.random.default_rng(0)
        pts = rng.uniform(-1, 2, size=(200, 2))
        batch = contains_batch(c, pts)
        assert all(bool(b) == contains(c, p) for b, p in zip(batch, pts))


class TestExitTime:
    def test_linear_crossing(self):
        sig = Signal.scalar([0.0, 2.0], [0.0, 2.0])
        c = Region.interval(-np.inf, 1.0)
        t, x = exit_time(sig, c, 0.0)
        assert t == 1.0
        assert x[0] == 1.0

    def test_constant_inside_never_exits(self):
        sig = Signal.scalar([0.0, 5.0], [0.2, 0.2])
        assert exit_time(sig, Region.interval(-np.inf, 1.0), 0.0) is None

    def test_2d_diagonal_crossing_vs_dense_oracle(self):
        sig = Signal(np.array([0.0, 1.0]), np.array([[0.1, 0.1], [0.6, 0.6]]))
        region = Region.from_inequalities([[1.0, 1.0]], [1.0], [0.1, 0.1])
        t, x = exit_time(sig, region, 0.0)
        assert np.allclose(x, [0.5, 0.5], atol=1e-12)
        # dense-sampling oracle at step 1e-5
        ts = np.arange(0.0, 1.0, 1e-5)
        pts = np.column_stack([0.1 + 0.5 * ts, 0.1 + 0.5 * ts])
        outside = np.nonzero(pts.sum(axis=1) >= 1.0)[0]
        assert abs(t - ts[outside[0]]) < 1e-4

    def test_precondition_violation(self):
        sig = Signal.scalar([0.0, 1.0], [5.0, 6.0])
        with pytest.raises(ExitPreconditionError):
            exit_time(sig, Region.interval(-np.inf, 1.0), 0.0)

    def test_boundary_start_moving_inward_counts_inside(self):
        sig = Signal.scalar([0.0, 1.0, 2.0], [1.0, 0.0, 2.0])
        c = Region.interval(-np.inf, 1.0)
        t, x = exit_time(sig, c, 0.0)
        assert t == pytest.approx(1.5)

    def test_boundary_start_moving_outward_exits_immediately(self):
        sig = Signal.scalar([0.0, 1.0], [1.0, 2.0])
        c = Region.interval(-np.inf, 1.0)
        t, x = exit_time(sig, c, 0.0)
        assert t == 0.0 and x[0] == 1.0

    def test_exit_point_on_boundary_invariant(self):
        rng = np.random.default_rng(42)
        region = Region.from_inequalities(
            [[1.0, 0.3], [-0.5, 1.0]], [1.0, 0.8], [0.0, 0.0])
        for _ in range(50):
            pts = np.vstack([[0.0, 0.0], rng.uniform(-4, 4, size=2)])
            sig = Signal(np.array([0.0, 1.0]), pts)
            hit = exit_time(sig, region, 0.0)
            if hit is None:
                continue
            _, x = hit
            margins = region.margins(x)
            tols = np.array([h.tol() for h in region.halfspaces])
            assert np.all(margins <= tols)
            assert np.any(np.abs(margins) <= tols)

    @settings(max_examples=60, deadline=None, derandomize=True)
    @given(st.floats(0.01, 0.99))
    def test_exit_time_monotone_in_start(self, frac):
        sig = Signal.scalar([0.0, 1.0, 2.0, 3.0], [0.0, 0.8, 0.2, 1.5])
        c = Region.interval(-np.inf, 1.0)
        t_exit, _ = exit_time(sig, c, 0.0)
        t2 = frac * t_exit
        hit = exit_time(sig, c, t2)
        assert hit is not None and hit[0] >= t_exit - 1e-12


class TestFacets:
    def test_point_facet_membership(self):
        c = Region.interval(-np.inf, 1.0)
        fac = BoundaryFacet(c, 0)
        assert facet_contains(fac, [1.0])
        assert not facet_contains(fac, [0.999999])

    def test_half_open_segment_endpoints(self):
        tri = triangle_relay()
        s12 = tri.switch_facets[(1, 2)]
        d1 = [0.3, 0.25]
        assert facet_contains(s12, d1)  # closed end included
        s13 = tri.switch_facets[(1, 3)]
        assert not facet_contains(s13, d1)  # open end excluded
        assert facet_contains(s13, [0.2, 0.35])

    def test_distance_point_facet_1d(self):
        c = Region.interval(-np.inf, 1.0)
        fac = BoundaryFacet(c, 0)
        assert distance_to_facet([0.0], fac) == pytest.approx(1.0)
        assert distance_to_facet([1.0], fac) == 0.0

    def test_distance_point_segment_2d(self):
        # facet = the segment x = 1, y in [0, 1]
        region = Region.from_inequalities([[1.0, 0.0]], [1.0], [0.0, 0.5])
        clip = Region.from_inequalities([[0.0, -1.0], [0.0, 1.0]], [0.0, 1.0],
                                        [5.0, 0.5])
        fac = BoundaryFacet(region, 0, clip, (True, True))
        assert distance_to_facet([0.0, 0.0], fac) == pytest.approx(1.0)
        assert distance_to_facet([0.0, 2.0], fac) == pytest.approx(np.hypot(1.0, 1.0))
        assert distance_to_facet([1.0, 0.5], fac) == pytest.approx(0.0, abs=1e-12)

    def test_distance_zero_iff_on_closure(self):
        tri = triangle_relay()
        s12 = tri.switch_facets[(1, 2)]
        # open endpoint of S_12 sits on the closure: distance 0, membership false
        p_a = [0.55, 0.0]
        assert distance_to_facet(p_a, s12) == pytest.approx(0.0, abs=1e-9)
        assert not facet_contains(s12, p_a)
        assert distance_to_facet([0.1, 0.1], s12) > 0.0


class TestSubset:
    def test_interval_containment(self):
        r1 = Region.interval(-np.inf, 1.0)
        r2 = Region.interval(-np.inf, 2.0)
        w = Region.interval(0.0, 3.0)
        assert region_subset_within(r1, r2, w)
        assert not region_subset_within(r2, r1, w)

    def test_window_clipping_makes_equal(self):
        r1 = Region.interval(-np.inf, 2.0)
        r2 = Region.interval(-np.inf, 1.0)
        w = Region.interval(0.0, 0.5)
        assert region_subset_within(r1, r2, w)

    def test_2d_triangle_in_halfplane(self):
        tri = Region.from_inequalities(
            [[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]], [0.0, 0.0, 1.0], [0.25, 0.25])
        half = Region.from_inequalities([[1.0, 1.0]], [2.0], [0.0, 0.0])
        w = Region.from_inequalities(
            [[-1.0, 0.0], [0.0, -1.0], [1.0, 0.0], [0.0, 1.0]],
            [1.0, 1.0, 2.0, 2.0], [0.0, 0.0])
        assert region_subset_within(tri, half, w)
        assert not region_subset_within(half, tri, w)

    def test_unsupported_dimension(self):
        r = Region.whole_space(3)
        with pytest.raises(Exception):
            region_subset_within(r, r, r)

    @settings(max_examples=40, deadline=None, derandomize=True)
    @given(st.integers(0, 10 ** 6))
    def test_agrees_with_monte_carlo(self, seed):
        rng = np.random.default_rng(seed)
        def rand_region():
            n_hs = rng.integers(1, 4)
            rows, offs = [], []
            for _ in range(n_hs):
                v = rng.normal(size=2)
                v /= np.linalg.norm(v)
                rows.append(v)
                offs.append(rng.uniform(0.3, 2.0))
            try:
                return Region.from_inequalities(rows, offs, [0.0, 0.0])
            except Exception:
                return None
        r1, r2 = rand_region(), rand_region()
        if r1 is None or r2 is None:
            return
        w = Region.from_inequalities(
            [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
            [2.0, 2.0, 2.0, 2.0], [0.0, 0.0])
        verdict = region_subset_within(r1, r2, w)
        pts = rng.uniform(-2, 2, size=(10 ** 4, 2))
        in1 = contains_batch(r1, pts) & contains_batch(w, pts)
        in2 = contains_batch(r2, pts) & contains_batch(w, pts)
        mc_subset = not np.any(in1 & ~in2)
        assert verdict == mc_subset


def test_signal_validation():
    with pytest.raises(Exception):
        Signal.scalar([0.0, 0.0], [1.0, 2.0])
    with pytest.raises(Exception):
        Signal.scalar([], [])


def test_signal_value_interpolation():
    sig = Signal(np.array([0.0, 1.0]), np.array([[0.0, 2.0], [1.0, 0.0]]))
    assert np.allclose(sig.value_at(0.5), [0.5, 1.0])


def test_bounding_box_covers_vertices():
    tri = Region.from_inequalities(
        [[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]], [0.0, 0.0, 1.0], [0.25, 0.25])
    lo, hi = bounding_box([tri])
    assert np.all(lo < 0.0) and np.all(hi > 1.0)

import numpy as np
import pytest

from hystk.geometry import Region, Signal
from hystk.hysteresis import (
    FamilyError,
    MemberError,
    analyze_monotropy,
    apply,
    check_local_wipeout,
    evolve_family,
    monotropy_distance,
    preisach_family,
    preisach_grid,
    preorder_leq,
)
from hystk.relay import output_at

from oracles import classic_final_state, staircase_reduce


class TestPreisachFamily:
    def test_single_member(self):
        fam = preisach_family([(1.0, -1.0, 1.0, -1)])
        assert len(fam.members) == 1
        assert fam.members[0].spec.classic_thresholds == (1.0, -1.0)

    def test_rejects_equal_thresholds(self):
        with pytest.raises(FamilyError):
            preisach_family([(0.0, 0.0, 1.0, -1)])

    def test_rejects_bad_initial(self):
        with pytest.raises(FamilyError):
            preisach_family([(1.0, -1.0, 1.0, 2)])

    def test_grid_10_gives_45_members(self):
        fam = preisach_grid(10, -1.0, 1.0)
        assert len(fam.members) == 45

    def test_rejects_nonpositive_weight(self):
        with pytest.raises(FamilyError):
            preisach_family([(1.0, -1.0, 0.0, -1)])


class TestApply:
    def test_constant_signal_constant_output(self):
        fam = preisach_family([(0.5, -0.5, 0.5, -1), (1.0, -1.0, 0.5, -1)])
        sig = Signal.scalar([0.0, 2.0], [0.0, 0.0])
        out = apply(fam, sig)
        assert np.allclose(out.values, -1.0)

    def test_ramp_steps_through_both_thresholds(self):
        fam = preisach_family([(0.5, -0.5, 0.5, -1), (1.0, -1.0, 0.5, -1)])
        sig = Signal.scalar([0.0, 1.0], [0.0, 1.5])
        out = apply(fam, sig)
        assert np.allclose(out.values.ravel(), [-1.0, 0.0, 1.0])
        assert out.times[1] == pytest.approx(1.0 / 3.0)
        assert out.times[2] == pytest.approx(2.0 / 3.0)

    def test_single_member_scales_with_weight(self):
        sig = Signal.scalar([0.0, 1.0, 2.0], [0.0, 1.5, -1.5])
        out1 = apply(preisach_family([(1.0, -1.0, 1.0, -1)]), sig)
        out3 = apply(preisach_family([(1.0, -1.0, 3.0, -1)]), sig)
        assert np.allclose(out3.values, 3.0 * out1.values)

    def test_linearity_in_measure(self):
        rows = [(0.4, -0.2, 0.7, -1), (0.9, -0.6, 1.3, -1)]
        lam = 2.5
        scaled = [(r1, r2, lam * w, init) for r1, r2, w, init in rows]
        sig = Signal.scalar([0.0, 1.0, 2.0, 3.0], [0.0, 1.2, -1.0, 0.8])
        out = apply(preisach_family(rows), sig)
        out_l = apply(preisach_family(scaled), sig)
        assert np.allclose(out_l.values, lam * out.values)
        assert np.array_equal(out_l.times, out.times)

    def test_member_errors_carry_label(self):
        fam = preisach_family([(0.5, -0.5, 1.0, -1)])
        bad = Signal.scalar([0.0, 1.0], [2.0, 3.0])  # incompatible with -1
        with pytest.raises(MemberError) as exc:
            evolve_family(fam, bad)
        assert "r000" in str(exc.value)

    def test_value_at_right_continuous(self):
        fam = preisach_family([(0.5, -0.5, 1.0, -1)])
        sig = Signal.scalar([0.0, 1.0], [0.0, 1.0])
        out = apply(fam, sig)
        t_switch = out.times[1]
        assert out.value_at(t_switch)[0] == 1.0
        assert out.value_at(t_switch - 1e-9)[0] == -1.0

    def test_output_is_weighted_state_payload_sum(self):
        fam = preisach_family([(0.4, -0.2, 0.7, -1), (0.9, -0.6, 1.3, -1)])
        sig = Signal.scalar([0.0, 1.0, 2.0, 3.0], [0.0, 1.2, -1.0, 0.8])
        out = apply(fam, sig)
        trajs = evolve_family(fam, sig)
        rng = np.random.default_rng(1)
        for t in rng.uniform(0.0, 3.0, size=20):
            ref = sum(m.weight * m.spec.state_by_index(output_at(tr, t)).payload()
                      for m, tr in zip(fam.members, trajs))
            assert np.allclose(out.value_at(t), ref)

    def test_vector_payloads(self):
        from hystk.hysteresis import FamilyMember, RelayFamily
        from hystk.relay import classic_relay

        spec = classic_relay(0.5, -0.5,
                             payload_minus=np.array([1.0, 0.0]),
                             payload_plus=np.array([0.0, 1.0]))
        fam = RelayFamily([FamilyMember("v", spec, 2.0, 0)])
        sig = Signal.scalar([0.0, 1.0], [0.0, 1.0])
        out = apply(fam, sig)
        assert out.values.shape[1] == 2
        assert np.allclose(out.values[0], [2.0, 0.0])
        assert np.allclose(out.values[-1], [0.0, 2.0])


class TestMonotropyDistance:
    def test_classic_midpoint(self):
        fam = preisach_family([(1.0, -1.0, 1.0, -1)])
        assert monotropy_distance(fam, [0.0]) == pytest.approx(1.0)

    def test_on_threshold(self):
        fam = preisach_family([(1.0, -1.0, 1.0, -1)])
        assert monotropy_distance(fam, [1.0]) == 0.0

    def test_triangle_centroid_positive(self):
        from hystk.hysteresis import FamilyMember, RelayFamily
        from hystk.relay import triangle_relay

        fam = RelayFamily([FamilyMember("tri", triangle_relay(), 1.0, 2)])
        # crossing point of the three threshold lines' ambiguity strips
        d = monotropy_distance(fam, [0.3, 0.28])
        assert d > 0.0


class TestAnalyzeMonotropy:
    def test_no_events_single_interval(self):
        fam = preisach_family([(1.0, -1.0, 1.0, -1)])
        sig = Signal.scalar([0.0, 4.0], [0.0, 0.5])
        rep = analyze_monotropy(fam, sig)
        assert rep.transition_points == []
        assert rep.intervals == [(0.0, 4.0, None)]

    def test_direction_flip_is_transition_point(self):
        fam = preisach_family([(0.5, 0.2, 1.0, -1), (0.8, 0.6, 1.0, -1)])
        sig = Signal.scalar([0.0, 1.0, 2.0], [0.0, 1.0, 0.0])
        rep = analyze_monotropy(fam, sig)
        assert len(rep.transition_points) == 1
        tp = rep.transition_points[0]
        assert tp.pair == (1, 0)
        assert tp.level == pytest.approx(0.6)

    def test_intervals_partition_domain(self):
        fam = preisach_family([(0.5, 0.2, 1.0, -1), (0.8, 0.6, 1.0, -1)])
        sig = Signal.scalar([0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 0.1, 1.0])
        rep = analyze_monotropy(fam, sig)
        bounds = [rep.t_start] + [tp.time for tp in rep.transition_points] + [rep.t_end]
        assert [iv[:2] for iv in rep.intervals] == \
               [(a, b) for a, b in zip(bounds, bounds[1:])]

    def test_positive_distance_implies_inside_interval(self):
        rng = np.random.default_rng(7)
        fam = preisach_grid(6, -1.0, 1.0, start_value=-1.5)
        sig = Signal.scalar([0.0, 1.0, 2.0, 3.0, 4.0],
                            [-1.5, 1.2, -0.8, 0.9, -1.2])
        rep = analyze_monotropy(fam, sig)
        tp_times = np.array([tp.time for tp in rep.transition_points])
        for _ in range(100):
            t = rng.uniform(0.0, 4.0)
            if monotropy_distance(fam, sig.value_at(t)) > 0.0:
                if tp_times.size:
                    assert np.abs(tp_times - t).min() > 0.0
                assert any(a <= t <= b for a, b, _ in rep.intervals)


class TestPreorder:
    def test_classic_nesting(self):
        fam = preisach_family([(0.5, -0.5, 1.0, -1), (1.0, -1.0, 1.0, -1)])
        w = Region.interval(-2.0, 2.0)
        lab0, lab1 = [m.label for m in fam.members]
        assert preorder_leq(fam, lab0, lab1, 0, w)
        assert not preorder_leq(fam, lab1, lab0, 0, w)

    def test_reflexive(self):
        fam = preisach_grid(4, -1.0, 1.0)
        w = Region.interval(-2.0, 2.0)
        for m in fam.members:
            assert preorder_leq(fam, m.label, m.label, 0, w)
            assert preorder_leq(fam, m.label, m.label, 1, w)


class TestLocalWipeout:
    W = Region.interval(-0.5, 1.5)

    def test_dominant_pair_is_wiped(self):
        fam = preisach_family([(0.5, 0.45, 1.0, -1), (0.55, 0.48, 1.0, -1),
                               (0.58, 0.02, 1.0, -1)])
        sig = Signal.scalar([0, 1, 2, 3, 4, 5], [0.0, 0.57, 0.40, 0.57, 0.47, 0.62])
        rep = check_local_wipeout(fam, sig, self.W, 0, 1)
        assert rep.ok
        eligible = [p for p in rep.pairs if p.eligible]
        assert eligible and all(p.wiped and p.aggregate_match for p in eligible)

    def test_non_dominant_pair_differs(self):
        fam = preisach_family([(0.49, 0.475, 1.0, -1), (0.5, 0.45, 1.0, -1),
                               (0.54, 0.48, 1.0, -1), (0.8, 0.46, 1.0, -1)])
        sig = Signal.scalar([0, 1, 2, 3, 4, 5], [0.0, 0.85, 0.42, 0.55, 0.47, 0.495])
        rep = check_local_wipeout(fam, sig, self.W, 0, 1)
        assert rep.ok
        bad = [p for p in rep.pairs if not p.eligible and p.wiped is False]
        assert bad, "expected a visibly surviving non-dominant pair"

    def test_single_transition_point_empty_pairs(self):
        fam = preisach_family([(0.5, 0.2, 1.0, -1)])
        sig = Signal.scalar([0, 1, 2], [0.0, 0.8, 0.1])
        rep = check_local_wipeout(fam, sig, self.W, 0, 1)
        assert rep.ok
        assert len(rep.transition_points) == 1
        assert rep.pairs == []

    def test_wrong_initial_state_reported(self):
        fam = preisach_family([(0.5, 0.2, 1.0, 1)])
        sig = Signal.scalar([0, 1], [0.3, 0.4])
        rep = check_local_wipeout(fam, sig, self.W, 0, 1)
        assert not rep.ok
        assert any("starts at" in v for v in rep.precondition_violations)

    def test_signal_leaving_window_reported(self):
        fam = preisach_family([(0.5, 0.2, 1.0, -1)])
        sig = Signal.scalar([0, 1], [0.0, 5.0])
        rep = check_local_wipeout(fam, sig, self.W, 0, 1)
        assert any("window" in v for v in rep.precondition_violations)


class TestStaircaseProperty:
    def test_full_vs_reduced_history_state_vectors(self):
        rng = np.random.default_rng(314)
        fam = preisach_grid(8, -1.0, 1.0, start_value=-1.6)
        for _ in range(100):
            k = rng.integers(4, 10)
            vals = np.concatenate([[-1.6], rng.uniform(-1.4, 1.4, size=k)])
            sig = Signal.scalar(np.arange(len(vals), dtype=float), vals)
            reduced_vals = staircase_reduce(vals)
            red = Signal.scalar(np.arange(len(reduced_vals), dtype=float), reduced_vals)
            full_states = [output_at(tr, sig.t_end)
                           for tr in evolve_family(fam, sig)]
            red_states = [output_at(tr, red.t_end)
                          for tr in evolve_family(fam, red)]
            assert full_states == red_states

    def test_reduction_agrees_with_direct_bookkeeping(self):
        rng = np.random.default_rng(2718)
        for _ in range(50):
            vals = np.concatenate([[-2.0], rng.uniform(-1.5, 1.5, size=6)])
            reduced = staircase_reduce(vals)
            r2 = rng.uniform(-1.2, 0.8)
            r1 = r2 + rng.uniform(0.1, 1.0)
            assert classic_final_state(r1, r2, 0, vals) == \
                classic_final_state(r1, r2, 0, reduced)


class TestHLiftedProperties:
    def test_causality_of_aggregate(self):
        fam = preisach_grid(5, -1.0, 1.0, start_value=-1.5)
        sig = Signal.scalar([0.0, 1.0, 2.0, 3.0], [-1.5, 1.2, -0.9, 0.7])
        out = apply(fam, sig)
        t_cut = 1.7
        keep = sig.times < t_cut
        trunc = Signal.scalar(np.append(sig.times[keep], t_cut),
                              np.append(sig.points[keep, 0], sig.value_at(t_cut)[0]))
        out_t = apply(fam, trunc)
        assert np.allclose(out.value_at(t_cut), out_t.value_at(t_cut))

    def test_rate_independence_of_aggregate(self):
        fam = preisach_grid(5, -1.0, 1.0, start_value=-1.5)
        vals = [-1.5, 1.2, -0.9, 0.7]
        sig = Signal.scalar([0.0, 1.0, 2.0, 3.0], vals)
        warped = Signal.scalar([0.0, 0.1, 1.9, 2.0], vals)
        out = apply(fam, sig)
        out_w = apply(fam, warped)
        assert np.allclose(out.values, out_w.values)

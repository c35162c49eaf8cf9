import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slidegrid.engine import (Axis, DenoisePlan, GuidanceConfig, WindowPlacement, audit,
                              cfg_combine, median_merge, nearest_input_view, plan_alternating,
                              plan_gold, plan_line_sweeps, plan_median, plan_multigroup,
                              plan_spatial_sliding, ring_centers, run_plan)
from slidegrid.errors import ConfigError, ContractViolation
from slidegrid.grid import SampleId, Topology, build_schedule, init_grid

from conftest import local_denoiser


def line_counts(placements, L):
    counts = [0] * L
    for p in placements:
        for m, s in zip(p.members, p.steppable):
            if s:
                counts[m.view] += p.steps
    return counts


def brute_force_counts(placements, L):
    """Recount by replaying every update one step at a time."""
    k = [0] * L
    for p in placements:
        for _ in range(p.steps):
            for m, s in zip(p.members, p.steppable):
                k[m.view] += int(s)
    return k


class TestLineSweeps:
    def test_small_circular_example(self):
        pl = plan_line_sweeps(8, Topology.CIRCULAR, 3, 1, 2)
        assert line_counts(pl, 8) == [12] * 8
        assert [p.sweep for p in pl] == ["forward"] * 8 + ["reverse"] * 8
        assert pl[0].members[0] == SampleId(0, 0) and pl[7].members[-1] == SampleId(1, 0)

    def test_full_window(self):
        pl = plan_line_sweeps(4, Topology.CIRCULAR, 4, 4, 3)
        assert len(pl) == 2 and line_counts(pl, 4) == [6] * 4

    def test_linear_disjoint_windows(self):
        pl = plan_line_sweeps(6, Topology.LINEAR, 2, 2, 1)
        assert line_counts(pl, 6) == [2] * 6
        assert all(all(p.steppable) for p in pl)

    @pytest.mark.parametrize("args", [(8, 3, 2, 1), (8, 9, 1, 1), (8, 4, 0, 1), (9, 4, 2, 1),
                                      (8, 4, 2, 0)])
    def test_invalid_tuples(self, args):
        L, W, S, P = args
        with pytest.raises(ConfigError):
            plan_line_sweeps(L, Topology.CIRCULAR, W, S, P)

    @settings(max_examples=150, deadline=None)
    @given(data=st.data())
    def test_circular_budget(self, data):
        L = data.draw(st.integers(1, 64))
        S = data.draw(st.sampled_from([s for s in range(1, L + 1) if L % s == 0]))
        W = data.draw(st.sampled_from([w for w in range(S, L + 1, S)]))
        P = data.draw(st.integers(1, 4))
        pl = plan_line_sweeps(L, Topology.CIRCULAR, W, S, P)
        assert brute_force_counts(pl, L) == [2 * P * W // S] * L

    @settings(max_examples=150, deadline=None)
    @given(data=st.data())
    def test_linear_budget_with_compensation(self, data):
        L = data.draw(st.integers(1, 40))
        W = data.draw(st.integers(1, L))
        S = data.draw(st.sampled_from([s for s in range(1, W + 1) if W % s == 0]))
        P = data.draw(st.integers(1, 4))
        pl = plan_line_sweeps(L, Topology.LINEAR, W, S, P)
        assert brute_force_counts(pl, L) == [2 * P * W // S] * L
        for p in pl:
            assert all(0 <= m.view < L for m in p.members)
            assert len(set(p.members)) == len(p.members) == W

    def test_boundary_samples_compensated(self):
        pl = plan_line_sweeps(10, Topology.LINEAR, 4, 2, 3)
        assert line_counts(pl, 10) == [12] * 10
        assert any(p.sweep == "compensation" for p in pl)


class TestAudit:
    def test_detects_missing_placement(self, schedule24):
        g = init_grid(12, 1, [0, 3, 6, 9], 2, 0, schedule24)
        plan = plan_spatial_sliding(g, (6, 2, 4))
        assert audit(plan, g).ok
        broken = DenoisePlan(plan.placements[1:], plan.D)
        rep = audit(broken, g)
        assert not rep.ok
        assert {tuple(f["sample"]) for f in rep.failures} <= {tuple(m) for m in g.targets()}

    def test_inputs_get_nothing(self, schedule24):
        g = init_grid(16, 8, [0, 4, 8, 12], 2, 0, schedule24)
        rep = audit(plan_alternating(g, (6, 2, 2), (4, 2, 3)), g)
        assert rep.ok
        assert np.all(rep.counts[[0, 4, 8, 12]] == 0)

    def test_flags_stepped_input(self, schedule24):
        g = init_grid(3, 1, [0], 2, 0, schedule24)
        bad = WindowPlacement(Axis.SPATIAL, 0, (SampleId(0, 0),), (True,), 24)
        ok = WindowPlacement(Axis.SPATIAL, 0, (SampleId(1, 0), SampleId(2, 0)), (True, True), 24)
        rep = audit(DenoisePlan([bad, ok], 24), g)
        assert not rep.ok and rep.failures[0]["role"] == "input"

    def test_independent_plans(self, schedule24):
        g = init_grid(12, 1, [0, 3, 6, 9], 2, 0, schedule24)
        plan, _ = plan_median(g, W=3, overlap=1)
        assert audit(plan, g).ok
        assert audit(plan_multigroup(g, group_size=5), g).ok


class TestAlternating:
    def test_sixteen_by_eight(self, schedule24):
        g = init_grid(16, 8, [0, 4, 8, 12], 2, 0, schedule24)
        plan = plan_alternating(g, (6, 2, 2), (4, 2, 3))
        rep = audit(plan, g)
        assert rep.ok
        sp, tp = plan.phases()
        assert all(p.axis is Axis.SPATIAL for p in sp) and all(p.axis is Axis.TEMPORAL for p in tp)
        assert np.all(rep.phase_counts[0][g.target_mask()] == 12)
        # spatial context is every input at that timestamp
        assert sp[0].context_inputs == tuple(SampleId(v, sp[0].line) for v in (0, 4, 8, 12))
        # temporal context comes from one input view over the same frames
        for p in tp:
            refs = {c.view for c in p.context_inputs}
            assert len(refs) == 1 and refs <= {0, 4, 8, 12}
            assert [c.time for c in p.context_inputs] == [m.time for m in p.members]

    def test_single_frame(self, schedule24):
        g = init_grid(12, 1, [0, 3, 6, 9], 2, 0, schedule24)
        plan = plan_alternating(g, (6, 2, 2), (4, 2, 3))
        rep = audit(plan, g)
        assert rep.ok

    def test_no_inputs(self, schedule24):
        g = init_grid(4, 2, [0], 2, 0, schedule24)
        g.input_views = ()
        with pytest.raises(ConfigError):
            plan_alternating(g, (2, 1, 3), (2, 1, 3))

    def test_bad_budget_lists_valid_tuples(self, schedule24):
        g = init_grid(16, 8, [0, 4, 8, 12], 2, 0, schedule24)
        with pytest.raises(ConfigError) as exc:
            plan_alternating(g, (6, 2, 3), (4, 2, 3))
        assert "WindowSpec(W=6, S=2, P=2)" in str(exc.value)

    def test_schedule_mismatch(self, schedule24):
        g = init_grid(8, 4, [0], 2, 0, schedule24)
        with pytest.raises(ConfigError):
            plan_alternating(g, (7, 1, 1), (2, 1, 3), D=14)


class TestNearestInput:
    def centres(self, degrees):
        a = np.radians(degrees)
        return np.stack([np.cos(a), np.sin(a), np.zeros_like(a)], axis=1)

    def test_ten_degrees(self):
        c = self.centres([0, 90, 180, 270, 10])
        assert nearest_input_view(c, 4, [0, 1, 2, 3]) == 0

    def test_coincident_centre(self):
        c = self.centres([0, 90, 90])
        assert nearest_input_view(c, 2, [0, 1]) == 1

    def test_tie_breaks_low(self):
        c = self.centres([0, 90, 180, 270])
        assert nearest_input_view(c, 1, [2, 0]) == 0

    def test_accepts_cameras(self):
        from conftest import ring_rig
        cams = ring_rig(8)
        assert nearest_input_view(cams, 3, [0, 4]) == 4

    def test_ring_centres(self):
        c = ring_centers(4)
        np.testing.assert_allclose(c[1], [0, 1, 0], atol=1e-15)


class TestGuidance:
    def test_identities(self):
        rng = np.random.default_rng(0)
        a, b = rng.standard_normal((2, 5, 3))
        assert cfg_combine(a, b, 1.0).tobytes() == a.tobytes()
        assert cfg_combine(a, b, 0.0).tobytes() == b.tobytes()
        np.testing.assert_allclose(cfg_combine(a, b, 3.0), b + 3 * (a - b))

    def test_negative_scale(self):
        with pytest.raises(ConfigError):
            GuidanceConfig(-1.0)


def identity_denoiser(request):
    return request.latents[request.steppable]


class TestRunPlan:
    def test_identity_denoiser_keeps_latents(self, schedule24):
        g = init_grid(12, 1, [0, 3, 6, 9], 2, 1, schedule24)
        out = run_plan(g, plan_spatial_sliding(g, (6, 2, 4)), identity_denoiser)
        np.testing.assert_array_equal(out.latents, g.latents)
        assert np.all(out.k[g.target_mask()] == 24)
        assert np.all(out.k[~g.target_mask()] == 24)

    def test_phase_prefix_stops_at_half(self, schedule24):
        g = init_grid(16, 8, [0, 4, 8, 12], 2, 0, schedule24)
        plan = plan_alternating(g, (6, 2, 2), (4, 2, 3))
        prefix = DenoisePlan(plan.phases()[0], plan.D)
        out = run_plan(g, prefix, local_denoiser)
        assert np.all(out.k[g.target_mask()] == 12)

    def test_strategies_identical_for_local_denoiser(self, schedule24):
        g = init_grid(12, 4, [0, 3, 6, 9], 3, 5, schedule24)
        guide = GuidanceConfig(3.0)
        sliding = run_plan(g, plan_alternating(g, (6, 2, 2), (4, 2, 3)), local_denoiser, guide)
        multi = run_plan(g, plan_multigroup(g, group_size=6), local_denoiser, guide)
        mplan, merge = plan_median(g, W=6, overlap=2)
        median = run_plan(g, mplan, local_denoiser, guide, merge=merge)
        assert sliding.latents.tobytes() == multi.latents.tobytes()
        assert sliding.latents.tobytes() == median.latents.tobytes()

    def test_noise_levels_monotone(self, schedule24):
        g = init_grid(12, 3, [0, 6], 2, 2, schedule24)
        trace = []
        run_plan(g, plan_alternating(g, (6, 1, 1), (3, 1, 2)), local_denoiser, trace=trace)
        by_sample = {}
        for r in trace:
            by_sample.setdefault(r.member, []).append(r.k)
        assert set(by_sample) == set(g.targets())
        for ks in by_sample.values():
            assert ks == list(range(24))

    def test_guidance_one_skips_unconditional(self, schedule24):
        g = init_grid(6, 1, [0], 2, 0, schedule24)

        def nan_uncond(request):
            out = local_denoiser(request)
            return out if request.conditional else np.full_like(out, np.nan)

        plan = plan_gold(g)
        a = run_plan(g, plan, nan_uncond, GuidanceConfig(1.0))
        b = run_plan(g, plan, local_denoiser, None)
        assert a.latents.tobytes() == b.latents.tobytes()

    def test_unconditional_branch_has_no_context(self, schedule24):
        g = init_grid(4, 1, [0], 2, 0, schedule24)
        seen = []

        def spy(request):
            seen.append((request.conditional, len(request.context_ids)))
            return local_denoiser(request)

        run_plan(g, plan_gold(g), spy, GuidanceConfig(2.0))
        assert (True, 1) in seen and (False, 0) in seen

    def test_bad_output_shape(self, schedule24):
        g = init_grid(4, 1, [0], 2, 0, schedule24)
        with pytest.raises(ContractViolation):
            run_plan(g, plan_gold(g), lambda r: r.latents[:1])

    def test_stepping_past_d(self, schedule24):
        g = init_grid(4, 1, [0], 2, 0, schedule24)
        plan = plan_gold(g)
        doubled = DenoisePlan(plan.placements * 2, plan.D)
        with pytest.raises(ContractViolation):
            run_plan(g, doubled, local_denoiser)


class TestBaselines:
    def test_multigroup_partition(self, schedule24):
        g = init_grid(16, 1, [0, 4, 8, 12], 2, 0, schedule24)
        plan = plan_multigroup(g, group_size=5)
        assert [len(p.members) for p in plan.placements] == [5, 5, 2]
        assert all(p.steps == 24 for p in plan.placements)

    def test_median_windows(self, schedule24):
        g = init_grid(16, 1, [0, 4, 8, 12], 2, 0, schedule24)
        plan, _ = plan_median(g, W=6, overlap=2)
        assert [p.members[0].view for p in plan.placements] == [1, 6, 11]
        assert plan.mode == "independent"

    def test_median_of_three(self):
        stack = np.array([[1.0], [2.0], [9.0]])
        assert median_merge(stack)[0] == 2.0
        assert median_merge(np.array([[1.0], [3.0]]))[0] == 2.0

    def test_zero_overlap_is_multigroup(self, schedule24):
        g = init_grid(12, 1, [0, 3, 6, 9], 2, 0, schedule24)
        plan, _ = plan_median(g, W=4, overlap=0)
        assert plan.name == "multigroup"

    def test_plan_json_roundtrip(self, schedule24):
        g = init_grid(12, 4, [0, 3, 6, 9], 2, 0, schedule24)
        plan = plan_alternating(g, (6, 2, 2), (4, 2, 3))
        back = DenoisePlan.from_dict(json.loads(plan.to_json()))
        assert back.to_dict() == plan.to_dict()
        assert back.placements == plan.placements

    def test_d2_cannot_alternate(self):
        # a sweep pair always gives an even count, so D/2 = 1 has no valid tuple
        g = init_grid(4, 2, [0], 2, 0, build_schedule(2, 10.0, 0.01))
        with pytest.raises(ConfigError, match=r"valid \(W,S,P\): \[\]"):
            plan_alternating(g, (1, 1, 1), (1, 1, 1))

    def test_d2_single_axis(self):
        g = init_grid(4, 1, [0], 2, 0, build_schedule(2, 10.0, 0.01))
        plan = plan_spatial_sliding(g, (3, 3, 1))
        assert audit(plan, g).ok
        assert np.all(run_plan(g, plan, local_denoiser).k == 2)

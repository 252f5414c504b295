import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nucleoforge.labelmap import (InstanceLabelMap, Nucleus, compose_label,
                                  extract_instances)
from nucleoforge.migration import (apply_migration, migration_priority,
                                   plan_migration, resolve_ref_area,
                                   round_half_away_from_zero,
                                   sample_migration_params)
from oracles import random_label_arrays


def square(ident, top, left, side, class_id=1):
    rr, cc = np.mgrid[top:top + side, left:left + side]
    return Nucleus(id=ident, class_id=class_id,
                   pixels=np.column_stack([rr.ravel(), cc.ravel()]).astype(np.int32))


class TestRounding:
    def test_halves_move_away_from_zero(self):
        got = round_half_away_from_zero([0.5, -0.5, 1.5, 2.5, -2.5])
        assert got.tolist() == [1, -1, 2, 3, -3]

    def test_plain_cases(self):
        got = round_half_away_from_zero([0.49, -0.49, 0.0, 1.2, -1.8])
        assert got.tolist() == [0, 0, 0, 1, -2]


class TestPlan:
    def test_inverse_area_law_exact(self):
        nuclei = [square(1, 0, 0, 2), square(2, 10, 10, 4)]  # areas 4, 16
        plan = plan_migration(nuclei, delta_x=48.0, direction=(1.0, 0.0),
                              ref_area=1.0)
        by_id = {e.nucleus_id: e for e in plan.per_nucleus}
        assert by_id[1].displacement == 48.0 / 4
        assert by_id[2].displacement == 48.0 / 16
        assert by_id[1].offset == (12, 0)
        assert by_id[2].offset == (3, 0)

    def test_smaller_area_moves_strictly_farther(self):
        nuclei = [square(1, 0, 0, 2), square(2, 10, 10, 3),
                  square(3, 20, 20, 5)]
        plan = plan_migration(nuclei, 30.0, (0.6, -0.8))
        disp = {e.nucleus_id: e.displacement for e in plan.per_nucleus}
        assert disp[1] > disp[2] > disp[3]

    def test_equal_areas_equal_offsets(self):
        nuclei = [square(1, 0, 0, 3), square(2, 9, 9, 3)]
        plan = plan_migration(nuclei, 17.3, (-1.0, 2.0))
        offs = [e.offset for e in plan.per_nucleus]
        assert offs[0] == offs[1]

    def test_direction_normalized(self):
        nuclei = [square(1, 0, 0, 1)]
        p1 = plan_migration(nuclei, 10.0, (3.0, 4.0))
        p2 = plan_migration(nuclei, 10.0, (0.6, 0.8))
        assert p1.per_nucleus[0].offset == p2.per_nucleus[0].offset
        assert math.isclose(math.hypot(*p1.direction), 1.0)

    def test_ref_area_scales_displacement(self):
        nuclei = [square(1, 0, 0, 4)]  # area 16
        plan = plan_migration(nuclei, 8.0, (0.0, 1.0), ref_area=16.0)
        assert plan.per_nucleus[0].displacement == 8.0
        assert plan.per_nucleus[0].offset == (0, 8)

    def test_offsets_match_hand_arithmetic(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            inst, cls = random_label_arrays(rng, 20, 20, 5)
            nuclei = extract_instances(InstanceLabelMap(inst, cls))
            delta_x, direction = sample_migration_params(rng, (30.0, 100.0))
            plan = plan_migration(nuclei, delta_x, direction)
            for nuc, entry in zip(nuclei, plan.per_nucleus):
                disp = delta_x * 1.0 / nuc.area
                for got, d in zip(entry.offset, plan.direction):
                    val = disp * d
                    want = int(math.copysign(math.floor(abs(val) + 0.5), val))
                    assert got == want

    def test_rejects_bad_inputs(self):
        nuclei = [square(1, 0, 0, 2)]
        with pytest.raises(ValueError):
            plan_migration(nuclei, -1.0, (1.0, 0.0))
        with pytest.raises(ValueError):
            plan_migration(nuclei, 1.0, (0.0, 0.0))
        with pytest.raises(ValueError):
            plan_migration(nuclei, 1.0, (1.0, 0.0), ref_area=0.0)
        with pytest.raises(ValueError):
            plan_migration(nuclei, 1.0, (1.0, 0.0, 0.0))

    @settings(max_examples=40, deadline=None)
    @given(delta=st.floats(0.0, 200.0), angle=st.floats(0.0, 2 * math.pi),
           side=st.integers(1, 6))
    def test_direction_negation_negates_offsets(self, delta, angle, side):
        nuclei = [square(1, 0, 0, side)]
        d = (math.cos(angle), math.sin(angle))
        fwd = plan_migration(nuclei, delta, d).per_nucleus[0].offset
        bwd = plan_migration(nuclei, delta, (-d[0], -d[1])).per_nucleus[0].offset
        assert bwd == (-fwd[0], -fwd[1])


class TestApply:
    def test_zero_distance_is_identity(self):
        rng = np.random.default_rng(5)
        inst, cls = random_label_arrays(rng, 15, 15, 4)
        label = InstanceLabelMap(inst, cls)
        plan = plan_migration(extract_instances(label), 0.0, (1.0, 1.0))
        out = apply_migration(label, plan)
        assert np.array_equal(out.instance_ids, inst)
        assert np.array_equal(out.class_ids, cls)

    def test_smaller_nucleus_stays_on_top(self):
        # shift pushes the 1-px nucleus into the middle of the 3x3 block
        inst = np.zeros((5, 9), np.int32)
        inst[1:4, 4:7] = 1       # area 9
        inst[2, 0] = 2           # area 1
        label = InstanceLabelMap(inst, (inst > 0).astype(np.int32))
        out = compose_label(
            extract_instances(label), [(0, 0), (0, 5)], label.shape,
            priority=migration_priority)
        assert out.instance_ids[2, 5] == 2
        assert (out.instance_ids == 1).sum() == 8
        assert (out.instance_ids == 2).sum() == 1

    def test_equal_area_tie_goes_to_lower_id(self):
        a = Nucleus(id=1, class_id=1, pixels=np.array([[0, 0]], np.int32))
        b = Nucleus(id=2, class_id=1, pixels=np.array([[0, 1]], np.int32))
        out = compose_label([a, b], [(0, 0), (0, -1)], (1, 2),
                            priority=migration_priority)
        assert out.instance_ids[0, 0] == 1

    def test_plan_must_cover_label_exactly(self):
        inst = np.zeros((6, 6), np.int32)
        inst[0, 0] = 1
        inst[3, 3] = 2
        label = InstanceLabelMap(inst, (inst > 0).astype(np.int32))
        nuclei = extract_instances(label)
        with pytest.raises(ValueError, match="missing"):
            apply_migration(label, plan_migration(nuclei[:1], 1.0, (1.0, 0.0)))
        extra = nuclei + [square(9, 0, 3, 1)]
        with pytest.raises(ValueError, match="unknown"):
            apply_migration(label, plan_migration(extra, 1.0, (1.0, 0.0)))

    def test_every_in_bounds_nucleus_survives(self):
        rng = np.random.default_rng(21)
        for _ in range(60):
            inst, cls = random_label_arrays(rng, 24, 24, 6)
            label = InstanceLabelMap(inst, cls)
            nuclei = extract_instances(label)
            delta_x, direction = sample_migration_params(rng, (0.0, 60.0))
            plan = plan_migration(nuclei, delta_x, direction)
            out = apply_migration(label, plan)
            survivors = set(np.unique(out.instance_ids)) - {0}
            offsets = plan.offsets_by_id()
            for nuc in nuclei:
                rr = nuc.pixels[:, 0] + offsets[nuc.id][0]
                cc = nuc.pixels[:, 1] + offsets[nuc.id][1]
                inside = ((rr >= 0) & (rr < 24) & (cc >= 0) & (cc < 24)).any()
                if inside:
                    assert nuc.id in survivors


class TestParams:
    def test_sample_ranges(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            delta_x, (dr, dc) = sample_migration_params(rng, (30.0, 100.0))
            assert 30.0 <= delta_x <= 100.0
            assert math.isclose(math.hypot(dr, dc), 1.0, rel_tol=1e-12)

    def test_sample_rejects_bad_range(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            sample_migration_params(rng, (5.0, 1.0))
        with pytest.raises(ValueError):
            sample_migration_params(rng, (-1.0, 1.0))

    def test_resolve_ref_area(self):
        nuclei = [square(1, 0, 0, 2), square(2, 5, 5, 4)]  # areas 4, 16
        assert resolve_ref_area("1", nuclei) == 1.0
        assert resolve_ref_area("mean", nuclei) == 10.0
        assert resolve_ref_area("2.5", nuclei) == 2.5
        assert resolve_ref_area(7, nuclei) == 7.0
        assert resolve_ref_area("mean", []) == 1.0
        with pytest.raises(ValueError):
            resolve_ref_area("median", nuclei)
        with pytest.raises(ValueError):
            resolve_ref_area("-3", nuclei)

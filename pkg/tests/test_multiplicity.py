"""Familywise evidence, false evidence rate, step-up procedures, disutilities."""

from fractions import Fraction

import pytest

import helpers
from emeasure import (
    AvgOverSelection,
    CustomPhi,
    EClass,
    EKernel,
    INF,
    SampleSpace,
    SelectionRule,
    SupOverSelections,
    SupOverTrue,
    XValue,
    check_fer,
    check_fwe,
    check_phi_validity,
    check_validity,
    closed_ebh,
    constant_kernel,
    ebh,
    familywise_evidence,
    fep_fsp,
    postprocess_efunction,
    postprocess_selection,
    self_consistent_selection,
    unit_measure,
)
from emeasure.evidence import from_values
from emeasure.multiplicity import PhiFlagViolation
from emeasure import golden


def toy_kernel(outcomes=("x",)):
    space = golden.toy_space()
    sample = SampleSpace(outcomes)
    return space, constant_kernel(space, sample, golden.base_efunction(space))


def uniform_toy_pa(space, sample):
    from emeasure import Pmf, ProbabilityAssignment

    n = sample.size
    pmf = Pmf(sample, tuple(Fraction(1, n) for _ in range(n)))
    return ProbabilityAssignment(space.model, tuple(pmf for _ in space.model.points))


def test_familywise_evidence_on_toy_cells():
    space, k = toy_kernel()
    assert familywise_evidence(k, "c123", 0) == XValue(100)
    assert familywise_evidence(k, "cOut", 0) == XValue(5)


def test_familywise_evidence_equals_least_value_for_capacities():
    r = helpers.rng(103)
    for _ in range(20):
        space = helpers.rand_ic_space(r)
        sample = helpers.rand_sample(r)
        pa = helpers.rand_pa(r, space.model, sample)
        k = helpers.valid_capacity_kernel(r, space, pa)
        for pi in range(space.model.size):
            for xi in range(sample.size):
                assert familywise_evidence(k, pi, xi) == k.value(space.least_id(pi), xi)


def test_familywise_evidence_can_exceed_least_without_antitonicity():
    space = helpers.power_space(2)
    sample = SampleSpace(("x",))
    fn = from_values(space, ["inf", 1, 1, 5])  # plain function: full set outruns atoms
    k = EKernel(space, sample, [fn])
    assert familywise_evidence(k, 0, 0) == XValue(5)
    assert k.value(space.least_id(0), 0) == XValue(1)


def test_check_fwe_matches_validity_verdict():
    r = helpers.rng(107)
    for _ in range(15):
        space = helpers.rand_ic_space(r)
        sample = helpers.rand_sample(r)
        pa = helpers.rand_pa(r, space.model, sample)
        k = helpers.valid_capacity_kernel(r, space, pa)
        report = check_fwe(k, pa)
        assert report.agrees_with_least
        assert report.controlled == check_validity(k, pa).valid
    space = helpers.rand_ic_space(r)
    sample = helpers.rand_sample(r)
    pa = helpers.rand_pa(r, space.model, sample)
    bad = helpers.constant_two_kernel(space, sample)
    report = check_fwe(bad, pa)
    assert not report.controlled
    assert any(not e.ok for e in report.entries)


def test_binary_kernel_fwe_is_classical_familywise_error_over_alpha():
    r = helpers.rng(109)
    space = helpers.power_space(2)
    sample = SampleSpace(("x1", "x2"))
    pa = helpers.rand_pa(r, space.model, sample)
    alpha = Fraction(1, 5)
    # reject the least hypothesis of P1 on x1 only
    cols = []
    for xi in range(2):
        values = {}
        for hid, m in enumerate(space.family.members):
            if m.is_empty:
                values[hid] = INF
            elif xi == 0 and m.bits == 0b01:
                values[hid] = XValue(1) / XValue(alpha)
            else:
                values[hid] = XValue(0)
        cols.append(helpers.classify(space, values))
    k = EKernel(space, sample, cols)
    report = check_fwe(k, pa)
    stat_p1 = next(e.stat for e in report.entries if e.point == "P1")
    classical = pa.pmfs[0].mass[0] / alpha  # P1's chance of a true rejection, scaled
    assert stat_p1 == XValue(classical)


def test_fep_fsp_guard_and_toy_values():
    space, k = toy_kernel()
    empty_rule = SelectionRule.fixed(k.sample, [])
    pair = fep_fsp(k, "c12", empty_rule, 0)
    assert pair.fep == XValue(0) and pair.fsp == 0
    g1 = golden.row_id(space, "G_1")
    g2 = golden.row_id(space, "G_2")
    rule = SelectionRule.fixed(k.sample, [g1, g2])
    pair = fep_fsp(k, "c12", rule, 0)
    assert pair.fep == XValue(Fraction(89, 2))
    assert pair.fsp == 1


def test_binary_kernel_fep_is_fsp_over_alpha():
    space, k = toy_kernel()
    alpha = Fraction(1, 20)
    result = ebh(golden.base_efunction(space), golden.group_ids(space), alpha)
    binary = constant_kernel(space, k.sample, result.table)
    rule = SelectionRule.fixed(k.sample, list(golden.group_ids(space)))
    for cell in golden.CELLS:
        pair = fep_fsp(binary, cell, rule, 0)
        rejected_true = [
            g for g in golden.group_ids(space)
            if space.model.index(cell) in space.family.member(g)
            and binary.value(g, 0) >= XValue(20)
        ]
        expected = Fraction(len(rejected_true), 3) / alpha
        assert pair.fep == XValue(expected)


def test_fer_pointwise_bound_and_rate():
    r = helpers.rng(113)
    for _ in range(15):
        space = helpers.rand_ic_space(r)
        sample = helpers.rand_sample(r)
        pa = helpers.rand_pa(r, space.model, sample)
        k = helpers.valid_capacity_kernel(r, space, pa)
        ids = list(space.family.nonempty_ids())
        rule = SelectionRule.fixed(sample, ids[: r.randint(0, len(ids))])
        report = check_fer(k, pa, rule)
        assert report.pointwise_holds
        assert report.premise_holds and report.fer_controlled


def test_fer_singleton_rules_and_uniform_equivalence():
    r = helpers.rng(127)
    space = helpers.rand_ic_space(r, max_points=3)
    sample = helpers.rand_sample(r)
    pa = helpers.rand_pa(r, space.model, sample)
    k = helpers.valid_capacity_kernel(r, space, pa)
    # singleton selection: the proportion-weighted evidence is the evidence
    for hid in space.family.nonempty_ids():
        rule = SelectionRule.fixed(sample, [hid])
        member = space.family.member(hid)
        for pi in member.indices():
            for xi in range(sample.size):
                assert fep_fsp(k, pi, rule, xi).fep == k.value(hid, xi)
    report = check_fer(k, pa, uniform=True)
    assert report.uniform_matches_validity
    bad = helpers.constant_two_kernel(space, sample)
    assert check_fer(bad, pa, uniform=True).uniform_matches_validity


def test_fer_first_inequality_tight_for_disjoint_least_selections():
    space, k = toy_kernel()
    cells = [golden.row_id(space, lab) for lab in ("H_1", "H_2")]
    rule = SelectionRule.fixed(k.sample, cells)
    pair = fep_fsp(k, "c1", rule, 0)
    least_val = k.value(space.least_id(space.model.index("c1")), 0)
    assert pair.fep == XValue(pair.fsp) * least_val  # 30 = (1/2) * 60
    assert pair.fep == XValue(30)


def test_postprocess_selection_identity_when_share_is_one():
    space, k = toy_kernel()
    least_ids = sorted({space.least_id(i) for i in range(space.model.size)})
    rule = SelectionRule.fixed(k.sample, [golden.row_id(space, "H_123")])
    # every point of H_123's cell has share 1 under the singleton rule
    processed = postprocess_selection(k, rule)
    h123 = golden.row_id(space, "H_123")
    assert processed.value(h123, 0) == k.value(h123, 0)


def test_postprocess_selection_reproduces_inflated_column():
    space, k = toy_kernel()
    gids = golden.group_ids(space)
    rule = SelectionRule.fixed(k.sample, list(gids))
    processed = postprocess_selection(k, rule)
    expected = golden.expected_reference_table()
    for label in golden.ROW_LABELS:
        assert processed.value(golden.row_id(space, label), 0) == expected.inflated[label]


def test_postprocess_preserves_fer_under_the_rule():
    r = helpers.rng(157)
    for _ in range(10):
        space = helpers.rand_ic_space(r)
        sample = helpers.rand_sample(r)
        pa = helpers.rand_pa(r, space.model, sample)
        k = helpers.valid_capacity_kernel(r, space, pa)
        ids = list(space.family.nonempty_ids())
        rule = SelectionRule.fixed(sample, ids[: r.randint(1, len(ids))])
        processed = postprocess_selection(k, rule)
        report = check_fer(processed, pa, rule)
        assert report.fer_controlled


def test_self_consistent_selection_on_the_toy_family():
    space = golden.toy_space()
    base = golden.base_efunction(space)
    gids = golden.group_ids(space)
    result = self_consistent_selection(base, gids, Fraction(1, 20))
    assert result.selected == tuple(sorted(gids))
    assert result.is_fixed_point
    expected = golden.expected_reference_table()
    for label, g in zip(("G_1", "G_2", "G_3"), sorted(gids)):
        assert result.witness[g] == expected.inflated[label]
        assert result.witness[g] >= XValue(20)


def test_self_consistent_selection_collapses_at_tiny_alpha():
    space = golden.toy_space()
    base = golden.base_efunction(space)
    gids = golden.group_ids(space)
    result = self_consistent_selection(base, gids, Fraction(1, 10 ** 6))
    assert result.selected == ()


def test_self_consistent_fixed_point_property_on_random_instances():
    r = helpers.rng(131)
    for _ in range(15):
        space = helpers.rand_ic_space(r, max_points=3)
        e = helpers.rand_measure(r, space)
        ids = list(space.family.nonempty_ids())
        fam = ids[: min(len(ids), 4)]
        alpha = Fraction(r.randint(1, 4), 20)
        result = self_consistent_selection(e, fam, alpha)
        if result.is_fixed_point:
            inflated = postprocess_efunction(e, result.selected)
            rejected = tuple(
                g for g in sorted(fam) if inflated.values[g] >= XValue(1) / XValue(alpha)
            )
            assert rejected == result.selected


def test_stepup_on_the_toy_values():
    space = golden.toy_space()
    base = golden.base_efunction(space)
    gids = golden.group_ids(space)
    result = ebh(base, gids, Fraction(1, 20))
    assert [golden.row_id(space, f"G_{i}") in result.rejected for i in (1, 2, 3)] == [
        True, False, False,
    ]
    expected = golden.expected_reference_table()
    for label in golden.ROW_LABELS:
        assert result.table.values[golden.row_id(space, label)] == expected.stepup[label]


def test_stepup_rejects_nothing_on_zero_evidence():
    space = golden.toy_space()
    zero_cells = {c: XValue(0) for c in golden.CELLS}
    base = golden.base_efunction(space, zero_cells)
    result = ebh(base, golden.group_ids(space), Fraction(1, 20))
    assert result.rejected == ()
    assert all(
        result.table.values[h] == XValue(0) for h in space.family.nonempty_ids()
    )


def test_closed_stepup_dominates_stepup_on_the_toy():
    space = golden.toy_space()
    base = golden.base_efunction(space)
    gids = golden.group_ids(space)
    plain = ebh(base, gids, Fraction(1, 20))
    closed = closed_ebh(base, gids, Fraction(1, 20))
    assert set(plain.rejected) <= set(closed.rejected)
    expected = golden.expected_reference_table()
    for label in golden.ROW_LABELS:
        assert closed.table.values[golden.row_id(space, label)] == expected.closed_stepup[label]


def test_closed_stepup_on_empty_family():
    space = golden.toy_space()
    base = golden.base_efunction(space)
    result = closed_ebh(base, [], Fraction(1, 20))
    assert result.rejected == ()


def test_phi_sup_over_true_recovers_familywise():
    r = helpers.rng(137)
    for _ in range(10):
        space = helpers.rand_ic_space(r)
        sample = helpers.rand_sample(r)
        pa = helpers.rand_pa(r, space.model, sample)
        k = helpers.valid_capacity_kernel(r, space, pa)
        report = check_phi_validity(k, pa, SupOverTrue())
        fwe = check_fwe(k, pa)
        assert report.pointwise_holds
        assert report.valid == fwe.controlled
        assert report.general_stats == tuple(e.stat for e in fwe.entries)


def test_phi_avg_over_selection_recovers_fer():
    r = helpers.rng(139)
    for _ in range(10):
        space = helpers.rand_ic_space(r)
        sample = helpers.rand_sample(r)
        pa = helpers.rand_pa(r, space.model, sample)
        k = helpers.valid_capacity_kernel(r, space, pa)
        ids = list(space.family.nonempty_ids())
        selected = ids[: r.randint(1, len(ids))]
        phi = AvgOverSelection(selected)
        report = check_phi_validity(k, pa, phi)
        assert report.pointwise_holds
        rule = SelectionRule.fixed(sample, selected)
        for pi in range(space.model.size):
            for xi in range(sample.size):
                pair = fep_fsp(k, pi, rule, xi)
                assert phi.value(space, pi, k.columns[xi].values) == pair.fep
                assert phi.phi_one(space, pi) == XValue(pair.fsp)


def test_phi_sup_over_selections_equals_sup_over_true():
    r = helpers.rng(149)
    space = helpers.rand_ic_space(r)
    sample = helpers.rand_sample(r)
    pa = helpers.rand_pa(r, space.model, sample)
    k = helpers.valid_capacity_kernel(r, space, pa)
    a = check_phi_validity(k, pa, SupOverSelections())
    b = check_phi_validity(k, pa, SupOverTrue())
    assert a.general_stats == b.general_stats


def test_phi_compound_validity_sums_to_family_size():
    space, k = toy_kernel(("x1", "x2"))
    pa = uniform_toy_pa(space, k.sample)
    gids = list(golden.group_ids(space))
    phi = AvgOverSelection(gids)
    report = check_phi_validity(k, pa, phi)
    # |G| * E[phi] equals the summed expectations over the true members
    for pi in range(space.model.size):
        total = XValue(0)
        for g in gids:
            if pi in space.family.member(g):
                total = total + k.expectation(g, pa.pmfs[pi])
        assert report.general_stats[pi] * XValue(len(gids)) == total


def test_phi_flag_violation_is_refused_with_detail():
    r = helpers.rng(151)
    space = helpers.rand_ic_space(r, max_points=2, min_points=2)
    sample = helpers.rand_sample(r)
    pa = helpers.rand_pa(r, space.model, sample)
    k = helpers.valid_capacity_kernel(r, space, pa)
    shifted = CustomPhi(lambda point, table: table[0] + XValue(1), name="shifted")
    with pytest.raises(PhiFlagViolation):
        check_phi_validity(k, pa, shifted)

"""Instance generators and independent oracles shared by the test suite.

The oracles here deliberately use different algorithms than the library:
closures by unrestricted cover enumeration, least hypotheses by brute
intersection, unions by subset enumeration. They were written against the
definitions, not against the implementation.
"""

import random
from fractions import Fraction

from emeasure import (
    EClass,
    EKernel,
    INF,
    Model,
    Pmf,
    Preorder,
    ProbabilityAssignment,
    SampleSpace,
    Space,
    XValue,
    ZERO,
    class_from_preorder,
    classify,
    inf_of,
    sup_of,
)


def rng(seed: int) -> random.Random:
    return random.Random(seed)


def rand_fraction(r, max_num=8, max_den=4, allow_zero=True):
    low = 0 if allow_zero else 1
    return Fraction(r.randint(low, max_num), r.randint(1, max_den))


def rand_xvalue(r, allow_inf=True, allow_zero=True):
    if allow_inf and r.random() < 0.15:
        return INF
    return XValue(rand_fraction(r, allow_zero=allow_zero))


def rand_preorder(r, n):
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j and r.random() < 0.4]
    return Preorder.from_pairs(n, pairs).transitive_closure()


def rand_ic_space(r, max_points=4, max_members=None, min_points=1):
    while True:
        n = r.randint(min_points, max_points)
        model = Model(tuple(f"P{i + 1}" for i in range(n)))
        space = class_from_preorder(model, rand_preorder(r, n))
        if max_members is None or len(space.family) <= max_members:
            return space


def power_space(n):
    model = Model(tuple(f"P{i + 1}" for i in range(n)))
    from emeasure import HypothesisClass

    return Space(model, HypothesisClass.from_bits(n, range(1 << n), check=False))


def rand_capacity(r, space, allow_inf=True):
    """Random antitone table: each value is the best raw value over supersets."""
    members = space.family.members
    raw = [rand_xvalue(r, allow_inf) for _ in members]
    values = {}
    for hid, m in enumerate(members):
        values[hid] = sup_of(
            raw[j] for j, mm in enumerate(members) if m.bits & ~mm.bits == 0
        )
    values[space.family.empty_id] = INF
    e = classify(space, values)
    assert e.eclass >= EClass.CAPACITY
    return e


def rand_measure(r, space):
    """Random density on the least hypotheses, spread by the union law."""
    least = space.least_ids()
    density = {lid: rand_xvalue(r) for lid in set(least)}
    values = {
        hid: inf_of(density[least[i]] for i in m.indices())
        for hid, m in enumerate(space.family.members)
    }
    e = classify(space, values)
    assert e.eclass is EClass.MEASURE
    return e


def rand_sample(r, max_outcomes=3, min_outcomes=1):
    k = r.randint(min_outcomes, max_outcomes)
    return SampleSpace(tuple(f"x{i + 1}" for i in range(k)))


def rand_pmf(r, sample, full_support=True):
    weights = [
        r.randint(1, 6) if full_support else r.randint(0, 6) for _ in sample.outcomes
    ]
    if sum(weights) == 0:
        weights[0] = 1
    total = sum(weights)
    return Pmf(sample, tuple(Fraction(w, total) for w in weights))


def rand_pa(r, model, sample, full_support=True):
    return ProbabilityAssignment(
        model, tuple(rand_pmf(r, sample, full_support) for _ in model.points)
    )


def valid_measure_kernel(r, space, pa):
    """Sub-pmf ratio E-variable per point; hypotheses take the point minimum.

    Valid because each point variable has expectation at most one and the
    hypothesis value never exceeds the variable of a contained point.
    """
    sample = pa.sample
    evars = []
    for pi in range(space.model.size):
        pmf = pa.pmfs[pi]
        qs = [r.randint(0, 4) for _ in sample.outcomes]
        slack = 1 if r.random() < 0.7 else 2
        denom = max(sum(qs), 1) * slack
        evars.append(
            [XValue(Fraction(q, denom)) / XValue(pmf.mass[xi]) for xi, q in enumerate(qs)]
        )
    cols = []
    for xi in range(sample.size):
        values = {
            hid: inf_of(evars[pi][xi] for pi in m.indices())
            for hid, m in enumerate(space.family.members)
        }
        cols.append(classify(space, values))
    return EKernel(space, sample, cols)


def valid_capacity_kernel(r, space, pa):
    """Convex mixture of two valid measure kernels; valid, often not a measure."""
    from emeasure import merge_convex_kernels

    k1 = valid_measure_kernel(r, space, pa)
    k2 = valid_measure_kernel(r, space, pa)
    return merge_convex_kernels([k1, k2], [Fraction(1, 3), Fraction(2, 3)])


def constant_two_kernel(space, sample):
    values = {
        hid: INF if m.is_empty else XValue(2)
        for hid, m in enumerate(space.family.members)
    }
    fn = classify(space, values)
    return EKernel(space, sample, [fn] * sample.size)


def scaled_kernel(k, factor):
    cols = []
    for col in k.columns:
        values = {hid: v * XValue(factor) for hid, v in enumerate(col.values)}
        cols.append(classify(k.space, values))
    return EKernel(k.space, k.sample, cols)


def rand_order_measurable(r, space, max_levels=3, allow_inf=True):
    """Random order-measurable function: levels stacked on a member chain.

    Intersecting random members yields a descending chain (the space is
    intersection-closed), so every super-level set is a chain member.
    """
    from emeasure import OrderMeasurableFn

    members = space.family.members
    current = (1 << space.model.size) - 1
    chain = []
    for _ in range(r.randint(1, max_levels)):
        current &= members[r.randrange(len(members))].bits
        chain.append(current)
    levels = []
    height = Fraction(0)
    for _ in chain:
        height += rand_fraction(r, allow_zero=False)
        levels.append(XValue(height))
    if allow_inf and r.random() < 0.15:
        levels[-1] = INF
    values = []
    for i in range(space.model.size):
        v = ZERO
        for bits, lev in zip(chain, levels):
            if bits >> i & 1 and lev > v:
                v = lev
        values.append(v)
    return OrderMeasurableFn(space, tuple(values))


def rand_order_measurable_pair(r, space, max_levels=3):
    """Two order-measurable functions with f >= g pointwise, on one chain."""
    from emeasure import OrderMeasurableFn

    members = space.family.members
    current = (1 << space.model.size) - 1
    chain = []
    for _ in range(r.randint(1, max_levels)):
        current &= members[r.randrange(len(members))].bits
        chain.append(current)
    g_levels = []
    f_levels = []
    height = Fraction(0)
    for _ in chain:
        height += rand_fraction(r, allow_zero=False)
        g_levels.append(XValue(height))
        f_levels.append(XValue(height + rand_fraction(r)))

    def build(levels):
        values = []
        for i in range(space.model.size):
            v = ZERO
            for bits, lev in zip(chain, levels):
                if bits >> i & 1 and lev > v:
                    v = lev
            values.append(v)
        return OrderMeasurableFn(space, tuple(values))

    return build(f_levels), build(g_levels)


# -- independent oracles ---------------------------------------------------


def oracle_union_closure(gen_bits):
    """Union of every subset of the generators, by subset enumeration."""
    gens = list(gen_bits)
    out = set()
    for mask in range(1 << len(gens)):
        u = 0
        for i, g in enumerate(gens):
            if mask >> i & 1:
                u |= g
        out.add(u)
    return out


def oracle_least_bits(space, point):
    """Brute intersection of every member containing the point."""
    acc = (1 << space.model.size) - 1
    hit = False
    for m in space.family.members:
        if m.bits >> point & 1:
            acc &= m.bits
            hit = True
    return acc if hit else None


def oracle_closure(e):
    """Unrestricted cover search: best over all subsets of the family."""
    members = e.space.family.members
    n = len(members)
    out = []
    for m in members:
        best = ZERO
        for mask in range(1 << n):
            union = 0
            lowest = INF
            for j in range(n):
                if mask >> j & 1:
                    union |= members[j].bits
                    if e.values[j] < lowest:
                        lowest = e.values[j]
            if m.bits & ~union == 0 and lowest > best:
                best = lowest
        out.append(best)
    return out


def oracle_expectation(pmf, values):
    """Plain Fraction expectation, infinite terms tracked by hand."""
    total = Fraction(0)
    for mass, v in zip(pmf.mass, values):
        if mass == 0:
            continue
        if v.is_inf:
            return INF
        total += mass * v.as_fraction()
    return XValue(total)

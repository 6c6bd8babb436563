"""Evidence tables over a hypothesis family and the closure operator.

Three strengths of table are distinguished: a bare evidence function only
assigns maximal evidence to the empty hypothesis; a capacity is also
antitone under inclusion; a measure additionally turns unions into
infimums. Closing a table upgrades it to the smallest dominating measure.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .spaces import HypothesisClass, Space
from .xvalue import INF, ONE, XValue, as_xvalue, inf_of, sup_of

BRUTE_FORCE_MEMBER_CAP = 16
POWERSET_POINT_CAP = 16


class EvidenceError(Exception):
    pass


class NotAnEFunction(EvidenceError):
    pass


class ClassMismatch(EvidenceError):
    pass


class CapExceeded(EvidenceError):
    pass


class EClass(enum.IntEnum):
    FUNCTION = 0
    CAPACITY = 1
    MEASURE = 2


@dataclass(frozen=True)
class EFunction:
    """Evidence per hypothesis id, tagged with its verified strength."""

    space: Space
    values: tuple[XValue, ...]
    eclass: EClass

    def __getitem__(self, hid: int) -> XValue:
        return self.values[hid]

    def value_of(self, item) -> XValue:
        return self.values[self.space.family.id_of(item)]

    def dominates(self, other: "EFunction") -> bool:
        return all(a >= b for a, b in zip(self.values, other.values))

    def table(self) -> dict[int, XValue]:
        return dict(enumerate(self.values))


def _antitone(space: Space, values: Sequence[XValue]) -> bool:
    # Checking along Hasse covers suffices; inclusions compose from covers.
    return all(values[parent] <= values[child] for child, parent in space.cover_edges())


def _measure_law(space: Space, values: Sequence[XValue]) -> bool:
    family = space.family
    if space.intersection_closed:
        # Equivalent to the union law here: every member is the union of the
        # least hypotheses of its points.
        least = space.least_ids()
        for hid, member in enumerate(family.members):
            expect = inf_of(values[least[i]] for i in member.indices())
            if values[hid] != expect:
                return False
        return True
    bits_to_id = {m.bits: i for i, m in enumerate(family.members)}
    n = len(family.members)
    for i in range(n):
        for j in range(i, n):
            union_id = bits_to_id[family.members[i].bits | family.members[j].bits]
            lo = values[i] if values[i] <= values[j] else values[j]
            if values[union_id] != lo:
                return False
    return True


def classify(space: Space, table: Mapping[int, object]) -> EFunction:
    """Wrap a raw value table, verifying the strongest class it satisfies."""
    n = len(space.family)
    missing = [hid for hid in range(n) if hid not in table]
    if missing:
        raise NotAnEFunction(f"table misses hypothesis ids {missing}")
    values = tuple(as_xvalue(table[hid]) for hid in range(n))
    if not values[space.family.empty_id].is_inf:
        raise NotAnEFunction("the empty hypothesis must carry infinite evidence")
    eclass = EClass.FUNCTION
    if _antitone(space, values):
        eclass = EClass.CAPACITY
        if _measure_law(space, values):
            eclass = EClass.MEASURE
    return EFunction(space, values, eclass)


def from_values(space: Space, values: Sequence[object]) -> EFunction:
    return classify(space, dict(enumerate(values)))


def closure_bruteforce(e: EFunction, member_cap: int = BRUTE_FORCE_MEMBER_CAP) -> EFunction:
    """Smallest dominating measure, by searching all covers.

    For every member H the result is the best lower bound forced by the
    union law: the supremum over covers of H of the cover's least evidence.
    Cost is exponential in the family size, hence the cap; large
    intersection-closed spaces should use :func:`closure_fast`.
    """
    family = e.space.family
    if len(family) > member_cap:
        raise CapExceeded(
            f"{len(family)} members exceed the brute-force cap {member_cap}; "
            "closure_fast handles intersection-closed spaces of any size"
        )
    nonempty = family.nonempty_ids()  # the empty member never helps a cover
    profiles: list[tuple[int, XValue]] = [(0, INF)]  # the empty cover
    for hid in nonempty:
        bits = family.member(hid).bits
        val = e.values[hid]
        with_hid = [
            (u_bits | bits, u_val if u_val <= val else val)
            for u_bits, u_val in profiles
        ]
        profiles.extend(with_hid)
    out = []
    for member in family.members:
        out.append(
            sup_of(val for u_bits, val in profiles if member.bits & ~u_bits == 0)
        )
    closed = from_values(e.space, out)
    if closed.eclass is not EClass.MEASURE:
        raise EvidenceError("closure did not verify as a measure")
    return closed


def closure_fast(e: EFunction) -> EFunction:
    """Closure via least hypotheses: evidence at H is the least evidence
    among the least hypotheses of H's points.

    Needs a capacity on an intersection-closed space; agrees with the
    brute-force closure there and leaves least hypotheses untouched.
    """
    if e.eclass < EClass.CAPACITY:
        raise ClassMismatch("fast closure needs at least a capacity")
    space = e.space
    space.require_intersection_closed()
    least = space.least_ids()
    out = [
        inf_of(e.values[least[i]] for i in member.indices())
        for member in space.family.members
    ]
    closed = from_values(space, out)
    if closed.eclass is not EClass.MEASURE:
        raise EvidenceError("closure did not verify as a measure")
    return closed


def close(e: EFunction, member_cap: int = BRUTE_FORCE_MEMBER_CAP) -> EFunction:
    """Fast path when available, brute force under the cap otherwise."""
    if e.eclass >= EClass.CAPACITY and e.space.intersection_closed:
        return closure_fast(e)
    return closure_bruteforce(e, member_cap)


def merge_convex(functions: Sequence[EFunction], weights: Sequence[Fraction | int]) -> EFunction:
    """Pointwise convex combination of capacities; the result is a capacity."""
    if len(functions) != len(weights):
        raise EvidenceError("need one weight per input")
    if not functions:
        raise EvidenceError("nothing to merge")
    ws = [Fraction(w) for w in weights]
    if any(w < 0 for w in ws):
        raise EvidenceError("weights must be non-negative")
    if sum(ws) != 1:
        raise EvidenceError(f"weights sum to {sum(ws)}, expected 1")
    space = functions[0].space
    for f in functions:
        if f.space is not space and f.space != space:
            raise EvidenceError("all inputs must share one space")
        if f.eclass < EClass.CAPACITY:
            raise ClassMismatch("merging needs capacities")
    n = len(space.family)
    out = []
    for hid in range(n):
        total = XValue(0)
        for f, w in zip(functions, ws):
            total = total + f.values[hid] * XValue(w)
        out.append(total)
    merged = from_values(space, out)
    if merged.eclass < EClass.CAPACITY:
        raise EvidenceError("convex combination lost antitonicity")
    return merged


def extend_to_powerset(e: EFunction, point_cap: int = POWERSET_POINT_CAP) -> EFunction:
    """Canonical extension of a measure to every subset of the model.

    A subset's evidence is the least evidence among the least hypotheses of
    its points; the extension coincides with ``e`` on the original family
    and is dominated by every capacity extension.
    """
    if e.eclass is not EClass.MEASURE:
        raise ClassMismatch("only measures extend canonically")
    space = e.space
    space.require_intersection_closed()
    size = space.model.size
    if size > point_cap:
        raise CapExceeded(f"model size {size} exceeds power-set cap {point_cap}")
    least = space.least_ids()
    full = Space(space.model, HypothesisClass.from_bits(size, range(1 << size), check=False))
    out = []
    for member in full.family.members:
        out.append(inf_of(e.values[least[i]] for i in member.indices()))
    extension = from_values(full, out)
    assert extension.eclass is EClass.MEASURE
    for hid, member in enumerate(space.family.members):
        assert extension.value_of(member) == e.values[hid]
    return extension


def dirac_measure(space: Space, point: int | str) -> EFunction:
    """Unit evidence on hypotheses containing the point, infinite elsewhere."""
    if isinstance(point, str):
        point = space.model.index(point)
    out = [ONE if point in m else INF for m in space.family.members]
    f = from_values(space, out)
    assert f.eclass is EClass.MEASURE
    return f


def unit_measure(space: Space) -> EFunction:
    """Constant evidence 1 on every nonempty hypothesis."""
    out = [INF if m.is_empty else ONE for m in space.family.members]
    f = from_values(space, out)
    assert f.eclass is EClass.MEASURE
    return f

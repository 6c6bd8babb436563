"""Cross-hypothesis validity: familywise evidence, false evidence rate,
selection post-processing, e-value step-up rejections and their closed
variant, and the general disutility-based notion that nests them all.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

from . import evidence as ev
from .evidence import EClass, EFunction, EvidenceError
from .kernels import EKernel, ProbabilityAssignment, SampleSpace, check_validity
from .xvalue import INF, ONE, XValue, as_xvalue, inf_of, sup_of

SELECTION_FAMILY_CAP = 20


class MultiplicityError(EvidenceError):
    pass


@dataclass(frozen=True)
class SelectionRule:
    """Finitely many selected hypothesis ids per outcome, fixed in advance."""

    sample: SampleSpace
    selected: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.selected) != self.sample.size:
            raise MultiplicityError("one selection per outcome is required")

    @classmethod
    def fixed(cls, sample: SampleSpace, ids: Sequence[int]) -> "SelectionRule":
        return cls(sample, tuple(tuple(ids) for _ in sample.outcomes))

    def at(self, x: int | str) -> tuple[int, ...]:
        if isinstance(x, str):
            x = self.sample.index(x)
        return self.selected[x]


def familywise_evidence(k: EKernel, point: int | str, x: int | str) -> XValue:
    """Largest evidence among hypotheses containing the point, at outcome x."""
    if isinstance(point, str):
        point = k.space.model.index(point)
    col = k.column(x)
    return sup_of(
        col.values[hid]
        for hid in k.space.family.nonempty_ids()
        if point in k.space.family.member(hid)
    )


@dataclass(frozen=True)
class FweEntry:
    point: str
    stat: XValue
    ok: bool


@dataclass(frozen=True)
class FweReport:
    entries: tuple[FweEntry, ...]
    controlled: bool
    agrees_with_least: Optional[bool]


def check_fwe(k: EKernel, pa: ProbabilityAssignment) -> FweReport:
    """Expected familywise evidence per point, via the exhaustive supremum.

    On intersection-closed spaces the supremum is re-derived from the least
    hypotheses and the agreement is reported, so both routes stay honest.
    """
    model = k.space.model
    entries = []
    controlled = True
    agrees: Optional[bool] = None
    if k.space.intersection_closed and k.eclass >= EClass.CAPACITY:
        agrees = True
    for pi in range(model.size):
        sup_var = [familywise_evidence(k, pi, xi) for xi in range(k.sample.size)]
        stat = pa.pmfs[pi].expectation(sup_var)
        ok = stat <= ONE
        controlled = controlled and ok
        if agrees is not None:
            least = k.space.least_id(pi)
            if any(sup_var[xi] != k.value(least, xi) for xi in range(k.sample.size)):
                agrees = False
        entries.append(FweEntry(point=model.points[pi], stat=stat, ok=ok))
    return FweReport(entries=tuple(entries), controlled=controlled, agrees_with_least=agrees)


@dataclass(frozen=True)
class FepFsp:
    fep: XValue
    fsp: Fraction


def fep_fsp(k: EKernel, point: int | str, rule: SelectionRule, x: int | str) -> FepFsp:
    """Average evidence against selected true hypotheses, and their share."""
    if isinstance(point, str):
        point = k.space.model.index(point)
    ids = rule.at(x)
    col = k.column(x)
    denom = max(len(ids), 1)
    true_ids = [hid for hid in ids if point in k.space.family.member(hid)]
    total = XValue(0)
    for hid in true_ids:
        total = total + col.values[hid]
    return FepFsp(fep=total / denom, fsp=Fraction(len(true_ids), denom))


@dataclass(frozen=True)
class FerPointwise:
    point: str
    outcome: str
    fep: XValue
    fsp_bound: XValue
    least_value: XValue
    ok: bool


@dataclass(frozen=True)
class FerReport:
    pointwise: tuple[FerPointwise, ...]
    pointwise_holds: bool
    fer: Optional[XValue]
    fer_controlled: Optional[bool]
    premise: Optional[XValue]
    premise_holds: Optional[bool]
    uniform_matches_validity: Optional[bool]


def check_fer(
    k: EKernel,
    pa: ProbabilityAssignment,
    rule: Optional[SelectionRule] = None,
    *,
    uniform: bool = False,
) -> FerReport:
    """False-evidence-rate control.

    Always verifies the pointwise chain FEP <= FSP * e(H_P|x) <= e(H_P|x)
    for the supplied rule (or all singleton rules in uniform mode). With a
    fixed rule the rate and the weaker premise expectation are reported;
    in uniform mode the singleton rules decide equivalence with plain
    validity.
    """
    if k.eclass < EClass.CAPACITY:
        raise ev.ClassMismatch("the false-evidence bound needs a capacity kernel")
    k.space.require_intersection_closed()
    model = k.space.model
    least = k.space.least_ids()

    rules: list[SelectionRule]
    if uniform:
        rules = [
            SelectionRule.fixed(k.sample, [hid])
            for hid in k.space.family.nonempty_ids()
        ]
    elif rule is not None:
        rules = [rule]
    else:
        raise MultiplicityError("supply a selection rule or set uniform=True")

    pointwise = []
    pointwise_holds = True
    for r in rules:
        for pi in range(model.size):
            for xi, x in enumerate(k.sample.outcomes):
                pair = fep_fsp(k, pi, r, xi)
                least_val = k.value(least[pi], xi)
                bound = XValue(pair.fsp) * least_val
                ok = pair.fep <= bound and bound <= least_val
                pointwise_holds = pointwise_holds and ok
                pointwise.append(
                    FerPointwise(
                        point=model.points[pi],
                        outcome=x,
                        fep=pair.fep,
                        fsp_bound=bound,
                        least_value=least_val,
                        ok=ok,
                    )
                )

    fer = premise = None
    fer_controlled = premise_holds = None
    uniform_matches = None
    if not uniform:
        r = rules[0]
        fer = sup_of(
            pa.pmfs[pi].expectation(
                [fep_fsp(k, pi, r, xi).fep for xi in range(k.sample.size)]
            )
            for pi in range(model.size)
        )
        premise = sup_of(
            pa.pmfs[pi].expectation(
                [
                    XValue(fep_fsp(k, pi, r, xi).fsp) * k.value(least[pi], xi)
                    for xi in range(k.sample.size)
                ]
            )
            for pi in range(model.size)
        )
        fer_controlled = fer <= ONE
        premise_holds = premise <= ONE
    else:
        worst = sup_of(
            pa.pmfs[pi].expectation(
                [fep_fsp(k, pi, r, xi).fep for xi in range(k.sample.size)]
            )
            for r in rules
            for pi in range(model.size)
        )
        fer = worst
        fer_controlled = worst <= ONE
        uniform_matches = fer_controlled == check_validity(k, pa).valid
    return FerReport(
        pointwise=tuple(pointwise),
        pointwise_holds=pointwise_holds,
        fer=fer,
        fer_controlled=fer_controlled,
        premise=premise,
        premise_holds=premise_holds,
        uniform_matches_validity=uniform_matches,
    )


# -- selection post-processing -------------------------------------------


def _inflated_column(col: EFunction, fsp_of_point: Sequence[Fraction]) -> EFunction:
    """Divide the least-hypothesis density by the selection share, re-close."""
    space = col.space
    least = space.least_ids()
    density = {
        least[pi]: col.values[least[pi]] / XValue(fsp_of_point[pi])
        for pi in range(space.model.size)
    }
    values = [
        inf_of(density[least[i]] for i in member.indices())
        for member in space.family.members
    ]
    return ev.from_values(space, values)


def postprocess_selection(k: EKernel, rule: SelectionRule) -> EKernel:
    """Trade uniform validity for selection-specific validity by inflating
    the least-hypothesis evidence with the reciprocal selection share.
    """
    if k.eclass < EClass.CAPACITY:
        raise ev.ClassMismatch("post-processing needs a capacity kernel")
    k.space.require_intersection_closed()
    cols = []
    for xi in range(k.sample.size):
        fsp = [
            fep_fsp(k, pi, rule, xi).fsp for pi in range(k.space.model.size)
        ]
        cols.append(_inflated_column(k.columns[xi], fsp))
    return EKernel(k.space, k.sample, cols)


def postprocess_efunction(e: EFunction, selected: Sequence[int]) -> EFunction:
    """Single-table version of the selection inflation (data already fixed)."""
    space = e.space
    space.require_intersection_closed()
    denom = max(len(selected), 1)
    members = space.family
    fsp = []
    for pi in range(space.model.size):
        count = sum(1 for hid in selected if pi in members.member(hid))
        fsp.append(Fraction(count, denom))
    return _inflated_column(e, fsp)


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple[int, ...]
    witness: dict[int, XValue]
    is_fixed_point: bool


def self_consistent_selection(
    e: EFunction, family_ids: Sequence[int], alpha: Fraction
) -> SelectionResult:
    """Largest selection that equals its own post-processed rejection set.

    Searches subsets by descending cardinality, canonical order inside a
    cardinality; the first fixed point wins, which makes ties
    deterministic. If no subset is a fixed point the empty selection is
    returned and flagged.
    """
    alpha = Fraction(alpha)
    if alpha <= 0:
        raise MultiplicityError("alpha must be positive")
    ids = sorted(family_ids)
    if len(ids) > SELECTION_FAMILY_CAP:
        raise ev.CapExceeded(
            f"{len(ids)} candidate hypotheses exceed the enumeration cap "
            f"{SELECTION_FAMILY_CAP}"
        )
    threshold = ONE / XValue(alpha)
    for size in range(len(ids), -1, -1):
        for combo in itertools.combinations(ids, size):
            inflated = postprocess_efunction(e, combo)
            rejected = tuple(g for g in ids if inflated.values[g] >= threshold)
            if rejected == combo:
                witness = {g: inflated.values[g] for g in ids}
                return SelectionResult(selected=combo, witness=witness, is_fixed_point=True)
    return SelectionResult(selected=(), witness={}, is_fixed_point=False)


# -- e-value step-up rejections --------------------------------------------


@dataclass(frozen=True)
class StepUpResult:
    rejected: tuple[int, ...]
    rejected_cells: tuple[int, ...]
    table: EFunction


def _binary_rejection_table(e_space, rejected_g: Sequence[int], alpha: Fraction) -> tuple[tuple[int, ...], EFunction]:
    """Binary table implied by G-level rejections.

    A least hypothesis is rejected exactly when it is contained in some
    rejected family member; the rest of the family follows by closure.
    """
    space = e_space
    level = ONE / XValue(alpha)
    members = space.family
    least_ids = sorted({space.least_id(pi) for pi in range(space.model.size)})
    rejected_cells = tuple(
        cell
        for cell in least_ids
        if any(
            members.member(cell).issubset(members.member(g)) for g in rejected_g
        )
    )
    cell_value = {
        cell: (level if cell in rejected_cells else XValue(0)) for cell in least_ids
    }
    least = space.least_ids()
    values = [
        inf_of(cell_value[least[i]] for i in member.indices())
        for member in members.members
    ]
    return rejected_cells, ev.from_values(space, values)


def ebh(e: EFunction, family_ids: Sequence[int], alpha: Fraction) -> StepUpResult:
    """Step-up rejection over a finite family of e-values.

    With K candidates sorted by decreasing evidence, keep the largest k
    whose k-th value reaches K/(alpha*k); the rejections are rendered as a
    binary table over the whole space.
    """
    alpha = Fraction(alpha)
    if alpha <= 0:
        raise MultiplicityError("alpha must be positive")
    e.space.require_intersection_closed()
    ids = sorted(family_ids)
    ranked = sorted(ids, key=lambda g: (e.values[g], -g), reverse=True)
    big_k = len(ids)
    best_k = 0
    for kth, g in enumerate(ranked, start=1):
        if e.values[g] >= XValue(Fraction(big_k, 1)) / XValue(alpha * kth):
            best_k = kth
    rejected = tuple(sorted(ranked[:best_k]))
    cells, table = _binary_rejection_table(e.space, rejected, alpha)
    return StepUpResult(rejected=rejected, rejected_cells=cells, table=table)


def closed_ebh(e: EFunction, family_ids: Sequence[int], alpha: Fraction) -> StepUpResult:
    """Reject the largest self-consistent selection instead of the step-up set."""
    selection = self_consistent_selection(e, family_ids, alpha)
    cells, table = _binary_rejection_table(e.space, selection.selected, Fraction(alpha))
    return StepUpResult(rejected=selection.selected, rejected_cells=cells, table=table)


# -- general disutility-based validity --------------------------------------


class PhiFlagViolation(MultiplicityError):
    def __init__(self, flag: str, detail: str):
        self.flag = flag
        super().__init__(f"disutility is not {flag}: {detail}")


class PhiSpec:
    """Disutility of an evidence table when a given point is the truth.

    Subclasses implement ``value``; the three structural flags (local,
    positively homogeneous, monotone) are verified on sampled tables, not
    proved.
    """

    name = "custom"

    def value(self, space, point: int, table: Sequence[XValue]) -> XValue:
        raise NotImplementedError

    def one_table(self, space, point: int) -> tuple[XValue, ...]:
        return tuple(
            ONE if point in m else XValue(0) for m in space.family.members
        )

    def phi_one(self, space, point: int) -> XValue:
        return self.value(space, point, self.one_table(space, point))

    def verify_flags(self, space, samples: Sequence[Sequence[XValue]]) -> None:
        scalars = [XValue(0), XValue(Fraction(1, 3)), XValue(2)]
        n = len(space.family)
        for table in samples:
            table = tuple(as_xvalue(v) for v in table)
            for point in range(space.model.size):
                masked = tuple(
                    v * w for v, w in zip(table, self.one_table(space, point))
                )
                if self.value(space, point, table) != self.value(space, point, masked):
                    raise PhiFlagViolation("local", f"table {table} at point {point}")
                base = self.value(space, point, table)
                for c in scalars:
                    scaled = tuple(v * c for v in table)
                    if self.value(space, point, scaled) != base * c:
                        raise PhiFlagViolation(
                            "positively homogeneous",
                            f"scale {c} of table {table} at point {point}",
                        )
                lowered = tuple(
                    XValue(0) if i % 2 else v for i, v in enumerate(table)
                )
                if self.value(space, point, lowered) > base:
                    raise PhiFlagViolation(
                        "monotone", f"lowering {table} raised the value at {point}"
                    )


class SupOverTrue(PhiSpec):
    """Worst evidence among true hypotheses; recovers familywise control."""

    name = "sup-over-true"

    def value(self, space, point, table):
        return sup_of(
            table[hid]
            for hid in space.family.nonempty_ids()
            if point in space.family.member(hid)
        )


class AvgOverSelection(PhiSpec):
    """Average evidence over the true part of a fixed selection; recovers FER."""

    name = "avg-over-selection"

    def __init__(self, selected: Sequence[int]):
        self.selected = tuple(selected)

    def value(self, space, point, table):
        denom = max(len(self.selected), 1)
        total = XValue(0)
        for hid in self.selected:
            if point in space.family.member(hid):
                total = total + table[hid]
        return total / denom


class SupOverSelections(PhiSpec):
    """Best case over every selection out of the family; equals sup-over-true."""

    name = "sup-over-selections"

    def value(self, space, point, table):
        # The average over a selection is maximized by the singleton with the
        # largest true evidence, so the sup over selections is the sup over
        # true hypotheses.
        return sup_of(
            table[hid]
            for hid in space.family.nonempty_ids()
            if point in space.family.member(hid)
        )


class CustomPhi(PhiSpec):
    def __init__(self, fn: Callable[[int, Sequence[XValue]], XValue], name: str = "custom"):
        self._fn = fn
        self.name = name

    def value(self, space, point, table):
        return self._fn(point, table)


@dataclass(frozen=True)
class PhiPointwise:
    point: str
    outcome: str
    phi_value: XValue
    bound: XValue
    ok: bool


@dataclass(frozen=True)
class PhiReport:
    pointwise: tuple[PhiPointwise, ...]
    pointwise_holds: bool
    premise_stats: tuple[XValue, ...]
    general_stats: tuple[XValue, ...]
    premise_holds: bool
    valid: bool
    implication_ok: bool


def _phi_samples(space, k: EKernel) -> list[tuple[XValue, ...]]:
    n = len(space.family)
    grid = [XValue(0), XValue(1), XValue(2), INF]
    samples = [tuple(grid[(i + s) % len(grid)] for i in range(n)) for s in range(4)]
    samples.extend(tuple(col.values) for col in k.columns)
    return samples


def check_phi_validity(
    k: EKernel, pa: ProbabilityAssignment, phi: PhiSpec
) -> PhiReport:
    """Disutility-based validity via the least-hypothesis bound.

    Verifies the pointwise inequality phi(e(.|x)) <= e(H_P|x) * phi(1_P)
    for every point and outcome, then the expectation form on both sides.
    Refuses disutilities that fail a sampled structural flag.
    """
    if k.eclass < EClass.CAPACITY:
        raise ev.ClassMismatch("the least-hypothesis bound needs a capacity kernel")
    k.space.require_intersection_closed()
    phi.verify_flags(k.space, _phi_samples(k.space, k))
    model = k.space.model
    least = k.space.least_ids()
    pointwise = []
    holds = True
    premise_stats = []
    general_stats = []
    for pi in range(model.size):
        factor = phi.phi_one(k.space, pi)
        phi_var = []
        premise_var = []
        for xi, x in enumerate(k.sample.outcomes):
            col = k.columns[xi]
            val = phi.value(k.space, pi, col.values)
            bound = k.value(least[pi], xi) * factor
            ok = val <= bound
            holds = holds and ok
            pointwise.append(
                PhiPointwise(
                    point=model.points[pi], outcome=x, phi_value=val, bound=bound, ok=ok
                )
            )
            phi_var.append(val)
            premise_var.append(bound)
        premise_stats.append(pa.pmfs[pi].expectation(premise_var))
        general_stats.append(pa.pmfs[pi].expectation(phi_var))
    premise_ok = all(s <= ONE for s in premise_stats)
    valid = all(s <= ONE for s in general_stats)
    implication_ok = (not premise_ok) or valid
    return PhiReport(
        pointwise=tuple(pointwise),
        pointwise_holds=holds,
        premise_stats=tuple(premise_stats),
        general_stats=tuple(general_stats),
        premise_holds=premise_ok,
        valid=valid,
        implication_ok=implication_ok,
    )

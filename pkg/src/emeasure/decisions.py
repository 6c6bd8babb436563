"""Decision making under evidence: consequence tables, the hypothesis
class they induce, consequence bounds, integrated loss, admissibility and
evidence against optimality.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from . import evidence as ev
from . import kernels as kn
from .evidence import EClass, EFunction, EvidenceError
from .integration import OrderMeasurableFn, shilkret_integral
from .kernels import EKernel, ProbabilityAssignment, pushforward_kernel
from .spaces import (
    HypothesisClass,
    Model,
    PointSet,
    Preorder,
    Space,
    SpaceError,
    class_from_preorder,
    union_closure,
)
from .xvalue import ONE, XValue, as_xvalue, sup_of


class DecisionError(EvidenceError):
    pass


class OrderMeasurabilityViolation(DecisionError):
    pass


@dataclass(frozen=True)
class ConsequenceSpace:
    """Consequence labels with an explicit preorder; entry (i, j) reads i >= j
    ('i is at least as bad as j')."""

    elements: tuple[str, ...]
    order: Preorder

    def __post_init__(self):
        if len(set(self.elements)) != len(self.elements):
            raise DecisionError("consequence labels must be unique")
        if self.order.size != len(self.elements):
            raise DecisionError("order matrix size must match the elements")
        self.order.validate()

    @classmethod
    def numeric(cls, values: Sequence[XValue]) -> "ConsequenceSpace":
        distinct = sorted(set(values), key=lambda v: (v.is_inf, 0 if v.is_inf else v.as_fraction()))
        labels = tuple(v.record() for v in distinct)
        pairs = [
            (i, j)
            for i, a in enumerate(distinct)
            for j, b in enumerate(distinct)
            if a >= b
        ]
        return cls(labels, Preorder.from_pairs(len(labels), pairs))

    def index(self, label: str) -> int:
        try:
            return self.elements.index(label)
        except ValueError:
            raise DecisionError(f"unknown consequence {label!r}") from None

    def at_least(self, a: str, b: str) -> bool:
        """True when consequence a is at least as bad as b."""
        return self.order.holds(self.index(a), self.index(b))


@dataclass(frozen=True)
class ConsequenceTable:
    """Total map (decision, point) -> consequence element."""

    model: Model
    decisions: tuple[str, ...]
    cspace: ConsequenceSpace
    entries: tuple[tuple[str, ...], ...]  # entries[point][decision]

    def __post_init__(self):
        if len(self.entries) != self.model.size:
            raise DecisionError("one row per model point is required")
        for row in self.entries:
            if len(row) != len(self.decisions):
                raise DecisionError("one consequence per decision is required")
            for c in row:
                self.cspace.index(c)

    @classmethod
    def of(
        cls,
        model: Model,
        decisions: Sequence[str],
        cspace: ConsequenceSpace,
        table: Mapping[str, Mapping[str, str]],
    ) -> "ConsequenceTable":
        rows = []
        for p in model.points:
            if p not in table:
                raise DecisionError(f"no consequences for point {p!r}")
            rows.append(tuple(table[p][d] for d in decisions))
        return cls(model, tuple(decisions), cspace, tuple(rows))

    def consequence(self, point: int | str, decision: int | str) -> str:
        if isinstance(point, str):
            point = self.model.index(point)
        if isinstance(decision, str):
            decision = self.decisions.index(decision)
        return self.entries[point][decision]

    def row_dominates(self, hi: int, lo: int) -> bool:
        """Row hi is uniformly at least as bad as row lo across decisions."""
        return all(
            self.cspace.at_least(self.entries[hi][d], self.entries[lo][d])
            for d in range(len(self.decisions))
        )


@dataclass(frozen=True)
class NumericLoss:
    """Non-negative extended losses per (point, decision)."""

    model: Model
    decisions: tuple[str, ...]
    entries: tuple[tuple[XValue, ...], ...]  # entries[point][decision]

    def __post_init__(self):
        if len(self.entries) != self.model.size:
            raise DecisionError("one row per model point is required")
        for row in self.entries:
            if len(row) != len(self.decisions):
                raise DecisionError("one loss per decision is required")

    @classmethod
    def of(
        cls,
        model: Model,
        decisions: Sequence[str],
        table: Mapping[str, Mapping[str, object]],
    ) -> "NumericLoss":
        rows = []
        for p in model.points:
            rows.append(tuple(as_xvalue(table[p][d]) for d in decisions))
        return cls(model, tuple(decisions), tuple(rows))

    def loss(self, point: int, decision: int) -> XValue:
        return self.entries[point][decision]

    def column(self, decision: int | str) -> tuple[XValue, ...]:
        if isinstance(decision, str):
            decision = self.decisions.index(decision)
        return tuple(row[decision] for row in self.entries)

    def to_consequence_table(self) -> ConsequenceTable:
        values = [v for row in self.entries for v in row]
        cspace = ConsequenceSpace.numeric(values)
        rows = tuple(tuple(v.record() for v in row) for row in self.entries)
        return ConsequenceTable(self.model, self.decisions, cspace, rows)


def build_consequence_class(table: ConsequenceTable) -> Space:
    """Smallest intersection-closed family exposing every lower-bound claim.

    Points are preordered by uniform dominance of their consequence rows;
    the class of upper sets of that preorder is returned, and each
    bound hypothesis is verified to be a member.
    """
    n = table.model.size
    pairs = [
        (lo, hi)
        for lo in range(n)
        for hi in range(n)
        if table.row_dominates(hi, lo)
    ]
    pre = Preorder.from_pairs(n, pairs).transitive_closure()
    space = class_from_preorder(table.model, pre)
    for d in range(len(table.decisions)):
        for c in table.cspace.elements:
            bits = hypothesis_for_bound(table, d, c).bits
            assert bits in space.family, "bound hypothesis escaped the induced class"
    return space


def hypothesis_for_bound(table: ConsequenceTable, decision: int | str, c: str) -> PointSet:
    """Points whose consequence of the decision is at least as bad as c."""
    if isinstance(decision, str):
        decision = table.decisions.index(decision)
    table.cspace.index(c)
    bits = 0
    for pi in range(table.model.size):
        if table.cspace.at_least(table.entries[pi][decision], c):
            bits |= 1 << pi
    return PointSet(table.model.size, bits)


def _require_order_measurable(space: Space, table: ConsequenceTable) -> Space:
    induced = build_consequence_class(table)
    for member in induced.family.members:
        if member.bits not in space.family:
            raise OrderMeasurabilityViolation(
                "kernel space misses the bound hypothesis "
                f"{member.labels(table.model)}"
            )
    return induced


def _distinct_rows(table: ConsequenceTable) -> list[tuple[str, int]]:
    """One representative point per distinct consequence row."""
    seen: dict[tuple[str, ...], int] = {}
    for pi in range(table.model.size):
        seen.setdefault(table.entries[pi], pi)
    return [(table.model.points[pi], pi) for pi in seen.values()]


@dataclass(frozen=True)
class BoundEntry:
    benchmark: str
    point: str
    stat: XValue
    ok: bool


@dataclass(frozen=True)
class BoundReport:
    entries: tuple[BoundEntry, ...]
    holds: bool


def check_econsequence_bound(
    k: EKernel, pa: ProbabilityAssignment, table: ConsequenceTable
) -> BoundReport:
    """Uniform consequence bound: for each benchmark row and each point whose
    row dominates it, the expected worst evidence across decisions is at
    most one."""
    induced = _require_order_measurable(k.space, table)
    entries = []
    holds = True
    for label, qi in _distinct_rows(table):
        h_row = induced.family.member(induced.least_id(qi))
        bound_ids = [
            k.space.family.id_of(
                hypothesis_for_bound(table, d, table.entries[qi][d]).bits
            )
            for d in range(len(table.decisions))
        ]
        for pi in h_row.indices():
            sup_var = [
                sup_of(k.value(hid, xi) for hid in bound_ids)
                for xi in range(k.sample.size)
            ]
            stat = pa.pmfs[pi].expectation(sup_var)
            ok = stat <= ONE
            holds = holds and ok
            entries.append(
                BoundEntry(
                    benchmark=label, point=k.space.model.points[pi], stat=stat, ok=ok
                )
            )
    return BoundReport(entries=tuple(entries), holds=holds)


def check_posthoc_consequence_bound(
    k: EKernel,
    pa: ProbabilityAssignment,
    table: ConsequenceTable,
    rule: kn.LevelRule,
) -> BoundReport:
    """Post-hoc version: expected miss rate of the per-decision confidence
    sets under a data-dependent level. The canonical level 1/worst-evidence
    reproduces the uniform bound statistic exactly."""
    induced = _require_order_measurable(k.space, table)
    canonical = rule == "canonical"
    entries = []
    holds = True
    for label, qi in _distinct_rows(table):
        h_row = induced.family.member(induced.least_id(qi))
        bound_ids = [
            k.space.family.id_of(
                hypothesis_for_bound(table, d, table.entries[qi][d]).bits
            )
            for d in range(len(table.decisions))
        ]
        sup_var = [
            sup_of(k.value(hid, xi) for hid in bound_ids)
            for xi in range(k.sample.size)
        ]
        for pi in h_row.indices():
            pmf = pa.pmfs[pi]
            stat = XValue(0)
            for xi, x in enumerate(k.sample.outcomes):
                if canonical:
                    level = ONE / sup_var[xi]
                elif callable(rule):
                    level = as_xvalue(rule(qi, x))
                else:
                    level = as_xvalue(rule[x])
                missed = any(
                    k.value(hid, xi) >= ONE / level for hid in bound_ids
                )
                stat = stat + XValue(pmf.mass[xi]) * ((ONE if missed else XValue(0)) / level)
            ok = stat <= ONE
            holds = holds and ok
            entries.append(
                BoundEntry(
                    benchmark=label, point=k.space.model.points[pi], stat=stat, ok=ok
                )
            )
    return BoundReport(entries=tuple(entries), holds=holds)


def e_integrated_loss(loss: NumericLoss, e: EFunction, decision: int | str) -> XValue:
    """Evidence-weighted worst loss of a decision.

    Three independent evaluations must and do agree: through the least
    hypotheses, through the per-level bound hypotheses, and as a plain
    integral of the loss column.
    """
    if isinstance(decision, str):
        decision = loss.decisions.index(decision)
    if e.eclass is not EClass.MEASURE:
        raise DecisionError("integrated loss needs a measure")
    space = e.space
    space.require_intersection_closed()
    column = loss.column(decision)

    least = space.least_ids()
    by_least = sup_of(
        column[pi] / e.values[least[pi]] for pi in range(space.model.size)
    )

    ratios = []
    for pi in range(space.model.size):
        bits = 0
        for qi in range(space.model.size):
            if column[qi] >= column[pi]:
                bits |= 1 << qi
        ratios.append(column[pi] / e.value_of(bits))
    by_bounds = sup_of(ratios)

    direct = shilkret_integral(OrderMeasurableFn(space, column), e)

    if not (by_least == by_bounds == direct):
        raise DecisionError(
            f"integrated-loss evaluations disagree: {by_least}, {by_bounds}, {direct}"
        )
    return direct


@dataclass(frozen=True)
class GrunwaldEntry:
    point: str
    stat: XValue
    ok: bool
    markov_ok: bool
    within_econsequence: bool


@dataclass(frozen=True)
class GrunwaldReport:
    entries: tuple[GrunwaldEntry, ...]
    holds: bool


def check_grunwald_bound(
    k: EKernel, pa: ProbabilityAssignment, loss: NumericLoss
) -> GrunwaldReport:
    """Integrated-loss ratio bound, with its two sanity layers.

    Per point the expectation of the worst ratio loss/integrated-loss must
    stay at most one; pointwise the ratio is within the evidence against
    the matching bound hypothesis, which also caps the statistic by the
    uniform-consequence statistic.
    """
    table = loss.to_consequence_table()
    _require_order_measurable(k.space, table)
    n_dec = len(loss.decisions)
    model = k.space.model
    integrated: list[list[XValue]] = []  # [decision][outcome]
    for d in range(n_dec):
        column = loss.column(d)
        fn = OrderMeasurableFn(k.space, column)
        integrated.append(
            [shilkret_integral(fn, k.columns[xi]) for xi in range(k.sample.size)]
        )

    bound_ids = [
        [
            k.space.family.id_of(
                PointSet.from_indices(
                    model.size,
                    [
                        qi
                        for qi in range(model.size)
                        if loss.entries[qi][d] >= loss.entries[pi][d]
                    ],
                ).bits
            )
            for d in range(n_dec)
        ]
        for pi in range(model.size)
    ]

    entries = []
    holds = True
    for pi in range(model.size):
        ratio_var = []
        markov_ok = True
        within = True
        for xi in range(k.sample.size):
            ratios = []
            evid = []
            for d in range(n_dec):
                ratio = loss.entries[pi][d] / integrated[d][xi]
                bound_evidence = k.value(bound_ids[pi][d], xi)
                ratios.append(ratio)
                evid.append(bound_evidence)
                if ratio > bound_evidence:
                    markov_ok = False
            worst_ratio = sup_of(ratios)
            if worst_ratio > sup_of(evid):
                within = False
            ratio_var.append(worst_ratio)
        stat = pa.pmfs[pi].expectation(ratio_var)
        ok = stat <= ONE
        holds = holds and ok
        entries.append(
            GrunwaldEntry(
                point=model.points[pi],
                stat=stat,
                ok=ok,
                markov_ok=markov_ok,
                within_econsequence=within,
            )
        )
    return GrunwaldReport(entries=tuple(entries), holds=holds)


@dataclass(frozen=True)
class AdmissibilityResult:
    order: tuple[tuple[bool, ...], ...]  # order[i][j]: decision i at least as good
    admissible: tuple[str, ...]


def admissible_decisions(e: EFunction, table: ConsequenceTable) -> AdmissibilityResult:
    """Uniform evidential dominance between decisions and the undominated set.

    A decision is preferred when, against every benchmark consequence, it
    carries at least as much evidence that the truth is at least that bad.
    Every bound hypothesis must be measurable; a missing one is reported by
    name instead of guessed around.
    """
    n_dec = len(table.decisions)
    evidence_at: list[list[XValue]] = []
    for d in range(n_dec):
        row = []
        for c in table.cspace.elements:
            bits = hypothesis_for_bound(table, d, c).bits
            if bits not in e.space.family:
                raise OrderMeasurabilityViolation(
                    f"evidence is undefined on the bound hypothesis for "
                    f"decision {table.decisions[d]!r} at consequence {c!r}"
                )
            row.append(e.value_of(bits))
        evidence_at.append(row)
    geq = tuple(
        tuple(
            all(evidence_at[i][ci] >= evidence_at[j][ci] for ci in range(len(table.cspace.elements)))
            for j in range(n_dec)
        )
        for i in range(n_dec)
    )
    admissible = tuple(
        table.decisions[i]
        for i in range(n_dec)
        if not any(geq[j][i] and not geq[i][j] for j in range(n_dec))
    )
    return AdmissibilityResult(order=geq, admissible=admissible)


@dataclass(frozen=True)
class OptimalityResult:
    space: Space
    decision_sets: dict[str, PointSet]
    optimal: Optional[dict[str, str]]  # point -> unique best decision


def optimality_class(loss: NumericLoss) -> OptimalityResult:
    """Group points by which decisions are best for them.

    Argmin ties put the point into every tying group, so the map back to a
    single optimal decision exists only in the tie-free case.
    """
    model = loss.model
    sets: dict[str, int] = {d: 0 for d in loss.decisions}
    unique: dict[str, str] = {}
    tie_free = True
    for pi in range(model.size):
        row = loss.entries[pi]
        best = min(row)
        winners = [d for d, v in zip(loss.decisions, row) if v == best]
        for d in winners:
            sets[d] |= 1 << pi
        if len(winners) == 1:
            unique[model.points[pi]] = winners[0]
        else:
            tie_free = False
    generators = [PointSet(model.size, bits) for bits in sets.values()]
    space = Space(model, union_closure(model.size, generators))
    return OptimalityResult(
        space=space,
        decision_sets={d: PointSet(model.size, b) for d, b in sets.items()},
        optimal=unique if tie_free else None,
    )


def evidence_against_optimality(
    k: EKernel, loss: NumericLoss, pa: Optional[ProbabilityAssignment] = None
):
    """Push the kernel forward along the optimal-decision map.

    The resulting kernel scores, for each set of decisions, the evidence
    against the claim that the truly optimal decision lies in the set.
    """
    result = optimality_class(loss)
    if result.optimal is None:
        raise DecisionError("optimal decisions are not unique; no pushforward map")
    target_model = Model(tuple(loss.decisions))
    target = Space(
        target_model,
        HypothesisClass.from_bits(
            target_model.size, range(1 << target_model.size), check=False
        ),
    )
    return pushforward_kernel(k, result.optimal, target, pa)

"""Data-indexed evidence tables and every expectation-based check.

An E-kernel assigns an evidence table to each outcome of a finite sample
space. Validity of a kernel (and of stopped processes, posteriors,
pushforwards, predictive kernels) is decided by exact rational
expectations; nothing here is simulated.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

from . import evidence as ev
from .evidence import EClass, EFunction, EvidenceError
from .spaces import HypothesisClass, Model, Space, SpaceError
from .xvalue import INF, ONE, XValue, as_xvalue, inf_of, sup_of

STOPPING_RULE_CAP = 100_000
TREE_DEPTH_CAP = 4
TREE_BRANCHING_CAP = 3


class KernelError(EvidenceError):
    pass


class MeasurabilityError(KernelError):
    pass


@dataclass(frozen=True)
class SampleSpace:
    outcomes: tuple[str, ...]

    def __post_init__(self):
        if not self.outcomes:
            raise KernelError("a sample space needs at least one outcome")
        if len(set(self.outcomes)) != len(self.outcomes):
            raise KernelError("outcome labels must be unique")

    @property
    def size(self) -> int:
        return len(self.outcomes)

    def index(self, label: str) -> int:
        try:
            return self.outcomes.index(label)
        except ValueError:
            raise KernelError(f"unknown outcome {label!r}") from None


@dataclass(frozen=True)
class Pmf:
    """Probability mass function over a sample space; masses sum to one exactly."""

    sample: SampleSpace
    mass: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.mass) != self.sample.size:
            raise KernelError("one mass per outcome is required")
        if any(m < 0 for m in self.mass):
            raise KernelError("masses must be non-negative")
        if sum(self.mass) != 1:
            raise KernelError(f"masses sum to {sum(self.mass)}, expected 1")

    @classmethod
    def of(cls, sample: SampleSpace, table: Mapping[str, object]) -> "Pmf":
        return cls(
            sample, tuple(Fraction(table.get(x, 0)) for x in sample.outcomes)
        )

    def __call__(self, x: int | str) -> Fraction:
        if isinstance(x, str):
            x = self.sample.index(x)
        return self.mass[x]

    def expectation(self, values: Sequence[XValue]) -> XValue:
        """Exact expectation; infinite values against zero mass contribute 0."""
        total = XValue(0)
        for m, v in zip(self.mass, values):
            total = total + XValue(m) * v
        return total


@dataclass(frozen=True)
class ProbabilityAssignment:
    """One distribution per model point."""

    model: Model
    pmfs: tuple[Pmf, ...]

    def __post_init__(self):
        if len(self.pmfs) != self.model.size:
            raise KernelError("one distribution per model point is required")

    @classmethod
    def of(cls, model: Model, table: Mapping[str, Pmf]) -> "ProbabilityAssignment":
        missing = [p for p in model.points if p not in table]
        if missing:
            raise KernelError(f"no distribution for points {missing}")
        return cls(model, tuple(table[p] for p in model.points))

    def pmf(self, point: int | str) -> Pmf:
        if isinstance(point, str):
            point = self.model.index(point)
        return self.pmfs[point]

    @property
    def sample(self) -> SampleSpace:
        return self.pmfs[0].sample


class EKernel:
    """Per-outcome evidence tables sharing one hypothesis space."""

    def __init__(self, space: Space, sample: SampleSpace, columns: Sequence[EFunction]):
        if len(columns) != sample.size:
            raise KernelError("one evidence table per outcome is required")
        for col in columns:
            if col.space != space:
                raise KernelError("all outcome tables must share the space")
        self.space = space
        self.sample = sample
        self.columns = tuple(columns)

    @classmethod
    def from_table(
        cls, space: Space, sample: SampleSpace, table: Mapping[int, Mapping[str, object]]
    ) -> "EKernel":
        cols = []
        for x in sample.outcomes:
            cols.append(ev.classify(space, {h: row[x] for h, row in table.items()}))
        return cls(space, sample, cols)

    @property
    def eclass(self) -> EClass:
        return min(col.eclass for col in self.columns)

    def column(self, x: int | str) -> EFunction:
        if isinstance(x, str):
            x = self.sample.index(x)
        return self.columns[x]

    def value(self, hid: int, x: int | str) -> XValue:
        return self.column(x).values[hid]

    def variable(self, hid: int) -> tuple[XValue, ...]:
        """The evidence against one hypothesis as a function of the outcome."""
        return tuple(col.values[hid] for col in self.columns)

    def expectation(self, hid: int, pmf: Pmf) -> XValue:
        return pmf.expectation(self.variable(hid))

    def dominates(self, other: "EKernel") -> bool:
        return all(a.dominates(b) for a, b in zip(self.columns, other.columns))


def constant_kernel(space: Space, sample: SampleSpace, fn: EFunction) -> EKernel:
    return EKernel(space, sample, [fn] * sample.size)


def likelihood_kernel(space: Space, pa: ProbabilityAssignment, reference: Pmf) -> EKernel:
    """Inverse-likelihood kernel relative to a reference distribution.

    Evidence against a point's least hypothesis at outcome x is
    reference(x) / P(x); the rest of the family is filled in by closure.
    Valid whenever the reference is a probability mass function.
    """
    space.require_intersection_closed()
    least = space.least_ids()
    cols = []
    for xi in range(reference.sample.size):
        density = {}
        for pi in range(space.model.size):
            density[least[pi]] = XValue(reference.mass[xi]) / XValue(pa.pmfs[pi].mass[xi])
        values = [
            inf_of(density[least[i]] for i in member.indices())
            for member in space.family.members
        ]
        cols.append(ev.from_values(space, values))
    return EKernel(space, reference.sample, cols)


# -- hypothesis-wise validity ------------------------------------------


@dataclass(frozen=True)
class ValidityEntry:
    hid: int
    point: str
    stat: XValue
    ok: bool


@dataclass(frozen=True)
class ValidityReport:
    entries: tuple[ValidityEntry, ...]
    valid: bool

    def first_violation(self) -> Optional[ValidityEntry]:
        return next((e for e in self.entries if not e.ok), None)


def check_validity(k: EKernel, pa: ProbabilityAssignment) -> ValidityReport:
    """Exact expectation of every (nonempty hypothesis, contained point) pair."""
    entries = []
    ok_all = True
    for hid in k.space.family.nonempty_ids():
        member = k.space.family.member(hid)
        for pi in member.indices():
            stat = k.expectation(hid, pa.pmfs[pi])
            ok = stat <= ONE
            ok_all = ok_all and ok
            entries.append(
                ValidityEntry(hid=hid, point=k.space.model.points[pi], stat=stat, ok=ok)
            )
    return ValidityReport(entries=tuple(entries), valid=ok_all)


def close_kernel(k: EKernel) -> EKernel:
    """Close every outcome's table; validity is neither gained nor lost."""
    closed = EKernel(k.space, k.sample, [ev.closure_fast(col) for col in k.columns])
    assert closed.dominates(k)
    return closed


def merge_convex_kernels(kernels: Sequence[EKernel], weights: Sequence[Fraction | int]) -> EKernel:
    first = kernels[0]
    cols = []
    for xi in range(first.sample.size):
        cols.append(ev.merge_convex([k.columns[xi] for k in kernels], weights))
    return EKernel(first.space, first.sample, cols)


# -- confidence sets and post-hoc levels -------------------------------


def confidence_set(k: EKernel, alpha: Fraction | int, x: int | str) -> tuple[int, ...]:
    """Hypotheses whose evidence at x stays below 1/alpha (never the empty one)."""
    alpha = Fraction(alpha)
    if alpha <= 0:
        raise KernelError("alpha must be positive")
    threshold = ONE / XValue(alpha)
    col = k.column(x)
    return tuple(
        hid for hid in range(len(k.space.family)) if col.values[hid] < threshold
    )


def rejection_set(k: EKernel, alpha: Fraction | int, x: int | str) -> tuple[int, ...]:
    alpha = Fraction(alpha)
    if alpha <= 0:
        raise KernelError("alpha must be positive")
    threshold = ONE / XValue(alpha)
    col = k.column(x)
    return tuple(
        hid for hid in k.space.family.nonempty_ids() if col.values[hid] >= threshold
    )


LevelRule = Union[Mapping[str, XValue], Callable[[int, str], XValue], str]


def canonical_level_rule(k: EKernel) -> Callable[[int, str], XValue]:
    """The data-dependent level that matches the evidence: 1 / e(H | x)."""
    return lambda hid, x: ONE / k.value(hid, x)


def _resolve_rule(k: EKernel, rule: LevelRule) -> Callable[[int, str], XValue]:
    if rule == "canonical":
        return canonical_level_rule(k)
    if callable(rule):
        return rule
    table = {x: as_xvalue(v) for x, v in rule.items()}
    return lambda hid, x: table[x]


@dataclass(frozen=True)
class PosthocEntry:
    hid: int
    point: str
    stat: XValue
    ok: bool


@dataclass(frozen=True)
class PosthocReport:
    entries: tuple[PosthocEntry, ...]
    holds: bool
    matches_validity_stat: Optional[bool] = None


def check_posthoc_validity(
    k: EKernel, pa: ProbabilityAssignment, rule: LevelRule
) -> PosthocReport:
    """Expected miss rate of the level-rule confidence sets, at the rule's level.

    For each pair the statistic is the expectation of
    1{e(H|X) >= 1/level(X)} / level(X); for the canonical rule it collapses
    to the plain validity statistic, which the report cross-checks.
    """
    level_of = _resolve_rule(k, rule)
    canonical = rule == "canonical"
    entries = []
    holds = True
    matches = True
    for hid in k.space.family.nonempty_ids():
        member = k.space.family.member(hid)
        for pi in member.indices():
            pmf = pa.pmfs[pi]
            stat = XValue(0)
            for xi, x in enumerate(k.sample.outcomes):
                level = as_xvalue(level_of(hid, x))
                missed = k.value(hid, xi) >= ONE / level
                contribution = (ONE if missed else XValue(0)) / level
                stat = stat + XValue(pmf.mass[xi]) * contribution
            ok = stat <= ONE
            holds = holds and ok
            if canonical and stat != k.expectation(hid, pmf):
                matches = False
            entries.append(
                PosthocEntry(hid=hid, point=k.space.model.points[pi], stat=stat, ok=ok)
            )
    return PosthocReport(
        entries=tuple(entries),
        holds=holds,
        matches_validity_stat=matches if canonical else None,
    )


# -- updating -----------------------------------------------------------


@dataclass(frozen=True)
class PosteriorEntry:
    hid: int
    point: Optional[str]
    stat: XValue
    bound: XValue
    ok: bool


@dataclass(frozen=True)
class PosteriorReport:
    entries: tuple[PosteriorEntry, ...]
    holds: bool


def _product_columns(prior: EFunction, k: EKernel) -> list[EFunction]:
    cols = []
    for col in k.columns:
        values = [p * v for p, v in zip(prior.values, col.values)]
        cols.append(ev.from_values(k.space, values))
    return cols


def eposterior_raw(
    prior: EFunction, k: EKernel, pa: ProbabilityAssignment
) -> tuple[EKernel, PosteriorReport]:
    """Hypothesis-wise product of a prior table with a kernel.

    The product stays a capacity, and the worst expectation over the
    points of each hypothesis is bounded by the prior's evidence there.
    """
    if prior.eclass < EClass.CAPACITY or k.eclass < EClass.CAPACITY:
        raise ev.ClassMismatch("updating needs capacities")
    post = EKernel(k.space, k.sample, _product_columns(prior, k))
    entries = []
    holds = True
    for hid in k.space.family.nonempty_ids():
        member = k.space.family.member(hid)
        stat = sup_of(post.expectation(hid, pa.pmfs[pi]) for pi in member.indices())
        ok = stat <= prior.values[hid]
        holds = holds and ok
        entries.append(
            PosteriorEntry(hid=hid, point=None, stat=stat, bound=prior.values[hid], ok=ok)
        )
    return post, PosteriorReport(entries=tuple(entries), holds=holds)


def eposterior_closed(
    prior: EFunction, k: EKernel, pa: ProbabilityAssignment
) -> tuple[EKernel, PosteriorReport]:
    """Product followed by per-outcome closure; bounds go through least hypotheses."""
    if prior.eclass < EClass.CAPACITY or k.eclass < EClass.CAPACITY:
        raise ev.ClassMismatch("updating needs capacities")
    k.space.require_intersection_closed()
    cols = [ev.closure_fast(col) for col in _product_columns(prior, k)]
    post = EKernel(k.space, k.sample, cols)
    least = k.space.least_ids()
    entries = []
    holds = True
    for hid in k.space.family.nonempty_ids():
        member = k.space.family.member(hid)
        for pi in member.indices():
            stat = post.expectation(hid, pa.pmfs[pi])
            bound = prior.values[least[pi]]
            ok = stat <= bound
            holds = holds and ok
            entries.append(
                PosteriorEntry(
                    hid=hid,
                    point=k.space.model.points[pi],
                    stat=stat,
                    bound=bound,
                    ok=ok,
                )
            )
    return post, PosteriorReport(entries=tuple(entries), holds=holds)


# -- finite-horizon processes -------------------------------------------

TreeShape = Union[str, Sequence["TreeShape"]]


class FiltrationTree:
    """Finite rooted tree whose leaves are the outcomes; depth is the horizon.

    Level t of the filtration groups outcomes by their depth-t ancestor;
    a leaf shallower than t stays its own atom from its depth onward.
    """

    def __init__(self, sample: SampleSpace, shape: TreeShape):
        self.sample = sample
        self.shape = shape
        leaves = list(self._leaves(shape))
        if tuple(leaves) != sample.outcomes:
            raise KernelError("tree leaves must enumerate the outcomes in order")
        self.depth = self._depth(shape)
        self.levels = tuple(
            tuple(self._atoms(shape, t)) for t in range(self.depth + 1)
        )

    @staticmethod
    def _leaves(shape: TreeShape):
        if isinstance(shape, str):
            yield shape
        else:
            for child in shape:
                yield from FiltrationTree._leaves(child)

    @staticmethod
    def _depth(shape: TreeShape) -> int:
        if isinstance(shape, str):
            return 0
        return 1 + max(FiltrationTree._depth(c) for c in shape)

    @staticmethod
    def _branching(shape: TreeShape) -> int:
        if isinstance(shape, str):
            return 1
        return max(len(shape), *(FiltrationTree._branching(c) for c in shape))

    def _atoms(self, shape: TreeShape, t: int) -> list[tuple[int, ...]]:
        if isinstance(shape, str) or t == 0:
            return [tuple(self.sample.index(x) for x in self._leaves(shape))]
        out = []
        for child in shape:
            out.extend(self._atoms(child, t - 1))
        return out

    def count_stopping_times(self) -> int:
        def count(shape: TreeShape) -> int:
            if isinstance(shape, str):
                return 1
            prod = 1
            for child in shape:
                prod *= count(child)
            return 1 + prod

        return count(self.shape)

    def stopping_times(self, cap: int = STOPPING_RULE_CAP) -> list[tuple[int, ...]]:
        """Every adapted stopping rule, as a stop depth per outcome.

        A rule is a cut through the tree: each root-to-leaf path stops at
        exactly one node, so the decision at time t uses only level-t
        information.
        """
        total = self.count_stopping_times()
        if total > cap:
            raise ev.CapExceeded(
                f"{total} stopping rules exceed the enumeration cap {cap}"
            )

        def cuts(shape: TreeShape, depth: int) -> list[dict[int, int]]:
            mine = {self.sample.index(x): depth for x in self._leaves(shape)}
            if isinstance(shape, str):
                return [mine]
            options = [mine]
            partial: list[dict[int, int]] = [{}]
            for child in shape:
                child_cuts = cuts(child, depth + 1)
                partial = [{**p, **c} for p in partial for c in child_cuts]
            options.extend(partial)
            return options

        return [
            tuple(c[i] for i in range(self.sample.size)) for c in cuts(self.shape, 0)
        ]


class EProcess:
    """A kernel per time step, measurable against a filtration tree."""

    def __init__(self, tree: FiltrationTree, kernels: Sequence[EKernel]):
        if len(kernels) != tree.depth + 1:
            raise KernelError("one kernel per time step 0..T is required")
        space = kernels[0].space
        for k in kernels:
            if k.space != space or k.sample != tree.sample:
                raise KernelError("kernels must share the space and sample")
        self.tree = tree
        self.kernels = tuple(kernels)
        self.space = space

    def measurability_violations(self) -> list[tuple[int, tuple[int, ...], int]]:
        """(t, atom, hid) triples where a step peeks beyond its information."""
        out = []
        for t, atoms in enumerate(self.tree.levels):
            k = self.kernels[t]
            for atom in atoms:
                base = k.columns[atom[0]].values
                for xi in atom[1:]:
                    other = k.columns[xi].values
                    for hid, (a, b) in enumerate(zip(base, other)):
                        if a != b:
                            out.append((t, atom, hid))
                            break
        return out

    def stopped_kernel(self, rule: tuple[int, ...]) -> EKernel:
        cols = [self.kernels[t].columns[xi] for xi, t in enumerate(rule)]
        return EKernel(self.space, self.tree.sample, cols)

    @property
    def eclass(self) -> EClass:
        return min(k.eclass for k in self.kernels)

    def dominates(self, other: "EProcess") -> bool:
        return all(a.dominates(b) for a, b in zip(self.kernels, other.kernels))


@dataclass(frozen=True)
class AnytimeReport:
    rules_checked: int
    valid: bool
    first_violation: Optional[tuple[tuple[int, ...], ValidityEntry]]


def check_anytime_validity(
    proc: EProcess,
    pa: ProbabilityAssignment,
    *,
    rule_cap: int = STOPPING_RULE_CAP,
    depth_cap: int = TREE_DEPTH_CAP,
    branching_cap: int = TREE_BRANCHING_CAP,
) -> AnytimeReport:
    """Check every stopped kernel of the process, one stopping rule at a time."""
    if proc.tree.depth > depth_cap:
        raise ev.CapExceeded(f"tree depth {proc.tree.depth} exceeds cap {depth_cap}")
    branching = FiltrationTree._branching(proc.tree.shape)
    if branching > branching_cap:
        raise ev.CapExceeded(f"branching {branching} exceeds cap {branching_cap}")
    violations = proc.measurability_violations()
    if violations:
        t, atom, hid = violations[0]
        raise MeasurabilityError(
            f"step {t} varies inside atom {atom} at hypothesis {hid}"
        )
    first = None
    valid = True
    rules = proc.tree.stopping_times(rule_cap)
    for rule in rules:
        report = check_validity(proc.stopped_kernel(rule), pa)
        if not report.valid:
            valid = False
            if first is None:
                first = (rule, report.first_violation())
    return AnytimeReport(rules_checked=len(rules), valid=valid, first_violation=first)


def close_process(proc: EProcess) -> EProcess:
    """Close every step; domination is checked, validity is untouched."""
    closed = EProcess(proc.tree, [close_kernel(k) for k in proc.kernels])
    assert closed.dominates(proc)
    return closed


# -- predictive kernels ---------------------------------------------------


@dataclass(frozen=True)
class PredictiveReport:
    sup_identity: tuple[tuple[str, XValue, XValue, bool], ...]
    identity_holds: bool
    sup_stats: tuple[XValue, ...]
    least_stats: tuple[XValue, ...]
    sup_valid: bool
    least_valid: bool
    verdicts_agree: bool


def check_predictive_validity(k: EKernel, pmfs: Iterable[Pmf]) -> PredictiveReport:
    """Prediction-style validity when hypotheses are sets of outcomes.

    Per outcome, the largest evidence among true hypotheses must match the
    evidence against the outcome's least hypothesis; validity of the sup
    criterion then coincides with validity of that single variable.
    """
    if k.space.model.points != k.sample.outcomes:
        raise SpaceError("predictive checks need the model to be the sample space")
    k.space.require_intersection_closed()
    least = k.space.least_ids()
    identity = []
    identity_ok = True
    sup_var = []
    least_var = []
    for xi, x in enumerate(k.sample.outcomes):
        col = k.columns[xi]
        true_ids = [
            hid
            for hid in k.space.family.nonempty_ids()
            if xi in k.space.family.member(hid)
        ]
        sup_val = sup_of(col.values[hid] for hid in true_ids)
        least_val = col.values[least[xi]]
        ok = sup_val == least_val
        identity_ok = identity_ok and ok
        identity.append((x, sup_val, least_val, ok))
        sup_var.append(sup_val)
        least_var.append(least_val)
    pmfs = list(pmfs)
    sup_stats = tuple(p.expectation(sup_var) for p in pmfs)
    least_stats = tuple(p.expectation(least_var) for p in pmfs)
    sup_valid = all(s <= ONE for s in sup_stats)
    least_valid = all(s <= ONE for s in least_stats)
    return PredictiveReport(
        sup_identity=tuple(identity),
        identity_holds=identity_ok,
        sup_stats=sup_stats,
        least_stats=least_stats,
        sup_valid=sup_valid,
        least_valid=least_valid,
        verdicts_agree=sup_valid == least_valid,
    )


# -- pushforwards ----------------------------------------------------------


@dataclass(frozen=True)
class PushforwardReport:
    entries: tuple[ValidityEntry, ...]
    valid: bool


def pushforward_kernel(
    k: EKernel,
    mapping: Mapping[str, str],
    target: Space,
    pa: Optional[ProbabilityAssignment] = None,
) -> tuple[EKernel, Optional[PushforwardReport]]:
    """Evidence on a coarser space via preimages of its hypotheses.

    Fails if some target hypothesis has a preimage outside the source
    family. When distributions are supplied, validity is re-checked in the
    pushed-forward sense: points are charged only to hypotheses containing
    their image.
    """
    source = k.space
    target_idx = {lab: i for i, lab in enumerate(target.model.points)}
    preimages = []
    for member in target.family.members:
        bits = 0
        for pi, p in enumerate(source.model.points):
            img = mapping[p]
            if img not in target_idx:
                raise SpaceError(f"{img!r} is not a point of the target model")
            if member.bits >> target_idx[img] & 1:
                bits |= 1 << pi
        if bits not in source.family:
            raise MeasurabilityError(
                f"preimage of {member.labels(target.model)} is not a source hypothesis"
            )
        preimages.append(source.family.id_of(bits))
    cols = []
    for col in k.columns:
        cols.append(ev.from_values(target, [col.values[pid] for pid in preimages]))
    pushed = EKernel(target, k.sample, cols)
    report = None
    if pa is not None:
        entries = []
        ok_all = True
        for gid in target.family.nonempty_ids():
            member = target.family.member(gid)
            for pi, p in enumerate(source.model.points):
                if target_idx[mapping[p]] not in member:
                    continue
                stat = pushed.expectation(gid, pa.pmfs[pi])
                ok = stat <= ONE
                ok_all = ok_all and ok
                entries.append(ValidityEntry(hid=gid, point=p, stat=stat, ok=ok))
        report = PushforwardReport(entries=tuple(entries), valid=ok_all)
    return pushed, report

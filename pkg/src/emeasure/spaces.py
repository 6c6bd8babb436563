"""Finite models and union-closed hypothesis families over them.

A hypothesis is a subset of the model's points, stored as a bitset. A
family is deduplicated and kept in canonical order (popcount, then numeric
bitset value) so hypothesis ids are stable across runs and cross-module
references stay O(1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

MODEL_POINT_CAP = 24


class SpaceError(Exception):
    """Base class for model / hypothesis-family errors."""


class WidthMismatch(SpaceError):
    pass


class NotUnionClosed(SpaceError):
    pass


class NotIntersectionClosed(SpaceError):
    pass


class NotAPreorder(SpaceError):
    pass


@dataclass(frozen=True)
class Model:
    """Ordered collection of point labels standing in for the model."""

    points: tuple[str, ...]

    def __post_init__(self):
        if not self.points:
            raise SpaceError("a model needs at least one point")
        if len(set(self.points)) != len(self.points):
            raise SpaceError("model point labels must be unique")

    @property
    def size(self) -> int:
        return len(self.points)

    def index(self, label: str) -> int:
        try:
            return self.points.index(label)
        except ValueError:
            raise SpaceError(f"unknown point label {label!r}") from None


@dataclass(frozen=True, order=True)
class PointSet:
    """Subset of a model's points as a fixed-width bitset."""

    width: int
    bits: int

    def __post_init__(self):
        if self.bits < 0 or self.bits >> self.width:
            raise SpaceError(f"bitset {self.bits:#x} does not fit width {self.width}")

    @classmethod
    def empty(cls, width: int) -> "PointSet":
        return cls(width, 0)

    @classmethod
    def full(cls, width: int) -> "PointSet":
        return cls(width, (1 << width) - 1)

    @classmethod
    def of(cls, model: Model, labels: Iterable[str]) -> "PointSet":
        bits = 0
        for lab in labels:
            bits |= 1 << model.index(lab)
        return cls(model.size, bits)

    @classmethod
    def from_indices(cls, width: int, indices: Iterable[int]) -> "PointSet":
        bits = 0
        for i in indices:
            bits |= 1 << i
        return cls(width, bits)

    def __contains__(self, index: int) -> bool:
        return bool(self.bits >> index & 1)

    def __or__(self, other: "PointSet") -> "PointSet":
        self._check(other)
        return PointSet(self.width, self.bits | other.bits)

    def __and__(self, other: "PointSet") -> "PointSet":
        self._check(other)
        return PointSet(self.width, self.bits & other.bits)

    def _check(self, other: "PointSet"):
        if self.width != other.width:
            raise WidthMismatch(f"width {self.width} vs {other.width}")

    def issubset(self, other: "PointSet") -> bool:
        self._check(other)
        return self.bits & ~other.bits == 0

    def indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.width) if self.bits >> i & 1)

    def labels(self, model: Model) -> tuple[str, ...]:
        return tuple(model.points[i] for i in self.indices())

    @property
    def popcount(self) -> int:
        return self.bits.bit_count()

    @property
    def is_empty(self) -> bool:
        return self.bits == 0

    def sort_key(self) -> tuple[int, int]:
        return (self.popcount, self.bits)


def _canonical(width: int, bitsets: Iterable[int]) -> tuple[PointSet, ...]:
    uniq = sorted(set(bitsets) | {0})
    sets = [PointSet(width, b) for b in uniq]
    sets.sort(key=PointSet.sort_key)
    return tuple(sets)


class HypothesisClass:
    """Deduplicated, union-closed family of point sets including the empty one."""

    def __init__(self, width: int, members: Sequence[PointSet], *, check: bool = True):
        self.width = width
        self.members = _canonical(width, (m.bits for m in members))
        self._index = {m.bits: i for i, m in enumerate(self.members)}
        if check:
            missing = self._union_gap()
            if missing is not None:
                a, b = missing
                raise NotUnionClosed(
                    f"family is not union-closed: {a:#x} | {b:#x} is not a member"
                )

    @classmethod
    def from_bits(cls, width: int, bitsets: Iterable[int], *, check: bool = True) -> "HypothesisClass":
        return cls(width, [PointSet(width, b) for b in bitsets], check=check)

    def _union_gap(self) -> Optional[tuple[int, int]]:
        # Pairwise unions generate all finite unions, so a pairwise scan suffices.
        bits = [m.bits for m in self.members]
        present = set(bits)
        for i, a in enumerate(bits):
            for b in bits[i + 1:]:
                if a | b not in present:
                    return a, b
        return None

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, item) -> bool:
        bits = item.bits if isinstance(item, PointSet) else item
        return bits in self._index

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, HypothesisClass)
            and self.width == other.width
            and self.members == other.members
        )

    def __hash__(self) -> int:
        return hash((self.width, tuple(m.bits for m in self.members)))

    def id_of(self, item) -> int:
        bits = item.bits if isinstance(item, PointSet) else item
        try:
            return self._index[bits]
        except KeyError:
            raise SpaceError(f"point set {bits:#x} is not a member") from None

    def member(self, hid: int) -> PointSet:
        return self.members[hid]

    @property
    def empty_id(self) -> int:
        return self._index[0]

    def nonempty_ids(self) -> tuple[int, ...]:
        return tuple(i for i, m in enumerate(self.members) if not m.is_empty)


def union_closure(width: int, generators: Iterable[PointSet]) -> HypothesisClass:
    """Smallest union-closed family containing the generators and the empty set.

    Computed as a pairwise-union fixpoint; idempotent and monotone in the
    generator set.
    """
    current = {0}
    for g in generators:
        if g.width != width:
            raise WidthMismatch(f"generator width {g.width}, expected {width}")
        current.add(g.bits)
    while True:
        fresh = set()
        items = list(current)
        for i, a in enumerate(items):
            for b in items[i:]:
                u = a | b
                if u not in current:
                    fresh.add(u)
        if not fresh:
            break
        current |= fresh
    return HypothesisClass.from_bits(width, current, check=False)


@dataclass(frozen=True)
class Preorder:
    """Reflexive transitive relation on model points; entry (i, j) reads i <= j."""

    relation: tuple[tuple[bool, ...], ...]

    @classmethod
    def from_pairs(cls, size: int, pairs: Iterable[tuple[int, int]]) -> "Preorder":
        mat = [[i == j for j in range(size)] for i in range(size)]
        for i, j in pairs:
            mat[i][j] = True
        return cls(tuple(tuple(row) for row in mat))

    @classmethod
    def identity(cls, size: int) -> "Preorder":
        return cls.from_pairs(size, [])

    @property
    def size(self) -> int:
        return len(self.relation)

    def holds(self, i: int, j: int) -> bool:
        return self.relation[i][j]

    def validate(self) -> None:
        n = self.size
        if any(len(row) != n for row in self.relation):
            raise NotAPreorder("relation matrix is not square")
        for i in range(n):
            if not self.relation[i][i]:
                raise NotAPreorder(f"relation is not reflexive at {i}")
        for i in range(n):
            for j in range(n):
                if not self.relation[i][j]:
                    continue
                for k in range(n):
                    if self.relation[j][k] and not self.relation[i][k]:
                        raise NotAPreorder(
                            f"relation is not transitive: {i}<={j}<={k} but not {i}<={k}"
                        )

    def transitive_closure(self) -> "Preorder":
        n = self.size
        mat = [list(row) for row in self.relation]
        for k in range(n):
            for i in range(n):
                if mat[i][k]:
                    row_k = mat[k]
                    row_i = mat[i]
                    for j in range(n):
                        if row_k[j]:
                            row_i[j] = True
        return Preorder(tuple(tuple(row) for row in mat))


@dataclass(frozen=True)
class SpaceReport:
    union_closed: bool
    intersection_closed: bool
    contains_full_model: bool
    least: Optional[dict[str, int]] = None


class Space:
    """A model together with a union-closed hypothesis family over it."""

    def __init__(self, model: Model, family: HypothesisClass):
        if family.width != model.size:
            raise WidthMismatch(
                f"family width {family.width} does not match model size {model.size}"
            )
        self.model = model
        self.family = family
        self._least_ids: Optional[tuple[Optional[int], ...]] = None
        self._flags: Optional[tuple[bool, bool]] = None
        self._cover_edges: Optional[tuple[tuple[int, int], ...]] = None

    # -- structure ----------------------------------------------------

    def _closure_flags(self) -> tuple[bool, bool]:
        if self._flags is None:
            bits = [m.bits for m in self.family.members]
            present = set(bits)
            closed = True
            for i, a in enumerate(bits):
                for b in bits[i + 1:]:
                    if a & b not in present:
                        closed = False
                        break
                if not closed:
                    break
            full = (1 << self.model.size) - 1 in present
            self._flags = (closed, full)
        return self._flags

    @property
    def intersection_closed(self) -> bool:
        """Closed under intersections with the full model present."""
        closed, full = self._closure_flags()
        return closed and full

    def least_ids(self) -> tuple[Optional[int], ...]:
        """Per point, the id of the smallest member containing it (if any)."""
        if self._least_ids is None:
            ids: list[Optional[int]] = []
            for i in range(self.model.size):
                meet = (1 << self.model.size) - 1
                found = False
                for m in self.family.members:
                    if m.bits >> i & 1:
                        meet &= m.bits
                        found = True
                if found and meet in self.family and (meet >> i & 1):
                    ids.append(self.family.id_of(meet))
                else:
                    ids.append(None)
            self._least_ids = tuple(ids)
        return self._least_ids

    def least_id(self, point: int | str) -> int:
        if isinstance(point, str):
            point = self.model.index(point)
        hid = self.least_ids()[point]
        if hid is None:
            raise NotIntersectionClosed(
                f"point {self.model.points[point]!r} has no least hypothesis"
            )
        return hid

    def analyze(self) -> SpaceReport:
        closed, full = self._closure_flags()
        least = None
        if closed and full:
            least = {
                self.model.points[i]: hid
                for i, hid in enumerate(self.least_ids())
                if hid is not None
            }
        return SpaceReport(
            union_closed=True,
            intersection_closed=closed,
            contains_full_model=full,
            least=least,
        )

    def require_intersection_closed(self) -> None:
        if not self.intersection_closed:
            raise NotIntersectionClosed(
                "operation needs an intersection-closed hypothesis space"
            )

    def canonical_cover(self, hid: int) -> tuple[int, ...]:
        """Ids of the least hypotheses of the members' points; their union is the member."""
        self.require_intersection_closed()
        member = self.family.member(hid)
        cover = sorted({self.least_id(i) for i in member.indices()})
        return tuple(cover)

    def smallest_member_containing(self, bits: int) -> int:
        """Id of the smallest member that contains the given point set."""
        self.require_intersection_closed()
        acc = 0
        for i in range(self.model.size):
            if bits >> i & 1:
                acc |= self.family.member(self.least_id(i)).bits
        return self.family.id_of(acc)

    def cover_edges(self) -> tuple[tuple[int, int], ...]:
        """Hasse covers (child id, parent id) of the member lattice under inclusion.

        Checking antitonicity along covers is enough because any inclusion
        decomposes into a chain of covers inside a finite family.
        """
        if self._cover_edges is None:
            members = self.family.members
            n = len(members)
            by_count: dict[int, list[int]] = {}
            for i, m in enumerate(members):
                by_count.setdefault(m.popcount, []).append(i)
            edges: list[tuple[int, int]] = []
            for i, child in enumerate(members):
                supersets = [
                    j
                    for j in range(n)
                    if j != i and child.bits & ~members[j].bits == 0
                ]
                for j in supersets:
                    if not any(
                        k != j
                        and members[k].bits & ~members[j].bits == 0
                        and child.bits & ~members[k].bits == 0
                        for k in supersets
                    ):
                        edges.append((i, j))
            self._cover_edges = tuple(edges)
        return self._cover_edges

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Space)
            and self.model == other.model
            and self.family == other.family
        )

    def __hash__(self) -> int:
        return hash((self.model, self.family))


def space_from_generators(model: Model, generators: Iterable[Iterable[str]]) -> Space:
    sets = [PointSet.of(model, g) for g in generators]
    return Space(model, union_closure(model.size, sets))


def class_from_preorder(model: Model, pre: Preorder) -> Space:
    """Union closure of the principal upper sets of a preorder.

    The result is intersection-closed and the least hypothesis of a point is
    its principal upper set.
    """
    if pre.size != model.size:
        raise WidthMismatch("preorder size does not match model size")
    pre.validate()
    uppers = []
    for i in range(model.size):
        bits = 0
        for j in range(model.size):
            if pre.holds(i, j):
                bits |= 1 << j
        uppers.append(PointSet(model.size, bits))
    space = Space(model, union_closure(model.size, uppers))
    for i, up in enumerate(uppers):
        assert space.least_id(i) == space.family.id_of(up)
    return space


def preorder_from_class(space: Space) -> Preorder:
    """Recover the preorder i <= j  iff  j lies in the least hypothesis of i."""
    space.require_intersection_closed()
    n = space.model.size
    rows = []
    for i in range(n):
        least = space.family.member(space.least_id(i))
        rows.append(tuple(j in least for j in range(n)))
    return Preorder(tuple(rows))


def preimage_class(
    source_model: Model,
    mapping: Mapping[str, str] | Callable[[str], str],
    target: Space,
) -> HypothesisClass:
    """Family of preimages of the target members; union-closed for free."""
    get = mapping.__getitem__ if isinstance(mapping, Mapping) else mapping
    images = [get(p) for p in source_model.points]
    target_idx = {lab: i for i, lab in enumerate(target.model.points)}
    bitsets = []
    for member in target.family.members:
        bits = 0
        for i, img in enumerate(images):
            if img not in target_idx:
                raise SpaceError(f"{img!r} is not a point of the target model")
            if member.bits >> target_idx[img] & 1:
                bits |= 1 << i
        bitsets.append(bits)
    return HypothesisClass.from_bits(source_model.size, bitsets, check=False)

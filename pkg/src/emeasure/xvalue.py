"""Exact arithmetic on the extended half-line [0, inf].

Every evidence value in this package is an :class:`XValue`: a non-negative
rational (``fractions.Fraction``) or the distinguished infinity. All the
extended-arithmetic conventions of the calculus are centralized here and
nowhere else:

    inf of an empty collection -> inf
    sup of an empty collection -> 0
    c / 0   -> inf   for c > 0 (including c = inf)
    c / inf -> 0     for every c (including c = inf)
    0 / 0   -> 0
    0 * inf -> 0

Floats are rejected on construction; inexact values only ever appear in
CLI text rendering, via :meth:`XValue.to_float`.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Union

Rationalish = Union[int, str, Fraction, "XValue"]

_INF_MARK = object()


class XValue:
    """An exact value in [0, inf] with the calculus' conventions."""

    __slots__ = ("_frac",)

    def __init__(self, value: Rationalish = 0):
        if isinstance(value, XValue):
            self._frac = value._frac
            return
        if value is _INF_MARK:
            self._frac = None
            return
        if isinstance(value, float):
            raise TypeError("floats are inexact; pass int, Fraction or 'p/q' string")
        if isinstance(value, str):
            if value.strip() in ("inf", "Inf", "INF", "∞"):
                self._frac = None
                return
            value = Fraction(value)
        frac = Fraction(value)
        if frac < 0:
            raise ValueError(f"evidence values are non-negative, got {frac}")
        self._frac = frac

    # -- predicates ---------------------------------------------------

    @property
    def is_inf(self) -> bool:
        return self._frac is None

    @property
    def is_zero(self) -> bool:
        return self._frac == 0

    def as_fraction(self) -> Fraction:
        if self._frac is None:
            raise ValueError("infinite value has no rational representation")
        return self._frac

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other: Rationalish) -> "XValue":
        other = _coerce(other)
        if self._frac is None or other._frac is None:
            return INF
        return XValue(self._frac + other._frac)

    __radd__ = __add__

    def __mul__(self, other: Rationalish) -> "XValue":
        other = _coerce(other)
        if self._frac == 0 or other._frac == 0:
            return ZERO  # 0 * inf = 0
        if self._frac is None or other._frac is None:
            return INF
        return XValue(self._frac * other._frac)

    __rmul__ = __mul__

    def __truediv__(self, other: Rationalish) -> "XValue":
        other = _coerce(other)
        if other._frac is None:
            return ZERO  # c / inf = 0, also for c = inf
        if other._frac == 0:
            return ZERO if self._frac == 0 else INF  # 0/0 = 0, c/0 = inf
        if self._frac is None:
            return INF
        return XValue(self._frac / other._frac)

    def __rtruediv__(self, other: Rationalish) -> "XValue":
        return _coerce(other) / self

    def reciprocal(self) -> "XValue":
        return ONE / self

    # -- ordering -----------------------------------------------------

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = XValue(other)
        if not isinstance(other, XValue):
            return NotImplemented
        return self._frac == other._frac

    def __hash__(self) -> int:
        return hash(self._frac)

    def __le__(self, other: Rationalish) -> bool:
        other = _coerce(other)
        if other._frac is None:
            return True
        if self._frac is None:
            return False
        return self._frac <= other._frac

    def __lt__(self, other: Rationalish) -> bool:
        other = _coerce(other)
        return self <= other and self != other

    def __ge__(self, other: Rationalish) -> bool:
        return _coerce(other) <= self

    def __gt__(self, other: Rationalish) -> bool:
        return _coerce(other) < self

    # -- rendering ----------------------------------------------------

    def __repr__(self) -> str:
        return f"XValue({self.record()!r})"

    def __str__(self) -> str:
        return self.record()

    def record(self) -> str:
        """Exact text form used by structured output: 'inf', 'n' or 'p/q'."""
        if self._frac is None:
            return "inf"
        if self._frac.denominator == 1:
            return str(self._frac.numerator)
        return f"{self._frac.numerator}/{self._frac.denominator}"

    def to_float(self) -> float:
        return math.inf if self._frac is None else float(self._frac)


INF = XValue(_INF_MARK)
ZERO = XValue(0)
ONE = XValue(1)


def _coerce(value: Rationalish) -> XValue:
    return value if isinstance(value, XValue) else XValue(value)


def as_xvalue(value: Rationalish) -> XValue:
    return _coerce(value)


def inf_of(values: Iterable[Rationalish]) -> XValue:
    """Infimum with the empty-collection convention inf {} = inf."""
    best = INF
    for v in values:
        v = _coerce(v)
        if v < best:
            best = v
    return best


def sup_of(values: Iterable[Rationalish]) -> XValue:
    """Supremum with the empty-collection convention sup {} = 0."""
    best = ZERO
    for v in values:
        v = _coerce(v)
        if v > best:
            best = v
    return best


def sum_of(values: Iterable[Rationalish]) -> XValue:
    total = ZERO
    for v in values:
        total = total + _coerce(v)
    return total


def parse_xvalue(raw: object) -> XValue:
    """Lenient parser for file input: ints, 'p/q' strings, 'inf', floats.

    Floats are read with decimal semantics (97.5 -> 195/2), never binary.
    """
    if isinstance(raw, XValue):
        return raw
    if isinstance(raw, bool):
        raise ValueError(f"not an evidence value: {raw!r}")
    if isinstance(raw, float):
        if math.isinf(raw):
            return INF
        return XValue(Fraction(str(raw)))
    if isinstance(raw, (int, Fraction, str)):
        return XValue(raw)
    raise ValueError(f"not an evidence value: {raw!r}")

"""YAML input schemas for the command-line tool.

Schema errors carry the file path and the offending key so the CLI can
fail with context. Numeric values are parsed with decimal semantics
(97.5 -> 195/2) and 'inf' marks infinite evidence.
"""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path
from typing import Mapping, Optional

import yaml

from .decisions import ConsequenceSpace, ConsequenceTable, NumericLoss
from .integration import OrderMeasurableFn
from .kernels import EKernel, Pmf, ProbabilityAssignment, SampleSpace
from .spaces import (
    MODEL_POINT_CAP,
    Model,
    PointSet,
    Preorder,
    Space,
    union_closure,
)
from .xvalue import XValue, parse_xvalue


class SchemaError(Exception):
    def __init__(self, path: Path | str, message: str):
        self.path = str(path)
        super().__init__(f"{path}: {message}")


def _load_yaml(path: Path | str) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise SchemaError(path, "file not found") from None
    except yaml.YAMLError as exc:
        raise SchemaError(path, f"not valid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise SchemaError(path, "top level must be a mapping")
    return data


def _fraction(path, raw) -> Fraction:
    try:
        if isinstance(raw, float):
            return Fraction(str(raw))
        return Fraction(raw)
    except (ValueError, TypeError) as exc:
        raise SchemaError(path, f"not a rational number: {raw!r}") from None


def _xvalue(path, raw) -> XValue:
    try:
        return parse_xvalue(raw)
    except (ValueError, TypeError):
        raise SchemaError(path, f"not an evidence value: {raw!r}") from None


class SpaceFile:
    """Parsed space file: the model, the family and the named hypotheses."""

    def __init__(self, space: Space, names: dict[str, int]):
        self.space = space
        self.names = names

    def resolve(self, path, label: str) -> int:
        """A hypothesis label is a declared name, 'empty', or a comma-separated
        list of point labels."""
        if label in self.names:
            return self.names[label]
        if label in ("empty", "{}"):
            return self.space.family.empty_id
        parts = [p.strip() for p in str(label).split(",") if p.strip()]
        try:
            bits = PointSet.of(self.space.model, parts).bits
        except Exception:
            raise SchemaError(path, f"unknown hypothesis label {label!r}") from None
        if bits not in self.space.family:
            raise SchemaError(path, f"{label!r} is not a member of the family")
        return self.space.family.id_of(bits)


def load_space(path: Path | str, *, point_cap: int = MODEL_POINT_CAP) -> SpaceFile:
    data = _load_yaml(path)
    points = data.get("points")
    if not isinstance(points, list) or not all(isinstance(p, str) for p in points):
        raise SchemaError(path, "'points' must be a list of labels")
    if len(points) > point_cap:
        raise SchemaError(
            path, f"{len(points)} points exceed the model cap {point_cap}"
        )
    model = Model(tuple(points))
    names: dict[str, list[str]] = {}
    if "generators" in data:
        gens = data["generators"]
        if isinstance(gens, dict):
            named = {str(k): list(v) for k, v in gens.items()}
            generators = list(named.values())
            names = named
        elif isinstance(gens, list):
            generators = [list(g) for g in gens]
        else:
            raise SchemaError(path, "'generators' must be a list or a mapping")
        sets = []
        for g in generators:
            try:
                sets.append(PointSet.of(model, g))
            except Exception:
                raise SchemaError(path, f"generator {g!r} uses unknown points") from None
        space = Space(model, union_closure(model.size, sets))
    elif "preorder" in data:
        pairs = []
        for pair in data["preorder"]:
            if not isinstance(pair, list) or len(pair) != 2:
                raise SchemaError(path, f"preorder entry {pair!r} is not a pair")
            i, j = pair
            i = model.index(i) if isinstance(i, str) else int(i)
            j = model.index(j) if isinstance(j, str) else int(j)
            pairs.append((i, j))
        from .spaces import class_from_preorder

        pre = Preorder.from_pairs(model.size, pairs)
        try:
            space = class_from_preorder(model, pre)
        except Exception as exc:
            raise SchemaError(path, str(exc)) from None
    else:
        raise SchemaError(path, "need 'generators' or 'preorder'")
    name_ids = {}
    for name, labels in names.items():
        name_ids[name] = space.family.id_of(PointSet.of(model, labels).bits)
    return SpaceFile(space, name_ids)


def load_evidence(path: Path | str, sf: SpaceFile) -> dict[int, XValue]:
    data = _load_yaml(path)
    table = data.get("evidence")
    if not isinstance(table, dict):
        raise SchemaError(path, "'evidence' must map hypothesis labels to values")
    out: dict[int, XValue] = {}
    for label, raw in table.items():
        out[sf.resolve(path, str(label))] = _xvalue(path, raw)
    out.setdefault(sf.space.family.empty_id, _xvalue(path, "inf"))
    return out


def load_pmfs(path: Path | str, model: Model) -> ProbabilityAssignment:
    data = _load_yaml(path)
    table = data.get("pmf")
    if not isinstance(table, dict):
        raise SchemaError(path, "'pmf' must map point labels to outcome masses")
    outcomes: Optional[tuple[str, ...]] = None
    pmfs = {}
    for point, masses in table.items():
        if not isinstance(masses, dict):
            raise SchemaError(path, f"masses for {point!r} must be a mapping")
        if outcomes is None:
            outcomes = tuple(str(x) for x in masses.keys())
            sample = SampleSpace(outcomes)
        pmfs[str(point)] = Pmf.of(
            sample, {str(x): _fraction(path, m) for x, m in masses.items()}
        )
    if outcomes is None:
        raise SchemaError(path, "'pmf' is empty")
    missing = [p for p in model.points if p not in pmfs]
    if missing:
        raise SchemaError(path, f"no distribution for points {missing}")
    try:
        return ProbabilityAssignment.of(model, pmfs)
    except Exception as exc:
        raise SchemaError(path, str(exc)) from None


def load_kernel(
    path: Path | str, sf: SpaceFile, sample: Optional[SampleSpace] = None
) -> EKernel:
    data = _load_yaml(path)
    table = data.get("kernel")
    if not isinstance(table, dict):
        raise SchemaError(path, "'kernel' must map hypothesis labels to outcome rows")
    if sample is None:
        declared = data.get("outcomes")
        if not isinstance(declared, list):
            raise SchemaError(
                path, "'outcomes' list is required when no model file fixes them"
            )
        sample = SampleSpace(tuple(str(x) for x in declared))
    rows: dict[int, dict[str, XValue]] = {}
    for label, row in table.items():
        if not isinstance(row, dict):
            raise SchemaError(path, f"row for {label!r} must be a mapping")
        hid = sf.resolve(path, str(label))
        rows[hid] = {str(x): _xvalue(path, v) for x, v in row.items()}
    empty = sf.space.family.empty_id
    rows.setdefault(empty, {x: _xvalue(path, "inf") for x in sample.outcomes})
    n = len(sf.space.family)
    missing = [hid for hid in range(n) if hid not in rows]
    if missing:
        labels = [
            ",".join(sf.space.family.member(h).labels(sf.space.model)) for h in missing
        ]
        raise SchemaError(path, f"kernel misses hypotheses: {labels}")
    for hid, row in rows.items():
        for x in sample.outcomes:
            if x not in row:
                raise SchemaError(path, f"hypothesis id {hid} misses outcome {x!r}")
    try:
        return EKernel.from_table(sf.space, sample, rows)
    except Exception as exc:
        raise SchemaError(path, str(exc)) from None


def load_function(path: Path | str, space: Space) -> OrderMeasurableFn:
    data = _load_yaml(path)
    table = data.get("function")
    if not isinstance(table, dict):
        raise SchemaError(path, "'function' must map point labels to values")
    values = []
    for p in space.model.points:
        if p not in table:
            raise SchemaError(path, f"no value for point {p!r}")
        values.append(_xvalue(path, table[p]))
    try:
        return OrderMeasurableFn(space, tuple(values))
    except Exception as exc:
        raise SchemaError(path, str(exc)) from None


def load_decision_problem(path: Path | str, model: Model):
    """Returns (ConsequenceTable, NumericLoss or None)."""
    data = _load_yaml(path)
    decisions = data.get("decisions")
    if not isinstance(decisions, list) or not decisions:
        raise SchemaError(path, "'decisions' must be a non-empty list")
    decisions = tuple(str(d) for d in decisions)
    if "loss" in data:
        table = data["loss"]
        if not isinstance(table, dict):
            raise SchemaError(path, "'loss' must map points to decision losses")
        try:
            loss = NumericLoss.of(
                model,
                decisions,
                {
                    str(p): {str(d): _xvalue(path, v) for d, v in row.items()}
                    for p, row in table.items()
                },
            )
        except KeyError as exc:
            raise SchemaError(path, f"loss table misses entry {exc}") from None
        return loss.to_consequence_table(), loss
    cons = data.get("consequences")
    table = data.get("table")
    if not isinstance(cons, dict) or not isinstance(table, dict):
        raise SchemaError(path, "need 'consequences' and 'table' (or 'loss')")
    elements = cons.get("elements")
    order_pairs = cons.get("order", [])
    if not isinstance(elements, list) or not elements:
        raise SchemaError(path, "'consequences.elements' must be a non-empty list")
    elements = tuple(str(e) for e in elements)
    idx = {e: i for i, e in enumerate(elements)}
    pairs = []
    for pair in order_pairs:
        if not isinstance(pair, list) or len(pair) != 2:
            raise SchemaError(path, f"order entry {pair!r} is not a pair")
        a, b = (str(pair[0]), str(pair[1]))
        if a not in idx or b not in idx:
            raise SchemaError(path, f"order pair {pair!r} uses unknown elements")
        pairs.append((idx[a], idx[b]))
    pre = Preorder.from_pairs(len(elements), pairs).transitive_closure()
    try:
        cspace = ConsequenceSpace(elements, pre)
        ctable = ConsequenceTable.of(
            model,
            decisions,
            cspace,
            {str(p): {str(d): str(c) for d, c in row.items()} for p, row in table.items()},
        )
    except Exception as exc:
        raise SchemaError(path, str(exc)) from None
    return ctable, None

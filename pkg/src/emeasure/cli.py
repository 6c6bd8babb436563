"""Command-line front end.

One executable, subcommand style. Exit codes are a stable contract:
0 means every requested check passed, 1 marks a statistical violation,
2 marks an input or schema problem. Structured output ('records' format)
is line-delimited with exact rationals as 'p/q' strings and 'inf'.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Sequence

from . import evidence as ev
from . import fileio, golden
from . import kernels as kn
from . import multiplicity as mtp
from . import decisions as dec
from .evidence import EClass, EvidenceError
from .spaces import MODEL_POINT_CAP, PointSet, SpaceError
from .xvalue import ONE, XValue

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_INPUT = 2


@dataclass(frozen=True)
class Caps:
    model: int = MODEL_POINT_CAP
    members: int = ev.BRUTE_FORCE_MEMBER_CAP
    powerset: int = ev.POWERSET_POINT_CAP
    depth: int = kn.TREE_DEPTH_CAP
    branching: int = kn.TREE_BRANCHING_CAP
    stops: int = kn.STOPPING_RULE_CAP


def caps_from_env(env: Optional[str]) -> Caps:
    caps = Caps()
    if not env:
        return caps
    updates = {}
    for part in env.split(","):
        if not part.strip():
            continue
        key, _, raw = part.partition("=")
        key = key.strip()
        if key not in Caps.__dataclass_fields__:
            raise ValueError(f"unknown cap {key!r} in EMEASURE_CAPS")
        updates[key] = int(raw)
    return replace(caps, **updates)


def _fraction_arg(raw: str) -> Fraction:
    try:
        return Fraction(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a rational number: {raw!r}")


class Printer:
    def __init__(self, fmt: str):
        self.records = fmt == "records"

    def record(self, kind: str, **fields):
        if self.records:
            parts = [kind]
            for key, value in fields.items():
                parts.append(f"{key}={_render(value)}")
            print(" ".join(parts))

    def text(self, line: str = ""):
        if not self.records:
            print(line)


def _render(value) -> str:
    if isinstance(value, XValue):
        return value.record()
    if isinstance(value, Fraction):
        return str(value) if value.denominator > 1 else str(value.numerator)
    if isinstance(value, bool):
        return "yes" if value else "no"
    if value is None:
        return "-"
    return str(value)


def _member_label(space, hid: int) -> str:
    member = space.family.member(hid)
    if member.is_empty:
        return "{}"
    return ",".join(member.labels(space.model))


def _split_labels(raw: str) -> list[str]:
    # '|' separates labels when the labels themselves are comma point lists.
    sep = "|" if "|" in raw else ","
    return [part.strip() for part in raw.split(sep) if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emeasure",
        description="Evidence calculus over finite hypothesis lattices",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--format", choices=("text", "records"), default="text")

    p_space = sub.add_parser("space", help="analyze a hypothesis space file")
    p_space.add_argument("--space", required=True)
    common(p_space)

    p_clo = sub.add_parser("closure", help="close an evidence table")
    p_clo.add_argument("--space", required=True)
    p_clo.add_argument("--evidence", required=True)
    p_clo.add_argument("--cap-members", type=int, default=None)
    common(p_clo)

    p_chk = sub.add_parser("check", help="run validity-style checks on a kernel")
    p_chk.add_argument("--space", required=True)
    p_chk.add_argument("--kernel", required=True, nargs="+")
    p_chk.add_argument("--model", required=True)
    p_chk.add_argument(
        "--check",
        choices=("validity", "fwe", "fer", "anytime", "posthoc", "predictive"),
        default="validity",
    )
    p_chk.add_argument("--alpha", type=_fraction_arg, default=None)
    p_chk.add_argument("--rule", default=None, help="'canonical' or a fixed level")
    p_chk.add_argument("--tree", default=None, help="tree file for --check anytime")
    p_chk.add_argument("--family", default=None, help="comma-separated hypothesis labels")
    common(p_chk)

    p_mtp = sub.add_parser("mtp", help="multiplicity procedures")
    p_mtp.add_argument("--space", default=None)
    p_mtp.add_argument("--evidence", default=None)
    p_mtp.add_argument("--kernel", default=None)
    p_mtp.add_argument("--model", default=None)
    p_mtp.add_argument("--alpha", type=_fraction_arg, default=Fraction(1, 20))
    p_mtp.add_argument("--family", default=None)
    p_mtp.add_argument(
        "--procedure",
        choices=("ebh", "closed-ebh", "self-consistent", "fer", "fwe"),
        default=None,
    )
    p_mtp.add_argument("--golden", choices=("table1",), default=None)
    common(p_mtp)

    p_dec = sub.add_parser("decide", help="consequence bounds and rankings")
    p_dec.add_argument("--space", default=None)
    p_dec.add_argument("--decisions", required=True)
    p_dec.add_argument("--kernel", required=True)
    p_dec.add_argument("--model", required=True)
    p_dec.add_argument("--alpha", type=_fraction_arg, default=Fraction(1, 20))
    p_dec.add_argument(
        "--bound", choices=("econsequence", "grunwald", "probability"), default="econsequence"
    )
    p_dec.add_argument("--outcome", default=None)
    common(p_dec)

    return parser


# -- subcommands ----------------------------------------------------------


def cmd_space(args, caps: Caps) -> int:
    out = Printer(args.format)
    sf = fileio.load_space(args.space, point_cap=caps.model)
    report = sf.space.analyze()
    out.text(f"points: {', '.join(sf.space.model.points)}")
    out.text(f"members: {len(sf.space.family)}")
    out.text(f"union closed: {_render(report.union_closed)}")
    out.text(f"intersection closed: {_render(report.intersection_closed)}")
    out.text(f"contains full model: {_render(report.contains_full_model)}")
    out.record(
        "space",
        points=len(sf.space.model.points),
        members=len(sf.space.family),
        union_closed=report.union_closed,
        intersection_closed=report.intersection_closed,
        full_model=report.contains_full_model,
    )
    if report.least is not None:
        out.text("least hypotheses:")
        for point in sf.space.model.points:
            hid = report.least[point]
            out.text(f"  {point}: {{{_member_label(sf.space, hid)}}}")
            out.record("least", point=point, hypothesis=_member_label(sf.space, hid))
        from .spaces import preorder_from_class

        pre = preorder_from_class(sf.space)
        out.text("preorder matrix (row <= column):")
        for i, p in enumerate(sf.space.model.points):
            row = "".join("1" if pre.holds(i, j) else "0" for j in range(pre.size))
            out.text(f"  {p}: {row}")
            out.record("preorder", point=p, row=row)
    return EXIT_OK


def cmd_closure(args, caps: Caps) -> int:
    out = Printer(args.format)
    sf = fileio.load_space(args.space, point_cap=caps.model)
    table = fileio.load_evidence(args.evidence, sf)
    try:
        e = ev.classify(sf.space, table)
    except EvidenceError as exc:
        raise fileio.SchemaError(args.evidence, str(exc)) from None
    cap = args.cap_members if args.cap_members is not None else caps.members
    closed = ev.close(e, member_cap=cap)
    changed = 0
    for hid in range(len(sf.space.family)):
        before, after = e.values[hid], closed.values[hid]
        label = _member_label(sf.space, hid)
        if before != after:
            changed += 1
            out.text(f"  {{{label}}}: {before} -> {after}")
        out.record(
            "closure", hypothesis=label, before=before, after=after,
            changed=before != after,
        )
    if changed == 0:
        out.text("no change: table is already a measure")
    else:
        out.text(f"{changed} entries raised")
    out.text(f"input class: {e.eclass.name.lower()}; output class: {closed.eclass.name.lower()}")
    return EXIT_OK


def _report_entries(out: Printer, kind: str, entries, space) -> None:
    for entry in entries:
        out.record(
            kind,
            hypothesis=_member_label(space, entry.hid),
            point=entry.point,
            stat=entry.stat,
            ok=entry.ok,
        )


def cmd_check(args, caps: Caps) -> int:
    out = Printer(args.format)
    sf = fileio.load_space(args.space, point_cap=caps.model)
    pa = fileio.load_pmfs(args.model, sf.space.model)
    kernels = [fileio.load_kernel(p, sf, pa.sample) for p in args.kernel]
    kernel = kernels[0]

    if args.check == "validity":
        report = kn.check_validity(kernel, pa)
        _report_entries(out, "validity", report.entries, sf.space)
        witness = report.first_violation()
        out.text(f"hypothesis-wise valid: {_render(report.valid)}")
        if witness is not None:
            out.text(
                f"first violation: {{{_member_label(sf.space, witness.hid)}}} under "
                f"{witness.point}: expectation {witness.stat}"
            )
        return EXIT_OK if report.valid else EXIT_VIOLATION

    if args.check == "fwe":
        report = mtp.check_fwe(kernel, pa)
        for entry in report.entries:
            out.record("fwe", point=entry.point, stat=entry.stat, ok=entry.ok)
            out.text(f"  {entry.point}: expected familywise evidence {entry.stat}")
        out.text(f"familywise evidence controlled: {_render(report.controlled)}")
        return EXIT_OK if report.controlled else EXIT_VIOLATION

    if args.check == "fer":
        rule = None
        if args.family:
            ids = [sf.resolve(args.space, lab) for lab in _split_labels(args.family)]
            rule = mtp.SelectionRule.fixed(kernel.sample, ids)
        report = mtp.check_fer(kernel, pa, rule, uniform=rule is None)
        out.record(
            "fer",
            pointwise=report.pointwise_holds,
            rate=report.fer,
            controlled=report.fer_controlled,
        )
        out.text(f"pointwise bound holds: {_render(report.pointwise_holds)}")
        out.text(f"false evidence rate: {_render(report.fer)}")
        ok = report.pointwise_holds and bool(report.fer_controlled)
        out.text(f"controlled: {_render(ok)}")
        return EXIT_OK if ok else EXIT_VIOLATION

    if args.check == "posthoc":
        if args.rule == "canonical" or args.rule is None:
            rule = "canonical"
        else:
            level = fileio.parse_xvalue(args.rule)
            rule = {x: level for x in kernel.sample.outcomes}
        report = kn.check_posthoc_validity(kernel, pa, rule)
        _report_entries(out, "posthoc", report.entries, sf.space)
        out.text(f"post-hoc bound holds: {_render(report.holds)}")
        if report.matches_validity_stat is not None:
            out.text(
                "canonical level reproduces the validity statistic: "
                f"{_render(report.matches_validity_stat)}"
            )
        return EXIT_OK if report.holds else EXIT_VIOLATION

    if args.check == "predictive":
        report = kn.check_predictive_validity(kernel, pa.pmfs)
        for x, sup_val, least_val, ok in report.sup_identity:
            out.record("predictive", outcome=x, sup=sup_val, least=least_val, ok=ok)
        out.text(f"sup identity holds: {_render(report.identity_holds)}")
        out.text(f"predictively valid: {_render(report.sup_valid)}")
        ok = report.identity_holds and report.verdicts_agree and report.sup_valid
        return EXIT_OK if ok else EXIT_VIOLATION

    if args.check == "anytime":
        if args.tree is None:
            raise fileio.SchemaError("<args>", "--check anytime needs --tree")
        data = fileio._load_yaml(args.tree)
        shape = data.get("tree")
        if shape is None:
            raise fileio.SchemaError(args.tree, "need a 'tree' entry")

        def to_shape(node):
            if isinstance(node, str):
                return node
            return [to_shape(c) for c in node]

        tree = kn.FiltrationTree(pa.sample, to_shape(shape))
        proc = kn.EProcess(tree, kernels)
        report = kn.check_anytime_validity(
            proc, pa, rule_cap=caps.stops, depth_cap=caps.depth,
            branching_cap=caps.branching,
        )
        out.record(
            "anytime", rules=report.rules_checked, valid=report.valid,
        )
        out.text(f"stopping rules checked: {report.rules_checked}")
        out.text(f"anytime valid: {_render(report.valid)}")
        if report.first_violation is not None:
            rule, entry = report.first_violation
            out.text(
                f"first violation at stop depths {rule}: "
                f"{{{_member_label(sf.space, entry.hid)}}} under {entry.point}"
            )
        return EXIT_OK if report.valid else EXIT_VIOLATION

    raise fileio.SchemaError("<args>", f"unknown check {args.check!r}")


def _golden_table1(args, out: Printer) -> int:
    computed = golden.compute_reference_table(args.alpha)
    is_golden = args.alpha == golden.DEFAULT_ALPHA
    header = ("row", "e", "e_selected", "fsp", "step_up", "closed_step_up")
    out.text(
        "built-in three-circle family"
        + ("" if is_golden else f" (recomputed at alpha={args.alpha}; not the golden level)")
    )
    out.text(" | ".join(f"{h:>14}" for h in header))
    for row in computed.rows:
        cells = [
            row,
            computed.base[row].record(),
            computed.inflated[row].record(),
            _render(computed.fsp[row]),
            computed.stepup[row].record(),
            computed.closed_stepup[row].record(),
        ]
        out.text(" | ".join(f"{c:>14}" for c in cells))
        out.record(
            "table",
            row=row,
            e=computed.base[row],
            e_selected=computed.inflated[row],
            fsp=computed.fsp[row],
            step_up=computed.stepup[row],
            closed_step_up=computed.closed_stepup[row],
        )
    if not is_golden:
        return EXIT_OK
    expected = golden.expected_reference_table()
    diffs = golden.diff_reference_tables(computed, expected)
    total = len(expected.rows) * len(golden.EVIDENCE_COLUMNS)
    mismatched_cells = {(d.row, d.column) for d in diffs if d.column != "fsp"}
    matched = total - len(mismatched_cells)
    out.text(f"golden diff: {matched}/{total} evidence cells match")
    out.record("golden", matched=matched, total=total, fsp_diffs=len(diffs) - len(mismatched_cells))
    for d in diffs:
        out.text(f"  MISMATCH {d.row}.{d.column}: computed {_render(d.computed)}, expected {_render(d.expected)}")
        out.record("mismatch", row=d.row, column=d.column, computed=d.computed, expected=d.expected)
    return EXIT_OK if not diffs else EXIT_VIOLATION


def cmd_mtp(args, caps: Caps) -> int:
    out = Printer(args.format)
    if args.golden == "table1":
        return _golden_table1(args, out)
    if args.space is None:
        raise fileio.SchemaError("<args>", "mtp needs --space (or --golden)")
    sf = fileio.load_space(args.space, point_cap=caps.model)
    if args.procedure in ("fer", "fwe"):
        if args.kernel is None or args.model is None:
            raise fileio.SchemaError("<args>", f"{args.procedure} needs --kernel and --model")
        pa = fileio.load_pmfs(args.model, sf.space.model)
        kernel = fileio.load_kernel(args.kernel, sf, pa.sample)
        if args.procedure == "fwe":
            report = mtp.check_fwe(kernel, pa)
            for entry in report.entries:
                out.record("fwe", point=entry.point, stat=entry.stat, ok=entry.ok)
            out.text(f"familywise evidence controlled: {_render(report.controlled)}")
            return EXIT_OK if report.controlled else EXIT_VIOLATION
        rule = None
        if args.family:
            ids = [sf.resolve(args.space, lab) for lab in _split_labels(args.family)]
            rule = mtp.SelectionRule.fixed(kernel.sample, ids)
        report = mtp.check_fer(kernel, pa, rule, uniform=rule is None)
        out.record("fer", pointwise=report.pointwise_holds, rate=report.fer,
                   controlled=report.fer_controlled)
        out.text(f"false evidence rate: {_render(report.fer)}")
        ok = report.pointwise_holds and bool(report.fer_controlled)
        out.text(f"controlled: {_render(ok)}")
        return EXIT_OK if ok else EXIT_VIOLATION
    if args.evidence is None:
        raise fileio.SchemaError("<args>", "mtp needs --evidence for this procedure")
    table = fileio.load_evidence(args.evidence, sf)
    e = ev.classify(sf.space, table)
    if args.family is None:
        raise fileio.SchemaError("<args>", "mtp needs --family")
    gids = [sf.resolve(args.space, lab) for lab in _split_labels(args.family)]

    if args.procedure == "ebh":
        result = mtp.ebh(e, gids, args.alpha)
    elif args.procedure == "closed-ebh":
        result = mtp.closed_ebh(e, gids, args.alpha)
    elif args.procedure == "self-consistent":
        sel = mtp.self_consistent_selection(e, gids, args.alpha)
        out.text(f"largest self-consistent selection: "
                 f"{[ _member_label(sf.space, g) for g in sel.selected ]}")
        for g in gids:
            out.record("selection", hypothesis=_member_label(sf.space, g),
                       selected=g in sel.selected,
                       inflated=sel.witness.get(g))
        return EXIT_OK
    else:
        raise fileio.SchemaError("<args>", "mtp needs --procedure (or --golden)")
    names = [_member_label(sf.space, g) for g in result.rejected]
    out.text(f"rejected: {names or 'nothing'}")
    for g in gids:
        out.record(
            "rejection", hypothesis=_member_label(sf.space, g),
            rejected=g in result.rejected,
            value=result.table.values[g],
        )
    return EXIT_OK


def cmd_decide(args, caps: Caps) -> int:
    out = Printer(args.format)
    sf = fileio.load_space(args.space, point_cap=caps.model) if args.space else None
    if sf is None:
        raise fileio.SchemaError("<args>", "decide needs --space")
    pa = fileio.load_pmfs(args.model, sf.space.model)
    kernel = fileio.load_kernel(args.kernel, sf, pa.sample)
    ctable, loss = fileio.load_decision_problem(args.decisions, sf.space.model)

    try:
        if args.bound == "econsequence":
            report = dec.check_econsequence_bound(kernel, pa, ctable)
        elif args.bound == "probability":
            rule = {x: XValue(args.alpha) for x in kernel.sample.outcomes}
            report = dec.check_posthoc_consequence_bound(kernel, pa, ctable, rule)
        else:
            if loss is None:
                raise fileio.SchemaError(
                    args.decisions, "the integrated-loss bound needs a numeric 'loss'"
                )
            report = dec.check_grunwald_bound(kernel, pa, loss)
    except dec.OrderMeasurabilityViolation as exc:
        raise fileio.SchemaError(args.decisions, str(exc)) from None

    if args.bound == "grunwald":
        for entry in report.entries:
            out.record("bound", point=entry.point, stat=entry.stat, ok=entry.ok)
            out.text(f"  {entry.point}: ratio expectation {entry.stat}")
    else:
        for entry in report.entries:
            out.record(
                "bound", benchmark=entry.benchmark, point=entry.point,
                stat=entry.stat, ok=entry.ok,
            )
    out.text(f"bound holds: {_render(report.holds)}")

    if loss is not None and args.outcome is not None:
        slice_fn = kernel.column(args.outcome)
        if slice_fn.eclass is EClass.MEASURE and sf.space.intersection_closed:
            ranking = sorted(
                (
                    (dec.e_integrated_loss(loss, slice_fn, d), d)
                    for d in loss.decisions
                ),
                key=lambda pair: (pair[0].is_inf, pair[0].to_float(), pair[1]),
            )
            out.text("integrated-loss ranking (best first):")
            for value, d in ranking:
                out.text(f"  {d}: {value}")
                out.record("eloss", decision=d, value=value)
        opt = dec.optimality_class(loss)
        if opt.optimal is not None:
            rows = []
            measurable = True
            for d in loss.decisions:
                bits = opt.decision_sets[d].bits
                if bits not in sf.space.family:
                    measurable = False
                    break
                rows.append((slice_fn.values[sf.space.family.id_of(bits)], d))
            if measurable:
                rows.sort(key=lambda pair: (pair[0].is_inf, pair[0].to_float(), pair[1]))
                out.text("optimality-evidence ranking (least evidence first):")
                for value, d in rows:
                    out.text(f"  {d}: {value}")
                    out.record("optimality", decision=d, value=value)

    adm_source = kernel.column(args.outcome) if args.outcome is not None else kernel.columns[0]
    try:
        adm = dec.admissible_decisions(adm_source, ctable)
        out.text(f"admissible decisions: {', '.join(adm.admissible)}")
        out.record("admissible", decisions="|".join(adm.admissible))
    except dec.OrderMeasurabilityViolation as exc:
        out.text(f"admissibility skipped: {exc}")

    return EXIT_OK if report.holds else EXIT_VIOLATION


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        caps = caps_from_env(os.environ.get("EMEASURE_CAPS"))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    handlers = {
        "space": cmd_space,
        "closure": cmd_closure,
        "check": cmd_check,
        "mtp": cmd_mtp,
        "decide": cmd_decide,
    }
    try:
        return handlers[args.command](args, caps)
    except (fileio.SchemaError, SpaceError, EvidenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

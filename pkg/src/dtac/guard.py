"""The refactoring guard: what a tactic is allowed to change.

A transformation is accepted when compiled code is untouched, no public or
private method vanished or changed signature, public preconditions only lose
conjuncts and public postconditions only gain them.  Generated methods are
exempt; strengthening is decided by syntactic conjunct-multiset inclusion,
never entailment.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .nodes import Expr, MethodDecl, Program, Visibility, conjuncts
from .printer import print_expr
from .projection import compiled_projection


@dataclass
class Violation:
    kind: str  # CodeChanged | PublicPreStrengthened | PublicPostWeakened | PublicRemoved | SignatureChanged
    method: str
    detail: str

    def __str__(self):
        return f"{self.kind}: {self.method}: {self.detail}"


@dataclass
class GuardReport:
    ok: bool
    violations: list[Violation] = field(default_factory=list)

    def __str__(self):
        if self.ok:
            return "guard: ok"
        return "guard: REJECTED\n" + "\n".join(f"  {v}" for v in self.violations)


def _conjunct_multiset(clauses: list[Expr]) -> Counter:
    out: Counter = Counter()
    for c in clauses:
        for piece in conjuncts(c):
            out[piece] += 1
    return out


def _signature(m: MethodDecl):
    return (m.name, tuple(m.params), tuple(m.returns), m.is_ghost, m.visibility)


def check_guard(before: Program, after: Program) -> GuardReport:
    violations: list[Violation] = []

    before_methods = {m.name: m for m in before.methods()}
    after_methods = {m.name: m for m in after.methods()}

    for name, bm in before_methods.items():
        am = after_methods.get(name)
        if bm.visibility == Visibility.GENERATED:
            if am is not None and am.visibility != Visibility.GENERATED:
                violations.append(Violation(
                    "SignatureChanged", name,
                    "generated method cannot become public or private"))
            continue
        if am is None:
            violations.append(Violation(
                "PublicRemoved", name,
                f"{bm.visibility.value} method removed"))
            continue
        if _signature(bm) != _signature(am):
            violations.append(Violation(
                "SignatureChanged", name, "declaration signature differs"))
            continue
        if (bm.modifies or "") != (am.modifies or ""):
            violations.append(Violation(
                "SignatureChanged", name, "modifies clause changed"))
        if bm.visibility == Visibility.PUBLIC:
            pre_b = _conjunct_multiset(bm.requires)
            pre_a = _conjunct_multiset(am.requires)
            extra_pre = pre_a - pre_b
            if extra_pre:
                sample = print_expr(next(iter(extra_pre)))
                violations.append(Violation(
                    "PublicPreStrengthened", name,
                    f"new precondition conjunct: {sample}"))
            post_b = _conjunct_multiset(bm.ensures)
            post_a = _conjunct_multiset(am.ensures)
            lost_post = post_b - post_a
            if lost_post:
                sample = print_expr(next(iter(lost_post)))
                violations.append(Violation(
                    "PublicPostWeakened", name,
                    f"dropped postcondition conjunct: {sample}"))

    for name, am in after_methods.items():
        if name not in before_methods and am.visibility != Visibility.GENERATED:
            kind = "SignatureChanged" if am.is_ghost else "CodeChanged"
            violations.append(Violation(
                kind, name, "new method is not marked generated"))

    _check_projection(before, after, violations)

    return GuardReport(not violations, violations)


def _check_projection(before: Program, after: Program, violations: list[Violation]):
    pb = compiled_projection(before)
    pa = compiled_projection(after)

    def keyed(p: Program):
        return {(type(d).__name__, d.name): d for d in p.decls}

    db, da = keyed(pb), keyed(pa)
    for key, decl in db.items():
        kind_name, name = key
        other = da.get(key)
        if other is None:
            if kind_name == "MethodDecl":
                continue  # method removal already reported above
            violations.append(Violation(
                "CodeChanged", name, f"compiled {kind_name} removed"))
            continue
        if decl != other:
            violations.append(Violation(
                "CodeChanged", name, "compiled code differs"))
    for key in da:
        if key not in db:
            kind_name, name = key
            if kind_name == "MethodDecl":
                continue  # flagged as non-generated addition above
            violations.append(Violation(
                "CodeChanged", name, f"compiled {kind_name} added"))


def format_report(report: GuardReport) -> str:
    return str(report)

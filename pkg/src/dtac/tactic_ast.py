"""AST for the tactic language: definitions, transformations, patterns, props."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .nodes import Expr, Stmt, Type


# ---------------------------------------------------------------------------
# Code patterns (the ⟨code⟩ templates inside rules and matches)


@dataclass(frozen=True)
class EllipsisStmts:
    """`...` in statement position: a possibly-empty run of statements."""


StmtPat = Union[Stmt, EllipsisStmts]  # statements may contain MetaVar exprs


@dataclass(frozen=True)
class InsertionPat:
    """Empty left-hand side: matches every insertion point."""


@dataclass
class StmtSeqPat:
    items: list  # list[StmtPat]


@dataclass
class MethodPat:
    name: str  # "?x" for a metavariable, plain identifier otherwise
    params: object  # "ellipsis" | str metavar ("?ys") | list[(name, Type)]
    requires_pats: list[Expr] = field(default_factory=list)
    ensures_pats: list[Expr] = field(default_factory=list)
    contract_ellipsis: bool = False
    body: Optional[list] = None  # None: leave body alone; else list[StmtPat]
    is_ghost: bool = False


@dataclass
class DeclSeqPat:
    items: list[MethodPat]


CodePat = Union[InsertionPat, StmtSeqPat, MethodPat, DeclSeqPat]


# ---------------------------------------------------------------------------
# Instantiation lists


@dataclass(frozen=True)
class PosItem:
    ref: object  # a positions.PosRef


@dataclass(frozen=True)
class BindItem:
    name: str
    value: Expr  # pattern expression, evaluated against the environment


InstItem = Union[PosItem, BindItem]
Inst = list


# ---------------------------------------------------------------------------
# Props (when-clauses)


@dataclass(frozen=True)
class IsProp:
    term: Expr  # Var or MetaVar naming a method
    kind: str  # "public" | "private" | "generated" | "ghost"


@dataclass(frozen=True)
class NotProp:
    inner: "Prop"


@dataclass(frozen=True)
class ErrorEquals:
    text: str


@dataclass(frozen=True)
class PatternEquals:
    subject: Expr
    pattern: Expr


Prop = Union[IsProp, NotProp, ErrorEquals, PatternEquals]


# ---------------------------------------------------------------------------
# Transformations


@dataclass
class Rule:
    lhs: CodePat
    rhs: CodePat
    inst: Optional[Inst] = None


@dataclass
class MatchT:
    pat: CodePat
    inst: Optional[Inst] = None


@dataclass
class Seq:
    first: "Trans"
    second: "Trans"


@dataclass
class Or:
    left: "Trans"
    right: "Trans"


@dataclass
class RuleArg:
    """A rewrite rule `l =>> r` passed as a tactic argument."""

    lhs: Expr
    rhs: Expr


@dataclass
class Call:
    name: str
    args: list  # list[Expr | RuleArg]
    inst: Optional[Inst] = None


Trans = Union[Rule, MatchT, Seq, Or, Call]


@dataclass
class When:
    prop: Prop
    inner: Trans


TacticBody = Union[When, Rule, MatchT, Seq, Or, Call]


@dataclass
class TacticDef:
    name: str
    formals: list[str]
    body: TacticBody
    doc: str = ""


# Metavariable names bound by the machinery rather than by patterns; rules may
# mention them on the right-hand side without binding them on the left.
RESERVED_VARS = {"pre", "post", "meth", "arg", "error", "err_arg"}


def pattern_vars(pat) -> set[str]:
    """Metavariable names occurring in a code pattern."""
    from .nodes import (
        AssertS, AssignS, CallS, IfS, MarkerS, MetaVar, VarDeclS,
        expr_metavars, RewriteCall,
    )

    out: set[str] = set()

    def expr_vars(e):
        if isinstance(e, RewriteCall):
            # rule-form internals are rule-local; subject and literal forms count
            out.update(expr_metavars(e.subject))
            if e.mode != "rule":
                for x in e.lhs + e.rhs:
                    out.update(expr_metavars(x))
            return
        out.update(expr_metavars(e))

    def stmt_vars(s):
        if isinstance(s, EllipsisStmts):
            return
        if isinstance(s, AssertS):
            expr_vars(s.expr)
        elif isinstance(s, AssignS):
            expr_vars(s.lhs)
            expr_vars(s.rhs)
        elif isinstance(s, CallS):
            if s.func.startswith("?"):
                out.add(s.func[1:])
            for a in s.args:
                expr_vars(a)
        elif isinstance(s, VarDeclS):
            if s.init is not None:
                expr_vars(s.init)
            if s.such_that is not None:
                expr_vars(s.such_that)
        elif isinstance(s, IfS):
            expr_vars(s.cond)
            for x in s.then:
                stmt_vars(x)
            for x in s.els:
                stmt_vars(x)
        elif isinstance(s, MarkerS):
            pass

    if isinstance(pat, InsertionPat):
        return out
    if isinstance(pat, StmtSeqPat):
        for s in pat.items:
            stmt_vars(s)
        return out
    if isinstance(pat, MethodPat):
        if pat.name.startswith("?"):
            out.add(pat.name[1:])
        if isinstance(pat.params, str) and pat.params.startswith("?"):
            out.add(pat.params[1:])
        for e in pat.requires_pats + pat.ensures_pats:
            expr_vars(e)
        if pat.body is not None:
            for s in pat.body:
                stmt_vars(s)
        return out
    if isinstance(pat, DeclSeqPat):
        for m in pat.items:
            out |= pattern_vars(m)
        return out
    raise TypeError(pat)

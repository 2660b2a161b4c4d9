"""AST for the mini-Dafny subset.

All nodes are plain dataclasses compared structurally; statement node ids are
bookkeeping only and never take part in equality.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

_node_counter = itertools.count(1)


def fresh_id() -> int:
    return next(_node_counter)


# ---------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class TName:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class TSeq:
    elem: "Type"

    def __str__(self) -> str:
        return f"seq<{self.elem}>"


Type = Union[TName, TSeq]

INT = TName("int")
BOOL = TName("bool")


# ---------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class NullLit:
    pass


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class MetaVar:
    """A `?name` hole; only legal inside tactic patterns, never in programs."""

    name: str


@dataclass(frozen=True)
class SeqLit:
    elems: tuple["Expr", ...]


@dataclass(frozen=True)
class Bin:
    op: str  # one of BIN_OPS
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class Quant:
    kind: str  # "exists" | "forall"
    bound: tuple[tuple[str, Optional[Type]], ...]
    body: "Expr"


@dataclass(frozen=True)
class Len:
    operand: "Expr"


@dataclass(frozen=True)
class App:
    func: str
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class FieldAccess:
    base: "Expr"
    name: str


@dataclass(frozen=True)
class MatchCase:
    ctor: str
    binders: tuple[str, ...]
    body: "Expr"


@dataclass(frozen=True)
class MatchExpr:
    scrutinee: "Expr"
    cases: tuple[MatchCase, ...]


@dataclass(frozen=True)
class EllipsisExpr:
    """`..` in an expression slot of a pattern (e.g. an ignored if-condition)."""


@dataclass(frozen=True)
class RewriteCall:
    """Embedded `rewrite(...)` in a pattern; evaluated during instantiation.

    mode is "rule" (single rewrite rule), "pair" (literal l/r), or "list"
    (pairwise literal l_i/r_i).
    """

    mode: str
    lhs: tuple["Expr", ...]
    rhs: tuple["Expr", ...]
    subject: "Expr"


Expr = Union[
    IntLit, BoolLit, NullLit, Var, MetaVar, SeqLit, Bin, Not, Quant, Len,
    App, FieldAccess, MatchExpr, EllipsisExpr, RewriteCall,
]

BIN_OPS = ("==>", "||", "&&", "==", "!=", "<=", "<", ">=", ">", "+", "-", "/")


# ---------------------------------------------------------------------------
# Statements


@dataclass
class VarDeclS:
    names: list[str]
    type: Optional[Type]
    init: Optional[Expr]          # plain `:=` initializer
    such_that: Optional[Expr]     # `:|` initializer; ghost-only
    is_ghost: bool = False
    node_id: int = field(default_factory=fresh_id, compare=False, repr=False)


@dataclass
class AssignS:
    lhs: Expr  # Var or FieldAccess chain
    rhs: Expr
    node_id: int = field(default_factory=fresh_id, compare=False, repr=False)


@dataclass
class CallS:
    func: str
    args: tuple[Expr, ...]
    node_id: int = field(default_factory=fresh_id, compare=False, repr=False)


@dataclass
class AssertS:
    expr: Expr
    node_id: int = field(default_factory=fresh_id, compare=False, repr=False)


@dataclass
class IfS:
    cond: Expr
    then: list["Stmt"]
    els: list["Stmt"]
    node_id: int = field(default_factory=fresh_id, compare=False, repr=False)


@dataclass
class MarkerS:
    """A named position anchor, written `/*@name*/`; occupies a statement slot."""

    name: str
    node_id: int = field(default_factory=fresh_id, compare=False, repr=False)


Stmt = Union[VarDeclS, AssignS, CallS, AssertS, IfS, MarkerS]
Block = list


# ---------------------------------------------------------------------------
# Declarations


class Visibility(Enum):
    PUBLIC = "public"
    PRIVATE = "private"
    GENERATED = "generated"


@dataclass
class DatatypeDecl:
    name: str
    ctors: list[tuple[str, list[tuple[str, Type]]]]


@dataclass
class ClassDecl:
    name: str
    fields: list[tuple[str, Type]]


@dataclass
class FunctionDecl:
    name: str
    params: list[tuple[str, Type]]
    ret_type: Type
    body: Optional[Expr]
    is_predicate: bool = False
    is_compiled: bool = True  # `function method` / `predicate method`


@dataclass
class MethodDecl:
    name: str
    visibility: Visibility
    is_ghost: bool
    params: list[tuple[str, Type]]
    returns: list[tuple[str, Type]]
    requires: list[Expr]
    ensures: list[Expr]
    modifies: Optional[str]  # opaque clause text, compared verbatim
    body: Optional[Block]


Decl = Union[DatatypeDecl, ClassDecl, FunctionDecl, MethodDecl]


@dataclass
class Program:
    decls: list[Decl]

    def method(self, name: str) -> Optional[MethodDecl]:
        for d in self.decls:
            if isinstance(d, MethodDecl) and d.name == name:
                return d
        return None

    def methods(self) -> list[MethodDecl]:
        return [d for d in self.decls if isinstance(d, MethodDecl)]

    def decl_names(self) -> list[str]:
        return [d.name for d in self.decls]


# ---------------------------------------------------------------------------
# Structural helpers

def stmt_children_blocks(s: Stmt) -> list[Block]:
    if isinstance(s, IfS):
        return [s.then, s.els]
    return []


def walk_blocks(block: Block, path: tuple = ()):
    """Yield (path, block) for block and every nested block.

    A path is a tuple of (stmt_index, branch) pairs where branch is
    "then" or "els".
    """
    yield path, block
    for i, s in enumerate(block):
        if isinstance(s, IfS):
            yield from walk_blocks(s.then, path + ((i, "then"),))
            yield from walk_blocks(s.els, path + ((i, "els"),))


def block_at(block: Block, path: tuple) -> Block:
    cur = block
    for idx, branch in path:
        s = cur[idx]
        assert isinstance(s, IfS)
        cur = s.then if branch == "then" else s.els
    return cur


def copy_expr(e: Expr) -> Expr:
    return e  # expressions are immutable


def copy_stmt(s: Stmt) -> Stmt:
    if isinstance(s, VarDeclS):
        return VarDeclS(list(s.names), s.type, s.init, s.such_that, s.is_ghost)
    if isinstance(s, AssignS):
        return AssignS(s.lhs, s.rhs)
    if isinstance(s, CallS):
        return CallS(s.func, s.args)
    if isinstance(s, AssertS):
        return AssertS(s.expr)
    if isinstance(s, IfS):
        return IfS(s.cond, [copy_stmt(x) for x in s.then], [copy_stmt(x) for x in s.els])
    if isinstance(s, MarkerS):
        return MarkerS(s.name)
    raise TypeError(s)


def copy_decl(d: Decl) -> Decl:
    if isinstance(d, MethodDecl):
        return MethodDecl(
            d.name, d.visibility, d.is_ghost,
            list(d.params), list(d.returns),
            list(d.requires), list(d.ensures), d.modifies,
            None if d.body is None else [copy_stmt(s) for s in d.body],
        )
    if isinstance(d, DatatypeDecl):
        return DatatypeDecl(d.name, [(n, list(fs)) for n, fs in d.ctors])
    if isinstance(d, ClassDecl):
        return ClassDecl(d.name, list(d.fields))
    if isinstance(d, FunctionDecl):
        return FunctionDecl(d.name, list(d.params), d.ret_type, d.body,
                            d.is_predicate, d.is_compiled)
    raise TypeError(d)


def copy_program(p: Program) -> Program:
    return Program([copy_decl(d) for d in p.decls])


def conjuncts(e: Expr) -> list[Expr]:
    """Split an expression on top-level `&&`."""
    if isinstance(e, Bin) and e.op == "&&":
        return conjuncts(e.left) + conjuncts(e.right)
    return [e]


def expr_metavars(e: Expr) -> set[str]:
    out: set[str] = set()

    def go(x):
        if isinstance(x, MetaVar):
            out.add(x.name)
        elif isinstance(x, Bin):
            go(x.left); go(x.right)
        elif isinstance(x, Not):
            go(x.operand)
        elif isinstance(x, Len):
            go(x.operand)
        elif isinstance(x, Quant):
            go(x.body)
        elif isinstance(x, SeqLit):
            for a in x.elems:
                go(a)
        elif isinstance(x, App):
            for a in x.args:
                go(a)
        elif isinstance(x, FieldAccess):
            go(x.base)
        elif isinstance(x, MatchExpr):
            go(x.scrutinee)
            for c in x.cases:
                go(c.body)
        elif isinstance(x, RewriteCall):
            for a in x.lhs + x.rhs + (x.subject,):
                go(a)

    go(e)
    return out


def expr_contains(haystack: Expr, needle: Expr) -> bool:
    if haystack == needle:
        return True
    if isinstance(haystack, Bin):
        return expr_contains(haystack.left, needle) or expr_contains(haystack.right, needle)
    if isinstance(haystack, Not):
        return expr_contains(haystack.operand, needle)
    if isinstance(haystack, Len):
        return expr_contains(haystack.operand, needle)
    if isinstance(haystack, Quant):
        return expr_contains(haystack.body, needle)
    if isinstance(haystack, SeqLit):
        return any(expr_contains(a, needle) for a in haystack.elems)
    if isinstance(haystack, App):
        return any(expr_contains(a, needle) for a in haystack.args)
    if isinstance(haystack, FieldAccess):
        return expr_contains(haystack.base, needle)
    if isinstance(haystack, MatchExpr):
        return expr_contains(haystack.scrutinee, needle) or any(
            expr_contains(c.body, needle) for c in haystack.cases)
    return False


def renumber(p: Program) -> Program:
    """Assign fresh node ids throughout; called after every transformation."""
    for d in p.decls:
        if isinstance(d, MethodDecl) and d.body is not None:
            for _, blk in walk_blocks(d.body):
                for s in blk:
                    s.node_id = fresh_id()
    return p

"""Recursive-descent parser for `.mdfy` program files.

The same grammar, with a pattern flag, also parses the code templates embedded
in tactic definitions: metavariables (`?x`), ellipses (`..`/`...`) and embedded
`rewrite(...)` calls are only accepted in pattern mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .nodes import (
    App, AssertS, AssignS, Bin, Block, BoolLit, CallS, ClassDecl,
    DatatypeDecl, EllipsisExpr, Expr, FieldAccess, FunctionDecl, IfS, IntLit,
    Len, MarkerS, MatchCase, MatchExpr, MetaVar, MethodDecl, NullLit, Program,
    Quant, RewriteCall, SeqLit, Stmt, TName, TSeq, Type, Var, VarDeclS,
    Visibility, Not,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class DuplicateAnchorError(ParseError):
    pass


@dataclass
class Token:
    kind: str
    value: str
    line: int
    col: int
    pos: int  # offset into source


KEYWORDS = {
    "datatype", "class", "var", "method", "function", "predicate", "ghost",
    "public", "private", "requires", "ensures", "modifies", "returns",
    "assert", "if", "else", "match", "case", "exists", "forall", "true",
    "false", "null", "seq", "int", "bool", "rewrite",
}

MULTI_OPS = ["=>>", "==>", ":=", ":|", "::", "==", "!=", "<=", ">=", "&&", "||", "=>"]
SINGLE_OPS = "+-/<>=!(),;:{}[]|."


def tokenize(src: str, pattern: bool = False) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(src)

    def err(msg):
        raise ParseError(msg, line, col)

    while i < n:
        c = src[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c.isspace():
            i += 1
            col += 1
            continue
        if src.startswith("//", i):
            while i < n and src[i] != "\n":
                i += 1
            continue
        if src.startswith("/*", i):
            end = src.find("*/", i + 2)
            if end < 0:
                err("unterminated comment")
            inner = src[i + 2:end].strip()
            tok_line, tok_col = line, col
            consumed = src[i:end + 2]
            if inner.startswith("@"):
                name = inner[1:].strip()
                if not name.isidentifier():
                    err(f"bad anchor name {inner!r}")
                toks.append(Token("ANCHOR", name, tok_line, tok_col, i))
            elif inner == "generated":
                toks.append(Token("GENERATED", inner, tok_line, tok_col, i))
            # any other comment is discarded
            line += consumed.count("\n")
            col = col + len(consumed) if "\n" not in consumed else len(consumed) - consumed.rfind("\n")
            i = end + 2
            continue
        if c == '"':
            j = i + 1
            while j < n and src[j] != '"':
                if src[j] == "\n":
                    err("unterminated string")
                j += 1
            if j >= n:
                err("unterminated string")
            toks.append(Token("STRING", src[i + 1:j], line, col, i))
            col += j + 1 - i
            i = j + 1
            continue
        if c == ".":
            j = i
            while j < n and src[j] == ".":
                j += 1
            dots = j - i
            if dots >= 2:
                if not pattern:
                    err("ellipsis is only allowed in tactic patterns")
                toks.append(Token("ELLIPSIS", "." * dots, line, col, i))
                col += dots
                i = j
                continue
            toks.append(Token("OP", ".", line, col, i))
            i += 1
            col += 1
            continue
        if c == "?":
            if not pattern:
                err("metavariables are only allowed in tactic patterns")
            j = i + 1
            while j < n and (src[j].isalnum() or src[j] in "_'"):
                j += 1
            if j == i + 1:
                err("bad metavariable")
            toks.append(Token("METAVAR", src[i + 1:j], line, col, i))
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            toks.append(Token("INT", src[i:j], line, col, i))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            word = src[i:j]
            kind = "KW" if word in KEYWORDS else "IDENT"
            toks.append(Token(kind, word, line, col, i))
            col += j - i
            i = j
            continue
        matched = False
        for op in MULTI_OPS:
            if src.startswith(op, i):
                toks.append(Token("OP", op, line, col, i))
                i += len(op)
                col += len(op)
                matched = True
                break
        if matched:
            continue
        if c in SINGLE_OPS:
            toks.append(Token("OP", c, line, col, i))
            i += 1
            col += 1
            continue
        err(f"unexpected character {c!r}")
    toks.append(Token("EOF", "", line, col, n))
    return toks


class Parser:
    def __init__(self, src: str, pattern: bool = False):
        self.src = src
        self.pattern = pattern
        self.toks = tokenize(src, pattern=pattern)
        self.i = 0

    # -- token helpers -----------------------------------------------------

    @property
    def cur(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, kind: str, value: Optional[str] = None) -> bool:
        t = self.cur
        return t.kind == kind and (value is None or t.value == value)

    def at_kw(self, word: str) -> bool:
        return self.at("KW", word)

    def advance(self) -> Token:
        t = self.cur
        if t.kind != "EOF":
            self.i += 1
        return t

    def expect(self, kind: str, value: Optional[str] = None) -> Token:
        if not self.at(kind, value):
            want = value or kind
            raise ParseError(f"expected {want!r}, found {self.cur.value!r}",
                             self.cur.line, self.cur.col)
        return self.advance()

    def error(self, msg: str):
        raise ParseError(msg, self.cur.line, self.cur.col)

    # -- program -----------------------------------------------------------

    def parse_program(self) -> Program:
        decls = []
        while not self.at("EOF"):
            decls.append(self.parse_decl())
        prog = Program(decls)
        _check_program(prog)
        return prog

    def parse_decl(self):
        if self.at_kw("datatype"):
            return self.parse_datatype()
        if self.at_kw("class"):
            return self.parse_class()
        mods = self.parse_modifiers()
        if self.at_kw("function") or self.at_kw("predicate"):
            if mods["visibility"] is not None or mods["generated"]:
                self.error("functions take no visibility modifiers")
            return self.parse_function(mods["ghost"])
        if self.at_kw("method"):
            return self.parse_method(mods)
        self.error(f"expected a declaration, found {self.cur.value!r}")

    def parse_modifiers(self) -> dict:
        mods = {"visibility": None, "ghost": False, "generated": False}
        while True:
            if self.at_kw("public"):
                self.advance()
                mods["visibility"] = Visibility.PUBLIC
            elif self.at_kw("private"):
                self.advance()
                mods["visibility"] = Visibility.PRIVATE
            elif self.at("GENERATED"):
                self.advance()
                mods["generated"] = True
            elif self.at_kw("ghost"):
                self.advance()
                mods["ghost"] = True
            else:
                return mods

    def parse_datatype(self) -> DatatypeDecl:
        self.expect("KW", "datatype")
        name = self.expect("IDENT").value
        self.expect("OP", "=")
        ctors = [self.parse_ctor()]
        while self.at("OP", "|"):
            self.advance()
            ctors.append(self.parse_ctor())
        self.expect("OP", ";")
        return DatatypeDecl(name, ctors)

    def parse_ctor(self):
        name = self.expect("IDENT").value
        fields: list[tuple[str, Type]] = []
        if self.at("OP", "("):
            self.advance()
            while not self.at("OP", ")"):
                fname = self.expect("IDENT").value
                self.expect("OP", ":")
                fields.append((fname, self.parse_type()))
                if self.at("OP", ","):
                    self.advance()
            self.expect("OP", ")")
        return (name, fields)

    def parse_class(self) -> ClassDecl:
        self.expect("KW", "class")
        name = self.expect("IDENT").value
        self.expect("OP", "{")
        fields = []
        while self.at_kw("var"):
            self.advance()
            fname = self.expect("IDENT").value
            self.expect("OP", ":")
            fields.append((fname, self.parse_type()))
            self.expect("OP", ";")
        self.expect("OP", "}")
        return ClassDecl(name, fields)

    def parse_function(self, is_ghost: bool) -> FunctionDecl:
        is_predicate = self.at_kw("predicate")
        self.advance()  # function | predicate
        is_compiled = False
        if self.at_kw("method"):
            self.advance()
            is_compiled = True
        name = self.expect("IDENT").value
        params = self.parse_params()
        if is_predicate:
            ret: Type = TName("bool")
        else:
            self.expect("OP", ":")
            ret = self.parse_type()
        body = None
        if self.at("OP", "{"):
            self.advance()
            body = self.parse_expr()
            self.expect("OP", "}")
        return FunctionDecl(name, params, ret, body, is_predicate,
                            is_compiled and not is_ghost)

    def parse_params(self) -> list[tuple[str, Type]]:
        self.expect("OP", "(")
        params = []
        while not self.at("OP", ")"):
            pname = self.expect("IDENT").value
            self.expect("OP", ":")
            params.append((pname, self.parse_type()))
            if self.at("OP", ","):
                self.advance()
        self.expect("OP", ")")
        return params

    def parse_method(self, mods: dict) -> MethodDecl:
        self.expect("KW", "method")
        name = self.expect("IDENT").value
        params = self.parse_params()
        returns: list[tuple[str, Type]] = []
        if self.at_kw("returns"):
            self.advance()
            returns = self.parse_params()
        requires, ensures = [], []
        modifies = None
        while True:
            if self.at_kw("requires"):
                self.advance()
                requires.append(self.parse_expr())
                self.expect("OP", ";")
            elif self.at_kw("ensures"):
                self.advance()
                ensures.append(self.parse_expr())
                self.expect("OP", ";")
            elif self.at_kw("modifies"):
                self.advance()
                start = self.cur.pos
                while not self.at("OP", ";"):
                    if self.at("EOF"):
                        self.error("unterminated modifies clause")
                    self.advance()
                modifies = self.src[start:self.cur.pos].strip()
                self.expect("OP", ";")
            else:
                break
        body = None
        if self.at("OP", "{"):
            body = self.parse_block(ghost_ctx=mods["ghost"] or mods["generated"])
        if mods["generated"]:
            visibility = Visibility.GENERATED
        else:
            visibility = mods["visibility"] or Visibility.PUBLIC
        is_ghost = mods["ghost"] or mods["generated"]
        return MethodDecl(name, visibility, is_ghost, params, returns,
                          requires, ensures, modifies, body)

    # -- statements ----------------------------------------------------------

    def parse_block(self, ghost_ctx: bool = False) -> Block:
        self.expect("OP", "{")
        stmts = []
        while not self.at("OP", "}"):
            stmts.append(self.parse_stmt(ghost_ctx))
        self.expect("OP", "}")
        return stmts

    def parse_stmt(self, ghost_ctx: bool = False) -> Stmt:
        if self.at("ANCHOR"):
            return MarkerS(self.advance().value)
        if self.at("ELLIPSIS"):
            self.error("ellipsis is not a statement here")
        if self.at_kw("assert"):
            self.advance()
            e = self.parse_expr()
            self.expect("OP", ";")
            return AssertS(e)
        if self.at_kw("if"):
            self.advance()
            self.expect("OP", "(")
            cond = self.parse_expr()
            self.expect("OP", ")")
            then = self.parse_block(ghost_ctx)
            els: Block = []
            if self.at_kw("else"):
                self.advance()
                els = self.parse_block(ghost_ctx)
            return IfS(cond, then, els)
        is_ghost = False
        if self.at_kw("ghost"):
            self.advance()
            is_ghost = True
            if not self.at_kw("var"):
                self.error("expected 'var' after 'ghost'")
        if self.at_kw("var"):
            self.advance()
            names = [self.expect("IDENT").value]
            while self.at("OP", ","):
                self.advance()
                names.append(self.expect("IDENT").value)
            vtype = None
            if self.at("OP", ":"):
                self.advance()
                vtype = self.parse_type()
            init = such = None
            if self.at("OP", ":="):
                self.advance()
                init = self.parse_expr()
            elif self.at("OP", ":|"):
                self.advance()
                such = self.parse_expr()
            self.expect("OP", ";")
            return VarDeclS(names, vtype, init, such, is_ghost or ghost_ctx)
        # assignment or call, both start with an lvalue-ish expression
        lv = self.parse_postfix(self.parse_primary())
        if self.at("OP", ":="):
            if not isinstance(lv, (Var, FieldAccess, MetaVar)):
                self.error("bad assignment target")
            self.advance()
            rhs = self.parse_expr()
            self.expect("OP", ";")
            return AssignS(lv, rhs)
        if isinstance(lv, App):
            self.expect("OP", ";")
            return CallS(lv.func, lv.args)
        self.error("expected a statement")

    # -- types ----------------------------------------------------------------

    def parse_type(self) -> Type:
        if self.at_kw("seq"):
            self.advance()
            self.expect("OP", "<")
            elem = self.parse_type()
            self.expect("OP", ">")
            return TSeq(elem)
        if self.at_kw("int") or self.at_kw("bool"):
            return TName(self.advance().value)
        return TName(self.expect("IDENT").value)

    # -- expressions ------------------------------------------------------------
    # precedence: ==>  <  ||  <  &&  <  comparisons  <  +/-  <  /  <  unary

    def parse_expr(self) -> Expr:
        return self.parse_implies()

    def parse_implies(self) -> Expr:
        left = self.parse_or()
        if self.at("OP", "==>"):
            self.advance()
            return Bin("==>", left, self.parse_implies())
        return left

    def parse_or(self) -> Expr:
        left = self.parse_and()
        if self.at("OP", "||"):
            self.advance()
            return Bin("||", left, self.parse_or())
        return left

    def parse_and(self) -> Expr:
        left = self.parse_cmp()
        if self.at("OP", "&&"):
            self.advance()
            return Bin("&&", left, self.parse_and())
        return left

    def parse_cmp(self) -> Expr:
        left = self.parse_add()
        for op in ("==", "!=", "<=", ">=", "<", ">"):
            if self.at("OP", op):
                self.advance()
                return Bin(op, left, self.parse_add())
        return left

    def parse_add(self) -> Expr:
        # right-nested so that rewrite rules can peel sums one operand at a time
        left = self.parse_div()
        for op in ("+", "-"):
            if self.at("OP", op):
                self.advance()
                return Bin(op, left, self.parse_add())
        return left

    def parse_div(self) -> Expr:
        left = self.parse_unary()
        if self.at("OP", "/"):
            self.advance()
            return Bin("/", left, self.parse_div())
        return left

    def parse_unary(self) -> Expr:
        if self.at("OP", "!"):
            self.advance()
            return Not(self.parse_unary())
        return self.parse_postfix(self.parse_primary())

    def parse_postfix(self, e: Expr) -> Expr:
        while True:
            if self.at("OP", "."):
                self.advance()
                e = FieldAccess(e, self.expect("IDENT").value)
            elif self.at("OP", "(") and isinstance(e, (Var, MetaVar)):
                args = self.parse_args()
                func = e.name if isinstance(e, Var) else "?" + e.name
                e = App(func, tuple(args))
            else:
                return e

    def parse_args(self) -> list[Expr]:
        self.expect("OP", "(")
        args = []
        while not self.at("OP", ")"):
            args.append(self.parse_expr())
            if self.at("OP", ","):
                self.advance()
        self.expect("OP", ")")
        return args

    def parse_primary(self) -> Expr:
        t = self.cur
        if t.kind == "INT":
            self.advance()
            return IntLit(int(t.value))
        if self.at_kw("true"):
            self.advance()
            return BoolLit(True)
        if self.at_kw("false"):
            self.advance()
            return BoolLit(False)
        if self.at_kw("null"):
            self.advance()
            return NullLit()
        if t.kind == "METAVAR":
            self.advance()
            return MetaVar(t.value)
        if t.kind == "ELLIPSIS":
            self.advance()
            return EllipsisExpr()
        if self.at_kw("rewrite"):
            return self.parse_rewrite_call()
        if self.at_kw("exists") or self.at_kw("forall"):
            kind = self.advance().value
            bound = []
            while True:
                if self.at("METAVAR"):
                    bname = "?" + self.advance().value
                else:
                    bname = self.expect("IDENT").value
                btype = None
                if self.at("OP", ":"):
                    self.advance()
                    btype = self.parse_type()
                bound.append((bname, btype))
                if self.at("OP", ","):
                    self.advance()
                    continue
                break
            self.expect("OP", "::")
            return Quant(kind, tuple(bound), self.parse_expr())
        if self.at_kw("match"):
            self.advance()
            scrutinee = self.parse_postfix(self.parse_primary())
            cases = []
            while self.at_kw("case"):
                self.advance()
                ctor = self.expect("IDENT").value
                binders: list[str] = []
                if self.at("OP", "("):
                    self.advance()
                    while not self.at("OP", ")"):
                        binders.append(self.expect("IDENT").value)
                        if self.at("OP", ","):
                            self.advance()
                    self.expect("OP", ")")
                self.expect("OP", "=>")
                body = self.parse_expr()
                cases.append(MatchCase(ctor, tuple(binders), body))
            if not cases:
                self.error("match expression needs at least one case")
            return MatchExpr(scrutinee, tuple(cases))
        if self.at("OP", "|"):
            self.advance()
            inner = self.parse_expr()
            self.expect("OP", "|")
            return Len(inner)
        if self.at("OP", "("):
            self.advance()
            inner = self.parse_expr()
            self.expect("OP", ")")
            return inner
        if self.at("OP", "["):
            self.advance()
            elems = []
            while not self.at("OP", "]"):
                elems.append(self.parse_expr())
                if self.at("OP", ","):
                    self.advance()
            self.expect("OP", "]")
            return SeqLit(tuple(elems))
        if t.kind == "IDENT":
            self.advance()
            return Var(t.value)
        self.error(f"expected an expression, found {t.value!r}")

    def parse_rewrite_call(self) -> RewriteCall:
        self.expect("KW", "rewrite")
        self.expect("OP", "(")
        if self.at("OP", "["):
            lhs = tuple(self._bracket_list())
            self.expect("OP", ",")
            rhs = tuple(self._bracket_list())
            self.expect("OP", ",")
            subject = self.parse_expr()
            self.expect("OP", ")")
            return RewriteCall("list", lhs, rhs, subject)
        first = self.parse_expr()
        if self.at("OP", "=>>"):
            self.advance()
            rule_rhs = self.parse_expr()
            self.expect("OP", ",")
            subject = self.parse_expr()
            self.expect("OP", ")")
            return RewriteCall("rule", (first,), (rule_rhs,), subject)
        self.expect("OP", ",")
        second = self.parse_expr()
        if self.at("OP", ")"):
            # rewrite(R, c) where R names a rule passed as a tactic argument
            self.advance()
            return RewriteCall("rule", (first,), (), second)
        self.expect("OP", ",")
        subject = self.parse_expr()
        self.expect("OP", ")")
        return RewriteCall("pair", (first,), (second,), subject)

    def _bracket_list(self) -> list[Expr]:
        self.expect("OP", "[")
        out = []
        while not self.at("OP", "]"):
            out.append(self.parse_expr())
            if self.at("OP", ","):
                self.advance()
        self.expect("OP", "]")
        return out


def _check_program(prog: Program):
    names = prog.decl_names()
    dupes = {n for n in names if names.count(n) > 1}
    if dupes:
        raise ParseError(f"duplicate declaration name(s): {sorted(dupes)}", 0, 0)
    from .nodes import walk_blocks, MarkerS as M, MethodDecl as MD
    seen: set[str] = set()
    for d in prog.decls:
        if isinstance(d, MD) and d.body is not None:
            for _, blk in walk_blocks(d.body):
                for s in blk:
                    if isinstance(s, M):
                        if s.name in seen:
                            raise DuplicateAnchorError(
                                f"duplicate anchor @{s.name}", 0, 0)
                        seen.add(s.name)


def parse_program(text: str) -> Program:
    """Parse a `.mdfy` compilation unit."""
    return Parser(text).parse_program()


def parse_expr(text: str, pattern: bool = False) -> Expr:
    p = Parser(text, pattern=pattern)
    e = p.parse_expr()
    p.expect("EOF")
    return e

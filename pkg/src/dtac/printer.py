"""Deterministic pretty-printer for programs.

`print_program` is the single source of layout: the CLI, diffs, snapshots and
`line(n)` position references all go through it, so printed line numbers are
stable for a given AST.
"""

from __future__ import annotations

from .nodes import (
    App, AssertS, AssignS, Bin, BoolLit, CallS, ClassDecl, DatatypeDecl,
    EllipsisExpr, Expr, FieldAccess, FunctionDecl, IfS, IntLit, Len, MarkerS,
    MatchExpr, MetaVar, MethodDecl, NullLit, Program, Quant, RewriteCall,
    SeqLit, Stmt, TSeq, Type, Var, VarDeclS, Visibility, Not,
)

_PREC = {"==>": 1, "||": 2, "&&": 3,
         "==": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
         "+": 5, "-": 5, "/": 6}


def print_type(t: Type) -> str:
    if isinstance(t, TSeq):
        return f"seq<{print_type(t.elem)}>"
    return t.name


def print_expr(e: Expr, prec: int = 0) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, NullLit):
        return "null"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, MetaVar):
        return "?" + e.name
    if isinstance(e, EllipsisExpr):
        return ".."
    if isinstance(e, SeqLit):
        return "[" + ", ".join(print_expr(x) for x in e.elems) + "]"
    if isinstance(e, Len):
        inner = print_expr(e.operand)
        if inner.startswith("|") or inner.endswith("|"):
            inner = "(" + inner + ")"  # keep bars from lexing as `||`
        return "|" + inner + "|"
    if isinstance(e, App):
        func = "?" + e.func[1:] if e.func.startswith("?") else e.func
        return func + "(" + ", ".join(print_expr(a) for a in e.args) + ")"
    if isinstance(e, FieldAccess):
        return print_expr(e.base, 8) + "." + e.name
    if isinstance(e, Not):
        return "!" + print_expr(e.operand, 7)
    if isinstance(e, Bin):
        p = _PREC[e.op]
        left = print_expr(e.left, p + 1)   # right-nested chains print unparenthesized
        non_assoc = e.op in ("==", "!=", "<", "<=", ">", ">=")
        right = print_expr(e.right, p + 1 if non_assoc else p)
        s = f"{left} {e.op} {right}"
        return f"({s})" if p < prec else s
    if isinstance(e, Quant):
        bound = ", ".join(n if t is None else f"{n} : {print_type(t)}"
                          for n, t in e.bound)
        s = f"{e.kind} {bound} :: {print_expr(e.body)}"
        return f"({s})" if prec > 0 else s
    if isinstance(e, MatchExpr):
        parts = ["match " + print_expr(e.scrutinee, 8)]
        for c in e.cases:
            binders = f"({', '.join(c.binders)})" if c.binders else ""
            parts.append(f"case {c.ctor}{binders} => {print_expr(c.body, 1)}")
        s = " ".join(parts)
        return f"({s})" if prec > 0 else s
    if isinstance(e, RewriteCall):
        subject = print_expr(e.subject)
        if e.mode == "rule":
            if not e.rhs:  # rule passed by name (a tactic argument)
                return f"rewrite({print_expr(e.lhs[0])}, {subject})"
            return f"rewrite({print_expr(e.lhs[0])} =>> {print_expr(e.rhs[0])}, {subject})"
        if e.mode == "pair":
            return f"rewrite({print_expr(e.lhs[0])}, {print_expr(e.rhs[0])}, {subject})"
        ls = "[" + ", ".join(print_expr(x) for x in e.lhs) + "]"
        rs = "[" + ", ".join(print_expr(x) for x in e.rhs) + "]"
        return f"rewrite({ls}, {rs}, {subject})"
    raise TypeError(f"cannot print {e!r}")


class _Printer:
    def __init__(self):
        self.lines: list[str] = []
        self.line_of: dict[int, tuple[int, int]] = {}  # node_id -> (first, last)

    def emit(self, indent: int, text: str) -> int:
        self.lines.append("  " * indent + text)
        return len(self.lines)  # 1-based line number

    def print_params(self, params) -> str:
        return "(" + ", ".join(f"{n} : {print_type(t)}" for n, t in params) + ")"

    def print_stmt(self, s: Stmt, indent: int, in_ghost: bool):
        start = len(self.lines) + 1
        if isinstance(s, MarkerS):
            self.emit(indent, f"/*@{s.name}*/")
        elif isinstance(s, AssertS):
            self.emit(indent, f"assert {print_expr(s.expr)};")
        elif isinstance(s, CallS):
            self.emit(indent, f"{s.func}({', '.join(print_expr(a) for a in s.args)});")
        elif isinstance(s, AssignS):
            self.emit(indent, f"{print_expr(s.lhs)} := {print_expr(s.rhs)};")
        elif isinstance(s, VarDeclS):
            ghost = "ghost " if s.is_ghost and not in_ghost else ""
            head = ghost + "var " + ", ".join(s.names)
            if s.type is not None:
                head += f" : {print_type(s.type)}"
            if s.init is not None:
                head += f" := {print_expr(s.init)}"
            elif s.such_that is not None:
                head += f" :| {print_expr(s.such_that)}"
            self.emit(indent, head + ";")
        elif isinstance(s, IfS):
            self.emit(indent, f"if ({print_expr(s.cond)}) {{")
            for t in s.then:
                self.print_stmt(t, indent + 1, in_ghost)
            if s.els:
                self.emit(indent, "} else {")
                for t in s.els:
                    self.print_stmt(t, indent + 1, in_ghost)
            self.emit(indent, "}")
        else:
            raise TypeError(s)
        self.line_of[s.node_id] = (start, len(self.lines))

    def print_method(self, d: MethodDecl):
        mods = []
        if d.visibility == Visibility.GENERATED:
            mods.append("/*generated*/")
        elif d.visibility == Visibility.PRIVATE:
            mods.append("private")
        else:
            mods.append("public")
        if d.is_ghost:
            mods.append("ghost")
        head = " ".join(mods) + f" method {d.name}" + self.print_params(d.params)
        if d.returns:
            head += " returns " + self.print_params(d.returns)
        self.emit(0, head)
        for e in d.requires:
            self.emit(1, f"requires {print_expr(e)};")
        for e in d.ensures:
            self.emit(1, f"ensures {print_expr(e)};")
        if d.modifies:
            self.emit(1, f"modifies {d.modifies};")
        if d.body is not None:
            self.emit(0, "{")
            for s in d.body:
                self.print_stmt(s, 1, d.is_ghost)
            self.emit(0, "}")

    def print_decl(self, d):
        if isinstance(d, DatatypeDecl):
            ctors = []
            for name, fields in d.ctors:
                if fields:
                    ctors.append(name + "(" + ", ".join(
                        f"{n} : {print_type(t)}" for n, t in fields) + ")")
                else:
                    ctors.append(name)
            self.emit(0, f"datatype {d.name} = " + " | ".join(ctors) + ";")
        elif isinstance(d, ClassDecl):
            self.emit(0, f"class {d.name} {{")
            for n, t in d.fields:
                self.emit(1, f"var {n} : {print_type(t)};")
            self.emit(0, "}")
        elif isinstance(d, FunctionDecl):
            kw = "predicate" if d.is_predicate else "function"
            if d.is_compiled:
                kw += " method"
            head = f"{kw} {d.name}" + self.print_params(d.params)
            if not d.is_predicate:
                head += f" : {print_type(d.ret_type)}"
            if d.body is None:
                self.emit(0, head)
            else:
                self.emit(0, head + " {")
                self.emit(1, print_expr(d.body))
                self.emit(0, "}")
        elif isinstance(d, MethodDecl):
            self.print_method(d)
        else:
            raise TypeError(d)


def print_program(p: Program) -> str:
    return print_program_with_lines(p)[0]


def print_program_with_lines(p: Program):
    """Return (text, {stmt node_id: (first_line, last_line)})."""
    pr = _Printer()
    for i, d in enumerate(p.decls):
        if i:
            pr.emit(0, "")
        pr.print_decl(d)
    text = "\n".join(pr.lines)
    if text:
        text += "\n"
    return text, pr.line_of

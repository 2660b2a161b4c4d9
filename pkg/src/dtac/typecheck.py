"""Best-effort well-formedness checker.

Types flow loosely: an unknown type unifies with anything, so only definite
breaches are reported.  Name resolution is method-wide rather than
position-sensitive; tactics routinely hoist assertions above the declarations
they mention and the verifier fiction, not this checker, owns flow semantics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .nodes import (
    App, AssertS, AssignS, Bin, BoolLit, CallS, ClassDecl, DatatypeDecl,
    EllipsisExpr, Expr, FieldAccess, FunctionDecl, IfS, IntLit, Len, MarkerS,
    MatchExpr, MetaVar, MethodDecl, NullLit, Program, Quant, RewriteCall,
    SeqLit, TName, TSeq, Type, Var, VarDeclS, Not, walk_blocks,
)
from .positions import AbsolutePosition, at


UNKNOWN = TName("?")
BOOLT = TName("bool")
INTT = TName("int")


@dataclass
class TypeError_:
    position: Optional[AbsolutePosition]
    message: str

    def __str__(self):
        where = ""
        if self.position is not None:
            where = f" (in {self.position.method})"
        return self.message + where


def _is(t: Type, name: str) -> bool:
    return isinstance(t, TName) and t.name == name


def _compat(a: Type, b: Type) -> bool:
    if _is(a, "?") or _is(b, "?"):
        return True
    if isinstance(a, TSeq) and isinstance(b, TSeq):
        return _compat(a.elem, b.elem)
    return a == b


class _Checker:
    def __init__(self, prog: Program):
        self.prog = prog
        self.errors: list[TypeError_] = []
        self.datatypes: dict[str, DatatypeDecl] = {}
        self.ctors: dict[str, tuple[str, list[Type]]] = {}
        self.classes: dict[str, dict[str, Type]] = {}
        self.functions: dict[str, FunctionDecl] = {}
        self.methods: dict[str, MethodDecl] = {}
        for d in prog.decls:
            if isinstance(d, DatatypeDecl):
                self.datatypes[d.name] = d
                for cname, fields in d.ctors:
                    self.ctors[cname] = (d.name, [t for _, t in fields])
            elif isinstance(d, ClassDecl):
                self.classes[d.name] = dict(d.fields)
            elif isinstance(d, FunctionDecl):
                self.functions[d.name] = d
            elif isinstance(d, MethodDecl):
                self.methods[d.name] = d
        self.pos: Optional[AbsolutePosition] = None

    def err(self, message: str):
        self.errors.append(TypeError_(self.pos, message))

    # -- locals -------------------------------------------------------------

    def method_locals(self, m: MethodDecl) -> dict[str, tuple[Type, bool]]:
        """name -> (type, is_ghost); method-wide, not flow-sensitive."""
        env: dict[str, tuple[Type, bool]] = {}
        for n, t in m.params:
            env[n] = (t, m.is_ghost)
        for n, t in m.returns:
            env[n] = (t, m.is_ghost)
        if m.body is not None:
            for _, blk in walk_blocks(m.body):
                for s in blk:
                    if isinstance(s, VarDeclS):
                        declared = s.type if s.type is not None else None
                        inferred = declared
                        if inferred is None and s.init is not None:
                            inferred = self.infer_silent(s.init, env, m)
                        for i, n in enumerate(s.names):
                            t = inferred
                            if s.init is not None and isinstance(s.init, App) \
                                    and s.init.func in self.methods and len(s.names) > 1:
                                rets = self.methods[s.init.func].returns
                                t = rets[i][1] if i < len(rets) else UNKNOWN
                            env[n] = (t if t is not None else UNKNOWN,
                                      s.is_ghost or m.is_ghost)
        return env

    def infer_silent(self, e: Expr, env, m) -> Type:
        keep = self.errors
        self.errors = []
        t = self.infer(e, env, m, stmt_head=True)
        self.errors = keep
        return t

    # -- expressions ----------------------------------------------------------

    def infer(self, e: Expr, env, m: Optional[MethodDecl],
              stmt_head: bool = False, extra: Optional[dict] = None) -> Type:
        if isinstance(e, (MetaVar, EllipsisExpr, RewriteCall)):
            self.err("residual tactic pattern in program")
            return UNKNOWN
        if isinstance(e, IntLit):
            return INTT
        if isinstance(e, BoolLit):
            return BOOLT
        if isinstance(e, NullLit):
            return UNKNOWN
        if isinstance(e, Var):
            if extra and e.name in extra:
                return extra[e.name]
            if env is not None and e.name in env:
                return env[e.name][0]
            if e.name in self.ctors:
                dt, fields = self.ctors[e.name]
                if fields:
                    self.err(f"constructor {e.name} needs arguments")
                return TName(dt)
            self.err(f"unresolved name {e.name!r}")
            return UNKNOWN
        if isinstance(e, SeqLit):
            elem = UNKNOWN
            for x in e.elems:
                t = self.infer(x, env, m, extra=extra)
                if elem == UNKNOWN:
                    elem = t
            return TSeq(elem)
        if isinstance(e, Len):
            t = self.infer(e.operand, env, m, extra=extra)
            if not (isinstance(t, TSeq) or _is(t, "?")):
                self.err(f"|..| applied to non-sequence {print_of(e.operand)}")
            return INTT
        if isinstance(e, Not):
            t = self.infer(e.operand, env, m, extra=extra)
            if not _compat(t, BOOLT):
                self.err("'!' applied to non-boolean")
            return BOOLT
        if isinstance(e, Bin):
            lt = self.infer(e.left, env, m, extra=extra)
            rt = self.infer(e.right, env, m, extra=extra)
            if e.op in ("&&", "||", "==>"):
                if not (_compat(lt, BOOLT) and _compat(rt, BOOLT)):
                    self.err(f"non-boolean operand for {e.op}")
                return BOOLT
            if e.op in ("==", "!="):
                if not _compat(lt, rt):
                    self.err(f"mismatched operand types for {e.op}")
                return BOOLT
            if e.op in ("<", "<=", ">", ">="):
                if not (_compat(lt, INTT) and _compat(rt, INTT)):
                    self.err(f"non-integer operand for {e.op}")
                return BOOLT
            if e.op == "+":
                if isinstance(lt, TSeq) or isinstance(rt, TSeq):
                    if not _compat(lt, rt):
                        self.err("mismatched operands for +")
                    return lt if isinstance(lt, TSeq) else rt
                if not (_compat(lt, INTT) and _compat(rt, INTT)):
                    self.err("mismatched operands for +")
                return INTT if _is(lt, "int") or _is(rt, "int") else UNKNOWN
            if not (_compat(lt, INTT) and _compat(rt, INTT)):
                self.err(f"non-integer operand for {e.op}")
            return INTT
        if isinstance(e, Quant):
            scope = dict(extra or {})
            for n, t in e.bound:
                scope[n] = t if t is not None else UNKNOWN
            bt = self.infer(e.body, env, m, extra=scope)
            if not _compat(bt, BOOLT):
                self.err("quantifier body is not boolean")
            return BOOLT
        if isinstance(e, FieldAccess):
            bt = self.infer(e.base, env, m, extra=extra)
            if isinstance(bt, TName) and bt.name in self.classes:
                fields = self.classes[bt.name]
                if e.name not in fields:
                    self.err(f"class {bt.name} has no field {e.name}")
                    return UNKNOWN
                return fields[e.name]
            if _is(bt, "?"):
                return UNKNOWN
            self.err(f"field access on non-object {print_of(e.base)}")
            return UNKNOWN
        if isinstance(e, App):
            if e.func in self.ctors:
                dt, fields = self.ctors[e.func]
                if len(e.args) != len(fields):
                    self.err(f"constructor {e.func} arity mismatch")
                for a in e.args:
                    self.infer(a, env, m, extra=extra)
                return TName(dt)
            if e.func in self.functions:
                f = self.functions[e.func]
                if len(e.args) != len(f.params):
                    self.err(f"function {e.func} arity mismatch")
                for a in e.args:
                    self.infer(a, env, m, extra=extra)
                return f.ret_type
            if e.func in self.methods:
                callee = self.methods[e.func]
                if not stmt_head:
                    self.err(f"method {e.func} used inside an expression")
                elif callee.is_ghost and m is not None and not m.is_ghost:
                    pass  # ghost call from compiled method is a ghost statement
                if len(e.args) != len(callee.params):
                    self.err(f"method {e.func} arity mismatch")
                for a in e.args:
                    self.infer(a, env, m, extra=extra)
                if len(callee.returns) == 1:
                    return callee.returns[0][1]
                return UNKNOWN
            self.err(f"unresolved call target {e.func!r}")
            return UNKNOWN
        if isinstance(e, MatchExpr):
            st = self.infer(e.scrutinee, env, m, extra=extra)
            result: Type = UNKNOWN
            for c in e.cases:
                if c.ctor not in self.ctors:
                    self.err(f"unknown constructor {c.ctor} in match")
                    continue
                dt, fields = self.ctors[c.ctor]
                if not _compat(st, TName(dt)):
                    self.err("match case constructor from a different datatype")
                scope = dict(extra or {})
                if c.binders:
                    if len(c.binders) != len(fields):
                        self.err(f"constructor {c.ctor} binder arity mismatch")
                    for b, t in zip(c.binders, fields):
                        scope[b] = t
                bt = self.infer(c.body, env, m, extra=scope)
                if result == UNKNOWN:
                    result = bt
            return result
        raise TypeError(f"cannot type {e!r}")

    # -- statements ---------------------------------------------------------

    def check_stmt(self, s, env, m: MethodDecl, path, index):
        self.pos = at(m.name, path, index, 1)
        if isinstance(s, MarkerS):
            return
        if isinstance(s, AssertS):
            t = self.infer(s.expr, env, m)
            if not _compat(t, BOOLT):
                self.err("assert of a non-boolean expression")
            return
        if isinstance(s, VarDeclS):
            if s.such_that is not None:
                if not s.is_ghost and not m.is_ghost:
                    self.err("such-that initializer on a non-ghost variable")
                scope = {n: (s.type if s.type is not None else UNKNOWN) for n in s.names}
                t = self.infer(s.such_that, env, m, extra=scope)
                if not _compat(t, BOOLT):
                    self.err("such-that condition is not boolean")
            if s.init is not None:
                t = self.infer(s.init, env, m, stmt_head=True)
                if isinstance(s.init, App) and s.init.func in self.methods:
                    callee = self.methods[s.init.func]
                    if len(callee.returns) != len(s.names):
                        self.err(f"call to {s.init.func} binds {len(s.names)} names "
                                 f"but returns {len(callee.returns)} values")
                    if callee.is_ghost and not (s.is_ghost or m.is_ghost):
                        self.err(f"ghost method {s.init.func} assigned to non-ghost variable")
                elif len(s.names) != 1:
                    self.err("multiple names require a method call initializer")
                elif s.type is not None and not _compat(t, s.type):
                    self.err(f"initializer type does not match declared type of {s.names[0]}")
            return
        if isinstance(s, AssignS):
            lt = self.infer(s.lhs, env, m)
            rt = self.infer(s.rhs, env, m, stmt_head=True)
            if isinstance(s.rhs, App) and s.rhs.func in self.methods:
                callee = self.methods[s.rhs.func]
                if len(callee.returns) != 1:
                    self.err(f"call to {s.rhs.func} used as single-value assignment")
                if callee.is_ghost and not m.is_ghost:
                    base = s.lhs
                    while isinstance(base, FieldAccess):
                        base = base.base
                    if isinstance(base, Var) and env.get(base.name, (UNKNOWN, False))[1] is False:
                        self.err(f"ghost method {s.rhs.func} assigned to non-ghost variable")
            elif not _compat(lt, rt):
                self.err("assignment type mismatch")
            return
        if isinstance(s, CallS):
            if s.func in self.methods:
                callee = self.methods[s.func]
                if len(s.args) != len(callee.params):
                    self.err(f"method {s.func} arity mismatch")
                for a in s.args:
                    self.infer(a, env, m)
            elif s.func in self.functions or s.func in self.ctors:
                self.err(f"{s.func} is not a method")
            else:
                self.err(f"unresolved call target {s.func!r}")
            return
        if isinstance(s, IfS):
            t = self.infer(s.cond, env, m)
            if not _compat(t, BOOLT):
                self.err("if condition is not boolean")
            for i, x in enumerate(s.then):
                self.check_stmt(x, env, m, path + ((index, "then"),), i)
            for i, x in enumerate(s.els):
                self.check_stmt(x, env, m, path + ((index, "els"),), i)
            return
        raise TypeError(s)

    def check(self) -> list[TypeError_]:
        for d in self.prog.decls:
            if isinstance(d, FunctionDecl):
                self.pos = None
                if d.body is not None:
                    scope = {n: t for n, t in d.params}
                    t = self.infer(d.body, None, None, extra=scope)
                    if not _compat(t, d.ret_type):
                        self.err(f"function {d.name} body type mismatch")
            elif isinstance(d, MethodDecl):
                if d.visibility.name == "GENERATED" and not d.is_ghost:
                    self.pos = None
                    self.err(f"generated method {d.name} must be ghost")
                contract_env = {n: (t, d.is_ghost) for n, t in d.params + d.returns}
                self.pos = None
                for e in d.requires + d.ensures:
                    t = self.infer(e, contract_env, d)
                    if not _compat(t, BOOLT):
                        self.err(f"contract clause of {d.name} is not boolean")
                if d.body is not None:
                    env = self.method_locals(d)
                    for i, s in enumerate(d.body):
                        self.check_stmt(s, env, d, (), i)
        return self.errors


def print_of(e) -> str:
    from .printer import print_expr
    try:
        return print_expr(e)
    except Exception:
        return repr(e)


def typecheck(p: Program) -> list[TypeError_]:
    return _Checker(p).check()

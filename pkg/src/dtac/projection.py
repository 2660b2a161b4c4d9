"""Compiled projection: erase every specification element from a program.

What survives is exactly the code the compiler would emit: datatypes, classes,
compiled functions, and non-ghost methods stripped of contracts, asserts,
markers, ghost locals and ghost calls.
"""

from __future__ import annotations

from .nodes import (
    AssertS, AssignS, CallS, ClassDecl, DatatypeDecl, FieldAccess,
    FunctionDecl, IfS, MarkerS, MethodDecl, Program, Stmt, Var, VarDeclS,
)


def _ghost_method_names(p: Program) -> set[str]:
    return {d.name for d in p.methods() if d.is_ghost}


def _project_block(block, ghost_methods: set[str], ghost_vars: set[str]) -> list:
    out: list[Stmt] = []
    for s in block:
        if isinstance(s, (AssertS, MarkerS)):
            continue
        if isinstance(s, VarDeclS):
            if s.is_ghost:
                ghost_vars.update(s.names)
                continue
            if isinstance(s.init, type(None)) is False and _is_ghost_call(s.init, ghost_methods):
                ghost_vars.update(s.names)
                continue
            out.append(VarDeclS(list(s.names), s.type, s.init, s.such_that, False))
            continue
        if isinstance(s, CallS):
            if s.func in ghost_methods:
                continue
            out.append(CallS(s.func, s.args))
            continue
        if isinstance(s, AssignS):
            base = s.lhs
            while isinstance(base, FieldAccess):
                base = base.base
            if isinstance(base, Var) and base.name in ghost_vars:
                continue
            out.append(AssignS(s.lhs, s.rhs))
            continue
        if isinstance(s, IfS):
            out.append(IfS(s.cond,
                           _project_block(s.then, ghost_methods, ghost_vars),
                           _project_block(s.els, ghost_methods, ghost_vars)))
            continue
        out.append(s)
    return out


def _is_ghost_call(e, ghost_methods: set[str]) -> bool:
    from .nodes import App
    return isinstance(e, App) and e.func in ghost_methods


def compiled_projection(p: Program) -> Program:
    ghost_methods = _ghost_method_names(p)
    decls = []
    for d in p.decls:
        if isinstance(d, (DatatypeDecl, ClassDecl)):
            decls.append(d)
        elif isinstance(d, FunctionDecl):
            if d.is_compiled:
                decls.append(d)
        elif isinstance(d, MethodDecl):
            if d.is_ghost:
                continue
            body = None
            if d.body is not None:
                body = _project_block(d.body, ghost_methods, set())
            decls.append(MethodDecl(
                d.name, d.visibility, False,
                list(d.params), list(d.returns),
                [], [], d.modifies, body,
            ))
    return Program(decls)

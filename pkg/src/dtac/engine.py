"""Tactic evaluation: match phase, application phase, backtracking search.

Evaluation is lazy: every relation yields outcomes in deterministic order and
the first candidate accepted by the typechecker and the refactoring guard
wins.  Choice points, outermost first: the verifier report used as the initial
environment, then match sites in document order, then or-branches left first.

An invocation's own instantiation list travels to the first primitive of the
unfolded body (through when-wrappers, seqs and nested calls), as does a
when-condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

from .env import AUTO, EnvError, Environment, INST, flush
from .guard import GuardReport, check_guard
from .kernel import MatchError, apply_match, pmatch, subst_expr
from .nodes import Expr, MetaVar, Program, Var
from .positions import PositionError, admits, resolve_position
from .tactic_ast import (
    BindItem, Call, DeclSeqPat, ErrorEquals, InsertionPat, IsProp, MatchT,
    MethodPat, NotProp, Or, PatternEquals, Rule, RuleArg, Seq, StmtSeqPat,
    TacticDef, When,
)


class EngineFailure(Exception):
    def __init__(self, message: str, notes: Optional[list[str]] = None):
        super().__init__(message)
        self.notes = notes or []

    def report(self) -> str:
        out = [str(self)]
        out.extend(f"  - {n}" for n in self.notes[-12:])
        return "\n".join(out)


@dataclass
class TraceStep:
    tactic: str
    site: object
    action: str  # "rewrite" | "match"


@dataclass
class EvalOutcome:
    env: Environment
    program: Program
    trace: list[TraceStep] = field(default_factory=list)


@dataclass
class RunResult:
    program: Program
    env: Environment
    trace: list[TraceStep]
    guard: GuardReport
    error_env: Environment


def instantiate(items, env: Environment, prog: Program):
    """Evaluate an instantiation list against the environment.

    Returns (bindings, allowed-positions): only the bindings the list itself
    creates (the carried-over set), and the admissible-position entries, or
    None when the list constrains no positions.  Referencing an unbound
    variable is an error.
    """
    out = Environment()
    allowed = []
    for item in items or []:
        if isinstance(item, BindItem):
            bindings = {k: v for k, (v, _) in env.vars.items()}
            value = subst_expr(item.value, bindings, strict=True)
            out.bind(item.name, value, INST)
        else:
            allowed.append(resolve_position(prog, item.ref, env))
    return out, (allowed or None)


class _Search:
    """Bounded failure journal for diagnostics."""

    def __init__(self):
        self.notes: list[str] = []

    def note(self, msg: str):
        if len(self.notes) < 400:
            self.notes.append(msg)


class Engine:
    def __init__(self, library: list[TacticDef]):
        self.lib: dict[str, TacticDef] = {d.name: d for d in library}

    # -- unfolding ----------------------------------------------------------

    def unfold(self, call: Call, env: Optional[Environment] = None,
               stack: tuple = ()):
        """Body of the named tactic with arguments substituted in.

        Argument patterns are instantiated against the current environment
        first (unbound metavariables stay symbolic), realizing carried
        bindings such as the removed assertion's predicate.
        """
        d = self.lib.get(call.name)
        if d is None:
            raise EngineFailure(f"undefined tactic {call.name!r}")
        if call.name in stack:
            raise EngineFailure(
                "recursive tactic application is prohibited: "
                + " -> ".join(stack + (call.name,)))
        if len(d.formals) != len(call.args):
            raise EngineFailure(
                f"{call.name} expects {len(d.formals)} argument(s), "
                f"got {len(call.args)}")
        bindings = {k: v for k, (v, _) in (env.vars.items() if env else ())}
        args = []
        for a in call.args:
            if isinstance(a, RuleArg):
                args.append(RuleArg(subst_expr(a.lhs, bindings, strict=False),
                                    subst_expr(a.rhs, bindings, strict=False)))
            else:
                v = subst_expr(a, bindings, strict=False)
                args.append(v)
        mapping = dict(zip(d.formals, args))
        return _subst_formals_body(d.body, mapping)

    # -- instantiation lists --------------------------------------------------

    def _instantiate(self, items, env: Environment, prog: Program):
        return instantiate(items, env, prog)

    # -- props ----------------------------------------------------------------

    def prop_holds(self, env: Environment, prog: Program, prop) -> bool:
        if isinstance(prop, NotProp):
            return not self.prop_holds(env, prog, prop.inner)
        if isinstance(prop, IsProp):
            name = self._method_name(prop.term, env)
            m = prog.method(name)
            if m is None:
                raise MatchError(f"no method named {name!r}")
            if prop.kind == "ghost":
                return m.is_ghost
            return m.visibility.value == prop.kind
        if isinstance(prop, ErrorEquals):
            return env.value("error") == prop.text
        if isinstance(prop, PatternEquals):
            bindings = {k: v for k, (v, _) in env.vars.items()}
            subject = subst_expr(prop.subject, bindings, strict=True)
            if isinstance(subject, list):
                raise MatchError("cannot pattern-match an argument list")
            new = {}
            got = None
            from .kernel import match_expr
            got = match_expr(prop.pattern, subject, new)
            if got is None:
                return False
            for k, v in got.items():
                if not env.has(k):
                    env.bind(k, v, "pattern")
            return True
        raise MatchError(f"bad prop {prop!r}")

    def _method_name(self, term: Expr, env: Environment) -> str:
        if isinstance(term, Var):
            return term.name
        if isinstance(term, MetaVar):
            v = env.value(term.name)
            if isinstance(v, Var):
                return v.name
            raise MatchError(f"?{term.name} does not name a method")
        raise MatchError(f"bad method term {term!r}")

    # -- evaluation -------------------------------------------------------------

    def eval_dtac(self, env: Environment, prog: Program, t,
                  pending_inst=None, guards=(), label: Optional[str] = None,
                  stack: tuple = (), search: Optional[_Search] = None,
                  ) -> Iterator[EvalOutcome]:
        search = search if search is not None else _Search()
        if isinstance(t, When):
            yield from self.eval_dtac(env, prog, t.inner, pending_inst,
                                      guards + (t.prop,), label, stack, search)
            return
        if isinstance(t, Seq):
            for o1 in self.eval_dtac(env, prog, t.first, pending_inst, guards,
                                     label, stack, search):
                for o2 in self.eval_dtac(o1.env, o1.program, t.second, None,
                                         (), label, stack, search):
                    yield EvalOutcome(o2.env, o2.program, o1.trace + o2.trace)
            return
        if isinstance(t, Or):
            yield from self.eval_dtac(env, prog, t.left, pending_inst, guards,
                                      label, stack, search)
            yield from self.eval_dtac(env, prog, t.right, pending_inst, guards,
                                      label, stack, search)
            return
        if isinstance(t, Call):
            try:
                body = self.unfold(t, env, stack)
            except (MatchError, EnvError, PositionError) as e:
                search.note(f"{t.name}: argument instantiation failed: {e}")
                return
            pending = _merge_inst(pending_inst, t.inst)
            yield from self.eval_dtac(env, prog, body, pending, guards,
                                      t.name, stack + (t.name,), search)
            return
        if isinstance(t, (Rule, MatchT)):
            yield from self._eval_primitive(env, prog, t, pending_inst, guards,
                                            label, search)
            return
        raise EngineFailure(f"cannot evaluate {t!r}")

    def _eval_primitive(self, env, prog, t, pending_inst, guards, label,
                        search) -> Iterator[EvalOutcome]:
        name = label or ("<rule>" if isinstance(t, Rule) else "<match>")
        own = t.inst
        try:
            own_env, own_allowed = self._instantiate(own, env, prog)
            pend_env, pend_allowed = self._instantiate(pending_inst, env, prog)
        except (MatchError, EnvError, PositionError) as e:
            search.note(f"{name}: instantiation failed: {e}")
            return
        base = flush(env).merged_with(pend_env).merged_with(own_env)
        pat = t.lhs if isinstance(t, Rule) else t.pat
        try:
            matches = pmatch(base, prog, pat)
        except MatchError as e:
            search.note(f"{name}: malformed pattern: {e}")
            return
        if not matches:
            search.note(f"{name}: no match site")
            return
        admitted = 0
        for m in matches:
            ok = True
            for allowed in (own_allowed, pend_allowed):
                if allowed is not None and not any(
                        admits(prog, a, m.site) for a in allowed):
                    ok = False
                    break
            if not ok:
                continue
            try:
                if not all(self.prop_holds(m.env, prog, g) for g in guards):
                    search.note(f"{name}: condition failed at {m.site}")
                    continue
            except MatchError as e:
                search.note(f"{name}: condition error: {e}")
                continue
            admitted += 1
            if isinstance(t, MatchT):
                env2 = m.env.copy()
                _rebind_positions(env2)
                yield EvalOutcome(env2, prog,
                                  [TraceStep(name, m.site, "match")])
            else:
                try:
                    applied = apply_match(prog, t.rhs, m)
                except MatchError as e:
                    search.note(f"{name}: application failed at {m.site}: {e}")
                    continue
                env2 = m.env.copy()
                _update_positions(env2, m.site, applied)
                yield EvalOutcome(env2, applied.program,
                                  [TraceStep(name, m.site, "rewrite")])
        if not admitted:
            search.note(f"{name}: no admissible site "
                        f"({len(matches)} match(es) filtered out)")

    # -- top level ---------------------------------------------------------------

    def run_dtac(self, prog: Program, t, oracle, max_outcomes: int = 2000,
                 ) -> RunResult:
        """Evaluate under each verifier report in turn; accept the first
        outcome that typechecks and passes the refactoring guard."""
        from .typecheck import typecheck

        search = _Search()
        reports = list(oracle.get_errors(prog)) if oracle is not None else []
        candidates = reports if reports else [Environment()]
        tried = 0
        for env0 in candidates:
            try:
                outcomes = self.eval_dtac(env0, prog, t, search=search)
                for outcome in outcomes:
                    tried += 1
                    if tried > max_outcomes:
                        raise EngineFailure(
                            f"search exhausted after {max_outcomes} candidate "
                            "outcomes", search.notes)
                    errors = typecheck(outcome.program)
                    if errors:
                        search.note("typecheck rejected: "
                                    + "; ".join(str(e) for e in errors[:3]))
                        continue
                    guard = check_guard(prog, outcome.program)
                    if not guard.ok:
                        search.note("guard rejected: "
                                    + "; ".join(str(v) for v in guard.violations[:3]))
                        continue
                    return RunResult(outcome.program, outcome.env,
                                     outcome.trace, guard, env0)
            except EngineFailure:
                raise
        raise EngineFailure("no acceptable transformation found", search.notes)


def _rebind_positions(env: Environment):
    """app phase: @pos, @start, @end := @m, @s, @e."""
    for dst, src in (("pos", "m"), ("start", "s"), ("end", "e")):
        p = env.pos(src)
        if p is not None:
            env.bind_pos(dst, p, AUTO)


def _update_positions(env: Environment, site, applied):
    """Map every held position through the edits; @m/@s/@e cover the
    freshly inserted material, then @pos/@start/@end are rebound from them."""
    from .positions import AbsolutePosition, at as pos_at, before as pos_before

    for name, (p, origin) in list(env.positions.items()):
        env.positions[name] = (applied.adjust(p), origin)
    if isinstance(site, AbsolutePosition):
        lo = site.start()
        if applied.replaced_len > 0:
            new_m = pos_at(site.method, site.path, lo, applied.replaced_len)
        else:
            new_m = pos_before(site.method, site.path, lo)
        env.bind_pos("m", applied.adjust_new(new_m), AUTO)
        env.bind_pos("s", applied.adjust_new(
            pos_before(site.method, site.path, lo)), AUTO)
        env.bind_pos("e", applied.adjust_new(pos_before(
            site.method, site.path, lo + applied.replaced_len)), AUTO)
    _rebind_positions(env)


def _merge_inst(outer, inner):
    if outer is None:
        return inner
    if inner is None:
        return outer
    return list(outer) + list(inner)


# ---------------------------------------------------------------------------
# Formal-parameter substitution into tactic bodies


def _sf1(e, mapping: dict):
    v = _subst_formals_expr(e, mapping)
    if isinstance(v, list):
        raise MatchError("argument list used as a single code fragment")
    return v


def _subst_formals_expr(e, mapping: dict):
    from .nodes import (
        App, Bin, BoolLit, EllipsisExpr, FieldAccess, IntLit, Len, MatchCase,
        MatchExpr, NullLit, Quant, RewriteCall, SeqLit, Not,
    )
    if isinstance(e, Var):
        if e.name in mapping:
            v = mapping[e.name]
            if isinstance(v, RuleArg):
                raise MatchError(f"rule argument {e.name} used as code")
            return v
        return e
    if isinstance(e, MetaVar):
        if e.name in mapping:
            v = mapping[e.name]
            if isinstance(v, RuleArg):
                raise MatchError(f"rule argument ?{e.name} used as code")
            return v
        return e
    if isinstance(e, (IntLit, BoolLit, NullLit, EllipsisExpr)):
        return e
    if isinstance(e, Bin):
        return Bin(e.op, _sf1(e.left, mapping), _sf1(e.right, mapping))
    if isinstance(e, Not):
        return Not(_sf1(e.operand, mapping))
    if isinstance(e, Len):
        return Len(_sf1(e.operand, mapping))
    if isinstance(e, SeqLit):
        return SeqLit(tuple(_sf1(x, mapping) for x in e.elems))
    if isinstance(e, App):
        func = e.func
        key = func[1:] if func.startswith("?") else func
        if key in mapping:
            v = mapping[key]
            if isinstance(v, Var):
                func = v.name
            elif isinstance(v, MetaVar):
                func = "?" + v.name
            else:
                raise MatchError(f"argument {key} cannot name a callee")
        args = []
        for x in e.args:
            v = _subst_formals_expr(x, mapping)
            if isinstance(v, list):
                args.extend(v)
            else:
                args.append(v)
        return App(func, tuple(args))
    if isinstance(e, FieldAccess):
        return FieldAccess(_sf1(e.base, mapping), e.name)
    if isinstance(e, Quant):
        bound = []
        for n, ty in e.bound:
            key = n[1:] if n.startswith("?") else n
            if key in mapping and isinstance(mapping[key], (Var, MetaVar)):
                v = mapping[key]
                bound.append((v.name if isinstance(v, Var) else "?" + v.name, ty))
            else:
                bound.append((n, ty))
        return Quant(e.kind, tuple(bound), _sf1(e.body, mapping))
    if isinstance(e, MatchExpr):
        return MatchExpr(
            _sf1(e.scrutinee, mapping),
            tuple(MatchCase(c.ctor, c.binders, _sf1(c.body, mapping))
                  for c in e.cases))
    if isinstance(e, RewriteCall):
        if e.mode == "rule" and not e.rhs:
            head = e.lhs[0]
            key = None
            if isinstance(head, (Var, MetaVar)):
                key = head.name
            if key is not None and key in mapping and isinstance(mapping[key], RuleArg):
                ra = mapping[key]
                return RewriteCall("rule", (ra.lhs,), (ra.rhs,),
                                   _sf1(e.subject, mapping))
        return RewriteCall(
            e.mode,
            tuple(_sf1(x, mapping) for x in e.lhs),
            tuple(_sf1(x, mapping) for x in e.rhs),
            _sf1(e.subject, mapping))
    raise MatchError(f"cannot substitute into {e!r}")


def _subst_formals_stmt(s, mapping: dict):
    from .nodes import AssertS, AssignS, CallS, IfS, MarkerS, VarDeclS
    from .tactic_ast import EllipsisStmts
    if isinstance(s, (MarkerS, EllipsisStmts)):
        return s
    if isinstance(s, AssertS):
        return AssertS(_sf1(s.expr, mapping))
    if isinstance(s, AssignS):
        return AssignS(_sf1(s.lhs, mapping), _sf1(s.rhs, mapping))
    if isinstance(s, CallS):
        func = s.func
        key = func[1:] if func.startswith("?") else func
        if key in mapping:
            v = mapping[key]
            if isinstance(v, Var):
                func = v.name
            elif isinstance(v, MetaVar):
                func = "?" + v.name
            else:
                raise MatchError(f"argument {key} cannot name a callee")
        args = []
        for a in s.args:
            v = _subst_formals_expr(a, mapping)
            if isinstance(v, list):
                args.extend(v)
            else:
                args.append(v)
        return CallS(func, tuple(args))
    if isinstance(s, VarDeclS):
        names = []
        for n in s.names:
            key = n[1:] if n.startswith("?") else n
            if key in mapping and isinstance(mapping[key], (Var, MetaVar)):
                v = mapping[key]
                names.append(v.name if isinstance(v, Var) else "?" + v.name)
            else:
                names.append(n)
        init = None if s.init is None else _sf1(s.init, mapping)
        such = None if s.such_that is None else _sf1(s.such_that, mapping)
        return VarDeclS(names, s.type, init, such, s.is_ghost)
    if isinstance(s, IfS):
        return IfS(_sf1(s.cond, mapping),
                   [_subst_formals_stmt(x, mapping) for x in s.then],
                   [_subst_formals_stmt(x, mapping) for x in s.els])
    raise MatchError(f"cannot substitute into statement {s!r}")


def _subst_formals_pat(pat, mapping: dict):
    if isinstance(pat, InsertionPat):
        return pat
    if isinstance(pat, StmtSeqPat):
        return StmtSeqPat([_subst_formals_stmt(s, mapping) for s in pat.items])
    if isinstance(pat, MethodPat):
        name = pat.name
        key = name[1:] if name.startswith("?") else name
        if key in mapping and isinstance(mapping[key], (Var, MetaVar)):
            v = mapping[key]
            name = v.name if isinstance(v, Var) else "?" + v.name
        return MethodPat(
            name, pat.params,
            [_sf1(e, mapping) for e in pat.requires_pats],
            [_sf1(e, mapping) for e in pat.ensures_pats],
            pat.contract_ellipsis,
            None if pat.body is None
            else [_subst_formals_stmt(s, mapping) for s in pat.body],
            pat.is_ghost)
    if isinstance(pat, DeclSeqPat):
        return DeclSeqPat([_subst_formals_pat(m, mapping) for m in pat.items])
    raise MatchError(f"cannot substitute into pattern {pat!r}")


def _subst_formals_inst(inst, mapping: dict):
    if inst is None:
        return None
    out = []
    for item in inst:
        if isinstance(item, BindItem):
            out.append(BindItem(item.name,
                                _subst_formals_expr(item.value, mapping)))
        else:
            out.append(item)
    return out


def _subst_formals_prop(p, mapping: dict):
    if isinstance(p, NotProp):
        return NotProp(_subst_formals_prop(p.inner, mapping))
    if isinstance(p, IsProp):
        return IsProp(_subst_formals_expr(p.term, mapping), p.kind)
    if isinstance(p, ErrorEquals):
        return p
    if isinstance(p, PatternEquals):
        return PatternEquals(_subst_formals_expr(p.subject, mapping),
                             _subst_formals_expr(p.pattern, mapping))
    raise MatchError(f"bad prop {p!r}")


def _subst_formals_body(body, mapping: dict):
    if not mapping:
        return body
    if isinstance(body, When):
        return When(_subst_formals_prop(body.prop, mapping),
                    _subst_formals_body(body.inner, mapping))
    if isinstance(body, Seq):
        return Seq(_subst_formals_body(body.first, mapping),
                   _subst_formals_body(body.second, mapping))
    if isinstance(body, Or):
        return Or(_subst_formals_body(body.left, mapping),
                  _subst_formals_body(body.right, mapping))
    if isinstance(body, Rule):
        return Rule(_subst_formals_pat(body.lhs, mapping),
                    _subst_formals_pat(body.rhs, mapping),
                    _subst_formals_inst(body.inst, mapping))
    if isinstance(body, MatchT):
        return MatchT(_subst_formals_pat(body.pat, mapping),
                      _subst_formals_inst(body.inst, mapping))
    if isinstance(body, Call):
        args = []
        for a in body.args:
            if isinstance(a, RuleArg):
                args.append(RuleArg(_subst_formals_expr(a.lhs, mapping),
                                    _subst_formals_expr(a.rhs, mapping)))
            else:
                v = _subst_formals_expr(a, mapping)
                args.append(v)
        return Call(body.name, args, _subst_formals_inst(body.inst, mapping))
    raise MatchError(f"cannot substitute into {body!r}")

"""Matching, substitution, rewriting and rule application.

pmatch enumerates match sites in document order; every result carries the
extended environment, the site, and the ellipsis captures needed to build the
rule's replacement.  The rewrite function implements the three overloads of
the embedded rewrite operator; apply_rule performs the actual surgery,
consuming placeholder markers and re-anchoring duplicated anchor names.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .env import AUTO, Environment, INST, PATTERN, values_equal
from .nodes import (
    App, AssertS, AssignS, Bin, BoolLit, CallS, EllipsisExpr, Expr,
    FieldAccess, IfS, IntLit, Len, MarkerS, MatchCase, MatchExpr, MetaVar,
    MethodDecl, NullLit, Not, Program, Quant, RewriteCall, SeqLit, Stmt, Var,
    VarDeclS, block_at, copy_program, copy_stmt, renumber, walk_blocks,
)
from .positions import AbsolutePosition, DeclPos, at as pos_at, before as pos_before
from .tactic_ast import (
    DeclSeqPat, EllipsisStmts, InsertionPat, MethodPat, RuleArg, StmtSeqPat,
)


class MatchError(Exception):
    """Malformed pattern or unbound variable; distinct from a failed match."""


class RewriteDivergence(MatchError):
    pass


REWRITE_STEP_LIMIT = 10_000


# ---------------------------------------------------------------------------
# Expression matching


def match_expr(pat: Expr, target: Expr, bindings: dict) -> Optional[dict]:
    """Syntactic one-way matching; returns extended bindings or None."""
    if isinstance(pat, MetaVar):
        return _bind(bindings, pat.name, target)
    if isinstance(pat, EllipsisExpr):
        return bindings
    if isinstance(pat, Var):
        return bindings if pat == target else None
    if isinstance(pat, (IntLit, BoolLit, NullLit)):
        return bindings if pat == target else None
    if isinstance(pat, Bin):
        if not (isinstance(target, Bin) and target.op == pat.op):
            return None
        b = match_expr(pat.left, target.left, bindings)
        if b is None:
            return None
        return match_expr(pat.right, target.right, b)
    if isinstance(pat, Not):
        if not isinstance(target, Not):
            return None
        return match_expr(pat.operand, target.operand, bindings)
    if isinstance(pat, Len):
        if not isinstance(target, Len):
            return None
        return match_expr(pat.operand, target.operand, bindings)
    if isinstance(pat, SeqLit):
        if not (isinstance(target, SeqLit) and len(target.elems) == len(pat.elems)):
            return None
        b = bindings
        for p, t in zip(pat.elems, target.elems):
            b = match_expr(p, t, b)
            if b is None:
                return None
        return b
    if isinstance(pat, App):
        if not isinstance(target, App):
            return None
        b = bindings
        if pat.func.startswith("?"):
            b = _bind(b, pat.func[1:], Var(target.func))
            if b is None:
                return None
        elif pat.func != target.func:
            return None
        if len(pat.args) == 1 and isinstance(pat.args[0], MetaVar):
            return _bind(b, pat.args[0].name, list(target.args))
        if len(pat.args) != len(target.args):
            return None
        for p, t in zip(pat.args, target.args):
            b = match_expr(p, t, b)
            if b is None:
                return None
        return b
    if isinstance(pat, FieldAccess):
        if not (isinstance(target, FieldAccess) and target.name == pat.name):
            return None
        return match_expr(pat.base, target.base, bindings)
    if isinstance(pat, Quant):
        if not (isinstance(target, Quant) and target.kind == pat.kind
                and len(target.bound) == len(pat.bound)):
            return None
        b = bindings
        for (pn, _pt), (tn, _tt) in zip(pat.bound, target.bound):
            if pn.startswith("?"):
                b = _bind(b, pn[1:], Var(tn))
                if b is None:
                    return None
            elif pn != tn:
                return None
        return match_expr(pat.body, target.body, b)
    if isinstance(pat, MatchExpr):
        if not (isinstance(target, MatchExpr)
                and len(target.cases) == len(pat.cases)):
            return None
        b = match_expr(pat.scrutinee, target.scrutinee, bindings)
        if b is None:
            return None
        for pc, tc in zip(pat.cases, target.cases):
            if pc.ctor != tc.ctor or pc.binders != tc.binders:
                return None
            b = match_expr(pc.body, tc.body, b)
            if b is None:
                return None
        return b
    if isinstance(pat, RewriteCall):
        raise MatchError("rewrite(..) cannot appear on a matching side")
    raise MatchError(f"unsupported pattern node {pat!r}")


def _bind(bindings: dict, name: str, value) -> Optional[dict]:
    if name in bindings:
        return bindings if values_equal(bindings[name], value) else None
    out = dict(bindings)
    out[name] = value
    return out


# ---------------------------------------------------------------------------
# Substitution (pattern instantiation)


def subst_expr(e: Expr, bindings: dict, strict: bool = True,
               allow_list: bool = True) -> Expr:
    """Replace metavariables by their bound fragments; execute rewrites.

    With strict=False unbound metavariables are left in place (used when
    instantiating tactic arguments before the pattern has matched).  A
    metavariable holding an argument list may only appear where the caller
    can splice it (allow_list).
    """
    def sub1(x):
        return subst_expr(x, bindings, strict, allow_list=False)

    if isinstance(e, MetaVar):
        if e.name in bindings:
            v = bindings[e.name]
            if isinstance(v, str):
                raise MatchError(f"?{e.name} holds an error string, not code")
            if isinstance(v, RuleArg):
                raise MatchError(f"?{e.name} holds a rewrite rule, not code")
            if isinstance(v, list):
                if not allow_list:
                    raise MatchError(
                        f"?{e.name} holds an argument list, not a single fragment")
                return v  # spliced by the caller in argument positions
            return v
        if strict:
            raise MatchError(f"unbound metavariable ?{e.name}")
        return e
    if isinstance(e, (Var, IntLit, BoolLit, NullLit, EllipsisExpr)):
        return e
    if isinstance(e, Bin):
        return Bin(e.op, sub1(e.left), sub1(e.right))
    if isinstance(e, Not):
        return Not(sub1(e.operand))
    if isinstance(e, Len):
        return Len(sub1(e.operand))
    if isinstance(e, SeqLit):
        return SeqLit(tuple(sub1(x) for x in e.elems))
    if isinstance(e, App):
        func = e.func
        if func.startswith("?"):
            name = func[1:]
            if name in bindings:
                v = bindings[name]
                if not isinstance(v, Var):
                    raise MatchError(f"?{name} does not name a callee")
                func = v.name
            elif strict:
                raise MatchError(f"unbound metavariable ?{name}")
        args: list[Expr] = []
        for a in e.args:
            v = subst_expr(a, bindings, strict, allow_list=True)
            if isinstance(v, list):
                args.extend(v)
            else:
                args.append(v)
        return App(func, tuple(args))
    if isinstance(e, FieldAccess):
        return FieldAccess(sub1(e.base), e.name)
    if isinstance(e, Quant):
        bound = []
        for n, t in e.bound:
            if n.startswith("?") and n[1:] in bindings:
                v = bindings[n[1:]]
                if not isinstance(v, Var):
                    raise MatchError(f"?{n[1:]} does not name a binder")
                bound.append((v.name, t))
            elif n.startswith("?") and strict:
                raise MatchError(f"unbound metavariable {n}")
            else:
                bound.append((n, t))
        return Quant(e.kind, tuple(bound), sub1(e.body))
    if isinstance(e, MatchExpr):
        return MatchExpr(
            sub1(e.scrutinee),
            tuple(MatchCase(c.ctor, c.binders, sub1(c.body))
                  for c in e.cases))
    if isinstance(e, RewriteCall):
        return _eval_rewrite_call(e, bindings, strict)
    raise MatchError(f"cannot instantiate {e!r}")


def _eval_rewrite_call(e: RewriteCall, bindings: dict, strict: bool):
    subject = subst_expr(e.subject, bindings, strict)
    if e.mode == "rule" and not e.rhs:
        # rewrite(R, c): R must resolve to a rule argument
        head = e.lhs[0]
        if isinstance(head, MetaVar) and head.name in bindings:
            v = bindings[head.name]
            if isinstance(v, RuleArg):
                return _run_or_defer(RewriteCall("rule", (v.lhs,), (v.rhs,), subject),
                                     bindings, strict)
            raise MatchError(f"?{head.name} is not a rewrite rule")
        if strict:
            raise MatchError("rewrite rule argument is unbound")
        return RewriteCall(e.mode, e.lhs, e.rhs, subject)
    lhs = []
    rhs = []
    defer = False
    for side, parts in (("lhs", e.lhs), ("rhs", e.rhs)):
        for x in parts:
            if e.mode == "rule":
                # rule-local metavariables stay symbolic inside the rule
                y = subst_expr(x, bindings, strict=False)
            else:
                try:
                    y = subst_expr(x, bindings, strict=strict)
                except MatchError:
                    raise
                if not strict and _has_metavars(y):
                    defer = True
            (lhs if side == "lhs" else rhs).append(y)
    call = RewriteCall(e.mode, tuple(lhs), tuple(rhs), subject)
    if defer or (not strict and _has_metavars(subject)):
        return call
    return _run_or_defer(call, bindings, strict)


def _run_or_defer(call: RewriteCall, bindings: dict, strict: bool):
    if not strict and (_has_metavars(call.subject)
                       or (call.mode != "rule"
                           and any(_has_metavars(x) for x in call.lhs + call.rhs))):
        return call
    if call.mode == "rule":
        return rewrite_rule(call.lhs[0], call.rhs[0], call.subject, exhaustive=False)
    if call.mode == "pair":
        l0, r0 = call.lhs[0], call.rhs[0]
        if isinstance(l0, list) or isinstance(r0, list):
            # bound argument lists turn the pair form into the pairwise form
            if not (isinstance(l0, list) and isinstance(r0, list)
                    and len(l0) == len(r0)):
                raise MatchError("pairwise rewrite needs equal-length lists")
            out = call.subject
            for l, r in zip(l0, r0):
                out = rewrite_pair(l, r, out)
            return out
        return rewrite_pair(l0, r0, call.subject)
    pairs = list(zip(call.lhs, call.rhs))
    out = call.subject
    for l, r in pairs:
        out = rewrite_pair(l, r, out)
    return out


def _has_metavars(e: Expr) -> bool:
    from .nodes import expr_metavars
    return bool(expr_metavars(e))


# ---------------------------------------------------------------------------
# The rewrite operator (three overloads)


def _subterms_replaced(e: Expr, fn) -> Optional[Expr]:
    """Apply fn at the leftmost-outermost subterm where it succeeds."""
    done = fn(e)
    if done is not None:
        return done
    if isinstance(e, Bin):
        left = _subterms_replaced(e.left, fn)
        if left is not None:
            return Bin(e.op, left, e.right)
        right = _subterms_replaced(e.right, fn)
        if right is not None:
            return Bin(e.op, e.left, right)
        return None
    if isinstance(e, Not):
        inner = _subterms_replaced(e.operand, fn)
        return None if inner is None else Not(inner)
    if isinstance(e, Len):
        inner = _subterms_replaced(e.operand, fn)
        return None if inner is None else Len(inner)
    if isinstance(e, SeqLit):
        for i, x in enumerate(e.elems):
            inner = _subterms_replaced(x, fn)
            if inner is not None:
                elems = list(e.elems)
                elems[i] = inner
                return SeqLit(tuple(elems))
        return None
    if isinstance(e, App):
        for i, x in enumerate(e.args):
            inner = _subterms_replaced(x, fn)
            if inner is not None:
                args = list(e.args)
                args[i] = inner
                return App(e.func, tuple(args))
        return None
    if isinstance(e, FieldAccess):
        inner = _subterms_replaced(e.base, fn)
        return None if inner is None else FieldAccess(inner, e.name)
    if isinstance(e, Quant):
        inner = _subterms_replaced(e.body, fn)
        return None if inner is None else Quant(e.kind, e.bound, inner)
    if isinstance(e, MatchExpr):
        inner = _subterms_replaced(e.scrutinee, fn)
        if inner is not None:
            return MatchExpr(inner, e.cases)
        for i, c in enumerate(e.cases):
            body = _subterms_replaced(c.body, fn)
            if body is not None:
                cases = list(e.cases)
                cases[i] = MatchCase(c.ctor, c.binders, body)
                return MatchExpr(e.scrutinee, tuple(cases))
        return None
    return None


def rewrite_rule(lhs: Expr, rhs: Expr, subject: Expr, exhaustive: bool = True,
                 limit: int = REWRITE_STEP_LIMIT) -> Expr:
    """Single rewrite rule l =>> r, leftmost-outermost.

    Exhaustive mode keeps rewriting until no subterm matches, bounded by
    limit; single mode applies the first match once.
    """
    def step(e: Expr) -> Optional[Expr]:
        def try_at(sub: Expr) -> Optional[Expr]:
            b = match_expr(lhs, sub, {})
            if b is None:
                return None
            return subst_expr(rhs, b, strict=True)
        return _subterms_replaced(e, try_at)

    out = step(subject)
    if out is None:
        return subject
    if not exhaustive:
        return out
    steps = 1
    while True:
        nxt = step(out)
        if nxt is None:
            return out
        out = nxt
        steps += 1
        if steps > limit:
            raise RewriteDivergence(
                f"rewriting diverged after {limit} steps")


def rewrite_pair(l: Expr, r: Expr, subject: Expr) -> Expr:
    """Replace every occurrence of the literal fragment l by r."""
    def go(e: Expr) -> Expr:
        if e == l:
            return r
        if isinstance(e, Bin):
            return Bin(e.op, go(e.left), go(e.right))
        if isinstance(e, Not):
            return Not(go(e.operand))
        if isinstance(e, Len):
            return Len(go(e.operand))
        if isinstance(e, SeqLit):
            return SeqLit(tuple(go(x) for x in e.elems))
        if isinstance(e, App):
            return App(e.func, tuple(go(x) for x in e.args))
        if isinstance(e, FieldAccess):
            return FieldAccess(go(e.base), e.name)
        if isinstance(e, Quant):
            return Quant(e.kind, e.bound, go(e.body))
        if isinstance(e, MatchExpr):
            return MatchExpr(go(e.scrutinee),
                             tuple(MatchCase(c.ctor, c.binders, go(c.body))
                                   for c in e.cases))
        return e
    return go(subject)


def rewrite(form, subject: Expr, exhaustive: bool = True,
            limit: int = REWRITE_STEP_LIMIT) -> Expr:
    """Public kernel entry: form is RuleArg, (l, r) pair, or list of pairs."""
    if isinstance(form, RuleArg):
        return rewrite_rule(form.lhs, form.rhs, subject, exhaustive=exhaustive,
                            limit=limit)
    if isinstance(form, tuple) and len(form) == 2:
        return rewrite_pair(form[0], form[1], subject)
    if isinstance(form, list):
        out = subject
        for l, r in form:
            out = rewrite_pair(l, r, out)
        return out
    raise MatchError(f"bad rewrite form {form!r}")


# ---------------------------------------------------------------------------
# pmatch


@dataclass
class MatchResult:
    env: Environment
    site: object  # AbsolutePosition | DeclPos
    decl_index: int
    # statement-level extras
    stmt_runs: list = field(default_factory=list)   # captured ellipsis runs
    # method-level extras
    method: Optional[MethodDecl] = None
    params_capture: Optional[list] = None
    req_rest: Optional[list] = None
    ens_rest: Optional[list] = None
    body_runs: Optional[list] = None
    body_span: Optional[tuple] = None


def _auto_env(base: Environment, bindings: dict, m: MethodDecl,
              site, s_pos, e_pos) -> Optional[Environment]:
    """Extend base with pattern bindings plus the contextual auto-bindings."""
    env = base.copy()
    for k, v in bindings.items():
        if base.has(k):
            continue  # pre-bound; equality was enforced during matching
        env.bind(k, v, PATTERN)
    auto = {
        "meth": Var(m.name),
        "pre": list(m.requires),
        "post": list(m.ensures),
    }
    if m.params:
        auto["arg"] = Var(m.params[0][0])
    for k, v in auto.items():
        entry = base.vars.get(k)
        if entry is not None and entry[1] == INST:
            # a deliberately carried binding pins the pattern to its method
            if not values_equal(entry[0], v):
                return None
            continue
        env.bind(k, v, AUTO)
    env.bind_pos("m", site, AUTO)
    if s_pos is not None:
        env.bind_pos("s", s_pos, AUTO)
    if e_pos is not None:
        env.bind_pos("e", e_pos, AUTO)
    return env


def _initial_bindings(env: Environment) -> dict:
    return {k: v for k, (v, _) in env.vars.items()}


def _match_stmt_pat(pat: Stmt, target: Stmt, bindings: dict) -> Optional[dict]:
    """Match one fixed statement pattern against one real statement."""
    if isinstance(pat, MarkerS):
        return bindings if isinstance(target, MarkerS) and target.name == pat.name else None
    if isinstance(pat, AssertS):
        if not isinstance(target, AssertS):
            return None
        return match_expr(pat.expr, target.expr, bindings)
    if isinstance(pat, CallS):
        head, args, outs = _call_payload(target)
        if head is None:
            return None
        b = bindings
        if pat.func.startswith("?"):
            b = _bind(b, pat.func[1:], Var(head))
            if b is None:
                return None
        elif pat.func != head:
            return None
        if len(pat.args) == 1 and isinstance(pat.args[0], MetaVar):
            return _bind(b, pat.args[0].name, list(args) + list(outs))
        if len(pat.args) != len(args):
            return None
        for p, t in zip(pat.args, args):
            b = match_expr(p, t, b)
            if b is None:
                return None
        return b
    if isinstance(pat, AssignS):
        lhs_t, rhs_t = _assign_payload(target)
        if lhs_t is None:
            return None
        b = match_expr(pat.lhs, lhs_t, bindings)
        if b is None:
            return None
        return match_expr(pat.rhs, rhs_t, b)
    if isinstance(pat, VarDeclS):
        if not isinstance(target, VarDeclS):
            return None
        if len(pat.names) != len(target.names):
            return None
        b = bindings
        for pn, tn in zip(pat.names, target.names):
            if pn.startswith("?"):
                b = _bind(b, pn[1:], Var(tn))
                if b is None:
                    return None
            elif pn != tn:
                return None
        for pe, te in ((pat.init, target.init), (pat.such_that, target.such_that)):
            if (pe is None) != (te is None):
                return None
            if pe is not None:
                b = match_expr(pe, te, b)
                if b is None:
                    return None
        return b
    if isinstance(pat, IfS):
        if not isinstance(target, IfS):
            return None
        b = match_expr(pat.cond, target.cond, bindings)
        if b is None:
            return None
        return b  # branch blocks are handled by the sequence matcher
    raise MatchError(f"unsupported statement pattern {pat!r}")


def _call_payload(s: Stmt):
    """(head, args, out_binders) of a call-shaped statement, else (None,..)."""
    if isinstance(s, CallS):
        return s.func, list(s.args), []
    if isinstance(s, VarDeclS) and isinstance(s.init, App):
        return s.init.func, list(s.init.args), [Var(n) for n in s.names]
    if isinstance(s, AssignS) and isinstance(s.rhs, App):
        return s.rhs.func, list(s.rhs.args), [s.lhs]
    return None, None, None


def _assign_payload(s: Stmt):
    """(lhs, rhs) of a plain single assignment, else (None, None)."""
    if isinstance(s, AssignS) and not isinstance(s.rhs, App):
        return s.lhs, s.rhs
    if isinstance(s, VarDeclS) and len(s.names) == 1 and s.init is not None \
            and not isinstance(s.init, App):
        return Var(s.names[0]), s.init
    if isinstance(s, AssignS) and isinstance(s.rhs, App):
        return s.lhs, s.rhs
    if isinstance(s, VarDeclS) and len(s.names) == 1 and isinstance(s.init, App):
        return Var(s.names[0]), s.init
    return None, None


def _match_block_exact(pats: list, block: list, bindings: dict,
                       runs_out: list) -> Optional[dict]:
    """Match a whole block (branch bodies): ellipses capture runs."""
    return _match_seq(pats, block, 0, len(block), bindings, runs_out,
                      anchored=True)


def _match_seq(pats: list, block: list, lo: int, hi: int, bindings: dict,
               runs_out: list, anchored: bool) -> Optional[dict]:
    """Match pattern items against block[lo:hi].

    Fixed items skip markers; ellipses capture runs verbatim (markers
    included).  anchored requires the whole range to be covered.
    """
    if not pats:
        if not anchored:
            return bindings
        if all(isinstance(s, MarkerS) for s in block[lo:hi]):
            return bindings
        return None
    head, rest = pats[0], pats[1:]
    if isinstance(head, EllipsisStmts):
        # try every split, shortest first
        saved_len = len(runs_out)
        for cut in range(lo, hi + 1):
            runs_out.append(block[lo:cut])
            b = _match_seq(rest, block, cut, hi, bindings, runs_out, anchored)
            if b is not None:
                return b
            del runs_out[saved_len:]
        return None
    # fixed item: skip leading markers
    j = lo
    while j < hi and isinstance(block[j], MarkerS) and not isinstance(head, MarkerS):
        j += 1
    if j >= hi:
        return None
    target = block[j]
    b = _match_stmt_pat(head, target, bindings)
    if b is None:
        return None
    if isinstance(head, IfS):
        assert isinstance(target, IfS)
        b = _match_block_exact(head.then, target.then, b, runs_out)
        if b is None:
            return None
        b = _match_block_exact(head.els, target.els, b, runs_out)
        if b is None:
            return None
    return _match_seq(rest, block, j + 1, hi, b, runs_out, anchored)


def _count_fixed(pats: list) -> int:
    return sum(0 if isinstance(p, EllipsisStmts) else 1 for p in pats)


def pmatch(env: Environment, prog: Program, pat) -> list[MatchResult]:
    """All matches of a code pattern, ordered by document position."""
    results: list[MatchResult] = []
    base_bindings = _initial_bindings(env)

    if isinstance(pat, InsertionPat):
        for di, d in enumerate(prog.decls):
            if not isinstance(d, MethodDecl) or d.body is None:
                continue
            for path, blk in walk_blocks(d.body):
                for k in range(len(blk) + 1):
                    site = pos_before(d.name, path, k)
                    env2 = _auto_env(env, {}, d, site, site, site)
                    if env2 is not None:
                        results.append(MatchResult(env2, site, di))
        return _order(results)

    if isinstance(pat, StmtSeqPat):
        # a trailing marker is only part of the window when the pattern
        # explicitly asks for one
        wants_trailing_marker = bool(pat.items) and isinstance(pat.items[-1], MarkerS)
        starts_with_marker = bool(pat.items) and isinstance(pat.items[0], MarkerS)
        for di, d in enumerate(prog.decls):
            if not isinstance(d, MethodDecl) or d.body is None:
                continue
            for path, blk in walk_blocks(d.body):
                n = len(blk)
                for start in range(n + 1):
                    if (start < n and isinstance(blk[start], MarkerS)
                            and not starts_with_marker):
                        continue  # windows begin at real statements
                    for stop in range(start, n + 1):
                        if (start < stop and isinstance(blk[stop - 1], MarkerS)
                                and not wants_trailing_marker):
                            continue  # canonical window: no trailing marker
                        runs: list = []
                        b = _match_seq(list(pat.items), blk, start, stop,
                                       dict(base_bindings), runs, anchored=True)
                        if b is None:
                            continue
                        span = pos_at(d.name, path, start, stop - start)
                        s_pos = pos_before(d.name, path, start)
                        e_pos = pos_before(d.name, path, stop)
                        env2 = _auto_env(env, b, d, span, s_pos, e_pos)
                        if env2 is not None:
                            results.append(
                                MatchResult(env2, span, di, stmt_runs=runs))
                        break  # smallest window at this start
        return _order(_dedup(results))

    if isinstance(pat, MethodPat):
        for di, d in enumerate(prog.decls):
            if not isinstance(d, MethodDecl):
                continue
            results.extend(_match_method(env, base_bindings, pat, d, di))
        return _dedup(results)

    if isinstance(pat, DeclSeqPat):
        raise MatchError("declaration sequences may only appear on a rule's rhs")
    raise MatchError(f"unsupported pattern {pat!r}")


def _match_method(env, base_bindings, pat: MethodPat, d: MethodDecl,
                  di: int) -> list[MatchResult]:
    if pat.is_ghost and not d.is_ghost:
        return []
    bindings = dict(base_bindings)
    if pat.name.startswith("?"):
        b = _bind(bindings, pat.name[1:], Var(d.name))
        if b is None:
            return []
        bindings = b
    elif pat.name != d.name:
        return []
    params_capture = None
    if pat.params == "ellipsis":
        params_capture = list(d.params)
    elif isinstance(pat.params, str):  # "?ys"
        formals = [Var(n) for n, _ in d.params] + [Var(n) for n, _ in d.returns]
        b = _bind(bindings, pat.params[1:], formals)
        if b is None:
            return []
        bindings = b
    else:
        if list(pat.params) != list(d.params):
            return []
        params_capture = list(d.params)

    # contract clause choices (nondeterministic per clause pattern)
    choices: list[tuple[dict, list, list]] = [(bindings, list(range(len(d.requires))),
                                               list(range(len(d.ensures))))]
    for rp in pat.requires_pats:
        nxt = []
        for b0, req_left, ens_left in choices:
            for idx in req_left:
                b1 = match_expr(rp, d.requires[idx], dict(b0))
                if b1 is not None:
                    nxt.append((b1, [i for i in req_left if i != idx], ens_left))
        choices = nxt
    for ep in pat.ensures_pats:
        nxt = []
        for b0, req_left, ens_left in choices:
            for idx in ens_left:
                b1 = match_expr(ep, d.ensures[idx], dict(b0))
                if b1 is not None:
                    nxt.append((b1, req_left, [i for i in ens_left if i != idx]))
        choices = nxt
    if not pat.contract_ellipsis and (pat.requires_pats or pat.ensures_pats):
        choices = [(b, rl, el) for b, rl, el in choices if not rl and not el]

    out = []
    site = DeclPos(d.name, di)
    if d.body is not None:
        s_pos = pos_before(d.name, (), 0)
        e_pos = pos_before(d.name, (), len(d.body))
    else:
        s_pos = e_pos = None
    for b, req_left, ens_left in choices:
        body_runs = None
        body_span = None
        cands = [(b, None, None)]
        if pat.body is not None:
            if d.body is None:
                continue
            runs: list = []
            b2 = _match_block_exact(list(pat.body), d.body, dict(b), runs)
            if b2 is None:
                continue
            cands = [(b2, runs, (0, len(d.body)))]
        for bf, body_runs, body_span in cands:
            env2 = _auto_env(env, bf, d, site, s_pos, e_pos)
            if env2 is None:
                continue
            out.append(MatchResult(
                env2, site, di,
                method=d,
                params_capture=params_capture,
                req_rest=[d.requires[i] for i in req_left],
                ens_rest=[d.ensures[i] for i in ens_left],
                body_runs=body_runs,
                body_span=body_span,
            ))
    return out


def _dedup(results: list[MatchResult]) -> list[MatchResult]:
    seen = set()
    out = []
    for r in results:
        key = (str(r.site), str(r.env))
        if key not in seen:
            seen.add(key)
            out.append(r)
    return out


def _order(results: list[MatchResult]) -> list[MatchResult]:
    def key(r: MatchResult):
        if isinstance(r.site, DeclPos):
            return (r.decl_index, (), 0, 0)
        return r.site.sort_key(r.decl_index)
    return sorted(results, key=key)


# ---------------------------------------------------------------------------
# Rule application


def _instantiate_stmts(items: list, bindings: dict, runs: list,
                       run_idx: list, fresh_markers: Optional[list] = None,
                       ) -> list[Stmt]:
    out: list[Stmt] = []
    for item in items:
        if isinstance(item, EllipsisStmts):
            if run_idx[0] >= len(runs):
                raise MatchError("rhs has more ellipses than the lhs captured")
            out.extend(copy_stmt(s) for s in runs[run_idx[0]])
            run_idx[0] += 1
            continue
        out.append(_instantiate_stmt(item, bindings, runs, run_idx, fresh_markers))
    return out


def _instantiate_stmt(s: Stmt, bindings: dict, runs: list, run_idx: list,
                      fresh_markers: Optional[list] = None) -> Stmt:
    if isinstance(s, MarkerS):
        made = MarkerS(s.name)
        if fresh_markers is not None:
            fresh_markers.append(made)
        return made
    if isinstance(s, AssertS):
        return AssertS(subst_expr(s.expr, bindings))
    if isinstance(s, CallS):
        func = s.func
        if func.startswith("?"):
            v = bindings.get(func[1:])
            if not isinstance(v, Var):
                raise MatchError(f"?{func[1:]} does not name a callee")
            func = v.name
        args: list[Expr] = []
        for a in s.args:
            v = subst_expr(a, bindings)
            if isinstance(v, list):
                args.extend(v)
            else:
                args.append(v)
        return CallS(func, tuple(args))
    if isinstance(s, AssignS):
        lhs = subst_expr(s.lhs, bindings)
        if isinstance(lhs, list):
            raise MatchError("assignment target is a list")
        return AssignS(lhs, subst_expr(s.rhs, bindings))
    if isinstance(s, VarDeclS):
        names = []
        for n in s.names:
            if n.startswith("?"):
                v = bindings.get(n[1:])
                if not isinstance(v, Var):
                    raise MatchError(f"?{n[1:]} does not name a variable")
                names.append(v.name)
            else:
                names.append(n)
        init = None if s.init is None else subst_expr(s.init, bindings)
        such = None if s.such_that is None else subst_expr(s.such_that, bindings)
        return VarDeclS(names, s.type, init, such, s.is_ghost)
    if isinstance(s, IfS):
        return IfS(subst_expr(s.cond, bindings),
                   _instantiate_stmts(s.then, bindings, runs, run_idx, fresh_markers),
                   _instantiate_stmts(s.els, bindings, runs, run_idx, fresh_markers))
    raise MatchError(f"cannot instantiate statement {s!r}")


def _remove_markers(prog: Program, names: set[str], keep_block) -> None:
    for d in prog.decls:
        if isinstance(d, MethodDecl) and d.body is not None:
            for _, blk in walk_blocks(d.body):
                if blk is keep_block:
                    continue
                blk[:] = [s for s in blk
                          if not (isinstance(s, MarkerS) and s.name in names)]


def _apply_edits(pos, edits):
    if not isinstance(pos, AbsolutePosition):
        return pos
    path = list(pos.path)
    index = pos.index
    for method, epath, threshold, delta in edits:
        if method != pos.method:
            continue
        if epath == tuple(path):
            if index >= threshold:
                index += delta
        elif len(epath) < len(path) and tuple(path[:len(epath)]) == epath:
            comp, branch = path[len(epath)]
            if comp >= threshold:
                path[len(epath)] = (comp + delta, branch)
    return AbsolutePosition(pos.method, tuple(path), index, pos.edge, pos.extent)


@dataclass
class Applied:
    """A transformed program plus the edits needed to re-map positions.

    replace_edits are in pre-replacement coordinates; removal_edits (consumed
    and re-anchored markers) are in post-replacement coordinates.
    """

    program: Program
    replaced_len: int
    replace_edits: list
    removal_edits: list

    def adjust(self, pos):
        return _apply_edits(_apply_edits(pos, self.replace_edits),
                            self.removal_edits)

    def adjust_new(self, pos):
        return _apply_edits(pos, self.removal_edits)


def apply_match(prog: Program, rhs, m: MatchResult) -> Applied:
    """Build the transformed program for one match of a rule's lhs."""
    new_prog = copy_program(prog)
    bindings = _initial_bindings(m.env)
    edits: list = []

    if isinstance(m.site, DeclPos):
        templates = rhs.items if isinstance(rhs, DeclSeqPat) else [rhs]
        if not all(isinstance(t, MethodPat) for t in templates):
            raise MatchError("method-level rule needs method templates on the rhs")
        old = new_prog.decls[m.site.index]
        assert isinstance(old, MethodDecl)
        new_decls = []
        fresh_markers: list = []
        for t in templates:
            new_decls.append(_build_method(t, old, m, bindings, fresh_markers))
        new_prog.decls[m.site.index:m.site.index + 1] = new_decls
        if fresh_markers:
            _strip_other_markers(new_prog, fresh_markers, edits)
        return Applied(renumber(new_prog), 0, [], edits)

    if not isinstance(rhs, (StmtSeqPat, InsertionPat)):
        raise MatchError("statement-level rule needs statements on the rhs")
    items = [] if isinstance(rhs, InsertionPat) else list(rhs.items)
    fresh_markers: list = []
    new_stmts = _instantiate_stmts(items, bindings, m.stmt_runs, [0], fresh_markers)
    method = new_prog.method(m.site.method)
    blk = block_at(method.body, m.site.path)
    lo = m.site.start()
    hi = m.site.stop()
    insertion = m.site.edge == "before"
    blk[lo:hi] = new_stmts
    replace_edits = []
    if len(new_stmts) != hi - lo:
        replace_edits.append((m.site.method, m.site.path, hi,
                              len(new_stmts) - (hi - lo)))
    if insertion:
        follow = lo + len(new_stmts)
        if follow < len(blk) and isinstance(blk[follow], MarkerS):
            del blk[follow]
            edits.append((m.site.method, m.site.path, follow + 1, -1))
    if fresh_markers:
        _strip_other_markers(new_prog, fresh_markers, edits)
    return Applied(renumber(new_prog), len(new_stmts), replace_edits, edits)


def _strip_other_markers(prog: Program, fresh_markers: list, edits: list):
    """Re-anchor: a freshly placed marker displaces same-named ones elsewhere.

    Each removal rescans so recorded edit coordinates are always current.
    """
    names = {mk.name for mk in fresh_markers}
    fresh = {id(mk) for mk in fresh_markers}

    def remove_one():
        for d in prog.decls:
            if isinstance(d, MethodDecl) and d.body is not None:
                for path, b in list(walk_blocks(d.body)):
                    for i, st in enumerate(b):
                        if (isinstance(st, MarkerS) and st.name in names
                                and id(st) not in fresh):
                            del b[i]
                            edits.append((d.name, path, i + 1, -1))
                            return True
        return False

    while remove_one():
        pass


def _build_method(t: MethodPat, old: MethodDecl, m: MatchResult,
                  bindings: dict, fresh_markers: Optional[list] = None,
                  ) -> MethodDecl:
    from .nodes import Visibility
    name = t.name
    if name.startswith("?"):
        v = bindings.get(name[1:])
        if not isinstance(v, Var):
            raise MatchError(f"?{name[1:]} does not name a method")
        name = v.name
    is_update = name == old.name
    if t.params == "ellipsis":
        if m.params_capture is None:
            raise MatchError("rhs (..) has nothing captured to reproduce")
        params = list(m.params_capture)
    elif isinstance(t.params, str):
        raise MatchError("a metavariable parameter list cannot appear on the rhs")
    else:
        params = list(t.params)

    def inst_clauses(pats):
        out = []
        for e in pats:
            v = subst_expr(e, bindings)
            if isinstance(v, list):
                raise MatchError("contract clause is a list")
            out.append(v)
        return out

    if is_update:
        requires = list(old.requires)
        ensures = list(old.ensures)
        if t.contract_ellipsis or t.requires_pats or t.ensures_pats:
            requires = list(m.req_rest or []) if t.contract_ellipsis else []
            ensures = list(m.ens_rest or []) if t.contract_ellipsis else []
            requires += inst_clauses(t.requires_pats)
            ensures += inst_clauses(t.ensures_pats)
        body = None if old.body is None else [copy_stmt(s) for s in old.body]
        if t.body is not None:
            if m.body_runs is None:
                raise MatchError("rhs body has nothing captured to reproduce")
            body = _instantiate_stmts(t.body, bindings, m.body_runs, [0],
                                      fresh_markers)
        return MethodDecl(name, old.visibility, old.is_ghost, params,
                          list(old.returns), requires, ensures, old.modifies,
                          body)
    # a brand-new method: created by the engine, hence generated (and ghost)
    body = None
    if t.body is not None:
        body = _instantiate_stmts(t.body, bindings, m.body_runs or [], [0],
                                  fresh_markers)
    return MethodDecl(name, Visibility.GENERATED, True, params, [],
                      inst_clauses(t.requires_pats), inst_clauses(t.ensures_pats),
                      None, body if body is not None else [])


def apply_rule(env: Environment, lhs, rhs, prog: Program) -> list[tuple[Program, MatchResult]]:
    """All single-site applications of a rule, ordered by site position."""
    out = []
    for m in pmatch(env, prog, lhs):
        try:
            out.append((apply_match(prog, rhs, m).program, m))
        except MatchError:
            continue
    return out

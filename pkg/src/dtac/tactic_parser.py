"""Parser and printer for the tactic language.

Concrete syntax summary:

    name(formal, ...) := body
    body     := when <prop> then <trans> | <trans>
    trans    := item (';' item)*
    item     := {| code |} =>> {| code |} [inst]
              | match {| code |} [inst]
              | or(trans, trans)
              | name(arg, ...) [inst]
    inst     := [ (pos | ?name := expr) , ... ]
    pos      := @name | line(N) | up(pos) | down(pos)
    prop     := term is [not] (public|private|generated|ghost)
              | ?error = "literal"
              | term = expr-pattern

Code templates are fenced with `{|` / `|}` and parsed by the program grammar
in pattern mode.  Rewrite arrows are written `=>>`.  `#` starts a line
comment.  Script files hold invocations separated by top-level `;`.
"""

from __future__ import annotations

import re
from typing import Optional

from . import parser as program_parser
from .nodes import MetaVar, Var
from .parser import ParseError, Parser
from .positions import DownRef, LineRef, NamedRef, UpRef
from .tactic_ast import (
    BindItem, Call, DeclSeqPat, EllipsisStmts, ErrorEquals, InsertionPat,
    IsProp, MatchT, MethodPat, NotProp, Or, PatternEquals, PosItem,
    RESERVED_VARS, Rule, RuleArg, Seq, StmtSeqPat, TacticDef, When,
    pattern_vars,
)


class TacticParseError(Exception):
    pass


class TacticLoadError(TacticParseError):
    pass


_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_\-']*")

PROP_KINDS = ("public", "private", "generated", "ghost")


# ---------------------------------------------------------------------------
# Pattern sub-parser (program grammar, pattern mode)


class _PatternParser(Parser):
    def __init__(self, src: str):
        super().__init__(src, pattern=True)

    def parse_block(self, ghost_ctx: bool = False) -> list:
        self.expect("OP", "{")
        stmts = []
        while not self.at("OP", "}"):
            stmts.append(self.parse_stmt_pat())
        self.expect("OP", "}")
        return stmts

    def parse_stmt_pat(self):
        if self.at("ELLIPSIS"):
            self.advance()
            return EllipsisStmts()
        return self.parse_stmt()

    def parse_method_pat(self) -> MethodPat:
        is_ghost = False
        if self.at_kw("ghost"):
            self.advance()
            is_ghost = True
        self.expect("KW", "method")
        if self.at("METAVAR"):
            name = "?" + self.advance().value
        else:
            name = self.expect("IDENT").value
        self.expect("OP", "(")
        params: object
        if self.at("ELLIPSIS"):
            self.advance()
            params = "ellipsis"
        elif self.at("METAVAR"):
            params = "?" + self.advance().value
        else:
            params = []
            while not self.at("OP", ")"):
                pname = self.expect("IDENT").value
                self.expect("OP", ":")
                params.append((pname, self.parse_type()))
                if self.at("OP", ","):
                    self.advance()
        self.expect("OP", ")")
        requires_pats, ensures_pats = [], []
        ellipsis = False
        while True:
            if self.at_kw("requires"):
                self.advance()
                requires_pats.append(self.parse_expr())
                if self.at("OP", ";"):
                    self.advance()
            elif self.at_kw("ensures"):
                self.advance()
                ensures_pats.append(self.parse_expr())
                if self.at("OP", ";"):
                    self.advance()
            elif self.at("ELLIPSIS"):
                self.advance()
                ellipsis = True
            else:
                break
        body = None
        if self.at("OP", "{"):
            body = self.parse_block()
        return MethodPat(name, params, requires_pats, ensures_pats,
                         ellipsis, body, is_ghost)


def parse_code_pattern(text: str):
    """Parse the contents of a `{| ... |}` fence."""
    stripped = text.strip()
    if not stripped:
        return InsertionPat()
    p = _PatternParser(stripped)
    is_decl = p.at_kw("method") or (p.at_kw("ghost") and p.peek().value == "method")
    try:
        if is_decl:
            items = [p.parse_method_pat()]
            while not p.at("EOF"):
                items.append(p.parse_method_pat())
            if len(items) == 1:
                return items[0]
            return DeclSeqPat(items)
        items = []
        while not p.at("EOF"):
            items.append(p.parse_stmt_pat())
        return StmtSeqPat(items)
    except ParseError as e:
        raise TacticParseError(f"bad code pattern {stripped!r}: {e}") from e


def parse_pattern_expr(text: str):
    try:
        return program_parser.parse_expr(text.strip(), pattern=True)
    except ParseError as e:
        raise TacticParseError(f"bad expression {text.strip()!r}: {e}") from e


# ---------------------------------------------------------------------------
# Character-level scanner for the tactic layer


class _Scanner:
    def __init__(self, src: str):
        self.src = src
        self.i = 0

    def _skip_from(self, i: int) -> int:
        src = self.src
        while i < len(src):
            c = src[i]
            if c == "#":
                nl = src.find("\n", i)
                i = len(src) if nl < 0 else nl + 1
            elif c.isspace():
                i += 1
            else:
                break
        return i

    def skip_ws(self):
        self.i = self._skip_from(self.i)

    def eof(self) -> bool:
        return self._skip_from(self.i) >= len(self.src)

    def looking_at(self, text: str) -> bool:
        # non-destructive: a failed lookahead must not consume comments
        return self.src.startswith(text, self._skip_from(self.i))

    def looking_at_word(self, word: str) -> bool:
        j = self._skip_from(self.i)
        if not self.src.startswith(word, j):
            return False
        j += len(word)
        return j >= len(self.src) or not (self.src[j].isalnum() or self.src[j] in "_-'")

    def eat(self, text: str):
        j = self._skip_from(self.i)
        if not self.src.startswith(text, j):
            raise TacticParseError(
                f"expected {text!r} at ...{self.src[j:j + 30]!r}")
        self.i = j + len(text)

    def eat_word(self, word: str):
        if not self.looking_at_word(word):
            raise TacticParseError(
                f"expected {word!r} at ...{self.src[self.i:self.i + 30]!r}")
        self.i = self._skip_from(self.i) + len(word)

    def name(self) -> str:
        self.skip_ws()
        m = _NAME_RE.match(self.src, self.i)
        if not m:
            raise TacticParseError(
                f"expected a name at ...{self.src[self.i:self.i + 30]!r}")
        self.i = m.end()
        return m.group(0)

    def fenced(self) -> str:
        self.eat("{|")
        end = self.src.find("|}", self.i)
        if end < 0:
            raise TacticParseError("unterminated {| code fence")
        text = self.src[self.i:end]
        self.i = end + 2
        return text

    def balanced(self, open_c: str, close_c: str) -> str:
        """Consume from after open_c to the matching close_c; return inner text."""
        self.eat(open_c)
        depth = 1
        start = self.i
        while self.i < len(self.src):
            if self.src.startswith("{|", self.i):
                end = self.src.find("|}", self.i)
                if end < 0:
                    raise TacticParseError("unterminated {| code fence")
                self.i = end + 2
                continue
            c = self.src[self.i]
            if c == '"':
                j = self.src.find('"', self.i + 1)
                if j < 0:
                    raise TacticParseError("unterminated string")
                self.i = j + 1
                continue
            if c in "([":
                depth += 1
            elif c in ")]":
                depth -= 1
                if depth == 0:
                    text = self.src[start:self.i]
                    self.i += 1
                    return text
            self.i += 1
        raise TacticParseError(f"unbalanced {open_c!r}")


def _split_top(text: str, sep: str) -> list[str]:
    parts, depth, start, i = [], 0, 0, 0
    while i < len(text):
        if text.startswith("{|", i):
            end = text.find("|}", i)
            if end < 0:
                raise TacticParseError("unterminated {| code fence")
            i = end + 2
            continue
        c = text[i]
        if c == '"':
            j = text.find('"', i + 1)
            if j < 0:
                raise TacticParseError("unterminated string")
            i = j + 1
            continue
        if c in "([":
            depth += 1
        elif c in ")]":
            depth -= 1
        elif c == sep and depth == 0:
            parts.append(text[start:i])
            start = i + 1
        i += 1
    parts.append(text[start:])
    return parts


# ---------------------------------------------------------------------------
# The tactic parser proper


class _TacticParser:
    def __init__(self, src: str):
        self.s = _Scanner(src)

    # -- position references -------------------------------------------------

    def parse_pos_ref(self, text: str):
        text = text.strip()
        if text.startswith("@"):
            return NamedRef(text[1:].strip())
        if text.startswith("line"):
            inner = text[len("line"):].strip()
            if not (inner.startswith("(") and inner.endswith(")")):
                raise TacticParseError(f"bad line position {text!r}")
            return LineRef(int(inner[1:-1].strip()))
        for word, cls in (("up", UpRef), ("down", DownRef)):
            if text.startswith(word):
                inner = text[len(word):].strip()
                if not (inner.startswith("(") and inner.endswith(")")):
                    raise TacticParseError(f"bad {word} position {text!r}")
                return cls(self.parse_pos_ref(inner[1:-1]))
        raise TacticParseError(f"bad position reference {text!r}")

    def parse_inst_text(self, text: str) -> list:
        items = []
        for raw in _split_top(text, ","):
            raw = raw.strip()
            if not raw:
                continue
            if raw.startswith("?"):
                if ":=" not in raw:
                    raise TacticParseError(f"bad binding {raw!r}")
                name, value = raw.split(":=", 1)
                name = name.strip()[1:]
                items.append(BindItem(name, parse_pattern_expr(value)))
            else:
                items.append(PosItem(self.parse_pos_ref(raw)))
        return items

    def maybe_inst(self) -> Optional[list]:
        if self.s.looking_at("["):
            return self.parse_inst_text(self.s.balanced("[", "]"))
        return None

    # -- arguments -----------------------------------------------------------

    def parse_args_text(self, text: str) -> list:
        args = []
        if not text.strip():
            return args
        for raw in _split_top(text, ","):
            raw = raw.strip()
            parts = _split_arrow(raw)
            if parts is not None:
                args.append(RuleArg(parse_pattern_expr(parts[0]),
                                    parse_pattern_expr(parts[1])))
            else:
                args.append(parse_pattern_expr(raw))
        return args

    # -- transformations -----------------------------------------------------

    def parse_trans(self) -> object:
        items = [self.parse_item()]
        while self.s.looking_at(";"):
            self.s.eat(";")
            items.append(self.parse_item())
        out = items[-1]
        for item in reversed(items[:-1]):
            out = Seq(item, out)
        return out

    def parse_item(self) -> object:
        if self.s.looking_at("{|"):
            lhs = parse_code_pattern(self.s.fenced())
            self.s.eat("=>>")
            rhs = parse_code_pattern(self.s.fenced())
            return Rule(lhs, rhs, self.maybe_inst())
        if self.s.looking_at_word("match"):
            self.s.eat_word("match")
            pat = parse_code_pattern(self.s.fenced())
            return MatchT(pat, self.maybe_inst())
        if self.s.looking_at_word("or"):
            self.s.eat_word("or")
            self.s.eat("(")
            left = self.parse_trans()
            self.s.eat(",")
            right = self.parse_trans()
            self.s.eat(")")
            return Or(left, right)
        name = self.s.name()
        args = self.parse_args_text(self.s.balanced("(", ")"))
        return Call(name, args, self.maybe_inst())

    # -- props ---------------------------------------------------------------

    def parse_prop(self):
        self.s.skip_ws()
        if self.s.looking_at("?"):
            self.s.eat("?")
            subject = MetaVar(self.s.name())
        else:
            subject = Var(self.s.name())
        if self.s.looking_at_word("is"):
            self.s.eat_word("is")
            negated = False
            if self.s.looking_at_word("not"):
                self.s.eat_word("not")
                negated = True
            for kind in PROP_KINDS:
                if self.s.looking_at_word(kind):
                    self.s.eat_word(kind)
                    prop = IsProp(subject, kind)
                    return NotProp(prop) if negated else prop
            raise TacticParseError("expected public/private/generated/ghost")
        self.s.eat("=")
        self.s.skip_ws()
        if self.s.looking_at('"'):
            self.s.eat('"')
            end = self.s.src.find('"', self.s.i)
            if end < 0:
                raise TacticParseError("unterminated string")
            text = self.s.src[self.s.i:end]
            self.s.i = end + 1
            if not (isinstance(subject, MetaVar) and subject.name == "error"):
                raise TacticParseError("string comparison is only defined for ?error")
            return ErrorEquals(text)
        if self.s.looking_at("{|"):
            return PatternEquals(subject, parse_pattern_expr(self.s.fenced()))
        # unfenced pattern expression, delimited by the `then` keyword
        start = self.s.i
        while self.s.i < len(self.s.src):
            if self.s.looking_at_word("then"):
                return PatternEquals(subject,
                                     parse_pattern_expr(self.s.src[start:self.s.i]))
            self.s.i += 1
        raise TacticParseError("when-prop is missing its then-branch")

    def parse_body(self):
        if self.s.looking_at_word("when"):
            self.s.eat_word("when")
            prop = self.parse_prop()
            self.s.eat_word("then")
            return When(prop, self.parse_trans())
        return self.parse_trans()

    # -- definitions -----------------------------------------------------------

    def parse_defs(self) -> list[TacticDef]:
        defs = []
        while True:
            doc = self._pending_doc()
            if self.s.i >= len(self.s.src):
                break
            name = self.s.name()
            formals_text = self.s.balanced("(", ")")
            formals = [t.strip() for t in formals_text.split(",") if t.strip()]
            self.s.eat(":=")
            body = self.parse_body()
            defs.append(TacticDef(name, formals, body, doc))
        return defs

    def _pending_doc(self) -> str:
        # comments handled by skip_ws; docs collected separately before skip
        src, i = self.s.src, self.s.i
        lines = []
        while i < len(src):
            stripped_nl = src.find("\n", i)
            seg = src[i:stripped_nl if stripped_nl >= 0 else len(src)]
            st = seg.strip()
            if st.startswith("#"):
                lines.append(st.lstrip("# ").rstrip())
                i = (stripped_nl + 1) if stripped_nl >= 0 else len(src)
            elif not st:
                if lines:
                    lines = []  # blank line detaches the comment block
                i = (stripped_nl + 1) if stripped_nl >= 0 else len(src)
            else:
                break
        self.s.i = i
        return " ".join(lines)


def _split_arrow(text: str) -> Optional[tuple[str, str]]:
    depth, i = 0, 0
    while i < len(text):
        if text.startswith("{|", i):
            end = text.find("|}", i)
            if end < 0:
                return None
            i = end + 2
            continue
        c = text[i]
        if c in "([":
            depth += 1
        elif c in ")]":
            depth -= 1
        elif depth == 0 and text.startswith("=>>", i):
            return text[:i], text[i + 3:]
        i += 1
    return None


# ---------------------------------------------------------------------------
# Public entry points


def parse_tactic_defs(text: str, known: Optional[dict] = None) -> list[TacticDef]:
    """Parse a `.dtac` library and run the load-time checks.

    `known` maps already-loaded tactic names to their arity (user libraries may
    reference stdlib names).
    """
    defs = _TacticParser(text).parse_defs()
    _check_library(defs, dict(known or {}))
    return defs


def parse_tactic_invocation(text: str) -> object:
    p = _TacticParser(text)
    trans = p.parse_trans()
    if not p.s.eof():
        raise TacticParseError(
            f"trailing input after invocation: {p.s.src[p.s.i:p.s.i + 30]!r}")
    return trans


def parse_script(text: str) -> list:
    """A script is a `;`-separated list of invocations (one guard check each)."""
    out = []
    for chunk in _split_top(_strip_comments(text), ";"):
        if chunk.strip():
            out.append(parse_tactic_invocation(chunk))
    return out


def _strip_comments(text: str) -> str:
    lines = []
    for line in text.splitlines():
        if line.lstrip().startswith("#"):
            continue
        lines.append(line)
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Load-time checks: arity, acyclicity, rhs-variable discipline


def _walk_trans(t, fn):
    fn(t)
    if isinstance(t, (Seq, Or)):
        _walk_trans(t.first if isinstance(t, Seq) else t.left, fn)
        _walk_trans(t.second if isinstance(t, Seq) else t.right, fn)
    elif isinstance(t, When):
        _walk_trans(t.inner, fn)


def _body_trans(body):
    return body.inner if isinstance(body, When) else body


def _check_library(defs: list[TacticDef], known: dict):
    arities = dict(known)
    for d in defs:
        if d.name in arities:
            raise TacticLoadError(f"duplicate tactic definition {d.name!r}")
        arities[d.name] = len(d.formals)

    # arity and definedness
    for d in defs:
        def visit(t, d=d):
            if isinstance(t, Call):
                if t.name not in arities:
                    raise TacticLoadError(
                        f"{d.name}: undefined tactic {t.name!r}")
                if arities[t.name] != len(t.args):
                    raise TacticLoadError(
                        f"{d.name}: {t.name} expects {arities[t.name]} "
                        f"argument(s), got {len(t.args)}")
        _walk_trans(_body_trans(d.body), visit)

    # acyclicity of the call graph
    graph: dict[str, set[str]] = {d.name: set() for d in defs}
    for d in defs:
        def collect(t, d=d):
            if isinstance(t, Call) and t.name in graph:
                graph[d.name].add(t.name)
        _walk_trans(_body_trans(d.body), collect)
    state: dict[str, int] = {}
    stack: list[str] = []

    def dfs(n):
        state[n] = 1
        stack.append(n)
        for m in sorted(graph.get(n, ())):
            if state.get(m, 0) == 1:
                cycle = stack[stack.index(m):] + [m]
                raise TacticLoadError(
                    "recursive tactic application is prohibited: "
                    + " -> ".join(cycle))
            if state.get(m, 0) == 0:
                dfs(m)
        stack.pop()
        state[n] = 2

    for n in graph:
        if state.get(n, 0) == 0:
            dfs(n)

    # rhs-variable discipline per rule
    for d in defs:
        formals = set(d.formals)

        def check_rule(t, d=d, formals=formals):
            if not isinstance(t, Rule):
                return
            bound = pattern_vars(t.lhs) | formals | RESERVED_VARS
            for item in t.inst or []:
                if isinstance(item, BindItem):
                    bound.add(item.name)
            free = pattern_vars(t.rhs) - bound
            if free:
                raise TacticLoadError(
                    f"{d.name}: unbound metavariable(s) on rule right-hand "
                    f"side: {', '.join('?' + v for v in sorted(free))}")
        _walk_trans(_body_trans(d.body), check_rule)


# ---------------------------------------------------------------------------
# Printer (canonical form; used for round-trip checks)


def _print_pat_expr(e) -> str:
    from .printer import print_expr
    return print_expr(e)


def _print_stmt_pat(s) -> str:
    from .nodes import AssertS, AssignS, CallS, IfS, MarkerS, VarDeclS
    from .printer import print_expr, print_type
    if isinstance(s, EllipsisStmts):
        return "..."
    if isinstance(s, MarkerS):
        return f"/*@{s.name}*/"
    if isinstance(s, AssertS):
        return f"assert {print_expr(s.expr)};"
    if isinstance(s, CallS):
        return f"{s.func}({', '.join(print_expr(a) for a in s.args)});"
    if isinstance(s, AssignS):
        return f"{print_expr(s.lhs)} := {print_expr(s.rhs)};"
    if isinstance(s, VarDeclS):
        head = ("ghost " if s.is_ghost else "") + "var " + ", ".join(s.names)
        if s.type is not None:
            head += f" : {print_type(s.type)}"
        if s.init is not None:
            head += f" := {print_expr(s.init)}"
        elif s.such_that is not None:
            head += f" :| {print_expr(s.such_that)}"
        return head + ";"
    if isinstance(s, IfS):
        then = " ".join(_print_stmt_pat(x) for x in s.then)
        els = " ".join(_print_stmt_pat(x) for x in s.els)
        out = f"if ({print_expr(s.cond)}) {{ {then} }}".replace("{  }", "{ }")
        out += f" else {{ {els} }}".replace("{  }", "{ }")
        return out
    raise TypeError(s)


def _print_method_pat(m: MethodPat) -> str:
    out = ("ghost " if m.is_ghost else "") + f"method {m.name}"
    if m.params == "ellipsis":
        out += "(..)"
    elif isinstance(m.params, str):
        out += f"({m.params})"
    else:
        from .printer import print_type
        out += "(" + ", ".join(f"{n} : {print_type(t)}" for n, t in m.params) + ")"
    for e in m.requires_pats:
        out += f" requires {_print_pat_expr(e)}"
    if m.contract_ellipsis:
        out += " ..."
    for e in m.ensures_pats:
        out += f" ensures {_print_pat_expr(e)}"
    if m.body is not None:
        inner = " ".join(_print_stmt_pat(s) for s in m.body)
        out += " { " + inner + " }" if inner else " { }"
    return out


def print_code_pattern(pat) -> str:
    if isinstance(pat, InsertionPat):
        return "{| |}"
    if isinstance(pat, StmtSeqPat):
        return "{| " + " ".join(_print_stmt_pat(s) for s in pat.items) + " |}"
    if isinstance(pat, MethodPat):
        return "{| " + _print_method_pat(pat) + " |}"
    if isinstance(pat, DeclSeqPat):
        return "{| " + " ".join(_print_method_pat(m) for m in pat.items) + " |}"
    raise TypeError(pat)


def _print_pos_ref(ref) -> str:
    if isinstance(ref, NamedRef):
        return "@" + ref.name
    if isinstance(ref, LineRef):
        return f"line({ref.line})"
    if isinstance(ref, UpRef):
        return f"up({_print_pos_ref(ref.inner)})"
    if isinstance(ref, DownRef):
        return f"down({_print_pos_ref(ref.inner)})"
    raise TypeError(ref)


def _print_inst(inst) -> str:
    if inst is None:
        return ""
    parts = []
    for item in inst:
        if isinstance(item, PosItem):
            parts.append(_print_pos_ref(item.ref))
        else:
            parts.append(f"?{item.name} := {_print_pat_expr(item.value)}")
    return "[" + ", ".join(parts) + "]"


def print_trans(t) -> str:
    if isinstance(t, Rule):
        return (print_code_pattern(t.lhs) + " =>> " + print_code_pattern(t.rhs)
                + _print_inst(t.inst))
    if isinstance(t, MatchT):
        return "match " + print_code_pattern(t.pat) + _print_inst(t.inst)
    if isinstance(t, Seq):
        return print_trans(t.first) + " ; " + print_trans(t.second)
    if isinstance(t, Or):
        return f"or({print_trans(t.left)}, {print_trans(t.right)})"
    if isinstance(t, Call):
        args = []
        for a in t.args:
            if isinstance(a, RuleArg):
                args.append(f"{_print_pat_expr(a.lhs)} =>> {_print_pat_expr(a.rhs)}")
            else:
                args.append(_print_pat_expr(a))
        return f"{t.name}({', '.join(args)})" + _print_inst(t.inst)
    raise TypeError(t)


def _print_prop(p) -> str:
    if isinstance(p, NotProp):
        inner = p.inner
        assert isinstance(inner, IsProp)
        return f"{_print_pat_expr(inner.term)} is not {inner.kind}"
    if isinstance(p, IsProp):
        return f"{_print_pat_expr(p.term)} is {p.kind}"
    if isinstance(p, ErrorEquals):
        return f'?error = "{p.text}"'
    if isinstance(p, PatternEquals):
        return f"{_print_pat_expr(p.subject)} = {_print_pat_expr(p.pattern)} "
    raise TypeError(p)


def print_tactic_defs(defs: list[TacticDef]) -> str:
    out = []
    for d in defs:
        if d.doc:
            out.append(f"# {d.doc}")
        head = f"{d.name}({', '.join(d.formals)}) :="
        if isinstance(d.body, When):
            out.append(f"{head} when {_print_prop(d.body.prop)}then "
                       f"{print_trans(d.body.inner)}"
                       if isinstance(d.body.prop, PatternEquals) else
                       f"{head} when {_print_prop(d.body.prop)} then "
                       f"{print_trans(d.body.inner)}")
        else:
            out.append(f"{head} {print_trans(d.body)}")
        out.append("")
    return "\n".join(out)

"""The pluggable verifier oracle.

The reference implementation replays scripted failure reports from a fixture
file: each entry names an error kind, the statement it is reported at, the
failing property, and optionally a condition under which the error is
considered discharged.  A thin adapter for a real external verifier is
provided as a seam; nothing in the acceptance path depends on it.

Fixture file format, one entry per line, fields separated by `@@`:

    <kind text> @@ <selector> @@ <property> [@@ <discharge>]

    selector  := @anchor | method:NAME+LINEOFFSET
    discharge := requires NAME : EXPR | ensures NAME : EXPR | assert NAME : EXPR

An optional `when <discharge-form>` field makes the entry conditional: it is
reported only while the condition holds (used for failures that a real
verifier would raise only after some contract appears).

Line offsets count printed lines from the method's header line in the initial
program.  The two kind strings consumed by library tactics are normative:
"target object may be null" and "A precondition for this call might not hold".
"""

from __future__ import annotations

import subprocess
from dataclasses import dataclass, field
from typing import Optional

from .env import Environment, RESERVED
from .nodes import AssertS, Expr, Program, Stmt, conjuncts, walk_blocks
from .parser import parse_expr
from .positions import AbsolutePosition, at as pos_at, find_anchor
from .printer import print_expr, print_program_with_lines

NULL_ERROR = "target object may be null"
PRECONDITION_ERROR = "A precondition for this call might not hold"


class FixtureError(Exception):
    pass


@dataclass
class ErrorReport:
    kind: str
    property: Expr
    line: int
    col: int
    position: AbsolutePosition


@dataclass
class Discharge:
    mode: str  # "requires" | "ensures" | "assert"
    method: str
    expr: Expr

    def holds(self, prog: Program) -> bool:
        m = prog.method(self.method)
        if m is None:
            return False
        if self.mode == "requires":
            pool = [c for e in m.requires for c in conjuncts(e)]
            return self.expr in pool
        if self.mode == "ensures":
            pool = [c for e in m.ensures for c in conjuncts(e)]
            return self.expr in pool
        if m.body is None:
            return False
        for _, blk in walk_blocks(m.body):
            for s in blk:
                if isinstance(s, AssertS) and s.expr == self.expr:
                    return True
        return False


@dataclass
class FixtureEntry:
    kind: str
    selector: str
    property: Expr
    discharge: Optional[Discharge]
    method: str                 # resolved at load time
    stmt_snapshot: Stmt         # resolved at load time; re-located structurally
    when: Optional[Discharge] = None
    consumed: bool = False


@dataclass
class ErrorFixture:
    entries: list[FixtureEntry] = field(default_factory=list)

    def discharged_count(self) -> int:
        return sum(1 for e in self.entries if e.consumed)


def _stmt_equal(a: Stmt, b: Stmt) -> bool:
    return type(a) is type(b) and a == b


def _locate(prog: Program, method: str, snapshot: Stmt) -> Optional[AbsolutePosition]:
    m = prog.method(method)
    if m is None or m.body is None:
        return None
    for path, blk in walk_blocks(m.body):
        for i, s in enumerate(blk):
            if _stmt_equal(s, snapshot):
                return pos_at(method, path, i, 1)
    return None


def _resolve_selector(prog: Program, selector: str) -> tuple[str, Stmt]:
    selector = selector.strip()
    if selector.startswith("@"):
        pos = find_anchor(prog, selector[1:])
        if pos is None:
            raise FixtureError(f"selector {selector!r} names no anchor")
        m = prog.method(pos.method)
        blk = m.body
        for idx, branch in pos.path:
            blk = blk[idx].then if branch == "then" else blk[idx].els
        return pos.method, blk[pos.index]
    if not selector.startswith("method:"):
        raise FixtureError(f"bad selector {selector!r}")
    rest = selector[len("method:"):]
    if "+" not in rest:
        raise FixtureError(f"selector {selector!r} needs a +line offset")
    name, offset_text = rest.rsplit("+", 1)
    name = name.strip()
    offset = int(offset_text.strip())
    text, line_of = print_program_with_lines(prog)
    m = prog.method(name)
    if m is None or m.body is None:
        raise FixtureError(f"selector {selector!r}: no such method body")
    lines = text.splitlines()
    header_line = None
    for i, line in enumerate(lines, start=1):
        if f" method {name}(" in line or line.startswith(f"method {name}("):
            header_line = i
            break
    if header_line is None:
        raise FixtureError(f"selector {selector!r}: method header not found")
    target_line = header_line + offset
    hits = []
    for path, blk in walk_blocks(m.body):
        for i, s in enumerate(blk):
            span = line_of.get(s.node_id)
            if span and span[0] <= target_line <= span[1]:
                hits.append((span[1] - span[0], s))
    if not hits:
        raise FixtureError(f"selector {selector!r}: line {target_line} has no statement")
    hits.sort(key=lambda h: h[0])
    return name, hits[0][1]


def load_fixture(text: str, prog: Program) -> ErrorFixture:
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split("@@")]
        if len(parts) not in (3, 4, 5):
            raise FixtureError(f"line {lineno}: expected 3 to 5 fields")
        kind, selector, prop_text = parts[:3]
        if not kind:
            raise FixtureError(f"line {lineno}: empty error kind")
        prop = parse_expr(prop_text)
        discharge = None
        when = None
        for extra in parts[3:]:
            if not extra:
                continue
            if extra.startswith("when "):
                when = _parse_discharge(extra[len("when "):], lineno)
            else:
                discharge = _parse_discharge(extra, lineno)
        method, snapshot = _resolve_selector(prog, selector)
        entries.append(FixtureEntry(kind, selector, prop, discharge,
                                    method, snapshot, when))
    return ErrorFixture(entries)


def _parse_discharge(text: str, lineno: int) -> Discharge:
    head, _, rest = text.partition(" ")
    if head not in ("requires", "ensures", "assert"):
        raise FixtureError(f"line {lineno}: bad discharge kind {head!r}")
    name, sep, expr_text = rest.partition(":")
    if not sep:
        raise FixtureError(f"line {lineno}: discharge needs 'name : expr'")
    return Discharge(head, name.strip(), parse_expr(expr_text))


def serialize_fixture(fixture: ErrorFixture) -> str:
    lines = []
    for e in fixture.entries:
        parts = [e.kind, e.selector, print_expr(e.property)]
        if e.discharge is not None:
            parts.append(f"{e.discharge.mode} {e.discharge.method} : "
                         f"{print_expr(e.discharge.expr)}")
        if e.when is not None:
            parts.append(f"when {e.when.mode} {e.when.method} : "
                         f"{print_expr(e.when.expr)}")
        lines.append(" @@ ".join(parts))
    return "\n".join(lines) + "\n"


class FixtureOracle:
    """Reference pv implementation: deterministic, fixture-driven."""

    def __init__(self, fixture: ErrorFixture):
        self.fixture = fixture

    def get_reports(self, prog: Program) -> list[ErrorReport]:
        _, line_of = print_program_with_lines(prog)
        text_lines = print_program_with_lines(prog)[0].splitlines()
        out = []
        for e in self.fixture.entries:
            if not e.consumed and e.discharge is not None and e.discharge.holds(prog):
                e.consumed = True
            if e.consumed:
                continue
            if e.when is not None and not e.when.holds(prog):
                continue
            pos = _locate(prog, e.method, e.stmt_snapshot)
            if pos is None:
                continue
            m = prog.method(e.method)
            blk = m.body
            for idx, branch in pos.path:
                blk = blk[idx].then if branch == "then" else blk[idx].els
            stmt = blk[pos.index]
            span = line_of.get(stmt.node_id)
            line = span[0] if span else 0
            col = 1
            if span and 0 < line <= len(text_lines):
                raw = text_lines[line - 1]
                col = len(raw) - len(raw.lstrip()) + 1
            out.append(ErrorReport(e.kind, e.property, line, col, pos))
        decl_order = {d.name if hasattr(d, "name") else "": i
                      for i, d in enumerate(prog.decls)}
        out.sort(key=lambda r: (decl_order.get(r.position.method, 0),
                                r.position.sort_key(0)))
        return out

    def get_errors(self, prog: Program) -> list[Environment]:
        envs = []
        for r in self.get_reports(prog):
            env = Environment()
            env.bind("error", r.kind, RESERVED)
            env.bind("err_arg", r.property, RESERVED)
            env.bind_pos("err_pos", r.position, RESERVED)
            envs.append(env)
        return envs


class EmptyOracle:
    """No reports: run_dtac proceeds under the distinguished empty environment."""

    def get_reports(self, prog: Program) -> list[ErrorReport]:
        return []

    def get_errors(self, prog: Program) -> list[Environment]:
        return []


class ExternalVerifierOracle:
    """Seam for a real verifier toolchain.

    Shells out to the given command with a program file and maps diagnostics
    of the shape `file(line,col): Error: message` onto reports.  The mapping
    is line/col -> statement position, message -> kind, and the quoted or
    trailing expression -> failing property when one can be parsed.  Excluded
    from the acceptance suite; the fixture oracle is the reference.
    """

    def __init__(self, command: list[str]):
        self.command = command

    def get_reports(self, prog: Program) -> list[ErrorReport]:
        from tempfile import NamedTemporaryFile
        from .printer import print_program

        with NamedTemporaryFile("w", suffix=".dfy", delete=False) as f:
            f.write(print_program(prog))
            path = f.name
        proc = subprocess.run(self.command + [path], capture_output=True,
                              text=True, timeout=300)
        return parse_external_diagnostics(proc.stdout + proc.stderr, prog)

    def get_errors(self, prog: Program) -> list[Environment]:
        envs = []
        for r in self.get_reports(prog):
            env = Environment()
            env.bind("error", r.kind, RESERVED)
            env.bind("err_arg", r.property, RESERVED)
            env.bind_pos("err_pos", r.position, RESERVED)
            envs.append(env)
        return envs


def parse_external_diagnostics(text: str, prog: Program) -> list[ErrorReport]:
    """Map `name(line,col): Error: message [expr]` diagnostics to reports."""
    import re

    from .positions import position_of_line, PositionError

    out = []
    pattern = re.compile(r"\((\d+),(\d+)\):\s*Error:?\s*(.+)")
    for raw in text.splitlines():
        m = pattern.search(raw)
        if not m:
            continue
        line, col = int(m.group(1)), int(m.group(2))
        message = m.group(3).strip()
        prop: Expr = parse_expr("true")
        if "[" in message and message.endswith("]"):
            head, _, tail = message.rpartition("[")
            try:
                prop = parse_expr(tail[:-1])
                message = head.strip()
            except Exception:
                pass
        try:
            pos = position_of_line(prog, line)
        except PositionError:
            continue
        out.append(ErrorReport(message, prop, line, col, pos))
    return out

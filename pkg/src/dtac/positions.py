"""Statement positions, anchors and zipper-style navigation.

A position names a slot inside a method body: either a span of statements
(edge "at", extent >= 1) or an insertion point between statements (edge
"before", extent 0).  Navigation moves over exactly one non-marker statement
at a time; markers are transparent.  Moving past the top or bottom of a branch
block exits to the position just outside the enclosing `if`; moving past the
ends of the method body fails.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .nodes import MarkerS, MethodDecl, Program, block_at, walk_blocks
from .printer import print_program_with_lines


class PositionError(Exception):
    pass


@dataclass(frozen=True)
class AbsolutePosition:
    method: str
    path: tuple  # ((stmt_index, "then" | "els"), ...)
    index: int
    edge: str  # "at" | "before"
    extent: int = 0

    def start(self) -> int:
        return self.index

    def stop(self) -> int:
        return self.index + self.extent

    def sort_key(self, decl_index: int):
        # document order: leftmost first, outer spans before their sub-spans
        flat = []
        for idx, branch in self.path:
            flat.append(idx)
            flat.append(0 if branch == "then" else 1)
        flat.append(self.index)
        return (decl_index, tuple(flat),
                0 if self.edge == "before" else 1, -self.extent)


@dataclass(frozen=True)
class DeclPos:
    """Position of a whole declaration (method-level matches)."""

    name: str
    index: int


def at(method: str, path: tuple, index: int, extent: int = 1) -> AbsolutePosition:
    return AbsolutePosition(method, path, index, "at", extent)


def before(method: str, path: tuple, index: int) -> AbsolutePosition:
    return AbsolutePosition(method, path, index, "before", 0)


def _body(prog: Program, method: str) -> list:
    m = prog.method(method)
    if m is None or m.body is None:
        raise PositionError(f"method {method!r} has no body")
    return m.body


def find_anchor(prog: Program, name: str) -> Optional[AbsolutePosition]:
    for di, d in enumerate(prog.decls):
        if isinstance(d, MethodDecl) and d.body is not None:
            for path, blk in walk_blocks(d.body):
                for i, s in enumerate(blk):
                    if isinstance(s, MarkerS) and s.name == name:
                        return at(d.name, path, i, 1)
    return None


def anchor_lines(prog: Program) -> dict[str, int]:
    """Anchor name -> printed line number (for the UI)."""
    _, line_of = print_program_with_lines(prog)
    out = {}
    for d in prog.decls:
        if isinstance(d, MethodDecl) and d.body is not None:
            for _, blk in walk_blocks(d.body):
                for s in blk:
                    if isinstance(s, MarkerS) and s.node_id in line_of:
                        out[s.name] = line_of[s.node_id][0]
    return out


def position_of_line(prog: Program, line: int) -> AbsolutePosition:
    """The statement covering a printed source line (innermost wins)."""
    _, line_of = print_program_with_lines(prog)
    best = None
    best_span = None
    for di, d in enumerate(prog.decls):
        if isinstance(d, MethodDecl) and d.body is not None:
            for path, blk in walk_blocks(d.body):
                for i, s in enumerate(blk):
                    span = line_of.get(s.node_id)
                    if span and span[0] <= line <= span[1]:
                        if best_span is None or span[1] - span[0] < best_span:
                            best = at(d.name, path, i, 1)
                            best_span = span[1] - span[0]
    if best is None:
        raise PositionError(f"line {line} is not inside any method")
    return best


def move(prog: Program, pos: AbsolutePosition, direction: str) -> AbsolutePosition:
    """Move one statement up or down, skipping markers, exiting branch blocks."""
    if direction not in ("up", "down"):
        raise PositionError(f"bad direction {direction!r}")
    body = _body(prog, pos.method)
    blk = block_at(body, pos.path)
    if direction == "up":
        j = pos.start() + (pos.extent if pos.edge == "at" else 0)
        j -= 1
        while j >= 0 and isinstance(blk[j], MarkerS):
            j -= 1
        if j >= 0:
            return before(pos.method, pos.path, j)
        if pos.path:
            parent_path = pos.path[:-1]
            if_index = pos.path[-1][0]
            return before(pos.method, parent_path, if_index)
        raise PositionError("cannot move up past the first statement of the method")
    else:
        j = pos.start()
        while j < len(blk) and isinstance(blk[j], MarkerS):
            j += 1
        if j < len(blk):
            return before(pos.method, pos.path, j + 1)
        if pos.path:
            parent_path = pos.path[:-1]
            if_index = pos.path[-1][0]
            return before(pos.method, parent_path, if_index + 1)
        raise PositionError("cannot move down past the last statement of the method")


# ---------------------------------------------------------------------------
# Position references (the `pos` grammar of tactic instantiation lists)


@dataclass(frozen=True)
class NamedRef:
    name: str


@dataclass(frozen=True)
class LineRef:
    line: int


@dataclass(frozen=True)
class UpRef:
    inner: "PosRef"


@dataclass(frozen=True)
class DownRef:
    inner: "PosRef"


PosRef = object  # NamedRef | LineRef | UpRef | DownRef

# @start / @end do not resolve to a fixed slot; they constrain a site relative
# to its own enclosing method.
FLOATING = {"start", "end"}


def resolve_position(prog: Program, ref, env=None):
    """Resolve a position reference to an AbsolutePosition or a floating token.

    env, when given, provides `@`-bindings (e.g. @pos, @err_pos) that shadow
    program anchors.
    """
    if isinstance(ref, NamedRef):
        if ref.name in FLOATING:
            return ref.name
        if env is not None:
            bound = env.pos(ref.name)
            if bound is not None:
                return bound
        found = find_anchor(prog, ref.name)
        if found is None:
            raise PositionError(f"unknown anchor or position @{ref.name}")
        return found
    if isinstance(ref, LineRef):
        return position_of_line(prog, ref.line)
    if isinstance(ref, UpRef):
        inner = resolve_position(prog, ref.inner, env)
        if isinstance(inner, str):
            raise PositionError(f"cannot navigate from @{inner}")
        return move(prog, inner, "up")
    if isinstance(ref, DownRef):
        inner = resolve_position(prog, ref.inner, env)
        if isinstance(inner, str):
            raise PositionError(f"cannot navigate from @{inner}")
        return move(prog, inner, "down")
    raise PositionError(f"bad position reference {ref!r}")


def _visible_before(blk: list, index: int) -> int:
    return sum(1 for s in blk[:index] if not isinstance(s, MarkerS))


def _visible_after(blk: list, index: int) -> int:
    return sum(1 for s in blk[index:] if not isinstance(s, MarkerS))


def admits(prog: Program, allowed, site) -> bool:
    """Does one allowed-position entry admit a match site?

    Sites are AbsolutePositions (span or insertion point) or DeclPos.  Position
    constraints never admit declaration-level sites.
    """
    if isinstance(site, DeclPos):
        return False
    if isinstance(allowed, str):  # floating @start / @end
        if site.path != ():
            return False
        blk = _body(prog, site.method)
        if allowed == "start":
            return _visible_before(blk, site.start()) == 0 and (
                site.edge == "at" or site.extent == 0)
        if allowed == "end":
            if site.edge != "before":
                return False
            return _visible_after(blk, site.start()) == 0
        return False
    if isinstance(allowed, DeclPos):
        return False
    if not isinstance(allowed, AbsolutePosition):
        return False
    if (allowed.method, allowed.path) != (site.method, site.path):
        return False
    if allowed.edge == "before":
        return site.start() == allowed.index
    # allowed is a span
    if site.edge == "before":
        return site.index == allowed.start()
    if site.extent == allowed.extent and site.index == allowed.index:
        return True
    return allowed.start() <= site.start() and site.stop() <= allowed.stop()

"""Replaying scripted proofs over corpus cases.

A case directory holds program.mdfy, fixture.errs, script.dtac and, once
frozen, expected.mdfy plus trace.txt.  Replay runs each script invocation
through the engine's top-level relation in order and fails fast.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .engine import Engine, EngineFailure, RunResult
from .nodes import MarkerS, MethodDecl, Program, copy_program, walk_blocks
from .oracle import FixtureOracle, load_fixture
from .parser import parse_program
from .printer import print_program
from .stdlib import load_library
from .tactic_parser import parse_tactic_invocation, _split_top, _strip_comments


@dataclass
class CorpusCase:
    name: str
    program_text: str
    fixture_text: str
    script_text: str
    expected_text: Optional[str] = None


@dataclass
class StepRecord:
    index: int
    invocation: str
    error_kind: Optional[str]
    primitive_steps: int
    diff: str


@dataclass
class ReplayResult:
    case: str
    programs: list[Program]  # programs[0] is initial; programs[i] after step i
    steps: list[StepRecord]
    oracle: FixtureOracle

    @property
    def final(self) -> Program:
        return self.programs[-1]

    def trace_summary(self) -> str:
        lines = [f"case: {self.case}", f"steps: {len(self.steps)}"]
        for s in self.steps:
            kind = s.error_kind or "-"
            lines.append(f"{s.index:3d}  {s.invocation}  "
                         f"[error: {kind}; primitives: {s.primitive_steps}]")
        return "\n".join(lines) + "\n"


def load_case(path: Path) -> CorpusCase:
    path = Path(path)
    expected = path / "expected.mdfy"
    return CorpusCase(
        name=path.name,
        program_text=(path / "program.mdfy").read_text("utf-8"),
        fixture_text=(path / "fixture.errs").read_text("utf-8"),
        script_text=(path / "script.dtac").read_text("utf-8"),
        expected_text=expected.read_text("utf-8") if expected.exists() else None,
    )


def script_invocations(text: str) -> list[str]:
    out = []
    for chunk in _split_top(_strip_comments(text), ";"):
        if chunk.strip():
            out.append(" ".join(chunk.split()))
    return out


def replay(case: CorpusCase, stop_after: Optional[int] = None,
           extra_libraries: Optional[list[str]] = None) -> ReplayResult:
    prog = parse_program(case.program_text)
    fixture = load_fixture(case.fixture_text, prog)
    oracle = FixtureOracle(fixture)
    library = load_library(extra_libraries)
    engine = Engine(library.defs)

    programs = [prog]
    steps: list[StepRecord] = []
    for i, text in enumerate(script_invocations(case.script_text), start=1):
        if stop_after is not None and i > stop_after:
            break
        trans = parse_tactic_invocation(text)
        try:
            result: RunResult = engine.run_dtac(prog, trans, oracle)
        except EngineFailure as e:
            raise EngineFailure(
                f"{case.name}: step {i} ({text}) failed:\n{e.report()}",
                e.notes) from e
        diff = unified_diff(prog, result.program)
        kind = result.error_env.value("error")
        steps.append(StepRecord(i, text, kind, len(result.trace), diff))
        prog = result.program
        programs.append(prog)
    return ReplayResult(case.name, programs, steps, oracle)


def unified_diff(before: Program, after: Program) -> str:
    a = print_program(before).splitlines(keepends=True)
    b = print_program(after).splitlines(keepends=True)
    return "".join(difflib.unified_diff(a, b, fromfile="before", tofile="after"))


def strip_markers(prog: Program) -> Program:
    out = copy_program(prog)
    for d in out.decls:
        if isinstance(d, MethodDecl) and d.body is not None:
            for _, blk in walk_blocks(d.body):
                blk[:] = [s for s in blk if not isinstance(s, MarkerS)]
    return out


def equal_modulo_markers(a: Program, b: Program) -> bool:
    return strip_markers(a) == strip_markers(b)

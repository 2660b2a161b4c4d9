"""DTac workbench: a tactic engine for contract-annotated programs."""

from .engine import Engine, EngineFailure, RunResult
from .guard import GuardReport, check_guard
from .nodes import Program
from .oracle import EmptyOracle, FixtureOracle, load_fixture
from .parser import ParseError, parse_program
from .printer import print_program
from .projection import compiled_projection
from .replay import CorpusCase, load_case, replay
from .stdlib import LibraryManifest, load_library, load_stdlib
from .tactic_parser import (
    parse_script, parse_tactic_defs, parse_tactic_invocation,
)
from .typecheck import typecheck

__all__ = [
    "Engine", "EngineFailure", "RunResult", "GuardReport", "check_guard",
    "Program", "EmptyOracle", "FixtureOracle", "load_fixture", "ParseError",
    "parse_program", "print_program", "compiled_projection", "CorpusCase",
    "load_case", "replay", "LibraryManifest", "load_library", "load_stdlib",
    "parse_script", "parse_tactic_defs", "parse_tactic_invocation",
    "typecheck",
]

"""The shipped tactic library."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .tactic_ast import TacticDef
from .tactic_parser import parse_tactic_defs

STDLIB_NAMES = [
    "assert-I", "post-I", "pre-I", "assert-E", "pre-E", "post-E",
    "post-to-assert", "assert-to-pre", "assert-to-post", "assert-rewr",
    "assert-up1", "assert-up2", "assert-up3", "assert-up", "post-to-post",
    "pre-to-assert", "null-to-assert", "pred-var-I", "ex-E", "case-I",
    "call-I", "IH-I",
    "assert-down", "assert-conj-I", "assert-up-ctxt", "assert-strengthen",
    "assert-comb1",
]


@dataclass
class LibraryManifest:
    defs: list[TacticDef]

    def names(self) -> list[str]:
        return [d.name for d in self.defs]

    def arity(self, name: str) -> int:
        for d in self.defs:
            if d.name == name:
                return len(d.formals)
        raise KeyError(name)

    def doc(self, name: str) -> str:
        for d in self.defs:
            if d.name == name:
                return d.doc
        raise KeyError(name)


def stdlib_source() -> str:
    return resources.files("dtac").joinpath("stdlib.dtac").read_text("utf-8")


def load_stdlib() -> LibraryManifest:
    defs = parse_tactic_defs(stdlib_source())
    names = [d.name for d in defs]
    missing = [n for n in STDLIB_NAMES if n not in names]
    if missing:
        raise RuntimeError(f"standard library is missing {missing}")
    return LibraryManifest(defs)


def load_library(extra_sources: list[str] | None = None) -> LibraryManifest:
    """Stdlib plus user libraries, which may reference stdlib names."""
    manifest = load_stdlib()
    known = {d.name: len(d.formals) for d in manifest.defs}
    for src in extra_sources or []:
        more = parse_tactic_defs(src, known=known)
        for d in more:
            known[d.name] = len(d.formals)
        manifest.defs.extend(more)
    return manifest

"""The binding store threaded through tactic evaluation.

Bindings carry a provenance tag so that flush can remove exactly what a
pattern created while keeping machinery bindings (?meth, ?pre, ...), carried
instantiations and verifier-report entries alive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

PATTERN = "pattern"
AUTO = "auto"
INST = "inst"
RESERVED = "reserved"


class EnvError(Exception):
    pass


@dataclass
class Environment:
    vars: dict = field(default_factory=dict)       # name -> (value, origin)
    positions: dict = field(default_factory=dict)  # name -> (position, origin)

    # values are Expr | list[Expr] | str

    def copy(self) -> "Environment":
        return Environment(dict(self.vars), dict(self.positions))

    def value(self, name: str):
        entry = self.vars.get(name)
        return entry[0] if entry else None

    def has(self, name: str) -> bool:
        return name in self.vars

    def bind(self, name: str, value, origin: str):
        self.vars[name] = (value, origin)

    def bind_pos(self, name: str, pos, origin: str):
        self.positions[name] = (pos, origin)

    def pos(self, name: str):
        entry = self.positions.get(name)
        return entry[0] if entry else None

    def merged_with(self, other: "Environment") -> "Environment":
        out = self.copy()
        out.vars.update(other.vars)
        out.positions.update(other.positions)
        return out

    def __str__(self):
        from .printer import print_expr
        parts = []
        for k, (v, _) in sorted(self.vars.items()):
            if isinstance(v, str):
                parts.append(f'?{k} := "{v}"')
            elif isinstance(v, list):
                parts.append(f"?{k} := [{', '.join(print_expr(x) for x in v)}]")
            else:
                parts.append(f"?{k} := {print_expr(v)}")
        for k, (p, _) in sorted(self.positions.items()):
            parts.append(f"@{k} := {p}")
        return "{" + ", ".join(parts) + "}"


def flush(env: Environment) -> Environment:
    """Drop pattern-created bindings; everything else survives."""
    out = Environment()
    for k, (v, origin) in env.vars.items():
        if origin != PATTERN:
            out.vars[k] = (v, origin)
    for k, (p, origin) in env.positions.items():
        if origin != PATTERN:
            out.positions[k] = (p, origin)
    return out


def values_equal(a, b) -> bool:
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(values_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, list) or isinstance(b, list):
        return False
    return a == b

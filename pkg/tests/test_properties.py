"""Hypothesis-driven properties for the kernel data structures."""

from hypothesis import given, settings, strategies as st

from dtac.env import Environment, INST, PATTERN, RESERVED, flush
from dtac.kernel import match_expr, subst_expr
from dtac.nodes import Bin, BoolLit, IntLit, Len, Not, SeqLit, Var
from dtac.parser import parse_expr
from dtac.printer import print_expr

names = st.sampled_from(["a", "b", "c", "xs", "n"])


def exprs(depth=3):
    base = st.one_of(
        st.integers(0, 99).map(IntLit),
        st.booleans().map(BoolLit),
        names.map(Var),
    )
    if depth == 0:
        return base
    sub = exprs(depth - 1)
    return st.one_of(
        base,
        st.tuples(st.sampled_from(["+", "-", "/", "==", "!=", "<", "<=",
                                   "&&", "||", "==>"]), sub, sub)
        .map(lambda t: Bin(t[0], t[1], t[2])),
        sub.map(Not),
        sub.map(Len),
        st.lists(sub, max_size=3).map(lambda xs: SeqLit(tuple(xs))),
    )


@given(exprs())
@settings(max_examples=300, deadline=None)
def test_expression_print_parse_roundtrip(e):
    assert parse_expr(print_expr(e)) == e


@given(exprs())
@settings(max_examples=200, deadline=None)
def test_matching_yourself_instantiates_back(e):
    b = match_expr(e, e, {})
    assert b == {}
    assert subst_expr(e, {}) == e


origins = st.sampled_from([PATTERN, INST, RESERVED, "auto"])


@given(st.dictionaries(st.sampled_from(["x", "y", "meth", "error"]),
                       st.tuples(st.integers(0, 5).map(IntLit), origins),
                       max_size=4))
@settings(max_examples=200, deadline=None)
def test_flush_idempotent_and_monotone(entries):
    env = Environment(dict(entries))
    once = flush(env)
    assert flush(once).vars == once.vars
    assert set(once.vars) <= set(env.vars)
    for k, (_, origin) in entries.items():
        assert (k in once.vars) == (origin != PATTERN)

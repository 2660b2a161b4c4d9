"""The tactic language: parsing, load-time checks, printing round-trip."""

import pytest

from dtac.nodes import Var
from dtac.stdlib import STDLIB_NAMES, load_library, load_stdlib, stdlib_source
from dtac.tactic_ast import (
    BindItem, Call, ErrorEquals, NotProp, Or, PatternEquals, PosItem, Rule,
    When,
)
from dtac.tactic_parser import (
    TacticLoadError, parse_script, parse_tactic_defs,
    parse_tactic_invocation, print_tactic_defs, print_trans,
)


def test_full_library_parses_without_errors():
    defs = parse_tactic_defs(stdlib_source())
    assert len(defs) == 27
    assert [d.name for d in defs] == STDLIB_NAMES


def test_self_recursion_is_rejected():
    with pytest.raises(TacticLoadError) as e:
        parse_tactic_defs("loop() := loop()")
    assert "recursive" in str(e.value)


def test_mutual_recursion_reports_the_cycle():
    src = "a() := b()\n\nb() := a()"
    with pytest.raises(TacticLoadError) as e:
        parse_tactic_defs(src)
    msg = str(e.value)
    assert "a" in msg and "b" in msg


def test_unbound_rhs_metavariable_rejected():
    with pytest.raises(TacticLoadError) as e:
        parse_tactic_defs("bad() := {| assert ?x; |} =>> {| assert ?y; |}")
    assert "?y" in str(e.value)


def test_rhs_variable_may_come_from_inst_or_formals():
    parse_tactic_defs("ok(P) := {| |} =>> {| assert ?P; |}")
    parse_tactic_defs(
        "ok2() := {| assert ?x; |} =>> {| assert ?q; |} [?q := ?x]")


def test_undefined_and_arity_errors():
    with pytest.raises(TacticLoadError):
        parse_tactic_defs("a() := nothing()")
    with pytest.raises(TacticLoadError):
        parse_tactic_defs("a(P) := {| |} =>> {| assert ?P; |}\n\nb() := a()")


def test_invocation_call_with_binding():
    t = parse_tactic_invocation("case-I()[?meth := LemmaLength]")
    assert isinstance(t, Call) and t.name == "case-I" and t.args == []
    assert t.inst == [BindItem("meth", Var("LemmaLength"))]


def test_invocation_single_argument():
    t = parse_tactic_invocation("assert-I(x == 0)")
    assert isinstance(t, Call) and len(t.args) == 1


def test_invocation_nested_or():
    t = parse_tactic_invocation("or(assert-up3(), or(assert-up2(), assert-up1()))")
    assert isinstance(t, Or)
    assert isinstance(t.right, Or)
    assert t.left.name == "assert-up3"
    lib = {d.name: d for d in load_stdlib().defs}
    assert print_trans(lib["assert-up"].body) == print_trans(t)


def test_invocation_raw_rule():
    t = parse_tactic_invocation("{| assert ?P; |} =>> {| /*@gone*/ |} [@start]")
    assert isinstance(t, Rule)
    assert isinstance(t.inst[0], PosItem)


def test_when_guards_shape():
    lib = {d.name: d for d in load_stdlib().defs}
    pre_i = lib["pre-I"].body
    assert isinstance(pre_i, When) and isinstance(pre_i.prop, NotProp)
    null_ta = lib["null-to-assert"].body
    assert isinstance(null_ta.prop, ErrorEquals)
    assert null_ta.prop.text == "target object may be null"
    ex_e = lib["ex-E"].body
    assert isinstance(ex_e.prop, PatternEquals)


def test_script_splitting_ignores_fences_and_comments():
    script = """
# comment
assert-I(a == 1);
{| assert ?P; |} =>> {| /*@x*/ |};
assert-up()
"""
    items = parse_script(script)
    assert len(items) == 3
    assert isinstance(items[1], Rule)


def test_print_parse_roundtrip_on_stdlib():
    defs = parse_tactic_defs(stdlib_source())
    printed = print_tactic_defs(defs)
    again = parse_tactic_defs(printed)
    assert again == defs


def test_user_library_may_reference_stdlib_names():
    lib = load_library(["null-strategy() := null-to-assert() ; assert-to-pre()"])
    assert "null-strategy" in lib.names()
    with pytest.raises(TacticLoadError):
        load_library(["broken() := not-a-tactic()"])


def test_duplicate_definition_rejected():
    with pytest.raises(TacticLoadError):
        parse_tactic_defs("x() := {| |} =>> {| assert true; |}\n\n"
                          "x() := {| |} =>> {| assert true; |}")

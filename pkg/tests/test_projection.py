"""Compiled projection: erasure of every specification element."""

from dtac.nodes import AssertS, MarkerS, Program, walk_blocks
from dtac.parser import parse_program
from dtac.printer import print_program
from dtac.projection import compiled_projection

from genprog import random_program

GHOST_ONLY = """\
/*generated*/ ghost method Lemma(n : int)
  requires n >= 0;
  ensures n >= 0;
{
  assert n >= 0;
}
"""


def test_ghost_only_unit_erases_completely():
    p = parse_program(GHOST_ONLY)
    assert compiled_projection(p) == Program([])


def test_added_assert_is_invisible(safer_program):
    from dtac.nodes import Bin, NullLit, Var
    with_assert = parse_program(print_program(safer_program))
    m = with_assert.method("selected_thrusters")
    m.body.insert(0, AssertS(Bin("!=", Var("comb"), NullLit())))
    before = compiled_projection(safer_program)
    after = compiled_projection(with_assert)
    assert print_program(before) == print_program(after)


def test_projection_strips_all_spec_elements():
    src = """\
private ghost method helper()
{
}

private method work(x : int) returns (r : int)
  requires x >= 0;
  ensures r >= 0;
{
  assert x >= 0;
  /*@here*/
  ghost var w : int :| w == x;
  helper();
  var y := x + 1;
  r := y;
}
"""
    p = parse_program(src)
    proj = compiled_projection(p)
    names = proj.decl_names()
    assert names == ["work"]
    m = proj.method("work")
    assert m.requires == [] and m.ensures == []
    for _, blk in walk_blocks(m.body):
        for s in blk:
            assert not isinstance(s, (AssertS, MarkerS))
    assert len(m.body) == 2  # var y and the assignment survive


def test_ghost_var_dependent_assignment_removed():
    src = """\
private method f(x : int)
{
  ghost var g : int :| g == x;
  g := x;
  var y := x;
}
"""
    p = parse_program(src)
    proj = compiled_projection(p)
    assert len(proj.method("f").body) == 1


def test_projection_idempotent_on_random_programs():
    for seed in range(60):
        p = random_program(seed)
        once = compiled_projection(p)
        twice = compiled_projection(once)
        assert once == twice


def test_projection_keeps_datatypes_classes_functions(safer_program):
    proj = compiled_projection(safer_program)
    names = proj.decl_names()
    assert "cmd" in names and "T_CMD" in names and "BF_mandatory" in names
    assert "control" in names

"""Parser and printer: examples plus round-trip fuzzing."""

import pytest

from dtac.nodes import Bin, IfS, Program, Quant, Visibility
from dtac.parser import DuplicateAnchorError, ParseError, parse_expr, parse_program
from dtac.printer import print_expr, print_program

from genprog import random_program


def test_fig1_method_shape(fig1_program):
    m = fig1_program.method("LemmaLength")
    assert m is not None
    assert m.is_ghost
    assert m.visibility == Visibility.GENERATED
    assert len(m.requires) == 1
    assert len(m.ensures) == 1
    assert isinstance(m.ensures[0], Quant)
    assert len(m.body) == 1 and isinstance(m.body[0], IfS)


def test_empty_unit():
    assert parse_program("") == Program([])
    assert print_program(Program([])) == ""


def test_visibility_defaults_to_public():
    p = parse_program("method f()\n{\n}\n")
    assert p.method("f").visibility == Visibility.PUBLIC


def test_generated_is_ghost_and_prints_as_comment():
    p = parse_program("/*generated*/ ghost method g()\n{\n}\n")
    m = p.method("g")
    assert m.visibility == Visibility.GENERATED and m.is_ghost
    assert "/*generated*/" in print_program(p)


def test_syntax_error_carries_position():
    with pytest.raises(ParseError) as e:
        parse_program("method f( {")
    assert e.value.line == 1 and e.value.col > 1


def test_duplicate_anchor_rejected():
    src = "method f()\n{\n  /*@x*/\n  /*@x*/\n}\n"
    with pytest.raises(DuplicateAnchorError):
        parse_program(src)


def test_duplicate_decl_rejected():
    with pytest.raises(ParseError):
        parse_program("method f()\nmethod f()\n")


def test_metavars_rejected_outside_patterns():
    with pytest.raises(ParseError):
        parse_program("method f()\n{\n  assert ?x;\n}\n")


def test_non_anchor_comments_discarded():
    p = parse_program("// top\nmethod f() /* note */\n{\n  assert true; // trailing\n}\n")
    assert p == parse_program("method f()\n{\n  assert true;\n}\n")


def test_plus_chains_are_right_nested():
    e = parse_expr("a + b + c")
    assert e == Bin("+", parse_expr("a"), Bin("+", parse_expr("b"), parse_expr("c")))


def test_precedence_implication_weakest():
    e = parse_expr("a == 0 && b == 0 ==> c == 0")
    assert isinstance(e, Bin) and e.op == "==>"
    assert isinstance(e.left, Bin) and e.left.op == "&&"


def test_expr_parens_roundtrip():
    for text in ["(a - b) - c", "a - b - c", "|xs + ys| <= 4 / 2",
                 "!(x == ZERO) && y == ZERO ==> z == 0",
                 "exists v :: length(v) == n - 1"]:
        e = parse_expr(text)
        assert parse_expr(print_expr(e)) == e


def test_fig1_roundtrip(fig1_program):
    text = print_program(fig1_program)
    again = parse_program(text)
    assert again == fig1_program
    assert print_program(again) == text


def test_corpus_files_are_print_fixed_points(safer_program):
    text = print_program(safer_program)
    assert print_program(parse_program(text)) == text


@pytest.mark.parametrize("seed", range(60))
def test_roundtrip_random_plain(seed):
    p = random_program(seed)
    assert parse_program(print_program(p)) == p


@pytest.mark.parametrize("seed", range(60))
def test_roundtrip_random_rich(seed):
    p = random_program(seed, rich=True)
    text = print_program(p)
    assert parse_program(text) == p
    assert print_program(parse_program(text)) == text

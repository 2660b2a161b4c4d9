"""The evaluation engine: unfolding, phases, choice and the top level."""

import pytest

from dtac.engine import Engine, EngineFailure
from dtac.env import Environment, RESERVED
from dtac.kernel import pmatch
from dtac.oracle import EmptyOracle
from dtac.parser import parse_program
from dtac.printer import print_expr, print_program
from dtac.stdlib import load_stdlib
from dtac.tactic_ast import Call, Or, Seq
from dtac.tactic_parser import parse_tactic_invocation, print_trans


@pytest.fixture(scope="module")
def engine():
    return Engine(load_stdlib().defs)


def error_env(kind, arg_text, pos=None):
    from dtac.parser import parse_expr
    env = Environment()
    env.bind("error", kind, RESERVED)
    env.bind("err_arg", parse_expr(arg_text), RESERVED)
    if pos is not None:
        env.bind_pos("err_pos", pos, RESERVED)
    return env


class ListOracle:
    def __init__(self, envs):
        self.envs = envs

    def get_errors(self, prog):
        return list(self.envs)


# ---------------------------------------------------------------------------
# unfold


def test_unfold_ih_i(engine):
    body = engine.unfold(Call("IH-I", [], None))
    assert isinstance(body, Call) and body.name == "call-I"
    assert print_trans(body) == "call-I(?meth, ?arg - 1)[@case2]"


def test_unfold_zero_arg_plain_body_is_verbatim(engine):
    lib = {d.name: d for d in load_stdlib().defs}
    body = engine.unfold(Call("assert-up1", [], None))
    assert print_trans(body) == print_trans(lib["assert-up1"].body)


def test_unfold_assert_up_or_tree(engine):
    body = engine.unfold(Call("assert-up", [], None))
    assert isinstance(body, Or)
    assert body.left.name == "assert-up3"
    assert body.right.left.name == "assert-up2"
    assert body.right.right.name == "assert-up1"


def test_unfold_undefined_and_arity(engine):
    with pytest.raises(EngineFailure) as e:
        engine.unfold(Call("no-such", [], None))
    assert "undefined tactic" in str(e.value)
    with pytest.raises(EngineFailure) as e:
        engine.unfold(Call("assert-I", [], None))
    assert "argument" in str(e.value)


def test_unfold_recursion_stack_guard(engine):
    with pytest.raises(EngineFailure) as e:
        engine.unfold(Call("assert-up", [], None), stack=("assert-up",))
    assert "recursive" in str(e.value).lower()


def test_unfold_instantiates_arguments_from_env(engine):
    from dtac.parser import parse_expr
    env = Environment()
    env.bind("P", parse_expr("x == 1"), "pattern")
    body = engine.unfold(parse_tactic_invocation("assert-I(?P)"), env)
    assert "x == 1" in print_trans(body)


# ---------------------------------------------------------------------------
# when-guards (match phase)


PRE_ERR = "A precondition for this call might not hold"
NULL_ERR = "target object may be null"

CALLER = """\
private method callee(x : int)
  requires x >= 0;

private method caller()
{
  var v := 3;
  callee(v);
}
"""


def test_pre_to_assert_fires_on_its_error(engine):
    prog = parse_program(CALLER)
    from dtac.positions import at
    env = error_env(PRE_ERR, "v >= 0", at("caller", (), 1, 1))
    result = engine.run_dtac(prog, parse_tactic_invocation("pre-to-assert()"),
                             ListOracle([env]))
    body = result.program.method("caller").body
    assert print_expr(body[1].expr) == "v >= 0"


def test_pre_to_assert_blocks_on_other_error(engine):
    prog = parse_program(CALLER)
    from dtac.positions import at
    env = error_env(NULL_ERR, "v", at("caller", (), 1, 1))
    with pytest.raises(EngineFailure):
        engine.run_dtac(prog, parse_tactic_invocation("pre-to-assert()"),
                        ListOracle([env]))


def test_exists_guard_binds_pattern_pieces(engine, fig1_program):
    # the witness tactic only applies when the argument is an existential
    t = parse_tactic_invocation(
        "ex-E(ws, exists xs :: length(xs) == n - 1)[@gv]")
    prog = parse_program(print_program(fig1_program).replace(
        "assert length(Cons(1, xs)) == n;", "/*@gv*/"))
    result = engine.run_dtac(prog, t, EmptyOracle())
    text = print_program(result.program)
    assert "var ws :| length(ws) == n - 1;" in text


def test_exists_guard_rejects_non_existential(engine, fig1_program):
    prog = parse_program(print_program(fig1_program).replace(
        "assert length(Cons(1, xs)) == n;", "/*@gv*/"))
    t = parse_tactic_invocation("ex-E(ws, length(xs) == n)[@gv]")
    with pytest.raises(EngineFailure):
        engine.run_dtac(prog, t, EmptyOracle())


# ---------------------------------------------------------------------------
# apply phase / eval


def test_match_leaves_program_identical(engine, safer_program):
    t = parse_tactic_invocation("{| |} =>> {| |}")
    # a pure match: evaluate the first stdlib match tactic shape directly
    from dtac.tactic_ast import MatchT
    from dtac.tactic_parser import parse_code_pattern
    match = MatchT(parse_code_pattern("method ?m(..) ... ensures ?P ..."), None)
    outcomes = list(engine.eval_dtac(Environment(), safer_program, match))
    assert outcomes
    for o in outcomes:
        assert print_program(o.program) == print_program(safer_program)
        assert o.env.pos("pos") is not None


def test_or_failing_left_equals_right(engine, fig1_program):
    prog = fig1_program
    t_or = parse_tactic_invocation(
        "or(pre-to-assert(), assert-I(length(Cons(1, xs)) == n)[@end, ?meth := LemmaLength])")
    t_right = parse_tactic_invocation(
        "assert-I(length(Cons(1, xs)) == n)[@end, ?meth := LemmaLength]")
    a = engine.run_dtac(prog, t_or, EmptyOracle())
    b = engine.run_dtac(prog, t_right, EmptyOracle())
    assert print_program(a.program) == print_program(b.program)


def test_seq_associativity_on_corpus_case(engine, fig1_program):
    empty_body = parse_program(print_program(fig1_program))
    empty_body.method("LemmaLength").body[0].then.clear()
    a = parse_tactic_invocation(
        "assert-I(n >= 0)[@start, ?meth := LemmaLength] ; assert-up1() ; assert-down()")
    left = engine.run_dtac(empty_body, a, EmptyOracle())
    b = Seq(Seq(parse_tactic_invocation("assert-I(n >= 0)[@start, ?meth := LemmaLength]"),
                parse_tactic_invocation("assert-up1()")),
            parse_tactic_invocation("assert-down()"))
    right = engine.run_dtac(empty_body, b, EmptyOracle())
    assert print_program(left.program) == print_program(right.program)


def test_seq_env_locality(engine):
    # a ?x bound by the first step is flushed before the second; only an
    # instantiation list carries it over (raw invocations skip the library's
    # static rhs check, so the failure surfaces at evaluation time)
    prog = parse_program("private method f()\n{\n  assert 1 == 1;\n}\n")
    leaky = parse_tactic_invocation(
        "{| assert ?x; |} =>> {| assert ?x; |} ; "
        "{| |} =>> {| assert ?x; /*@copy*/ |} [@end]")
    with pytest.raises(EngineFailure) as e:
        engine.run_dtac(prog, leaky, EmptyOracle())
    assert "?x" in e.value.report()

    carried = parse_tactic_invocation(
        "{| assert ?x; |} =>> {| assert ?x; |} ; "
        "{| |} =>> {| assert ?q; /*@copy*/ |} [@end, ?q := ?x]")
    result = engine.run_dtac(prog, carried, EmptyOracle())
    assert print_program(result.program).count("assert 1 == 1;") == 2


def test_run_dtac_rejects_guard_violations(engine):
    # deleting a public postcondition is not a valid refactoring
    prog = parse_program(
        "public method api()\n  ensures 1 == 1;\n{\n}\n")
    t = parse_tactic_invocation(
        "{| method ?m(..) ... ensures ?P { ... } |} =>> {| method ?m(..) ... { ... } |}")
    with pytest.raises(EngineFailure) as e:
        engine.run_dtac(prog, t, EmptyOracle())
    assert "guard rejected" in e.value.report() or "no acceptable" in str(e.value)


def test_run_dtac_backtracks_into_private_target(engine):
    # same deleting tactic, but a private method exists further down: the
    # engine backtracks past the public rejection and accepts the private one
    prog = parse_program(
        "public method api()\n  ensures 1 == 1;\n{\n}\n\n"
        "private method helper()\n  ensures 2 == 2;\n{\n}\n")
    t = parse_tactic_invocation(
        "{| method ?m(..) ... ensures ?P { ... } |} =>> {| method ?m(..) ... { ... } |}")
    result = engine.run_dtac(prog, t, EmptyOracle())
    assert result.program.method("api").ensures  # untouched
    assert not result.program.method("helper").ensures


def test_accepted_output_has_no_residual_metavariables(engine, fig1_program):
    from dtac.typecheck import typecheck
    t = parse_tactic_invocation("assert-I(n >= 0)[@end, ?meth := LemmaLength]")
    result = engine.run_dtac(fig1_program, t, EmptyOracle())
    assert typecheck(result.program) == []


def test_trace_counts_primitive_steps(engine, fig1_program):
    t = parse_tactic_invocation("assert-I(n >= 0)[@end, ?meth := LemmaLength]")
    result = engine.run_dtac(fig1_program, t, EmptyOracle())
    assert len(result.trace) == 1
    t2 = parse_tactic_invocation("assert-up1()")
    result2 = engine.run_dtac(result.program, t2, EmptyOracle())
    assert len(result2.trace) == 2  # assert-E + assert-I


def test_determinism_across_runs(engine, safer_program, safer_fixture_text):
    from dtac.oracle import FixtureOracle, load_fixture
    outs = []
    for _ in range(2):
        fixture = load_fixture(safer_fixture_text, safer_program)
        result = Engine(load_stdlib().defs).run_dtac(
            safer_program, parse_tactic_invocation("null-to-assert()"),
            FixtureOracle(fixture))
        outs.append(print_program(result.program))
    assert outs[0] == outs[1]


def test_error_env_choice_is_outermost_backtrack_point(engine, safer_program,
                                                       safer_fixture_text):
    # null-to-assert fails under the postcondition env and succeeds under the
    # first null report, which names the comb use at the BF call
    from dtac.oracle import FixtureOracle, load_fixture
    fixture = load_fixture(safer_fixture_text, safer_program)
    result = engine.run_dtac(safer_program,
                             parse_tactic_invocation("null-to-assert()"),
                             FixtureOracle(fixture))
    assert result.error_env.value("error") == NULL_ERR
    body = result.program.method("selected_thrusters").body
    assert print_expr(body[0].expr) == "comb != null"


def test_rule_rhs_rematches_at_pos_after_apply(engine, fig1_program):
    # self-consistency: the applied right-hand side matches back at @pos
    from dtac.kernel import pmatch
    from dtac.positions import admits
    from dtac.tactic_parser import parse_code_pattern
    t = parse_tactic_invocation("assert-I(n >= 0)[@end, ?meth := LemmaLength]")
    result = engine.run_dtac(fig1_program, t, EmptyOracle())
    rhs = parse_code_pattern("assert ?P; /*@ass*/")
    pos = result.env.pos("pos")
    hits = [m for m in pmatch(Environment(), result.program, rhs)
            if admits(result.program, pos, m.site)]
    assert hits
    assert print_expr(hits[0].env.value("P")) == "n >= 0"


def test_position_list_is_a_disjunction_of_allowed_slots(engine):
    # dt[@p1, @p2] may apply at either anchor; separate lists conjoin
    src = """\
private method f()
{
  /*@p1*/
  var a := 1;
  /*@p2*/
  var b := 2;
  /*@p3*/
}
"""
    prog = parse_program(src)
    t = parse_tactic_invocation("{| |} =>> {| assert 1 == 1; |} [@p1, @p2]")
    outcomes = list(engine.eval_dtac(Environment(), prog, t))
    slots = sorted(o.trace[0].site.index for o in outcomes)
    assert slots == [0, 2]  # the two named anchors, not @p3


def test_intermediate_states_may_be_ill_typed(engine):
    # checks run at the top level only: the first step references a variable
    # that only the second step declares
    prog = parse_program("private method f()\n{\n  var a := 1;\n}\n")
    t = parse_tactic_invocation(
        "{| |} =>> {| assert q == 1; |} [@end] ; "
        "{| |} =>> {| ghost var q : int :| q == 1; |} [@start]")
    result = engine.run_dtac(prog, t, EmptyOracle())
    from dtac.typecheck import typecheck
    assert typecheck(result.program) == []
    text = print_program(result.program)
    assert "ghost var q" in text and "assert q == 1;" in text

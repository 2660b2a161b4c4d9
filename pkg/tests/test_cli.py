"""Batch CLI behavior and exit codes."""

import subprocess
import sys

from dtac.cli import main

from conftest import CORPUS


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_apply_lemmalength_matches_expected(tmp_path, capsys):
    case = CORPUS / "lemmalength"
    out_path = tmp_path / "final.mdfy"
    code, _, _ = run_cli([
        "apply",
        "--program", str(case / "program.mdfy"),
        "--script", str(case / "script.dtac"),
        "--errors", str(case / "fixture.errs"),
        "--out", str(out_path),
    ], capsys)
    assert code == 0
    assert out_path.read_text() == (case / "expected.mdfy").read_text()


def test_apply_trace_counts_steps(capsys):
    case = CORPUS / "safer-null"
    code, out, _ = run_cli([
        "apply",
        "--program", str(case / "program.mdfy"),
        "--script", str(case / "script.dtac"),
        "--errors", str(case / "fixture.errs"),
        "--trace",
    ], capsys)
    assert code == 0
    assert "steps: 4" in out


def test_apply_diff_shows_step_changes(capsys):
    case = CORPUS / "lemmalength"
    code, out, _ = run_cli([
        "apply",
        "--program", str(case / "program.mdfy"),
        "--script", str(case / "script.dtac"),
        "--errors", str(case / "fixture.errs"),
        "--diff",
    ], capsys)
    assert code == 0
    assert "+    LemmaLength(n - 1);" in out


def test_undefined_tactic_is_a_step_failure(tmp_path, capsys):
    prog = tmp_path / "p.mdfy"
    prog.write_text("private method f()\n{\n}\n")
    script = tmp_path / "s.dtac"
    script.write_text("does-not-exist()")
    code, _, err = run_cli([
        "apply", "--program", str(prog), "--script", str(script),
    ], capsys)
    assert code == 2
    assert "undefined tactic" in err


def test_parse_failures_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.mdfy"
    bad.write_text("method ( {")
    script = tmp_path / "s.dtac"
    script.write_text("assert-up()")
    code, _, err = run_cli([
        "apply", "--program", str(bad), "--script", str(script)], capsys)
    assert code == 1
    code, _, err = run_cli([
        "apply", "--program", str(bad), "--script", "/nope/missing.dtac"], capsys)
    assert code == 1


def test_check_accepts_and_rejects(tmp_path, capsys):
    before = tmp_path / "a.mdfy"
    after_ok = tmp_path / "b.mdfy"
    after_bad = tmp_path / "c.mdfy"
    before.write_text("public method f(n : int)\n  ensures n == n;\n{\n}\n")
    after_ok.write_text(
        "public method f(n : int)\n  ensures n == n;\n{\n  assert n == n;\n}\n")
    after_bad.write_text("public method f(n : int)\n{\n}\n")
    code, out, _ = run_cli(["check", "--before", str(before),
                            "--after", str(after_ok)], capsys)
    assert code == 0 and "ok" in out
    code, out, _ = run_cli(["check", "--before", str(before),
                            "--after", str(after_bad)], capsys)
    assert code == 1 and "PublicPostWeakened" in out


def test_parse_pretty_prints(tmp_path, capsys):
    f = tmp_path / "p.mdfy"
    f.write_text("private   method f( )\n{\n   var x := 1 ;\n}\n")
    code, out, _ = run_cli(["parse", str(f)], capsys)
    assert code == 0
    assert "var x := 1;" in out


def test_stdlib_listing(capsys):
    code, out, _ = run_cli(["stdlib", "--list"], capsys)
    assert code == 0
    lines = [l for l in out.splitlines() if l.strip()]
    assert len(lines) == 27
    assert any(l.startswith("assert-I/1") for l in lines)


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dtac.cli", "stdlib", "--list"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "null-to-assert/0" in proc.stdout


def test_user_library_flag(tmp_path, capsys):
    prog = tmp_path / "p.mdfy"
    prog.write_text("private method f()\n"
                    "{\n  assert 1 == 1;\n  var a := 2;\n}\n")
    lib = tmp_path / "extra.dtac"
    lib.write_text("shuffle() := assert-down() ; assert-up1()\n")
    script = tmp_path / "s.dtac"
    script.write_text("shuffle()")
    code, out, _ = run_cli([
        "apply", "--program", str(prog), "--script", str(script),
        "--library", str(lib),
    ], capsys)
    assert code == 0
    assert out.index("assert 1 == 1;") < out.index("var a := 2;")

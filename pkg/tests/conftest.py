import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

CORPUS = Path(__file__).parent.parent / "src" / "dtac" / "corpus"

FIG1_SOURCE = """\
datatype List = Nil | Cons(head : int, tail : List);

function method length(xs : List) : int {
  match xs case Nil => 0 case Cons(h, t) => 1 + length(t)
}

/*generated*/ ghost method LemmaLength(n : int)
  requires n >= 0;
  ensures exists xs :: length(xs) == n;
{
  if (n == 0) {
  } else {
    LemmaLength(n - 1);
    var xs :| length(xs) == n - 1;
    assert length(Cons(1, xs)) == n;
  }
}
"""


@pytest.fixture
def fig1_program():
    from dtac.parser import parse_program
    return parse_program(FIG1_SOURCE)


@pytest.fixture
def safer_program():
    from dtac.parser import parse_program
    return parse_program((CORPUS / "safer-null" / "program.mdfy").read_text())


@pytest.fixture
def safer_fixture_text():
    return (CORPUS / "safer-null" / "fixture.errs").read_text()

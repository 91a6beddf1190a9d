import numpy as np
import pytest

from sharphardy.config import load_config, parse_config
from sharphardy.errors import ConfigurationError
from sharphardy.exprlang import LevelSet

GOOD = """# unit disk
[domain]
kind = ball
R = 1

[grid]
cells = 64   # coarse

[solver]
tol = 1e-9
max_iter = 50

[run]
p = 3
seed = 7
lambda_mode = grid
"""


def test_parse_values():
    cfg = parse_config(GOOD)
    assert cfg.domain == {"kind": "ball", "R": "1"}
    assert (cfg.cells, cfg.tol, cfg.max_iter, cfg.p, cfg.seed) == (64, 1e-9, 50, 3.0, 7)
    assert cfg.lambda_mode == "grid"


def test_defaults():
    cfg = parse_config("[domain]\nkind = box\n")
    assert (cfg.cells, cfg.p, cfg.seed, cfg.lambda_mode) == (128, 2.0, 0, "auto")


@pytest.mark.parametrize("text,line,col", [
    ("[domain]\nkind = ball\nR = 1\n[grid]\ncells = many\n", 5, 9),
    ("[domain]\nkind = ball\n[grid]\ncells = 4\n", 4, 9),
    ("[domain]\nkind = ball\n[run]\np = 1\n", 4, 5),
    ("[domain]\nkind = ball\n[run]\ncolour = red\n", 4, 10),
    ("[domain]\nkind = ball\n[extras]\n", 3, 1),
    ("kind = ball\n", 1, 1),
    ("[domain]\nR = 1\n", 1, 1),
])
def test_errors_carry_line_and_column(text, line, col):
    with pytest.raises(ConfigurationError) as exc:
        parse_config(text)
    assert (exc.value.line, exc.value.column) == (line, col)
    assert f"line {line}" in str(exc.value)


def test_duplicate_key_reports_line():
    with pytest.raises(ConfigurationError) as exc:
        parse_config("[domain]\nkind = ball\nkind = box\n")
    assert exc.value.line == 3


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "nope.ini")


def test_load_roundtrip(tmp_path):
    p = tmp_path / "a.ini"
    p.write_text(GOOD, encoding="utf-8")
    assert load_config(p).source == str(p)


def test_levelset_evaluates():
    f = LevelSet("x**2 + y**2 - 1", 2)
    np.testing.assert_allclose(f([[0, 0], [1, 0], [2, 0]]), [-1, 0, 3])
    g = LevelSet("max(abs(x), abs(y)) - pi", 2)
    assert g([[0.0, 0.0]])[0] == pytest.approx(-np.pi)


@pytest.mark.parametrize("expr", ["__import__('os')", "x.real", "lambda: 1", "x if y else 1",
                                  "open('f')", "q + 1", "'a'"])
def test_levelset_rejects_unsafe(expr):
    with pytest.raises(ConfigurationError):
        LevelSet(expr, 2)


def test_levelset_syntax_error_has_column():
    with pytest.raises(ConfigurationError) as exc:
        LevelSet("x + * y", 2)
    assert exc.value.column is not None

import numpy as np
import pytest

from scoreline.dixon_coles import DcParams, RatingSet
from scoreline.marco import MarcoParams
from scoreline.paramfile import (append_fit_log, format_params, parse_params, read_fit_log,
                                 read_params, write_params)


def _ratings(rng):
    teams = ["Aston Villa", "Man=City", "Hull", "Spurs"]
    alpha = rng.normal(1, 0.3, 4)
    alpha += 1 - alpha.mean()
    return RatingSet(teams, alpha, rng.normal(-0.8, 0.3, 4), 0.1 + rng.random() / 3)


def _same(a, b):
    assert type(a) is type(b)
    assert a.ratings.teams == b.ratings.teams
    assert np.array_equal(a.ratings.alpha, b.ratings.alpha)
    assert np.array_equal(a.ratings.beta, b.ratings.beta)
    assert a.ratings.gamma == b.ratings.gamma and a.xi == b.xi


def test_dc_round_trip(tmp_path, rng):
    p = DcParams(_ratings(rng), rho=-0.0731234567891, xi=0.0019)
    write_params(p, tmp_path / "p.txt")
    q = read_params(tmp_path / "p.txt")
    _same(p, q)
    assert q.rho == p.rho


def test_marco_round_trip(rng):
    p = MarcoParams(_ratings(rng), (0.123456789012345, 0.98, -0.07), xi=0.003)
    q = parse_params(format_params(p))
    _same(p, q)
    assert q.theta == p.theta


def test_comments_and_blank_lines(rng):
    text = format_params(DcParams(_ratings(rng), 0.0, 0.0))
    text = "# header\n\n" + text.replace("\n", "\n\n")
    assert parse_params(text).model == "dc"


@pytest.mark.parametrize("text, msg", [
    ("model = dc\ngamma = 0.1\n", "xi"),
    ("model = foo\ngamma = 0\nxi = 0\n", "unknown model"),
    ("model = dc\ngamma = 0\nxi = 0\nalpha[A] = 1\n", "different teams"),
    ("model = marco\ngamma = 0\nxi = 0\ntheta1 = 0\n", "theta2"),
    ("model dc\n", "expected"),
])
def test_errors(text, msg):
    with pytest.raises(ValueError, match=msg):
        parse_params(text)


def test_fit_log(tmp_path):
    path = tmp_path / "fit.jsonl"
    append_fit_log(path, [{"b": 1, "a": 2}])
    append_fit_log(path, [{"c": None}])
    assert read_fit_log(path) == [{"a": 2, "b": 1}, {"c": None}]
    assert path.read_text().splitlines()[0] == '{"a": 2, "b": 1}'

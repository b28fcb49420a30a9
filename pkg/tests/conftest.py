import numpy as np
import pandas as pd
import pytest

from scoreline.league_data import LeagueDataset


def write_raw(path, rows, header="Date,HomeTeam,AwayTeam,FTHG,FTAG"):
    path.write_text(header + "\n" + "".join(r + "\n" for r in rows))
    return path


def toy_dataset(rows, league="TOY"):
    """rows: (date string YYYY-MM-DD, home, away, x, y)."""
    frame = pd.DataFrame(rows, columns=["date", "home_team", "away_team", "home_goals", "away_goals"])
    frame["date"] = pd.to_datetime(frame["date"])
    frame["league"] = league
    frame["match_id"] = [f"{league}:{i}" for i in range(len(frame))]
    return LeagueDataset.from_frame(frame)


@pytest.fixture
def raw_writer(tmp_path):
    def _write(name, rows, header="Date,HomeTeam,AwayTeam,FTHG,FTAG"):
        return write_raw(tmp_path / name, rows, header)
    return _write


@pytest.fixture(scope="session")
def small_league():
    from scoreline.simulate import SimScenario, generate
    return generate(SimScenario(m=6, seasons=3, model="dc", seed=11))


@pytest.fixture(scope="session")
def medium_marco():
    from scoreline.simulate import SimScenario, generate
    return generate(SimScenario(m=10, seasons=4, model="marco", theta=(0, 1, -0.08), seed=5))


def poisson_pmf(k, rate):
    from scipy.stats import poisson
    return poisson.pmf(k, rate)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


# ---------------------------------------------------------------- acceptance report

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(capsys):
    """Record one PASS/FAIL line per acceptance criterion and echo it live."""
    def _report(number: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)

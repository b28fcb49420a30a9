"""Match results: ingestion, the day-index time axis and estimation windows."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np
import pandas as pd

REQUIRED_COLUMNS = ("Date", "HomeTeam", "AwayTeam", "FTHG", "FTAG")
CANONICAL_COLUMNS = ("match_id", "t", "season", "home_team", "away_team",
                     "home_goals", "away_goals")
# canonical files also carry these so that round-trips keep the calendar
EXTRA_COLUMNS = ("date", "league")

PREDICTION_MONTHS = frozenset({10, 11, 12, 1, 2, 3, 4})
SEASON_START_MONTH = 7

_DMY = re.compile(r"^\s*(\d{1,2})/(\d{1,2})/(\d{2}|\d{4})\s*$")


class IngestError(ValueError):
    """Fatal problem with an input results file."""


class MatchRecord(NamedTuple):
    match_id: str
    t: int
    home_team: str
    away_team: str
    home_goals: int
    away_goals: int
    season: str
    league: str


def season_label(date: pd.Timestamp) -> str:
    start = date.year if date.month >= SEASON_START_MONTH else date.year - 1
    return f"{start}-{start + 1}"


def parse_date(text: str, hint: str | None = None) -> pd.Timestamp:
    """Parse a football-data style date (dd/mm/yy or dd/mm/yyyy)."""
    if hint is not None:
        return pd.Timestamp(pd.to_datetime(text.strip(), format=hint))
    m = _DMY.match(text)
    if m is None:
        raise IngestError(
            f"unrecognised date {text!r}; expected dd/mm/yy or dd/mm/yyyy "
            "(pass a date format hint for other layouts)")
    day, month, year = int(m.group(1)), int(m.group(2)), m.group(3)
    y = int(year)
    if len(year) == 2:
        y += 2000 if y < 70 else 1900
    try:
        return pd.Timestamp(year=y, month=month, day=day)
    except ValueError as exc:
        raise IngestError(f"invalid date {text!r}: {exc}") from None


@dataclass
class LeagueDataset:
    """Time-ordered match results.

    ``matches`` is a DataFrame with the canonical columns plus ``date`` and
    ``league``; rows are sorted by day index with ties kept in source order.
    """

    matches: pd.DataFrame
    epoch: pd.Timestamp | None = None
    skipped_rows: int = 0
    duplicate_rows: int = 0
    teams: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.teams:
            self.teams = sorted(set(self.matches["home_team"]) | set(self.matches["away_team"]))

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, epoch=None, **kw) -> "LeagueDataset":
        frame = frame.copy()
        frame["date"] = pd.to_datetime(frame["date"]).dt.normalize()
        if epoch is None:
            epoch = frame["date"].min() if len(frame) else None
        if epoch is not None and len(frame):
            frame["t"] = (frame["date"] - epoch).dt.days.astype(np.int64)
        else:
            frame["t"] = pd.Series(dtype=np.int64)
        if "season" not in frame or frame["season"].isna().any():
            frame["season"] = [season_label(d) for d in frame["date"]]
        frame = frame.sort_values("t", kind="stable").reset_index(drop=True)
        for col in ("home_goals", "away_goals", "t"):
            frame[col] = frame[col].astype(np.int64)
        for col in ("match_id", "season", "league", "home_team", "away_team"):
            frame[col] = frame[col].astype(str)
        frame = frame[list(CANONICAL_COLUMNS) + list(EXTRA_COLUMNS)]
        return cls(frame, epoch, **kw)

    def __len__(self) -> int:
        return len(self.matches)

    def __iter__(self) -> Iterator[MatchRecord]:
        for row in self.matches.itertuples(index=False):
            yield MatchRecord(row.match_id, int(row.t), row.home_team, row.away_team,
                              int(row.home_goals), int(row.away_goals), row.season, row.league)

    @property
    def m(self) -> int:
        return len(self.teams)

    @property
    def seasons(self) -> list[str]:
        return sorted(self.matches["season"].unique())

    @property
    def leagues(self) -> list[str]:
        return sorted(self.matches["league"].unique())

    def subset(self, mask) -> "LeagueDataset":
        sub = self.matches[np.asarray(mask, dtype=bool)].reset_index(drop=True)
        return LeagueDataset(sub, self.epoch)

    def window(self, t: int) -> "LeagueDataset":
        """Matches played strictly before day ``t``."""
        return self.subset(self.matches["t"].to_numpy() < t)

    def on_day(self, t: int) -> "LeagueDataset":
        return self.subset(self.matches["t"].to_numpy() == t)

    def by_league(self) -> dict[str, "LeagueDataset"]:
        lg = self.matches["league"].to_numpy()
        return {name: self.subset(lg == name) for name in self.leagues}

    def day_of(self, date) -> int:
        return int((pd.Timestamp(date).normalize() - self.epoch).days)

    def date_of(self, t: int) -> pd.Timestamp:
        return self.epoch + pd.Timedelta(days=int(t))

    def to_csv(self, path) -> None:
        out = self.matches.copy()
        out["date"] = out["date"].dt.strftime("%Y-%m-%d")
        out.to_csv(path, index=False)

    def equals(self, other: "LeagueDataset") -> bool:
        return (self.epoch == other.epoch and self.teams == other.teams
                and self.matches.equals(other.matches))


def _read_raw(path: Path, hint: str | None, league: str | None):
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8-sig",
                          skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        raise IngestError(f"{path}: empty file, no header row") from None
    raw.columns = [c.strip() for c in raw.columns]

    if set(CANONICAL_COLUMNS) <= set(raw.columns):
        return _read_canonical(raw, path, league)

    for col in REQUIRED_COLUMNS:
        if col not in raw.columns:
            raise IngestError(f"{path}: missing required column {col!r}")

    raw = raw.loc[~(raw == "").all(axis=1)]
    n_before = len(raw)
    raw = raw.drop_duplicates()
    duplicates = n_before - len(raw)

    rows, skipped = [], 0
    default_league = league or path.stem
    for rec in raw.to_dict("records"):
        hg, ag = rec["FTHG"].strip(), rec["FTAG"].strip()
        home, away = rec["HomeTeam"].strip(), rec["AwayTeam"].strip()
        try:
            x, y = int(float(hg)), int(float(ag))
        except ValueError:
            skipped += 1
            continue
        if x < 0 or y < 0 or x != float(hg) or y != float(ag) or not home or not away or home == away:
            skipped += 1
            continue
        if not rec["Date"].strip():
            skipped += 1
            continue
        date = parse_date(rec["Date"], hint)
        lg = league or (rec.get("Div") or "").strip() or default_league
        rows.append({"date": date, "league": lg, "home_team": home, "away_team": away,
                     "home_goals": x, "away_goals": y})
    frame = pd.DataFrame(rows, columns=["date", "league", "home_team", "away_team",
                                        "home_goals", "away_goals"])
    frame["match_id"] = [f"{r.league}:{r.date:%Y%m%d}:{r.home_team}-{r.away_team}"
                         for r in frame.itertuples(index=False)]
    return frame, skipped, duplicates


def _read_canonical(raw: pd.DataFrame, path: Path, league: str | None):
    if "date" not in raw.columns:
        raise IngestError(f"{path}: canonical file lacks the 'date' column")
    frame = pd.DataFrame({
        "match_id": raw["match_id"],
        "date": pd.to_datetime(raw["date"], format="%Y-%m-%d"),
        "season": raw["season"],
        "league": raw["league"] if "league" in raw.columns else (league or path.stem),
        "home_team": raw["home_team"],
        "away_team": raw["away_team"],
        "home_goals": raw["home_goals"].astype(int),
        "away_goals": raw["away_goals"].astype(int),
    })
    return frame, 0, 0


def ingest_csv(paths: str | Path | Sequence[str | Path], date_format_hint: str | None = None,
               league: str | None = None) -> LeagueDataset:
    """Read one or more results files into a single date-sorted dataset.

    Accepts football-data.co.uk style files (Date, HomeTeam, AwayTeam, FTHG,
    FTAG; other columns ignored) and the canonical files written by
    :meth:`LeagueDataset.to_csv`.  Rows without a usable score are skipped and
    counted, exact duplicate rows are dropped and counted.
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    frames, skipped, dups = [], 0, 0
    for p in paths:
        p = Path(p)
        if not p.exists():
            raise IngestError(f"{p}: no such file")
        frame, s, d = _read_raw(p, date_format_hint, league)
        frames.append(frame)
        skipped += s
        dups += d
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()
    if frame.empty:
        empty = pd.DataFrame({c: pd.Series(dtype=object) for c in CANONICAL_COLUMNS + EXTRA_COLUMNS})
        empty["date"] = pd.Series(dtype="datetime64[ns]")
        return LeagueDataset.from_frame(empty, skipped_rows=skipped, duplicate_rows=dups)
    frame = frame.sort_values("date", kind="stable").reset_index(drop=True)
    return LeagueDataset.from_frame(frame, skipped_rows=skipped, duplicate_rows=dups)


def window(dataset: LeagueDataset, t: int) -> LeagueDataset:
    return dataset.window(t)


def prediction_calendar(dataset: LeagueDataset, burn_in_seasons: int) -> list[int]:
    """Match days after the burn-in seasons that fall in October-April."""
    seasons = dataset.seasons
    if len(seasons) < burn_in_seasons + 1:
        raise ValueError(
            f"dataset spans {len(seasons)} season(s); need at least {burn_in_seasons + 1} "
            f"for a burn-in of {burn_in_seasons}")
    keep = set(seasons[burn_in_seasons:])
    df = dataset.matches
    mask = df["season"].isin(keep) & df["date"].dt.month.isin(PREDICTION_MONTHS)
    return sorted(int(t) for t in df.loc[mask, "t"].unique())


def team_index(teams: Iterable[str]) -> dict[str, int]:
    return {name: i for i, name in enumerate(teams)}

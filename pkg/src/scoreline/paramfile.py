"""Flat key-value parameter files and the JSON-lines fit log.

One ``key = value`` pair per line; lines starting with ``#`` are comments.  Scalars use the
keys ``model``, ``gamma``, ``xi`` plus ``rho`` (Dixon-Coles) or ``theta1``,
``theta2``, ``theta3`` (Mar-Co).  Team effects use ``alpha[<team>]`` and
``beta[<team>]``.  Floats are written with ``repr`` so files round-trip
exactly.
"""
from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .dixon_coles import DcParams, RatingSet
from .marco import MarcoParams

_TEAM_KEY = re.compile(r"^(alpha|beta)\[(.+)\]$")


def format_params(params: DcParams | MarcoParams) -> str:
    r = params.ratings
    lines = ["# scoreline parameter file", f"model = {params.model}",
             f"gamma = {float(r.gamma)!r}", f"xi = {float(params.xi)!r}"]
    if params.model == "dc":
        lines.append(f"rho = {float(params.rho)!r}")
    else:
        lines += [f"theta{i + 1} = {float(v)!r}" for i, v in enumerate(params.theta)]
    for name, a, b in zip(r.teams, r.alpha, r.beta):
        lines.append(f"alpha[{name}] = {float(a)!r}")
        lines.append(f"beta[{name}] = {float(b)!r}")
    return "\n".join(lines) + "\n"


def write_params(params: DcParams | MarcoParams, path) -> None:
    Path(path).write_text(format_params(params))


def parse_params(text: str) -> DcParams | MarcoParams:
    scalars: dict[str, str] = {}
    alpha: dict[str, float] = {}
    beta: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.rpartition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = key.strip(), value.strip()
        m = _TEAM_KEY.match(key)
        if m:
            (alpha if m.group(1) == "alpha" else beta)[m.group(2)] = float(value)
        else:
            scalars[key] = value
    if set(alpha) != set(beta):
        raise ValueError("alpha and beta entries name different teams")
    for key in ("model", "gamma", "xi"):
        if key not in scalars:
            raise ValueError(f"parameter file lacks {key!r}")
    teams = list(alpha)
    ratings = RatingSet(teams, np.array([alpha[n] for n in teams]),
                        np.array([beta[n] for n in teams]), float(scalars["gamma"]))
    xi = float(scalars["xi"])
    model = scalars["model"]
    if model == "dc":
        return DcParams(ratings, float(scalars.get("rho", 0.0)), xi)
    if model == "marco":
        missing = [f"theta{i}" for i in (1, 2, 3) if f"theta{i}" not in scalars]
        if missing:
            raise ValueError(f"parameter file lacks {', '.join(missing)}")
        theta = tuple(float(scalars[f"theta{i}"]) for i in (1, 2, 3))
        return MarcoParams(ratings, theta, xi)
    raise ValueError(f"unknown model {model!r} in parameter file")


def read_params(path) -> DcParams | MarcoParams:
    return parse_params(Path(path).read_text())


def append_fit_log(path, records) -> None:
    """Append fit records (dicts) as JSON lines."""
    with open(path, "a") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_fit_log(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]

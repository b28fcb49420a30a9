"""Seed streams and the bounded worker pool used by replicate loops.

Every random stream derives from one root seed: ``stream(seed, "name")``
is ``SeedSequence(seed, spawn_key=(crc32(name),))`` and replicate ``i`` of
a named loop uses that sequence's ``i``-th spawned child.  Results therefore
do not depend on the number of workers.
"""
from __future__ import annotations

import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")


def seed_sequence(seed: int, name: str) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=(zlib.crc32(name.encode()),))


def stream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, name))


def replicate_rngs(seed: int, name: str, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in seed_sequence(seed, name).spawn(n)]


def default_jobs() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def pmap(fn: Callable[[T], R], items: Iterable[T], jobs: int | None = 1) -> list[R]:
    """Ordered map over ``items`` using up to ``jobs`` worker processes."""
    items = list(items)
    jobs = default_jobs() if jobs is None else jobs
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as ex:
        return list(ex.map(fn, items))

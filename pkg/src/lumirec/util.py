"""Shared plumbing: seed derivation, deterministic parallelism, canonical JSON."""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Iterable, Sequence

import numpy as np

MINUTES_PER_DAY = 1440


def derive_seed(master: int, *names: Any) -> int:
    """Derive a named child seed from a master seed.

    Stable across runs and platforms: the derivation hashes the master seed
    together with the name path, so every stochastic task in the pipeline
    owns an independent stream reproducible from one global seed.
    """
    payload = json.dumps([int(master), *[str(n) for n in names]]).encode()
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(master: int, *names: Any) -> np.random.Generator:
    """Generator seeded by ``derive_seed(master, *names)``."""
    return np.random.default_rng(derive_seed(master, *names))


def parallel_map(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """Map ``fn`` over ``items``, optionally on a thread pool.

    Results come back in input order, so output is independent of the
    thread count; tasks must carry their own derived seeds.
    """
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def canonical_json(obj: Any) -> str:
    """Serialize ``obj`` to byte-stable JSON (sorted keys, no whitespace drift)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_digest(obj: Any) -> str:
    """sha256 hex digest of the canonical JSON form of ``obj``."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def minutes_to_hhmm(minute: int) -> str:
    """Format a minute-of-day (0..1440) as HHMM; 1440 renders as 2400."""
    return f"{minute // 60:02d}{minute % 60:02d}"


def as_float_list(arr: Iterable) -> list[float]:
    """Plain-float list for JSON emission (numpy scalars are not serializable)."""
    return [float(v) for v in arr]

"""On-disk cache of (I_AB, chi_BE) evaluations.

Entries are small JSON files named by a SHA-256 key; floats are stored with
``float.hex`` so a hit reproduces the computed value bit for bit.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path

log = logging.getLogger(__name__)

CACHE_ENV = "CVQKD_PAS_CACHE"
SCHEMA = 1


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "cvqkd-pas"


def _canon(x):
    if isinstance(x, float):
        return x.hex()
    if isinstance(x, dict):
        return {k: _canon(v) for k, v in sorted(x.items())}
    if isinstance(x, (list, tuple)):
        return [_canon(v) for v in x]
    return x


def cache_key(point: dict) -> str:
    """Stable hash of a point description (floats hashed by exact bits)."""
    blob = json.dumps({"schema": SCHEMA, "point": _canon(point)}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class CachedValue:
    i_ab: float
    chi_be: float
    cutoff_used: int
    grid_points: int


@dataclass
class CacheStats:
    lookups: int = 0
    hits: int = 0
    writes: int = 0
    corrupt: int = 0


class EvaluationCache:
    """Directory-backed key-value store; safe for concurrent writers."""

    def __init__(self, directory: str | os.PathLike | None = None):
        self.directory = Path(directory) if directory is not None else default_cache_dir()
        self.directory.mkdir(parents=True, exist_ok=True)
        self.stats = CacheStats()

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> CachedValue | None:
        self.stats.lookups += 1
        path = self._path(key)
        if not path.exists():
            return None
        try:
            doc = json.loads(path.read_text())
            if doc.get("key") != key:
                raise ValueError("key mismatch")
            val = CachedValue(
                i_ab=float.fromhex(doc["i_ab"]),
                chi_be=float.fromhex(doc["chi_be"]),
                cutoff_used=int(doc["cutoff_used"]),
                grid_points=int(doc["grid_points"]),
            )
        except (ValueError, KeyError, TypeError) as exc:
            self.stats.corrupt += 1
            log.warning("corrupt cache entry %s (%s); recomputing", path.name, exc)
            return None
        self.stats.hits += 1
        return val

    def put(self, key: str, value: CachedValue) -> None:
        doc = asdict(value)
        doc["i_ab"] = value.i_ab.hex()
        doc["chi_be"] = value.chi_be.hex()
        doc["key"] = key
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            json.dump(doc, fh)
        os.replace(tmp, self._path(key))
        self.stats.writes += 1

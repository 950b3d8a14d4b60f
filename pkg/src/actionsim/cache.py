"""Content-addressed response cache shared by the caption and judge stages.

One JSON file per key under a two-character fan-out directory. Writes are
atomic (temp file + rename) and same-key fills are single-flight: concurrent
callers of get_or_fill for one key serialize on a per-key lock, so a response
is produced at most once per process.
"""

from __future__ import annotations

import logging
import threading
from pathlib import Path
from typing import Callable

from .ioutil import digest_payload, read_json, sha256_hex, write_json_atomic

logger = logging.getLogger(__name__)


class ResponseCache:
    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self.misses = 0
        self._registry_lock = threading.Lock()
        self._key_locks: dict[str, threading.Lock] = {}
        self._stats_lock = threading.Lock()

    @staticmethod
    def key_for(payload: dict) -> str:
        """Deterministic key from a canonical-JSON request payload."""
        return digest_payload(payload)

    def _entry_path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def _key_lock(self, key: str) -> threading.Lock:
        with self._registry_lock:
            lock = self._key_locks.get(key)
            if lock is None:
                lock = self._key_locks[key] = threading.Lock()
            return lock

    def get(self, key: str) -> str | None:
        """Cached response text, or None on miss or integrity failure."""
        path = self._entry_path(key)
        if not path.exists():
            with self._stats_lock:
                self.misses += 1
            return None
        entry = read_json(path)
        response = entry["response"]
        if sha256_hex(response) != entry.get("response_sha256"):
            logger.warning("cache entry %s failed integrity check, treating as miss", key[:12])
            with self._stats_lock:
                self.misses += 1
            return None
        with self._stats_lock:
            self.hits += 1
        return response

    def put(self, key: str, response: str, meta: dict | None = None) -> None:
        entry = {
            "response": response,
            "response_sha256": sha256_hex(response),
            "meta": meta or {},
        }
        write_json_atomic(self._entry_path(key), entry)

    def get_or_fill(self, key: str, fill: Callable[[], str], meta: dict | None = None) -> tuple[str, bool]:
        """Return (response, was_hit); fill and store on miss, single-flight per key."""
        with self._key_lock(key):
            cached = self.get(key)
            if cached is not None:
                return cached, True
            response = fill()
            self.put(key, response, meta)
            return response, False

    def scan_integrity(self) -> list[str]:
        """Keys of entries whose stored digest no longer matches the response."""
        bad = []
        for path in sorted(self.root.glob("*/*.json")):
            entry = read_json(path)
            if sha256_hex(entry.get("response", "")) != entry.get("response_sha256"):
                bad.append(path.stem)
        return bad

    @property
    def stats(self) -> dict[str, int]:
        with self._stats_lock:
            return {"hits": self.hits, "misses": self.misses}

"""Content-addressed response cache: keys, integrity, single-flight fills."""

from __future__ import annotations

import json
import threading

from actionsim.cache import ResponseCache


def test_key_is_canonical_over_key_order(tmp_path):
    a = ResponseCache.key_for({"kind": "judge", "prompt": "p", "params": {"t": 0}})
    b = ResponseCache.key_for({"params": {"t": 0}, "prompt": "p", "kind": "judge"})
    c = ResponseCache.key_for({"kind": "judge", "prompt": "q", "params": {"t": 0}})
    assert a == b
    assert a != c
    assert len(a) == 64


def test_round_trip_and_stats(tmp_path):
    cache = ResponseCache(tmp_path / "cache")
    key = cache.key_for({"x": 1})
    assert cache.get(key) is None
    cache.put(key, "a caption.", meta={"sample": "M1"})
    assert cache.get(key) == "a caption."
    assert cache.stats == {"hits": 1, "misses": 1}


def test_entries_fan_out_by_key_prefix(tmp_path):
    cache = ResponseCache(tmp_path / "cache")
    key = cache.key_for({"x": 1})
    cache.put(key, "text")
    entry = tmp_path / "cache" / key[:2] / f"{key}.json"
    assert entry.exists()
    stored = json.loads(entry.read_text())
    assert stored["response"] == "text"
    assert stored["meta"] == {}


def test_corrupted_entry_is_a_miss_and_is_reported(tmp_path):
    cache = ResponseCache(tmp_path / "cache")
    key = cache.key_for({"x": 1})
    cache.put(key, "original")
    entry = tmp_path / "cache" / key[:2] / f"{key}.json"
    doc = json.loads(entry.read_text())
    doc["response"] = "tampered"
    entry.write_text(json.dumps(doc))

    assert cache.get(key) is None  # digest mismatch reads as a miss
    assert cache.scan_integrity() == [key]
    untouched = ResponseCache(tmp_path / "cache2")
    assert untouched.scan_integrity() == []


def test_get_or_fill_is_single_flight(tmp_path):
    cache = ResponseCache(tmp_path / "cache")
    key = cache.key_for({"x": 1})
    fills = []
    barrier = threading.Barrier(8)

    def fill() -> str:
        fills.append(1)
        return "value"

    def worker(results, idx):
        barrier.wait()
        results[idx] = cache.get_or_fill(key, fill)

    results: dict[int, tuple[str, bool]] = {}
    threads = [threading.Thread(target=worker, args=(results, i)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    assert len(fills) == 1
    assert all(value == "value" for value, _ in results.values())
    assert sorted(hit for _, hit in results.values()) == [False] + [True] * 7


def test_get_or_fill_reports_hit_flag(tmp_path):
    cache = ResponseCache(tmp_path / "cache")
    key = cache.key_for({"x": 1})
    assert cache.get_or_fill(key, lambda: "v") == ("v", False)
    assert cache.get_or_fill(key, lambda: "other") == ("v", True)

"""Shared fixtures: one generated corpus per session, plus config-file helpers."""

from __future__ import annotations

from pathlib import Path

import pytest
import yaml

from actionsim.corpus import Corpus, load_manifest
from actionsim.synth import make_corpus


@pytest.fixture(scope="session")
def corpus_root(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("corpus")
    make_corpus(root, seed=0)
    return root


@pytest.fixture(scope="session")
def manifest_path(corpus_root: Path) -> Path:
    return corpus_root / "manifest.yaml"


@pytest.fixture(scope="session")
def corpus(manifest_path: Path) -> Corpus:
    return load_manifest(manifest_path)


@pytest.fixture
def make_config(manifest_path: Path, tmp_path: Path):
    """Write a run-config YAML under this test's tmp dir and return its path.

    Every config gets its own out_dir (and thus cache) unless the test
    overrides them, so tests cannot see each other's artifacts.
    """
    counter = {"n": 0}

    def _write(name: str | None = None, **fields) -> Path:
        counter["n"] += 1
        name = name or f"config-{counter['n']}.yaml"
        doc = {
            "manifest": str(manifest_path),
            "out_dir": str(tmp_path / f"out-{counter['n']}"),
            **fields,
        }
        path = tmp_path / name
        path.write_text(yaml.safe_dump(doc, sort_keys=False), encoding="utf-8")
        return path

    return _write

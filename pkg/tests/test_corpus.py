"""Manifest parsing, validation, and class partitioning."""

from __future__ import annotations

import pytest
import yaml

from actionsim.corpus import (
    Corpus,
    SampleId,
    SampleRecord,
    class_index_sets,
    load_manifest,
    parse_manifest,
    save_manifest,
    validate_corpus,
    without_sources,
)
from actionsim.errors import ManifestError


def test_sample_id_parse_and_render():
    sid = SampleId.parse(" M12 ")
    assert sid == SampleId("M", 12)
    assert str(sid) == "M12"


@pytest.mark.parametrize("bad", ["", "12", "M", "M0", "1M"])
def test_sample_id_rejects_malformed_text(bad):
    with pytest.raises(ManifestError):
        SampleId.parse(bad)


def test_sample_ids_sort_by_label_then_trial():
    ids = [SampleId("M", 2), SampleId("K", 1), SampleId("M", 1)]
    assert sorted(ids) == [SampleId("K", 1), SampleId("M", 1), SampleId("M", 2)]


def test_generated_manifest_loads_in_order(corpus):
    assert corpus.class_set == ("M", "K", "D", "R")
    assert [str(s) for s in corpus.sample_ids] == [
        f"{label}{trial}" for label in "MKDR" for trial in (1, 2, 3)
    ]
    record = corpus.record(SampleId("K", 2))
    assert record.native_rate_hz == 120.0
    assert record.joint_track is not None and record.joint_track.exists()
    assert record.cut_frame is not None and 49 <= record.cut_frame <= 60


def test_manifest_round_trip_uses_relative_paths(corpus, tmp_path):
    path = tmp_path / "copy" / "manifest.yaml"
    save_manifest(corpus, path)
    doc = yaml.safe_load(path.read_text())
    # Foreign absolute paths cannot be relativized, but ids and scalars survive.
    assert [s["id"] for s in doc["samples"]] == [str(s) for s in corpus.sample_ids]
    reloaded = load_manifest(path)
    assert reloaded.sample_ids == corpus.sample_ids
    assert [r.cut_frame for r in reloaded.samples] == [r.cut_frame for r in corpus.samples]


def test_manifest_round_trip_relativizes_inside_tree(manifest_path):
    doc = yaml.safe_load(manifest_path.read_text())
    for entry in doc["samples"]:
        assert not entry["source"].startswith("/")
        assert not entry["joint_track"].startswith("/")


def test_class_index_sets_partition(corpus):
    sets = class_index_sets(corpus)
    assert sorted(i for members in sets.values() for i in members) == list(range(12))
    assert sets["M"] == [0, 1, 2]
    assert sets["R"] == [9, 10, 11]


def test_parse_manifest_rejects_duplicates_and_unknown_labels(tmp_path):
    src = tmp_path / "frames"
    src.mkdir()
    (src / "00000.png").write_bytes(b"")  # existence is all validate checks here

    def doc(samples):
        return {"class_set": ["M", "K"], "samples": samples}

    entry = {"id": "M1", "source": str(src), "native_rate_hz": 120}
    with pytest.raises(ManifestError, match="duplicate sample id"):
        parse_manifest(doc([entry, entry]))
    with pytest.raises(ManifestError, match="unknown label"):
        parse_manifest(doc([{**entry, "id": "Z1"}]))
    with pytest.raises(ManifestError, match="missing required key"):
        parse_manifest(doc([{"id": "M1"}]))
    with pytest.raises(ManifestError, match="must be positive"):
        parse_manifest(doc([{**entry, "native_rate_hz": 0}]))


def test_parse_manifest_rejects_bad_roots():
    with pytest.raises(ManifestError, match="mapping"):
        parse_manifest(["not", "a", "mapping"])
    with pytest.raises(ManifestError, match="missing required key"):
        parse_manifest({"samples": []})


def test_load_manifest_missing_file(tmp_path):
    with pytest.raises(ManifestError, match="does not exist"):
        load_manifest(tmp_path / "nope.yaml")


def test_validate_corpus_checks_sources_and_cut(tmp_path):
    record = SampleRecord(
        id=SampleId("M", 1), source=tmp_path / "missing", native_rate_hz=120.0
    )
    corpus = Corpus(samples=(record,), class_set=("M",))
    with pytest.raises(ManifestError, match="does not exist"):
        validate_corpus(corpus)
    validate_corpus(corpus, check_sources=False)  # metadata-only mode passes

    src = tmp_path / "frames"
    src.mkdir()
    for i in range(3):
        (src / f"{i}.png").write_bytes(b"")
    over_cut = Corpus(
        samples=(
            SampleRecord(id=SampleId("M", 1), source=src, native_rate_hz=120.0, cut_frame=4),
        ),
        class_set=("M",),
    )
    with pytest.raises(ManifestError, match="exceeds native frame count"):
        validate_corpus(over_cut)


def test_validate_corpus_warns_on_empty_class(tmp_path, caplog):
    src = tmp_path / "frames"
    src.mkdir()
    (src / "0.png").write_bytes(b"")
    corpus = Corpus(
        samples=(SampleRecord(id=SampleId("M", 1), source=src, native_rate_hz=120.0),),
        class_set=("M", "K"),
    )
    with caplog.at_level("WARNING", logger="actionsim.corpus"):
        validate_corpus(corpus)
    assert any("class K has no samples" in r.message for r in caplog.records)


def test_without_sources_strips_paths(corpus):
    stripped = without_sources(corpus)
    assert stripped.sample_ids == corpus.sample_ids
    assert all(r.joint_track is None for r in stripped.samples)
    assert [str(r.source) for r in stripped.samples] == [str(r.id) for r in stripped.samples]

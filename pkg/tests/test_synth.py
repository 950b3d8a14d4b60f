"""Synthetic corpus: phase script structure and the rate-sensitivity signal.

The corpus is built so class-distinctive words live on single native frames.
These tests pin the visibility schedule that the dropout simulation relies
on: at 120 Hz a class's target word lands in several clips, at 60 and 30 Hz
in exactly one.
"""

from __future__ import annotations

import statistics

from actionsim.caption import CaptionerSpec, MockCaptionBackend, describe_sample
from actionsim.corpus import SampleId
from actionsim.frames import decimate, extract_frames, segment_clips
from actionsim.judge import JudgeSpec, LexicalOracleJudge, tokenize
from actionsim.matrix import MatrixSpec, build_matrix
from actionsim.synth import (
    CLASS_LABELS,
    FRAME_COUNT,
    TRIALS_PER_CLASS,
    annotation_for,
    cut_frame_for,
    mean_accuracy,
    phase_table,
    rate_sensitivity,
)

TARGETS = {"M": "head", "K": "wrist", "D": "torso", "R": "guard"}
CALLS = {"M": "men", "K": "kote", "D": "do", "R": "yame"}


def test_phase_table_tiles_the_native_timeline():
    for label in CLASS_LABELS:
        rows = phase_table(label)
        assert rows[0][0] == 0
        assert rows[-1][1] == FRAME_COUNT
        for (_, end, _), (start, _, _) in zip(rows, rows[1:]):
            assert end == start
        assert all(end > start for start, end, _ in rows)


def test_flash_rows_are_single_frames():
    for label in CLASS_LABELS:
        flash_rows = [r for r in phase_table(label) if TARGETS[label] in r[2]]
        assert len(flash_rows) == 6
        assert all(end - start == 1 for start, end, _ in flash_rows)
        assert [start for start, _, _ in flash_rows] == [33, 44, 49, 111, 115, 129]


def test_annotations_mention_targets_only_on_flash_frames():
    for label in CLASS_LABELS:
        hits = [
            i for i in range(FRAME_COUNT)
            if TARGETS[label] in tokenize(annotation_for(label, 1, i))
        ]
        assert hits == [33, 44, 49, 111, 115, 129]
        call_hits = [
            i for i in range(FRAME_COUNT)
            if CALLS[label] in tokenize(annotation_for(label, 1, i))
        ]
        assert call_hits == [111, 115, 129]


def test_no_target_word_leaks_into_base_phrases():
    reserved = set(TARGETS.values()) | set(CALLS.values())
    flash_starts = {33, 44, 49, 111, 115, 129}
    for label in CLASS_LABELS:
        for start, _end, phrase in phase_table(label):
            if start in flash_starts:
                continue  # flash rows carry the class words by design
            assert not (tokenize(phrase) & reserved), (label, phrase)


def test_trial_fillers_differ_between_trials():
    a = annotation_for("M", 1, 20)  # approach phase
    b = annotation_for("M", 2, 20)
    assert a != b
    assert annotation_for("M", 1, 20) == a  # deterministic


def test_cut_frames_sit_between_windup_and_strike():
    cuts = {cut_frame_for(label, t) for label in CLASS_LABELS for t in (1, 2, 3)}
    assert cuts == set(range(49, 61))


def test_target_words_survive_at_120hz_only(corpus):
    backend = MockCaptionBackend()
    spec = CaptionerSpec(min_frames=16)
    for label in CLASS_LABELS:
        record = corpus.record(SampleId(label, 1))
        native = extract_frames(record)
        per_rate = {}
        for rate in (120, 60, 30):
            clips = segment_clips(decimate(native, rate), 16)
            seq = describe_sample(clips, spec, backend)
            per_rate[rate] = [tokenize(text) for text in seq.texts()]
        target, call = TARGETS[label], CALLS[label]
        assert sum(target in s for s in per_rate[120]) == 5
        assert sum(call in s for s in per_rate[120]) == 3
        # Down-sampled variants keep only the frame-44 flash, in one clip.
        assert sum(target in s for s in per_rate[60]) == 1
        assert sum(target in s for s in per_rate[30]) == 1
        assert sum(call in s for s in per_rate[60]) == 0
        assert sum(call in s for s in per_rate[30]) == 0


def test_noise_free_similarity_structure(corpus):
    """With no dropout the oracle matrix has a closed form."""
    backend = MockCaptionBackend()
    spec = CaptionerSpec(min_frames=16)
    order = list(corpus.sample_ids)
    sequences = []
    for record in corpus.samples:
        clips = segment_clips(extract_frames(record), 16)
        sequences.append(describe_sample(clips, spec, backend))
    matrix = build_matrix(sequences, order, JudgeSpec(), LexicalOracleJudge(), MatrixSpec())

    for i, a in enumerate(corpus.samples):
        for j, b in enumerate(corpus.samples):
            value = matrix.values[i][j]
            if i == j:
                assert value == 100.0
            elif a.id.label_code == b.id.label_code:
                assert value == 96.0, (a.id, b.id)
            elif a.id.trial_index == b.id.trial_index:
                assert value == 91.0, (a.id, b.id)
            else:
                assert value == 87.0, (a.id, b.id)


def test_rate_sensitivity_is_perfect_without_noise(manifest_path):
    results = rate_sensitivity(
        manifest_path, dropout_by_rate={120: 0.0, 60: 0.0, 30: 0.0}, seeds=(0,)
    )
    assert mean_accuracy(results) == {120: 100.0, 60: 100.0, 30: 100.0}


def test_mean_accuracy_averages_per_rate():
    assert mean_accuracy({120: [100.0, 50.0], 30: [0.0]}) == {120: 75.0, 30: 0.0}
    assert statistics.mean([100.0, 50.0]) == 75.0


def test_corpus_has_three_trials_per_class(corpus):
    assert len(corpus.samples) == len(CLASS_LABELS) * TRIALS_PER_CLASS
    for label in CLASS_LABELS:
        trials = [r.id.trial_index for r in corpus.samples if r.id.label_code == label]
        assert trials == [1, 2, 3]

"""Frame-sequence transformations: decimation, truncation, segmentation."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from actionsim.corpus import SampleId
from actionsim.errors import IngestError
from actionsim.frames import (
    Clip,
    Frame,
    FrameSequence,
    decimate,
    extract_frames,
    segment_clips,
    truncate_partial,
)

_IMG = Image.new("L", (2, 2), color=0)


def make_seq(n_frames: int, rate_hz: float = 120.0, native_stride: int = 1) -> FrameSequence:
    frames = tuple(
        Frame(index_native=i * native_stride, timestamp_s=i / rate_hz, image=_IMG)
        for i in range(n_frames)
    )
    return FrameSequence(sample_id=SampleId("T", 1), rate_hz=rate_hz, frames=frames)


def indices(seq: FrameSequence) -> list[int]:
    return [f.index_native for f in seq.frames]


def test_frame_sequence_rejects_non_increasing_indices():
    frames = (
        Frame(index_native=0, timestamp_s=0.0, image=_IMG),
        Frame(index_native=0, timestamp_s=0.01, image=_IMG),
    )
    with pytest.raises(IngestError, match="strictly increasing"):
        FrameSequence(sample_id=SampleId("T", 1), rate_hz=120.0, frames=frames)


def test_decimate_identity_at_same_rate():
    seq = make_seq(10)
    assert decimate(seq, 120.0) is seq


def test_decimate_keeps_multiples_of_stride():
    seq = make_seq(300)
    half = decimate(seq, 60)
    assert indices(half) == list(range(0, 300, 2))
    assert half.rate_hz == 60
    assert half.provenance == ("native", "decimated")
    quarter = decimate(seq, 30)
    assert indices(quarter) == list(range(0, 300, 4))


def test_decimate_accounts_for_prior_decimation():
    # A 60 Hz stream has native stride 2; a further 2x cut keeps multiples of 4.
    seq = decimate(make_seq(300), 60)
    again = decimate(seq, 30)
    assert indices(again) == list(range(0, 300, 4))


def test_decimate_rejects_upsampling_and_non_integer_strides():
    seq = make_seq(20)
    with pytest.raises(IngestError, match="exceeds"):
        decimate(seq, 240)
    with pytest.raises(IngestError, match="non-integer"):
        decimate(seq, 50)
    with pytest.raises(IngestError, match="positive"):
        decimate(seq, 0)


def test_decimate_rejects_irregular_stride():
    frames = tuple(
        Frame(index_native=i, timestamp_s=i / 120.0, image=_IMG) for i in (0, 1, 3)
    )
    seq = FrameSequence(sample_id=SampleId("T", 1), rate_hz=120.0, frames=frames)
    with pytest.raises(IngestError, match="non-uniform"):
        decimate(seq, 60)


@settings(max_examples=60, deadline=None)
@given(n_frames=st.integers(min_value=1, max_value=360))
def test_decimation_subset_and_composition(n_frames: int):
    seq = make_seq(n_frames)
    half = decimate(seq, 60)
    quarter = decimate(seq, 30)
    assert set(indices(quarter)) <= set(indices(half)) <= set(indices(seq))
    assert indices(decimate(half, 30)) == indices(quarter)


@settings(max_examples=60, deadline=None)
@given(
    n_frames=st.integers(min_value=1, max_value=360),
    cut=st.integers(min_value=1, max_value=360),
)
def test_truncation_commutes_with_decimation(n_frames: int, cut: int):
    seq = make_seq(n_frames)

    def attempt(transformed):
        try:
            return indices(transformed())
        except IngestError:
            return None

    assert attempt(lambda: truncate_partial(decimate(seq, 60), cut)) == attempt(
        lambda: decimate(truncate_partial(seq, cut), 60)
    )


def test_truncate_keeps_strictly_before_cut():
    seq = make_seq(100)
    cut = truncate_partial(seq, 30)
    assert indices(cut) == list(range(30))
    assert cut.provenance == ("native", "truncated")


def test_truncate_empty_result_is_an_error():
    seq = decimate(make_seq(100), 30)  # first surviving index is 0
    with pytest.raises(IngestError, match="empty after truncation"):
        truncate_partial(truncate_partial(seq, 4), 0)
    with pytest.raises(IngestError, match="non-negative"):
        truncate_partial(seq, -1)


def test_segment_clips_drops_trailing_remainder():
    seq = make_seq(300)
    clips = segment_clips(seq, 16)
    assert len(clips) == 18
    assert all(len(c.frames) == 16 for c in clips)
    assert [c.k for c in clips] == list(range(1, 19))
    covered = [f.index_native for c in clips for f in c.frames]
    assert covered == list(range(288))  # 12 trailing frames dropped


def test_segment_clips_short_sequence_yields_nothing():
    assert segment_clips(make_seq(15), 16) == []
    with pytest.raises(IngestError):
        segment_clips(make_seq(15), 0)


@settings(max_examples=60, deadline=None)
@given(
    n_frames=st.integers(min_value=1, max_value=360),
    length=st.integers(min_value=1, max_value=32),
)
def test_segmentation_tiles_the_prefix(n_frames: int, length: int):
    seq = make_seq(n_frames)
    clips = segment_clips(seq, length)
    assert len(clips) == n_frames // length
    flat = [f.index_native for c in clips for f in c.frames]
    assert flat == indices(seq)[: len(clips) * length]


def test_clip_digest_tracks_content():
    def clip_with(annotation: str | None, shade: int = 0) -> Clip:
        img = Image.new("L", (2, 2), color=shade)
        frame = Frame(index_native=0, timestamp_s=0.0, image=img, annotation=annotation)
        return Clip(sample_id=SampleId("T", 1), k=1, frames=(frame,))

    base = clip_with("a step")
    assert base.content_digest() == clip_with("a step").content_digest()
    assert base.content_digest() != clip_with("a different step").content_digest()
    assert base.content_digest() != clip_with("a step", shade=7).content_digest()
    # Memoized: repeated calls return the identical string object.
    assert base.content_digest() is base.content_digest()


def test_extract_frames_reads_rasters_and_script(corpus):
    record = corpus.record(SampleId("M", 1))
    seq = extract_frames(record)
    assert len(seq) == 300
    assert seq.rate_hz == 120.0
    assert indices(seq) == list(range(300))
    assert all(f.annotation for f in seq.frames)
    assert seq.frames[0].timestamp_s == 0.0
    assert seq.frames[120].timestamp_s == pytest.approx(1.0)

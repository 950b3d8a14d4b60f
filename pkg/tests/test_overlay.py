"""Joint-track persistence and skeleton overlay rendering."""

from __future__ import annotations

import pytest
from PIL import Image

from actionsim.corpus import SampleId
from actionsim.errors import OverlayError
from actionsim.frames import Frame, FrameSequence
from actionsim.overlay import (
    UPPER_BODY_JOINTS,
    JointTrack,
    OverlayStyle,
    load_joint_track,
    render_overlay,
    save_joint_track,
)


def track_with(confidence: float = 0.9, x: float = 10.0, y: float = 10.0,
               n_frames: int = 4) -> JointTrack:
    entries = tuple((x, y, confidence) for _ in UPPER_BODY_JOINTS)
    return JointTrack(
        joints=UPPER_BODY_JOINTS,
        per_frame={i: entries for i in range(n_frames)},
    )


def seq_of(n: int, size=(32, 24), mode="L") -> FrameSequence:
    img = Image.new(mode, size, color=0)
    frames = tuple(
        Frame(index_native=i, timestamp_s=i / 120.0, image=img) for i in range(n)
    )
    return FrameSequence(sample_id=SampleId("M", 1), rate_hz=120.0, frames=frames)


def test_track_round_trip(tmp_path):
    track = track_with()
    path = tmp_path / "track.tsv"
    save_joint_track(track, path)
    loaded = load_joint_track(path)
    assert loaded.joints == track.joints
    assert sorted(loaded.per_frame) == sorted(track.per_frame)
    x, y, c = loaded.per_frame[0][0]
    assert (x, y, c) == (10.0, 10.0, 0.9)


def test_load_joint_track_rejects_malformed_files(tmp_path):
    path = tmp_path / "track.tsv"
    path.write_text("")
    with pytest.raises(OverlayError, match="empty"):
        load_joint_track(path)
    path.write_text("frame\thead.x\thead.y\n0\t1\t2\n")
    with pytest.raises(OverlayError, match="header"):
        load_joint_track(path)
    path.write_text("frame\thead.x\thead.y\thead.c\n0\t1\t2\n")
    with pytest.raises(OverlayError, match="cells"):
        load_joint_track(path)
    path.write_text("frame\thead.x\thead.y\thead.c\n0\t1\t2\t1.5\n")
    with pytest.raises(OverlayError, match="confidence"):
        load_joint_track(path)
    path.write_text("frame\tneck.x\tneck.y\tneck.c\thead.x\thead.y\thead.c\n")
    with pytest.raises(OverlayError, match="name-ordered"):
        load_joint_track(path)


def test_render_overlay_promotes_to_rgb_and_draws():
    seq = seq_of(4)
    out = render_overlay(seq, track_with())
    assert all(f.image.mode == "RGB" for f in out.frames)
    assert out.provenance == ("native", "overlaid")
    assert [f.index_native for f in out.frames] == [0, 1, 2, 3]
    # Something visibly changed near the joint cluster.
    assert out.frames[0].image.getpixel((10, 10)) != (0, 0, 0)


def test_render_overlay_skips_low_confidence_joints():
    seq = seq_of(2)
    ghost = render_overlay(seq, track_with(confidence=0.05))
    assert ghost.frames[0].image.getpixel((10, 10)) == (0, 0, 0)
    lenient = render_overlay(
        seq, track_with(confidence=0.05), OverlayStyle(confidence_threshold=0.01)
    )
    assert lenient.frames[0].image.getpixel((10, 10)) != (0, 0, 0)


def test_render_overlay_requires_full_track_coverage():
    seq = seq_of(6)
    with pytest.raises(OverlayError, match="missing entries"):
        render_overlay(seq, track_with(n_frames=3))


def test_render_overlay_clips_out_of_bounds_coordinates(caplog):
    seq = seq_of(2)
    with caplog.at_level("WARNING", logger="actionsim.overlay"):
        out = render_overlay(seq, track_with(x=500.0, y=-40.0))
    assert len(out.frames) == 2  # never fatal
    assert any("clipped" in r.message.lower() for r in caplog.records)


def test_render_overlay_preserves_annotations():
    img = Image.new("L", (16, 16), color=0)
    frames = tuple(
        Frame(index_native=i, timestamp_s=i / 120.0, image=img, annotation=f"note {i}")
        for i in range(2)
    )
    seq = FrameSequence(sample_id=SampleId("M", 1), rate_hz=120.0, frames=frames)
    out = render_overlay(seq, track_with(n_frames=2))
    assert [f.annotation for f in out.frames] == ["note 0", "note 1"]


def test_generated_tracks_cover_all_native_frames(corpus):
    record = corpus.record(SampleId("D", 3))
    track = load_joint_track(record.joint_track)
    assert track.joints == UPPER_BODY_JOINTS
    assert sorted(track.per_frame) == list(range(300))

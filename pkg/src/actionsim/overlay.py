"""Skeleton overlay rendering from per-frame joint tracks.

Joint tracks are consumed from files (the tracking itself is out of scope).
Track file format: tab-separated, one row per native frame. The header row is
``frame`` followed by ``<joint>.x  <joint>.y  <joint>.c`` triplets in
name-sorted joint order; confidences lie in [0, 1].
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from PIL import ImageDraw

from .errors import OverlayError
from .frames import Frame, FrameSequence

logger = logging.getLogger(__name__)

# Upper-body joint set used by the bundled tracks and the synthetic corpus.
UPPER_BODY_JOINTS = (
    "head",
    "left_elbow",
    "left_shoulder",
    "left_wrist",
    "neck",
    "right_elbow",
    "right_shoulder",
    "right_wrist",
)

UPPER_BODY_EDGES = (
    ("head", "neck"),
    ("neck", "left_shoulder"),
    ("neck", "right_shoulder"),
    ("left_shoulder", "left_elbow"),
    ("left_elbow", "left_wrist"),
    ("right_shoulder", "right_elbow"),
    ("right_elbow", "right_wrist"),
)

# Fixed joint-name -> color table; unknown joints fall back to a palette slot
# chosen by track order, so every joint in one track gets a distinct color.
JOINT_COLORS: Mapping[str, tuple[int, int, int]] = {
    "head": (228, 26, 28),
    "neck": (255, 127, 0),
    "left_shoulder": (255, 217, 47),
    "right_shoulder": (77, 175, 74),
    "left_elbow": (102, 194, 165),
    "right_elbow": (55, 126, 184),
    "left_wrist": (152, 78, 163),
    "right_wrist": (247, 129, 191),
}

_FALLBACK_PALETTE = (
    (166, 206, 227), (31, 120, 180), (178, 223, 138), (51, 160, 44),
    (251, 154, 153), (227, 26, 28), (253, 191, 111), (255, 127, 0),
    (202, 178, 214), (106, 61, 154), (255, 255, 153), (177, 89, 40),
)


@dataclass(frozen=True)
class JointTrack:
    joints: tuple[str, ...]
    per_frame: Mapping[int, tuple[tuple[float, float, float], ...]]

    def entry(self, index_native: int) -> tuple[tuple[float, float, float], ...]:
        try:
            return self.per_frame[index_native]
        except KeyError:
            raise OverlayError(f"joint track has no entry for native frame {index_native}") from None


@dataclass(frozen=True)
class OverlayStyle:
    """Deterministic drawing parameters, scaled to the raster height."""

    edges: tuple[tuple[str, str], ...] = UPPER_BODY_EDGES
    marker_radius_frac: float = 0.04
    line_width_frac: float = 0.02
    confidence_threshold: float = 0.1
    colors: Mapping[str, tuple[int, int, int]] = field(default_factory=lambda: dict(JOINT_COLORS))


def joint_color(name: str, track_joints: Sequence[str], style: OverlayStyle) -> tuple[int, int, int]:
    color = style.colors.get(name)
    if color is not None:
        return color
    return _FALLBACK_PALETTE[list(track_joints).index(name) % len(_FALLBACK_PALETTE)]


def load_joint_track(path: Path | str) -> JointTrack:
    path = Path(path)
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise OverlayError(f"joint track {path} is empty")
    header = lines[0].split("\t")
    if header[0] != "frame" or (len(header) - 1) % 3 != 0:
        raise OverlayError(f"joint track {path}: malformed header")
    joints = tuple(col[: -len(".x")] for col in header[1::3])
    if list(joints) != sorted(joints):
        raise OverlayError(f"joint track {path}: joints must be name-ordered, got {joints}")

    per_frame: dict[int, tuple[tuple[float, float, float], ...]] = {}
    for line in lines[1:]:
        cells = line.split("\t")
        if len(cells) != 1 + 3 * len(joints):
            raise OverlayError(f"joint track {path}: row has {len(cells)} cells, expected {1 + 3 * len(joints)}")
        index = int(cells[0])
        entries = []
        for j in range(len(joints)):
            x, y, conf = (float(cells[1 + 3 * j + o]) for o in range(3))
            if not 0.0 <= conf <= 1.0:
                raise OverlayError(f"joint track {path}: confidence {conf} outside [0, 1] at frame {index}")
            entries.append((x, y, conf))
        per_frame[index] = tuple(entries)
    return JointTrack(joints=joints, per_frame=per_frame)


def save_joint_track(track: JointTrack, path: Path | str) -> None:
    path = Path(path)
    header = ["frame"]
    for name in track.joints:
        header += [f"{name}.x", f"{name}.y", f"{name}.c"]
    rows = ["\t".join(header)]
    for index in sorted(track.per_frame):
        cells = [str(index)]
        for x, y, conf in track.per_frame[index]:
            cells += [f"{x:.2f}", f"{y:.2f}", f"{conf:.3f}"]
        rows.append("\t".join(cells))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def render_overlay(seq: FrameSequence, track: JointTrack, style: OverlayStyle | None = None) -> FrameSequence:
    """Draw colored joint markers and skeleton edges onto every frame.

    Monochrome frames are promoted to RGB so colors are expressible. Joints
    below the confidence threshold are not drawn; an edge needs both of its
    endpoints above threshold. Out-of-bounds coordinates are clipped to the
    raster and warned about, never fatal. Frame indices, timestamps, and
    annotations are preserved.
    """
    style = style or OverlayStyle()
    missing = [f.index_native for f in seq.frames if f.index_native not in track.per_frame]
    if missing:
        raise OverlayError(f"sample {seq.sample_id}: joint track missing entries for frames {missing[:5]}")

    edge_indices = []
    joint_pos = {name: i for i, name in enumerate(track.joints)}
    for a, b in style.edges:
        if a in joint_pos and b in joint_pos:
            edge_indices.append((joint_pos[a], joint_pos[b]))

    clipped = 0
    out_frames = []
    for frame in seq.frames:
        image = frame.image.convert("RGB")
        width, height = image.size
        radius = max(1, round(style.marker_radius_frac * height))
        line_width = max(1, round(style.line_width_frac * height))
        entries = track.entry(frame.index_native)

        def place(x: float, y: float) -> tuple[float, float]:
            nonlocal clipped
            cx = min(max(x, 0.0), width - 1.0)
            cy = min(max(y, 0.0), height - 1.0)
            if cx != x or cy != y:
                clipped += 1
            return cx, cy

        draw = ImageDraw.Draw(image)
        for ia, ib in edge_indices:
            xa, ya, ca = entries[ia]
            xb, yb, cb = entries[ib]
            if ca < style.confidence_threshold or cb < style.confidence_threshold:
                continue
            color = joint_color(track.joints[ia], track.joints, style)
            draw.line([place(xa, ya), place(xb, yb)], fill=color, width=line_width)
        for j, name in enumerate(track.joints):
            x, y, conf = entries[j]
            if conf < style.confidence_threshold:
                continue
            cx, cy = place(x, y)
            color = joint_color(name, track.joints, style)
            draw.ellipse([cx - radius, cy - radius, cx + radius, cy + radius], fill=color)

        out_frames.append(
            Frame(
                index_native=frame.index_native,
                timestamp_s=frame.timestamp_s,
                image=image,
                annotation=frame.annotation,
            )
        )

    if clipped:
        logger.warning("sample %s: clipped %d out-of-bounds joint coordinates", seq.sample_id, clipped)
    return FrameSequence(
        sample_id=seq.sample_id,
        rate_hz=seq.rate_hz,
        frames=tuple(out_frames),
        provenance=seq.provenance + ("overlaid",),
    )

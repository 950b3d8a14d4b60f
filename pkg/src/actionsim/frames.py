"""Frame sequences and their transformations.

All operations here are pure: they return new sequences and never mutate
input frames, so samples can be processed in parallel without locking.
Decimation keeps every stride-th frame starting at native index 0 (phase 0),
which makes cross-rate comparisons frame-aligned and gives the subset /
composition / commutation guarantees the verification suite checks.
"""

from __future__ import annotations

import hashlib
import logging
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

from PIL import Image

from .corpus import IMAGE_SUFFIXES, SampleId, SampleRecord
from .errors import IngestError

logger = logging.getLogger(__name__)

MOTION_SCRIPT_FILENAME = "motion_script.tsv"


@dataclass(frozen=True)
class Frame:
    """One raster frame; ``index_native`` is its position in the native-rate stream."""

    index_native: int
    timestamp_s: float
    image: Image.Image
    annotation: str | None = None


@dataclass(frozen=True)
class FrameSequence:
    sample_id: SampleId
    rate_hz: float
    frames: tuple[Frame, ...]
    provenance: tuple[str, ...] = ("native",)

    def __post_init__(self) -> None:
        indices = [f.index_native for f in self.frames]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise IngestError(f"sample {self.sample_id}: frame indices must be strictly increasing")

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class Clip:
    """One non-overlapping window of consecutive frames; k is 1-based."""

    sample_id: SampleId
    k: int
    frames: tuple[Frame, ...]

    def content_digest(self) -> str:
        """Digest of raster bytes plus per-frame annotations (cache identity).

        Memoized: clips are immutable and repeated runs over the same clip
        (e.g. multi-seed simulations) would otherwise rehash every frame.
        """
        cached = self.__dict__.get("_content_digest")
        if cached is not None:
            return cached
        h = hashlib.sha256()
        for frame in self.frames:
            img = frame.image
            h.update(img.mode.encode())
            h.update(f"{img.size[0]}x{img.size[1]}".encode())
            h.update(img.tobytes())
            h.update(b"\x00")
            h.update((frame.annotation or "").encode("utf-8"))
            h.update(b"\x01")
        digest = h.hexdigest()
        object.__setattr__(self, "_content_digest", digest)
        return digest


def _load_motion_script(path: Path) -> dict[int, str]:
    notes: dict[int, str] = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        index_text, _, text = line.partition("\t")
        notes[int(index_text)] = text
    return notes


def _frames_from_directory(record: SampleRecord) -> list[Path]:
    files = sorted(p for p in record.source.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise IngestError(f"sample {record.id}: zero frames in {record.source}")
    return files


def _decode_video(record: SampleRecord, out_dir: Path) -> list[Path]:
    decoder = shutil.which("ffmpeg")
    if decoder is None:
        raise IngestError(f"sample {record.id}: no video decoder (ffmpeg) available for {record.source}")
    cmd = [
        decoder,
        "-loglevel", "error",
        "-i", str(record.source),
        "-vsync", "0",
        "-start_number", "0",
        str(out_dir / "%08d.png"),
    ]
    result = subprocess.run(cmd, capture_output=True, text=True)
    if result.returncode != 0:
        raise IngestError(f"sample {record.id}: decoder failed: {result.stderr.strip()}")
    files = sorted(out_dir.glob("*.png"))
    if not files:
        raise IngestError(f"sample {record.id}: decoder produced zero frames")
    return files


def extract_frames(record: SampleRecord) -> FrameSequence:
    """Extract the native-rate frame sequence for one sample.

    Directory sources are read in lexicographic filename order; video
    containers are decoded frame-accurately via ffmpeg. If the source
    directory carries a ``motion_script.tsv`` sidecar (one ``index<TAB>text``
    row per annotated frame), annotations are attached to the frames.
    """
    if not record.source.exists():
        raise IngestError(f"sample {record.id}: source {record.source} does not exist")

    annotations: dict[int, str] = {}
    tmp_ctx = None
    if record.source.is_dir():
        files = _frames_from_directory(record)
        script = record.source / MOTION_SCRIPT_FILENAME
        if script.exists():
            annotations = _load_motion_script(script)
    else:
        tmp_ctx = tempfile.TemporaryDirectory(prefix="actionsim-decode-")
        files = _decode_video(record, Path(tmp_ctx.name))

    frames = []
    try:
        for index, path in enumerate(files):
            try:
                with Image.open(path) as img:
                    image = img.copy()
            except OSError as exc:
                raise IngestError(f"sample {record.id}: unreadable frame {path}: {exc}") from exc
            frames.append(
                Frame(
                    index_native=index,
                    timestamp_s=index / record.native_rate_hz,
                    image=image,
                    annotation=annotations.get(index),
                )
            )
    finally:
        if tmp_ctx is not None:
            tmp_ctx.cleanup()
    return FrameSequence(sample_id=record.id, rate_hz=record.native_rate_hz, frames=tuple(frames))


def _native_stride(seq: FrameSequence) -> int:
    if len(seq.frames) < 2:
        return 1
    strides = {b.index_native - a.index_native for a, b in zip(seq.frames, seq.frames[1:])}
    if len(strides) != 1:
        raise IngestError(f"sample {seq.sample_id}: non-uniform frame stride, cannot decimate")
    return strides.pop()


def decimate(seq: FrameSequence, target_hz: float) -> FrameSequence:
    """Down-sample by keeping frames whose native index is a multiple of the stride."""
    if target_hz <= 0:
        raise IngestError(f"target rate must be positive, got {target_hz}")
    if target_hz > seq.rate_hz:
        raise IngestError(f"target rate {target_hz} exceeds current rate {seq.rate_hz}")
    ratio = seq.rate_hz / target_hz
    stride = round(ratio)
    if abs(ratio - stride) > 1e-9:
        raise IngestError(f"non-integer decimation stride {ratio} ({seq.rate_hz} Hz -> {target_hz} Hz)")
    if stride == 1:
        return seq
    native = _native_stride(seq) * stride
    kept = tuple(f for f in seq.frames if f.index_native % native == 0)
    return FrameSequence(
        sample_id=seq.sample_id,
        rate_hz=target_hz,
        frames=kept,
        provenance=seq.provenance + ("decimated",),
    )


def truncate_partial(seq: FrameSequence, cut_frame: int) -> FrameSequence:
    """Keep only frames with native index < cut_frame (partial observation)."""
    if cut_frame < 0:
        raise IngestError(f"cut_frame must be non-negative, got {cut_frame}")
    kept = tuple(f for f in seq.frames if f.index_native < cut_frame)
    if not kept:
        raise IngestError(f"sample {seq.sample_id}: empty after truncation at frame {cut_frame}")
    return FrameSequence(
        sample_id=seq.sample_id,
        rate_hz=seq.rate_hz,
        frames=kept,
        provenance=seq.provenance + ("truncated",),
    )


def segment_clips(seq: FrameSequence, clip_length: int) -> list[Clip]:
    """Cut the sequence into floor(T / L) non-overlapping L-frame clips.

    Trailing frames that do not fill a window are dropped. A sequence shorter
    than one window yields an empty list; the caption stage's exclusion check
    is the consumer of that condition.
    """
    if clip_length < 1:
        raise IngestError(f"clip length must be >= 1, got {clip_length}")
    total = len(seq.frames)
    count = total // clip_length
    if count == 0:
        logger.warning(
            "sample %s: insufficient frames (%d < %d), no clips produced",
            seq.sample_id, total, clip_length,
        )
        return []
    return [
        Clip(
            sample_id=seq.sample_id,
            k=k,
            frames=tuple(seq.frames[(k - 1) * clip_length : k * clip_length]),
        )
        for k in range(1, count + 1)
    ]

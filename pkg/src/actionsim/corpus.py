"""Dataset manifest: sample identity, labels, per-sample metadata.

A corpus is described by a single YAML manifest (documented in the README).
Sample order in the manifest is canonical: every similarity matrix and report
uses it as row/column order, so runs are byte-reproducible.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, replace
from pathlib import Path

import yaml

from .errors import ManifestError

logger = logging.getLogger(__name__)

_ID_PATTERN = re.compile(r"^(\D+)(\d+)$")

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


@dataclass(frozen=True, order=True)
class SampleId:
    """Class label code plus 1-based trial index, rendered e.g. "M1"."""

    label_code: str
    trial_index: int

    def __post_init__(self) -> None:
        if not self.label_code or any(ch.isdigit() for ch in self.label_code):
            raise ManifestError(f"invalid label code {self.label_code!r}")
        if self.trial_index < 1:
            raise ManifestError(f"trial index must be >= 1, got {self.trial_index}")

    def __str__(self) -> str:
        return f"{self.label_code}{self.trial_index}"

    @classmethod
    def parse(cls, text: str) -> "SampleId":
        match = _ID_PATTERN.match(text.strip())
        if not match:
            raise ManifestError(f"cannot parse sample id {text!r}")
        return cls(match.group(1), int(match.group(2)))


@dataclass(frozen=True)
class SampleRecord:
    """One video sample: source media plus optional track and cut point.

    ``cut_frame`` is exclusive and always expressed on the native-rate frame
    timeline, so a single manifest value serves every down-sampled variant.
    """

    id: SampleId
    source: Path
    native_rate_hz: float
    joint_track: Path | None = None
    cut_frame: int | None = None


@dataclass(frozen=True)
class Corpus:
    samples: tuple[SampleRecord, ...]
    class_set: tuple[str, ...]

    @property
    def sample_ids(self) -> tuple[SampleId, ...]:
        return tuple(record.id for record in self.samples)

    def record(self, sample_id: SampleId) -> SampleRecord:
        for record in self.samples:
            if record.id == sample_id:
                return record
        raise KeyError(str(sample_id))


def _count_source_frames(source: Path) -> int | None:
    """Frame count for directory sources; None for containers (decoded later)."""
    if source.is_dir():
        return sum(1 for p in source.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    return None


def validate_corpus(corpus: Corpus, base_dir: Path | None = None, check_sources: bool = True) -> None:
    """Raise ManifestError on any invariant violation; warn on empty classes."""
    if not corpus.samples:
        raise ManifestError("empty corpus")
    if not corpus.class_set:
        raise ManifestError("empty class set")
    if len(set(corpus.class_set)) != len(corpus.class_set):
        raise ManifestError("duplicate label code in class_set")

    seen: set[SampleId] = set()
    for record in corpus.samples:
        if record.id in seen:
            raise ManifestError(f"duplicate sample id {record.id}")
        seen.add(record.id)
        if record.id.label_code not in corpus.class_set:
            raise ManifestError(f"unknown label code {record.id.label_code!r} for sample {record.id}")
        if record.native_rate_hz <= 0:
            raise ManifestError(f"sample {record.id}: native rate must be positive, got {record.native_rate_hz}")
        if record.cut_frame is not None and record.cut_frame < 0:
            raise ManifestError(f"sample {record.id}: cut_frame must be non-negative")
        if not check_sources:
            continue
        if not record.source.exists():
            raise ManifestError(f"sample {record.id}: source {record.source} does not exist")
        frame_count = _count_source_frames(record.source)
        if record.cut_frame is not None and frame_count is not None and record.cut_frame > frame_count:
            raise ManifestError(
                f"sample {record.id}: cut_frame {record.cut_frame} exceeds native frame count {frame_count}"
            )
        if record.joint_track is not None:
            if not record.joint_track.exists():
                raise ManifestError(f"sample {record.id}: joint track {record.joint_track} does not exist")
            from .overlay import load_joint_track  # deferred: overlay imports corpus

            load_joint_track(record.joint_track)

    for code in corpus.class_set:
        if not any(r.id.label_code == code for r in corpus.samples):
            logger.warning("class %s has no samples in this corpus", code)


def load_manifest(path: Path | str, check_sources: bool = True) -> Corpus:
    """Load and validate a corpus manifest; sample order equals manifest order."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest {path} does not exist")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ManifestError(f"malformed manifest {path}: {exc}") from exc
    return parse_manifest(doc, base_dir=path.parent, check_sources=check_sources)


def parse_manifest(doc: object, base_dir: Path | None = None, check_sources: bool = True) -> Corpus:
    """Build a Corpus from an already-parsed manifest document."""
    if not isinstance(doc, dict):
        raise ManifestError("manifest root must be a mapping")
    try:
        class_set = tuple(str(code) for code in doc["class_set"])
        raw_samples = doc["samples"]
    except KeyError as exc:
        raise ManifestError(f"manifest missing required key {exc}") from exc
    if not isinstance(raw_samples, list):
        raise ManifestError("manifest 'samples' must be a list")

    def resolve(value: str) -> Path:
        p = Path(value)
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        return p

    samples = []
    for entry in raw_samples:
        if not isinstance(entry, dict):
            raise ManifestError(f"sample entry must be a mapping, got {type(entry).__name__}")
        try:
            sample_id = SampleId.parse(str(entry["id"]))
            source = resolve(str(entry["source"]))
            rate = float(entry["native_rate_hz"])
        except KeyError as exc:
            raise ManifestError(f"sample entry missing required key {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ManifestError(f"malformed sample entry {entry!r}: {exc}") from exc
        if rate <= 0:
            raise ManifestError(f"sample {sample_id}: native rate must be positive, got {rate}")
        joint_track = resolve(str(entry["joint_track"])) if entry.get("joint_track") else None
        cut_frame = int(entry["cut_frame"]) if entry.get("cut_frame") is not None else None
        samples.append(
            SampleRecord(
                id=sample_id,
                source=source,
                native_rate_hz=rate,
                joint_track=joint_track,
                cut_frame=cut_frame,
            )
        )

    corpus = Corpus(samples=tuple(samples), class_set=class_set)
    validate_corpus(corpus, base_dir=base_dir, check_sources=check_sources)
    return corpus


def save_manifest(corpus: Corpus, path: Path | str) -> None:
    """Write a manifest that round-trips through load_manifest."""
    path = Path(path)
    base = path.parent.resolve()

    def relativize(p: Path) -> str:
        try:
            return p.resolve().relative_to(base).as_posix()
        except ValueError:
            return str(p)

    doc = {
        "class_set": list(corpus.class_set),
        "samples": [
            {
                "id": str(r.id),
                "source": relativize(r.source),
                "native_rate_hz": r.native_rate_hz,
                **({"joint_track": relativize(r.joint_track)} if r.joint_track else {}),
                **({"cut_frame": r.cut_frame} if r.cut_frame is not None else {}),
            }
            for r in corpus.samples
        ],
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(doc, sort_keys=False), encoding="utf-8")


def class_index_sets(corpus: Corpus) -> dict[str, list[int]]:
    """Map each label code to the ordered sample indices of that class.

    The returned sets partition 0..N-1; a class with no samples maps to an
    empty list (warned about at validation time).
    """
    sets: dict[str, list[int]] = {code: [] for code in corpus.class_set}
    for index, record in enumerate(corpus.samples):
        sets[record.id.label_code].append(index)
    return sets


def without_sources(corpus: Corpus) -> Corpus:
    """Copy of the corpus with source paths stripped (for provenance digests)."""
    return Corpus(
        samples=tuple(replace(r, source=Path(str(r.id)), joint_track=None) for r in corpus.samples),
        class_set=corpus.class_set,
    )

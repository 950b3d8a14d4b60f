"""Bundled synthetic corpus: 12 samples, 4 classes x 3 trials, 120 Hz.

Every sample is generated deterministically from (label, trial, seed): tiny
monochrome frames with a moving blob, a per-frame motion-script annotation
stream for the mock captioner, an upper-body joint track for the overlay
variants, and a cut point early enough that the 30 Hz partial variant falls
below one clip window (and is therefore excluded).

The action is scripted in phases on the native 120 Hz timeline. All phase
bodies are shared across classes; class identity is carried by brief "flash"
annotations whose frame indices are chosen so the target word reaches five
clips at 120 Hz but exactly one clip at 60 and 30 Hz. Combined with the mock
captioner's rate-scaled token dropout this gives the rate-sensitivity
simulation its signal, while the shared phases keep classes lexically close
so the lexical judge cannot separate them trivially.
"""

from __future__ import annotations

import hashlib
import logging
import statistics
from pathlib import Path
from typing import Mapping, Sequence

from PIL import Image, ImageDraw

from .caption import CaptionerSpec, MockCaptionBackend, describe_sample
from .classify import ClassifySpec, evaluate_matrix
from .corpus import Corpus, SampleId, SampleRecord, class_index_sets, load_manifest, save_manifest
from .frames import Clip, extract_frames, decimate, segment_clips
from .judge import JudgeSpec, LexicalOracleJudge
from .matrix import MatrixSpec, build_matrix
from .overlay import UPPER_BODY_JOINTS, JointTrack, save_joint_track

logger = logging.getLogger(__name__)

CLASS_LABELS = ("M", "K", "D", "R")
TRIALS_PER_CLASS = 3
NATIVE_RATE_HZ = 120.0
FRAME_COUNT = 300
FRAME_SIZE = (48, 36)

# Word-dropout probabilities used by the rate-sensitivity simulation.
SIM_DROPOUT_BY_RATE: Mapping[int, float] = {120: 0.05, 60: 0.25, 30: 0.45}
SIM_SEED_COUNT = 20

# Native-frame phase windows. The wind-up sits inside the first 48 frames so
# a 120 Hz partial variant (cut at 49..60) still sees class-distinctive
# motion, while 30 Hz partials (<= 15 frames) fall under one clip window.
PHASE_STANCE = (0, 16)
PHASE_APPROACH = (16, 32)
PHASE_WINDUP = (32, 62)
PHASE_BRIDGE = (62, 110)
PHASE_STRIKE = (110, 140)
PHASE_FOLLOW = (140, 230)
PHASE_RECOVER = (230, 300)

# Every phase body is class-agnostic; classes differ only through the flash
# frames below. Wording is deliberately redundant across phases (recover
# repeats the stance line; follow re-uses the approach vocabulary) so that at
# 120 Hz every shared word lands in at least two clips and word dropout
# cannot fake a class signal out of background noise.
_BASE_PHRASES = {
    PHASE_STANCE: "both fighters face off at middle distance",
    PHASE_APPROACH: "the attacker steps in to close the distance",
    PHASE_WINDUP: "the attacker sets the grip and tenses for the opening",
    PHASE_BRIDGE: "the fighters close with measured pressure",
    PHASE_STRIKE: "the swords meet in a fast exchange of cuts",
    PHASE_FOLLOW: "the attacker steps back out to open the distance",
    PHASE_RECOVER: "both fighters face off at middle distance",
}

# Class identity rides on single "flash" frames: instants where the scripted
# annotation names the strike target (or the guard, for the no-attack class)
# and, during the strike itself, the judges' call. The odd indices are only
# ever sampled at the native rate; 44 is the one flash that survives
# decimation, landing in exactly one clip at 60 Hz (frames 32..62) and one at
# 30 Hz (frames 0..60). Under the mock captioner's rate-scaled token dropout
# the target word therefore has five independent survival draws at 120 Hz but
# a single draw at the lower rates, and the call word is invisible below
# 120 Hz entirely -- which is what makes the rate-sensitivity simulation
# degrade the way real-world captioning degrades when fast motion falls
# between sampled frames.
_WINDUP_FLASH_FRAMES = (33, 44, 49)
_STRIKE_FLASH_FRAMES = (111, 115, 129)
_FLASH_TARGETS = {"M": "head", "K": "wrist", "D": "torso", "R": "guard"}
_FLASH_CALLS = {"M": "men", "K": "kote", "D": "do", "R": "yame"}
_WINDUP_FLASH = "the blade lines up with the {target}"
_STRIKE_FLASH = "the judges call {call} as the cut finds the {target}"

# One word of per-trial variation, injected into the approach and follow
# phrases. Trials share fillers across classes, so a sample that loses its
# target word drifts toward same-trial samples of other classes instead of
# rescuing itself on its class mates.
_TRIAL_FILLERS = ("quickly", "steadily", "softly")
_FILLER_PHASES = (PHASE_APPROACH, PHASE_FOLLOW)


def _flash_phrase(label: str, index: int) -> str | None:
    if index in _WINDUP_FLASH_FRAMES:
        return _WINDUP_FLASH.format(target=_FLASH_TARGETS[label])
    if index in _STRIKE_FLASH_FRAMES:
        return _STRIKE_FLASH.format(call=_FLASH_CALLS[label], target=_FLASH_TARGETS[label])
    return None


def phase_table(label: str) -> list[tuple[int, int, str]]:
    """Scripted annotation windows for one class, flash frames split out."""
    flags = []
    for frame in _WINDUP_FLASH_FRAMES + _STRIKE_FLASH_FRAMES:
        flags.append((frame, _flash_phrase(label, frame)))
    table = []
    for (start, end), phrase in _BASE_PHRASES.items():
        cursor = start
        for frame, flash in sorted(flags):
            if start <= frame < end:
                if cursor < frame:
                    table.append((cursor, frame, phrase))
                table.append((frame, frame + 1, flash))
                cursor = frame + 1
        if cursor < end:
            table.append((cursor, end, phrase))
    return sorted(table)


def annotation_for(label: str, trial: int, index: int) -> str:
    flash = _flash_phrase(label, index)
    if flash is not None:
        return flash
    for window, phrase in _BASE_PHRASES.items():
        if window[0] <= index < window[1]:
            if window in _FILLER_PHASES:
                return f"{phrase} {_TRIAL_FILLERS[(trial - 1) % len(_TRIAL_FILLERS)]}"
            return phrase
    raise ValueError(f"frame index {index} outside scripted range")


def cut_frame_for(label: str, trial: int) -> int:
    """Native cut point in [49, 60]: three 120 Hz clips, under one at 30 Hz."""
    offset = (CLASS_LABELS.index(label) * TRIALS_PER_CLASS + (trial - 1)) % 12
    return 49 + offset


def _noise_byte(seed: int, label: str, trial: int, index: int, salt: int) -> int:
    digest = hashlib.sha256(f"{seed}:{label}{trial}:{index}:{salt}".encode()).digest()
    return digest[0]


def render_frame_image(label: str, trial: int, index: int, seed: int) -> Image.Image:
    """Tiny deterministic monochrome frame with a class/trial-coded blob."""
    width, height = FRAME_SIZE
    class_idx = CLASS_LABELS.index(label)
    background = 40 + 8 * class_idx + 2 * trial
    image = Image.new("L", FRAME_SIZE, color=background)
    draw = ImageDraw.Draw(image)

    # Attacker blob advances then retreats over the scripted action.
    progress = index / (FRAME_COUNT - 1)
    swing = progress if progress < 0.5 else 1.0 - progress
    ax = 4 + round(swing * 2 * (width - 16))
    ay = 8 + ((index * (3 + class_idx) + trial * 5) % (height - 16))
    draw.rectangle([ax, ay, ax + 4, ay + 4], fill=230)
    # Defender blob stays near the right edge.
    draw.rectangle([width - 9, height // 2 - 2, width - 5, height // 2 + 2], fill=180)
    # Two seeded noise pixels make every (sample, frame) raster distinct.
    for salt in (0, 1):
        nx = _noise_byte(seed, label, trial, index, salt) % width
        ny = _noise_byte(seed, label, trial, index, salt + 2) % height
        draw.point((nx, ny), fill=255)
    return image


def make_joint_track(label: str, trial: int) -> JointTrack:
    """Smooth upper-body motion; one joint periodically drops confidence."""
    import math

    width, height = FRAME_SIZE
    class_idx = CLASS_LABELS.index(label)
    base = {
        "head": (10.0, 6.0),
        "neck": (10.0, 10.0),
        "left_shoulder": (7.0, 11.0),
        "right_shoulder": (13.0, 11.0),
        "left_elbow": (6.0, 16.0),
        "right_elbow": (14.0, 16.0),
        "left_wrist": (6.0, 21.0),
        "right_wrist": (15.0, 21.0),
    }
    per_frame = {}
    for index in range(FRAME_COUNT):
        progress = index / (FRAME_COUNT - 1)
        drift = progress * (width / 2 - 12)
        lift = 8.0 * math.sin(math.pi * progress * (1.5 + 0.25 * class_idx) + 0.3 * trial)
        entries = []
        for name in UPPER_BODY_JOINTS:
            x, y = base[name]
            jy = y - (lift if "wrist" in name or "elbow" in name else lift * 0.3)
            conf = 0.05 if name == "right_wrist" and index % 50 == 49 else 0.95
            entries.append((x + drift, max(jy, 1.0), conf))
        per_frame[index] = tuple(entries)
    return JointTrack(joints=UPPER_BODY_JOINTS, per_frame=per_frame)


def make_sample(root: Path, label: str, trial: int, seed: int) -> SampleRecord:
    sample_dir = root / "samples" / f"{label}{trial}"
    frames_dir = sample_dir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)

    script_lines = []
    for index in range(FRAME_COUNT):
        image = render_frame_image(label, trial, index, seed)
        image.save(frames_dir / f"{index:05d}.png")
        script_lines.append(f"{index}\t{annotation_for(label, trial, index)}")
    (frames_dir / "motion_script.tsv").write_text("\n".join(script_lines) + "\n", encoding="utf-8")

    track_path = sample_dir / "track.tsv"
    save_joint_track(make_joint_track(label, trial), track_path)

    return SampleRecord(
        id=SampleId(label, trial),
        source=frames_dir,
        native_rate_hz=NATIVE_RATE_HZ,
        joint_track=track_path,
        cut_frame=cut_frame_for(label, trial),
    )


def make_corpus(root: Path, seed: int = 0) -> Path:
    """Generate the full corpus under ``root``; returns the manifest path."""
    root = Path(root)
    records = []
    for label in CLASS_LABELS:
        for trial in range(1, TRIALS_PER_CLASS + 1):
            records.append(make_sample(root, label, trial, seed))
            logger.info("generated sample %s%d", label, trial)
    corpus = Corpus(samples=tuple(records), class_set=CLASS_LABELS)
    manifest_path = root / "manifest.yaml"
    save_manifest(corpus, manifest_path)
    return manifest_path


def rate_sensitivity(
    manifest: Path,
    rates_hz: Sequence[int] = (120, 60, 30),
    dropout_by_rate: Mapping[int, float] = SIM_DROPOUT_BY_RATE,
    seeds: Sequence[int] = tuple(range(SIM_SEED_COUNT)),
    clip_length: int = 16,
    self_mode: str = "leave_one_out",
) -> dict[int, list[float]]:
    """Full-video NCP accuracy per rate across dropout seeds.

    Captions come from the mock backend with the rate's word-dropout
    probability; pairs are scored by the lexical oracle judge. leave_one_out
    is the informative default here: with include_self the judged diagonal
    contributes a constant 100 to every own-class mean, which at this class
    size outvotes any realistic caption degradation, so accuracy would sit
    at the ceiling for every rate and the comparison would measure nothing.
    """
    corpus = load_manifest(manifest)
    class_sets = class_index_sets(corpus)
    order = list(corpus.sample_ids)

    clips_by_rate: dict[int, list[list[Clip]]] = {}
    for rate in rates_hz:
        per_sample = []
        for record in corpus.samples:
            seq = decimate(extract_frames(record), rate)
            clips = segment_clips(seq, clip_length)
            if not clips:
                raise ValueError(f"sample {record.id} has no clips at {rate} Hz")
            per_sample.append(clips)
        clips_by_rate[rate] = per_sample

    backend = MockCaptionBackend()
    judge_spec = JudgeSpec(backend_id="oracle")
    results: dict[int, list[float]] = {rate: [] for rate in rates_hz}
    for seed in seeds:
        for rate in rates_hz:
            spec = CaptionerSpec(
                backend_id="mock",
                min_frames=clip_length,
                generation_params={
                    "dropout_p": dropout_by_rate.get(rate, 0.0),
                    "seed": seed,
                },
            )
            sequences = [
                describe_sample(clips, spec, backend)
                for clips in clips_by_rate[rate]
            ]
            matrix = build_matrix(
                sequences, order, judge_spec, LexicalOracleJudge(), MatrixSpec()
            )
            evaluation = evaluate_matrix(matrix, class_sets, ClassifySpec(self_mode=self_mode))
            results[rate].append(evaluation.accuracy_percent)
    return results


def mean_accuracy(results: Mapping[int, Sequence[float]]) -> dict[int, float]:
    return {rate: statistics.mean(values) for rate, values in results.items()}

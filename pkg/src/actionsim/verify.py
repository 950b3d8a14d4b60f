"""Self-check suite behind the ``verify`` subcommand.

Each check re-derives a pipeline guarantee from first principles: the NCP
reference here is a separate brute-force double loop (not a call into the
classify module), decimation laws are checked on randomized sequences, and
persisted artifacts are re-digested. Checks are deterministic given the
seed, so failures reproduce.
"""

from __future__ import annotations

import contextlib
import logging
import random
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from PIL import Image

from .cache import ResponseCache
from .caption import Description, DescriptionSequence
from .classify import predict, prototype_scores
from .config import RunConfig
from .corpus import SampleId, load_manifest
from .errors import ClassifyError, MatrixError, ScoreParseError
from .frames import Frame, FrameSequence, decimate, segment_clips, truncate_partial
from .judge import JudgeSpec, LexicalOracleJudge, build_judge_prompt, parse_score
from .matrix import SimilarityMatrix
from .pipeline import run_digest

_SHARED_IMAGE = Image.new("L", (2, 2), color=0)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@contextlib.contextmanager
def _quiet_omission_warnings():
    """The randomized fuzzing below hits the empty-class omission path
    thousands of times on purpose; its per-hit warning is only useful on
    real evaluations."""
    classify_logger = logging.getLogger("actionsim.classify")
    previous = classify_logger.level
    classify_logger.setLevel(logging.ERROR)
    try:
        yield
    finally:
        classify_logger.setLevel(previous)


# ---------------------------------------------------------------------------
# Reference implementations (kept deliberately independent of the modules
# they cross-check).


def brute_force_ncp(
    values: list[list[float | None]],
    labels: list[str],
    self_mode: str,
) -> list[tuple[str, str | None]]:
    """Double-loop NCP: returns (outcome, label) per sample.

    Mirrors the documented rules only: mean per class over included members
    (own cell dropped under leave_one_out), means rounded half-up to six
    decimals, shared maximum is a failed tie, empty classes are skipped. A
    sample for which every class is empty is "unscorable" — the classify
    module refuses such predictions with an error.
    """
    n = len(values)
    outcomes: list[tuple[str, str | None]] = []
    for i in range(n):
        if values[i][i] is None:
            outcomes.append(("excluded", None))
            continue
        best_mean = None
        best_labels: list[str] = []
        for label in sorted(set(labels)):
            total = 0.0
            count = 0
            for j in range(n):
                if labels[j] != label or values[j][j] is None:
                    continue
                if self_mode == "leave_one_out" and j == i:
                    continue
                total += values[i][j]
                count += 1
            if count == 0:
                continue
            mean = float(
                Decimal(str(total / count)).quantize(
                    Decimal("0.000001"), rounding=ROUND_HALF_UP
                )
            )
            if best_mean is None or mean > best_mean:
                best_mean = mean
                best_labels = [label]
            elif mean == best_mean:
                best_labels.append(label)
        if best_mean is None:
            outcomes.append(("unscorable", None))
        elif len(best_labels) == 1:
            outcomes.append(("predicted", best_labels[0]))
        else:
            outcomes.append(("failed_tie", None))
    return outcomes


def module_ncp(
    matrix: SimilarityMatrix,
    class_sets: dict[str, list[int]],
    self_mode: str,
) -> list[tuple[str, str | None]]:
    """The classify module's answer in the same (outcome, label) shape."""
    excluded = set(matrix.excluded_indices)
    outcomes: list[tuple[str, str | None]] = []
    for i in range(len(matrix.sample_ids)):
        if i in excluded:
            outcomes.append(("excluded", None))
            continue
        try:
            prediction = predict(prototype_scores(matrix, class_sets, i, self_mode))
        except ClassifyError:
            outcomes.append(("unscorable", None))
            continue
        outcomes.append((prediction.outcome, prediction.label))
    return outcomes


def random_labeled_matrix(
    rng: random.Random,
    max_n: int = 12,
    integer_values: bool = False,
    exclusion_p: float = 0.15,
) -> tuple[SimilarityMatrix, dict[str, list[int]], list[str]]:
    """Random matrix + random class partition (every class non-empty)."""
    n = rng.randint(2, max_n)
    n_classes = rng.randint(2, min(4, n))
    codes = ["A", "B", "C", "E"][:n_classes]
    while True:
        labels = [rng.choice(codes) for _ in range(n)]
        if len(set(labels)) == n_classes:
            break
    excluded = {i for i in range(n) if rng.random() < exclusion_p}
    if len(excluded) == n:
        excluded.discard(rng.randrange(n))

    def cell() -> float:
        if integer_values:
            return float(rng.randint(0, 100))
        return round(rng.uniform(0.0, 100.0), 2)

    values = tuple(
        tuple(
            None if i in excluded or j in excluded else cell()
            for j in range(n)
        )
        for i in range(n)
    )
    matrix = SimilarityMatrix(
        sample_ids=tuple(SampleId("S", i + 1) for i in range(n)),
        values=values,
        backend_id="fixture",
        symmetry="full_asymmetric",
        diagonal="judged",
    )
    class_sets = {c: [i for i, l in enumerate(labels) if l == c] for c in codes}
    return matrix, class_sets, labels


def _random_sequence(rng: random.Random, rate_hz: float = 120.0) -> FrameSequence:
    total = rng.randint(1, 360)
    frames = tuple(
        Frame(index_native=i, timestamp_s=i / rate_hz, image=_SHARED_IMAGE)
        for i in range(total)
    )
    return FrameSequence(
        sample_id=SampleId("V", 1), rate_hz=rate_hz, frames=frames
    )


# ---------------------------------------------------------------------------
# Checks.


def check_decimation_laws(seed: int = 0, rounds: int = 50) -> CheckResult:
    rng = random.Random(seed)
    for _ in range(rounds):
        seq = _random_sequence(rng)
        half = decimate(seq, 60)
        quarter = decimate(seq, 30)
        kept_half = {f.index_native for f in half.frames}
        kept_quarter = {f.index_native for f in quarter.frames}
        if not kept_quarter <= kept_half:
            return CheckResult("decimation_laws", False, "30 Hz frames not a subset of 60 Hz")
        composed = decimate(half, 30)
        if [f.index_native for f in composed.frames] != [f.index_native for f in quarter.frames]:
            return CheckResult("decimation_laws", False, "120→60→30 differs from 120→30")
        cut = rng.randint(1, len(seq.frames))
        try:
            a = truncate_partial(decimate(seq, 60), cut)
            a_indices = [f.index_native for f in a.frames]
        except Exception:
            a_indices = None
        try:
            b = decimate(truncate_partial(seq, cut), 60)
            b_indices = [f.index_native for f in b.frames]
        except Exception:
            b_indices = None
        if a_indices != b_indices:
            return CheckResult(
                "decimation_laws", False, f"truncation does not commute at cut {cut}"
            )
    return CheckResult("decimation_laws", True, f"{rounds} randomized sequences")


def check_segmentation_tiling(seed: int = 0, rounds: int = 50) -> CheckResult:
    rng = random.Random(seed)
    for _ in range(rounds):
        seq = _random_sequence(rng)
        length = rng.randint(1, 32)
        clips = segment_clips(seq, length)
        expected = len(seq.frames) // length
        if len(clips) != expected:
            return CheckResult("segmentation_tiling", False, f"expected {expected} clips")
        flat = [f.index_native for clip in clips for f in clip.frames]
        if flat != [f.index_native for f in seq.frames[: expected * length]]:
            return CheckResult("segmentation_tiling", False, "clips do not tile the prefix")
        if any(len(clip.frames) != length for clip in clips):
            return CheckResult("segmentation_tiling", False, "clip with wrong length")
    return CheckResult("segmentation_tiling", True, f"{rounds} randomized sequences")


def check_ncp_equivalence(seed: int = 0, rounds: int = 200) -> CheckResult:
    rng = random.Random(seed)
    with _quiet_omission_warnings():
        for index in range(rounds):
            matrix, class_sets, labels = random_labeled_matrix(
                rng, integer_values=(index % 2 == 0)
            )
            for self_mode in ("include_self", "leave_one_out"):
                expected = brute_force_ncp(
                    [list(r) for r in matrix.values], labels, self_mode
                )
                actual = module_ncp(matrix, class_sets, self_mode)
                if expected != actual:
                    return CheckResult(
                        "ncp_equivalence",
                        False,
                        f"matrix #{index} ({self_mode}): {actual} != {expected}",
                    )
    return CheckResult("ncp_equivalence", True, f"{rounds} random matrices, both self modes")


def check_affine_invariance(seed: int = 0, rounds: int = 50) -> CheckResult:
    # Dyadic a and b keep a*v+b exactly representable for integer cells, so
    # the real-arithmetic invariant is testable without float noise.
    rng = random.Random(seed)
    with _quiet_omission_warnings():
        for index in range(rounds):
            matrix, class_sets, _ = random_labeled_matrix(rng, integer_values=True)
            a = rng.randint(1, 64) / 16.0
            b = rng.randint(-256, 256) / 16.0
            mapped = SimilarityMatrix(
                sample_ids=matrix.sample_ids,
                values=tuple(
                    tuple(None if v is None else a * v + b for v in row)
                    for row in matrix.values
                ),
                backend_id=matrix.backend_id,
                symmetry=matrix.symmetry,
                diagonal=matrix.diagonal,
            )
            for self_mode in ("include_self", "leave_one_out"):
                before = module_ncp(matrix, class_sets, self_mode)
                after = module_ncp(mapped, class_sets, self_mode)
                if before != after:
                    return CheckResult(
                        "affine_invariance",
                        False,
                        f"matrix #{index}: outcomes changed under {a}*S+{b} ({self_mode})",
                    )
    return CheckResult("affine_invariance", True, f"{rounds} random matrices")


def _word_sequence(sample: SampleId, words: list[str]) -> DescriptionSequence:
    return DescriptionSequence(
        sample_id=sample,
        descriptions=(
            Description(sample_id=sample, k=1, text=" ".join(words), backend_id="fixture", prompt_hash="0" * 16),
        ),
    )


def check_judge_oracle(seed: int = 0, rounds: int = 100) -> CheckResult:
    rng = random.Random(seed)
    vocabulary = [f"w{i}" for i in range(40)]
    judge = LexicalOracleJudge()
    spec = JudgeSpec(backend_id="oracle")
    for _ in range(rounds):
        a = _word_sequence(SampleId("A", 1), rng.sample(vocabulary, rng.randint(1, 20)))
        b = _word_sequence(SampleId("B", 1), rng.sample(vocabulary, rng.randint(1, 20)))
        ab = parse_score(judge.respond([], (a, b), spec))
        ba = parse_score(judge.respond([], (b, a), spec))
        aa = parse_score(judge.respond([], (a, a), spec))
        if ab != ba:
            return CheckResult("judge_oracle", False, f"asymmetric: {ab} != {ba}")
        if aa != 100.0:
            return CheckResult("judge_oracle", False, f"self-identity {aa} != 100")
        if not 0.0 <= ab <= 100.0:
            return CheckResult("judge_oracle", False, f"score {ab} out of range")
    return CheckResult("judge_oracle", True, f"{rounds} random pairs")


_PARSE_FIXTURES: list[tuple[str, float | None]] = [
    ("85", 85.0),
    ("Score: 72.", 72.0),
    ("The similarity is 85/100.", 85.0),
    ("I would rate this 60 out of 100", 60.0),
    ("First I note 3 clips differ; overall 45", 45.0),
    ("100", 100.0),
    ("0", 0.0),
    ("something about -3 then final answer 12", 12.0),
    ("I cannot compare these videos.", None),
    ("", None),
    ("9000", None),
    ("Answer: 55.5", 55.5),
]


def check_parse_fixtures() -> CheckResult:
    for raw, expected in _PARSE_FIXTURES:
        try:
            got = parse_score(raw)
        except ScoreParseError:
            got = None
        if got != expected:
            return CheckResult("parse_fixtures", False, f"{raw!r}: {got} != {expected}")
    return CheckResult("parse_fixtures", True, f"{len(_PARSE_FIXTURES)} fixtures")


def check_prompt_rendering() -> CheckResult:
    a = _word_sequence(SampleId("A", 1), ["alpha"])
    b = _word_sequence(SampleId("B", 1), ["beta"])
    prompt = build_judge_prompt(a, b, JudgeSpec())
    for needle in ("A1: alpha", "B1: beta", "0", "100"):
        if needle not in prompt:
            return CheckResult("prompt_rendering", False, f"missing {needle!r}")
    return CheckResult("prompt_rendering", True)


def check_cache_integrity(cache_dir: Path) -> CheckResult:
    if not Path(cache_dir).exists():
        return CheckResult("cache_integrity", True, "no cache present")
    bad = ResponseCache(cache_dir).scan_integrity()
    if bad:
        return CheckResult(
            "cache_integrity", False, f"{len(bad)} corrupted entries: {bad[:3]}"
        )
    return CheckResult("cache_integrity", True, "all entries match their digests")


def check_matrix_provenance(run_dir: Path, expected_digest: str | None = None) -> CheckResult:
    paths = sorted(Path(run_dir).glob("variants/*/matrix.json"))
    if not paths:
        return CheckResult("matrix_provenance", True, "no matrices present")
    from .ioutil import read_json

    for path in paths:
        try:
            matrix = SimilarityMatrix.from_payload(read_json(path))
        except MatrixError as exc:
            return CheckResult("matrix_provenance", False, f"{path.name}: {exc}")
        if expected_digest is not None and matrix.config_digest != expected_digest:
            return CheckResult(
                "matrix_provenance",
                False,
                f"{path}: config digest {matrix.config_digest[:12]} != expected {expected_digest[:12]}",
            )
    return CheckResult("matrix_provenance", True, f"{len(paths)} matrices re-digested")


def run_verification(config: RunConfig | None = None, seed: int = 0) -> list[CheckResult]:
    """Full check suite; artifact checks are included when a config is given."""
    results = [
        check_decimation_laws(seed),
        check_segmentation_tiling(seed),
        check_ncp_equivalence(seed),
        check_affine_invariance(seed),
        check_judge_oracle(seed),
        check_parse_fixtures(),
        check_prompt_rendering(),
    ]
    if config is not None:
        results.append(check_cache_integrity(config.resolved_cache_dir()))
        corpus = load_manifest(config.manifest)
        digest = run_digest(config, corpus)
        run_dir = config.out_dir / f"run-{digest[:12]}"
        results.append(check_matrix_provenance(run_dir, expected_digest=digest))
    return results

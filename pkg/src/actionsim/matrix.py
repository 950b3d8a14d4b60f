"""Pairwise similarity matrix assembly and persistence.

A matrix run takes the corpus-ordered list of description sequences (with
``None`` holes for excluded samples) and schedules one judge call per pair
required by the symmetry policy. Excluded samples produce ``None`` rows and
columns and are never judged. Assembly is deterministic for a fixed backend
regardless of worker count: the set of judged ordered pairs is a pure
function of the order and policy, and cells are written by index.

Persistence is dual-format: a structured JSON document carrying order,
policy, provenance digests, and values, plus a sibling tab-delimited table
of the values for external tooling. The JSON document embeds a self-digest
of the value grid so downstream stages can detect tampering, and the
run-configuration digest so they can refuse mismatched inputs.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

from .cache import ResponseCache
from .caption import DescriptionSequence
from .corpus import SampleId
from .errors import MatrixError, OrderMismatchError
from .ioutil import digest_payload, read_json, write_json_atomic, write_text_atomic
from .judge import JudgeBackend, JudgeSpec, score_pair

logger = logging.getLogger(__name__)

SYMMETRY_POLICIES = ("upper_mirror", "both_average", "full_asymmetric")
DIAGONAL_POLICIES = ("judged", "fixed_max")

DIAGONAL_FIXED_VALUE = 100.0


@dataclass(frozen=True)
class MatrixSpec:
    symmetry: str = "upper_mirror"
    diagonal: str = "judged"
    concurrency: int = 1

    def __post_init__(self) -> None:
        if self.symmetry not in SYMMETRY_POLICIES:
            raise MatrixError(
                f"unknown symmetry policy {self.symmetry!r}; expected one of {SYMMETRY_POLICIES}"
            )
        if self.diagonal not in DIAGONAL_POLICIES:
            raise MatrixError(
                f"unknown diagonal policy {self.diagonal!r}; expected one of {DIAGONAL_POLICIES}"
            )
        if self.concurrency < 1:
            raise MatrixError("concurrency must be at least 1")


@dataclass(frozen=True)
class SimilarityMatrix:
    sample_ids: tuple[SampleId, ...]
    values: tuple[tuple[float | None, ...], ...]
    backend_id: str
    symmetry: str
    diagonal: str
    judge_calls: int = 0
    config_digest: str = ""

    def __post_init__(self) -> None:
        n = len(self.sample_ids)
        if len(self.values) != n or any(len(row) != n for row in self.values):
            raise MatrixError(f"matrix shape does not match {n} sample ids")

    @property
    def excluded_indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(len(self.sample_ids)) if self.values[i][i] is None)

    def cell(self, i: int, j: int) -> float | None:
        return self.values[i][j]

    def values_digest(self) -> str:
        return digest_payload(
            {
                "sample_ids": [str(s) for s in self.sample_ids],
                "values": [list(row) for row in self.values],
            }
        )

    def to_payload(self) -> dict:
        return {
            "sample_ids": [str(s) for s in self.sample_ids],
            "backend_id": self.backend_id,
            "symmetry": self.symmetry,
            "diagonal": self.diagonal,
            "judge_calls": self.judge_calls,
            "config_digest": self.config_digest,
            "values_sha256": self.values_digest(),
            "values": [list(row) for row in self.values],
        }

    @classmethod
    def from_payload(cls, payload: Mapping) -> "SimilarityMatrix":
        try:
            ids = tuple(SampleId.parse(s) for s in payload["sample_ids"])
            values = tuple(
                tuple(None if v is None else float(v) for v in row)
                for row in payload["values"]
            )
            matrix = cls(
                sample_ids=ids,
                values=values,
                backend_id=str(payload["backend_id"]),
                symmetry=str(payload["symmetry"]),
                diagonal=str(payload["diagonal"]),
                judge_calls=int(payload.get("judge_calls", 0)),
                config_digest=str(payload.get("config_digest", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MatrixError(f"malformed matrix payload: {exc}") from exc
        stored = payload.get("values_sha256")
        if stored is not None and stored != matrix.values_digest():
            raise MatrixError(
                "matrix value digest mismatch: file contents do not match values_sha256"
            )
        return matrix

    def check_order(self, expected: Sequence[SampleId]) -> None:
        if tuple(expected) != self.sample_ids:
            raise OrderMismatchError(
                "matrix sample order does not match corpus order: "
                f"{[str(s) for s in self.sample_ids]} != {[str(s) for s in expected]}"
            )


def planned_pairs(
    n: int, included: Sequence[int], spec: MatrixSpec
) -> list[tuple[int, int]]:
    """Ordered (i, j) judge calls implied by the policy, in scan order."""
    idx = set(included)
    pairs: list[tuple[int, int]] = []
    for i in range(n):
        if i not in idx:
            continue
        for j in range(n):
            if j not in idx:
                continue
            if i == j:
                if spec.diagonal == "judged":
                    pairs.append((i, i))
            elif spec.symmetry == "upper_mirror":
                if i < j:
                    pairs.append((i, j))
            else:  # both_average and full_asymmetric judge every ordering
                pairs.append((i, j))
    return pairs


def build_matrix(
    sequences: Sequence[DescriptionSequence | None],
    order: Sequence[SampleId],
    judge_spec: JudgeSpec,
    backend: JudgeBackend,
    matrix_spec: MatrixSpec = MatrixSpec(),
    cache: ResponseCache | None = None,
    config_digest: str = "",
) -> SimilarityMatrix:
    """Judge every required pair and assemble the full matrix.

    ``sequences[i]`` must describe ``order[i]``; a ``None`` entry marks an
    excluded sample whose row and column stay ``None``.
    """
    n = len(order)
    if len(sequences) != n:
        raise MatrixError(f"{len(sequences)} sequences for {n} sample ids")
    for i, seq in enumerate(sequences):
        if seq is not None and seq.sample_id != order[i]:
            raise OrderMismatchError(
                f"sequence at position {i} describes {seq.sample_id}, expected {order[i]}"
            )

    included = [i for i in range(n) if sequences[i] is not None]
    pairs = planned_pairs(n, included, matrix_spec)
    logger.info(
        "judging %d pairs (%d samples, %d excluded, %s/%s)",
        len(pairs), n, n - len(included), matrix_spec.symmetry, matrix_spec.diagonal,
    )

    def judge(pair: tuple[int, int]) -> tuple[tuple[int, int], float]:
        i, j = pair
        score = score_pair(sequences[i], sequences[j], judge_spec, backend, cache=cache)
        return pair, score.value

    results: dict[tuple[int, int], float] = {}
    if matrix_spec.concurrency == 1:
        for pair in pairs:
            key, value = judge(pair)
            results[key] = value
    else:
        with ThreadPoolExecutor(max_workers=matrix_spec.concurrency) as pool:
            for key, value in pool.map(judge, pairs):
                results[key] = value

    grid: list[list[float | None]] = [[None] * n for _ in range(n)]
    for i in included:
        if matrix_spec.diagonal == "fixed_max":
            grid[i][i] = DIAGONAL_FIXED_VALUE
        else:
            grid[i][i] = results[(i, i)]
    for i in included:
        for j in included:
            if i == j:
                continue
            if matrix_spec.symmetry == "upper_mirror":
                a, b = (i, j) if i < j else (j, i)
                grid[i][j] = results[(a, b)]
            elif matrix_spec.symmetry == "both_average":
                grid[i][j] = (results[(i, j)] + results[(j, i)]) / 2.0
            else:
                grid[i][j] = results[(i, j)]

    return SimilarityMatrix(
        sample_ids=tuple(order),
        values=tuple(tuple(row) for row in grid),
        backend_id=backend.backend_id,
        symmetry=matrix_spec.symmetry,
        diagonal=matrix_spec.diagonal,
        judge_calls=len(pairs),
        config_digest=config_digest,
    )


def symmetrize(matrix: SimilarityMatrix) -> SimilarityMatrix:
    """Average the two stored orderings of a full_asymmetric matrix.

    Idempotent on already-symmetric values; the output is marked
    both_average since each cell is now the mean of both orderings.
    """
    if matrix.symmetry != "full_asymmetric":
        raise MatrixError(
            f"symmetrize expects a full_asymmetric matrix, got {matrix.symmetry!r}"
        )
    n = len(matrix.sample_ids)
    grid: list[list[float | None]] = [list(row) for row in matrix.values]
    for i in range(n):
        for j in range(i + 1, n):
            a, b = matrix.values[i][j], matrix.values[j][i]
            if a is None or b is None:
                continue
            mean = (a + b) / 2.0
            grid[i][j] = mean
            grid[j][i] = mean
    return replace(
        matrix,
        values=tuple(tuple(row) for row in grid),
        symmetry="both_average",
    )


def values_table(matrix: SimilarityMatrix) -> str:
    """Tab-delimited value grid with id header row/column; excluded cells blank."""
    ids = [str(s) for s in matrix.sample_ids]
    lines = ["\t".join(["sample"] + ids)]
    for sid, row in zip(ids, matrix.values):
        cells = ["" if v is None else f"{v:g}" for v in row]
        lines.append("\t".join([sid] + cells))
    return "\n".join(lines) + "\n"


def save_matrix(matrix: SimilarityMatrix, path: Path) -> None:
    """Write the JSON document and the sibling ``.tsv`` value table."""
    path = Path(path)
    write_json_atomic(path, matrix.to_payload())
    write_text_atomic(path.with_suffix(".tsv"), values_table(matrix))


def load_matrix(
    path: Path,
    expected_order: Sequence[SampleId] | None = None,
    expected_config_digest: str | None = None,
    strict_digest: bool = False,
) -> SimilarityMatrix:
    """Load a matrix document, enforcing order and provenance expectations.

    An order mismatch is always a hard error. A configuration-digest
    conflict warns by default and raises when ``strict_digest`` is set.
    """
    matrix = SimilarityMatrix.from_payload(read_json(Path(path)))
    if expected_order is not None:
        matrix.check_order(expected_order)
    if expected_config_digest is not None and matrix.config_digest != expected_config_digest:
        message = (
            f"matrix {path} was produced under config digest "
            f"{matrix.config_digest or '<unset>'}, expected {expected_config_digest}"
        )
        if strict_digest:
            raise MatrixError(message)
        logger.warning("%s", message)
    return matrix

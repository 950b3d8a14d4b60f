"""Nearest-class-prototype classification over a similarity matrix.

Each evaluated sample is assigned the class whose members it resembles most
on average: the prototype score of class c for row i is the mean of the
matrix cells from i to every included member of c. Exact ties on the top
prototype score (after rounding the means to six decimals) are refusals:
the sample counts as evaluated and incorrect, never as a coin flip.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping, Sequence

from .corpus import SampleId
from .errors import ClassifyError
from .matrix import SimilarityMatrix

logger = logging.getLogger(__name__)

SELF_MODES = ("include_self", "leave_one_out")

# Prototype means are compared at this precision; closer than that is a tie.
MEAN_DECIMALS = 6

OUTCOME_PREDICTED = "predicted"
OUTCOME_FAILED_TIE = "failed_tie"
OUTCOME_EXCLUDED = "excluded"


@dataclass(frozen=True)
class ClassifySpec:
    self_mode: str = "include_self"

    def __post_init__(self) -> None:
        if self.self_mode not in SELF_MODES:
            raise ClassifyError(
                f"unknown self_mode {self.self_mode!r}; expected one of {SELF_MODES}"
            )


@dataclass(frozen=True)
class PrototypeScores:
    sample_id: SampleId
    mu: Mapping[str, float]


@dataclass(frozen=True)
class Prediction:
    sample_id: SampleId
    outcome: str
    label: str | None = None
    mu: Mapping[str, float] | None = None
    tied_labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.outcome not in (OUTCOME_PREDICTED, OUTCOME_FAILED_TIE, OUTCOME_EXCLUDED):
            raise ClassifyError(f"unknown prediction outcome {self.outcome!r}")
        if (self.outcome == OUTCOME_PREDICTED) != (self.label is not None):
            raise ClassifyError("label must be set exactly when outcome is predicted")


@dataclass(frozen=True)
class EvaluationResult:
    predictions: tuple[Prediction, ...]
    true_labels: tuple[str, ...]
    n_evaluated: int
    n_correct: int
    n_failed_tie: int
    n_excluded: int
    accuracy_percent: float
    self_mode: str

    def to_payload(self) -> dict:
        return {
            "self_mode": self.self_mode,
            "n_evaluated": self.n_evaluated,
            "n_correct": self.n_correct,
            "n_failed_tie": self.n_failed_tie,
            "n_excluded": self.n_excluded,
            "accuracy_percent": self.accuracy_percent,
            "predictions": [
                {
                    "sample_id": str(p.sample_id),
                    "true_label": t,
                    "outcome": p.outcome,
                    "label": p.label,
                    "mu": dict(sorted(p.mu.items())) if p.mu is not None else None,
                    "tied_labels": list(p.tied_labels),
                }
                for p, t in zip(self.predictions, self.true_labels)
            ],
        }

    @classmethod
    def from_payload(cls, payload: Mapping) -> "EvaluationResult":
        try:
            predictions = tuple(
                Prediction(
                    sample_id=SampleId.parse(p["sample_id"]),
                    outcome=str(p["outcome"]),
                    label=None if p["label"] is None else str(p["label"]),
                    mu=(
                        None
                        if p["mu"] is None
                        else {k: float(v) for k, v in p["mu"].items()}
                    ),
                    tied_labels=tuple(p.get("tied_labels", ())),
                )
                for p in payload["predictions"]
            )
            true_labels = tuple(str(p["true_label"]) for p in payload["predictions"])
            return cls(
                predictions=predictions,
                true_labels=true_labels,
                n_evaluated=int(payload["n_evaluated"]),
                n_correct=int(payload["n_correct"]),
                n_failed_tie=int(payload["n_failed_tie"]),
                n_excluded=int(payload["n_excluded"]),
                accuracy_percent=float(payload["accuracy_percent"]),
                self_mode=str(payload["self_mode"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ClassifyError(f"malformed evaluation payload: {exc}") from exc


def round_half_up(value: float, ndigits: int) -> float:
    """Decimal round-half-up; float banker's rounding would bias .5 cases."""
    quantum = Decimal(1).scaleb(-ndigits)
    return float(Decimal(str(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def prototype_scores(
    matrix: SimilarityMatrix,
    class_sets: Mapping[str, Sequence[int]],
    i: int,
    self_mode: str = "include_self",
) -> PrototypeScores:
    """Mean similarity from row i to each class's included members.

    Under leave_one_out the sample's own cell is dropped from its class
    (divisor adjusted). A class whose contributing set is empty — all
    members excluded, or a singleton class under leave_one_out — is omitted
    from the result with a warning rather than poisoning the argmax.
    """
    if self_mode not in SELF_MODES:
        raise ClassifyError(f"unknown self_mode {self_mode!r}; expected one of {SELF_MODES}")
    excluded = set(matrix.excluded_indices)
    if i in excluded:
        raise ClassifyError(f"sample {matrix.sample_ids[i]} is excluded; no prototype scores")
    mu: dict[str, float] = {}
    for label in sorted(class_sets):
        cells = [
            matrix.values[i][j]
            for j in class_sets[label]
            if j not in excluded and not (self_mode == "leave_one_out" and j == i)
        ]
        if not cells:
            logger.warning(
                "class %r has no usable members for %s under self_mode=%s; omitted",
                label, matrix.sample_ids[i], self_mode,
            )
            continue
        mu[label] = round_half_up(sum(cells) / len(cells), MEAN_DECIMALS)
    return PrototypeScores(sample_id=matrix.sample_ids[i], mu=mu)


def predict(scores: PrototypeScores) -> Prediction:
    """Argmax over prototype scores; an exact shared maximum is failed_tie."""
    if not scores.mu:
        raise ClassifyError(f"no prototype scores available for {scores.sample_id}")
    best = max(scores.mu.values())
    winners = tuple(sorted(label for label, m in scores.mu.items() if m == best))
    if len(winners) > 1:
        return Prediction(
            sample_id=scores.sample_id,
            outcome=OUTCOME_FAILED_TIE,
            mu=scores.mu,
            tied_labels=winners,
        )
    return Prediction(
        sample_id=scores.sample_id,
        outcome=OUTCOME_PREDICTED,
        label=winners[0],
        mu=scores.mu,
    )


def accuracy(
    predictions: Sequence[Prediction],
    true_labels: Sequence[str],
    self_mode: str,
) -> EvaluationResult:
    """Tally predictions into an evaluation result.

    failed_tie counts as evaluated-and-incorrect; excluded samples are not
    in n_evaluated. Accuracy is 100·correct/n_evaluated rounded half-up to
    two decimals, matching the printed-table convention.
    """
    if len(predictions) != len(true_labels):
        raise ClassifyError(
            f"{len(predictions)} predictions for {len(true_labels)} labels"
        )
    n_excluded = sum(1 for p in predictions if p.outcome == OUTCOME_EXCLUDED)
    n_failed_tie = sum(1 for p in predictions if p.outcome == OUTCOME_FAILED_TIE)
    n_correct = sum(
        1
        for p, t in zip(predictions, true_labels)
        if p.outcome == OUTCOME_PREDICTED and p.label == t
    )
    n_evaluated = len(predictions) - n_excluded
    if n_evaluated == 0:
        raise ClassifyError("no evaluated samples; accuracy is undefined")
    return EvaluationResult(
        predictions=tuple(predictions),
        true_labels=tuple(true_labels),
        n_evaluated=n_evaluated,
        n_correct=n_correct,
        n_failed_tie=n_failed_tie,
        n_excluded=n_excluded,
        accuracy_percent=round_half_up(100.0 * n_correct / n_evaluated, 2),
        self_mode=self_mode,
    )


def evaluate_matrix(
    matrix: SimilarityMatrix,
    class_sets: Mapping[str, Sequence[int]],
    spec: ClassifySpec = ClassifySpec(),
) -> EvaluationResult:
    """Classify every included row of the matrix against class prototypes.

    ``class_sets`` maps each label to the matrix indices of its members and
    must partition ``range(n)``.
    """
    n = len(matrix.sample_ids)
    seen = sorted(i for members in class_sets.values() for i in members)
    if seen != list(range(n)):
        raise ClassifyError(f"class sets must partition 0..{n - 1}; got indices {seen}")
    label_by_index = {
        i: label for label, members in class_sets.items() for i in members
    }

    excluded = set(matrix.excluded_indices)
    predictions: list[Prediction] = []
    for i in range(n):
        if i in excluded:
            predictions.append(
                Prediction(sample_id=matrix.sample_ids[i], outcome=OUTCOME_EXCLUDED)
            )
            continue
        predictions.append(
            predict(prototype_scores(matrix, class_sets, i, self_mode=spec.self_mode))
        )

    result = accuracy(predictions, [label_by_index[i] for i in range(n)], spec.self_mode)
    if result.n_failed_tie:
        logger.info("%d sample(s) refused on tied prototype means", result.n_failed_tie)
    return result

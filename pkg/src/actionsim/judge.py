"""Pairwise similarity scoring of description sequences.

The judge backend receives both clip-by-clip description sequences in one
prompt and must answer with a number on the fixed 0..100 scale. Response
parsing takes the last standalone number so chain-of-thought preambles are
tolerated; unparseable answers are retried a bounded number of times with an
"answer with only the integer" reminder appended to the conversation.

The ``oracle`` backend is a closed-form stand-in for desk-scale tests:
Jaccard similarity over lowercase alphanumeric unigram sets of the
concatenated sequence texts, scaled to 0..100 and rounded half-up. It is
exactly symmetric and scores identical text 100; it is a test oracle, not a
model of LLM behavior.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Mapping, Protocol

from .cache import ResponseCache
from .corpus import SampleId
from .errors import JudgeError, ScoreParseError
from .caption import DescriptionSequence
from .ioutil import sha256_hex
from .llm import ChatCompletionsClient

logger = logging.getLogger(__name__)

SCORE_MIN = 0.0
SCORE_MAX = 100.0

# Out-of-range responses within this epsilon are clamped; beyond it they are
# treated as unparseable.
SCORE_EPSILON = 0.5

PARSE_RETRIES = 3

RETRY_REMINDER = "Answer with only the integer similarity score between 0 and 100."

SCALE_STATEMENT = "an integer scale from 0 (completely different actions) to 100 (the same action)"

DEFAULT_FOCUS_CLAUSES = (
    "temporal ordering",
    "attack patterns",
    "target regions",
    "key motion transitions",
)

DEFAULT_JUDGE_PROMPT = (
    "You compare two high-speed action videos using their clip-by-clip descriptions.\n"
    "\n"
    "Sequence A:\n"
    "{sequence_a}\n"
    "\n"
    "Sequence B:\n"
    "{sequence_b}\n"
    "\n"
    "{focus}"
    "Score how semantically similar the two action sequences are on {scale}.\n"
    "Respond with a single integer and nothing else."
)


@dataclass(frozen=True)
class SimilarityScore:
    value: float
    raw_response: str
    backend_id: str
    ordered_pair: tuple[SampleId, SampleId]


@dataclass(frozen=True)
class JudgeSpec:
    backend_id: str = "oracle"
    prompt_template: str = DEFAULT_JUDGE_PROMPT
    focus_clauses: tuple[str, ...] = DEFAULT_FOCUS_CLAUSES
    generation_params: Mapping[str, object] = field(
        default_factory=lambda: {"temperature": 0.0, "max_tokens": 64}
    )

    def __post_init__(self) -> None:
        for placeholder in ("{sequence_a}", "{sequence_b}", "{scale}"):
            if placeholder not in self.prompt_template:
                raise JudgeError(f"judge prompt template missing placeholder {placeholder}")


class JudgeBackend(Protocol):
    backend_id: str

    def respond(
        self,
        messages: list[dict],
        pair: tuple[DescriptionSequence, DescriptionSequence],
        spec: JudgeSpec,
    ) -> str: ...


def tokenize(text: str) -> set[str]:
    """Lowercase alphanumeric unigrams."""
    return set(re.findall(r"[a-z0-9]+", text.lower()))


def _round_half_up(value: float) -> int:
    import math

    return math.floor(value + 0.5)


class LexicalOracleJudge:
    """Deterministic Jaccard judge over concatenated sequence texts."""

    backend_id = "oracle"

    def __init__(self) -> None:
        self.calls = 0

    def respond(self, messages, pair, spec) -> str:
        self.calls += 1
        a, b = pair
        set_a = tokenize(" ".join(a.texts()))
        set_b = tokenize(" ".join(b.texts()))
        union = set_a | set_b
        if not union:
            return "100"
        score = _round_half_up(100.0 * len(set_a & set_b) / len(union))
        return str(score)


class RemoteJudgeBackend:
    """Hosted instruct model reached over the chat-completions protocol."""

    def __init__(self, client: ChatCompletionsClient):
        self.client = client
        self.backend_id = f"remote:{client.endpoint.model}"

    def respond(self, messages, pair, spec) -> str:
        params = dict(spec.generation_params)
        return self.client.complete(
            messages,
            temperature=float(params.get("temperature", 0.0)),
            max_tokens=int(params.get("max_tokens", 64)),
        )


def _sequence_lines(label: str, seq: DescriptionSequence) -> str:
    # Captions are collapsed to single lines so the prompt stays one line per clip.
    return "\n".join(
        f"{label}{d.k}: {' '.join(d.text.split())}" for d in seq.descriptions
    )


def build_judge_prompt(a: DescriptionSequence, b: DescriptionSequence, spec: JudgeSpec) -> str:
    """Render the judge prompt; pure function of its inputs."""
    if not a.descriptions or not b.descriptions:
        raise JudgeError("cannot build judge prompt from an empty description sequence")
    if spec.focus_clauses:
        clauses = list(spec.focus_clauses)
        if len(clauses) == 1:
            focus_list = clauses[0]
        else:
            focus_list = ", ".join(clauses[:-1]) + ", and " + clauses[-1]
        focus = f"Focus on {focus_list}.\n\n"
    else:
        focus = ""
    return spec.prompt_template.format(
        sequence_a=_sequence_lines("A", a),
        sequence_b=_sequence_lines("B", b),
        focus=focus,
        scale=SCALE_STATEMENT,
    )


# A standalone number: not glued to a word or a longer number on either side.
_NUMBER = re.compile(r"(?<![\w.])-?\d+(?:\.\d+)?(?!\.?\d)")
# "85/100" and "85 out of 100" are one score, not two numbers.
_SCALE_FRACTION = re.compile(r"(-?\d+(?:\.\d+)?)\s*(?:/\s*100|out\s+of\s+100)(?!\d)", re.IGNORECASE)


def parse_score(raw: str) -> float:
    """Extract the final standalone number in [0, 100] from a judge response.

    Scale denominators ("85/100", "85 out of 100") are collapsed to their
    numerator first. Values out of range by at most SCORE_EPSILON are
    accepted (the caller clamps); anything else is skipped, and a response
    with no in-range number raises ScoreParseError.
    """
    text = _SCALE_FRACTION.sub(r"\1", raw)
    numbers = [float(m.group(0)) for m in _NUMBER.finditer(text)]
    if not numbers:
        raise ScoreParseError(f"no number found in response: {raw!r}")
    for value in reversed(numbers):
        if SCORE_MIN - SCORE_EPSILON <= value <= SCORE_MAX + SCORE_EPSILON:
            return value
    raise ScoreParseError(f"no number within [0, 100] in response: {raw!r}")


def score_pair(
    a: DescriptionSequence,
    b: DescriptionSequence,
    spec: JudgeSpec,
    backend: JudgeBackend,
    cache: ResponseCache | None = None,
) -> SimilarityScore:
    """Judge one ordered pair of description sequences.

    Cached by (prompt digest, backend, generation params). Parsing failures
    re-ask up to PARSE_RETRIES times with the raw answer and a reminder
    appended; a still-unparseable pair raises JudgeError carrying every raw
    response.
    """
    prompt = build_judge_prompt(a, b, spec)

    def fill() -> str:
        messages: list[dict] = [{"role": "user", "content": prompt}]
        raws: list[str] = []
        for _ in range(PARSE_RETRIES):
            raw = backend.respond(messages, (a, b), spec)
            raws.append(raw)
            try:
                parse_score(raw)
                return raw
            except ScoreParseError:
                messages = messages + [
                    {"role": "assistant", "content": raw},
                    {"role": "user", "content": RETRY_REMINDER},
                ]
        raise JudgeError(
            f"unparseable judge response for pair ({a.sample_id}, {b.sample_id}) "
            f"after {PARSE_RETRIES} attempts",
            raw_responses=raws,
        )

    if cache is None:
        raw = fill()
    else:
        key = cache.key_for(
            {
                "kind": "judge",
                "backend_id": backend.backend_id,
                "prompt_sha256": sha256_hex(prompt),
                "generation_params": dict(spec.generation_params),
            }
        )
        raw, _ = cache.get_or_fill(
            key, fill, meta={"pair": [str(a.sample_id), str(b.sample_id)]}
        )

    value = parse_score(raw)
    clamped = min(max(value, SCORE_MIN), SCORE_MAX)
    if clamped != value:
        logger.warning(
            "pair (%s, %s): score %s clamped to %s", a.sample_id, b.sample_id, value, clamped
        )
    return SimilarityScore(
        value=clamped,
        raw_response=raw,
        backend_id=backend.backend_id,
        ordered_pair=(a.sample_id, b.sample_id),
    )

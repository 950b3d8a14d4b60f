"""Per-clip descriptions via a pluggable captioner backend.

Two backends ship:

* ``remote`` sends the clip to a hosted video-language model as an ordered
  set of image attachments plus an instruction prompt.
* ``mock`` renders a deterministic caption from the motion-script
  annotations carried by the clip's frames, with an optional seeded
  token-dropout noise model. It exists so desk-scale runs have a closed-form,
  fully reproducible captioner; it makes no claim about real model behavior.

Responses are cached content-addressed on (clip content digest, prompt
template, generation params, backend id), so identical inputs are described
exactly once per cache.
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

from .cache import ResponseCache
from .corpus import SampleId
from .errors import BackendError, CaptionError, SampleExcluded
from .frames import Clip, FrameSequence
from .ioutil import sha256_hex
from .llm import ChatCompletionsClient, image_content_part

logger = logging.getLogger(__name__)

# Shipped default instruction; a project-specific prompt can replace it via
# configuration. {n} expands to the clip's frame count.
DEFAULT_CAPTION_PROMPT = (
    "You are shown {n} consecutive frames from one short clip of a high-speed "
    "action video, in temporal order. Describe the motion in one or two "
    "sentences: what the person does, how any equipment moves, and the target "
    "region of any strike. Mention only what is visible in the frames."
)

DEFAULT_MOCK_TEMPLATE = "{motions}."


@dataclass(frozen=True)
class Description:
    sample_id: SampleId
    k: int
    text: str
    backend_id: str
    prompt_hash: str


@dataclass(frozen=True)
class DescriptionSequence:
    sample_id: SampleId
    descriptions: tuple[Description, ...]

    def __post_init__(self) -> None:
        ks = [d.k for d in self.descriptions]
        if ks != list(range(1, len(ks) + 1)):
            raise CaptionError(f"sample {self.sample_id}: clip indices must be 1..K with no gaps, got {ks}")

    def texts(self) -> list[str]:
        return [d.text for d in self.descriptions]

    def __len__(self) -> int:
        return len(self.descriptions)


@dataclass(frozen=True)
class CaptionerSpec:
    backend_id: str = "mock"
    min_frames: int = 16
    prompt_template: str = DEFAULT_CAPTION_PROMPT
    generation_params: Mapping[str, object] = field(
        default_factory=lambda: {"temperature": 0.0, "max_tokens": 256}
    )

    def __post_init__(self) -> None:
        if self.min_frames < 1:
            raise CaptionError(f"min_frames must be >= 1, got {self.min_frames}")


@dataclass(frozen=True)
class InclusionDecision:
    included: bool
    reason: str | None = None


class CaptionBackend(Protocol):
    backend_id: str

    def describe(self, clip: Clip, prompt: str, spec: CaptionerSpec) -> str: ...


class RemoteCaptionBackend:
    """Hosted multimodal model reached over the chat-completions protocol."""

    def __init__(self, client: ChatCompletionsClient):
        self.client = client
        self.backend_id = f"remote:{client.endpoint.model}"

    def describe(self, clip: Clip, prompt: str, spec: CaptionerSpec) -> str:
        content: list[dict] = [{"type": "text", "text": prompt}]
        content.extend(image_content_part(frame.image) for frame in clip.frames)
        params = dict(spec.generation_params)
        return self.client.complete(
            [{"role": "user", "content": content}],
            temperature=float(params.get("temperature", 0.0)),
            max_tokens=int(params.get("max_tokens", 256)),
        )


def _dropout_roll(seed: int, clip_digest: str, position: int, token: str) -> float:
    digest = hashlib.sha256(f"{seed}:{clip_digest}:{position}:{token}".encode()).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


class MockCaptionBackend:
    """Deterministic captioner over motion-script frame annotations.

    Each distinct annotation is looked up in ``phrase_lexicon`` (falling back
    to itself), the results are joined in order with " then ", and the join
    is rendered through ``caption_template``. With ``dropout_p`` > 0 in the
    generation params, each word of the joined motion text is dropped
    independently with that probability; the decision is a pure hash of
    (seed, clip content digest, word position, word), so output is identical
    at any concurrency level and across repeated runs.
    """

    def __init__(
        self,
        caption_template: str = DEFAULT_MOCK_TEMPLATE,
        phrase_lexicon: Mapping[str, str] | None = None,
    ):
        self.caption_template = caption_template
        self.phrase_lexicon = dict(phrase_lexicon or {})
        # Template/lexicon are backend state, so they must show up in the
        # backend id (and hence the cache key).
        if caption_template == DEFAULT_MOCK_TEMPLATE and not self.phrase_lexicon:
            self.backend_id = "mock"
        else:
            fingerprint = sha256_hex(
                caption_template + "\x00" + repr(sorted(self.phrase_lexicon.items()))
            )[:8]
            self.backend_id = f"mock:{fingerprint}"
        self.calls = 0

    def describe(self, clip: Clip, prompt: str, spec: CaptionerSpec) -> str:
        self.calls += 1
        params = dict(spec.generation_params)
        dropout_p = float(params.get("dropout_p", 0.0))
        seed = int(params.get("seed", 0))

        motions: list[str] = []
        for frame in clip.frames:
            if frame.annotation and (not motions or motions[-1] != frame.annotation):
                motions.append(frame.annotation)
        motions = [self.phrase_lexicon.get(m, m) for m in motions]
        if not motions:
            return "no distinct motion is visible."

        joined = " then ".join(motions)
        if dropout_p > 0.0:
            digest = clip.content_digest()
            words = joined.split(" ")
            kept = [
                word
                for position, word in enumerate(words)
                if _dropout_roll(seed, digest, position, word) >= dropout_p
            ]
            joined = " ".join(kept) if kept else "motion unclear"
        return self.caption_template.format(motions=joined)


def exclusion_check(seq: FrameSequence, clip_length: int, spec: CaptionerSpec) -> InclusionDecision:
    """Decide whether a sequence satisfies the captioner's input requirements."""
    if clip_length < spec.min_frames:
        return InclusionDecision(
            included=False,
            reason=f"clip length {clip_length} below backend minimum of {spec.min_frames} frames",
        )
    if len(seq.frames) // clip_length == 0:
        return InclusionDecision(
            included=False,
            reason=f"fewer than one chunk ({len(seq.frames)} frames < {clip_length})",
        )
    return InclusionDecision(included=True)


def _cache_payload(clip_digest: str, spec: CaptionerSpec, backend_id: str) -> dict:
    return {
        "kind": "caption",
        "backend_id": backend_id,
        "prompt_template": spec.prompt_template,
        "generation_params": dict(spec.generation_params),
        "clip_digest": clip_digest,
    }


def describe_clip(
    clip: Clip,
    spec: CaptionerSpec,
    backend: CaptionBackend,
    cache: ResponseCache | None = None,
) -> Description:
    """Describe one clip, serving identical (content, spec) pairs from cache."""
    if len(clip.frames) < spec.min_frames:
        raise SampleExcluded(
            f"clip {clip.sample_id}#{clip.k} has {len(clip.frames)} frames, backend needs {spec.min_frames}"
        )
    prompt = spec.prompt_template.format(n=len(clip.frames))
    prompt_hash = sha256_hex(prompt)[:16]

    def fill() -> str:
        text = backend.describe(clip, prompt, spec)
        if not text.strip():
            raise BackendError(f"empty caption for clip {clip.sample_id}#{clip.k}")
        return text

    if cache is None:
        text = fill()
    else:
        key = cache.key_for(_cache_payload(clip.content_digest(), spec, backend.backend_id))
        text, _ = cache.get_or_fill(key, fill, meta={"sample": str(clip.sample_id), "k": clip.k})

    return Description(
        sample_id=clip.sample_id,
        k=clip.k,
        text=text,
        backend_id=backend.backend_id,
        prompt_hash=prompt_hash,
    )


def describe_sample(
    clips: Sequence[Clip],
    spec: CaptionerSpec,
    backend: CaptionBackend,
    cache: ResponseCache | None = None,
    concurrency: int = 1,
) -> DescriptionSequence:
    """Describe every clip of one sample, preserving clip order.

    Backend calls fan out up to ``concurrency`` in flight; results are
    assembled by clip index, never by completion order. Any clip failure
    aborts the sample with a per-clip error report.
    """
    if not clips:
        raise SampleExcluded("no clips: sequence shorter than one clip window")
    sample_id = clips[0].sample_id
    ordered = sorted(clips, key=lambda c: c.k)

    results: dict[int, Description] = {}
    failures: list[tuple[int, str]] = []
    if concurrency <= 1:
        for clip in ordered:
            try:
                results[clip.k] = describe_clip(clip, spec, backend, cache)
            except Exception as exc:  # noqa: BLE001 - collected into the report
                failures.append((clip.k, str(exc)))
    else:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            futures = {clip.k: pool.submit(describe_clip, clip, spec, backend, cache) for clip in ordered}
            for k, future in futures.items():
                try:
                    results[k] = future.result()
                except Exception as exc:  # noqa: BLE001
                    failures.append((k, str(exc)))

    if failures:
        failures.sort()
        raise CaptionError(
            f"sample {sample_id}: {len(failures)} of {len(ordered)} clips failed",
            clip_errors=failures,
        )
    return DescriptionSequence(
        sample_id=sample_id,
        descriptions=tuple(results[k] for k in sorted(results)),
    )

"""Experiment grid orchestration.

One run evaluates every configured (rate, overlay, observation) variant over
the corpus, sequentially, reusing native frames in memory and backend
responses through the content-addressed cache. Each stage persists its
artifact under the run directory and is loaded instead of recomputed when it
already exists, so interrupted runs resume without new backend calls.

Run directory layout (all paths relative to ``<out_dir>/run-<digest12>``)::

    variants/<slug>/ingest.json      clip inventory + exclusions
    variants/<slug>/captions.json    description sequences
    variants/<slug>/matrix.json/.tsv similarity matrix (+ plain table)
    variants/<slug>/evaluation.json  NCP result, both self modes
    variants/<slug>/heatmap.svg      shared-scale heatmap
    report.md / summary.json         tables + machine-readable summary
    diagnostics.json                 timings and cache counters (not
                                     byte-stable; excluded from determinism
                                     comparisons)
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .cache import ResponseCache
from .caption import (
    CaptionerSpec,
    Description,
    DescriptionSequence,
    MockCaptionBackend,
    RemoteCaptionBackend,
    exclusion_check,
    describe_sample,
)
from .classify import ClassifySpec, EvaluationResult, evaluate_matrix
from .config import RunConfig
from .corpus import Corpus, SampleId, class_index_sets, load_manifest
from .errors import ActionSimError, CaptionError, ClassifyError, ConfigError, SampleExcluded
from .frames import Clip, FrameSequence, decimate, extract_frames, segment_clips, truncate_partial
from .ioutil import digest_payload, read_json, write_json_atomic
from .judge import JudgeSpec, LexicalOracleJudge, RemoteJudgeBackend
from .llm import ChatCompletionsClient, ChatEndpoint
from .matrix import MatrixSpec, SimilarityMatrix, build_matrix, load_matrix, save_matrix
from .overlay import JointTrack, load_joint_track, render_overlay
from .report import ExperimentSummary, VariantKey, VariantOutcome, save_heatmap, save_report

logger = logging.getLogger(__name__)

STAGES = ("ingest", "caption", "judge", "evaluate", "report")


def corpus_digest_payload(corpus: Corpus) -> dict:
    """Manifest-content identity: stable across relocated source trees."""
    return {
        "class_set": list(corpus.class_set),
        "samples": [
            {
                "id": str(r.id),
                "native_rate_hz": r.native_rate_hz,
                "cut_frame": r.cut_frame,
                "has_track": r.joint_track is not None,
            }
            for r in corpus.samples
        ],
    }


def run_digest(config: RunConfig, corpus: Corpus) -> str:
    return digest_payload(
        {"config": config.digest_payload(), "corpus": corpus_digest_payload(corpus)}
    )


@dataclass
class RunContext:
    config: RunConfig
    corpus: Corpus
    config_digest: str
    run_dir: Path
    cache: ResponseCache
    caption_backend: object
    judge_backend: object
    stats: dict = field(default_factory=dict)
    _native: dict[SampleId, FrameSequence] = field(default_factory=dict)
    _tracks: dict[SampleId, JointTrack] = field(default_factory=dict)

    def native_frames(self, sample_id: SampleId) -> FrameSequence:
        if sample_id not in self._native:
            self._native[sample_id] = extract_frames(self.corpus.record(sample_id))
        return self._native[sample_id]

    def joint_track(self, sample_id: SampleId) -> JointTrack:
        if sample_id not in self._tracks:
            record = self.corpus.record(sample_id)
            if record.joint_track is None:
                raise ConfigError(f"sample {sample_id} has no joint track")
            self._tracks[sample_id] = load_joint_track(record.joint_track)
        return self._tracks[sample_id]

    def variant_dir(self, key: VariantKey) -> Path:
        return self.run_dir / "variants" / key.slug


def _make_caption_backend(config: RunConfig):
    if config.caption_backend == "mock":
        return MockCaptionBackend(caption_template=config.mock_template)
    endpoint = config.caption_endpoint
    client = ChatCompletionsClient(
        ChatEndpoint(
            base_url=endpoint.base_url,
            model=endpoint.model,
            api_key_env=endpoint.api_key_env,
            timeout_s=endpoint.timeout_s,
            max_retries=endpoint.max_retries,
        )
    )
    return RemoteCaptionBackend(client)


def _make_judge_backend(config: RunConfig):
    if config.judge_backend == "oracle":
        return LexicalOracleJudge()
    endpoint = config.judge_endpoint
    client = ChatCompletionsClient(
        ChatEndpoint(
            base_url=endpoint.base_url,
            model=endpoint.model,
            api_key_env=endpoint.api_key_env,
            timeout_s=endpoint.timeout_s,
            max_retries=endpoint.max_retries,
        )
    )
    return RemoteJudgeBackend(client)


def prepare_run(config: RunConfig) -> RunContext:
    """Validate config against the corpus and set up the run directory."""
    corpus = load_manifest(config.manifest)
    for record in corpus.samples:
        for rate in config.rates_hz:
            if rate > record.native_rate_hz:
                raise ConfigError(
                    f"rate {rate} Hz exceeds native rate of sample {record.id} "
                    f"({record.native_rate_hz} Hz)"
                )
            ratio = record.native_rate_hz / rate
            if abs(ratio - round(ratio)) > 1e-9:
                raise ConfigError(
                    f"rate {rate} Hz does not divide native rate of sample "
                    f"{record.id} ({record.native_rate_hz} Hz)"
                )
    if True in config.overlay_variants:
        missing = [str(r.id) for r in corpus.samples if r.joint_track is None]
        if missing:
            raise ConfigError(
                f"overlay variants configured but samples lack joint tracks: {missing}"
            )

    digest = run_digest(config, corpus)
    run_dir = config.out_dir / f"run-{digest[:12]}"
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
        probe = run_dir / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {run_dir} is not writable: {exc}") from exc

    cache = ResponseCache(config.resolved_cache_dir())
    return RunContext(
        config=config,
        corpus=corpus,
        config_digest=digest,
        run_dir=run_dir,
        cache=cache,
        caption_backend=_make_caption_backend(config),
        judge_backend=_make_judge_backend(config),
    )


def variant_grid(config: RunConfig) -> list[VariantKey]:
    return [
        VariantKey(rate_hz=rate, overlay=overlay, observation=observation)
        for rate in config.rates_hz
        for overlay in config.overlay_variants
        for observation in config.observation_variants
    ]


def _caption_spec(ctx: RunContext, key: VariantKey) -> CaptionerSpec:
    params: dict[str, object] = {"temperature": 0.0, "max_tokens": 256}
    if ctx.config.caption_backend == "mock":
        params = {
            "dropout_p": ctx.config.dropout_by_rate.get(key.rate_hz, 0.0),
            "seed": ctx.config.seed,
        }
    return CaptionerSpec(
        backend_id=ctx.config.caption_backend,
        min_frames=ctx.config.min_frames,
        prompt_template=ctx.config.caption_prompt,
        generation_params=params,
    )


def ingest_variant(
    ctx: RunContext, key: VariantKey
) -> tuple[list[list[Clip] | None], dict[str, str]]:
    """Per-sample clips for one variant; ``None`` plus a reason = excluded.

    Per-sample ingest failures exclude that sample and the run continues;
    the reasons land in ingest.json so no gap is silent.
    """
    spec = _caption_spec(ctx, key)
    clips_per_sample: list[list[Clip] | None] = []
    reasons: dict[str, str] = {}
    for record in ctx.corpus.samples:
        try:
            seq = decimate(ctx.native_frames(record.id), key.rate_hz)
            if key.observation == "partial":
                if record.cut_frame is None:
                    raise SampleExcluded("no cut point defined for partial observation")
                seq = truncate_partial(seq, record.cut_frame)
            if key.overlay:
                seq = render_overlay(seq, ctx.joint_track(record.id))
            decision = exclusion_check(seq, ctx.config.clip_length, spec)
            if not decision.included:
                raise SampleExcluded(decision.reason)
            clips = segment_clips(seq, ctx.config.clip_length)
            clips_per_sample.append(clips)
        except SampleExcluded as exc:
            reasons[str(record.id)] = exc.reason
            clips_per_sample.append(None)
        except ActionSimError as exc:
            reasons[str(record.id)] = f"ingest failed: {exc}"
            clips_per_sample.append(None)
            logger.warning("variant %s: sample %s excluded: %s", key.slug, record.id, exc)

    inventory = {
        "variant": key.slug,
        "config_digest": ctx.config_digest,
        "samples": [
            {
                "id": str(record.id),
                "included": clips is not None,
                "reason": reasons.get(str(record.id)),
                "n_clips": len(clips) if clips is not None else 0,
                "clip_native_indices": (
                    [[f.index_native for f in clip.frames] for clip in clips]
                    if clips is not None
                    else []
                ),
            }
            for record, clips in zip(ctx.corpus.samples, clips_per_sample)
        ],
    }
    variant_dir = ctx.variant_dir(key)
    variant_dir.mkdir(parents=True, exist_ok=True)
    write_json_atomic(variant_dir / "ingest.json", inventory)
    return clips_per_sample, reasons


def _captions_payload(
    ctx: RunContext, key: VariantKey, sequences: list[DescriptionSequence | None],
    reasons: dict[str, str],
) -> dict:
    return {
        "variant": key.slug,
        "config_digest": ctx.config_digest,
        "samples": [
            {
                "id": str(record.id),
                "excluded_reason": reasons.get(str(record.id)),
                "descriptions": (
                    None
                    if seq is None
                    else [
                        {
                            "k": d.k,
                            "text": d.text,
                            "backend_id": d.backend_id,
                            "prompt_hash": d.prompt_hash,
                        }
                        for d in seq.descriptions
                    ]
                ),
            }
            for record, seq in zip(ctx.corpus.samples, sequences)
        ],
    }


def _sequences_from_payload(payload: Mapping) -> tuple[list[DescriptionSequence | None], dict[str, str]]:
    sequences: list[DescriptionSequence | None] = []
    reasons: dict[str, str] = {}
    for entry in payload["samples"]:
        sample_id = SampleId.parse(entry["id"])
        if entry["descriptions"] is None:
            sequences.append(None)
            if entry.get("excluded_reason"):
                reasons[str(sample_id)] = entry["excluded_reason"]
            continue
        sequences.append(
            DescriptionSequence(
                sample_id=sample_id,
                descriptions=tuple(
                    Description(
                        sample_id=sample_id,
                        k=int(d["k"]),
                        text=str(d["text"]),
                        backend_id=str(d["backend_id"]),
                        prompt_hash=str(d["prompt_hash"]),
                    )
                    for d in entry["descriptions"]
                ),
            )
        )
    return sequences, reasons


def caption_variant(
    ctx: RunContext, key: VariantKey
) -> tuple[list[DescriptionSequence | None], dict[str, str]]:
    """Describe every included sample; loads captions.json when present."""
    captions_path = ctx.variant_dir(key) / "captions.json"
    if captions_path.exists():
        return _sequences_from_payload(read_json(captions_path))

    clips_per_sample, reasons = ingest_variant(ctx, key)
    spec = _caption_spec(ctx, key)
    sequences: list[DescriptionSequence | None] = []
    for record, clips in zip(ctx.corpus.samples, clips_per_sample):
        if clips is None:
            sequences.append(None)
            continue
        try:
            sequences.append(
                describe_sample(
                    clips,
                    spec,
                    ctx.caption_backend,
                    cache=ctx.cache,
                    concurrency=ctx.config.caption_concurrency,
                )
            )
        except SampleExcluded as exc:
            reasons[str(record.id)] = exc.reason
            sequences.append(None)
        except CaptionError as exc:
            # Backend trouble is not an exclusion: resume must retry, so fail loudly.
            raise CaptionError(
                f"variant {key.slug}: {exc}", clip_errors=exc.clip_errors
            ) from exc

    write_json_atomic(captions_path, _captions_payload(ctx, key, sequences, reasons))
    return sequences, reasons


def judge_variant(ctx: RunContext, key: VariantKey) -> SimilarityMatrix:
    """Build (or load) the similarity matrix for one variant."""
    matrix_path = ctx.variant_dir(key) / "matrix.json"
    order = list(ctx.corpus.sample_ids)
    if matrix_path.exists():
        return load_matrix(
            matrix_path,
            expected_order=order,
            expected_config_digest=ctx.config_digest,
            strict_digest=True,
        )

    sequences, _ = caption_variant(ctx, key)
    judge_spec = JudgeSpec(
        backend_id=ctx.config.judge_backend,
        prompt_template=ctx.config.judge_prompt,
        focus_clauses=ctx.config.focus_clauses,
    )
    matrix = build_matrix(
        sequences,
        order,
        judge_spec,
        ctx.judge_backend,
        MatrixSpec(
            symmetry=ctx.config.symmetry,
            diagonal=ctx.config.diagonal,
            concurrency=ctx.config.judge_concurrency,
        ),
        cache=ctx.cache,
        config_digest=ctx.config_digest,
    )
    save_matrix(matrix, matrix_path)
    return matrix


ALTERNATE_SELF_MODE = {"include_self": "leave_one_out", "leave_one_out": "include_self"}


def evaluate_variant(ctx: RunContext, key: VariantKey) -> tuple[EvaluationResult | None, str]:
    """Run NCP for one variant; both self modes persist side by side.

    Returns (primary evaluation, excluded_reason). A variant whose samples
    are all excluded yields (None, reason) — an explicit record, not a gap.
    """
    evaluation_path = ctx.variant_dir(key) / "evaluation.json"
    if evaluation_path.exists():
        payload = read_json(evaluation_path)
        if payload.get("excluded_reason"):
            return None, payload["excluded_reason"]
        return EvaluationResult.from_payload(payload["primary"]), ""

    matrix = judge_variant(ctx, key)
    class_sets = class_index_sets(ctx.corpus)
    try:
        primary = evaluate_matrix(matrix, class_sets, ClassifySpec(ctx.config.self_mode))
    except ClassifyError as exc:
        reason = str(exc)
        write_json_atomic(
            evaluation_path,
            {"excluded_reason": reason, "primary": None, "alternate": None,
             "config_digest": ctx.config_digest},
        )
        return None, reason

    alternate_payload = None
    try:
        alternate = evaluate_matrix(
            matrix, class_sets, ClassifySpec(ALTERNATE_SELF_MODE[ctx.config.self_mode])
        )
        alternate_payload = alternate.to_payload()
    except ClassifyError as exc:
        logger.warning("variant %s: alternate self mode unavailable: %s", key.slug, exc)

    write_json_atomic(
        evaluation_path,
        {
            "excluded_reason": None,
            "primary": primary.to_payload(),
            "alternate": alternate_payload,
            "config_digest": ctx.config_digest,
        },
    )
    return primary, ""


def run_experiment(config: RunConfig) -> tuple[ExperimentSummary, Path]:
    """Execute the full grid and emit heatmaps, tables, and the summary."""
    started = time.monotonic()
    ctx = prepare_run(config)
    grid = variant_grid(config)
    logger.info("run %s: %d variants", ctx.config_digest[:12], len(grid))

    outcomes = []
    for position, key in enumerate(grid):
        evaluation, reason = evaluate_variant(ctx, key)
        matrix_rel = f"variants/{key.slug}/matrix.json"
        heatmap_path = ctx.variant_dir(key) / "heatmap.svg"
        if not heatmap_path.exists():
            matrix = judge_variant(ctx, key)  # loads the saved matrix, rebuilds if deleted
            # One color bar per report, on the grid's first heatmap.
            save_heatmap(
                matrix,
                heatmap_path,
                colorbar=(position == 0),
                title=key.slug,
            )
        outcomes.append(
            VariantOutcome(
                key=key,
                accuracy_percent=None if evaluation is None else evaluation.accuracy_percent,
                excluded=evaluation is None,
                excluded_reason=reason,
                matrix_path=matrix_rel,
                evaluation_path=f"variants/{key.slug}/evaluation.json",
            )
        )

    summary = ExperimentSummary(
        variants=tuple(outcomes),
        config_digest=ctx.config_digest,
        self_mode=config.self_mode,
    )
    save_report(summary, ctx.run_dir / "report.md", ctx.run_dir / "summary.json")
    write_json_atomic(
        ctx.run_dir / "diagnostics.json",
        {
            "wall_time_s": round(time.monotonic() - started, 3),
            "cache": ctx.cache.stats,
            "caption_backend_calls": getattr(ctx.caption_backend, "calls", None),
            "judge_backend_calls": getattr(ctx.judge_backend, "calls", None),
        },
    )
    logger.info("run %s complete", ctx.config_digest[:12])
    return summary, ctx.run_dir


def run_stage(config: RunConfig, stage: str) -> Path:
    """Execute the grid only up to ``stage`` (for the per-stage subcommands)."""
    if stage not in STAGES:
        raise ConfigError(f"unknown stage {stage!r}; expected one of {STAGES}")
    if stage == "report":
        _, run_dir = run_experiment(config)
        return run_dir
    ctx = prepare_run(config)
    for key in variant_grid(config):
        if stage == "ingest":
            ingest_variant(ctx, key)
        elif stage == "caption":
            caption_variant(ctx, key)
        elif stage == "judge":
            judge_variant(ctx, key)
        else:
            evaluate_variant(ctx, key)
    return ctx.run_dir

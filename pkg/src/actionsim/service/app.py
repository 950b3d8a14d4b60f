"""HTTP facade over the core pipeline.

The service exposes the pure operations (exclusion check, score parsing,
pair judging, NCP evaluation, table rendering) plus an asynchronous run
endpoint that executes a full experiment grid in a background thread.
Manifest and config arguments are paths on the service host: the service is
a long-running wrapper around a local corpus, not a file-upload API.
"""

from __future__ import annotations

import logging
import threading
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..caption import CaptionerSpec, Description, DescriptionSequence, exclusion_check
from ..classify import ClassifySpec, evaluate_matrix
from ..config import load_config
from ..corpus import SampleId, load_manifest
from ..errors import ActionSimError, ScoreParseError
from ..frames import Frame, FrameSequence
from ..judge import JudgeSpec, LexicalOracleJudge, parse_score, score_pair
from ..matrix import SimilarityMatrix
from ..pipeline import run_experiment
from ..report import ExperimentSummary, emit_tables
from . import schemas

logger = logging.getLogger(__name__)


@dataclass
class RunJob:
    run_id: str
    status: str = "running"
    run_dir: str | None = None
    summary: dict | None = None
    error: str | None = None


@dataclass
class JobRegistry:
    jobs: dict[str, RunJob] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def create(self) -> RunJob:
        job = RunJob(run_id=uuid.uuid4().hex[:12])
        with self.lock:
            self.jobs[job.run_id] = job
        return job

    def get(self, run_id: str) -> RunJob | None:
        with self.lock:
            return self.jobs.get(run_id)


def _sequence_from_texts(sample_id: str, texts: list[str]) -> DescriptionSequence:
    sid = SampleId.parse(sample_id)
    return DescriptionSequence(
        sample_id=sid,
        descriptions=tuple(
            Description(
                sample_id=sid, k=k, text=text, backend_id="client", prompt_hash="0" * 16
            )
            for k, text in enumerate(texts, start=1)
        ),
    )


def create_app(judge_backend=None) -> FastAPI:
    """Build the service; ``judge_backend`` defaults to the lexical oracle."""
    app = FastAPI(title="actionsim", version=__version__)
    registry = JobRegistry()
    judge = judge_backend if judge_backend is not None else LexicalOracleJudge()

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/corpus/validate", response_model=schemas.ValidateManifestResponse)
    def corpus_validate(req: schemas.ValidateManifestRequest) -> schemas.ValidateManifestResponse:
        try:
            corpus = load_manifest(req.manifest)
        except ActionSimError as exc:
            return schemas.ValidateManifestResponse(valid=False, error=str(exc))
        return schemas.ValidateManifestResponse(
            valid=True,
            sample_ids=[str(s) for s in corpus.sample_ids],
            class_set=list(corpus.class_set),
        )

    @app.post("/ingest/exclusion-check", response_model=schemas.ExclusionCheckResponse)
    def ingest_exclusion(req: schemas.ExclusionCheckRequest) -> schemas.ExclusionCheckResponse:
        # The decision depends only on counts, so a placeholder raster suffices.
        from PIL import Image

        image = Image.new("L", (1, 1))
        seq = FrameSequence(
            sample_id=SampleId("Q", 1),
            rate_hz=1.0,
            frames=tuple(
                Frame(index_native=i, timestamp_s=float(i), image=image)
                for i in range(req.n_frames)
            ),
        )
        decision = exclusion_check(
            seq, req.clip_length, CaptionerSpec(min_frames=req.min_frames)
        )
        return schemas.ExclusionCheckResponse(included=decision.included, reason=decision.reason)

    @app.post("/judge/parse-score", response_model=schemas.ParseScoreResponse)
    def judge_parse(req: schemas.ParseScoreRequest) -> schemas.ParseScoreResponse:
        try:
            return schemas.ParseScoreResponse(value=parse_score(req.raw))
        except ScoreParseError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.post("/judge/score", response_model=schemas.ScorePairResponse)
    def judge_score(req: schemas.ScorePairRequest) -> schemas.ScorePairResponse:
        try:
            score = score_pair(
                _sequence_from_texts(req.id_a, req.sequence_a),
                _sequence_from_texts(req.id_b, req.sequence_b),
                JudgeSpec(backend_id=judge.backend_id),
                judge,
            )
        except ActionSimError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return schemas.ScorePairResponse(
            value=score.value, raw_response=score.raw_response, backend_id=score.backend_id
        )

    @app.post("/classify/evaluate", response_model=schemas.EvaluateResponse)
    def classify_evaluate(req: schemas.EvaluateRequest) -> schemas.EvaluateResponse:
        try:
            matrix = SimilarityMatrix.from_payload(req.matrix)
            result = evaluate_matrix(matrix, req.class_sets, ClassifySpec(req.self_mode))
        except ActionSimError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return schemas.EvaluateResponse(evaluation=result.to_payload())

    @app.post("/report/tables", response_model=schemas.TablesResponse)
    def report_tables(req: schemas.TablesRequest) -> schemas.TablesResponse:
        try:
            summary = ExperimentSummary.from_payload(req.summary)
        except ActionSimError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return schemas.TablesResponse(markdown=emit_tables(summary))

    @app.post("/runs", response_model=schemas.RunStatusResponse)
    def start_run(req: schemas.StartRunRequest) -> schemas.RunStatusResponse:
        try:
            config = load_config(req.config, overrides=req.overrides)
        except ActionSimError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        job = registry.create()

        def work() -> None:
            try:
                summary, run_dir = run_experiment(config)
                job.summary = summary.to_payload()
                job.run_dir = str(run_dir)
                job.status = "completed"
            except Exception as exc:  # noqa: BLE001 - reported through the job record
                logger.exception("run %s failed", job.run_id)
                job.error = str(exc)
                job.status = "failed"

        threading.Thread(target=work, name=f"run-{job.run_id}", daemon=True).start()
        return schemas.RunStatusResponse(run_id=job.run_id, status="running")

    @app.get("/runs/{run_id}", response_model=schemas.RunStatusResponse)
    def run_status(run_id: str) -> schemas.RunStatusResponse:
        job = registry.get(run_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id}")
        return schemas.RunStatusResponse(
            run_id=job.run_id,
            status=job.status,
            run_dir=job.run_dir,
            summary=job.summary,
            error=job.error,
        )

    return app

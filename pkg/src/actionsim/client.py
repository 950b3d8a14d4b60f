"""Thin HTTP client for the service; the CLI delegates through this.

Accepts an injected httpx-compatible client so tests can wire it straight
to an in-process ASGI app.
"""

from __future__ import annotations

import httpx

from .errors import ActionSimError


class ServiceError(ActionSimError):
    """The service rejected a request or is unreachable."""


class ServiceClient:
    def __init__(self, base_url: str = "", http: httpx.Client | None = None):
        if http is None:
            if not base_url:
                raise ServiceError("ServiceClient needs a base_url or an injected client")
            http = httpx.Client(base_url=base_url, timeout=600.0)
        self._http = http

    def _post(self, path: str, payload: dict) -> dict:
        try:
            response = self._http.post(path, json=payload)
        except httpx.HTTPError as exc:
            raise ServiceError(f"service unreachable: {exc}") from exc
        if response.status_code != 200:
            try:
                detail = response.json().get("detail", response.text)
            except ValueError:
                detail = response.text
            raise ServiceError(f"service error {response.status_code} on {path}: {detail}")
        return response.json()

    def health(self) -> dict:
        try:
            response = self._http.get("/health")
        except httpx.HTTPError as exc:
            raise ServiceError(f"service unreachable: {exc}") from exc
        if response.status_code != 200:
            raise ServiceError(f"service error {response.status_code} on /health")
        return response.json()

    def validate_manifest(self, manifest: str) -> dict:
        return self._post("/corpus/validate", {"manifest": manifest})

    def exclusion_check(self, n_frames: int, clip_length: int = 16, min_frames: int = 16) -> dict:
        return self._post(
            "/ingest/exclusion-check",
            {"n_frames": n_frames, "clip_length": clip_length, "min_frames": min_frames},
        )

    def parse_score(self, raw: str) -> float:
        return float(self._post("/judge/parse-score", {"raw": raw})["value"])

    def score_pair(
        self, sequence_a: list[str], sequence_b: list[str], id_a: str = "A1", id_b: str = "B1"
    ) -> dict:
        return self._post(
            "/judge/score",
            {"sequence_a": sequence_a, "sequence_b": sequence_b, "id_a": id_a, "id_b": id_b},
        )

    def evaluate(self, matrix_payload: dict, class_sets: dict, self_mode: str) -> dict:
        return self._post(
            "/classify/evaluate",
            {"matrix": matrix_payload, "class_sets": class_sets, "self_mode": self_mode},
        )["evaluation"]

    def render_tables(self, summary_payload: dict) -> str:
        return self._post("/report/tables", {"summary": summary_payload})["markdown"]

    def start_run(self, config: str, overrides: dict | None = None) -> dict:
        return self._post("/runs", {"config": config, "overrides": overrides or {}})

    def run_status(self, run_id: str) -> dict:
        try:
            response = self._http.get(f"/runs/{run_id}")
        except httpx.HTTPError as exc:
            raise ServiceError(f"service unreachable: {exc}") from exc
        if response.status_code != 200:
            raise ServiceError(f"service error {response.status_code} on /runs/{run_id}")
        return response.json()

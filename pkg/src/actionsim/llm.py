"""Minimal chat-completions client for hosted VLM/LLM backends.

Models are reached over the de-facto standard JSON-over-HTTP chat protocol;
nothing runs in-process. Transport failures and rate-limit/server responses
are retried with bounded exponential backoff.
"""

from __future__ import annotations

import base64
import io
import logging
import os
import time
from dataclasses import dataclass

import httpx
from PIL import Image

from .errors import BackendError

logger = logging.getLogger(__name__)

RETRYABLE_STATUS = {408, 429, 500, 502, 503, 504}


@dataclass(frozen=True)
class ChatEndpoint:
    """Where and how to reach a hosted model."""

    base_url: str
    model: str
    api_key_env: str = "ACTIONSIM_API_KEY"
    timeout_s: float = 120.0
    max_retries: int = 3
    backoff_base_s: float = 1.0


class ChatCompletionsClient:
    def __init__(self, endpoint: ChatEndpoint, transport: httpx.BaseTransport | None = None):
        self.endpoint = endpoint
        self.calls = 0
        headers = {}
        api_key = os.environ.get(endpoint.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._http = httpx.Client(
            base_url=endpoint.base_url.rstrip("/"),
            headers=headers,
            timeout=endpoint.timeout_s,
            transport=transport,
        )

    def complete(self, messages: list[dict], temperature: float = 0.0, max_tokens: int = 256) -> str:
        """One chat completion; returns the assistant text or raises BackendError."""
        payload = {
            "model": self.endpoint.model,
            "messages": messages,
            "temperature": temperature,
            "max_tokens": max_tokens,
        }
        last_error: Exception | None = None
        for attempt in range(self.endpoint.max_retries + 1):
            if attempt:
                delay = self.endpoint.backoff_base_s * (2 ** (attempt - 1))
                logger.warning("backend retry %d/%d in %.1fs: %s",
                               attempt, self.endpoint.max_retries, delay, last_error)
                time.sleep(delay)
            try:
                self.calls += 1
                response = self._http.post("/chat/completions", json=payload)
            except httpx.TransportError as exc:
                last_error = exc
                continue
            if response.status_code in RETRYABLE_STATUS:
                last_error = BackendError(f"backend returned HTTP {response.status_code}")
                continue
            if response.status_code != 200:
                raise BackendError(f"backend returned HTTP {response.status_code}: {response.text[:500]}")
            try:
                text = response.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as exc:
                raise BackendError(f"malformed backend response: {exc}") from exc
            if not (text or "").strip():
                raise BackendError("backend returned empty response text")
            return text
        raise BackendError(f"backend unreachable after {self.endpoint.max_retries} retries: {last_error}")

    def close(self) -> None:
        self._http.close()


def image_content_part(image: Image.Image) -> dict:
    """Encode one frame as a data-URL image attachment."""
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    encoded = base64.b64encode(buf.getvalue()).decode("ascii")
    return {"type": "image_url", "image_url": {"url": f"data:image/png;base64,{encoded}"}}

"""Declarative run configuration.

One YAML document drives the whole experiment grid (rates × overlay ×
observation); CLI flags override individual fields. The configuration digest
deliberately excludes output/cache locations and the manifest *path* — two
runs of the same experiment in different directories are the same experiment.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping

import yaml

from .caption import DEFAULT_CAPTION_PROMPT, DEFAULT_MOCK_TEMPLATE
from .errors import ConfigError
from .judge import DEFAULT_FOCUS_CLAUSES, DEFAULT_JUDGE_PROMPT

OVERLAY_MODES = ("both", "on", "off")
OBSERVATION_MODES = ("both", "full", "partial")
CAPTION_BACKENDS = ("mock", "remote")
JUDGE_BACKENDS = ("oracle", "remote")

# Noise model for rate-sensitivity simulations with the mock captioner:
# fraction of caption words dropped at each sampling rate.
DEFAULT_DROPOUT_BY_RATE: Mapping[int, float] = {}


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model: str
    api_key_env: str = "ACTIONSIM_API_KEY"
    timeout_s: float = 120.0
    max_retries: int = 3

    @classmethod
    def from_mapping(cls, data: Mapping) -> "EndpointConfig":
        try:
            return cls(
                base_url=str(data["base_url"]),
                model=str(data["model"]),
                api_key_env=str(data.get("api_key_env", "ACTIONSIM_API_KEY")),
                timeout_s=float(data.get("timeout_s", 120.0)),
                max_retries=int(data.get("max_retries", 3)),
            )
        except KeyError as exc:
            raise ConfigError(f"endpoint config missing key {exc}") from exc


@dataclass(frozen=True)
class RunConfig:
    manifest: Path
    out_dir: Path
    cache_dir: Path | None = None  # None → <out_dir>/cache, shared across runs

    clip_length: int = 16
    rates_hz: tuple[int, ...] = (120, 60, 30)
    overlay: str = "both"
    observation: str = "both"

    caption_backend: str = "mock"
    judge_backend: str = "oracle"
    caption_endpoint: EndpointConfig | None = None
    judge_endpoint: EndpointConfig | None = None

    caption_prompt: str = DEFAULT_CAPTION_PROMPT
    judge_prompt: str = DEFAULT_JUDGE_PROMPT
    focus_clauses: tuple[str, ...] = DEFAULT_FOCUS_CLAUSES
    mock_template: str = DEFAULT_MOCK_TEMPLATE
    min_frames: int = 16

    symmetry: str = "upper_mirror"
    diagonal: str = "judged"
    self_mode: str = "include_self"

    caption_concurrency: int = 1
    judge_concurrency: int = 1

    seed: int = 0
    dropout_by_rate: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.clip_length < 1:
            raise ConfigError(f"clip_length must be >= 1, got {self.clip_length}")
        if self.min_frames < 1:
            raise ConfigError(f"min_frames must be >= 1, got {self.min_frames}")
        if not self.rates_hz:
            raise ConfigError("rates_hz must list at least one sampling rate")
        if any(r <= 0 for r in self.rates_hz):
            raise ConfigError(f"sampling rates must be positive, got {list(self.rates_hz)}")
        if len(set(self.rates_hz)) != len(self.rates_hz):
            raise ConfigError(f"duplicate sampling rates: {list(self.rates_hz)}")
        if self.overlay not in OVERLAY_MODES:
            raise ConfigError(f"overlay must be one of {OVERLAY_MODES}, got {self.overlay!r}")
        if self.observation not in OBSERVATION_MODES:
            raise ConfigError(
                f"observation must be one of {OBSERVATION_MODES}, got {self.observation!r}"
            )
        if self.caption_backend not in CAPTION_BACKENDS:
            raise ConfigError(
                f"caption_backend must be one of {CAPTION_BACKENDS}, got {self.caption_backend!r}"
            )
        if self.judge_backend not in JUDGE_BACKENDS:
            raise ConfigError(
                f"judge_backend must be one of {JUDGE_BACKENDS}, got {self.judge_backend!r}"
            )
        if self.caption_backend == "remote" and self.caption_endpoint is None:
            raise ConfigError("caption_backend 'remote' requires caption_endpoint")
        if self.judge_backend == "remote" and self.judge_endpoint is None:
            raise ConfigError("judge_backend 'remote' requires judge_endpoint")
        if self.caption_concurrency < 1 or self.judge_concurrency < 1:
            raise ConfigError("concurrency limits must be >= 1")
        for rate, p in self.dropout_by_rate.items():
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"dropout_by_rate[{rate}] must be in [0, 1], got {p}")

    @property
    def overlay_variants(self) -> tuple[bool, ...]:
        return {"both": (False, True), "on": (True,), "off": (False,)}[self.overlay]

    @property
    def observation_variants(self) -> tuple[str, ...]:
        return {"both": ("full", "partial"), "full": ("full",), "partial": ("partial",)}[
            self.observation
        ]

    def resolved_cache_dir(self) -> Path:
        return self.cache_dir if self.cache_dir is not None else self.out_dir / "cache"

    def digest_payload(self) -> dict:
        """Experiment identity: everything except filesystem locations."""
        return {
            "clip_length": self.clip_length,
            "rates_hz": list(self.rates_hz),
            "overlay": self.overlay,
            "observation": self.observation,
            "caption_backend": self.caption_backend,
            "judge_backend": self.judge_backend,
            "caption_endpoint": (
                None
                if self.caption_endpoint is None
                else [self.caption_endpoint.base_url, self.caption_endpoint.model]
            ),
            "judge_endpoint": (
                None
                if self.judge_endpoint is None
                else [self.judge_endpoint.base_url, self.judge_endpoint.model]
            ),
            "caption_prompt": self.caption_prompt,
            "judge_prompt": self.judge_prompt,
            "focus_clauses": list(self.focus_clauses),
            "mock_template": self.mock_template,
            "min_frames": self.min_frames,
            "symmetry": self.symmetry,
            "diagonal": self.diagonal,
            "self_mode": self.self_mode,
            "seed": self.seed,
            "dropout_by_rate": {str(k): v for k, v in sorted(self.dropout_by_rate.items())},
        }


_PATH_FIELDS = ("manifest", "out_dir", "cache_dir")
_TUPLE_FIELDS = ("rates_hz", "focus_clauses")


def _coerce(name: str, value):
    if name in _PATH_FIELDS:
        return None if value is None else Path(value)
    if name in _TUPLE_FIELDS:
        return tuple(value)
    if name in ("caption_endpoint", "judge_endpoint"):
        if value is None or isinstance(value, EndpointConfig):
            return value
        return EndpointConfig.from_mapping(value)
    if name == "dropout_by_rate":
        return {int(k): float(v) for k, v in dict(value).items()}
    return value


def load_config(path: Path, overrides: Mapping | None = None) -> RunConfig:
    """Parse a YAML run configuration; ``overrides`` win over file values.

    Relative paths in the file resolve against the file's directory;
    relative paths given as overrides resolve against the working directory.
    """
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a mapping, got {type(raw).__name__}")

    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")

    values = {}
    base = path.resolve().parent
    for name, value in raw.items():
        coerced = _coerce(name, value)
        if name in _PATH_FIELDS and coerced is not None and not coerced.is_absolute():
            coerced = base / coerced
        values[name] = coerced
    if "manifest" not in values:
        raise ConfigError("config must set 'manifest'")
    if "out_dir" not in values:
        raise ConfigError("config must set 'out_dir'")

    try:
        config = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    if overrides:
        cleaned = {
            name: _coerce(name, value) for name, value in overrides.items() if value is not None
        }
        unknown = sorted(set(cleaned) - known)
        if unknown:
            raise ConfigError(f"unknown config overrides: {unknown}")
        config = replace(config, **cleaned)
    return config

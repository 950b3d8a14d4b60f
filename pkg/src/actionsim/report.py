"""Rendering: matrix heatmaps, accuracy tables, experiment summaries.

Heatmaps are emitted as SVG so golden tests can compare bytes; every matrix
in one report uses the same fixed 0..100 color scale, and the color bar is
drawn only when asked for. Accuracy tables follow the two-table layout
(full videos / partially observed actions) with rows per sampling rate and
Raw / +Tracking Overlay columns; excluded variants print "--".
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .classify import round_half_up
from .errors import ReportError
from .ioutil import write_json_atomic, write_text_atomic
from .matrix import SimilarityMatrix

OBSERVATIONS = ("full", "partial")

EXCLUDED_CELL = "--"

# Piecewise-linear colormap anchors (value fraction -> RGB): a
# dark-violet-to-yellow ramp, picked for monotone perceived brightness.
COLOR_STOPS = (
    (0.0, (13, 8, 135)),
    (0.5, (203, 71, 119)),
    (1.0, (240, 249, 33)),
)

CELL_PX = 26
LABEL_MARGIN_PX = 52
COLORBAR_GAP_PX = 18
COLORBAR_WIDTH_PX = 14
FONT = 'font-family="monospace" font-size="10"'


@dataclass(frozen=True)
class VariantKey:
    rate_hz: int
    overlay: bool
    observation: str

    def __post_init__(self) -> None:
        if self.rate_hz <= 0:
            raise ReportError(f"variant rate must be positive, got {self.rate_hz}")
        if self.observation not in OBSERVATIONS:
            raise ReportError(
                f"unknown observation {self.observation!r}; expected one of {OBSERVATIONS}"
            )

    @property
    def slug(self) -> str:
        style = "overlay" if self.overlay else "raw"
        return f"{self.rate_hz}hz-{style}-{self.observation}"


@dataclass(frozen=True)
class VariantOutcome:
    key: VariantKey
    accuracy_percent: float | None
    excluded: bool = False
    excluded_reason: str = ""
    matrix_path: str | None = None
    evaluation_path: str | None = None

    def __post_init__(self) -> None:
        if self.excluded != (self.accuracy_percent is None):
            raise ReportError(
                f"variant {self.key.slug}: accuracy must be absent exactly when excluded"
            )


@dataclass(frozen=True)
class ExperimentSummary:
    variants: tuple[VariantOutcome, ...]
    config_digest: str
    self_mode: str = "include_self"

    def __post_init__(self) -> None:
        slugs = [v.key.slug for v in self.variants]
        dupes = sorted({s for s in slugs if slugs.count(s) > 1})
        if dupes:
            raise ReportError(f"duplicate variants in summary: {dupes}")

    def outcome(self, key: VariantKey) -> VariantOutcome | None:
        for variant in self.variants:
            if variant.key == key:
                return variant
        return None

    def to_payload(self) -> dict:
        return {
            "config_digest": self.config_digest,
            "self_mode": self.self_mode,
            "variants": [
                {
                    "rate_hz": v.key.rate_hz,
                    "overlay": v.key.overlay,
                    "observation": v.key.observation,
                    "accuracy_percent": v.accuracy_percent,
                    "excluded": v.excluded,
                    "excluded_reason": v.excluded_reason,
                    "matrix_path": v.matrix_path,
                    "evaluation_path": v.evaluation_path,
                }
                for v in self.variants
            ],
        }

    @classmethod
    def from_payload(cls, payload: Mapping) -> "ExperimentSummary":
        try:
            variants = tuple(
                VariantOutcome(
                    key=VariantKey(
                        rate_hz=int(v["rate_hz"]),
                        overlay=bool(v["overlay"]),
                        observation=str(v["observation"]),
                    ),
                    accuracy_percent=(
                        None if v["accuracy_percent"] is None else float(v["accuracy_percent"])
                    ),
                    excluded=bool(v["excluded"]),
                    excluded_reason=str(v.get("excluded_reason", "")),
                    matrix_path=v.get("matrix_path"),
                    evaluation_path=v.get("evaluation_path"),
                )
                for v in payload["variants"]
            )
            return cls(
                variants=variants,
                config_digest=str(payload["config_digest"]),
                self_mode=str(payload.get("self_mode", "include_self")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ReportError(f"malformed summary payload: {exc}") from exc


def value_color(value: float, scale: tuple[float, float] = (0.0, 100.0)) -> str:
    """Hex color for a value on the shared scale (out-of-range clamps)."""
    lo, hi = scale
    if hi <= lo:
        raise ReportError(f"degenerate color scale ({lo}, {hi})")
    t = min(max((value - lo) / (hi - lo), 0.0), 1.0)
    for (t0, c0), (t1, c1) in zip(COLOR_STOPS, COLOR_STOPS[1:]):
        if t <= t1:
            f = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
            rgb = tuple(round(a + f * (b - a)) for a, b in zip(c0, c1))
            return "#{:02x}{:02x}{:02x}".format(*rgb)
    return "#{:02x}{:02x}{:02x}".format(*COLOR_STOPS[-1][1])


def _svg_header(width: int, height: int) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        "<defs>",
        '<pattern id="excluded" width="6" height="6" patternUnits="userSpaceOnUse">',
        '<rect width="6" height="6" fill="#e8e8e8"/>',
        '<path d="M0,6 L6,0" stroke="#9a9a9a" stroke-width="1"/>',
        "</pattern>",
        "</defs>",
    ]


def render_heatmap(
    matrix: SimilarityMatrix,
    scale: tuple[float, float] = (0.0, 100.0),
    colorbar: bool = False,
    title: str = "",
) -> str:
    """Render the matrix as a deterministic SVG string.

    Rows and columns are labeled with sample ids in matrix order; excluded
    rows/columns render as hatched cells. The color bar is drawn only when
    requested so a multi-figure report can show it once.
    """
    n = len(matrix.sample_ids)
    if n == 0:
        raise ReportError("cannot render a heatmap for an empty matrix")

    grid = n * CELL_PX
    title_px = 16 if title else 0
    width = LABEL_MARGIN_PX + grid + 4
    if colorbar:
        width += COLORBAR_GAP_PX + COLORBAR_WIDTH_PX + 30
    height = LABEL_MARGIN_PX + title_px + grid + 4

    x0 = LABEL_MARGIN_PX
    y0 = LABEL_MARGIN_PX + title_px

    parts = _svg_header(width, height)
    parts.append(f'<rect width="{width}" height="{height}" fill="#ffffff"/>')
    if title:
        parts.append(
            f'<text x="{x0 + grid / 2:g}" y="14" text-anchor="middle" {FONT}>{title}</text>'
        )

    for idx, sid in enumerate(matrix.sample_ids):
        cx = x0 + idx * CELL_PX + CELL_PX / 2
        parts.append(
            f'<text x="{cx:g}" y="{y0 - 6}" text-anchor="middle" {FONT}>{sid}</text>'
        )
        cy = y0 + idx * CELL_PX + CELL_PX / 2 + 3
        parts.append(
            f'<text x="{x0 - 6}" y="{cy:g}" text-anchor="end" {FONT}>{sid}</text>'
        )

    for i in range(n):
        for j in range(n):
            x = x0 + j * CELL_PX
            y = y0 + i * CELL_PX
            value = matrix.values[i][j]
            fill = "url(#excluded)" if value is None else value_color(value, scale)
            parts.append(
                f'<rect x="{x}" y="{y}" width="{CELL_PX}" height="{CELL_PX}" '
                f'fill="{fill}" stroke="#ffffff" stroke-width="1"/>'
            )

    if colorbar:
        bar_x = x0 + grid + COLORBAR_GAP_PX
        steps = 40
        step_h = grid / steps
        lo, hi = scale
        for s in range(steps):
            frac = 1.0 - (s + 0.5) / steps
            color = value_color(lo + frac * (hi - lo), scale)
            parts.append(
                f'<rect x="{bar_x}" y="{y0 + s * step_h:g}" width="{COLORBAR_WIDTH_PX}" '
                f'height="{step_h + 0.5:g}" fill="{color}"/>'
            )
        for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
            tick = lo + frac * (hi - lo)
            ty = y0 + (1.0 - frac) * grid
            parts.append(
                f'<text x="{bar_x + COLORBAR_WIDTH_PX + 4}" y="{ty + 3:g}" {FONT}>{tick:g}</text>'
            )

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def save_heatmap(
    matrix: SimilarityMatrix,
    path: Path,
    scale: tuple[float, float] = (0.0, 100.0),
    colorbar: bool = False,
    title: str = "",
) -> None:
    write_text_atomic(Path(path), render_heatmap(matrix, scale, colorbar, title))


def format_accuracy(value: float | None) -> str:
    return EXCLUDED_CELL if value is None else f"{round_half_up(value, 2):.2f}"


def _accuracy_table(summary: ExperimentSummary, observation: str) -> str | None:
    variants = [v for v in summary.variants if v.key.observation == observation]
    if not variants:
        return None
    rates = sorted({v.key.rate_hz for v in variants}, reverse=True)
    lines = [
        "| Frequency | Raw | +Tracking Overlay |",
        "| --- | --- | --- |",
    ]
    for rate in rates:
        cells = []
        for overlay in (False, True):
            outcome = summary.outcome(VariantKey(rate, overlay, observation))
            cells.append(
                EXCLUDED_CELL if outcome is None else format_accuracy(outcome.accuracy_percent)
            )
        lines.append(f"| {rate} Hz | {cells[0]} | {cells[1]} |")
    return "\n".join(lines)


def emit_tables(summary: ExperimentSummary) -> str:
    """Markdown document with the full-video and partial-observation tables."""
    sections = [
        "# Action similarity evaluation",
        "",
        f"Configuration digest: `{summary.config_digest or '<unset>'}`",
        f"Prototype self mode: {summary.self_mode} "
        "(alternate-mode accuracies are recorded in each evaluation document)",
        "",
        "## NCP accuracy (%) on full videos",
        "",
    ]
    full = _accuracy_table(summary, "full")
    if full is None:
        sections.append("_No full-video variants were configured._")
    else:
        sections.append(full)
    sections += ["", "## NCP accuracy (%) on partially observed actions", ""]
    partial = _accuracy_table(summary, "partial")
    if partial is None:
        sections.append("_No partially observed variants were configured; table omitted._")
    else:
        sections.append(partial)
    sections.append("")
    return "\n".join(sections)


def save_report(summary: ExperimentSummary, tables_path: Path, summary_path: Path) -> None:
    """Write the table document and machine-readable summary atomically."""
    write_text_atomic(Path(tables_path), emit_tables(summary))
    write_json_atomic(Path(summary_path), summary.to_payload())

"""Report artifacts: variant bookkeeping, heatmap SVG, accuracy tables."""

from __future__ import annotations

import json

import pytest

from actionsim.corpus import SampleId
from actionsim.errors import ReportError
from actionsim.matrix import SimilarityMatrix
from actionsim.report import (
    EXCLUDED_CELL,
    ExperimentSummary,
    VariantKey,
    VariantOutcome,
    emit_tables,
    format_accuracy,
    render_heatmap,
    save_report,
    value_color,
)


def outcome(rate, overlay, observation, accuracy=None, excluded=False) -> VariantOutcome:
    return VariantOutcome(
        key=VariantKey(rate_hz=rate, overlay=overlay, observation=observation),
        accuracy_percent=accuracy,
        excluded=excluded,
        excluded_reason="below one clip window" if excluded else "",
    )


def test_variant_key_slug():
    assert VariantKey(120, False, "full").slug == "120hz-raw-full"
    assert VariantKey(30, True, "partial").slug == "30hz-overlay-partial"
    with pytest.raises(ReportError):
        VariantKey(0, False, "full")
    with pytest.raises(ReportError):
        VariantKey(120, False, "sideways")


def test_variant_outcome_requires_consistency():
    with pytest.raises(ReportError, match="exactly when excluded"):
        VariantOutcome(key=VariantKey(120, False, "full"), accuracy_percent=None, excluded=False)
    with pytest.raises(ReportError, match="exactly when excluded"):
        VariantOutcome(key=VariantKey(120, False, "full"), accuracy_percent=50.0, excluded=True)


def test_summary_rejects_duplicate_variants_and_finds_outcomes():
    a = outcome(120, False, "full", accuracy=50.0)
    with pytest.raises(ReportError, match="duplicate"):
        ExperimentSummary(variants=(a, a), config_digest="d")
    summary = ExperimentSummary(variants=(a,), config_digest="d")
    assert summary.outcome(a.key) is a
    assert summary.outcome(VariantKey(60, False, "full")) is None


def test_summary_payload_round_trip():
    summary = ExperimentSummary(
        variants=(
            outcome(120, False, "full", accuracy=83.33),
            outcome(30, True, "partial", excluded=True),
        ),
        config_digest="abc",
        self_mode="leave_one_out",
    )
    assert ExperimentSummary.from_payload(summary.to_payload()) == summary
    with pytest.raises(ReportError, match="malformed"):
        ExperimentSummary.from_payload({"variants": [{"rate_hz": 120}]})


def test_format_accuracy_two_decimals_half_up():
    assert format_accuracy(None) == EXCLUDED_CELL == "--"
    assert format_accuracy(83.333333) == "83.33"
    assert format_accuracy(16.666666) == "16.67"
    assert format_accuracy(100.0) == "100.00"
    assert format_accuracy(0.125) == "0.13"


def test_value_color_clamps_to_scale():
    low = value_color(0.0)
    high = value_color(100.0)
    assert low.startswith("#") and len(low) == 7
    assert value_color(-50.0) == low
    assert value_color(150.0) == high
    assert low != high


def test_emit_tables_layout():
    summary = ExperimentSummary(
        variants=(
            outcome(120, False, "full", accuracy=83.33),
            outcome(120, True, "full", accuracy=91.67),
            outcome(60, False, "full", accuracy=33.33),
            outcome(60, True, "full", accuracy=41.67),
            outcome(120, False, "partial", accuracy=75.0),
            outcome(30, False, "partial", excluded=True),
        ),
        config_digest="abc",
    )
    doc = emit_tables(summary)
    lines = doc.splitlines()
    assert "| Frequency | Raw | +Tracking Overlay |" in lines
    # Rates are listed high to low within each table.
    full_rows = [ln for ln in lines if ln.startswith("| 120 Hz") or ln.startswith("| 60 Hz")]
    assert full_rows[0].startswith("| 120 Hz")
    assert "| 120 Hz | 83.33 | 91.67 |" in lines
    assert "| 60 Hz | 33.33 | 41.67 |" in lines
    # Partial table: unconfigured overlay column and excluded variant both show "--".
    assert "| 120 Hz | 75.00 | -- |" in lines
    assert "| 30 Hz | -- | -- |" in lines


def test_emit_tables_notes_missing_sections():
    summary = ExperimentSummary(
        variants=(outcome(120, False, "full", accuracy=50.0),), config_digest="abc"
    )
    doc = emit_tables(summary)
    assert "_No partially observed variants were configured; table omitted._" in doc

    partial_only = ExperimentSummary(
        variants=(outcome(120, False, "partial", accuracy=50.0),), config_digest="abc"
    )
    assert "_No full-video variants were configured._" in emit_tables(partial_only)


def heatmap_matrix(values) -> SimilarityMatrix:
    n = len(values)
    return SimilarityMatrix(
        sample_ids=tuple(SampleId("S", i + 1) for i in range(n)),
        values=tuple(tuple(row) for row in values),
        backend_id="fixture",
        symmetry="full_asymmetric",
        diagonal="judged",
    )


def test_render_heatmap_cells_labels_and_exclusions():
    matrix = heatmap_matrix([[100.0, None, 30.0], [None, None, None], [30.0, None, 60.0]])
    svg = render_heatmap(matrix, title="60hz-raw-full")
    assert svg.startswith("<?xml") or svg.startswith("<svg")
    assert svg.count("url(#excluded)") == 5  # row 1 and column 1
    assert ">S1<" in svg and ">S3<" in svg
    assert "60hz-raw-full" in svg
    assert "</svg>" in svg


def test_render_heatmap_colorbar_is_optional():
    matrix = heatmap_matrix([[100.0]])
    plain = render_heatmap(matrix)
    with_bar = render_heatmap(matrix, colorbar=True)
    assert len(with_bar) > len(plain)
    assert plain.count("<rect") < with_bar.count("<rect")
    with pytest.raises(ReportError, match="empty matrix"):
        render_heatmap(heatmap_matrix([]))


def test_render_heatmap_is_deterministic():
    matrix = heatmap_matrix([[100.0, 25.0], [25.0, 100.0]])
    assert render_heatmap(matrix, colorbar=True) == render_heatmap(matrix, colorbar=True)


def test_save_report_writes_tables_and_summary(tmp_path):
    summary = ExperimentSummary(
        variants=(outcome(120, False, "full", accuracy=83.33),), config_digest="abc"
    )
    tables = tmp_path / "report.md"
    payload = tmp_path / "summary.json"
    save_report(summary, tables, payload)
    assert tables.read_text() == emit_tables(summary)
    assert ExperimentSummary.from_payload(json.loads(payload.read_text())) == summary

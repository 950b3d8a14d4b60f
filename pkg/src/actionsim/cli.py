"""Command-line interface.

Stage subcommands (ingest/caption/judge/evaluate/report) execute the grid up
to that stage and are resumable; ``run`` is the whole pipeline; ``verify``
runs the invariant self-checks. All stages work locally; ``evaluate`` can
instead delegate classification to a running service with ``--server``, and
``serve`` starts that service.
"""

from __future__ import annotations

import functools
from pathlib import Path

import click

from . import __version__
from .classify import SELF_MODES
from .client import ServiceClient
from .config import OBSERVATION_MODES, OVERLAY_MODES, load_config
from .corpus import class_index_sets
from .errors import ActionSimError
from .ioutil import read_json, write_json_atomic
from .matrix import SYMMETRY_POLICIES
from .pipeline import prepare_run, run_experiment, run_stage, variant_grid
from .synth import make_corpus
from .verify import run_verification


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Semantic action-similarity pipeline over high-speed video corpora."""


def config_options(command):
    @click.option("--config", "-c", "config_path", required=True,
                  type=click.Path(exists=True, dir_okay=False, path_type=Path),
                  help="Run configuration (YAML).")
    @click.option("--rate", "rates_hz", type=int, multiple=True,
                  help="Override sampling rates (repeatable).")
    @click.option("--overlay", type=click.Choice(OVERLAY_MODES), default=None,
                  help="Override overlay mode.")
    @click.option("--observation", type=click.Choice(OBSERVATION_MODES), default=None,
                  help="Override observation mode.")
    @click.option("--self-mode", type=click.Choice(SELF_MODES), default=None,
                  help="Override prototype self mode.")
    @click.option("--symmetry", type=click.Choice(SYMMETRY_POLICIES), default=None,
                  help="Override matrix symmetry policy.")
    @click.option("--seed", type=int, default=None, help="Override mock-noise seed.")
    @click.option("--out-dir", type=click.Path(path_type=Path), default=None,
                  help="Override output directory.")
    @click.option("--cache-dir", type=click.Path(path_type=Path), default=None,
                  help="Override response-cache directory.")
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        return command(*args, **kwargs)

    return wrapper


def _load(config_path: Path, rates_hz, **overrides):
    values = dict(overrides)
    if rates_hz:
        values["rates_hz"] = tuple(rates_hz)
    try:
        return load_config(config_path, overrides=values)
    except ActionSimError as exc:
        raise click.ClickException(str(exc)) from exc


def _run_stage(config, stage: str) -> None:
    try:
        run_dir = run_stage(config, stage)
    except ActionSimError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"{stage} complete: {run_dir}")


@main.command()
@config_options
def ingest(config_path, rates_hz, **overrides) -> None:
    """Prepare per-variant clip inventories."""
    _run_stage(_load(config_path, rates_hz, **overrides), "ingest")


@main.command()
@config_options
def caption(config_path, rates_hz, **overrides) -> None:
    """Describe every clip of every variant."""
    _run_stage(_load(config_path, rates_hz, **overrides), "caption")


@main.command()
@config_options
def judge(config_path, rates_hz, **overrides) -> None:
    """Score all description pairs into similarity matrices."""
    _run_stage(_load(config_path, rates_hz, **overrides), "judge")


@main.command()
@click.option("--server", default=None, help="Delegate classification to this service URL.")
@config_options
def evaluate(config_path, rates_hz, server, **overrides) -> None:
    """Classify every variant matrix with nearest-class prototypes."""
    config = _load(config_path, rates_hz, **overrides)
    if server is None:
        _run_stage(config, "evaluate")
        return
    try:
        _evaluate_via_server(config, ServiceClient(base_url=server))
    except ActionSimError as exc:
        raise click.ClickException(str(exc)) from exc


def _evaluate_via_server(config, client: ServiceClient) -> None:
    from .pipeline import ALTERNATE_SELF_MODE

    ctx = prepare_run(config)
    class_sets = class_index_sets(ctx.corpus)
    for key in variant_grid(config):
        matrix_path = ctx.variant_dir(key) / "matrix.json"
        if not matrix_path.exists():
            raise click.ClickException(
                f"variant {key.slug}: no matrix at {matrix_path}; run `judge` first"
            )
        payload = read_json(matrix_path)
        try:
            primary = client.evaluate(payload, class_sets, config.self_mode)
        except ActionSimError as exc:
            write_json_atomic(
                ctx.variant_dir(key) / "evaluation.json",
                {"excluded_reason": str(exc), "primary": None, "alternate": None,
                 "config_digest": ctx.config_digest},
            )
            click.echo(f"{key.slug}: excluded ({exc})")
            continue
        try:
            alternate = client.evaluate(
                payload, class_sets, ALTERNATE_SELF_MODE[config.self_mode]
            )
        except ActionSimError:
            alternate = None
        write_json_atomic(
            ctx.variant_dir(key) / "evaluation.json",
            {"excluded_reason": None, "primary": primary, "alternate": alternate,
             "config_digest": ctx.config_digest},
        )
        click.echo(f"{key.slug}: accuracy {primary['accuracy_percent']:.2f}")
    click.echo(f"evaluate complete: {ctx.run_dir}")


@main.command()
@config_options
def report(config_path, rates_hz, **overrides) -> None:
    """Render heatmaps, accuracy tables, and the run summary."""
    _run_stage(_load(config_path, rates_hz, **overrides), "report")


@main.command()
@config_options
def run(config_path, rates_hz, **overrides) -> None:
    """Execute the full experiment grid end to end."""
    config = _load(config_path, rates_hz, **overrides)
    try:
        summary, run_dir = run_experiment(config)
    except ActionSimError as exc:
        raise click.ClickException(str(exc)) from exc
    for variant in summary.variants:
        if variant.excluded:
            click.echo(f"{variant.key.slug}: -- ({variant.excluded_reason})")
        else:
            click.echo(f"{variant.key.slug}: accuracy {variant.accuracy_percent:.2f}")
    click.echo(f"run complete: {run_dir}")


@main.command()
@click.option("--config", "-c", "config_path", default=None,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Also check this run's cache and matrix artifacts.")
@click.option("--seed", type=int, default=0, help="Seed for the randomized checks.")
@click.pass_context
def verify(ctx, config_path, seed) -> None:
    """Run the invariant self-checks; nonzero exit on any failure."""
    config = None
    if config_path is not None:
        try:
            config = load_config(config_path)
        except ActionSimError as exc:
            raise click.ClickException(str(exc)) from exc
    results = run_verification(config, seed=seed)
    failed = False
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        failed = failed or not result.passed
        detail = f" ({result.detail})" if result.detail else ""
        click.echo(f"[{status}] {result.name}{detail}")
    if failed:
        ctx.exit(1)


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path),
              help="Directory to generate the corpus into.")
@click.option("--seed", type=int, default=0, help="Generation seed.")
def synth(out_dir, seed) -> None:
    """Generate the bundled synthetic corpus (12 samples, 4 classes)."""
    manifest = make_corpus(out_dir, seed=seed)
    click.echo(f"corpus ready: {manifest}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8077, show_default=True, type=int)
def serve(host, port) -> None:
    """Start the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()

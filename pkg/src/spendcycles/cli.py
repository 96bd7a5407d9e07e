"""Command-line entry point wiring the pipeline steps to click subcommands."""

import sys

import click

from . import __version__
from .errors import SpendcyclesError
from .pipeline import load_config, run
from .validity import CRITERIA


@click.group()
@click.version_option(__version__)
@click.option("--config", "-c", "config_path", type=click.Path(), default=None,
              help="TOML config file; omitted sections fall back to defaults.")
@click.option("--workdir", "-w", type=click.Path(), default=None,
              help="Artifact directory.")
@click.option("--input", "-i", "input_path", type=click.Path(), default=None,
              help="Transaction CSV; relative paths resolve inside the workdir.")
@click.option("--seed", type=int, default=None, help="Root random seed.")
@click.option("--force", is_flag=True,
              help="Recompute even when inputs are unchanged.")
@click.pass_context
def main(ctx, config_path, workdir, input_path, seed, force):
    """Cluster weekly purchase series and report lifecycle stages.

    Settings resolve in this order, highest first: command-line flags,
    the SPENDCYCLES_WORKDIR environment variable (workdir only), the
    --config file, built-in defaults.
    """
    ctx.ensure_object(dict)
    overrides = {}
    if input_path is not None:
        overrides["paths.input"] = input_path
    if seed is not None:
        overrides["seeds.root"] = seed
    ctx.obj.update(config_path=config_path, workdir=workdir, force=force,
                   overrides=overrides)


def _dispatch(ctx, subcommand, extra=None):
    obj = ctx.obj
    overrides = dict(obj["overrides"])
    overrides.update(extra or {})
    try:
        cfg = load_config(obj["config_path"], workdir=obj["workdir"],
                          overrides=overrides)
        written = run(subcommand, cfg, force=obj["force"])
    except SpendcyclesError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    if written:
        for path in written:
            click.echo(str(path))
    else:
        click.echo("up to date")


@main.command("demo-data")
@click.pass_context
def demo_data(ctx):
    """Write a synthetic transaction log with known lifecycle labels."""
    _dispatch(ctx, "demo-data")


@main.command()
@click.pass_context
def ingest(ctx):
    """Aggregate raw transactions onto the shared weekly grid."""
    _dispatch(ctx, "ingest")


@main.command()
@click.pass_context
def distances(ctx):
    """Compute one distance matrix per configured measure."""
    _dispatch(ctx, "distances")


@main.command()
@click.pass_context
def cluster(ctx):
    """Run every clustering scheme over the configured grid."""
    _dispatch(ctx, "cluster")


@main.command()
@click.option("--criterion", type=click.Choice(CRITERIA), default=None,
              help="Scheme-selection criterion.")
@click.pass_context
def select(ctx, criterion):
    """Score all schemes and pick the best one."""
    extra = {} if criterion is None else {"search.criterion": criterion}
    _dispatch(ctx, "select", extra)


@main.command()
@click.option("--perplexity", type=float, default=None,
              help="t-SNE neighborhood size.")
@click.pass_context
def embed(ctx, perplexity):
    """Project the selected distance matrix to 2-D and plot it."""
    extra = {} if perplexity is None else {"embed.perplexity": perplexity}
    _dispatch(ctx, "embed", extra)


@main.command()
@click.pass_context
def motif(ctx):
    """Mine recurring windows in each cluster centroid."""
    _dispatch(ctx, "motif")


@main.command()
@click.option("--horizon", type=int, default=None,
              help="Weeks ahead to forecast.")
@click.pass_context
def forecast(ctx, horizon):
    """Fit an ARIMA model per centroid and forecast ahead."""
    extra = {} if horizon is None else {"forecast.horizon": horizon}
    _dispatch(ctx, "forecast", extra)


@main.command()
@click.pass_context
def report(ctx):
    """Stage each cluster and emit the suggestion report."""
    _dispatch(ctx, "report")


@main.command("all")
@click.pass_context
def run_all(ctx):
    """Run ingest through report in order."""
    _dispatch(ctx, "all")


if __name__ == "__main__":
    main()

"""Command-line interface.

Subcommands: fetch, build-features, select, train, ablation, report.
Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
failure.
"""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import click

from . import __version__, pipeline
from .errors import ConfigError, DataError, ExocastError, NumericalError
from .features import save_frame, split_chronological
from .ingest import CandlesSource, EpiCsvSource, fetch_remote
from .select import select_features


@click.group()
@click.version_option(__version__)
@click.option("--config", "config_path", type=click.Path(path_type=Path),
              help="TOML run configuration.")
@click.option("--seed", type=int, default=None, help="Master seed override.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None,
              help="Output directory override.")
@click.option("--verbose", is_flag=True, help="Debug logging.")
@click.pass_context
def cli(ctx, config_path, seed, out_dir, verbose):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["seed"] = seed
    ctx.obj["out_dir"] = out_dir


def _load_config(ctx) -> pipeline.RunConfig:
    path = ctx.obj.get("config_path")
    if path is None:
        raise ConfigError("this command requires --config")
    overrides = {}
    if ctx.obj.get("seed") is not None:
        overrides["seed"] = ctx.obj["seed"]
    if ctx.obj.get("out_dir") is not None:
        overrides["out_dir"] = ctx.obj["out_dir"]
    return pipeline.load_config(path, overrides)


@cli.command()
@click.option("--allow-network", is_flag=True,
              help="Explicitly permit network access (required).")
@click.option("--source", type=click.Choice(["candles", "epi"]), required=True)
@click.option("--symbol", default="tBTCUSD", show_default=True)
@click.option("--granularity", default="1m", show_default=True)
@click.option("--start", "start_str", default=None, help="Start date (YYYY-MM-DD, UTC).")
@click.option("--end", "end_str", default=None, help="End date (YYYY-MM-DD, UTC, inclusive).")
@click.option("--url", default=None, help="Epidemiological CSV URL override.")
@click.option("--output", "output_path", type=click.Path(path_type=Path), required=True)
@click.pass_context
def fetch(ctx, allow_network, source, symbol, granularity, start_str, end_str, url, output_path):
    """Download a raw source into the local CSV schema."""
    if not allow_network:
        raise ConfigError("fetch touches the network; pass --allow-network to confirm")
    if source == "candles":
        if not start_str or not end_str:
            raise ConfigError("candles fetch requires --start and --end")
        start = int(datetime.fromisoformat(start_str).replace(tzinfo=timezone.utc).timestamp() * 1000)
        end = int(datetime.fromisoformat(end_str).replace(tzinfo=timezone.utc).timestamp() * 1000)
        end += 86_400_000 - 60_000  # inclusive end day, last minute
        src = CandlesSource(symbol=symbol, granularity=granularity, start=start, end=end)
    else:
        src = EpiCsvSource(url=url) if url else EpiCsvSource()
    import tempfile, os

    output_path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=output_path.parent, suffix=".tmp")
    with open(fd, "wb") as sink:
        n = fetch_remote(src, sink)
    os.replace(tmp, output_path)
    click.echo(f"wrote {n} bytes to {output_path}")


@cli.command("build-features")
@click.pass_context
def build_features(ctx):
    """Build and persist the daily feature frame (CSV + JSON sidecar)."""
    config = _load_config(ctx)
    frame = pipeline.build_frame(config)
    out = Path(config.out_dir) / "features.csv"
    save_frame(frame, out, meta={"epi_window": config.epi_window})
    click.echo(f"wrote {frame.n_rows} rows x {len(frame.column_names)} columns to {out}")


@cli.command("select")
@click.pass_context
def select_cmd(ctx):
    """Run the two-stage feature selection and print the report table."""
    config = _load_config(ctx)
    frame = pipeline.build_frame(config)
    report = select_features(frame, config.select, config.seeded_forest())
    out = Path(config.out_dir) / "selection.json"
    from .report import atomic_write_text

    atomic_write_text(out, report.to_json() + "\n")
    click.echo(report.render_table())
    click.echo(f"\n{len(report.final_set)} features selected; report at {out}")


@cli.command()
@click.pass_context
def train(ctx):
    """Train and evaluate a single experiment arm (feature_mode from config)."""
    config = _load_config(ctx)
    result = pipeline.run_experiment(config)
    written = pipeline.emit_report(result, config)
    m = result.metrics
    click.echo(f"feature_mode={result.feature_mode} "
               f"test MAE (normalized) = {m['mae_normalized']:.4f}, "
               f"loss = {m['loss_normalized']:.4f}, "
               f"MAE (price units) = {m['mae_price_units']:.2f}")
    for p in written:
        click.echo(f"  wrote {p}")


@cli.command()
@click.pass_context
def ablation(ctx):
    """Run both arms (with/without exogenous features) and compare."""
    config = _load_config(ctx)
    report = pipeline.run_ablation(config)
    written = pipeline.emit_report(report, config)
    b, t = report.baseline.metrics, report.treatment.metrics
    click.echo(f"baseline  (price only)     MAE = {b['mae_normalized']:.4f}  "
               f"loss = {b['loss_normalized']:.4f}")
    click.echo(f"treatment (with exogenous) MAE = {t['mae_normalized']:.4f}  "
               f"loss = {t['loss_normalized']:.4f}")
    click.echo(f"delta MAE = {report.delta_mae:+.4f}  "
               f"({'treatment improved' if report.treatment_improved else 'no improvement'})")
    for p in written:
        click.echo(f"  wrote {p}")


@cli.command()
@click.option("--from", "from_dir", type=click.Path(path_type=Path), required=True,
              help="Directory holding a previous run's metrics.json.")
@click.pass_context
def report(ctx, from_dir):
    """Summarize a previous run from its emitted metrics.json."""
    metrics_path = Path(from_dir) / "metrics.json"
    if not metrics_path.exists():
        raise DataError(f"no metrics.json under {from_dir}")
    doc = json.loads(metrics_path.read_text())
    click.echo(json.dumps(doc, indent=2, sort_keys=True))


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return 1
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except NumericalError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 3
    except ExocastError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())

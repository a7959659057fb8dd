"""Command-line entry point (``molcom``)."""

from __future__ import annotations

import logging
import os
import sys
from pathlib import Path

import click

from .channel import ChannelParams, absorb_cdf_degraded, channel_taps
from .experiments import EXPERIMENTS, ConfigError, config_hash, load_config, run_experiment

EXIT_CONFIG = 2
EXIT_RUNTIME = 3
OUTPUT_ENV = "MOLCOM_OUTPUT_DIR"

log = logging.getLogger("molcom")


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
def main(verbose):
    """Molecular communication link simulator."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(message)s")


@main.command()
@click.argument("config", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), default=None,
              help=f"Output directory (default: ${OUTPUT_ENV}/<config name>, or results/<config name>).")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--force", is_flag=True, help="Allow writing into an existing output directory.")
def run(config, out_dir, seed, force):
    """Run the experiment described by CONFIG and write CSV + metadata."""
    try:
        cfg = load_config(config)
        if seed is not None:
            if seed < 0:
                raise ConfigError("seed: must be >= 0")
            cfg = cfg.model_copy(update={"seed": seed})
    except ConfigError as err:
        _fail(EXIT_CONFIG, str(err))
    if out_dir is None:
        out_dir = Path(os.environ.get(OUTPUT_ENV, "results")) / config.stem
    if out_dir.exists() and any(out_dir.iterdir()) and not force:
        _fail(EXIT_CONFIG, f"output directory {out_dir} exists and is not empty; pass --force to overwrite")
    log.info("running %s (config %s)", cfg.experiment, config_hash(cfg)[:12])
    try:
        table = run_experiment(cfg)
        csv_path, meta_path = table.write(out_dir, cfg.experiment)
    except Exception as err:  # noqa: BLE001 - any failure inside a run maps to the runtime exit code
        log.debug("run failed", exc_info=True)
        _fail(EXIT_RUNTIME, f"{type(err).__name__}: {err}")
    click.echo(str(csv_path))
    click.echo(str(meta_path))


@main.command()
@click.argument("config", type=click.Path(dir_okay=False, path_type=Path))
def validate(config):
    """Check CONFIG against its schema without running anything."""
    try:
        cfg = load_config(config)
    except ConfigError as err:
        _fail(EXIT_CONFIG, str(err))
    click.echo(f"ok {cfg.experiment} {config_hash(cfg)}")


@main.command("list-experiments")
def list_experiments():
    """Print the experiment identifiers accepted in configs."""
    for name in EXPERIMENTS:
        click.echo(name)


@main.command()
@click.option("--d", "distance", type=float, required=True, help="Distance to the receiver (surface), um.")
@click.option("--D", "diffusivity", type=float, required=True, help="Diffusivity, um^2/s.")
@click.option("--rr", "receiver_radius", type=float, default=None, help="Receiver radius, um (implies 3-D).")
@click.option("--lambda", "degradation_rate", type=float, default=0.0, help="Degradation rate, 1/s.")
@click.option("--ts", "symbol_period", type=float, required=True, help="Symbol period, s.")
@click.option("--K", "count", type=int, required=True, help="Number of taps.")
@click.option("--v", "drift", type=float, default=0.0, help="Drift toward the receiver, um/s (1-D only).")
def taps(distance, diffusivity, receiver_radius, degradation_rate, symbol_period, count, drift):
    """Print per-slot absorption probabilities p_0 .. p_{K-1}."""
    try:
        params = ChannelParams(
            distance, diffusivity, receiver_radius, drift,
            dimension=3 if receiver_radius is not None else 1,
            degradation_rate=degradation_rate,
        )
        tv = channel_taps(params, symbol_period, count)
    except ValueError as err:
        raise click.UsageError(str(err)) from None
    click.echo("slot,start_s,end_s,probability")
    for k, p in enumerate(tv.taps):
        click.echo(f"{k},{k * symbol_period!r},{(k + 1) * symbol_period!r},{float(p)!r}")
    log.info("sum %r vs cumulative %r", float(tv.taps.sum()), float(absorb_cdf_degraded(params, count * symbol_period)))


FAMILIES = ("isifree", "dhw", "hamming", "rm84", "min-energy", "moco")


@main.command()
@click.option("--family", type=click.Choice(FAMILIES), required=True)
@click.option("--n", "n", type=int, default=None, help="Block length.")
@click.option("--k", "k", type=int, default=None, help="Message length.")
@click.option("--l", "level", type=int, default=1, help="Crossover level (ISI-free).")
@click.option("--m", "parity", type=int, default=3, help="Parity bits (Hamming).")
@click.option("--size", type=int, default=None, help="Codebook size (min-energy, dhw).")
@click.option("--dmin", type=int, default=1, help="Minimum distance (min-energy).")
def codebook(family, n, k, level, parity, size, dmin):
    """Print a codebook in its text serialization."""
    from . import fec

    try:
        if family == "isifree":
            if n is None or k is None:
                raise ValueError("--n and --k are required for isifree")
            text = fec.isifree_table(n, k, level).to_text()
        elif family == "dhw":
            if n is None:
                raise ValueError("--n is required for dhw")
            text = fec.dhw_codebook(n, size).to_text()
        elif family == "hamming":
            text = fec.hamming_codebook(parity).to_text()
        elif family == "rm84":
            text = fec.rm84_codebook().to_text()
        elif family == "moco":
            text = fec.REFERENCE_MOCO_CODEBOOK.to_text()
        else:
            if n is None or size is None:
                raise ValueError("--n and --size are required for min-energy")
            text = fec.min_energy_codebook(n, size, dmin).to_text()
    except ValueError as err:
        raise click.UsageError(str(err)) from None
    click.echo(text, nl=False)


if __name__ == "__main__":
    main()

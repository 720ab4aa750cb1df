"""``fairrisk`` command line.

Every pipeline command accepts ``--config FILE`` plus one flag per config key
(``--alpha 0.1``, ``--out_dir runs/a`` ...); flags override the file. Failures
exit with status 1 and print a single JSON line ``{"error": ..., "message": ...}``
to stderr.
"""

from __future__ import annotations

import functools
import json
import sys
from dataclasses import fields

import click

from . import pipeline
from .config import ConfigError, PipelineConfig, load_config
from .synth import DEFAULT_SHIFT, SynthConfig
from .tabular import DataError
from .transport import BudgetExceeded


def _fail(code: str, message: str) -> None:
    click.echo(json.dumps({"error": code, "message": message}), err=True)
    sys.exit(1)


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except pipeline.PipelineError as exc:
            _fail(exc.code, str(exc))
        except ConfigError as exc:
            _fail("config", str(exc))
        except DataError as exc:
            _fail("data", str(exc))
        except BudgetExceeded as exc:
            _fail("memory_budget", str(exc))
        except (ValueError, KeyError) as exc:
            _fail("invalid", str(exc).strip("'\""))
        except OSError as exc:
            _fail("io", f"{exc.filename}: {exc.strerror}" if exc.filename else str(exc))
    return wrapper


def config_options(fn):
    """Attach ``--config`` and one string option per config key."""
    for f in reversed(fields(PipelineConfig)):
        flags = [f"--{f.name}"]
        if "_" in f.name:
            flags.append(f"--{f.name.replace('_', '-')}")
        fn = click.option(*flags, f.name, default=None, metavar="VALUE",
                          help=f"override config key {f.name}")(fn)
    return click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                        help="key = value config file")(fn)


def _config(kwargs: dict) -> PipelineConfig:
    path = kwargs.pop("config_path", None)
    overrides = {k: kwargs.pop(k) for k in [f.name for f in fields(PipelineConfig)] if k in kwargs}
    return load_config(path, overrides)


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Baseline-trained risk forecasts with transport-aligned conformal sets."""


@main.command()
@click.argument("output", type=click.Path(dir_okay=False))
@click.option("--n_per_group", "--n-per-group", default=4000, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--shift", default=",".join(str(v) for v in DEFAULT_SHIFT), show_default=True,
              help="comma-separated location shift of the comparison group")
@click.option("--observation_bias", "--observation-bias", default=SynthConfig.observation_bias,
              show_default=True, type=float)
@_guarded
def synth(output, n_per_group, seed, shift, observation_bias):
    """Write a two-group synthetic CSV with a y_star column."""
    try:
        shift_v = tuple(float(v) for v in shift.split(","))
    except ValueError:
        raise ConfigError(f"shift must be comma-separated numbers, got {shift!r}") from None
    cfg = SynthConfig(n_per_group=n_per_group, seed=seed, shift=shift_v, observation_bias=observation_bias)
    data = pipeline.cmd_synth(output, cfg)
    click.echo(f"wrote {len(data)} rows to {output}")


@main.command()
@config_options
@_guarded
def fit(**kwargs):
    """Train on the baseline training split and write model + manifest."""
    cfg = _config(kwargs)
    res = pipeline.cmd_fit(cfg)
    click.echo(f"model: {cfg.out_path / pipeline.MODEL} ({len(res.model.trees)} trees, "
               f"{len(res.train)} training rows, {len(res.calibration)} calibration rows)")


@main.command()
@config_options
@_guarded
def transport(**kwargs):
    """Fit the comparison-to-baseline transport map and write diagnostics."""
    cfg = _config(kwargs)
    res = pipeline.cmd_transport(cfg)
    click.echo(f"map: {cfg.out_path / pipeline.MAP}")
    click.echo(f"{'feature':<20}{'before':>10}{'transported':>13}{'smoothed':>10}")
    for name in res.raw:
        click.echo(f"{name:<20}{res.before[name].overlap:>10.3f}{res.raw[name].overlap:>13.3f}"
                   f"{res.smoothed[name].overlap:>10.3f}")


@main.command()
@config_options
@_guarded
def calibrate(**kwargs):
    """Compute the conformal threshold on the baseline calibration split."""
    cfg = _config(kwargs)
    cal = pipeline.cmd_calibrate(cfg)
    click.echo(f"alpha={cal.alpha} gamma_hat={cal.gamma_hat!r} n_calibration={cal.n}")


@main.command()
@click.argument("data", type=click.Path(dir_okay=False))
@click.option("--output", type=click.Path(dir_okay=False), default=None, help="defaults to OUT_DIR/forecast.csv")
@config_options
@_guarded
def forecast(data, output, **kwargs):
    """Point predictions and prediction sets for DATA (labels not needed)."""
    cfg = _config(kwargs)
    fc = pipeline.cmd_forecast(cfg, data, output)
    click.echo(f"wrote {fc.row_ids.shape[0]} forecasts to {output or cfg.out_path / 'forecast.csv'}")


@main.command()
@click.argument("test", type=click.Path(dir_okay=False))
@config_options
@_guarded
def evaluate(test, **kwargs):
    """Confusion tables, set proportions and parity gaps on labeled TEST data."""
    cfg = _config(kwargs)
    report = pipeline.cmd_evaluate(cfg, test)
    click.echo(report.text(), nl=False)


@main.command()
@click.option("--format", "fmt", type=click.Choice(["text", "csv"]), default="text", show_default=True)
@config_options
@_guarded
def report(fmt, **kwargs):
    """Print the last evaluation report."""
    cfg = _config(kwargs)
    click.echo(pipeline.cmd_report(cfg, fmt), nl=False)


@main.command()
@click.argument("test", type=click.Path(dir_okay=False))
@config_options
@_guarded
def run(test, **kwargs):
    """fit, transport, calibrate and evaluate in sequence."""
    cfg = _config(kwargs)
    report = pipeline.run_pipeline(cfg, test)
    click.echo(report.text(), nl=False)


if __name__ == "__main__":
    main()

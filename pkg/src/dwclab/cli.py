"""The dwc-lab command line: experiments in, CSV/JSON plus figures out.

Exit codes: 0 success, 2 config error, 3 bound violation in the suite.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .experiments import ConfigError, config_from_json, emit, run


def _assemble(kind: str, config_path: str | None, overrides: dict):
    obj: dict = {}
    if config_path:
        try:
            obj = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {config_path}: {e}")
        if not isinstance(obj, dict):
            raise ConfigError("config file must hold a JSON object")
    file_kind = obj.get("kind")
    if file_kind is not None and file_kind != kind:
        raise ConfigError(
            f"config kind {file_kind!r} does not match subcommand {kind!r}")
    obj["kind"] = kind
    for key, value in overrides.items():
        if value is not None:
            obj[key] = value
    return config_from_json(obj)


def _execute(kind: str, config_path, out, no_figures, fmt, overrides):
    try:
        config = _assemble(kind, config_path, overrides)
        report = run(config)
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(2)
    payload = emit(report, fmt)
    if out:
        out_path = Path(out)
        out_path.write_bytes(payload)
        targets = [str(out_path)]
        if not no_figures:
            from .figures import render
            fig_path = render(report, out_path.with_suffix(".png"))
            targets.append(str(fig_path))
        click.echo("wrote " + ", ".join(targets), err=True)
    else:
        sys.stdout.buffer.write(payload)
    return report


def _source_override(source_json: str | None):
    if source_json is None:
        return None
    try:
        return json.loads(source_json)
    except json.JSONDecodeError as e:
        raise ConfigError(f"--source is not valid JSON: {e}")


def common_options(f):
    f = click.option("--config", "config_path", type=click.Path(),
                     default=None, help="JSON experiment config.")(f)
    f = click.option("--out", type=click.Path(), default=None,
                     help="Write CSV/JSON here (stdout otherwise).")(f)
    f = click.option("--no-figures", is_flag=True,
                     help="Skip the PNG next to --out.")(f)
    f = click.option("--format", "fmt", type=click.Choice(["csv", "json"]),
                     default="csv", show_default=True)(f)
    return f


def run_options(f):
    f = click.option("--class", "class_tag", default=None,
                     help="Class tag: uniform | rare-spike | "
                          "contaminated-uniform.")(f)
    f = click.option("--source", "source_json", default=None,
                     help="Source spec as JSON.")(f)
    f = click.option("--delta", type=float, default=None)(f)
    f = click.option("--eta", type=float, default=None)(f)
    f = click.option("--trials", type=int, default=None)(f)
    f = click.option("--horizon", type=int, default=None)(f)
    f = click.option("--seed", type=int, default=None)(f)
    return f


@click.group()
@click.version_option(__version__, prog_name="dwc-lab")
def main():
    """Compressibility experiments: bounds, indicators, premiums."""


@main.command("bounds")
@common_options
@click.option("--seed", type=int, default=None)
def bounds_cmd(config_path, out, no_figures, fmt, seed):
    """Falsification suite for the supporting inequalities (exit 3 on any
    violation)."""
    report = _execute("bounds-suite", config_path, out, no_figures, fmt,
                      {"seed": seed})
    if report.aggregates.get("violations", 0):
        click.echo(f"{report.aggregates['violations']} bound violation(s)",
                   err=True)
        sys.exit(3)


@main.command("phi-run", help="Per-trial indicator outcomes as CSV.")
@common_options
@run_options
def phi_run_cmd(config_path, out, no_figures, fmt, class_tag, source_json,
                delta, eta, trials, horizon, seed):
    try:
        source = _source_override(source_json)
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(2)
    _execute("phi-run", config_path, out, no_figures, fmt,
             {"class": class_tag, "source": source, "delta": delta,
              "eta": eta, "trials": trials, "horizon": horizon, "seed": seed})


@main.command("premature", help="Premature-entry summary metrics.")
@common_options
@run_options
def premature_cmd(config_path, out, no_figures, fmt, class_tag, source_json,
                  delta, eta, trials, horizon, seed):
    try:
        source = _source_override(source_json)
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(2)
    _execute("premature", config_path, out, no_figures, fmt,
             {"class": class_tag, "source": source, "delta": delta,
              "eta": eta, "trials": trials, "horizon": horizon, "seed": seed})


@main.command("redundancy", help="Per-symbol redundancy curve for a source.")
@common_options
@click.option("--source", "source_json", default=None,
              help="Source spec as JSON.")
@click.option("--code", type=click.Choice(["self", "kt", "pattern"]),
              default=None, help="Coding measure to evaluate.")
@click.option("--ns", default=None,
              help="Comma-separated sample lengths, e.g. 256,1024.")
@click.option("--mode", type=click.Choice(["exact", "mc"]), default=None)
@click.option("--trials", type=int, default=None)
@click.option("--seed", type=int, default=None)
def redundancy_cmd(config_path, out, no_figures, fmt, source_json, code, ns,
                   mode, trials, seed):
    try:
        source = _source_override(source_json)
        params = {}
        if code is not None:
            params["code"] = code
        if ns is not None:
            try:
                params["ns"] = [int(x) for x in ns.split(",") if x.strip()]
            except ValueError:
                raise ConfigError(f"--ns must be comma-separated ints: {ns!r}")
        if mode is not None:
            params["mode"] = mode
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(2)
    overrides = {"source": source, "trials": trials, "seed": seed}
    if params:
        overrides["params"] = params
    _execute("redundancy-curve", config_path, out, no_figures, fmt, overrides)


@main.command("insure", help="Percentile-scheme premiums and ruin statistics.")
@common_options
@run_options
def insure_cmd(config_path, out, no_figures, fmt, class_tag, source_json,
               delta, eta, trials, horizon, seed):
    try:
        source = _source_override(source_json)
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(2)
    _execute("insure", config_path, out, no_figures, fmt,
             {"class": class_tag, "source": source, "delta": delta,
              "eta": eta, "trials": trials, "horizon": horizon, "seed": seed})


@main.command("demo", help="Four-quadrant compressibility/insurability demos.")
@common_options
@click.option("--seed", type=int, default=None)
def demo_cmd(config_path, out, no_figures, fmt, seed):
    _execute("demo", config_path, out, no_figures, fmt, {"seed": seed})


if __name__ == "__main__":
    main()

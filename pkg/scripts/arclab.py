#!/usr/bin/env python3
"""
arclength-lab command line

Every subcommand builds a RunConfig (from --config and/or options), runs it
and writes the VerificationReport. Exit codes: 0 when every check passes,
1 on a failing check or library error, 2 on a configuration error.
"""

import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

# Add project root to path
PROJECT_ROOT = Path(__file__).parent.parent
sys.path.append(str(PROJECT_ROOT))

from arclength_lab.errors import ArclengthLabError, ConfigError  # noqa: E402
from arclength_lab.report import CheckStatus, VerificationReport, emit_plot_data, load_report  # noqa: E402
from arclength_lab.runner import CampaignRunner  # noqa: E402
from config.run_config import Command, load_run_config  # noqa: E402
from config.settings import LabSettings, Profile, SettingsManager  # noqa: E402

logger = logging.getLogger("arclab")
console = Console(stderr=True)

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def configure_logging(settings: LabSettings, verbose: bool = False):
    level = logging.DEBUG if verbose else getattr(logging, settings.logging.level, logging.INFO)
    if settings.logging.rich:
        logging.basicConfig(level=level, format="%(message)s", datefmt="[%X]",
                            handlers=[RichHandler(console=console, rich_tracebacks=True)], force=True)
    else:
        logging.basicConfig(level=level, format='%(asctime)s - %(levelname)s - %(message)s', force=True)


def _parse_param(text: str) -> Tuple[str, Any]:
    if "=" not in text:
        raise click.BadParameter(f"expected key=value, got {text!r}", param_hint="--param")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def run_options(fn):
    """Options shared by every run subcommand"""
    options = [
        click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
                     help="JSON run config; options below override its fields"),
        click.option("--curve", "curve_json",
                     help='Inline curve spec, e.g. \'{"dim": 2, "coeffs": [["0","1"], ["0","0","1"]]}\''),
        click.option("--corpus", "corpus_name", help="Corpus curve name (see `corpus list`)"),
        click.option("--interval", nargs=2, type=float, default=None, help="Parameter interval LO HI"),
        click.option("--samples", type=int, default=None, help="Sample count"),
        click.option("--seed", type=int, default=None, help="64-bit seed (required for sampling runs)"),
        click.option("-K", "--K", "K", type=int, default=None, help="Vanishing order of the weight s^(2K/d(d+1))"),
        click.option("--param", "params", multiple=True, help="Command parameter key=value (JSON value)"),
        click.option("--output", "-o", type=click.Path(dir_okay=False), default=None, help="Report file"),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _config_data(command: Command, config_file: Optional[str], curve_json: Optional[str], corpus_name: Optional[str],
                 interval: Optional[Tuple[float, float]], samples: Optional[int], seed: Optional[int],
                 K: Optional[int], params: Tuple[str, ...]) -> Dict[str, Any]:
    data: Dict[str, Any] = {}
    if config_file:
        try:
            data = json.loads(Path(config_file).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not JSON: {exc}") from exc
    data["command"] = command.value
    if curve_json:
        try:
            data["curve"] = json.loads(curve_json)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"curve is not JSON: {exc}", "curve") from exc
        data.pop("corpus", None)
    if corpus_name:
        data["corpus"] = corpus_name
        data.pop("curve", None)
    if interval:
        data["interval"] = {"lo": interval[0], "hi": interval[1]}
    for key, value in (("samples", samples), ("seed", seed), ("K", K)):
        if value is not None:
            data[key] = value
    if params:
        data.setdefault("params", {}).update(dict(_parse_param(p) for p in params))
    return data


def _print_report(report: VerificationReport):
    table = Table(title=f"{report.command} ({report.wall_time}s)")
    table.add_column("check")
    table.add_column("status")
    table.add_column("anchor")
    colors = {CheckStatus.PASS: "green", CheckStatus.WARN: "yellow", CheckStatus.FAIL: "red"}
    for check in report.checks:
        table.add_row(check.name, f"[{colors[check.status]}]{check.status.value}[/]", check.anchor)
    console.print(table)


def _execute(ctx: click.Context, command: Command, **options) -> None:
    settings: LabSettings = ctx.obj["settings"]
    output = options.pop("output")
    try:
        config = load_run_config(_config_data(command, **options))
        report = CampaignRunner(settings).run(config)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        ctx.exit(EXIT_CONFIG)
    except ArclengthLabError as exc:
        logger.error("%s failed: %s", command.value, exc)
        ctx.exit(EXIT_FAIL)

    if output:
        report.write(output)
    else:
        click.echo(report.to_text(), nl=False)
    _print_report(report)
    if not report.passed:
        logger.error("failing checks: %s", ", ".join(report.failing))
        ctx.exit(EXIT_FAIL)
    ctx.exit(EXIT_PASS)


@click.group()
@click.option("--profile", type=click.Choice([p.value for p in Profile]), default=Profile.STANDARD.value,
              show_default=True, help="Settings profile")
@click.option("--env-file", type=click.Path(dir_okay=False), default=None, help=".env file with ARCLAB_* overrides")
@click.option("--verbose", "-v", is_flag=True, help="Debug logging")
@click.pass_context
def cli(ctx: click.Context, profile: str, env_file: Optional[str], verbose: bool):
    """Numerical verification of endpoint bounds for affine arclength averages"""
    manager = SettingsManager(Profile(profile), env_file)
    errors = manager.validate_config()
    if errors:
        for error in errors:
            console.print(f"[red]settings: {error}[/]")
        ctx.exit(EXIT_CONFIG)
    ctx.ensure_object(dict)
    ctx.obj["settings"] = manager.get_config()
    configure_logging(manager.get_config(), verbose)


@cli.command()
@run_options
@click.pass_context
def decompose(ctx, **options):
    """Interval decomposition with comparability constants per piece"""
    _execute(ctx, Command.DECOMPOSE, **options)


@cli.group()
def verify():
    """Identity, factorization, derivative and geometric checks"""


@verify.command("identity")
@run_options
@click.pass_context
def verify_identity(ctx, **options):
    """J_P against the nested integral ladder J_d"""
    _execute(ctx, Command.VERIFY_IDENTITY, **options)


@verify.command("vandermonde")
@run_options
@click.pass_context
def verify_vandermonde(ctx, **options):
    """Exhaustive alternant / Vandermonde factorization"""
    _execute(ctx, Command.VERIFY_VANDERMONDE, **options)


@verify.command("derivative-bounds")
@run_options
@click.pass_context
def verify_derivative_bounds(ctx, **options):
    _execute(ctx, Command.VERIFY_DERIVATIVE_BOUNDS, **options)


@verify.command("geometric")
@run_options
@click.pass_context
def verify_geometric(ctx, **options):
    """Seeded geometric-inequality and preimage probes on each piece"""
    _execute(ctx, Command.VERIFY_GEOMETRIC, **options)


@verify.command("lbj")
@run_options
@click.pass_context
def verify_lbj(ctx, **options):
    """Conditional Jacobian lower bound on tower-generated tuples"""
    _execute(ctx, Command.VERIFY_LBJ, **options)


@cli.group()
def bands():
    """Band structures"""


@bands.command("build")
@run_options
@click.pass_context
def bands_build(ctx, **options):
    _execute(ctx, Command.BANDS_BUILD, **options)


@bands.command("verify")
@run_options
@click.pass_context
def bands_verify(ctx, **options):
    """Band invariants and separation clauses on random configurations"""
    _execute(ctx, Command.BANDS_VERIFY, **options)


@cli.group()
def tower():
    """Tuple towers"""


@tower.command("build")
@run_options
@click.pass_context
def tower_build(ctx, **options):
    _execute(ctx, Command.TOWER_BUILD, **options)


@cli.group()
def operator():
    """Discretized operator functionals"""


@operator.command("ratio")
@run_options
@click.pass_context
def operator_ratio(ctx, **options):
    """Restricted weak-type ratio and duality"""
    _execute(ctx, Command.OPERATOR_RATIO, **options)


@operator.command("sweep-knapp")
@run_options
@click.pass_context
def operator_sweep_knapp(ctx, **options):
    """Knapp family sweep over delta"""
    _execute(ctx, Command.OPERATOR_SWEEP_KNAPP, **options)


@operator.command("check-mle")
@run_options
@click.pass_context
def operator_check_mle(ctx, **options):
    _execute(ctx, Command.OPERATOR_CHECK_MLE, **options)


@operator.command("check-mlf")
@run_options
@click.pass_context
def operator_check_mlf(ctx, **options):
    _execute(ctx, Command.OPERATOR_CHECK_MLF, **options)


@cli.group()
def corpus():
    """Built-in curve corpus"""


@corpus.command("list")
@click.option("--output", "-o", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def corpus_list(ctx, output: Optional[str]):
    _execute(ctx, Command.CORPUS_LIST, config_file=None, curve_json=None, corpus_name=None, interval=None,
             samples=None, seed=None, K=None, params=(), output=output)


@cli.group()
def report():
    """Report post-processing"""


@report.command("emit-plot")
@click.argument("report_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("which")
@click.option("--output", "-o", type=click.Path(dir_okay=False), default=None, help="CSV file (stdout if omitted)")
@click.pass_context
def report_emit_plot(ctx, report_file: str, which: str, output: Optional[str]):
    """Write a report table as CSV with a '#' column header"""
    try:
        text = emit_plot_data(load_report(report_file), which, output)
    except ArclengthLabError as exc:
        logger.error("%s", exc)
        ctx.exit(EXIT_FAIL)
    if output is None:
        click.echo(text, nl=False)


def main(argv: Optional[List[str]] = None):
    cli.main(args=argv, prog_name="arclab")


if __name__ == "__main__":
    main()

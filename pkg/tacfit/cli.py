"""
Command-line interface for TAC/BrAC diffusion-parameter estimation using Click and Rich.
"""

import sys
from contextlib import nullcontext
from functools import wraps
from typing import List, Optional

import click
from pydantic import ValidationError
from rich import box
from rich.panel import Panel
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn, TimeElapsedColumn
from rich.table import Table

from . import __version__
from .config import Config
from .console import console, err_console, setup_logging
from .diffusion import ParamQ
from .errors import TacfitError
from .runner import EXIT_INPUT, RunResult, StudyRunner
from .schema import ConfigLoadError, RunConfig, format_validation_error, load_config


def parse_m_values(text: Optional[str]) -> Optional[List[int]]:
    """Parse '20,60,100' into a list of positive integers."""
    if text is None:
        return None
    try:
        values = [int(p) for p in text.replace(" ", "").split(",") if p]
    except ValueError:
        raise ConfigLoadError(f"--m expects comma-separated integers, got '{text}'")
    if not values or any(v < 1 for v in values):
        raise ConfigLoadError(f"--m expects positive integers, got '{text}'")
    return values


def build_config(config_path: Optional[str], **overrides) -> RunConfig:
    """
    Environment defaults, then the YAML file, then command-line flags.

    Raises:
        ConfigLoadError: If the file or any override is invalid
    """
    base = load_config(config_path) if config_path else RunConfig()
    if overrides.get("discretization_k") is not None and base.template is None:
        overrides.setdefault("template_mode", "pde")
    try:
        return base.with_overrides(**overrides)
    except ValidationError as e:
        raise ConfigLoadError(format_validation_error(e, "Invalid command-line override"))


def display_config(config: RunConfig):
    """Display the effective configuration in a table."""
    table = Table(title="Configuration", box=box.ROUNDED, show_header=True, header_style="bold cyan")
    table.add_column("Setting", style="cyan", no_wrap=True)
    table.add_column("Value", style="white")

    env = Config.display()
    table.add_row("Template", config.template_mode if config.template_mode != "pde" else f"pde (k={config.discretization_k})")
    table.add_row("BrAC Sub-intervals", str(config.brac_subintervals))
    table.add_row("Score Tolerance", f"{config.tol:g}")
    table.add_row("Max Iterations", str(config.max_iter))
    table.add_row("Noise Sigma", f"{config.sigma:g}")
    table.add_row("Random Seed", str(config.seed))
    table.add_row("Parallel Workers", str(config.workers or env["Parallel Workers"]))

    console.print(table)


def _matrix_text(m) -> str:
    return "\n".join("  ".join(f"{v: .6g}" for v in row) for row in m)


def display_fit(result: RunResult):
    """Display the estimate report."""
    report = result.metadata["report"]
    table = Table(title="📊 Estimate", box=box.DOUBLE, show_header=True, header_style="bold magenta")
    table.add_column("Quantity", style="cyan", no_wrap=True)
    table.add_column("Value", style="white")

    table.add_row("q̂", f"({report.q_hat[0]:.6g}, {report.q_hat[1]:.6g})")
    table.add_row("σ̂²", f"{report.sigma2_hat:.6g}")
    table.add_row("Residual RMSE", f"{result.metadata['fit'].residual_rmse:.6g}")
    table.add_row("Γ̂", _matrix_text(report.gamma_hat))
    table.add_row("Cov(q̂)", _matrix_text(report.covariance) if report.covariance else "N/A")
    if report.ellipse:
        table.add_row("95% ellipse semi-axes", ", ".join(f"{a:.4g}" for a in report.ellipse.semi_axes))
    table.add_row("|score|", f"{report.gradient_norm:.3g}")
    table.add_row("Converged", "✓" if report.converged else "✗", style="green" if report.converged else "yellow")
    table.add_row("Observations", f"{report.M:,}")
    table.add_row("Starts", str(report.starts_tried))

    console.print(table)


def display_mc_table(result: RunResult):
    """Display mean q̂ ± sd and the scaled covariance per observation count."""
    reports = result.metadata["reports"]
    table = Table(title="📊 Monte-Carlo Estimates", box=box.DOUBLE, show_header=True, header_style="bold magenta")
    table.add_column("m", justify="right", style="cyan", no_wrap=True)
    table.add_column("Mean q̂ ± sd", style="white")
    table.add_column("Scaled Sample Covariance", style="yellow")
    table.add_column("Rel. Frobenius", justify="right", style="green")
    table.add_column("Failures", justify="right")

    for r in reports:
        mean = f"{r.mean_qhat[0]:.4f} ± {r.sd_qhat[0]:.4f}\n{r.mean_qhat[1]:.4f} ± {r.sd_qhat[1]:.4f}"
        frob = f"{r.frobenius_rel_error:.3f}" if r.frobenius_rel_error is not None else "N/A"
        table.add_row(str(r.m), mean, _matrix_text(r.scaled_cov), frob, f"{r.failures}/{r.replicates}")

    console.print(table)
    if reports:
        console.print(Panel.fit(
            _matrix_text(reports[0].theoretical_sigma),
            title="σ²Γ⁻¹ (quadrature)",
            border_style="cyan",
        ))


def display_gamma(result: RunResult):
    """Display Γ and σ²Γ⁻¹."""
    report = result.metadata["report"]
    table = Table(title="📐 Gamma", box=box.ROUNDED, show_header=True, header_style="bold cyan")
    table.add_column("Matrix", style="cyan", no_wrap=True)
    table.add_column("Value", style="white")

    table.add_row(f"Γ ({report.quadrature_nodes:,} nodes)", _matrix_text(report.gamma))
    table.add_row("σ²Γ⁻¹", _matrix_text(report.sigma2_gamma_inv))
    table.add_row("eig(Γ)", ", ".join(f"{e:.6g}" for e in report.eigenvalues))
    if report.gamma_n is not None:
        table.add_row("Γₙ (session)", _matrix_text(report.gamma_n))

    console.print(table)


def report_outcome(result: RunResult, quiet: bool):
    if result.error:
        err_console.print(f"[red]✗ {result.name}: {result.error}[/red]")
    elif not quiet:
        console.print(f"✓ {result.name} ({result.elapsed_time:.2f}s)", style="green")
    if not quiet and result.metadata and "paths" in result.metadata:
        for path in result.metadata["paths"]:
            console.print(f"  → {path}", style="dim")


def common_options(func):
    """Options shared by every subcommand."""
    options = [
        click.option("--config", "-c", "config_path", type=click.Path(dir_okay=False), default=None,
                     help="YAML run configuration"),
        click.option("--k", "k", type=int, default=None, help="Number of depth nodes of the PDE template"),
        click.option("--seed", type=int, default=None, help="Random seed"),
        click.option("--sigma", type=float, default=None, help="Noise standard deviation"),
        click.option("--out", "-o", "out_dir", type=click.Path(file_okay=False), default="results",
                     help="Output directory (default: results)"),
        click.option("--quiet", "-q", is_flag=True, help="Quiet mode (minimal output)"),
        click.option("--verbose", "-v", is_flag=True, help="Verbose mode (debug logging)"),
    ]
    for option in reversed(options):
        func = option(func)

    @wraps(func)
    def wrapper(*args, **kwargs):
        setup_logging(verbose=kwargs["verbose"], quiet=kwargs["quiet"])
        try:
            return func(*args, **kwargs)
        except TacfitError as e:
            err_console.print(f"[red]✗ {e}[/red]")
            click.get_current_context().exit(EXIT_INPUT)

    return wrapper


@click.group()
@click.version_option(__version__, prog_name="tacfit")
def cli():
    """
    🍷 tacfit: diffusion-parameter estimation from transdermal alcohol data

    Fit q = (q1, q2) of the BrAC-to-TAC diffusion model by least squares,
    simulate sessions, and check the estimator's asymptotics by Monte Carlo.
    """


@cli.command()
@common_options
@click.option("--tac", "tac_path", type=click.Path(dir_okay=False), default=None, help="TAC CSV (time_hours,tac_mg_dl)")
@click.option("--brac", "brac_path", type=click.Path(dir_okay=False), default=None, help="BrAC CSV (time_hours,brac_pct)")
@click.option("--q0", "q0", type=str, default=None, help="Starting point 'q1,q2' (default: 1,1)")
@click.pass_context
def estimate(ctx, config_path, k, seed, sigma, out_dir, quiet, verbose, tac_path, brac_path, q0):
    """Fit q to one TAC/BrAC session and write fit_report.json and fit_curve.csv."""
    if not tac_path or not brac_path:
        raise ConfigLoadError("estimate needs both --tac and --brac")
    init = list(ParamQ.parse(q0)) if q0 else None
    config = build_config(config_path, discretization_k=k, seed=seed, sigma=sigma, init=init)

    if not quiet:
        console.print(Panel.fit("[bold cyan]TAC Diffusion Estimate[/bold cyan]", border_style="cyan"))
        display_config(config)

    runner = StudyRunner(config, out_dir)
    with console.status("[bold green]Fitting...", spinner="dots") if not quiet else nullcontext():
        result = runner.run_estimate(tac_path, brac_path)

    if result.metadata and "report" in result.metadata:
        if quiet:
            rep = result.metadata["report"]
            click.echo(f"{rep.q_hat[0]:.10g},{rep.q_hat[1]:.10g},{rep.sigma2_hat:.10g},{int(rep.converged)}")
        else:
            display_fit(result)
    report_outcome(result, quiet)
    ctx.exit(result.exit_code)


@cli.command()
@common_options
@click.option("--m", "m", type=str, default=None, help="Number of TAC observations")
@click.option("--q", "q", type=str, default=None, help="True parameter 'q1,q2' (default: 1,1)")
@click.option("--design", type=click.Choice(["uniform", "random"]), default=None, help="Observation times")
@click.pass_context
def simulate(ctx, config_path, k, seed, sigma, out_dir, quiet, verbose, m, q, design):
    """Write a synthetic session (tac.csv, brac.csv) from Michaelis-Menten BrAC."""
    m_values = parse_m_values(m)
    if m_values is not None and len(m_values) != 1:
        raise ConfigLoadError(f"simulate takes a single --m, got {m}")
    config = build_config(
        config_path,
        discretization_k=k,
        seed=seed,
        sigma=sigma,
        m=m_values[0] if m_values else None,
        q_true=list(ParamQ.parse(q)) if q else None,
        design=design,
    )
    if not quiet:
        display_config(config)

    result = StudyRunner(config, out_dir).run_simulate()
    report_outcome(result, quiet)
    ctx.exit(result.exit_code)


@cli.command("mc-table")
@common_options
@click.option("--m", "m", type=str, default=None, help="Observation counts, e.g. 20,60,100")
@click.option("--replicates", "-n", type=int, default=None, help="Replicates per observation count")
@click.pass_context
def mc_table(ctx, config_path, k, seed, sigma, out_dir, quiet, verbose, m, replicates):
    """Monte-Carlo table of mean q̂ and scaled covariance against σ²Γ⁻¹."""
    config = build_config(
        config_path,
        discretization_k=k,
        seed=seed,
        sigma=sigma,
        m_values=parse_m_values(m),
        replicates=replicates,
    )
    if not quiet:
        console.print(Panel.fit("[bold cyan]Monte-Carlo Study[/bold cyan]", border_style="cyan"))
        display_config(config)

    runner = StudyRunner(config, out_dir)
    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TimeElapsedColumn(),
        console=console,
        disable=quiet,
    ) as progress:
        tasks = {
            mv: progress.add_task(f"[cyan]m={mv}...", total=config.replicates)
            for mv in config.m_values
        }
        result = runner.run_mc_table(lambda mv, n: progress.advance(tasks[mv], n))

    if result.success and not quiet:
        display_mc_table(result)
    report_outcome(result, quiet)
    ctx.exit(result.exit_code)


@cli.command()
@common_options
@click.option("--tac", "tac_path", type=click.Path(dir_okay=False), default=None, help="Optional session TAC CSV")
@click.option("--brac", "brac_path", type=click.Path(dir_okay=False), default=None, help="Optional session BrAC CSV")
@click.pass_context
def gamma(ctx, config_path, k, seed, sigma, out_dir, quiet, verbose, tac_path, brac_path):
    """Γ by quadrature and σ²Γ⁻¹ (plus Γₙ for a session, if given)."""
    if bool(tac_path) != bool(brac_path):
        raise ConfigLoadError("gamma needs both --tac and --brac, or neither")
    config = build_config(config_path, discretization_k=k, seed=seed, sigma=sigma)
    if not quiet:
        display_config(config)

    result = StudyRunner(config, out_dir).run_gamma(tac_path, brac_path)
    if result.success and not quiet:
        display_gamma(result)
    report_outcome(result, quiet)
    ctx.exit(result.exit_code)


def main(argv: Optional[List[str]] = None):
    """Console-script entry point; usage errors exit with 1 like other input errors."""
    try:
        code = cli.main(args=argv, prog_name="tacfit", standalone_mode=False)
    except click.exceptions.Abort:
        err_console.print("[red]Aborted[/red]")
        sys.exit(EXIT_INPUT)
    except click.ClickException as e:
        e.show()
        sys.exit(EXIT_INPUT)
    sys.exit(code or 0)


if __name__ == "__main__":
    main()

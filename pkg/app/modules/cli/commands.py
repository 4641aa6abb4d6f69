"""
Typer application: one subcommand per operation.

Every command funnels its flags through `build_run_config`; with
`obj={"parse_only": True}` the command returns the RunConfig instead of
running it, which is what `parse_config` uses.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import click
import typer
from typing_extensions import Annotated

from app.common.exceptions import BalancedEmbedError, UsageError
from app.core.logging_config import configure_logging
from app.modules.cli.schemas import Command, RunConfig
from app.modules.cli.service import build_run_config, run
from app.modules.moment_map.schemas import LambdaConvention

logger = logging.getLogger(__name__)

PROG_NAME = "balanced-embed"

app = typer.Typer(
    name=PROG_NAME,
    help="Balanced embeddings, the continuity path F_t and stability of point configurations.",
    add_completion=False,
    no_args_is_help=True,
)


# ===== OPTIONS =====

InputOpt = Annotated[Optional[Path], typer.Option("--input", "-i", help="Scheme file (JSON)")]
OutOpt = Annotated[Optional[Path], typer.Option("--out", "-o", help="Output file (stdout when omitted)")]
ConfigOpt = Annotated[Optional[Path], typer.Option("--config", help="YAML/JSON file overriding settings")]
VerboseOpt = Annotated[bool, typer.Option("--verbose", "-v", help="DEBUG logging with tracebacks")]
ThreadsOpt = Annotated[Optional[int], typer.Option("--threads", help="Worker threads (0 = all cores)")]
SeedOpt = Annotated[Optional[int], typer.Option("--seed", help="Seed for sampled searches")]
RadialOpt = Annotated[Optional[int], typer.Option("--radial-order", help="Gauss-Legendre nodes per chart")]
AngularOpt = Annotated[Optional[int], typer.Option("--angular-order", help="Angular nodes per circle")]
AuxOpt = Annotated[Optional[Path], typer.Option("--aux", help="Auxiliary point scheme (overrides the file's 'aux')")]
ConventionOpt = Annotated[Optional[LambdaConvention], typer.Option("--convention", help="Normalization of lambda_t")]

ResidualTolOpt = Annotated[Optional[float], typer.Option("--residual-tol", help="Relative residual tolerance")]
MaxItersOpt = Annotated[Optional[int], typer.Option("--max-newton-iters", help="Newton iteration cap")]
StepFdOpt = Annotated[Optional[float], typer.Option("--step-fd", help="Finite-difference step")]
TikhonovOpt = Annotated[Optional[float], typer.Option("--tikhonov", help="Regularization added below the floor")]
EigFloorOpt = Annotated[Optional[float], typer.Option("--eig-floor", help="Smallest accepted operator eigenvalue")]


def _dispatch(ctx: typer.Context, command: Command, flags: Dict[str, Any]):
    flags.pop("ctx", None)
    if ctx.obj and ctx.obj.get("parse_only"):
        return build_run_config(command, flags)
    configure_logging(verbose=bool(flags.get("verbose")))
    try:
        config = build_run_config(command, flags)
    except BalancedEmbedError as exc:
        logger.error(exc.detail)
        raise typer.Exit(exc.exit_code)
    configure_logging(config.verbose, config.log_level)
    raise typer.Exit(run(config))


# ===== COMMANDS =====

@app.command("moment")
def moment_command(
    ctx: typer.Context,
    input: InputOpt = None,
    aux: AuxOpt = None,
    t: Annotated[Optional[float], typer.Option("--t", help="Path parameter (needs auxiliary points when > 0)")] = None,
    convention: ConventionOpt = None,
    residual_tol: ResidualTolOpt = None,
    radial_order: RadialOpt = None,
    angular_order: AngularOpt = None,
    out: OutOpt = None,
    config_file: ConfigOpt = None,
    threads: ThreadsOpt = None,
    seed: SeedOpt = None,
    verbose: VerboseOpt = False,
):
    """Moment matrix and F_t residual of a scheme."""
    return _dispatch(ctx, Command.MOMENT, dict(locals()))


@app.command("balance")
def balance_command(
    ctx: typer.Context,
    input: InputOpt = None,
    residual_tol: ResidualTolOpt = None,
    max_newton_iters: MaxItersOpt = None,
    step_fd: StepFdOpt = None,
    tikhonov: TikhonovOpt = None,
    eig_floor: EigFloorOpt = None,
    radial_order: RadialOpt = None,
    angular_order: AngularOpt = None,
    out: OutOpt = None,
    config_file: ConfigOpt = None,
    threads: ThreadsOpt = None,
    seed: SeedOpt = None,
    verbose: VerboseOpt = False,
):
    """Damped Newton for the balancing equation at t = 0 (exit 1 if it does not converge)."""
    return _dispatch(ctx, Command.BALANCE, dict(locals()))


@app.command("continuity")
def continuity_command(
    ctx: typer.Context,
    input: InputOpt = None,
    aux: AuxOpt = None,
    t_start: Annotated[Optional[float], typer.Option("--t-start", help="First t (default from volume and mass)")] = None,
    gamma: Annotated[Optional[float], typer.Option("--gamma", help="Geometric decrease factor")] = None,
    t_end: Annotated[Optional[float], typer.Option("--t-end", help="Last t")] = None,
    max_halvings: Annotated[Optional[int], typer.Option("--max-halvings", help="Step halvings before breakdown")] = None,
    t_snap: Annotated[Optional[float], typer.Option("--t-snap", help="Jump to t_end below this t")] = None,
    allow_aux_outside: Annotated[
        Optional[bool],
        typer.Option("--allow-aux-outside/--forbid-aux-outside", help="Accept auxiliary points off the curve"),
    ] = None,
    convention: ConventionOpt = None,
    matrices: Annotated[bool, typer.Option("--matrices/--no-matrices", help="Include g in the JSON trace")] = True,
    residual_tol: ResidualTolOpt = None,
    max_newton_iters: MaxItersOpt = None,
    step_fd: StepFdOpt = None,
    tikhonov: TikhonovOpt = None,
    eig_floor: EigFloorOpt = None,
    radial_order: RadialOpt = None,
    angular_order: AngularOpt = None,
    out: OutOpt = None,
    config_file: ConfigOpt = None,
    threads: ThreadsOpt = None,
    seed: SeedOpt = None,
    verbose: VerboseOpt = False,
):
    """
    Follow F_t = 0 from a large t down to t_end.

    Writes the CSV trace to --out (stdout when omitted) and, with --out,
    the JSON trace next to it. Exit 1 on breakdown.
    """
    return _dispatch(ctx, Command.CONTINUITY, dict(locals()))


@app.command("stability")
def stability_command(
    ctx: typer.Context,
    input: InputOpt = None,
    samples: Annotated[Optional[int], typer.Option("--samples", help="Random subgroups in the Chow search")] = None,
    out: OutOpt = None,
    config_file: ConfigOpt = None,
    threads: ThreadsOpt = None,
    seed: SeedOpt = None,
    verbose: VerboseOpt = False,
):
    """Stability of a point configuration: counting criterion and Chow weights."""
    return _dispatch(ctx, Command.STABILITY, dict(locals()))


@app.command("chow-weight")
def chow_weight_command(
    ctx: typer.Context,
    input: InputOpt = None,
    weights: Annotated[
        Optional[List[str]],
        typer.Option("--weights", "-w", help="Comma-separated weights, e.g. --weights=1,0,-1 (repeatable)"),
    ] = None,
    s_values: Annotated[Optional[str], typer.Option("--s-values", help="Comma-separated s for curve estimates")] = None,
    out: OutOpt = None,
    config_file: ConfigOpt = None,
    threads: ThreadsOpt = None,
    seed: SeedOpt = None,
    verbose: VerboseOpt = False,
):
    """Chow weight of a scheme for one or more one-parameter subgroups."""
    return _dispatch(ctx, Command.CHOW_WEIGHT, dict(locals()))


@app.command("make-example")
def make_example_command(
    ctx: typer.Context,
    n: Annotated[Optional[int], typer.Option("--n", help="Projective dimension")] = None,
    out: Annotated[Optional[Path], typer.Option("--out", "-o", help="Directory for the scheme files")] = None,
    config_file: ConfigOpt = None,
    seed: SeedOpt = None,
    verbose: VerboseOpt = False,
):
    """Write reference scheme files for P^n."""
    return _dispatch(ctx, Command.MAKE_EXAMPLE, dict(locals()))


# ===== PARSING =====

def parse_config(argv: Sequence[str]) -> RunConfig:
    """
    RunConfig for a command line without running it.

    Raises:
        UsageError: unknown flags, bad values, missing required options
        SchemeFileError: --input or --aux names a missing file
    """
    command = typer.main.get_command(app)
    try:
        result = command.main(
            args=list(argv),
            prog_name=PROG_NAME,
            standalone_mode=False,
            obj={"parse_only": True},
        )
    except click.UsageError as exc:
        raise UsageError(exc.format_message())
    if not isinstance(result, RunConfig):
        raise UsageError("No command given")
    return result

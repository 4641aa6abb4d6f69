"""
Command dispatch for balanced-embed.

`build_run_config` merges flags over the --config file and the environment;
`run` executes one command and returns the process exit code.
"""

import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import yaml
from pydantic import ValidationError

from app.common.exceptions import BalancedEmbedError, SchemeFileError, UsageError
from app.core.config import Settings, settings
from app.modules.cli.schemas import Command, RunConfig
from app.modules.integration.schemas import PointScheme, QuadratureGrid
from app.modules.integration.service import rational_normal_curve
from app.modules.reports.schemas import SchemeFile
from app.modules.reports.service import (
    ReportService,
    read_scheme_file,
    scheme_file_for,
    trace_csv,
    write_report,
    write_scheme_file,
)
from app.modules.reports.utils import write_text
from app.modules.solver.continuity import continuity_run
from app.modules.solver.schemas import ContinuitySchedule, ContinuityTrace, SolverConfig
from app.modules.solver.service import newton_solve_at_t
from app.modules.stability.schemas import WeightVector
from app.modules.stability.service import curve_sampler, find_general_position_subset, roots_of_unity_config

logger = logging.getLogger(__name__)


# ===== CONFIGURATION =====

def load_config_file(path: Path) -> Dict[str, Any]:
    """
    Settings overrides from a YAML or JSON file.

    Keys are Settings field names, case-insensitive.

    Raises:
        UsageError: unreadable file, not a mapping, or unknown keys
    """
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"Cannot read config file {path}: {exc.strerror or exc}")
    except yaml.YAMLError as exc:
        raise UsageError(f"Config file {path} is not valid YAML/JSON: {exc}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise UsageError(f"Config file {path} must contain a mapping of settings")
    values = {str(key).upper(): value for key, value in data.items()}
    unknown = sorted(set(values) - set(Settings.model_fields))
    if unknown:
        raise UsageError(f"Unknown settings in {path}: {', '.join(unknown)}")
    return values


def effective_settings(config_file: Optional[Path]) -> Settings:
    """Environment settings, overridden by the --config file when given."""
    if config_file is None:
        return settings
    try:
        return Settings(**load_config_file(config_file))
    except ValidationError as exc:
        raise UsageError(f"Invalid setting in {config_file}: {exc.errors()[0]['loc'][0]}: {exc.errors()[0]['msg']}")


def parse_floats(text: str, option: str) -> List[float]:
    try:
        return [float(item) for item in text.replace(" ", "").split(",") if item]
    except ValueError:
        raise UsageError(f"{option} expects comma-separated numbers, got '{text}'")


def build_run_config(command: Command, flags: Dict[str, Any]) -> RunConfig:
    """
    RunConfig from command-line flags (None = not given).

    Raises:
        UsageError: invalid or inconsistent values (exit 2)
        SchemeFileError: --input or --aux does not name a readable file (exit 3)
    """
    base = effective_settings(flags.get("config_file"))

    def pick(key: str, fallback):
        value = flags.get(key)
        return fallback if value is None else value

    for key in ("input", "aux"):
        path = flags.get(key)
        if path is not None and not Path(path).is_file():
            raise SchemeFileError(f"Scheme file {path} does not exist or is not a file")

    try:
        weights = [WeightVector(weights=parse_floats(text, "--weights")) for text in flags.get("weights") or []]
        s_values = parse_floats(flags["s_values"], "--s-values") if flags.get("s_values") else None
        config = RunConfig(
            command=command,
            input=flags.get("input"),
            aux=flags.get("aux"),
            out=flags.get("out"),
            config_file=flags.get("config_file"),
            verbose=bool(flags.get("verbose")),
            log_level=base.LOG_LEVEL,
            radial_order=flags.get("radial_order"),
            angular_order=flags.get("angular_order"),
            quadrature=QuadratureGrid(radial_order=base.RADIAL_ORDER, angular_order=base.ANGULAR_ORDER),
            solver=SolverConfig(
                residual_tol=pick("residual_tol", base.RESIDUAL_TOL),
                max_newton_iters=pick("max_newton_iters", base.MAX_NEWTON_ITERS),
                step_fd=pick("step_fd", base.STEP_FD),
                shrink=base.LINE_SEARCH_SHRINK,
                max_backtracks=base.MAX_BACKTRACKS,
                tikhonov=pick("tikhonov", base.TIKHONOV),
                eig_floor=pick("eig_floor", base.EIG_FLOOR),
            ),
            schedule=ContinuitySchedule(
                t_start=flags.get("t_start"),
                gamma=pick("gamma", base.GAMMA),
                t_end=pick("t_end", 0.0),
                max_halvings=pick("max_halvings", base.MAX_HALVINGS),
                t_snap=pick("t_snap", base.T_SNAP),
            ),
            convention=pick("convention", base.LAMBDA_CONVENTION),
            allow_aux_outside=pick("allow_aux_outside", base.ALLOW_AUX_OUTSIDE),
            threads=pick("threads", base.THREADS),
            rank_tol=base.RANK_TOL,
            seed=pick("seed", 0),
            t=pick("t", 0.0),
            samples=pick("samples", 32),
            weights=weights,
            s_values=s_values,
            n=pick("n", 2),
            matrices=pick("matrices", True),
        )
    except ValidationError as exc:
        error = exc.errors()[0]
        location = ".".join(str(part) for part in error["loc"]) or command.value
        raise UsageError(f"Invalid value for {location}: {error['msg']}")
    logger.debug(f"Run configuration: {config.model_dump(exclude={'weights'})}")
    return config


# ===== COMMANDS =====

def _load(config: RunConfig) -> Tuple[SchemeFile, Any, Optional[PointScheme], QuadratureGrid]:
    scheme_file = read_scheme_file(config.input)
    S = scheme_file.to_scheme()
    D = scheme_file.aux_scheme()
    if config.aux is not None:
        aux_file = read_scheme_file(config.aux)
        if aux_file.type != "points":
            raise SchemeFileError(f"Auxiliary file {config.aux} must describe a point scheme")
        D = aux_file.to_scheme()
    if D is not None and D.n != S.n:
        raise UsageError(f"Auxiliary points live in P^{D.n}, the scheme in P^{S.n}")
    fallback = None if scheme_file.quadrature is None else scheme_file.quadrature.grid()
    grid = config.grid(fallback)
    logger.info(f"Loaded {S.type} scheme in P^{S.n} from {config.input}")
    return scheme_file, S, D, grid


def _reports(config: RunConfig, grid: QuadratureGrid) -> ReportService:
    return ReportService(
        grid,
        parameters=config.parameters(),
        n_jobs=config.n_jobs,
        rel_tol=config.rank_tol,
        convention=config.convention.value,
        residual_tol=config.solver.residual_tol,
    )


def _moment(config: RunConfig) -> int:
    _, S, D, grid = _load(config)
    if config.t > 0 and D is None:
        raise UsageError("--t > 0 needs auxiliary points (--aux or an 'aux' entry in the scheme file)")
    write_report(config.out, _reports(config, grid).moment(S, D=D if config.t > 0 else None, t=config.t))
    return 0


def _balance(config: RunConfig) -> int:
    _, S, _, grid = _load(config)
    result = newton_solve_at_t(None, S, None, 0.0, config=config.solver, grid=grid, n_jobs=config.n_jobs)
    logger.info(f"Newton at t=0: {result.status.value} after {result.iterations} iterations")
    write_report(config.out, _reports(config, grid).balance(result))
    return 0 if result.converged else 1


def _continuity(config: RunConfig) -> int:
    _, S, D, grid = _load(config)
    if D is None:
        raise UsageError("continuity needs auxiliary points (--aux or an 'aux' entry in the scheme file)")
    try:
        trace = continuity_run(
            S,
            D,
            config=config.solver,
            schedule=config.schedule,
            grid=grid,
            convention=config.convention.value,
            allow_aux_outside=config.allow_aux_outside,
            n_jobs=config.n_jobs,
            rel_tol=config.rank_tol,
        )
    except BalancedEmbedError as exc:
        if isinstance(exc.partial, ContinuityTrace):
            _write_trace(config, grid, exc.partial)
        raise
    _write_trace(config, grid, trace)
    return 0 if trace.completed else 1


def _write_trace(config: RunConfig, grid: QuadratureGrid, trace: ContinuityTrace) -> None:
    write_text(config.out, trace_csv(trace))
    if config.out is not None:
        write_report(config.out.with_suffix(".json"), _reports(config, grid).trace(trace, config.matrices))


def _stability(config: RunConfig) -> int:
    _, S, _, grid = _load(config)
    if not isinstance(S, PointScheme):
        raise UsageError("stability is decided for point schemes; use chow-weight for curves")
    write_report(config.out, _reports(config, grid).stability(S, samples=config.samples, seed=config.seed))
    return 0


def _chow_weight(config: RunConfig) -> int:
    _, S, _, grid = _load(config)
    for weights in config.weights:
        if weights.size != S.n + 1:
            raise UsageError(f"--weights needs {S.n + 1} entries, got {weights.size}")
    write_report(config.out, _reports(config, grid).chow_weight(S, config.weights, config.s_values))
    return 0


def example_schemes(n: int, seed: int = 0) -> Dict[str, SchemeFile]:
    """
    Reference inputs in P^n: the roots-of-unity configuration, the balanced
    rational normal curve of degree n with n+2 sampled points on it, and two
    unstable configurations (n+1 points on a hyperplane, a heavy point).
    """
    E = roots_of_unity_config(n)
    curve = rational_normal_curve(n)
    sampled = find_general_position_subset(curve_sampler(curve), n, seed=seed)
    basis = np.eye(n + 1)
    hyperplane = PointScheme(points=[basis[i] for i in range(n)] + [basis[:n].sum(axis=0), basis[n]])
    heavy = PointScheme(points=E.points, multiplicities=[n + 2] + [1] * (n + 1))
    return {
        f"roots_of_unity_n{n}.json": scheme_file_for(E),
        f"rational_normal_curve_d{n}.json": scheme_file_for(curve, aux=sampled),
        f"hyperplane_unstable_n{n}.json": scheme_file_for(hyperplane),
        f"heavy_point_n{n}.json": scheme_file_for(heavy),
    }


def _make_example(config: RunConfig) -> int:
    out = Path(config.out)
    if out.exists() and not out.is_dir():
        raise UsageError(f"--out {out} exists and is not a directory")
    out.mkdir(parents=True, exist_ok=True)
    for name, scheme_file in example_schemes(config.n, seed=config.seed).items():
        write_scheme_file(out / name, scheme_file)
    return 0


HANDLERS: Dict[Command, Callable[[RunConfig], int]] = {
    Command.MOMENT: _moment,
    Command.BALANCE: _balance,
    Command.CONTINUITY: _continuity,
    Command.STABILITY: _stability,
    Command.CHOW_WEIGHT: _chow_weight,
    Command.MAKE_EXAMPLE: _make_example,
}


def run(config: RunConfig) -> int:
    """
    Execute one command.

    Returns:
        0 on success, 1 on solver breakdown or non-convergence (outputs are
        still written), the error's exit code for domain and input errors
    """
    try:
        return HANDLERS[config.command](config)
    except BalancedEmbedError as exc:
        if config.verbose:
            logger.exception(f"{config.command.value} failed")
        logger.error(exc.detail)
        return exc.exit_code

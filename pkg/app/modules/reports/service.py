"""
Report builders and scheme-file I/O.

Builders turn the results of the numerical modules into report models;
`dump_json` renders them with a fixed key order, so two runs with the same
inputs differ only in `generated_at`.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import ValidationError

from app.common.exceptions import BalancedEmbedError, SchemeFileError
from app.modules.integration.schemas import CurveScheme, PointScheme, QuadratureGrid
from app.modules.integration.service import transform_scheme
from app.modules.moment_map.service import moment_matrix, residual_t
from app.modules.reports.schemas import (
    BalanceReport,
    ChowWeightReport,
    ChowWeightRow,
    MomentReport,
    QuadratureSettings,
    SchemeFile,
    StabilityReport,
    TraceReport,
    TraceRow,
    VerdictPayload,
)
from app.modules.reports.utils import complex_array, complex_pair, dump_json, render_csv, write_text
from app.modules.solver.schemas import ContinuityTrace, NewtonResult
from app.modules.solver.service import gauge_normalize
from app.modules.stability.curves import chow_weight_curve_estimate
from app.modules.stability.schemas import StabilityVerdict, WeightVector
from app.modules.stability.service import chow_weight_points, limit_is_fixed, stability_summary

logger = logging.getLogger(__name__)

AnyScheme = Union[PointScheme, CurveScheme]

# decreasing subgroup parameters for curve weight estimates
DEFAULT_S_VALUES = (0.04, 0.02, 0.01, 0.005)

TRACE_CSV_HEADERS = {
    "t": "t",
    "residual": "residual",
    "iterations": "iters",
    "min_eigenvalue": "min_eig",
    "cond_g": "cond_g",
    "status": "status",
}


# ===== SCHEME FILES =====

def read_scheme_file(path: Union[str, Path]) -> SchemeFile:
    """
    Read and validate a scheme description file.

    Raises:
        SchemeFileError: unreadable file, malformed JSON, or invalid scheme data
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise SchemeFileError(f"Cannot read scheme file {path}: {exc.strerror or exc}")
    except json.JSONDecodeError as exc:
        raise SchemeFileError(f"Scheme file {path} is not valid JSON: {exc.msg} (line {exc.lineno})")
    try:
        scheme_file = SchemeFile.model_validate(data)
        scheme_file.to_scheme()
        scheme_file.aux_scheme()
    except ValidationError as exc:
        raise SchemeFileError(f"Scheme file {path} is invalid: {exc.errors()[0]['msg']}")
    except ValueError as exc:
        raise SchemeFileError(f"Scheme file {path} is invalid: {exc}")
    except BalancedEmbedError as exc:
        raise SchemeFileError(f"Scheme file {path} is invalid: {exc.detail}")
    logger.debug(f"Read {scheme_file.type} scheme in P^{scheme_file.n} from {path}")
    return scheme_file


def scheme_file_for(
    S: AnyScheme,
    aux: Optional[PointScheme] = None,
    quadrature: Optional[QuadratureGrid] = None,
) -> SchemeFile:
    """Scheme description of S (and its auxiliary points) with [re, im] pairs."""
    quadrature_settings = None
    if quadrature is not None:
        quadrature_settings = QuadratureSettings(radial_order=quadrature.radial_order, angular_order=quadrature.angular_order)
    aux_file = None if aux is None else scheme_file_for(aux)
    if isinstance(S, PointScheme):
        return SchemeFile(
            n=S.n,
            type="points",
            points=[[complex_pair(c) for c in p.coords] for p in S.points],
            multiplicities=list(S.multiplicities),
            aux=aux_file,
            quadrature=quadrature_settings,
        )
    return SchemeFile(
        n=S.n,
        type="curve",
        degree=S.degree,
        components=complex_array(S.components),
        aux=aux_file,
        quadrature=quadrature_settings,
    )


def render_scheme_file(scheme_file: SchemeFile) -> str:
    return dump_json(scheme_file.model_dump(exclude_none=True))


def write_scheme_file(path: Union[str, Path], scheme_file: SchemeFile) -> Path:
    path = Path(path)
    write_text(path, render_scheme_file(scheme_file))
    logger.info(f"Wrote {scheme_file.type} scheme in P^{scheme_file.n} to {path}")
    return path


# ===== REPORTS =====

def verdict_payload(verdict: StabilityVerdict) -> VerdictPayload:
    """{status, witness: subset indices | weights, margin}"""
    witness: Optional[Dict[str, Any]] = None
    if verdict.subspace is not None:
        witness = {
            "indices": list(verdict.subspace.indices),
            "dimension": verdict.subspace.dimension,
            "count": verdict.subspace.count,
            "bound": verdict.subspace.bound,
        }
    elif verdict.weight_witness is not None:
        witness = {
            "weights": list(verdict.weight_witness.weights.weights),
            "weight": verdict.weight_witness.weight,
            "fixed": verdict.weight_witness.fixed,
            "frame": complex_array(verdict.weight_witness.frame),
        }
    margin = verdict.margin if np.isfinite(verdict.margin) else None
    return VerdictPayload(status=verdict.status.value, margin=margin, candidates=verdict.candidates, witness=witness)


def moment_report(
    S: AnyScheme,
    grid: QuadratureGrid,
    D: Optional[PointScheme] = None,
    t: float = 0.0,
    g: Optional[np.ndarray] = None,
    tol: float = 1e-9,
    convention: Optional[str] = None,
    parameters: Optional[Dict[str, Any]] = None,
    n_jobs: Optional[int] = None,
) -> MomentReport:
    """Moment matrix of gS and the residual F_t(g)."""
    matrix = np.eye(S.n + 1, dtype=np.complex128) if g is None else np.asarray(g, dtype=np.complex128)
    moment = moment_matrix(transform_scheme(matrix, S), grid, n_jobs=n_jobs)
    residual = residual_t(matrix, S, D, t, grid, convention=convention, n_jobs=n_jobs)
    low, high = residual.eigenvalue_extremes()
    return MomentReport(
        scheme_type=S.type,
        n=S.n,
        t=t,
        volume=residual.volume,
        lambda_t=residual.lambda_t,
        frobenius=residual.frobenius,
        min_eigenvalue=low,
        max_eigenvalue=high,
        balanced=residual.frobenius < tol * residual.volume,
        moment=complex_array(moment.matrix.entries),
        residual=complex_array(residual.matrix.entries),
        parameters=parameters or {},
    )


def balance_report(result: NewtonResult, parameters: Optional[Dict[str, Any]] = None) -> BalanceReport:
    return BalanceReport(
        status=result.status.value,
        iterations=result.iterations,
        frobenius=result.residual.frobenius,
        tolerance=result.tolerance,
        history=list(result.history),
        min_eigenvalue=result.min_eigenvalue,
        g=complex_array(result.g),
        g_normalized=complex_array(gauge_normalize(result.g).matrix),
        parameters=parameters or {},
    )


def trace_rows(trace: ContinuityTrace, include_matrices: bool = False) -> List[TraceRow]:
    return [
        TraceRow(
            t=record.t,
            residual=record.residual,
            entry_residual=record.entry_residual,
            lambda_t=record.lambda_t,
            iterations=record.iterations,
            min_eigenvalue=record.min_eigenvalue,
            cond_g=record.cond_g,
            status=record.status.value,
            g=complex_array(record.g) if include_matrices else None,
        )
        for record in trace.records
    ]


def trace_report(
    trace: ContinuityTrace,
    include_matrices: bool = True,
    parameters: Optional[Dict[str, Any]] = None,
) -> TraceReport:
    return TraceReport(
        status=trace.status.value,
        tolerance=trace.tolerance,
        t_start=trace.t_start,
        t_end=trace.t_end,
        records=trace_rows(trace, include_matrices),
        diagnosis=None if trace.diagnosis is None else verdict_payload(trace.diagnosis),
        scaled_entry_residual=trace.scaled_entry_residual,
        failure=trace.failure,
        parameters=parameters or {},
    )


def trace_csv(trace: ContinuityTrace) -> str:
    """CSV with columns t, residual, iters, min_eig, cond_g, status."""
    rows = [row.model_dump(exclude={"g"}) for row in trace_rows(trace)]
    return render_csv(rows, TRACE_CSV_HEADERS)


def stability_report(
    D: PointScheme,
    samples: int = 32,
    seed: int = 0,
    parameters: Optional[Dict[str, Any]] = None,
    rel_tol: Optional[float] = None,
    n_jobs: Optional[int] = None,
) -> StabilityReport:
    verdicts = stability_summary(D, samples=samples, seed=seed, rel_tol=rel_tol, n_jobs=n_jobs)
    return StabilityReport(
        n=D.n,
        mass=D.mass,
        counting=verdict_payload(verdicts["counting"]),
        chow=verdict_payload(verdicts["chow"]),
        parameters=parameters or {},
    )


def chow_weight_report(
    S: AnyScheme,
    weight_list: Sequence[WeightVector],
    s_values: Optional[Sequence[float]] = None,
    parameters: Optional[Dict[str, Any]] = None,
    rel_tol: Optional[float] = None,
    n_jobs: Optional[int] = None,
) -> ChowWeightReport:
    """
    Chow weight of S for each weight vector: exact for point schemes,
    extrapolated from W(s) for curves.
    """
    rows: List[ChowWeightRow] = []
    for weights in weight_list:
        if isinstance(S, PointScheme):
            rows.append(
                ChowWeightRow(
                    weights=list(weights.weights),
                    weight=chow_weight_points(S, weights, rel_tol=rel_tol),
                    fixed=limit_is_fixed(S, weights, rel_tol=rel_tol),
                )
            )
            continue
        estimate = chow_weight_curve_estimate(S, weights, s_values or DEFAULT_S_VALUES, n_jobs=n_jobs)
        rows.append(
            ChowWeightRow(
                weights=list(weights.weights),
                weight=estimate.estimate if np.isfinite(estimate.estimate) else None,
                converged=estimate.converged,
                invariant=estimate.invariant,
                s_values=list(estimate.s_values),
                values=list(estimate.values),
                flags=list(estimate.flags),
            )
        )
    return ChowWeightReport(scheme_type=S.type, rows=rows, parameters=parameters or {})


def render_report(report) -> str:
    return dump_json(report)


def write_report(path: Optional[Union[str, Path]], report) -> None:
    write_text(None if path is None else Path(path), render_report(report))
    if path is not None:
        logger.info(f"Wrote {report.command.value} report to {path}")


# ===== SERVICE =====

class ReportService:
    """
    Report builders bound to one run context.

    The quadrature grid, worker count, rank threshold, lambda_t convention
    and echoed parameters are fixed at construction and reach every report.
    """

    def __init__(
        self,
        grid: QuadratureGrid,
        parameters: Optional[Dict[str, Any]] = None,
        n_jobs: Optional[int] = None,
        rel_tol: Optional[float] = None,
        convention: Optional[str] = None,
        residual_tol: float = 1e-9,
    ):
        self.grid = grid
        self.parameters = parameters or {}
        self.n_jobs = n_jobs
        self.rel_tol = rel_tol
        self.convention = convention
        self.residual_tol = residual_tol

    def moment(self, S: AnyScheme, D: Optional[PointScheme] = None, t: float = 0.0) -> MomentReport:
        return moment_report(
            S,
            self.grid,
            D=D,
            t=t,
            tol=self.residual_tol,
            convention=self.convention,
            parameters=self.parameters,
            n_jobs=self.n_jobs,
        )

    def balance(self, result: NewtonResult) -> BalanceReport:
        return balance_report(result, parameters=self.parameters)

    def trace(self, trace: ContinuityTrace, include_matrices: bool = True) -> TraceReport:
        return trace_report(trace, include_matrices, self.parameters)

    def stability(self, D: PointScheme, samples: int = 32, seed: int = 0) -> StabilityReport:
        return stability_report(
            D, samples=samples, seed=seed, parameters=self.parameters, rel_tol=self.rel_tol, n_jobs=self.n_jobs
        )

    def chow_weight(
        self,
        S: AnyScheme,
        weight_list: Sequence[WeightVector],
        s_values: Optional[Sequence[float]] = None,
    ) -> ChowWeightReport:
        return chow_weight_report(
            S, weight_list, s_values, parameters=self.parameters, rel_tol=self.rel_tol, n_jobs=self.n_jobs
        )

"""
Models of the reports module: scheme description files and the JSON reports.
"""

from datetime import datetime, timezone
from enum import Enum
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.modules.integration.schemas import CurveScheme, PointScheme, QuadratureGrid

# nested [re, im] pairs
ComplexMatrix = List[List[List[float]]]


# ===== ENUMS =====

class ReportKind(str, Enum):
    MOMENT = "moment"
    BALANCE = "balance"
    CONTINUITY = "continuity"
    STABILITY = "stability"
    CHOW_WEIGHT = "chow-weight"


# ===== SCHEME FILES =====

class QuadratureSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    radial_order: int = Field(..., ge=2)
    angular_order: int = Field(..., ge=4)

    def grid(self) -> QuadratureGrid:
        return QuadratureGrid(radial_order=self.radial_order, angular_order=self.angular_order)


class SchemeFile(BaseModel):
    """
    Scheme description file.

    Points and curve coefficients are lists of [re, im] pairs (plain real
    numbers are accepted on input). `aux` optionally carries the auxiliary
    point scheme used by the moment and continuity commands.
    """
    model_config = ConfigDict(extra="forbid")

    n: int = Field(..., ge=1)
    type: Literal["points", "curve"]
    points: Optional[List[List[Any]]] = None
    multiplicities: Optional[List[int]] = None
    degree: Optional[int] = Field(None, ge=1)
    components: Optional[List[List[Any]]] = None
    aux: Optional["SchemeFile"] = None
    quadrature: Optional[QuadratureSettings] = None

    @model_validator(mode="after")
    def validate_fields(self):
        if self.type == "points":
            if not self.points:
                raise ValueError("a point scheme file needs 'points'")
            if self.degree is not None or self.components is not None:
                raise ValueError("'degree' and 'components' belong to curve files")
        else:
            if self.degree is None or self.components is None:
                raise ValueError("a curve file needs 'degree' and 'components'")
            if self.points is not None or self.multiplicities is not None:
                raise ValueError("'points' and 'multiplicities' belong to point files")
        if self.aux is not None and self.aux.type != "points":
            raise ValueError("'aux' must be a point scheme")
        return self

    def to_scheme(self):
        """Build the scheme; raises on invalid geometry or a dimension mismatch."""
        if self.type == "points":
            scheme = PointScheme(points=self.points, multiplicities=self.multiplicities)
        else:
            scheme = CurveScheme(degree=self.degree, components=self.components)
        if scheme.n != self.n:
            raise ValueError(f"declared n = {self.n} but the data lives in P^{scheme.n}")
        return scheme

    def aux_scheme(self) -> Optional[PointScheme]:
        return None if self.aux is None else self.aux.to_scheme()


# ===== REPORTS =====

class ReportBase(BaseModel):
    """Fields shared by every report; `generated_at` is the only non-deterministic one."""
    command: ReportKind
    generated_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
    parameters: Dict[str, Any] = Field(default_factory=dict)


class MomentReport(ReportBase):
    command: ReportKind = ReportKind.MOMENT
    scheme_type: str
    n: int
    t: float
    volume: float
    lambda_t: float
    frobenius: float
    min_eigenvalue: float
    max_eigenvalue: float
    balanced: bool
    moment: ComplexMatrix
    residual: ComplexMatrix


class BalanceReport(ReportBase):
    command: ReportKind = ReportKind.BALANCE
    status: str
    iterations: int
    frobenius: float
    tolerance: float
    history: List[float]
    min_eigenvalue: Optional[float] = None
    g: ComplexMatrix
    g_normalized: ComplexMatrix


class TraceRow(BaseModel):
    t: float
    residual: float
    entry_residual: float
    lambda_t: float
    iterations: int
    min_eigenvalue: Optional[float] = None
    cond_g: float
    status: str
    g: Optional[ComplexMatrix] = None


class VerdictPayload(BaseModel):
    status: str
    margin: Optional[float] = None
    candidates: int = 0
    witness: Optional[Dict[str, Any]] = None


class TraceReport(ReportBase):
    command: ReportKind = ReportKind.CONTINUITY
    status: str
    tolerance: float
    t_start: float
    t_end: float
    records: List[TraceRow]
    diagnosis: Optional[VerdictPayload] = None
    scaled_entry_residual: Optional[float] = None
    failure: Optional[str] = None


class StabilityReport(ReportBase):
    command: ReportKind = ReportKind.STABILITY
    n: int
    mass: int
    counting: VerdictPayload
    chow: VerdictPayload


class ChowWeightRow(BaseModel):
    weights: List[float]
    weight: Optional[float] = None
    fixed: Optional[bool] = None
    converged: Optional[bool] = None
    invariant: Optional[bool] = None
    s_values: Optional[List[float]] = None
    values: Optional[List[float]] = None
    flags: List[str] = Field(default_factory=list)


class ChowWeightReport(ReportBase):
    command: ReportKind = ReportKind.CHOW_WEIGHT
    scheme_type: str
    rows: List[ChowWeightRow]

"""
Pydantic models for Pseudospherical Lab
"""

import math
import sys
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from ..errors import ParameterError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class CheckKind(str, Enum):
    """How a check decides pass/fail"""
    EXACT = "exact"
    NUMERIC = "numeric"


class Family(str, Enum):
    """Conservation law family"""
    NEG = "neg"
    POS = "pos"


class Expansion(str, Enum):
    """Series expansion of the pseudo-potential in powers of eta"""
    NEGATIVE = "negative"
    POSITIVE = "positive"


class Provenance(str, Enum):
    """Origin of second fundamental form coefficients"""
    CLOSED_MU0 = "closed_mu0"
    ODE_MUNZ = "ode_munz"


class CheckResult(BaseModel):
    """One verified identity or numeric bound"""
    name: str
    anchor: str = Field(..., description="Stable id of the identity being checked")
    kind: CheckKind = CheckKind.EXACT
    passed: bool
    residual: float = Field(0.0, ge=0.0, description="Residual magnitude")
    tolerance: float = Field(0.0, ge=0.0)
    measured: Optional[float] = None
    rendered: Optional[str] = None
    details: Dict[str, Any] = Field(default_factory=dict)


class VerificationReport(BaseModel):
    """Collection of checks for one suite"""
    suite: str
    checks: List[CheckResult] = Field(default_factory=list)
    passed: bool = True

    @model_validator(mode="after")
    def _aggregate(self):
        self.passed = all(check.passed for check in self.checks)
        return self

    @classmethod
    def merge(cls, suite: str, reports: List["VerificationReport"]) -> "VerificationReport":
        checks: List[CheckResult] = []
        for report in reports:
            checks.extend(report.checks)
        return cls(suite=suite, checks=checks)

    def failed(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]


class SineMode(BaseModel):
    """One sine component A sin(mode * 2 pi x / L + phase)"""
    mode: int = Field(..., ge=0)
    amplitude: float
    phase: float = 0.0


class MonitorSelection(BaseModel):
    """Conservation laws to monitor during a run"""
    family: Family
    k: List[int] = Field(..., min_length=1)
    window: Tuple[float, float] = (0.0, 1.0)

    @model_validator(mode="after")
    def _check_range(self):
        lowest = 2 if self.family == Family.NEG else 1
        bad = [k for k in self.k if k < lowest]
        if bad:
            raise ValueError(f"{self.family.value} family needs k >= {lowest}, got {bad}")
        if self.window[1] <= self.window[0]:
            raise ValueError("monitor window must have positive length")
        return self


class RunConfig(BaseModel):
    """Run configuration shared by the solve, monitor, immerse and surface commands"""

    # Grid and time stepping
    length: float = Field(2 * math.pi, gt=0.0)
    n: int = 256
    dt: Optional[float] = Field(None, gt=0.0)
    t_end: float = Field(1.0, ge=0.0)
    snapshots: int = Field(5, ge=1)
    dealias: bool = True
    forcing: bool = False
    initial: List[SineMode] = Field(default_factory=lambda: [SineMode(mode=1, amplitude=0.05)])

    # Geometry
    mu: float = 0.0
    eps: Literal[1, -1] = 1

    # Monitoring
    monitor: List[MonitorSelection] = Field(default_factory=list)
    monitor_tol: float = Field(1e-6, gt=0.0)

    # Immersion
    C_strip: float = 5.0
    beta: float = 1.0
    a_sign: Literal[1, -1] = 1
    x0: float = 0.0
    b0: float = 1.5
    span: float = 0.5
    immersion_nodes: int = Field(201, ge=2)

    # Surface rectangle
    surface_x0: float = 0.0
    surface_x1: float = 0.5
    surface_t1: float = 0.25
    surface_nx: int = Field(65, ge=1)
    surface_nt: int = Field(65, ge=1)
    surface_max_dt: Optional[float] = Field(None, gt=0.0)
    curvature_bounds: Tuple[float, float] = (-1.05, -0.95)
    metric_tol: float = Field(0.01, gt=0.0)

    # Tolerance overrides
    div_eps: Optional[float] = Field(None, gt=0.0)
    delta_eps: Optional[float] = Field(None, gt=0.0)
    den_eps: Optional[float] = Field(None, gt=0.0)
    ode_rtol: Optional[float] = Field(None, gt=0.0)
    ode_atol: Optional[float] = Field(None, gt=0.0)
    ortho_interval: Optional[int] = Field(None, ge=1)
    genericity_eps: Optional[float] = Field(None, ge=0.0)

    @field_validator("n")
    @classmethod
    def _power_of_two(cls, value: int) -> int:
        if value < 16 or value & (value - 1):
            raise ValueError(f"n must be a power of two >= 16, got {value}")
        return value

    @classmethod
    def from_toml(cls, path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> "RunConfig":
        """
        Load a TOML file, then apply command-line overrides

        Args:
            path: TOML file with flat keys mirroring RunConfig (optional)
            overrides: Values given on the command line; None entries are ignored

        Returns:
            Validated RunConfig
        """
        data: Dict[str, Any] = {}
        if path is not None:
            try:
                with open(path, "rb") as handle:
                    data = tomllib.load(handle)
            except OSError as e:
                raise ParameterError(f"Cannot read config {path}: {e}") from e
            except tomllib.TOMLDecodeError as e:
                raise ParameterError(f"Invalid TOML in {path}: {e}") from e

        for key, value in (overrides or {}).items():
            if value is not None:
                data[key] = value

        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ParameterError(f"Invalid configuration: {e}") from e


class ResidualSummary(BaseModel):
    """Conservation residual measured on one snapshot"""
    family: Family
    k: int
    window: Tuple[float, float]
    sup_norm: float
    drift: float
    points: int


class SnapshotRecord(BaseModel):
    """Metadata of one written snapshot"""
    index: int
    t: float
    path: str
    sup_u: float
    sup_m: float
    flow_identity: float
    residuals: List[ResidualSummary] = Field(default_factory=list)


class RunMetadata(BaseModel):
    """Metadata written next to solver snapshots"""
    length: float
    n: int
    h: float
    dt: float
    t_end: float
    steps: int
    dealias: bool
    forcing: bool
    snapshots: List[SnapshotRecord] = Field(default_factory=list)
    report: Optional[VerificationReport] = None


class SurfaceDiagnostics(BaseModel):
    """Summary of a reconstructed surface mesh"""
    status: str
    vertices: int
    faces: int
    masked_vertices: int
    components: int
    metric_mismatch: Optional[float] = None
    curvature_min: Optional[float] = None
    curvature_max: Optional[float] = None
    curvature_mean: Optional[float] = None
    curvature_points: int = 0
    ortho_drift: float = 0.0
    report: Optional[VerificationReport] = None

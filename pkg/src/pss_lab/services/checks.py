"""
Check builders shared by the symbolic and numeric services
"""

import math
from typing import Any, Dict, Optional

from ..models.schemas import CheckKind, CheckResult
from .jetring import DiffExpr, render

# Rendered residuals longer than this are truncated in reports.
MAX_RENDERED = 2000


def coefficient_magnitude(e: DiffExpr) -> float:
    """Largest absolute numerator coefficient (0 for the zero expression)"""
    if e.is_zero:
        return 0.0
    return float(max(abs(coeff) for coeff in e.num.itercoeffs()))


def exact_check(name: str, anchor: str, residual: DiffExpr,
                details: Optional[Dict[str, Any]] = None) -> CheckResult:
    """An identity that must hold as a canonical-form zero"""
    passed = residual.is_zero
    rendered = None
    if not passed:
        rendered = render(residual)
        if len(rendered) > MAX_RENDERED:
            rendered = rendered[:MAX_RENDERED] + " ..."
    return CheckResult(
        name=name,
        anchor=anchor,
        kind=CheckKind.EXACT,
        passed=passed,
        residual=coefficient_magnitude(residual),
        tolerance=0.0,
        measured=coefficient_magnitude(residual),
        rendered=rendered,
        details=details or {},
    )


def numeric_check(name: str, anchor: str, measured: float, tolerance: float,
                  details: Optional[Dict[str, Any]] = None) -> CheckResult:
    """A numeric bound measured <= tolerance"""
    measured = float(measured)
    finite = math.isfinite(measured)
    return CheckResult(
        name=name,
        anchor=anchor,
        kind=CheckKind.NUMERIC,
        passed=bool(finite and measured <= tolerance),
        residual=abs(measured) if finite else math.inf,
        tolerance=tolerance,
        measured=measured,
        details=details or {},
    )


def predicate_check(name: str, anchor: str, passed: bool, measured: float = 0.0,
                    details: Optional[Dict[str, Any]] = None) -> CheckResult:
    """A yes/no property such as a sign being constant"""
    return CheckResult(
        name=name,
        anchor=anchor,
        kind=CheckKind.NUMERIC,
        passed=bool(passed),
        residual=abs(float(measured)),
        measured=float(measured),
        details=details or {},
    )

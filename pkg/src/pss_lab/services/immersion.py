"""
Second fundamental form data for Pseudospherical Lab

Closed-form coefficients for mu = 0, the coefficient ODE for mu != 0,
Codazzi residuals, curvature diagnostics and the second fundamental form
in the (dx, dt) basis.
"""

import logging
import math
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp

from ..config import settings
from ..errors import GuardStop, ParameterError
from ..models.fields import ImmersionParams, JetFields, SffCoeffs
from ..models.schemas import Provenance, VerificationReport
from .checks import numeric_check, predicate_check
from .evalbridge import CompiledExpr, compile_expr, eval_field
from .jetring import dt, dx
from .pssforms import build_forms

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# mu = 0: closed form on a strip
# ---------------------------------------------------------------------------

def _check_strip_params(C_strip: float, beta: float) -> None:
    if C_strip <= 0 or C_strip ** 2 <= 4 * beta ** 2 or beta == 0:
        raise ParameterError(
            f"Strip needs C > 0, C^2 > 4 beta^2 and beta != 0 (C={C_strip}, beta={beta})"
        )


def mu0_strip(C_strip: float, beta: float) -> Tuple[float, float]:
    """Endpoints of the strip where Z = C e^2x - beta^2 e^4x - 1 > 0"""
    _check_strip_params(C_strip, beta)
    root = math.sqrt(C_strip ** 2 - 4 * beta ** 2)
    lower = 0.5 * math.log((C_strip - root) / (2 * beta ** 2))
    upper = 0.5 * math.log((C_strip + root) / (2 * beta ** 2))
    return lower, upper


def strip_z(C_strip: float, beta: float, xs: np.ndarray) -> np.ndarray:
    e2 = np.exp(2 * np.asarray(xs, dtype=float))
    return C_strip * e2 - beta ** 2 * e2 ** 2 - 1


def mu0_coeffs(C_strip: float, beta: float, a_sign: int, xs: np.ndarray) -> SffCoeffs:
    """
    a = +-sqrt(Z), b = -beta e^2x, c = a - a'

    a' = Z'/(2a) and a'' are evaluated analytically.
    """
    params = ImmersionParams(mu=0.0, beta=beta, C_strip=C_strip, a_sign=a_sign)
    xs = np.asarray(xs, dtype=float)
    z = strip_z(C_strip, beta, xs)
    if np.any(z <= 0):
        lower, upper = mu0_strip(C_strip, beta)
        bad = xs[z <= 0]
        raise ParameterError(f"x = {bad[0]:.6g} lies outside the strip ({lower:.6g}, {upper:.6g})")

    e2 = np.exp(2 * xs)
    z1 = 2 * C_strip * e2 - 4 * beta ** 2 * e2 ** 2
    z2 = 4 * C_strip * e2 - 16 * beta ** 2 * e2 ** 2
    a = a_sign * np.sqrt(z)
    a_x = z1 / (2 * a)
    a_xx = z2 / (2 * a) - z1 ** 2 / (4 * a ** 3)
    b = -beta * e2
    return SffCoeffs(
        x=xs,
        a=a,
        b=b,
        c=a - a_x,
        a_x=a_x,
        b_x=2 * b,
        c_x=a_x - a_xx,
        provenance=Provenance.CLOSED_MU0,
        params=params,
    )


# ---------------------------------------------------------------------------
# mu != 0: coefficient ODE
# ---------------------------------------------------------------------------

def munz_phi(params: ImmersionParams, x, b):
    """(mu - 1/mu) b - (beta/mu) e^2x"""
    mu = params.mu
    return (mu - 1 / mu) * b - (params.beta / mu) * np.exp(2 * x)


def munz_delta(params: ImmersionParams, x, b):
    """phi^2 - 4 (1 - b^2)"""
    phi = munz_phi(params, x, b)
    return phi ** 2 - 4 * (1 - b ** 2)


def _munz_parts(params: ImmersionParams, x, b):
    mu, beta, sigma = params.mu, params.beta, params.a_sign
    phi = munz_phi(params, x, b)
    root = np.sqrt(np.maximum(phi ** 2 - 4 * (1 - b ** 2), 0.0))
    e2 = np.exp(2 * x)
    numerator = 2 * (mu ** 2 + 1) * b * root + 2 * sigma * beta * phi * e2
    denominator = sigma * (mu ** 2 - 1) * phi + 4 * sigma * mu * b + (mu ** 2 + 1) * root
    return numerator, denominator


def munz_denominator(params: ImmersionParams, x, b):
    return _munz_parts(params, x, b)[1]


def munz_rhs(params: ImmersionParams, x, b):
    """b' = g(x, b)"""
    numerator, denominator = _munz_parts(params, x, b)
    return numerator / denominator


def coefficient_ode_residual(params: ImmersionParams, x, b, b_x):
    """Polynomial form of the coefficient ODE: denominator * b' - numerator"""
    numerator, denominator = _munz_parts(params, x, b)
    return denominator * b_x - numerator


def _assemble_munz(params: ImmersionParams, xs: np.ndarray, b: np.ndarray, **extra) -> SffCoeffs:
    mu, beta, sigma = params.mu, params.beta, params.a_sign
    b_x = munz_rhs(params, xs, b)
    phi = munz_phi(params, xs, b)
    delta = munz_delta(params, xs, b)
    root = np.sqrt(delta)
    phi_x = (mu - 1 / mu) * b_x - (2 * beta / mu) * np.exp(2 * xs)
    a = (-phi + sigma * root) / 2
    a_x = -phi_x / 2 + sigma * (phi * phi_x + 4 * b * b_x) / (2 * root)
    return SffCoeffs(
        x=xs,
        a=a,
        b=b,
        c=a + phi,
        a_x=a_x,
        b_x=b_x,
        c_x=a_x + phi_x,
        provenance=Provenance.ODE_MUNZ,
        params=params,
        phi_aux=phi,
        delta=delta,
        **extra,
    )


def munz_solve(params: ImmersionParams, x0: float, b0: float, span: float,
               rtol: Optional[float] = None, atol: Optional[float] = None,
               nodes: int = 201, delta_eps: Optional[float] = None,
               den_eps: Optional[float] = None) -> SffCoeffs:
    """
    Integrate b' = g(x, b) from x0 over span with guards

    Args:
        params: mu != 0, beta != 0 and the a-branch sign
        x0, b0: Initial condition
        span: Signed integration length
        rtol, atol: Integrator tolerances (settings when omitted)
        nodes: Output nodes on the accepted interval
        delta_eps, den_eps: Guard thresholds for Delta and the denominator

    Returns:
        SffCoeffs on the accepted interval; stop_reason says why it ended
    """
    if params.mu == 0:
        raise ParameterError("munz_solve needs mu != 0; use mu0_coeffs for mu = 0")
    if span == 0:
        raise ParameterError("span must be nonzero")
    if nodes < 2:
        raise ParameterError(f"nodes must be >= 2, got {nodes}")
    rtol = rtol or settings.ode_rtol
    atol = atol or settings.ode_atol
    delta_eps = settings.delta_eps if delta_eps is None else delta_eps
    den_eps = settings.den_eps if den_eps is None else den_eps

    delta0 = float(munz_delta(params, x0, b0))
    if delta0 <= delta_eps:
        raise ParameterError(f"Initial condition has Delta = {delta0:.3e} <= {delta_eps:.1e}")
    den0 = float(munz_denominator(params, x0, b0))
    if abs(den0) <= den_eps:
        raise ParameterError(f"Initial condition has |denominator| = {abs(den0):.3e} <= {den_eps:.1e}")

    def fun(x, y):
        return [munz_rhs(params, x, y[0])]

    def delta_event(x, y):
        return munz_delta(params, x, y[0]) - delta_eps
    delta_event.terminal = True

    def den_event(x, y):
        return abs(munz_denominator(params, x, y[0])) - den_eps
    den_event.terminal = True

    sol = solve_ivp(fun, (x0, x0 + span), [b0], method="DOP853", rtol=rtol, atol=atol,
                    dense_output=True, events=(delta_event, den_event))

    if sol.status == -1:
        stop_reason = "integration_failed"
    elif sol.status == 1:
        stop_reason = "delta_degenerate" if len(sol.t_events[0]) else "denominator_vanishing"
    else:
        stop_reason = "completed"
    x_end = float(sol.t[-1])
    if stop_reason != "completed":
        logger.warning("Coefficient ODE stopped at x=%.6g: %s", x_end, stop_reason)

    xs = np.linspace(x0, x_end, nodes)
    b = sol.sol(xs)[0]
    interpolant = sol.sol

    def b_of(points):
        return interpolant(np.asarray(points, dtype=float))[0]

    return _assemble_munz(params, xs, b, stop_reason=stop_reason, interpolant=b_of)


def sample(coeffs: SffCoeffs, xs: np.ndarray) -> SffCoeffs:
    """Coefficients and their x-derivatives on new nodes"""
    xs = np.asarray(xs, dtype=float)
    params = coeffs.params
    if coeffs.provenance == Provenance.CLOSED_MU0:
        return mu0_coeffs(params.C_strip, params.beta, params.a_sign, xs)
    lo, hi = float(np.min(coeffs.x)), float(np.max(coeffs.x))
    if xs.size and (xs.min() < lo - 1e-12 or xs.max() > hi + 1e-12):
        raise ParameterError(f"Nodes leave the solved interval [{lo:.6g}, {hi:.6g}]")
    if coeffs.interpolant is None:
        raise ParameterError("Coefficients carry no interpolant")
    return _assemble_munz(params, xs, coeffs.interpolant(xs),
                          stop_reason=coeffs.stop_reason, interpolant=coeffs.interpolant)


def solve_coefficients(params: ImmersionParams, xs: Optional[np.ndarray] = None, x0: float = 0.0,
                       b0: float = 1.5, span: float = 0.5, nodes: int = 201, **tolerances) -> SffCoeffs:
    """Closed form for mu = 0 (on xs, or the strip) and the ODE for mu != 0"""
    if params.mu == 0:
        if xs is None:
            lower, upper = mu0_strip(params.C_strip, params.beta)
            pad = 1e-3 * (upper - lower)
            xs = np.linspace(lower + pad, upper - pad, nodes)
        return mu0_coeffs(params.C_strip, params.beta, params.a_sign, xs)
    return munz_solve(params, x0, b0, span, nodes=nodes, **tolerances)


# ---------------------------------------------------------------------------
# Codazzi and curvature
# ---------------------------------------------------------------------------

def codazzi_fields(coeffs: SffCoeffs) -> Tuple[np.ndarray, np.ndarray]:
    """a_x + mu b_x - (a - c + 2 mu b) and b_x + mu c_x + (mu a - mu c - 2 b)"""
    mu = coeffs.params.mu
    a, b, c = coeffs.a, coeffs.b, coeffs.c
    r1 = coeffs.a_x + mu * coeffs.b_x - (a - c + 2 * mu * b)
    r2 = coeffs.b_x + mu * coeffs.c_x + (mu * a - mu * c - 2 * b)
    return r1, r2


@lru_cache(maxsize=None)
def _compiled_forms(eps: int, mu: float) -> Dict[str, CompiledExpr]:
    ps = build_forms(eps)
    bindings = {"mu": mu}
    compiled = {}
    for i in (1, 2, 3):
        compiled[f"f{i}1"] = compile_expr(ps.f(i, 1), bindings)
        compiled[f"f{i}2"] = compile_expr(ps.f(i, 2), bindings)
        compiled[f"Dt_f{i}1"] = compile_expr(dt(ps.f(i, 1)), bindings)
        compiled[f"Dx_f{i}2"] = compile_expr(dx(ps.f(i, 2)), bindings)
    return compiled


def form_fields(jets: JetFields, mu: float, eps: int = 1) -> Dict[str, np.ndarray]:
    """f_ij, D_t f_i1 and D_x f_i2 evaluated on jets"""
    return {name: eval_field(c, jets) for name, c in _compiled_forms(eps, float(mu)).items()}


def full_codazzi_fields(coeffs: SffCoeffs, jets: JetFields, eps: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """
    Codazzi residuals of omega13 = a w1 + b w2, omega23 = b w1 + c w2

    Coefficients are sampled at jets.x; a_t = b_t = c_t = 0.
    """
    local = sample(coeffs, jets.x)
    f = form_fields(jets, coeffs.params.mu, eps)
    a, b, c = local.a, local.b, local.c
    a_x, b_x, c_x = local.a_x, local.b_x, local.c_x

    A1 = a * f["f11"] + b * f["f21"]
    A2 = a * f["f12"] + b * f["f22"]
    B1 = b * f["f11"] + c * f["f21"]
    B2 = b * f["f12"] + c * f["f22"]
    dx_A2 = a_x * f["f12"] + a * f["Dx_f12"] + b_x * f["f22"] + b * f["Dx_f22"]
    dt_A1 = a * f["Dt_f11"] + b * f["Dt_f21"]
    dx_B2 = b_x * f["f12"] + b * f["Dx_f12"] + c_x * f["f22"] + c * f["Dx_f22"]
    dt_B1 = b * f["Dt_f11"] + c * f["Dt_f21"]

    r1 = dx_A2 - dt_A1 - (f["f31"] * B2 - f["f32"] * B1)
    r2 = dx_B2 - dt_B1 + (f["f31"] * A2 - f["f32"] * A1)
    return r1, r2


def _sup(values: np.ndarray) -> float:
    return float(np.max(np.abs(values))) if np.size(values) else 0.0


def codazzi_residuals(coeffs: SffCoeffs, jets: Optional[JetFields] = None, eps: int = 1,
                      tol: float = 1e-8, full_tol: float = 1e-6) -> VerificationReport:
    """First-order Codazzi relations, and the full ones when jets are given"""
    r1, r2 = codazzi_fields(coeffs)
    checks = [
        numeric_check("codazzi-first-order-1", "codazzi-first-order", _sup(r1), tol),
        numeric_check("codazzi-first-order-2", "codazzi-first-order", _sup(r2), tol),
    ]
    if jets is not None:
        full1, full2 = full_codazzi_fields(coeffs, jets, eps)
        checks.extend([
            numeric_check("codazzi-full-1", "codazzi-full", _sup(full1), full_tol, {"points": int(np.size(full1))}),
            numeric_check("codazzi-full-2", "codazzi-full", _sup(full2), full_tol, {"points": int(np.size(full2))}),
        ])
    return VerificationReport(suite="codazzi", checks=checks)


def curvature_diagnostics(coeffs: SffCoeffs, gauss_tol: Optional[float] = None,
                          mean_tol: float = 1e-12) -> VerificationReport:
    """Gauss identity, and for mu != 0 the closed form of H and its constant sign"""
    gauss_tol = settings.gauss_tol if gauss_tol is None else gauss_tol
    H = coeffs.mean_curvature
    details = {"H_min": float(np.min(H)), "H_max": float(np.max(H))}
    checks = [
        numeric_check("gauss-identity", "gauss-equation", _sup(coeffs.gauss_residual), gauss_tol, details),
    ]
    if coeffs.provenance == Provenance.ODE_MUNZ:
        closed = coeffs.params.a_sign * np.sqrt(coeffs.delta) / 2
        checks.append(numeric_check("mean-curvature-closed-form", "mean-curvature", _sup(H - closed), mean_tol))
        signs = np.sign(H)
        checks.append(predicate_check(
            "mean-curvature-sign", "mean-curvature-sign",
            bool(np.all(signs == signs[0]) and signs[0] != 0),
            measured=float(np.min(np.abs(H))),
        ))
    return VerificationReport(suite="curvature", checks=checks)


def second_fundamental_form(a, b, c, jets: JetFields, mu: float, eps: int = 1,
                            mask_eps: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    (Pi_xx, Pi_xt, Pi_tt) of Pi = w1 w13 + w2 w23 in the (dx, dt) basis

    Points with |Delta_12| below mask_eps are non-generic; pass 0 to skip
    the check.
    """
    mask_eps = settings.genericity_eps if mask_eps is None else mask_eps
    f = form_fields(jets, mu, eps)
    delta12 = f["f11"] * f["f22"] - f["f21"] * f["f12"]
    masked = np.abs(delta12) < mask_eps
    if np.any(masked):
        index = tuple(int(i) for i in np.argwhere(np.atleast_1d(masked))[0])
        raise GuardStop("masked", f"Non-generic point at index {index}: |Delta_12| < {mask_eps:.1e}",
                        index=index)
    f11, f12, f21, f22 = f["f11"], f["f12"], f["f21"], f["f22"]
    pi_xx = a * f11 ** 2 + 2 * b * f11 * f21 + c * f21 ** 2
    pi_xt = a * f11 * f12 + b * (f11 * f22 + f21 * f12) + c * f21 * f22
    pi_tt = a * f12 ** 2 + 2 * b * f12 * f22 + c * f22 ** 2
    return pi_xx, pi_xt, pi_tt


def coeffs_frame(coeffs: SffCoeffs) -> pd.DataFrame:
    """Columns x, a, b, c, H, gauss (ac - b^2), delta for mu != 0, status"""
    frame = pd.DataFrame({
        "x": coeffs.x,
        "a": coeffs.a,
        "b": coeffs.b,
        "c": coeffs.c,
        "H": coeffs.mean_curvature,
        "gauss": coeffs.a * coeffs.c - coeffs.b ** 2,
    })
    if coeffs.delta is not None:
        frame["delta"] = coeffs.delta
    frame["status"] = coeffs.stop_reason
    return frame

"""
Periodic pseudospectral solver for Pseudospherical Lab

Evolves m = u - u_xx under m_t = phi_x + phi with
phi = u^2 u_xx - 2 u^2 u_x + u u_x^2, recovers u by Helmholtz inversion
and produces jet snapshots whose time derivatives come from the equation.
"""

import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from ..config import settings
from ..errors import GuardStop, ParameterError
from ..models.fields import JET_NAMES, Grid1D, JetFields, JetGrid, SolverConfig, SolverState
from ..models.schemas import Family, SineMode
from .evalbridge import CompiledExpr, compile_expr, eval_field
from .jetring import dt as jet_dt
from .jetring import dx, phi
from .pseudopot import ConservationLaw, conservation_law

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Spectral operators
# ---------------------------------------------------------------------------

def _spectral_derivative(f_hat: np.ndarray, kappa: np.ndarray, order: int, n: int) -> np.ndarray:
    """(i kappa)^order f_hat; odd orders drop the Nyquist mode"""
    result = f_hat * (1j * kappa) ** order
    if order % 2 and n % 2 == 0:
        result[..., -1] = 0.0
    return result


def _dealias_mask(grid: Grid1D) -> np.ndarray:
    """2/3 rule: keep modes with index <= n/3"""
    return np.arange(grid.n // 2 + 1) <= grid.n // 3


def helmholtz_solve(m: np.ndarray, grid: Grid1D) -> np.ndarray:
    """u = (1 - d_xx)^-1 m, one Fourier symbol per mode"""
    kappa = grid.wavenumbers
    return np.fft.irfft(np.fft.rfft(m) / (1.0 + kappa ** 2), n=grid.n)


def momentum_from_u(u: np.ndarray, grid: Grid1D) -> np.ndarray:
    """m = u - u_xx"""
    kappa = grid.wavenumbers
    return np.fft.irfft(np.fft.rfft(u) * (1.0 + kappa ** 2), n=grid.n)


def spatial_jets(u: np.ndarray, grid: Grid1D) -> Tuple[np.ndarray, ...]:
    """(u, u_x, u_xx, u_xxx) by spectral differentiation"""
    kappa, n = grid.wavenumbers, grid.n
    u_hat = np.fft.rfft(u)
    derivatives = [np.fft.irfft(_spectral_derivative(u_hat, kappa, order, n), n=n) for order in (1, 2, 3)]
    return (u, *derivatives)


def phi_field(u: np.ndarray, u_x: np.ndarray, u_xx: np.ndarray) -> np.ndarray:
    return u ** 2 * u_xx - 2 * u ** 2 * u_x + u * u_x ** 2


def _phi_hat(m: np.ndarray, grid: Grid1D, dealias: bool) -> np.ndarray:
    """
    Fourier coefficients of phi with the Nyquist mode dropped

    With dealias, u is truncated to the 2/3 band before the cubic products
    are formed and phi is truncated back to the same band.
    """
    kappa, n = grid.wavenumbers, grid.n
    u_hat = np.fft.rfft(m) / (1.0 + kappa ** 2)
    if dealias:
        u_hat = u_hat * _dealias_mask(grid)
    u, u_x, u_xx = (np.fft.irfft(_spectral_derivative(u_hat, kappa, order, n), n=n) for order in (0, 1, 2))
    phi_hat = np.fft.rfft(phi_field(u, u_x, u_xx))
    if dealias:
        phi_hat = phi_hat * _dealias_mask(grid)
    phi_hat[-1] = 0.0
    return phi_hat


def rhs(m: np.ndarray, grid: Grid1D, t: float = 0.0, config: Optional[SolverConfig] = None) -> np.ndarray:
    """m_t = phi_x + phi, plus the configured forcing"""
    config = config or SolverConfig()
    phi_hat = _phi_hat(m, grid, config.dealias)
    m_t_hat = phi_hat + _spectral_derivative(phi_hat, grid.wavenumbers, 1, grid.n)
    m_t = np.fft.irfft(m_t_hat, n=grid.n)
    if config.forcing is not None:
        m_t = m_t + config.forcing(grid.nodes, t)
    return m_t


# ---------------------------------------------------------------------------
# Time stepping
# ---------------------------------------------------------------------------

def initial_state(grid: Grid1D, modes: Sequence[SineMode], config: Optional[SolverConfig] = None) -> SolverState:
    """State whose u is a sum of A sin(mode * 2 pi x / L + phase)"""
    x = grid.nodes
    u = np.zeros(grid.n)
    for mode in modes:
        u = u + mode.amplitude * np.sin(mode.mode * 2 * math.pi * x / grid.length + mode.phase)
    return SolverState(grid=grid, m=momentum_from_u(u, grid), t=0.0, config=config or SolverConfig())


def state_from_u(grid: Grid1D, u: np.ndarray, t: float = 0.0,
                 config: Optional[SolverConfig] = None) -> SolverState:
    return SolverState(grid=grid, m=momentum_from_u(u, grid), t=t, config=config or SolverConfig())


def default_dt(state: SolverState) -> float:
    """0.25 h / max(1, |u|_inf^2)"""
    u = helmholtz_solve(state.m, state.grid)
    return 0.25 * state.grid.h / max(1.0, float(np.max(np.abs(u))) ** 2)


def _rk4_step(m: np.ndarray, t: float, dt: float, grid: Grid1D, config: SolverConfig) -> np.ndarray:
    k1 = rhs(m, grid, t, config)
    k2 = rhs(m + 0.5 * dt * k1, grid, t + 0.5 * dt, config)
    k3 = rhs(m + 0.5 * dt * k2, grid, t + 0.5 * dt, config)
    k4 = rhs(m + dt * k3, grid, t + dt, config)
    return m + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def advance(state: SolverState, dt: float, nsteps: int) -> SolverState:
    """
    Classical four-stage Runge-Kutta steps

    Args:
        state: Starting state
        dt: Step size (> 0)
        nsteps: Number of steps (0 returns the state unchanged)

    Returns:
        New state at t + nsteps * dt
    """
    if dt <= 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    if nsteps < 0:
        raise ParameterError(f"nsteps must be >= 0, got {nsteps}")

    m, t = state.m, state.t
    threshold = settings.blowup_threshold
    for _ in range(nsteps):
        stepped = _rk4_step(m, t, dt, state.grid, state.config)
        peak = float(np.max(np.abs(stepped)))
        if not math.isfinite(peak) or peak > threshold:
            logger.warning("Blow-up guard tripped after t=%.6g (|m|_inf=%.3e)", t, peak)
            raise GuardStop(
                "blowup",
                f"|m|_inf = {peak:.3e} exceeds {threshold:.1e}; last finite time t = {t:.6g}",
                t=t,
            )
        m, t = stepped, t + dt
    return replace(state, m=m, t=t)


def integrate_to(state: SolverState, t_target: float, max_dt: Optional[float] = None) -> SolverState:
    """Advance to t_target with equal steps no longer than max_dt (or the configured dt)"""
    span = t_target - state.t
    if span < -1e-14:
        raise ParameterError(f"Cannot integrate backwards from t={state.t} to t={t_target}")
    if span <= 0:
        return state
    step = max_dt or state.config.dt or default_dt(state)
    nsteps = max(1, math.ceil(span / step - 1e-12))
    return advance(state, span / nsteps, nsteps)


# ---------------------------------------------------------------------------
# Jets and residuals
# ---------------------------------------------------------------------------

def _time_jets_hat(state: SolverState) -> np.ndarray:
    """Fourier coefficients of u_t = (1 - d_xx)^-1 (phi_x + phi + forcing)"""
    grid = state.grid
    kappa = grid.wavenumbers
    phi_hat = _phi_hat(state.m, grid, dealias=False)
    m_t_hat = phi_hat + _spectral_derivative(phi_hat, kappa, 1, grid.n)
    if state.config.forcing is not None:
        m_t_hat = m_t_hat + np.fft.rfft(state.config.forcing(grid.nodes, state.t))
    return m_t_hat / (1.0 + kappa ** 2)


def jet_snapshot(state: SolverState) -> JetFields:
    """Spatial jets of u and the time jets implied by the equation"""
    grid = state.grid
    kappa, n = grid.wavenumbers, grid.n
    u, u_x, u_xx, u_xxx = spatial_jets(helmholtz_solve(state.m, grid), grid)
    u_t_hat = _time_jets_hat(state)
    u_t, u_xt, u_xxt = (np.fft.irfft(_spectral_derivative(u_t_hat, kappa, order, n), n=n) for order in (0, 1, 2))
    return JetFields(grid.nodes, state.t, u, u_x, u_xx, u_xxx, u_t, u_xt, u_xxt)


def _series(values_hat: np.ndarray, kappa: np.ndarray, xs: np.ndarray, n: int) -> np.ndarray:
    """Evaluate the real trigonometric interpolant of rfft data at arbitrary points"""
    weights = np.full(kappa.shape, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    phases = np.exp(1j * np.outer(xs, kappa))
    return np.real(phases @ (values_hat * weights)) / n


def interpolate_jets(state: SolverState, xs: np.ndarray) -> JetFields:
    """Jets at arbitrary points by evaluating the Fourier interpolant"""
    grid = state.grid
    kappa, n = grid.wavenumbers, grid.n
    xs = np.asarray(xs, dtype=float)
    u_hat = np.fft.rfft(helmholtz_solve(state.m, grid))
    u_t_hat = _time_jets_hat(state)
    fields = [_series(_spectral_derivative(u_hat, kappa, order, n), kappa, xs, n) for order in range(4)]
    fields += [_series(_spectral_derivative(u_t_hat, kappa, order, n), kappa, xs, n) for order in range(3)]
    return JetFields(xs, state.t, *fields)


def sample_history(state: SolverState, times: Iterable[float], xs: np.ndarray,
                   max_dt: Optional[float] = None) -> JetGrid:
    """
    Jets on the rectangle xs x times

    Args:
        state: Starting state (times must not precede state.t)
        times: Increasing sample times
        xs: Sample points in x
        max_dt: Largest step between samples

    Returns:
        JetGrid with one row per time
    """
    times = np.asarray(list(times), dtype=float)
    if times.size and np.any(np.diff(times) < 0):
        raise ParameterError("Sample times must be increasing")
    rows: Dict[str, List[np.ndarray]] = {name: [] for name in JET_NAMES}
    current = state
    for t in times:
        current = integrate_to(current, float(t), max_dt)
        jets = interpolate_jets(current, xs)
        for name in JET_NAMES:
            rows[name].append(getattr(jets, name))
    xs = np.asarray(xs, dtype=float)
    stacked = {name: np.array(rows[name]).reshape(len(times), xs.size) for name in JET_NAMES}
    return JetGrid(xs, times, **stacked)


def flow_identity_norm(jets: JetFields) -> float:
    """|u_t - u_xt - phi|_inf / (1 + |phi|_inf)"""
    phi_values = phi_field(jets.u, jets.u_x, jets.u_xx)
    residual = jets.u_t - jets.u_xt - phi_values
    return float(np.max(np.abs(residual)) / (1.0 + np.max(np.abs(phi_values))))


@dataclass(frozen=True, eq=False)
class ConservationResidual:
    """Pointwise residual D_t(density) - D_x(flux) on a window"""
    family: Family
    k: int
    x: np.ndarray
    residual: np.ndarray
    sup_norm: float
    drift: float


def compile_residual(law: ConservationLaw, div_eps: Optional[float] = None) -> CompiledExpr:
    return compile_expr(jet_dt(law.density) - dx(law.flux), div_eps=div_eps)


@lru_cache(maxsize=None)
def _compiled_residual(family: Family, k: int) -> CompiledExpr:
    return compile_residual(conservation_law(family, k))


def conservation_residual(jets: JetFields, family, k: int, window: Tuple[float, float] = (0.0, 1.0),
                          law: Optional[ConservationLaw] = None,
                          div_eps: Optional[float] = None) -> ConservationResidual:
    """
    Evaluate a conservation law residual on the points of jets inside window

    The density and flux are differentiated symbolically first, so only
    jet inputs are needed; x enters through E = e^x.
    """
    family = Family(family)
    if law is None and div_eps is None:
        compiled = _compiled_residual(family, k)
    else:
        compiled = compile_residual(law or conservation_law(family, k), div_eps)
    mask = (jets.x >= window[0]) & (jets.x <= window[1])
    if not np.any(mask):
        raise ParameterError(f"Window {window} contains no sample points")
    restricted = jets.restrict(mask)
    residual = eval_field(compiled, restricted)
    drift = float(trapezoid(residual, restricted.x)) if restricted.x.size > 1 else 0.0
    return ConservationResidual(
        family=family,
        k=k,
        x=restricted.x,
        residual=residual,
        sup_norm=float(np.max(np.abs(residual))),
        drift=drift,
    )


def snapshot_frame(jets: JetFields, residuals: Sequence[ConservationResidual] = ()) -> pd.DataFrame:
    """Columns x, u, u_x, u_xx, u_t and one res_<family>_<k> column per residual"""
    frame = pd.DataFrame({
        "x": jets.x,
        "u": jets.u,
        "u_x": jets.u_x,
        "u_xx": jets.u_xx,
        "u_t": jets.u_t,
    })
    for item in residuals:
        column = pd.Series(item.residual, index=np.flatnonzero(np.isin(jets.x, item.x)))
        frame[f"res_{item.family.value}_{item.k}"] = column
    return frame


# ---------------------------------------------------------------------------
# Manufactured solutions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManufacturedSolution:
    """u* = A sin(x - c t) with the forcing that makes it exact"""
    amplitude: float = 0.05
    speed: float = 1.0

    def u(self, x: np.ndarray, t: float) -> np.ndarray:
        return self.amplitude * np.sin(x - self.speed * t)

    def m(self, x: np.ndarray, t: float) -> np.ndarray:
        return 2 * self.amplitude * np.sin(x - self.speed * t)

    def jets(self, x: np.ndarray, t: float) -> JetFields:
        A, c = self.amplitude, self.speed
        s, co = np.sin(x - c * t), np.cos(x - c * t)
        return JetFields(x, t, A * s, A * co, -A * s, -A * co, -A * c * co, A * c * s, A * c * co)

    def forcing(self, x: np.ndarray, t: float) -> np.ndarray:
        """(u* - u*_xx)_t - D_x phi* - phi*"""
        jets = self.jets(x, t)
        phi_c, phi_x_c = _compiled_phi()
        m_t = -2 * self.amplitude * self.speed * np.cos(x - self.speed * t)
        return m_t - eval_field(phi_x_c, jets) - eval_field(phi_c, jets)


@lru_cache(maxsize=None)
def _compiled_phi() -> Tuple[CompiledExpr, CompiledExpr]:
    return compile_expr(phi()), compile_expr(dx(phi()))


def manufactured_solution(amplitude: float = 0.05, speed: float = 1.0) -> ManufacturedSolution:
    return ManufacturedSolution(amplitude=amplitude, speed=speed)


def manufactured_errors(solution: ManufacturedSolution, grid: Grid1D, dts: Sequence[float],
                        t_end: float = 1.0, dealias: bool = True) -> List[float]:
    """Sup-norm error in m at t_end for each step size"""
    errors = []
    config = SolverConfig(dealias=dealias, forcing=solution.forcing)
    for step in dts:
        nsteps = int(round(t_end / step))
        state = SolverState(grid=grid, m=solution.m(grid.nodes, 0.0), t=0.0, config=config)
        final = advance(state, t_end / nsteps, nsteps)
        errors.append(float(np.max(np.abs(final.m - solution.m(grid.nodes, final.t)))))
    return errors


def temporal_order(errors: Sequence[float], dts: Sequence[float]) -> List[float]:
    """Observed orders log(e_i / e_i+1) / log(dt_i / dt_i+1)"""
    errors, dts = np.asarray(errors, dtype=float), np.asarray(dts, dtype=float)
    return list(np.log(errors[:-1] / errors[1:]) / np.log(dts[:-1] / dts[1:]))

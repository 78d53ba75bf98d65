"""
Command-line runner for Pseudospherical Lab

Subcommands: verify, solve, monitor, immerse, surface.
Exit codes: 0 ok, 1 verification failure, 2 usage or parameter error,
3 runtime guard stop.
"""

import argparse
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .. import __version__
from ..config import settings
from ..errors import GuardStop, ParameterError, PssError, VerificationFailure
from ..models.fields import Grid1D, ImmersionParams, SolverConfig
from ..models.schemas import ResidualSummary, RunConfig, RunMetadata, SnapshotRecord, VerificationReport
from ..services.checks import numeric_check
from ..services.chsolver import (
    conservation_residual,
    default_dt,
    flow_identity_norm,
    helmholtz_solve,
    initial_state,
    integrate_to,
    jet_snapshot,
    manufactured_solution,
    sample_history,
    snapshot_frame,
    state_from_u,
)
from ..services.immersion import (
    codazzi_residuals,
    coeffs_frame,
    curvature_diagnostics,
    sample,
    solve_coefficients,
)
from ..services.surface3d import export_obj, integrate_frame, mesh_diagnostics
from ..services.verification import VerificationSuite

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
FLOW_IDENTITY_TOL = 1e-11


def _sign(value: str) -> int:
    table = {"+": 1, "+1": 1, "1": 1, "-": -1, "-1": -1}
    if value not in table:
        raise argparse.ArgumentTypeError(f"sign must be + or -, got '{value}'")
    return table[value]


def _configure_logging(level: Optional[str]) -> None:
    logging.basicConfig(
        level=(level or settings.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _write_json(path: Path, model) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")


def _print_report(report: VerificationReport) -> None:
    for check in report.checks:
        if not check.passed:
            print(f"❌ {check.name} [{check.anchor}] residual={check.residual:.3e} tol={check.tolerance:.1e}")
    if report.passed:
        print(f"✅ {len(report.checks)} checks passed ({report.suite})")
    else:
        print(f"❌ {len(report.failed())} of {len(report.checks)} checks failed ({report.suite})")


def _finish(report: VerificationReport) -> int:
    _print_report(report)
    if not report.passed:
        raise VerificationFailure(report.failed())
    return 0


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def _run_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {
        "length": getattr(args, "length", None),
        "n": getattr(args, "n", None),
        "dt": getattr(args, "dt", None),
        "t_end": getattr(args, "t_end", None),
        "snapshots": getattr(args, "snapshots", None),
        "mu": getattr(args, "mu", None),
        "eps": getattr(args, "eps", None),
    }
    if getattr(args, "forcing", False):
        overrides["forcing"] = True
    if getattr(args, "no_dealias", False):
        overrides["dealias"] = False
    family = getattr(args, "family", None)
    if family is not None:
        overrides["monitor"] = [{"family": family, "k": args.k or [2 if family == "neg" else 1]}]
    return overrides


def load_config(path: Optional[str], overrides: Dict[str, Any]) -> RunConfig:
    return RunConfig.from_toml(Path(path) if path else None, overrides)


def _solver_setup(config: RunConfig):
    grid = Grid1D(config.length, config.n)
    if not config.forcing:
        solver = SolverConfig(dt=config.dt, dealias=config.dealias)
        return initial_state(grid, config.initial, solver), None

    # Forced runs reproduce a travelling sine wave; the amplitude comes from the first mode.
    if not math.isclose(config.length, 2 * math.pi):
        raise ParameterError("Forced runs need L = 2 pi")
    solution = manufactured_solution(amplitude=config.initial[0].amplitude)
    solver = SolverConfig(dt=config.dt, dealias=config.dealias, forcing=solution.forcing)
    return state_from_u(grid, solution.u(grid.nodes, 0.0), 0.0, solver), solution


def _step_count(t_from: float, t_to: float, dt: float) -> int:
    span = t_to - t_from
    return max(1, math.ceil(span / dt - 1e-12)) if span > 0 else 0


# ---------------------------------------------------------------------------
# Handlers
# ---------------------------------------------------------------------------

def cmd_verify(args: argparse.Namespace) -> int:
    kmax = args.kmax or settings.kmax
    print(f"🔎 Verifying identities up to k = {kmax}")
    report = VerificationSuite(threads=args.threads).run(kmax)
    if args.report:
        _write_json(Path(args.report), report)
        print(f"📄 Report written to {args.report}")
    return _finish(report)


def cmd_solve(args: argparse.Namespace, monitor: bool = False) -> int:
    config = load_config(args.config, _run_overrides(args))
    if monitor and not config.monitor:
        raise ParameterError("monitor needs at least one selection (--family/--k or [[monitor]] in the config)")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    state, solution = _solver_setup(config)
    dt = config.dt or default_dt(state)
    times = np.linspace(0.0, config.t_end, config.snapshots) if config.snapshots > 1 else np.array([config.t_end])
    print(f"🚀 Solving on n = {config.n}, L = {config.length:.6g}, dt = {dt:.3e}, t_end = {config.t_end:.6g}")

    checks = []
    records: List[SnapshotRecord] = []
    steps = 0
    for index, t in enumerate(times):
        steps += _step_count(state.t, float(t), dt)
        state = integrate_to(state, float(t), dt)
        jets = jet_snapshot(state)
        identity = flow_identity_norm(jets)

        residuals = []
        if monitor:
            for selection in config.monitor:
                for k in selection.k:
                    residuals.append(conservation_residual(jets, selection.family, k, selection.window,
                                                           div_eps=config.div_eps))

        path = out / f"snapshot_{index:03d}.csv"
        snapshot_frame(jets, residuals).to_csv(path, index=False, float_format=FLOAT_FORMAT)
        records.append(SnapshotRecord(
            index=index,
            t=state.t,
            path=path.name,
            sup_u=float(np.max(np.abs(jets.u))),
            sup_m=float(np.max(np.abs(state.m))),
            flow_identity=identity,
            residuals=[
                ResidualSummary(family=item.family, k=item.k, window=(float(item.x.min()), float(item.x.max())),
                                sup_norm=item.sup_norm, drift=item.drift, points=int(item.x.size))
                for item in residuals
            ],
        ))

        if solution is None:
            checks.append(numeric_check(f"flow-identity[t={state.t:.6g}]", "flow-identity",
                                        identity, FLOW_IDENTITY_TOL))
            for item in residuals:
                checks.append(numeric_check(
                    f"conservation[{item.family.value},k={item.k},t={state.t:.6g}]",
                    f"conservation-{item.family.value}",
                    item.sup_norm,
                    config.monitor_tol,
                    {"drift": item.drift},
                ))
        logger.info("Snapshot %d at t=%.6g written to %s", index, state.t, path)

    if solution is not None:
        error = float(np.max(np.abs(helmholtz_solve(state.m, state.grid) - solution.u(state.grid.nodes, state.t))))
        checks.append(numeric_check("manufactured-error", "forced-travelling-wave", error, 1e-6, {"t": state.t}))

    report = VerificationReport(suite="monitor" if monitor else "solve", checks=checks)
    metadata = RunMetadata(
        length=config.length,
        n=config.n,
        h=state.grid.h,
        dt=dt,
        t_end=config.t_end,
        steps=steps,
        dealias=config.dealias,
        forcing=config.forcing,
        snapshots=records,
        report=report,
    )
    _write_json(out / "run.json", metadata)
    print(f"📄 {len(records)} snapshots written to {out}")
    return _finish(report)


def cmd_monitor(args: argparse.Namespace) -> int:
    return cmd_solve(args, monitor=True)


def _immersion_params(config: RunConfig) -> ImmersionParams:
    return ImmersionParams(mu=config.mu, beta=config.beta, C_strip=config.C_strip,
                           a_sign=config.a_sign, eps=config.eps)


def _tolerances(config: RunConfig) -> Dict[str, float]:
    values = {
        "rtol": config.ode_rtol,
        "atol": config.ode_atol,
        "delta_eps": config.delta_eps,
        "den_eps": config.den_eps,
    }
    return {key: value for key, value in values.items() if value is not None}


def cmd_immerse(args: argparse.Namespace) -> int:
    overrides = {
        "mu": args.mu,
        "C_strip": args.C,
        "beta": args.beta,
        "a_sign": args.sign,
        "x0": args.x0,
        "b0": args.b0,
        "span": args.span,
        "immersion_nodes": args.n,
    }
    config = load_config(args.config, overrides)
    params = _immersion_params(config)
    coeffs = solve_coefficients(params, x0=config.x0, b0=config.b0, span=config.span,
                                nodes=config.immersion_nodes, **_tolerances(config))
    report = VerificationReport.merge("immerse", [codazzi_residuals(coeffs), curvature_diagnostics(coeffs)])

    header = {
        "mu": params.mu,
        "beta": params.beta,
        "C_strip": params.C_strip,
        "a_sign": params.a_sign,
        "provenance": coeffs.provenance.value,
        "stop_reason": coeffs.stop_reason,
        "interval": [float(coeffs.x[0]), float(coeffs.x[-1])],
        "passed": report.passed,
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = "".join(f"# {line}\n" for line in json.dumps(header, indent=2).splitlines())
    out.write_text(lines + coeffs_frame(coeffs).to_csv(index=False, float_format=FLOAT_FORMAT), encoding="utf-8")
    print(f"📄 {coeffs.x.size} coefficient rows written to {out}")

    if coeffs.stop_reason != "completed":
        print(f"⚠️ Coefficient ODE stopped early: {coeffs.stop_reason} at x = {coeffs.x[-1]:.6g}")
        raise GuardStop(coeffs.stop_reason, f"Coefficient ODE stopped at x = {coeffs.x[-1]:.6g}",
                        x=float(coeffs.x[-1]))
    return _finish(report)


def cmd_surface(args: argparse.Namespace) -> int:
    config = load_config(args.config, _run_overrides(args))
    grid = Grid1D(config.length, config.n)
    state = initial_state(grid, config.initial, SolverConfig(dt=config.dt, dealias=config.dealias))

    xs = np.linspace(config.surface_x0, config.surface_x1, config.surface_nx)
    ts = np.linspace(0.0, config.surface_t1, config.surface_nt)
    spacing = ts[1] - ts[0] if ts.size > 1 else config.surface_t1
    max_dt = config.surface_max_dt or (spacing / 4 if spacing > 0 else None)
    print(f"🚀 Sampling jets on {ts.size} x {xs.size} points")
    jets = sample_history(state, ts, xs, max_dt)

    params = _immersion_params(config)
    coeffs = solve_coefficients(params, xs=xs if params.mu == 0 else None, x0=config.x0, b0=config.b0,
                                span=config.span, nodes=config.immersion_nodes, **_tolerances(config))
    if coeffs.stop_reason != "completed":
        raise GuardStop(coeffs.stop_reason, f"Coefficient ODE stopped at x = {coeffs.x[-1]:.6g}",
                        x=float(coeffs.x[-1]))
    coeffs = sample(coeffs, xs)

    mesh = integrate_frame(jets, coeffs, config.eps, config.ortho_interval, config.genericity_eps)
    diagnostics = mesh_diagnostics(mesh, jets, coeffs, config.eps, config.curvature_bounds, config.metric_tol)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out.with_suffix(".diagnostics.json"), diagnostics)
    if diagnostics.faces == 0:
        print("⚠️ Every quad touches a non-generic point; nothing to export")
        raise GuardStop("masked", "degenerate, no faces")
    export_obj(mesh, out)
    print(f"📄 {diagnostics.vertices} vertices and {diagnostics.faces} faces written to {out}")
    if diagnostics.report is None:
        return 0
    return _finish(diagnostics.report)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="TOML run configuration")
    parser.add_argument("--length", type=float, default=None, help="Period L of the grid")
    parser.add_argument("--n", type=int, default=None, help="Grid points (power of two)")
    parser.add_argument("--dt", type=float, default=None, help="Time step")
    parser.add_argument("--t-end", dest="t_end", type=float, default=None, help="Final time")
    parser.add_argument("--snapshots", type=int, default=None, help="Number of snapshots")
    parser.add_argument("--mu", type=float, default=None, help="Parameter mu of the one-forms")
    parser.add_argument("--eps", type=int, choices=(1, -1), default=None, help="Branch sign")
    parser.add_argument("--forcing", action="store_true", help="Force a travelling sine wave")
    parser.add_argument("--no-dealias", dest="no_dealias", action="store_true", help="Disable 2/3 dealiasing")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Pseudospherical Lab - generalized Camassa-Holm equation as a pseudospherical surface equation",
        prog="pss",
    )
    parser.add_argument("--version", action="version", version=f"Pseudospherical Lab {__version__}")
    parser.add_argument("--log-level", dest="log_level", default=None, help="Logging level")
    commands = parser.add_subparsers(dest="command", required=True)

    verify = commands.add_parser("verify", help="Run the exact symbolic suite")
    verify.add_argument("--kmax", type=int, default=None, help="Highest hierarchy index")
    verify.add_argument("--report", default=None, help="JSON report path")
    verify.add_argument("--threads", type=int, default=None, help="Worker cap")
    verify.set_defaults(handler=cmd_verify)

    solve = commands.add_parser("solve", help="Run the periodic solver and write snapshots")
    _add_run_options(solve)
    solve.add_argument("--out", default="run", help="Output directory")
    solve.set_defaults(handler=cmd_solve)

    monitor = commands.add_parser("monitor", help="Solve and evaluate conservation residuals")
    _add_run_options(monitor)
    monitor.add_argument("--out", default="run", help="Output directory")
    monitor.add_argument("--family", choices=("neg", "pos"), default=None, help="Conservation family")
    monitor.add_argument("--k", type=int, nargs="+", default=None, help="Conservation indices")
    monitor.set_defaults(handler=cmd_monitor)

    immerse = commands.add_parser("immerse", help="Second fundamental form coefficients")
    immerse.add_argument("--config", default=None, help="TOML run configuration")
    immerse.add_argument("--mu", type=float, default=None)
    immerse.add_argument("--C", type=float, default=None, help="Strip constant for mu = 0")
    immerse.add_argument("--beta", type=float, default=None)
    immerse.add_argument("--sign", type=_sign, default=None, help="Branch of a (+ or -)")
    immerse.add_argument("--x0", type=float, default=None)
    immerse.add_argument("--b0", type=float, default=None)
    immerse.add_argument("--span", type=float, default=None)
    immerse.add_argument("--n", type=int, default=None, help="Output nodes")
    immerse.add_argument("--out", required=True, help="CSV path")
    immerse.set_defaults(handler=cmd_immerse)

    surface = commands.add_parser("surface", help="Reconstruct and export the immersed surface")
    _add_run_options(surface)
    surface.add_argument("--out", required=True, help="OBJ path")
    surface.set_defaults(handler=cmd_surface)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one subcommand and return the exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    _configure_logging(args.log_level)
    try:
        return args.handler(args)
    except VerificationFailure as e:
        return e.exit_code
    except GuardStop as e:
        print(f"⚠️ Stopped ({e.reason}): {e}")
        return e.exit_code
    except PssError as e:
        print(f"❌ {e}")
        return e.exit_code
    except OSError as e:
        print(f"❌ {e}")
        return 2

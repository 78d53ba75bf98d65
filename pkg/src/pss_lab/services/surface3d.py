"""
Moving-frame surface reconstruction for Pseudospherical Lab

Transports the frame (X, e1, e2, e3) along dX = w1 e1 + w2 e2,
de1 = w3 e2 + w13 e3, de2 = -w3 e1 + w23 e3, de3 = -w13 e1 - w23 e2
over a sampled (x, t) rectangle, then checks and exports the mesh.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Tuple

import networkx as nx
import numpy as np

from ..config import settings
from ..errors import GuardStop, ParameterError
from ..models.fields import JetGrid, SffCoeffs, SurfaceMesh
from ..models.schemas import SurfaceDiagnostics, VerificationReport
from .checks import numeric_check, predicate_check
from .immersion import codazzi_fields, form_fields, sample

logger = logging.getLogger(__name__)

SEED = np.vstack([np.zeros(3), np.eye(3)])


def _odd_count(count: int, axis: str) -> int:
    if count < 1 or count % 2 == 0:
        raise ParameterError(f"{axis} needs an odd number (2m + 1) of samples, got {count}")
    return (count - 1) // 2


def _spacing(values: np.ndarray, axis: str) -> float:
    if values.size < 2:
        return 0.0
    steps = np.diff(values)
    if np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, abs(steps[0])):
        raise ParameterError(f"{axis} samples must be equally spaced")
    return float(steps[0])


def connection_matrices(jets: JetGrid, coeffs: SffCoeffs, eps: int = 1) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Connection matrices at every sample for the x and t directions

    Returns:
        (Mx, Mt, delta12), Mx and Mt shaped (nt, nx, 4, 4)
    """
    local = sample(coeffs, jets.x)
    gauss = float(np.max(np.abs(local.gauss_residual)))
    if gauss > settings.gauss_tol:
        raise GuardStop("gauss_residual", f"|ac - b^2 + 1| = {gauss:.3e} exceeds {settings.gauss_tol:.1e}")
    codazzi = max(float(np.max(np.abs(r))) for r in codazzi_fields(local))
    if codazzi > settings.codazzi_tol:
        raise GuardStop("codazzi_residual", f"Codazzi residual {codazzi:.3e} exceeds {settings.codazzi_tol:.1e}")
    a, b, c = local.a, local.b, local.c
    nt, nx_ = jets.shape
    Mx = np.zeros((nt, nx_, 4, 4))
    Mt = np.zeros((nt, nx_, 4, 4))
    delta12 = np.zeros((nt, nx_))
    for row in range(nt):
        f = form_fields(jets.slice(row), coeffs.params.mu, eps)
        for M, j in ((Mx, "1"), (Mt, "2")):
            w1, w2, w3 = f["f1" + j], f["f2" + j], f["f3" + j]
            w13 = a * w1 + b * w2
            w23 = b * w1 + c * w2
            M[row, :, 0, 1], M[row, :, 0, 2] = w1, w2
            M[row, :, 1, 2], M[row, :, 1, 3] = w3, w13
            M[row, :, 2, 1], M[row, :, 2, 3] = -w3, w23
            M[row, :, 3, 1], M[row, :, 3, 2] = -w13, -w23
        delta12[row] = f["f11"] * f["f22"] - f["f21"] * f["f12"]
    return Mx, Mt, delta12


def _rk4(Y: np.ndarray, M0: np.ndarray, Mh: np.ndarray, M1: np.ndarray, h: float) -> np.ndarray:
    """One step of Y' = M Y with M known at the start, midpoint and end"""
    k1 = M0 @ Y
    k2 = Mh @ (Y + 0.5 * h * k1)
    k3 = Mh @ (Y + 0.5 * h * k2)
    k4 = M1 @ (Y + h * k3)
    return Y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _orthonormalize(Y: np.ndarray) -> Tuple[np.ndarray, float]:
    """Nearest orthogonal frame (polar factor) and the drift it removed"""
    frames = Y[..., 1:, :]
    gram = frames @ np.swapaxes(frames, -1, -2)
    drift = float(np.max(np.abs(gram - np.eye(3)))) if gram.size else 0.0
    U, _, Vt = np.linalg.svd(frames)
    fixed = Y.copy()
    fixed[..., 1:, :] = U @ Vt
    return fixed, drift


def _transport(Y: np.ndarray, M: np.ndarray, h: float, interval: int) -> Tuple[np.ndarray, float]:
    """
    Integrate along the first axis of M (2s + 1 samples) from Y

    Returns the s + 1 vertex states stacked on a new first axis.
    """
    steps = (M.shape[0] - 1) // 2
    states = [Y]
    drift = 0.0
    for k in range(steps):
        Y = _rk4(Y, M[2 * k], M[2 * k + 1], M[2 * k + 2], h)
        if (k + 1) % interval == 0 or k + 1 == steps:
            Y, removed = _orthonormalize(Y)
            drift = max(drift, removed)
        states.append(Y)
    return np.stack(states), drift


def integrate_frame(jets: JetGrid, coeffs: SffCoeffs, eps: int = 1, ortho_interval: Optional[int] = None,
                    mask_eps: Optional[float] = None, threads: Optional[int] = None) -> SurfaceMesh:
    """
    Immersed surface on the vertex grid of a sampled rectangle

    Even-indexed samples are vertices and odd-indexed samples serve as RK4
    midpoints, so (2p + 1) x (2q + 1) samples give a (p + 1) x (q + 1) mesh.
    The seed row t = t0 is integrated along x, then every column along t.

    Args:
        jets: JetGrid with rows in t and columns in x
        coeffs: Second fundamental form coefficients covering jets.x
        eps: Branch sign of the one-forms
        ortho_interval: Steps between re-orthonormalizations
        mask_eps: Genericity threshold on |Delta_12|
        threads: Worker cap for the column sweep

    Returns:
        SurfaceMesh with positions (T, X, 3) and frames (T, X, 3, 3)
    """
    interval = ortho_interval or settings.ortho_interval
    mask_eps = settings.genericity_eps if mask_eps is None else mask_eps
    nt_s, nx_s = jets.shape
    _odd_count(nt_s, "t")
    _odd_count(nx_s, "x")
    hx = 2 * _spacing(jets.x, "x")
    ht = 2 * _spacing(jets.t, "t")

    Mx, Mt, delta12 = connection_matrices(jets, coeffs, eps)
    seed_row, drift_x = _transport(SEED, Mx[0], hx, interval)

    columns = np.arange(0, nx_s, 2)
    workers = max(1, threads or settings.threads)
    chunks = [chunk for chunk in np.array_split(columns, workers) if chunk.size]

    def sweep(chunk: np.ndarray) -> Tuple[np.ndarray, float]:
        starts = seed_row[chunk // 2]
        return _transport(starts, Mt[:, chunk], ht, interval)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(sweep, chunks))

    states = np.concatenate([states for states, _ in results], axis=1)
    drift = max([drift_x] + [d for _, d in results])
    valid = np.abs(delta12[::2, ::2]) >= mask_eps
    logger.info("Integrated frame on %dx%d vertices (drift %.2e)", states.shape[0], states.shape[1], drift)
    return SurfaceMesh(
        x=jets.x[::2],
        t=jets.t[::2],
        positions=states[..., 0, :],
        frames=states[..., 1:, :],
        valid=valid,
        ortho_drift=drift,
    )


def transport_path(jets: JetGrid, coeffs: SffCoeffs, order: str = "xt", eps: int = 1,
                   ortho_interval: Optional[int] = None) -> np.ndarray:
    """Frame state at the far corner reached x-then-t ("xt") or t-then-x ("tx")"""
    if order not in ("xt", "tx"):
        raise ParameterError(f"order must be 'xt' or 'tx', got '{order}'")
    interval = ortho_interval or settings.ortho_interval
    _odd_count(jets.shape[0], "t")
    _odd_count(jets.shape[1], "x")
    hx, ht = 2 * _spacing(jets.x, "x"), 2 * _spacing(jets.t, "t")
    Mx, Mt, _ = connection_matrices(jets, coeffs, eps)
    if order == "xt":
        row, _ = _transport(SEED, Mx[0], hx, interval)
        column, _ = _transport(row[-1], Mt[:, -1], ht, interval)
        return column[-1]
    column, _ = _transport(SEED, Mt[:, 0], ht, interval)
    row, _ = _transport(column[-1], Mx[-1], hx, interval)
    return row[-1]


def commutator_error(jets: JetGrid, coeffs: SffCoeffs, eps: int = 1) -> float:
    """Largest entry of the difference between the two transport paths"""
    xt = transport_path(jets, coeffs, "xt", eps)
    tx = transport_path(jets, coeffs, "tx", eps)
    return float(np.max(np.abs(xt - tx)))


# ---------------------------------------------------------------------------
# Mesh topology and diagnostics
# ---------------------------------------------------------------------------

def quad_mask(valid: np.ndarray) -> np.ndarray:
    """Quads whose four corners are unmasked"""
    if valid.shape[0] < 2 or valid.shape[1] < 2:
        return np.zeros((max(valid.shape[0] - 1, 0), max(valid.shape[1] - 1, 0)), dtype=bool)
    return valid[:-1, :-1] & valid[:-1, 1:] & valid[1:, :-1] & valid[1:, 1:]


def mesh_faces(valid: np.ndarray) -> List[Tuple[Tuple[int, int], ...]]:
    """Triangles of every valid quad, split along (i, j)-(i+1, j+1)"""
    faces = []
    for i, j in zip(*np.nonzero(quad_mask(valid))):
        i, j = int(i), int(j)
        faces.append(((i, j), (i, j + 1), (i + 1, j + 1)))
        faces.append(((i, j), (i + 1, j + 1), (i + 1, j)))
    return faces


def component_count(valid: np.ndarray) -> int:
    """Connected components of the valid-quad adjacency graph"""
    quads = quad_mask(valid)
    graph = nx.Graph()
    for i, j in zip(*np.nonzero(quads)):
        graph.add_node((int(i), int(j)))
        if i + 1 < quads.shape[0] and quads[i + 1, j]:
            graph.add_edge((int(i), int(j)), (int(i) + 1, int(j)))
        if j + 1 < quads.shape[1] and quads[i, j + 1]:
            graph.add_edge((int(i), int(j)), (int(i), int(j) + 1))
    return nx.number_connected_components(graph)


def _triangle_angles(p0: np.ndarray, p1: np.ndarray, p2: np.ndarray) -> Tuple[np.ndarray, ...]:
    def angle(at, u, v):
        d1, d2 = u - at, v - at
        cos = np.sum(d1 * d2, axis=-1) / (np.linalg.norm(d1, axis=-1) * np.linalg.norm(d2, axis=-1))
        return np.arccos(np.clip(cos, -1.0, 1.0))
    return angle(p0, p1, p2), angle(p1, p2, p0), angle(p2, p0, p1)


def discrete_curvature(mesh: SurfaceMesh) -> Tuple[np.ndarray, np.ndarray]:
    """
    Angle-defect curvature at interior vertices whose four quads are valid

    Returns:
        (K, mask) with K = (2 pi - angle sum) / (area / 3), NaN off the mask
    """
    T, X = mesh.shape
    K = np.full((T, X), np.nan)
    interior = np.zeros((T, X), dtype=bool)
    faces = mesh_faces(mesh.valid)
    if not faces:
        return K, interior

    quads = quad_mask(mesh.valid)
    interior[1:-1, 1:-1] = quads[:-1, :-1] & quads[:-1, 1:] & quads[1:, :-1] & quads[1:, 1:]

    index = np.array(faces)
    P = mesh.positions
    p0 = P[index[:, 0, 0], index[:, 0, 1]]
    p1 = P[index[:, 1, 0], index[:, 1, 1]]
    p2 = P[index[:, 2, 0], index[:, 2, 1]]
    angles = _triangle_angles(p0, p1, p2)
    areas = 0.5 * np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=-1)

    angle_sum = np.zeros((T, X))
    area_sum = np.zeros((T, X))
    for corner in range(3):
        rows, cols = index[:, corner, 0], index[:, corner, 1]
        np.add.at(angle_sum, (rows, cols), angles[corner])
        np.add.at(area_sum, (rows, cols), areas)

    K[interior] = (2 * math.pi - angle_sum[interior]) / (area_sum[interior] / 3.0)
    return K, interior


def metric_mismatch(mesh: SurfaceMesh, jets: JetGrid, mu: float, eps: int = 1) -> Optional[float]:
    """
    Relative Frobenius mismatch between the mesh metric and w1^2 + w2^2

    Central differences at interior valid vertices; None when there are none.
    """
    T, X = mesh.shape
    if T < 3 or X < 3:
        return None
    P = mesh.positions
    hx, ht = mesh.x[1] - mesh.x[0], mesh.t[1] - mesh.t[0]
    Px = (P[1:-1, 2:] - P[1:-1, :-2]) / (2 * hx)
    Pt = (P[2:, 1:-1] - P[:-2, 1:-1]) / (2 * ht)
    mesh_E = np.sum(Px * Px, axis=-1)
    mesh_F = np.sum(Px * Pt, axis=-1)
    mesh_G = np.sum(Pt * Pt, axis=-1)

    E = np.zeros((T, X))
    F = np.zeros((T, X))
    G = np.zeros((T, X))
    for row in range(T):
        f = form_fields(jets.slice(2 * row), mu, eps)
        E[row] = (f["f11"] ** 2 + f["f21"] ** 2)[::2]
        F[row] = (f["f11"] * f["f12"] + f["f21"] * f["f22"])[::2]
        G[row] = (f["f12"] ** 2 + f["f22"] ** 2)[::2]
    E, F, G = E[1:-1, 1:-1], F[1:-1, 1:-1], G[1:-1, 1:-1]

    mask = mesh.valid[1:-1, 1:-1]
    if not np.any(mask):
        return None
    difference = (mesh_E - E) ** 2 + 2 * (mesh_F - F) ** 2 + (mesh_G - G) ** 2
    scale = E ** 2 + 2 * F ** 2 + G ** 2
    return float(math.sqrt(np.sum(difference[mask]) / np.sum(scale[mask])))


def mesh_diagnostics(mesh: SurfaceMesh, jets: JetGrid, coeffs: SffCoeffs, eps: int = 1,
                     curvature_bounds: Tuple[float, float] = (-1.05, -0.95),
                     metric_tol: float = 0.01) -> SurfaceDiagnostics:
    """Metric agreement, discrete curvature, orthonormality drift and topology"""
    faces = mesh_faces(mesh.valid)
    vertices = int(np.count_nonzero(mesh.valid))
    masked = int(mesh.valid.size - vertices)
    if not faces:
        return SurfaceDiagnostics(
            status="degenerate, no faces",
            vertices=vertices,
            faces=0,
            masked_vertices=masked,
            components=0,
            ortho_drift=mesh.ortho_drift,
        )

    mismatch = metric_mismatch(mesh, jets, coeffs.params.mu, eps)
    K, interior = discrete_curvature(mesh)
    values = K[interior]

    checks = [numeric_check("ortho-drift", "frame-orthonormality", mesh.ortho_drift, settings.ortho_tol)]
    if mismatch is not None:
        checks.append(numeric_check("metric-mismatch", "first-fundamental-form", mismatch, metric_tol))
    if values.size:
        lower, upper = curvature_bounds
        inside = bool(np.all((values >= lower) & (values <= upper)))
        checks.append(predicate_check(
            "discrete-curvature", "gaussian-curvature", inside,
            measured=float(np.max(np.abs(values + 1.0))),
            details={"bounds": [lower, upper], "points": int(values.size)},
        ))
    report = VerificationReport(suite="surface", checks=checks)

    return SurfaceDiagnostics(
        status="ok" if report.passed else "failed",
        vertices=vertices,
        faces=len(faces),
        masked_vertices=masked,
        components=component_count(mesh.valid),
        metric_mismatch=mismatch,
        curvature_min=float(np.min(values)) if values.size else None,
        curvature_max=float(np.max(values)) if values.size else None,
        curvature_mean=float(np.mean(values)) if values.size else None,
        curvature_points=int(values.size),
        ortho_drift=mesh.ortho_drift,
        report=report,
    )


# ---------------------------------------------------------------------------
# OBJ export
# ---------------------------------------------------------------------------

def export_obj(mesh: SurfaceMesh, path) -> Path:
    """
    Write valid vertices row-major (t outer, x inner) and the split quads

    Raises ParameterError when the mesh has no valid quad.
    """
    faces = mesh_faces(mesh.valid)
    if not faces:
        raise ParameterError("Mesh has no valid quad to export")

    numbering = {}
    lines = []
    for i, j in zip(*np.nonzero(mesh.valid)):
        numbering[(int(i), int(j))] = len(numbering) + 1
        x, y, z = mesh.positions[i, j]
        lines.append(f"v {x:.9g} {y:.9g} {z:.9g}")
    for face in faces:
        lines.append("f " + " ".join(str(numbering[vertex]) for vertex in face))

    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info("Wrote %d vertices and %d faces to %s", len(numbering), len(faces), path)
    return path


def read_obj(path) -> Tuple[np.ndarray, np.ndarray]:
    """Vertices (n, 3) and 1-based triangle indices (m, 3) of an OBJ file"""
    vertices, faces = [], []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            vertices.append([float(value) for value in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(value.split("/")[0]) for value in parts[1:4]])
    return np.array(vertices, dtype=float).reshape(-1, 3), np.array(faces, dtype=int).reshape(-1, 3)

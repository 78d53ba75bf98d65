"""
Tests for frame transport, mesh diagnostics and OBJ export
"""

import math

import numpy as np
import pytest

from pss_lab.config import settings
from pss_lab.errors import GuardStop, ParameterError
from pss_lab.models.fields import Grid1D, SurfaceMesh
from pss_lab.models.schemas import SineMode
from pss_lab.services.chsolver import initial_state, sample_history
from pss_lab.services.immersion import mu0_coeffs
from pss_lab.services.surface3d import (
    commutator_error,
    component_count,
    discrete_curvature,
    export_obj,
    integrate_frame,
    mesh_diagnostics,
    mesh_faces,
    quad_mask,
    read_obj,
    transport_path,
)

BUMP = [SineMode(mode=0, amplitude=1.0, phase=math.pi / 2), SineMode(mode=1, amplitude=0.5)]
X1, T1 = 0.5, 0.25


def bump_history(samples: int):
    xs = np.linspace(0.0, X1, samples)
    ts = np.linspace(0.0, T1, samples)
    state = initial_state(Grid1D(2 * math.pi, 64), BUMP)
    max_dt = (ts[1] - ts[0]) / 4 if samples > 1 else None
    return sample_history(state, ts, xs, max_dt), mu0_coeffs(5.0, 1.0, 1, xs)


@pytest.fixture(scope="module")
def coarse():
    return bump_history(9)


@pytest.fixture(scope="module")
def medium():
    return bump_history(17)


@pytest.fixture(scope="module")
def fine():
    return bump_history(65)


def flat_mesh(rows: int, cols: int, valid=None) -> SurfaceMesh:
    x = np.linspace(0.0, 1.0, cols)
    t = np.linspace(0.0, 1.0, rows)
    X, T = np.meshgrid(x, t)
    positions = np.stack([X, T, np.zeros_like(X)], axis=-1)
    frames = np.broadcast_to(np.eye(3), (rows, cols, 3, 3)).copy()
    if valid is None:
        valid = np.ones((rows, cols), dtype=bool)
    return SurfaceMesh(x=x, t=t, positions=positions, frames=frames, valid=valid)


class TestTransport:

    def test_seed_and_shape(self, coarse):
        jets, coeffs = coarse
        mesh = integrate_frame(jets, coeffs)
        assert mesh.shape == (5, 5)
        assert mesh.positions.shape == (5, 5, 3)
        np.testing.assert_array_equal(mesh.positions[0, 0], np.zeros(3))
        np.testing.assert_array_equal(mesh.frames[0, 0], np.eye(3))
        assert mesh.valid.all()

    def test_single_sample(self):
        jets, coeffs = bump_history(1)
        mesh = integrate_frame(jets, coeffs)
        assert mesh.shape == (1, 1)
        np.testing.assert_array_equal(mesh.positions[0, 0], np.zeros(3))
        np.testing.assert_array_equal(mesh.frames[0, 0], np.eye(3))

    def test_even_sample_count(self):
        jets, coeffs = bump_history(8)
        with pytest.raises(ParameterError):
            integrate_frame(jets, coeffs)

    def test_frames_stay_orthonormal(self, fine):
        jets, coeffs = fine
        mesh = integrate_frame(jets, coeffs, ortho_interval=4)
        assert mesh.ortho_drift <= settings.ortho_tol
        gram = mesh.frames @ np.swapaxes(mesh.frames, -1, -2)
        assert np.max(np.abs(gram - np.eye(3))) <= settings.ortho_tol

    def test_thread_count_does_not_change_result(self, coarse):
        jets, coeffs = coarse
        one = integrate_frame(jets, coeffs, threads=1)
        many = integrate_frame(jets, coeffs, threads=3)
        np.testing.assert_allclose(one.positions, many.positions, atol=1e-14)

    def test_commutator_converges(self, coarse, medium):
        e_coarse = commutator_error(*coarse)
        e_medium = commutator_error(*medium)
        assert e_medium <= 0.3 * e_coarse + 1e-12

    def test_transport_path_order(self, coarse):
        with pytest.raises(ParameterError):
            transport_path(*coarse, order="yx")

    def test_gauss_guard(self, coarse, monkeypatch):
        monkeypatch.setattr(settings, "gauss_tol", -1.0)
        with pytest.raises(GuardStop) as info:
            integrate_frame(*coarse)
        assert info.value.reason == "gauss_residual"

    def test_codazzi_guard(self, coarse, monkeypatch):
        monkeypatch.setattr(settings, "codazzi_tol", -1.0)
        with pytest.raises(GuardStop) as info:
            integrate_frame(*coarse)
        assert info.value.reason == "codazzi_residual"

    def test_masked_region(self, coarse):
        jets, coeffs = coarse
        mesh = integrate_frame(jets, coeffs, mask_eps=1.0)
        assert mesh.valid.any()
        assert not mesh.valid.all()
        assert not mesh.valid[0, 0]


class TestDiagnostics:

    def test_fine_surface(self, fine):
        jets, coeffs = fine
        mesh = integrate_frame(jets, coeffs)
        diagnostics = mesh_diagnostics(mesh, jets, coeffs)
        assert diagnostics.status == "ok", diagnostics.report.failed()
        assert -1.05 <= diagnostics.curvature_min <= diagnostics.curvature_max <= -0.95
        assert diagnostics.curvature_mean == pytest.approx(-1.0, abs=0.02)
        assert diagnostics.metric_mismatch <= 0.01
        assert diagnostics.components == 1
        assert diagnostics.faces == 2 * 32 * 32

    def test_everything_masked(self, coarse):
        jets, coeffs = coarse
        mesh = integrate_frame(jets, coeffs, mask_eps=1e9)
        diagnostics = mesh_diagnostics(mesh, jets, coeffs)
        assert diagnostics.status == "degenerate, no faces"
        assert diagnostics.faces == 0
        assert diagnostics.masked_vertices == 25


class TestTopology:

    def test_two_by_two(self):
        faces = mesh_faces(np.ones((2, 2), dtype=bool))
        assert faces == [((0, 0), (0, 1), (1, 1)), ((0, 0), (1, 1), (1, 0))]

    def test_quad_mask(self):
        valid = np.ones((3, 3), dtype=bool)
        valid[1, 1] = False
        assert not quad_mask(valid).any()
        assert quad_mask(np.ones((1, 4), dtype=bool)).shape == (0, 3)

    def test_components(self):
        valid = np.ones((3, 5), dtype=bool)
        valid[:, 2] = False
        assert component_count(valid) == 2
        assert component_count(np.ones((3, 5), dtype=bool)) == 1
        assert component_count(np.zeros((3, 5), dtype=bool)) == 0

    def test_flat_curvature(self):
        K, interior = discrete_curvature(flat_mesh(3, 3))
        assert interior.sum() == 1
        assert abs(K[1, 1]) <= 1e-12
        assert np.isnan(K[0, 0])


class TestObj:

    def test_two_by_two(self, tmp_path):
        path = export_obj(flat_mesh(2, 2), tmp_path / "quad.obj")
        vertices, faces = read_obj(path)
        assert vertices.shape == (4, 3)
        assert faces.tolist() == [[1, 2, 4], [1, 4, 3]]

    def test_round_trip(self, tmp_path, coarse):
        mesh = integrate_frame(*coarse)
        first = export_obj(mesh, tmp_path / "first.obj")
        second = export_obj(mesh, tmp_path / "second.obj")
        assert first.read_text() == second.read_text()
        vertices, faces = read_obj(first)
        np.testing.assert_allclose(vertices, mesh.positions.reshape(-1, 3), rtol=1e-8, atol=1e-9)
        assert len(faces) == 2 * 4 * 4

    def test_masked_vertices_are_skipped(self, tmp_path):
        valid = np.ones((3, 3), dtype=bool)
        valid[2, 2] = False
        vertices, faces = read_obj(export_obj(flat_mesh(3, 3, valid), tmp_path / "masked.obj"))
        assert vertices.shape == (8, 3)
        assert len(faces) == 6
        assert faces.max() <= 8

    def test_nothing_to_export(self, tmp_path):
        with pytest.raises(ParameterError):
            export_obj(flat_mesh(2, 2, np.zeros((2, 2), dtype=bool)), tmp_path / "empty.obj")

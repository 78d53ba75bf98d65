"""
Tests for the pss command-line runner
"""

import json
from pathlib import Path

import pandas as pd
import pytest

from pss_lab.cli.main import build_parser, main
from pss_lab.models.schemas import RunConfig

CONFIGS = Path(__file__).parent.parent / "configs"

BUMP_CONFIG = """
n = 64
mu = 0.0
C_strip = 5.0
beta = 1.0

[[initial]]
mode = 0
amplitude = 1.0
phase = 1.5707963267948966

[[initial]]
mode = 1
amplitude = 0.5
"""


def read_coefficients(path):
    """Split the commented JSON header from the CSV body"""
    lines = path.read_text(encoding="utf-8").splitlines()
    header = json.loads("\n".join(line[2:] for line in lines if line.startswith("# ")))
    return header, pd.read_csv(path, comment="#")


class TestParser:

    def test_commands(self):
        args = build_parser().parse_args(["immerse", "--out", "c.csv", "--sign", "-"])
        assert args.command == "immerse"
        assert args.sign == -1

    def test_missing_command(self):
        assert main([]) == 2

    def test_bad_sign(self):
        assert main(["immerse", "--out", "c.csv", "--sign", "x"]) == 2

    def test_version(self):
        assert main(["--version"]) == 0


class TestVerify:

    def test_report(self, tmp_path):
        report_path = tmp_path / "report.json"
        assert main(["verify", "--kmax", "2", "--report", str(report_path)]) == 0
        report = json.loads(report_path.read_text())
        assert report["suite"] == "verify"
        assert report["passed"] is True
        assert any(check["anchor"] == "riccati-integrability" for check in report["checks"])

    def test_kmax_too_small(self):
        assert main(["verify", "--kmax", "1"]) == 2


class TestSolve:

    def test_snapshots(self, tmp_path):
        out = tmp_path / "run"
        assert main(["solve", "--n", "64", "--t-end", "0.2", "--snapshots", "3", "--out", str(out)]) == 0
        metadata = json.loads((out / "run.json").read_text())
        assert [record["path"] for record in metadata["snapshots"]] == [
            "snapshot_000.csv", "snapshot_001.csv", "snapshot_002.csv",
        ]
        assert metadata["snapshots"][-1]["t"] == pytest.approx(0.2)
        assert metadata["report"]["passed"] is True
        frame = pd.read_csv(out / "snapshot_002.csv")
        assert list(frame.columns) == ["x", "u", "u_x", "u_xx", "u_t"]
        assert len(frame) == 64

    def test_forced_run(self, tmp_path):
        out = tmp_path / "forced"
        assert main(["solve", "--n", "64", "--t-end", "0.2", "--snapshots", "2", "--forcing", "--out", str(out)]) == 0
        metadata = json.loads((out / "run.json").read_text())
        assert metadata["forcing"] is True
        names = [check["name"] for check in metadata["report"]["checks"]]
        assert names == ["manufactured-error"]

    def test_forcing_needs_two_pi(self, tmp_path):
        code = main(["solve", "--n", "64", "--length", "5.0", "--forcing", "--out", str(tmp_path / "bad")])
        assert code == 2

    def test_invalid_grid(self, tmp_path):
        assert main(["solve", "--n", "100", "--out", str(tmp_path / "bad")]) == 2

    def test_missing_config(self, tmp_path):
        assert main(["solve", "--config", str(tmp_path / "absent.toml"), "--out", str(tmp_path / "x")]) == 2


class TestMonitor:

    def test_residual_columns(self, tmp_path):
        out = tmp_path / "monitor"
        code = main(["monitor", "--n", "64", "--t-end", "0.2", "--snapshots", "2",
                     "--family", "neg", "--k", "2", "3", "--out", str(out)])
        assert code == 0
        frame = pd.read_csv(out / "snapshot_001.csv")
        assert {"res_neg_2", "res_neg_3"} <= set(frame.columns)
        metadata = json.loads((out / "run.json").read_text())
        residuals = metadata["snapshots"][1]["residuals"]
        assert [item["k"] for item in residuals] == [2, 3]
        assert all(item["sup_norm"] <= 1e-6 for item in residuals)

    def test_needs_selection(self, tmp_path):
        assert main(["monitor", "--n", "64", "--out", str(tmp_path / "m")]) == 2

    def test_family_range(self, tmp_path):
        assert main(["monitor", "--n", "64", "--family", "neg", "--k", "1", "--out", str(tmp_path / "m")]) == 2

    def test_reference_config_passes(self, tmp_path):
        out = tmp_path / "reference"
        assert main(["monitor", "--config", str(CONFIGS / "reference.toml"), "--out", str(out)]) == 0
        metadata = json.loads((out / "run.json").read_text())
        final = metadata["snapshots"][-1]
        assert final["t"] == pytest.approx(1.0)
        assert final["flow_identity"] <= 1e-11
        assert all(item["sup_norm"] <= 1e-6 for item in final["residuals"])

    def test_reference_and_surface_configs_load(self):
        reference = RunConfig.from_toml(CONFIGS / "reference.toml")
        assert (reference.n, reference.t_end) == (256, 1.0)
        assert [(mode.mode, mode.amplitude) for mode in reference.initial] == [(1, 0.05)]
        surface = RunConfig.from_toml(CONFIGS / "surface.toml")
        assert (surface.surface_nx, surface.surface_nt) == (65, 65)
        assert not surface.monitor


class TestImmerse:

    def test_strip(self, tmp_path):
        out = tmp_path / "strip.csv"
        assert main(["immerse", "--mu", "0", "--C", "5", "--beta", "1", "--n", "41", "--out", str(out)]) == 0
        header, frame = read_coefficients(out)
        assert header["passed"] is True
        assert len(frame) == 41
        assert (frame["gauss"] + 1.0).abs().max() <= 1e-10

    def test_ode(self, tmp_path):
        out = tmp_path / "ode.csv"
        assert main(["immerse", "--mu", "1", "--beta", "1", "--b0", "1.5", "--out", str(out)]) == 0
        header, frame = read_coefficients(out)
        assert header["stop_reason"] == "completed"
        assert "delta" in frame.columns
        assert frame["H"].min() > 0

    def test_impossible_beta(self, tmp_path):
        assert main(["immerse", "--mu", "1", "--beta", "0", "--out", str(tmp_path / "c.csv")]) == 2

    def test_early_stop(self, tmp_path):
        out = tmp_path / "stop.csv"
        code = main(["immerse", "--mu", "1", "--beta", "1", "--b0", "0.9", "--span", "-0.5", "--out", str(out)])
        assert code == 3
        header, _ = read_coefficients(out)
        assert header["stop_reason"] == "delta_degenerate"


class TestSurface:

    def test_export(self, tmp_path, write_config):
        config = write_config(BUMP_CONFIG)
        out = tmp_path / "surface.obj"
        assert main(["surface", "--config", str(config), "--out", str(out)]) == 0
        assert out.read_text().startswith("v 0 0 0\n")
        diagnostics = json.loads(out.with_suffix(".diagnostics.json").read_text())
        assert diagnostics["status"] == "ok"
        assert diagnostics["faces"] == 2 * 32 * 32

    def test_fully_masked(self, tmp_path, write_config):
        masked = "genericity_eps = 1e9\nsurface_nx = 9\nsurface_nt = 9\n"
        config = write_config(masked + BUMP_CONFIG, name="masked.toml")
        out = tmp_path / "masked.obj"
        assert main(["surface", "--config", str(config), "--out", str(out)]) == 3
        assert not out.exists()
        diagnostics = json.loads(out.with_suffix(".diagnostics.json").read_text())
        assert diagnostics["status"] == "degenerate, no faces"

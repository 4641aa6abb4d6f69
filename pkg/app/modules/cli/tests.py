"""
Tests para el módulo cli

Cubre:
- Parseo de la línea de comandos a RunConfig y precedencia del archivo --config
- Códigos de salida: uso (2), archivos de esquema (3), ruptura (1)
- make-example y lectura de sus archivos
- Ejecución de moment, balance, stability, chow-weight y continuity
- Propagación de --threads y RANK_TOL, traza parcial cuando continuity rechaza D
"""

import json

import numpy as np
import pytest
from typer.testing import CliRunner

from app.common.exceptions import SchemeFileError, UsageError
from app.core.config import settings
from app.main import main
from app.modules.cli.commands import app, parse_config
from app.modules.cli.schemas import Command
from app.modules.integration.schemas import PointScheme
from app.modules.moment_map.schemas import LambdaConvention
from app.modules.reports import service as reports_service
from app.modules.reports.service import read_scheme_file, render_scheme_file, scheme_file_for, write_scheme_file

runner = CliRunner()


# ===== FIXTURES =====

@pytest.fixture
def roots_file(tmp_path, roots_of_unity):
    return write_scheme_file(tmp_path / "E2.json", scheme_file_for(roots_of_unity(2)))


@pytest.fixture
def double_point_file(tmp_path):
    D = PointScheme(points=[[1, 0], [0, 1]], multiplicities=[2, 1])
    return write_scheme_file(tmp_path / "double.json", scheme_file_for(D))


@pytest.fixture
def conic_file(tmp_path, conic):
    r = np.sqrt(2)
    aux = PointScheme(points=[[1, 0, 0], [0, 0, 1], [1, r, 1], [1, -r, 1]])
    return write_scheme_file(tmp_path / "conic.json", scheme_file_for(conic, aux=aux))


@pytest.fixture
def collinear_file(tmp_path):
    # three points off a line by 1e-6: stable only under a tight rank threshold
    D = PointScheme(points=[[1, 0, 0], [0, 1, 0], [1, 1, 1e-6], [0, 0, 1]])
    return write_scheme_file(tmp_path / "near_line.json", scheme_file_for(D))


@pytest.fixture
def unstable_file(tmp_path):
    D = PointScheme(points=[[1, 0, 0], [0, 1, 0], [1, 1, 0], [0, 0, 1]])
    return write_scheme_file(tmp_path / "unstable.json", scheme_file_for(D))


def without_timestamp(text: str) -> dict:
    payload = json.loads(text)
    payload.pop("generated_at")
    return payload


# ===== TESTS: PARSEO =====

class TestParseConfig:
    """Línea de comandos a RunConfig"""

    def test_moment(self, roots_file):
        config = parse_config(["moment", "--input", str(roots_file), "--aux", str(roots_file), "--t", "0.5"])
        assert config.command == Command.MOMENT
        assert config.t == 0.5
        assert config.aux == roots_file
        assert config.grid().radial_order == settings.RADIAL_ORDER

    def test_continuity_schedule_flags(self, roots_file):
        config = parse_config(
            ["continuity", "--input", str(roots_file), "--t-start", "50", "--gamma", "0.7", "--convention", "rescaled_aux"]
        )
        assert config.schedule.t_start == 50.0
        assert config.schedule.gamma == 0.7
        assert config.convention == LambdaConvention.RESCALED_AUX
        assert config.matrices

    def test_quadrature_flags_override(self, roots_file):
        config = parse_config(["balance", "--input", str(roots_file), "--radial-order", "12"])
        grid = config.grid()
        assert grid.radial_order == 12
        assert grid.angular_order == settings.ANGULAR_ORDER

    def test_weights_and_s_values(self, roots_file):
        config = parse_config(
            ["chow-weight", "--input", str(roots_file), "--weights=1,0,-1", "--weights=2,-1,-1", "--s-values", "0.1,0.05"]
        )
        assert [w.weights for w in config.weights] == [[1.0, 0.0, -1.0], [2.0, -1.0, -1.0]]
        assert config.s_values == [0.1, 0.05]

    def test_missing_input(self):
        with pytest.raises(UsageError) as exc_info:
            parse_config(["moment"])
        assert exc_info.value.exit_code == 2

    def test_unknown_flag(self, roots_file):
        with pytest.raises(UsageError):
            parse_config(["moment", "--input", str(roots_file), "--colour", "red"])

    def test_bad_value(self, roots_file):
        with pytest.raises(UsageError):
            parse_config(["continuity", "--input", str(roots_file), "--gamma", "1.5"])

    def test_bad_weights(self, roots_file):
        with pytest.raises(UsageError):
            parse_config(["chow-weight", "--input", str(roots_file), "--weights", "1,x"])

    def test_nonexistent_input(self, tmp_path):
        with pytest.raises(SchemeFileError) as exc_info:
            parse_config(["stability", "--input", str(tmp_path / "absent.json")])
        assert exc_info.value.exit_code == 3


class TestConfigFile:
    """Precedencia: flags > --config > entorno"""

    def test_file_overrides_settings(self, tmp_path, roots_file):
        config_path = tmp_path / "run.yaml"
        config_path.write_text("gamma: 0.5\nresidual_tol: 1.0e-7\nradial_order: 20\n")
        config = parse_config(["continuity", "--input", str(roots_file), "--config", str(config_path)])
        assert config.schedule.gamma == 0.5
        assert config.solver.residual_tol == 1e-7
        assert config.grid().radial_order == 20

    def test_flags_override_file(self, tmp_path, roots_file):
        config_path = tmp_path / "run.json"
        config_path.write_text(json.dumps({"GAMMA": 0.5}))
        config = parse_config(["continuity", "--input", str(roots_file), "--config", str(config_path), "--gamma", "0.9"])
        assert config.schedule.gamma == 0.9

    def test_unknown_key(self, tmp_path, roots_file):
        config_path = tmp_path / "run.yaml"
        config_path.write_text("colour: red\n")
        with pytest.raises(UsageError):
            parse_config(["moment", "--input", str(roots_file), "--config", str(config_path)])

    def test_invalid_setting(self, tmp_path, roots_file):
        config_path = tmp_path / "run.yaml"
        config_path.write_text("gamma: 2.0\n")
        with pytest.raises(UsageError):
            parse_config(["moment", "--input", str(roots_file), "--config", str(config_path)])

    def test_rank_tol_from_file(self, tmp_path, roots_file):
        config_path = tmp_path / "run.yaml"
        config_path.write_text("rank_tol: 1.0e-3\n")
        config = parse_config(["stability", "--input", str(roots_file), "--config", str(config_path)])
        assert config.rank_tol == 1e-3


# ===== TESTS: CÓDIGOS DE SALIDA =====

class TestExitCodes:
    """Códigos de salida del proceso"""

    def test_missing_input_is_usage_error(self):
        result = runner.invoke(app, ["moment"])
        assert result.exit_code == 2

    def test_unknown_flag_is_usage_error(self, roots_file):
        result = runner.invoke(app, ["moment", "--input", str(roots_file), "--bogus"])
        assert result.exit_code == 2

    def test_nonexistent_input(self, tmp_path):
        result = runner.invoke(app, ["moment", "--input", str(tmp_path / "absent.json")])
        assert result.exit_code == 3

    def test_corrupted_input(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"n": 2, "type": "points", "points": [[1, 0]]')
        result = runner.invoke(app, ["stability", "--input", str(path)])
        assert result.exit_code == 3

    def test_t_without_aux(self, roots_file):
        result = runner.invoke(app, ["moment", "--input", str(roots_file), "--t", "1.0"])
        assert result.exit_code == 2

    def test_weight_size_mismatch(self, roots_file):
        result = runner.invoke(app, ["chow-weight", "--input", str(roots_file), "--weights=1,-1"])
        assert result.exit_code == 2

    def test_aux_dimension_mismatch(self, tmp_path, roots_file, roots_of_unity):
        line_aux = write_scheme_file(tmp_path / "E1.json", scheme_file_for(roots_of_unity(1)))
        for command in (["moment", "--t", "1.0"], ["continuity"]):
            result = runner.invoke(app, [*command, "--input", str(roots_file), "--aux", str(line_aux)])
            assert result.exit_code == 2

    def test_main_returns_code(self, tmp_path):
        assert main(["stability", "--input", str(tmp_path / "absent.json")]) == 3


# ===== TESTS: COMANDOS =====

class TestMakeExample:
    """Archivos de referencia"""

    def test_writes_readable_files(self, tmp_path):
        out = tmp_path / "examples"
        result = runner.invoke(app, ["make-example", "--n", "2", "--out", str(out)])
        assert result.exit_code == 0
        names = sorted(path.name for path in out.iterdir())
        assert names == [
            "heavy_point_n2.json",
            "hyperplane_unstable_n2.json",
            "rational_normal_curve_d2.json",
            "roots_of_unity_n2.json",
        ]
        for path in out.iterdir():
            assert render_scheme_file(read_scheme_file(path)) == path.read_text()

    def test_curve_example_carries_aux(self, tmp_path):
        runner.invoke(app, ["make-example", "--n", "3", "--out", str(tmp_path)])
        loaded = read_scheme_file(tmp_path / "rational_normal_curve_d3.json")
        assert loaded.type == "curve"
        assert loaded.aux_scheme().mass == 5

    def test_unstable_examples(self, tmp_path):
        runner.invoke(app, ["make-example", "--n", "2", "--out", str(tmp_path)])
        for name in ("hyperplane_unstable_n2.json", "heavy_point_n2.json"):
            result = runner.invoke(app, ["stability", "--input", str(tmp_path / name)])
            assert result.exit_code == 0
            assert json.loads(result.stdout)["counting"]["status"] == "unstable"


class TestCommands:
    """Ejecución de extremo a extremo"""

    def test_moment_roots_of_unity(self, roots_file):
        result = runner.invoke(app, ["moment", "--input", str(roots_file)])
        assert result.exit_code == 0
        payload = json.loads(result.stdout)
        assert payload["command"] == "moment"
        assert payload["frobenius"] < 1e-12
        assert payload["balanced"]

    def test_moment_is_deterministic(self, tmp_path, roots_file):
        first, second = tmp_path / "a.json", tmp_path / "b.json"
        for out in (first, second):
            result = runner.invoke(app, ["moment", "--input", str(roots_file), "--aux", str(roots_file), "--t", "0.5", "--out", str(out)])
            assert result.exit_code == 0
        assert without_timestamp(first.read_text()) == without_timestamp(second.read_text())

    def test_balance_converges(self, roots_file):
        result = runner.invoke(app, ["balance", "--input", str(roots_file)])
        assert result.exit_code == 0
        assert json.loads(result.stdout)["status"] == "converged"

    def test_balance_double_point_fails(self, double_point_file):
        result = runner.invoke(app, ["balance", "--input", str(double_point_file), "--max-newton-iters", "10"])
        assert result.exit_code == 1
        assert json.loads(result.stdout)["status"] != "converged"

    def test_stability(self, double_point_file):
        result = runner.invoke(app, ["stability", "--input", str(double_point_file), "--samples", "8"])
        assert result.exit_code == 0
        payload = json.loads(result.stdout)
        assert payload["counting"]["status"] == "unstable"
        assert payload["chow"]["status"] == "unstable"

    def test_stability_rejects_curves(self, conic_file):
        result = runner.invoke(app, ["stability", "--input", str(conic_file)])
        assert result.exit_code == 2

    def test_chow_weight(self, tmp_path, roots_of_unity):
        path = write_scheme_file(tmp_path / "E1.json", scheme_file_for(roots_of_unity(1)))
        result = runner.invoke(app, ["chow-weight", "--input", str(path), "--weights=1,-1"])
        assert result.exit_code == 0
        (row,) = json.loads(result.stdout)["rows"]
        assert row["weight"] == pytest.approx(3.0)

    def test_continuity_conic(self, tmp_path, conic_file):
        out = tmp_path / "trace.csv"
        result = runner.invoke(
            app,
            [
                "continuity",
                "--input", str(conic_file),
                "--t-start", "50",
                "--residual-tol", "5e-10",
                "--radial-order", "32",
                "--angular-order", "64",
                "--out", str(out),
            ],
        )
        assert result.exit_code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "t,residual,iters,min_eig,cond_g,status"
        assert float(lines[-1].split(",")[0]) == 0.0
        payload = json.loads(out.with_suffix(".json").read_text())
        assert payload["status"] == "completed"
        assert payload["records"][-1]["t"] == 0.0
        assert payload["records"][-1]["residual"] < 1e-8
        assert payload["records"][-1]["g"] is not None

    def test_continuity_needs_aux(self, roots_file):
        result = runner.invoke(app, ["continuity", "--input", str(roots_file)])
        assert result.exit_code == 2

    def test_continuity_refusal_writes_trace(self, tmp_path, unstable_file):
        out = tmp_path / "trace.csv"
        result = runner.invoke(
            app, ["continuity", "--input", str(unstable_file), "--aux", str(unstable_file), "--out", str(out)]
        )
        assert result.exit_code == 1
        assert out.read_text().splitlines() == ["t,residual,iters,min_eig,cond_g,status"]
        payload = json.loads(out.with_suffix(".json").read_text())
        assert payload["status"] == "refused"
        assert payload["records"] == []
        assert payload["diagnosis"]["status"] == "unstable"
        assert "unstable" in payload["failure"]


class TestRunSettings:
    """--threads y RANK_TOL llegan a cada comando"""

    def test_rank_tol_changes_stability_verdict(self, tmp_path, collinear_file):
        result = runner.invoke(app, ["stability", "--input", str(collinear_file), "--samples", "4"])
        assert json.loads(result.stdout)["counting"]["status"] == "stable"
        config_path = tmp_path / "loose.yaml"
        config_path.write_text("rank_tol: 1.0e-3\n")
        result = runner.invoke(
            app, ["stability", "--input", str(collinear_file), "--samples", "4", "--config", str(config_path)]
        )
        assert result.exit_code == 0
        assert json.loads(result.stdout)["counting"]["status"] == "unstable"

    def test_rank_tol_reaches_continuity(self, tmp_path, collinear_file):
        config_path = tmp_path / "loose.yaml"
        config_path.write_text("rank_tol: 1.0e-3\n")
        out = tmp_path / "trace.csv"
        result = runner.invoke(
            app,
            [
                "continuity",
                "--input", str(collinear_file),
                "--aux", str(collinear_file),
                "--config", str(config_path),
                "--out", str(out),
            ],
        )
        assert result.exit_code == 1
        assert json.loads(out.with_suffix(".json").read_text())["status"] == "refused"

    def test_threads_reach_every_command(self, monkeypatch, tmp_path, roots_file):
        seen = {}

        def spy(name, target):
            def wrapped(*args, **kwargs):
                seen[name] = (kwargs.get("n_jobs"), kwargs.get("rel_tol"))
                return target(*args, **kwargs)
            monkeypatch.setattr(reports_service, name, wrapped)

        for name in ("moment_report", "stability_report", "chow_weight_report"):
            spy(name, getattr(reports_service, name))
        config_path = tmp_path / "run.yaml"
        config_path.write_text("rank_tol: 1.0e-8\n")
        common = ["--input", str(roots_file), "--threads", "1", "--config", str(config_path)]
        assert runner.invoke(app, ["moment", *common]).exit_code == 0
        assert runner.invoke(app, ["stability", *common, "--samples", "4"]).exit_code == 0
        assert runner.invoke(app, ["chow-weight", *common, "--weights=1,0,-1"]).exit_code == 0
        assert seen["moment_report"][0] == 1
        assert seen["stability_report"] == (1, 1e-8)
        assert seen["chow_weight_report"] == (1, 1e-8)

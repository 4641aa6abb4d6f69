"""
Tests para el módulo reports

Cubre:
- Codificación JSON con pares [re, im]
- Exportación CSV con mapeo de encabezados
- Lectura y escritura de archivos de esquema, errores de entrada
- Reportes de momento, estabilidad, pesos de Chow y trazas
- ReportService: contexto de ejecución compartido por todos los reportes
"""

import json

import numpy as np
import pytest

from app.common.exceptions import SchemeFileError
from app.modules.integration.schemas import PointScheme
from app.modules.reports.schemas import SchemeFile
from app.modules.reports.service import (
    ReportService,
    chow_weight_report,
    moment_report,
    read_scheme_file,
    render_report,
    render_scheme_file,
    scheme_file_for,
    stability_report,
    trace_csv,
    trace_report,
    write_scheme_file,
)
from app.modules.reports.utils import complex_array, complex_pair, dump_json, jsonable, render_csv
from app.modules.solver.schemas import ContinuityRecord, ContinuityStatus, ContinuityTrace, SolveStatus
from app.modules.stability.schemas import StabilityStatus, WeightVector


# ===== FIXTURES =====

@pytest.fixture
def small_trace():
    common = dict(g=np.eye(2), entry_residual=1e-3, lambda_t=1.5, cond_g=1.0)
    return ContinuityTrace(
        records=[
            ContinuityRecord(t=1.0, residual=1e-12, iterations=2, min_eigenvalue=0.5, status=SolveStatus.CONVERGED, **common),
            ContinuityRecord(t=0.5, residual=1e-3, iterations=15, min_eigenvalue=None, status=SolveStatus.STALLED, **common),
        ],
        status=ContinuityStatus.BREAKDOWN,
        tolerance=1e-9,
        t_start=1.0,
        t_end=0.0,
    )


def without_timestamp(text: str) -> dict:
    payload = json.loads(text)
    payload.pop("generated_at")
    return payload


# ===== TESTS: CODIFICACIÓN =====

class TestEncoding:
    """JSON determinista con números complejos como pares"""

    def test_complex_pair_folds_negative_zero(self):
        assert complex_pair(complex(-0.0, -0.0)) == [0.0, 0.0]
        assert json.dumps(complex_pair(complex(-0.0, 2.5))) == "[0.0, 2.5]"

    def test_complex_array_shape(self):
        encoded = complex_array(np.array([[1 + 2j, 0], [0, 3j]]))
        assert encoded == [[[1.0, 2.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 3.0]]]

    def test_jsonable(self):
        payload = jsonable({"b": np.float64("nan"), "a": StabilityStatus.STABLE, "m": np.eye(2), "z": 1j})
        assert list(payload) == ["b", "a", "m", "z"]
        assert payload["b"] is None
        assert payload["a"] == "stable"
        assert payload["m"] == [[1.0, 0.0], [0.0, 1.0]]
        assert payload["z"] == [0.0, 1.0]

    def test_dump_json_is_indented(self):
        assert dump_json({"x": 1}) == '{\n  "x": 1\n}\n'


class TestCsv:
    """CSV con encabezados mapeados"""

    def test_header_mapping_and_order(self):
        rows = [{"b": 2.0, "a": "x", "ignored": 1}]
        text = render_csv(rows, {"a": "first", "b": "second"})
        assert text == "first,second\nx,2.0\n"

    def test_empty_rows_keep_header(self):
        assert render_csv([], {"t": "t", "status": "status"}) == "t,status\n"

    def test_trace_columns(self, small_trace):
        lines = trace_csv(small_trace).splitlines()
        assert lines[0] == "t,residual,iters,min_eig,cond_g,status"
        assert lines[1].endswith(",converged")
        # missing eigenvalue is an empty cell
        assert lines[2].split(",")[3] == ""


# ===== TESTS: ARCHIVOS DE ESQUEMA =====

class TestSchemeFiles:
    """Lectura, escritura y errores de archivos de esquema"""

    def test_round_trip_points(self, tmp_path, roots_of_unity):
        path = write_scheme_file(tmp_path / "E.json", scheme_file_for(roots_of_unity(2)))
        first = path.read_text()
        again = render_scheme_file(read_scheme_file(path))
        assert again == first
        scheme = read_scheme_file(path).to_scheme()
        assert np.allclose(scheme.coordinate_matrix(), roots_of_unity(2).coordinate_matrix(), atol=0)

    def test_round_trip_curve_with_aux(self, tmp_path, conic, grid):
        aux = PointScheme(points=[[1, 0, 0], [0, 0, 1], [1, np.sqrt(2), 1], [1, -np.sqrt(2), 1]])
        path = write_scheme_file(tmp_path / "conic.json", scheme_file_for(conic, aux=aux, quadrature=grid))
        loaded = read_scheme_file(path)
        assert render_scheme_file(loaded) == path.read_text()
        assert loaded.aux_scheme().mass == 4
        assert loaded.quadrature.grid().radial_order == grid.radial_order
        assert np.array_equal(loaded.to_scheme().components, conic.components)

    def test_plain_real_coordinates_accepted(self, tmp_path):
        path = tmp_path / "plain.json"
        path.write_text(json.dumps({"n": 1, "type": "points", "points": [[1, 0], [0, 1]], "multiplicities": [2, 1]}))
        assert read_scheme_file(path).to_scheme().mass == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(SchemeFileError) as exc_info:
            read_scheme_file(tmp_path / "absent.json")
        assert exc_info.value.exit_code == 3

    @pytest.mark.parametrize(
        "content",
        [
            "{not json",
            json.dumps({"n": 1, "type": "points"}),
            json.dumps({"n": 2, "type": "points", "points": [[1, 0], [0, 1]]}),
            json.dumps({"n": 1, "type": "points", "points": [[0, 0]]}),
            json.dumps({"n": 1, "type": "curve", "degree": 2, "components": [[1, 1, 0], [0, 1, 1]]}),
            json.dumps({"n": 1, "type": "points", "points": [[1, 0]], "colour": "red"}),
        ],
    )
    def test_corrupted_files(self, tmp_path, content):
        path = tmp_path / "bad.json"
        path.write_text(content)
        with pytest.raises(SchemeFileError) as exc_info:
            read_scheme_file(path)
        assert exc_info.value.exit_code == 3

    def test_aux_must_be_points(self, conic):
        curve_file = scheme_file_for(conic).model_dump(exclude_none=True)
        with pytest.raises(ValueError):
            SchemeFile.model_validate({**curve_file, "aux": curve_file})


# ===== TESTS: REPORTES =====

class TestReports:
    """Reportes JSON"""

    def test_moment_report_roots_of_unity(self, grid, roots_of_unity):
        report = moment_report(roots_of_unity(2), grid)
        assert report.frobenius < 1e-12
        assert report.balanced
        assert report.volume == pytest.approx(4.0)
        assert report.moment[0][0][0] == pytest.approx(4 / 3)

    def test_reports_are_deterministic(self, grid, conic):
        first = render_report(moment_report(conic, grid, parameters={"seed": 3}))
        second = render_report(moment_report(conic, grid, parameters={"seed": 3}))
        assert without_timestamp(first) == without_timestamp(second)
        assert json.loads(first)["command"] == "moment"

    def test_stability_report_witness(self):
        D = PointScheme(points=[[1, 0], [0, 1]], multiplicities=[2, 1])
        report = stability_report(D, samples=8)
        assert report.counting.status == "unstable"
        assert report.counting.witness["indices"] == [0]
        assert report.chow.status == "unstable"
        assert report.counting.margin == pytest.approx(-0.5)

    def test_chow_weight_table_points(self, roots_of_unity):
        weights = [WeightVector(weights=[1, -1]), WeightVector(weights=[-2, 2])]
        report = chow_weight_report(roots_of_unity(1), weights)
        assert [row.weight for row in report.rows] == [pytest.approx(3.0), pytest.approx(6.0)]
        assert not any(row.fixed for row in report.rows)

    def test_chow_weight_table_curve(self, conic):
        report = chow_weight_report(conic, [WeightVector(weights=[1, 0, -1])], s_values=[0.2, 0.1, 0.05])
        (row,) = report.rows
        assert row.invariant
        assert abs(row.weight) < 1e-7

    def test_trace_report(self, small_trace):
        report = trace_report(small_trace)
        payload = json.loads(render_report(report))
        assert payload["status"] == "breakdown"
        assert payload["records"][0]["g"] == [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]
        assert payload["records"][1]["min_eigenvalue"] is None

    def test_refused_trace_report(self):
        trace = ContinuityTrace(
            records=[],
            status=ContinuityStatus.REFUSED,
            tolerance=1e-9,
            t_start=10.0,
            t_end=0.0,
            failure="Auxiliary points are unstable",
        )
        payload = json.loads(render_report(trace_report(trace)))
        assert payload["status"] == "refused"
        assert payload["records"] == []
        assert payload["failure"] == "Auxiliary points are unstable"
        assert trace_csv(trace).splitlines() == ["t,residual,iters,min_eig,cond_g,status"]


class TestReportService:
    """Contexto de ejecución compartido"""

    def test_rank_threshold_reaches_stability(self, grid):
        D = PointScheme(points=[[1, 0, 0], [0, 1, 0], [1, 1, 1e-6], [0, 0, 1]])
        assert ReportService(grid).stability(D, samples=4).counting.status == "stable"
        loose = ReportService(grid, rel_tol=1e-3, n_jobs=1)
        assert loose.stability(D, samples=4).counting.status == "unstable"

    def test_rank_threshold_reaches_chow_weights(self, grid):
        # the third point limits to [0:0:1] unless its 1e-6 entry counts as zero
        D = PointScheme(points=[[1, 0, 0], [0, 1, 0], [1, 1, 1e-6], [0, 0, 1]])
        weights = [WeightVector(weights=[1, 1, -2])]
        tight = ReportService(grid).chow_weight(D, weights).rows[0]
        loose = ReportService(grid, rel_tol=1e-3).chow_weight(D, weights).rows[0]
        assert tight.weight != loose.weight

    def test_parameters_echoed(self, grid, roots_of_unity):
        service = ReportService(grid, parameters={"seed": 3}, n_jobs=1)
        report = service.moment(roots_of_unity(2))
        assert report.parameters == {"seed": 3}
        assert report.balanced
        assert service.stability(roots_of_unity(2), samples=4).parameters == {"seed": 3}

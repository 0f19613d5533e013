"""
Tests for report serialization
"""

import io

import orjson
import pandas as pd

from analysis import GeometryAnalyzer
from reports import ExtensionSummary, ScanRow, scan_csv, to_json


def test_point_report_json(chart):
    report = GeometryAnalyzer(chart("sphere")).analyze([1.0, 0.3])
    payload = to_json(report)
    assert payload.endswith(b"\n")
    data = orjson.loads(payload)
    assert list(data) == list(type(report).model_fields)
    assert data["point"] == [1.0, 0.3]
    assert data["dims"] == [3, 3]
    assert data["cohomogeneity_singular"] is False
    assert set(data["residuals"]) == {"flatness", "parallelness"}
    assert len(data["singular_values"]) == 2


def test_scan_csv_keeps_integer_columns():
    rows = [
        ScanRow(point=[0.0, 1.0], status="degenerate", message="metric not positive definite"),
        ScanRow(
            point=[0.5, 1.0], cohomogeneity=0, cohomogeneity_singular=False, killing_dim=3, singer_invariant=0,
            orbit_dim=2, isotropy_dim=1, homogeneous=True, flatness=0.0, parallelness=0.25,
        ),
    ]
    text = scan_csv(rows, ["th", "ph"])
    lines = text.splitlines()
    assert lines[0] == (
        "th,ph,status,cohomogeneity,cohomogeneity_singular,killing_dim,singer_invariant,"
        "orbit_dim,isotropy_dim,homogeneous,flatness,parallelness,message"
    )
    assert lines[2] == "0.5,1,ok,0,False,3,0,2,1,True,0,0.25,"
    frame = pd.read_csv(io.StringIO(text))
    assert frame.loc[0, "status"] == "degenerate"
    assert pd.isna(frame.loc[0, "killing_dim"])
    assert pd.isna(frame.loc[0, "parallelness"])


def test_extension_summary_json():
    summary = ExtensionSummary(
        chart="bump.chart", base=[0.0, 0.0], element=0, stable_dim=1, grid="[-1,1]x[-1,1]:3x3",
        steps_per_cell=50, max_sym_residual=1e-9, max_tangency_residual=0.0, path_independence=2e-10,
        config={"steps": 100},
    )
    data = orjson.loads(to_json(summary))
    assert data["version"]
    assert data["max_sym_residual"] == 1e-9

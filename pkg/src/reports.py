"""
Report records and their JSON / CSV serialization
"""
import io
from typing import Any, Dict, List, Optional

import orjson
import pandas as pd
from pydantic import BaseModel, ConfigDict

from config import __version__

CSV_FLOAT_FORMAT = "%.17g"


class PointReport(BaseModel):
    """Everything computed at one point; field order is the JSON key order"""

    model_config = ConfigDict(frozen=True)

    chart: str
    point: List[float]
    invariants: Dict[str, float]
    dims: List[int]
    singer_invariant: int
    orbit_dim: int
    isotropy_dim: int
    killing_dim: int
    cohomogeneity: int
    cohomogeneity_singular: bool
    homogeneous: bool
    residuals: Dict[str, float]
    singular_values: List[List[float]]
    version: str = __version__
    config: Dict[str, Any]


class ScanRow(BaseModel):
    """Scalar fields of a point report plus a status for nodes that could not be analyzed"""

    point: List[float]
    status: str = "ok"  # ok | degenerate | outside | error
    cohomogeneity: Optional[int] = None
    cohomogeneity_singular: Optional[bool] = None
    killing_dim: Optional[int] = None
    singer_invariant: Optional[int] = None
    orbit_dim: Optional[int] = None
    isotropy_dim: Optional[int] = None
    homogeneous: Optional[bool] = None
    flatness: Optional[float] = None
    parallelness: Optional[float] = None
    message: str = ""


class ExtensionSummary(BaseModel):
    chart: str
    base: List[float]
    element: int
    stable_dim: int
    grid: str
    steps_per_cell: int
    max_sym_residual: float
    max_tangency_residual: float
    path_independence: float
    version: str = __version__
    config: Dict[str, Any]


def to_json(record: BaseModel) -> bytes:
    """Deterministic JSON: declaration-order keys, shortest round-trip floats, trailing newline"""
    return orjson.dumps(record.model_dump(), option=orjson.OPT_INDENT_2 | orjson.OPT_APPEND_NEWLINE)


def scan_frame(rows: List[ScanRow], coords: List[str]) -> pd.DataFrame:
    records = []
    for row in rows:
        record = dict(zip(coords, row.point))
        record.update(row.model_dump(exclude={"point"}))
        records.append(record)
    columns = list(coords) + [name for name in ScanRow.model_fields if name != "point"]
    return pd.DataFrame.from_records(records, columns=columns)


def scan_csv(rows: List[ScanRow], coords: List[str]) -> str:
    buffer = io.StringIO()
    frame = scan_frame(rows, coords)
    # nullable integer columns keep integer formatting next to missing values
    for name in ("cohomogeneity", "killing_dim", "singer_invariant", "orbit_dim", "isotropy_dim"):
        frame[name] = frame[name].astype("Int64")
    for name in ("cohomogeneity_singular", "homogeneous"):
        frame[name] = frame[name].astype("boolean")
    frame.to_csv(buffer, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return buffer.getvalue()

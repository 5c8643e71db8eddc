"""
Schemas for doubling traces: one row per α and the run summary.

The CSV column order is frozen; points are written as ';'-joined coordinates.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator

from shared.schemas.reports import to_jsonable

CSV_COLUMNS: tuple[str, ...] = (
    "alpha",
    "cloud_size",
    "mesh",
    "y0",
    "y0p",
    "p",
    "pp",
    "y",
    "yp",
    "x",
    "xp",
    "alpha_d2_0",
    "alpha_chain",
    "sup_lambda",
    "lambda_hat",
    "xi0_sandwich",
    "sandwich_bound",
    "displacement",
    "row_lhs",
    "row_rhs",
    "gap",
    "gap_bound",
    "m1",
    "m2",
    "jensen_candidate",
)

POINT_COLUMNS = frozenset({"y0", "y0p", "p", "pp", "y", "yp", "x", "xp"})


def _format(value: Any) -> str:
    if isinstance(value, list):
        return ";".join(repr(float(c)) for c in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


class TraceRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(..., gt=1.0, description="Doubling parameter α of this row")
    cloud_size: int = Field(..., ge=1, description="Points in the working cloud")
    mesh: float = Field(..., ge=0.0, description="Working cloud spacing")
    y0: list[float] = Field(..., description="First optimizer of Λ_α")
    y0p: list[float] = Field(..., description="Second optimizer of Λ_α")
    p: list[float] = Field(..., description="Accepted shift for the first copy")
    pp: list[float] = Field(..., description="Accepted shift for the second copy")
    y: list[float] = Field(..., description="Perturbed first optimizer")
    yp: list[float] = Field(..., description="Perturbed second optimizer")
    x: list[float] = Field(..., description="Sup-convolution optimizer at y")
    xp: list[float] = Field(..., description="Inf-convolution optimizer at yp")
    alpha_d2_0: float = Field(..., ge=0.0, description="α·d²(y0, y0p)")
    alpha_chain: float = Field(..., ge=0.0, description="α·(d(x,y)+d(y,yp)+d(yp,xp))²")
    sup_lambda: float
    lambda_hat: float = Field(..., description="Perturbed functional at (y, yp)")
    xi0_sandwich: float = Field(..., description="−ε₁Ξ₁⁰(y) − ε₂Ξ₂⁰(yp)")
    sandwich_bound: float = Field(..., ge=0.0, description="φ·2ε/((1−ε²)α)")
    displacement: float = Field(..., ge=0.0, description="max(d(y,y0), d(yp,y0p))")
    row_lhs: float = Field(..., description="max over K of u − v")
    row_rhs: float = Field(..., description="Per-row upper estimate of row_lhs")
    gap: float = Field(..., description="ℍf†(x)/(1−ε) − ℍf‡(xp)/(1+ε)")
    gap_bound: float = Field(..., description="ε(C⁰ + C_{ε,φ}) at this row")
    m1: float = Field(..., description="Lower cut-off level M₁")
    m2: float = Field(..., description="Upper cut-off level M₂")
    jensen_candidate: int = Field(..., ge=0, description="Index of the accepted shift")

    @field_validator("y0", "y0p", "p", "pp", "y", "yp", "x", "xp", mode="before")
    @classmethod
    def _as_floats(cls, value):
        return [float(c) for c in to_jsonable(value)]

    def csv_record(self) -> list[str]:
        data = self.model_dump()
        return [_format(data[name]) for name in CSV_COLUMNS]


def rows_to_csv(rows: list[TraceRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.csv_record())
    return buffer.getvalue()


def write_trace_csv(rows: list[TraceRow], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(rows_to_csv(rows), encoding="utf-8")
    return path


def read_trace_csv(path: Path) -> list[dict[str, Any]]:
    """
    Parse a trace CSV back into column → value dicts (points as float lists).
    """

    with path.open(encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path} does not carry the trace column layout")
        out = []
        for record in reader:
            parsed: dict[str, Any] = {}
            for name, raw in record.items():
                if name in POINT_COLUMNS:
                    parsed[name] = [float(c) for c in raw.split(";")] if raw else []
                elif name in ("cloud_size", "jensen_candidate"):
                    parsed[name] = int(raw)
                else:
                    parsed[name] = float(raw)
            out.append(parsed)
        return out


class TraceSummary(BaseModel):
    rows: int = Field(..., ge=0)
    schedule: list[float] = Field(default_factory=list)
    final: dict[str, Any] = Field(default_factory=dict, description="Last-row diagnostics")
    liminf_gap: float | None = Field(None, description="Smallest gap over the schedule tail")
    gap_bound: float | None = None
    strict: dict[str, Any] = Field(default_factory=dict, description="K̂ and C_ε constants")
    trend: dict[str, bool | None] = Field(default_factory=dict)
    enlargements: int = Field(0, ge=0)
    flags: list[str] = Field(default_factory=list)
    passed: bool = True

    @field_validator("final", "strict", mode="before")
    @classmethod
    def _coerce_json(cls, value):
        return to_jsonable(value or {})

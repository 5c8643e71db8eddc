"""
Schemas for check and run reports.
"""

from __future__ import annotations

import math
from datetime import datetime
from enum import Enum
from typing import Any

import numpy as np
from pydantic import BaseModel, Field, field_validator


class CheckStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    WARN = "warn"
    SKIP = "skip"


def to_jsonable(value: Any) -> Any:
    """
    Convert numpy scalars/arrays and non-finite floats into JSON-safe values.
    """

    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


class EnvelopeFit(BaseModel):
    abscissa: list[float] = Field(
        default_factory=list, description="Knot abscissas of the envelope"
    )
    omega: list[float] = Field(default_factory=list, description="Envelope values at the knots")
    value_at_zero: float = Field(0.0, description="Data level at coincident pairs")
    initial_slope: float = Field(0.0, ge=0.0, description="Slope of the envelope at the origin")
    coalescence_exponent: float = Field(
        0.0, description="Log-log growth of the worst ratio as pairs coalesce"
    )
    shells: int = Field(0, ge=0, description="Number of nonempty distance shells used")


class CheckReport(BaseModel):
    name: str = Field(..., min_length=1)
    status: CheckStatus = CheckStatus.PASS
    message: str = ""
    max_violation: float = 0.0
    witness: dict[str, Any] = Field(default_factory=dict)
    envelope: EnvelopeFit | None = None
    constants: dict[str, Any] = Field(default_factory=dict)
    notes: list[str] = Field(default_factory=list)
    items: list[CheckReport] = Field(default_factory=list)
    runtime_ms: float = 0.0

    @field_validator("witness", "constants", mode="before")
    @classmethod
    def _coerce_json(cls, value):
        if value is None:
            return {}
        return to_jsonable(value)

    @field_validator("max_violation", mode="before")
    @classmethod
    def _finite_violation(cls, value):
        value = float(value)
        if math.isnan(value):
            raise ValueError("max_violation must not be NaN")
        return value

    @property
    def passed(self) -> bool:
        return self.status != CheckStatus.FAIL and all(item.passed for item in self.items)

    @classmethod
    def from_items(cls, name: str, items: list[CheckReport], **kwargs: Any) -> CheckReport:
        """
        Aggregate sub-reports: fails iff any item fails, worst violation carried up.
        """

        failed = [item for item in items if not item.passed]
        status = CheckStatus.FAIL if failed else CheckStatus.PASS
        if not failed and any(item.status == CheckStatus.WARN for item in items):
            status = CheckStatus.WARN
        worst = max((item.max_violation for item in items), default=0.0)
        message = kwargs.pop("message", "")
        if failed and not message:
            message = "failed items: " + ", ".join(item.name for item in failed)
        return cls(
            name=name,
            status=status,
            message=message,
            max_violation=worst,
            witness=failed[0].witness if failed else {},
            items=items,
            **kwargs,
        )


class Environment(BaseModel):
    python: str
    numpy: str
    scipy: str
    platform: str


class RunReport(BaseModel):
    command: str
    document: str
    input_hash: str = Field(..., pattern="^[0-9a-f]{64}$")
    environment: Environment
    seed: int
    passed: bool = True
    started_at: datetime | None = None
    finished_at: datetime | None = None
    summary: dict[str, Any] = Field(default_factory=dict)
    checks: list[CheckReport] = Field(default_factory=list)

    @field_validator("summary", mode="before")
    @classmethod
    def _coerce_summary(cls, value):
        return to_jsonable(value or {})

    def passed_count(self) -> int:
        return sum(1 for check in self.checks if check.passed)

    def failed_count(self) -> int:
        return sum(1 for check in self.checks if not check.passed)

    def all_passed(self) -> bool:
        return all(check.passed for check in self.checks)


TIMING_FIELDS = frozenset({"started_at", "finished_at", "runtime_ms"})


def strip_timing(payload: Any) -> Any:
    """
    Remove timestamp/runtime members so two runs can be compared byte for byte.
    """

    if isinstance(payload, dict):
        return {k: strip_timing(v) for k, v in payload.items() if k not in TIMING_FIELDS}
    if isinstance(payload, list):
        return [strip_timing(v) for v in payload]
    return payload

"""Pass/fail check reports serialized as JSON."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class CheckReport:
    check_name: str
    passed: bool
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return bool(self.passed)

    def to_dict(self) -> dict:
        return {"check_name": self.check_name, "pass": bool(self.passed),
                "details": to_jsonable(self.details)}


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_reports(path, reports):
    if isinstance(reports, CheckReport):
        reports = [reports]
    with open(path, "w") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=2)

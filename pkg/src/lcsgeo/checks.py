"""Residual bookkeeping shared by the verification suites."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

PASS = "pass"
FAIL = "fail"
NOT_APPLICABLE = "n/a"
INFO = "info"


@dataclass
class Check:
    """One identity: the largest residual seen and its verdict.

    ``status`` is ``info`` for quantities that are reported but not gated
    (hypotheses of conditional statements, for example).
    """

    name: str
    residual: float | None
    tolerance: float
    status: str
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status != FAIL

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "residual_max": self.residual,
            "tolerance": self.tolerance,
            "status": self.status,
            "detail": self.detail,
        }


@dataclass
class SuiteReport:
    name: str
    checks: list[Check] = field(default_factory=list)
    rows: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(c.name == name for c in self.checks)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def residual_max(self) -> float:
        gated = [c.residual for c in self.checks if c.status in (PASS, FAIL) and c.residual is not None]
        return max(gated, default=0.0)

    def residuals(self) -> dict[str, float | None]:
        return {c.name: c.residual for c in self.checks}


class Tally:
    """Running max-abs residual per named identity, in insertion order."""

    def __init__(self, tolerance: float):
        self.tolerance = tolerance
        self.values: dict[str, float] = {}

    def add(self, name: str, value) -> float:
        arr = np.abs(np.asarray(value, dtype=float))
        v = float(arr.max()) if arr.size else 0.0
        self.values[name] = max(self.values.get(name, 0.0), v)
        return v

    def checks(self, info: Iterable[str] = ()) -> list[Check]:
        info = set(info)
        out = []
        for name, v in self.values.items():
            if name in info:
                status = INFO
            else:
                status = PASS if v < self.tolerance else FAIL
            out.append(Check(name, v, self.tolerance, status))
        return out

"""Structured run reports.

The machine-readable form is JSON with a fixed key order and every float
written with 17 significant digits (``%.17g``), so identical inputs give
byte-identical documents.  Wall-clock time only appears in the human summary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass
class Check:
    name: str
    passed: bool
    residual: float
    tolerance: float
    witness: tuple[float, ...] | None = None
    component: tuple[int, ...] | None = None
    generator: str | None = None
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "status": "pass" if self.passed else "fail",
            "max_residual": self.residual,
            "tolerance": self.tolerance,
            "witness": list(self.witness) if self.witness is not None else None,
            "component": list(self.component) if self.component is not None else None,
            "generator": self.generator,
            "detail": self.detail,
        }


@dataclass
class Report:
    command: str
    config_digest: str
    seed: int
    checks: list[Check] = field(default_factory=list)
    verdict: dict | None = None
    table: str | None = None
    status: str = "pass"
    exit_code: int = 0
    message: str = ""
    duration: float = 0.0

    def as_dict(self) -> dict:
        out = {
            "command": self.command,
            "config_digest": self.config_digest,
            "seed": self.seed,
            "status": self.status,
            "exit_code": self.exit_code,
            "message": self.message,
            "checks": [c.as_dict() for c in self.checks],
            "verdict": self.verdict,
        }
        if self.table is not None:
            out["table"] = self.table
        return out

    def to_text(self) -> str:
        return dumps(self.as_dict()) + "\n"

    def summary(self) -> str:
        lines = [f"metrize {self.command}: {self.status} (exit {self.exit_code}, {self.duration:.2f} s)"]
        if self.message:
            lines.append(f"  {self.message}")
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            where = f" at {fmt_point(c.witness)}" if c.witness is not None else ""
            extra = f" [{c.detail}]" if c.detail else ""
            lines.append(f"  {mark} {c.name}: {c.residual:.3e} (tol {c.tolerance:.1e}){where}{extra}")
        if self.verdict is not None:
            lines.append(f"  verdict: {self.verdict['status']}")
            for name, value in self.verdict.get("constants", {}).items():
                shown = "unconstrained" if value is None else f"{value:.12g}"
                lines.append(f"    {name} = {shown}")
            for v in self.verdict.get("violated_conditions", []):
                lines.append(f"    violated {v['condition']}: {v['residual']:.3e} at {fmt_point(v['witness'])}")
        return "\n".join(lines) + "\n"


def fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return "%.17g" % x


def fmt_point(p) -> str:
    if p is None:
        return "-"
    return "(" + ", ".join(f"{v:.6g}" for v in p) + ")"


def dumps(obj: Any, indent: int = 0) -> str:
    """JSON text with ``%.17g`` floats and insertion-ordered keys."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k), ensure_ascii=False)}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + dumps(v, indent + 1) for v in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def csv_table(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("%.17g" % float(v) for v in row))
    return "\n".join(lines) + "\n"

"""Checks, tables and atomic file output."""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

__all__ = ["Check", "Table", "format_value", "write_csv", "write_json_atomic", "write_text_atomic"]


@dataclass
class Check:
    name: str
    measured: Any
    expected: Any
    tolerance: Any
    passed: bool
    note: str = ""

    def as_dict(self) -> dict:
        return {k: _jsonable(v) for k, v in asdict(self).items()}


@dataclass
class Table:
    header: list[str]
    rows: list[list[Any]] = field(default_factory=list)

    def add(self, *row: Any) -> None:
        if len(row) != len(self.header):
            raise ValueError(f"row has {len(row)} entries, header has {len(self.header)}")
        self.rows.append(list(row))


def format_value(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return format(v, ".17g")
    s = str(v)
    if any(c in s for c in ',"\n'):
        s = '"' + s.replace('"', '""') + '"'
    return s


def _jsonable(v: Any) -> Any:
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item"):  # numpy scalars
        return _jsonable(v.item())
    return v


def _atomic(path: Path, data: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, table: Table) -> None:
    lines = [",".join(format_value(h) for h in table.header)]
    lines += [",".join(format_value(v) for v in row) for row in table.rows]
    _atomic(Path(path), "\n".join(lines) + "\n")


def write_json_atomic(path: Path, obj: Any) -> None:
    _atomic(Path(path), json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_text_atomic(path: Path, text: str) -> None:
    _atomic(Path(path), text if text.endswith("\n") else text + "\n")


def jsonable(v: Any) -> Any:
    return _jsonable(v)


def summarize(checks: Sequence[Check]) -> dict:
    return {"total": len(checks), "passed": sum(c.passed for c in checks), "all_passed": all(c.passed for c in checks)}

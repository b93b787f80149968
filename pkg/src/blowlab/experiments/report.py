"""One-page text summary of a manifest."""

from __future__ import annotations

from typing import Any

__all__ = ["emit_report"]


def _fmt(v: Any) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def emit_report(manifest: dict) -> str:
    lines = [
        f"experiment: {manifest['experiment']}",
        f"version: {manifest['version']}",
        f"wall time: {manifest['wall_time_s']:.2f} s",
        "",
    ]
    for c in manifest["checks"]:
        status = "PASS" if c["passed"] else "FAIL"
        line = f"{status}  {c['name']}: measured {_fmt(c['measured'])}, theory {_fmt(c['expected'])}, tolerance {_fmt(c['tolerance'])}"
        if c.get("note"):
            line += f"  ({c['note']})"
        lines.append(line)
    for e in manifest["errors"]:
        where = "run" if e["index"] < 0 else f"point {e['index']} ({_fmt(e['point'])})"
        lines.append(f"FAIL  {where}: {e['error']}")
    s = manifest["summary"]
    lines.append("")
    verdict = "ALL PASS" if s["all_passed"] else "NOT ALL PASS"
    partial = "" if s["complete"] else ", partial completion"
    lines.append(f"{verdict}: {s['passed']}/{s['total']} checks{partial}")
    return "\n".join(lines) + "\n"

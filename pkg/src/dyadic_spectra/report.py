"""Report objects and their deterministic JSON / CSV serialisation."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import os
import subprocess
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__

__all__ = ["Report", "to_jsonable", "parse_rational_strings", "version_string", "atomic_write"]


def to_jsonable(obj):
    """Convert results to JSON-safe values; rationals become ``"num/den"`` strings."""
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if v != v or v in (float("inf"), float("-inf")):
            return repr(v)
        return v
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, str) or obj is None:
        return obj
    if isinstance(obj, dict):
        return {str(to_jsonable(k)) if not isinstance(k, str) else k: to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [to_jsonable(v) for v in items]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if dataclasses.is_dataclass(obj):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if hasattr(obj, "__float__"):  # mpmath numbers
        return float(obj)
    return str(obj)


def parse_rational_strings(obj):
    """Inverse of :func:`to_jsonable` for ``"num/den"`` strings."""
    if isinstance(obj, str) and "/" in obj:
        num, _, den = obj.partition("/")
        try:
            return Fraction(int(num), int(den))
        except ValueError:
            return obj
    if isinstance(obj, dict):
        return {k: parse_rational_strings(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [parse_rational_strings(v) for v in obj]
    return obj


_VERSION = None


def version_string() -> str:
    global _VERSION
    if _VERSION is None:
        here = Path(__file__).resolve().parent
        try:
            out = subprocess.run(["git", "describe", "--always", "--tags"], cwd=here,
                                 capture_output=True, text=True, timeout=5)
            tag = out.stdout.strip() if out.returncode == 0 else ""
        except (OSError, subprocess.SubprocessError):
            tag = ""
        _VERSION = f"{__version__}+{tag}" if tag else __version__
    return _VERSION


@dataclasses.dataclass
class Report:
    command: list
    parameters: dict
    result: dict
    assertions: list = dataclasses.field(default_factory=list)
    rows: list | None = None  # tabular part, used for CSV output

    def check(self, name: str, lhs, rhs, verdict: bool) -> bool:
        self.assertions.append({"name": name, "lhs": lhs, "rhs": rhs, "verdict": bool(verdict)})
        return bool(verdict)

    @property
    def passed(self) -> bool:
        return all(a["verdict"] for a in self.assertions)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "version": version_string(),
            "parameters": to_jsonable(self.parameters),
            "result": to_jsonable(self.result),
            "assertions": to_jsonable(self.assertions),
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        rows = self.rows if self.rows is not None else [self.result]
        flat = [_flatten_row(r) for r in rows]
        header: list[str] = []
        for r in flat:
            for k in r:
                if k not in header:
                    header.append(k)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in flat:
            w.writerow([r.get(k, "") for k in header])
        return buf.getvalue()


def _flatten_row(row: dict) -> dict:
    """One CSV row; rationals get a decimal column plus an exact ``_exact`` column."""
    out = {}
    for k, v in row.items():
        if isinstance(v, Fraction):
            out[k] = repr(float(v))
            out[f"{k}_exact"] = f"{v.numerator}/{v.denominator}"
        elif isinstance(v, (complex, np.complexfloating)):
            out[f"{k}_re"] = repr(float(v.real))
            out[f"{k}_im"] = repr(float(v.imag))
        elif isinstance(v, (float, np.floating)):
            out[k] = repr(float(v))
        elif isinstance(v, (dict, list, tuple)):
            out[k] = json.dumps(to_jsonable(v))
        else:
            out[k] = v if not isinstance(v, np.generic) else v.item()
    return out


def atomic_write(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise

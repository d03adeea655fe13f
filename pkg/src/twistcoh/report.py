"""Machine-readable run reports and their JSON/CSV serialisation."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional


@dataclass
class Check:
    value: float
    tolerance: float
    # "le": passes when value <= tolerance; "ge": when value >= tolerance
    sense: str = "le"

    @property
    def passed(self) -> bool:
        if self.sense == "ge":
            return self.value >= self.tolerance
        return self.value <= self.tolerance

    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "tolerance": self.tolerance, "sense": self.sense, "passed": self.passed}


@dataclass
class SpectrumEntry:
    mode: str
    degree: int
    eigenvalue: float


@dataclass
class BettiReport:
    """Per-degree cohomology dimensions plus every check that produced them."""

    backend: str
    model: Dict[str, Any] = field(default_factory=dict)
    twist: Dict[str, Any] = field(default_factory=dict)
    dims: List[int] = field(default_factory=list)
    euler_characteristic: Optional[int] = None
    expected_euler: Optional[int] = None
    residuals: Dict[str, Check] = field(default_factory=dict)
    gates: Dict[str, Any] = field(default_factory=dict)
    extras: Dict[str, Any] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    spectra: List[SpectrumEntry] = field(default_factory=list)
    golden: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    timings: Dict[str, float] = field(default_factory=dict)

    def add_check(self, name: str, value: float, tolerance: float, sense: str = "le") -> Check:
        chk = Check(float(value), float(tolerance), sense)
        self.residuals[name] = chk
        return chk

    @property
    def euler_ok(self) -> bool:
        return self.expected_euler is None or self.euler_characteristic == self.expected_euler

    @property
    def passed(self) -> bool:
        if not self.euler_ok:
            return False
        if any(not c.passed for c in self.residuals.values()):
            return False
        return all(g.get("passed", True) for g in self.golden.values())

    def failures(self) -> List[str]:
        out = [name for name, c in self.residuals.items() if not c.passed]
        if not self.euler_ok:
            out.append("euler_characteristic")
        out += [f"golden:{k}" for k, g in self.golden.items() if not g.get("passed", True)]
        return out

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["residuals"] = {k: c.to_dict() for k, c in self.residuals.items()}
        d["status"] = "PASSED" if self.passed else "FAILED"
        d["spectra"] = [asdict(s) for s in self.spectra]
        if not self.timings:
            d.pop("timings")
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "BettiReport":
        d = dict(d)
        d.pop("status", None)
        d["residuals"] = {
            k: Check(v["value"], v["tolerance"], v.get("sense", "le")) for k, v in d.get("residuals", {}).items()
        }
        d["spectra"] = [SpectrumEntry(**s) for s in d.get("spectra", [])]
        return cls(**d)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return obj.item()
    return obj


def to_json(report: BettiReport) -> str:
    """Canonical JSON: sorted keys, fixed separators, trailing newline."""
    return json.dumps(_jsonable(report.to_dict()), sort_keys=True, indent=2, allow_nan=True) + "\n"


def from_json(text: str) -> BettiReport:
    return BettiReport.from_dict(json.loads(text))


SPECTRUM_HEADER = ["mode", "degree", "eigenvalue"]


def spectra_csv(report: BettiReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SPECTRUM_HEADER)
    for s in report.spectra:
        w.writerow([s.mode, s.degree, repr(float(s.eigenvalue))])
    return buf.getvalue()


def emit(report: BettiReport, path, fmt: str = "json") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path.write_text(to_json(report))
    elif fmt == "csv":
        path.write_text(spectra_csv(report))
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path

"""Run reports: one JSON document, sidecar CSV tables and the tag file.

``report.json`` holds only deterministic content, so the same config and
seed give a byte-identical file. Wall-clock time goes to ``timing.json``.
"""

import csv
import hashlib
import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from ._validation import ValidationError
from .tags import write_tags

REPORT_NAME = "report.json"
TIMING_NAME = "timing.json"
TAGS_NAME = "tags.qtt"


def to_json_value(obj):
    """Plain JSON types; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): to_json_value(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_json_value(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_json_value(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return [to_json_value(obj.real), to_json_value(obj.imag)]
    return obj


def canonical_json(obj):
    return json.dumps(to_json_value(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


@dataclass
class RunReport:
    config: dict
    sections: dict
    tables: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    versions: dict = field(default_factory=dict)

    @property
    def content_hash(self):
        payload = {"config": self.config, "sections": self.sections, "tables": self.tables,
                   "versions": self.versions}
        return hashlib.sha256(canonical_json(payload).encode()).hexdigest()

    def document(self):
        return {"config": self.config, "content_hash": self.content_hash, "sections": self.sections,
                "tables": sorted(self.tables), "versions": self.versions}


def versions():
    return {"qdrelay": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def build_report(cfg, output, wall_clock=0.0):
    sections, tables = {}, {}
    for sec in output.sections:
        sections[sec.name] = {"status": "error" if sec.error else "ok", "error": sec.error,
                              "values": to_json_value(sec.values)}
        for name, table in sec.tables.items():
            tables[f"{sec.name}.{name}"] = to_json_value(table)
    return RunReport(to_json_value(cfg.to_dict()), sections, tables, wall_clock, versions())


def write_report(report, out_dir, tags=None, duration=0.0):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, (header, rows) in report.tables.items():
        with open(out / f"{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    with open(out / REPORT_NAME, "w") as fh:
        json.dump(to_json_value(report.document()), fh, sort_keys=True, indent=1, allow_nan=False)
        fh.write("\n")
    with open(out / TIMING_NAME, "w") as fh:
        json.dump({"wall_clock_s": report.wall_clock}, fh)
    if tags is not None:
        write_tags(out / TAGS_NAME, tags, int(math.ceil(duration)))
    return out / REPORT_NAME


def load_report(path):
    path = Path(path)
    if path.is_dir():
        path = path / REPORT_NAME
    with open(path) as fh:
        return json.load(fh)


def section_value(report, section, key):
    sec = report["sections"].get(section)
    if sec is None or sec["status"] != "ok":
        raise ValidationError(f"report has no usable {section!r} section")
    return sec["values"][key]


def mean_fidelity(reports):
    """Unweighted mean fidelity over three inputs, its sigma and the excess over 2/3 in sigmas."""
    if len(reports) != 3:
        raise ValidationError("mean fidelity needs exactly three reports")
    windows = {section_value(r, "fidelity", "window") for r in reports}
    if len(windows) != 1:
        raise ValidationError(f"reports use different post-selection windows: {sorted(windows)}")
    f = np.array([section_value(r, "fidelity", "fidelity") for r in reports])
    s = np.array([section_value(r, "fidelity", "sigma") for r in reports])
    mean = float(f.mean())
    sigma = float(np.sqrt(np.sum(s ** 2)) / 3)
    excess = (mean - 2 / 3) / sigma if sigma > 0 else float("inf")
    return mean, sigma, float(excess)


def diff_reports(a, b, rtol=0.0, atol=0.0):
    """Paths whose values differ between two report documents."""
    out = []

    def walk(x, y, path):
        if isinstance(x, dict) and isinstance(y, dict):
            for k in sorted(set(x) | set(y)):
                if k not in x or k not in y:
                    out.append(f"{path}/{k}: only in {'first' if k in x else 'second'}")
                else:
                    walk(x[k], y[k], f"{path}/{k}")
        elif isinstance(x, list) and isinstance(y, list) and len(x) == len(y):
            for i, (p, q) in enumerate(zip(x, y)):
                walk(p, q, f"{path}[{i}]")
        elif isinstance(x, (int, float)) and isinstance(y, (int, float)) and not isinstance(x, bool):
            if not math.isclose(x, y, rel_tol=rtol, abs_tol=atol):
                out.append(f"{path}: {x!r} != {y!r}")
        elif x != y:
            out.append(f"{path}: {x!r} != {y!r}")

    walk(a, b, "")
    return out

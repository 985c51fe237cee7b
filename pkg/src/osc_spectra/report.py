"""Output files of a run: report.json, CSV tables, gnuplot scripts and PNG figures."""

from __future__ import annotations

import csv
import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigurationError


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if v is None:
        return ""
    return str(v)


def jsonable(obj):
    """Plain JSON types; complex numbers become [re, im], non-finite floats strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (complex, np.complexfloating)):
        return [jsonable(obj.real), jsonable(obj.imag)]
    return obj


@dataclass(frozen=True)
class Series:
    table: str
    x: str
    y: str
    label: str
    style: str = "linespoints"


@dataclass(frozen=True)
class FigureSpec:
    stem: str
    title: str
    xlabel: str
    ylabel: str
    series: tuple
    logx: bool = False
    logy: bool = False
    hlines: tuple = ()

    def gnuplot(self, tables):
        lines = [
            "# generated by osc-spectra; run with: gnuplot " + self.stem + ".gp",
            'set datafile separator ","',
            "set terminal svg size 900,600",
            f'set output "{self.stem}.svg"',
            f'set title "{self.title}"',
            f'set xlabel "{self.xlabel}"',
            f'set ylabel "{self.ylabel}"',
            "set key outside right",
            "set grid",
        ]
        if self.logx:
            lines.append("set logscale x")
        if self.logy:
            lines.append("set logscale y")
        parts = []
        for s in self.series:
            cols = tables[s.table]
            xi, yi = cols.index(s.x) + 1, cols.index(s.y) + 1
            parts.append(f'"{s.table}.csv" skip 1 using {xi}:{yi} with {s.style} title "{s.label}"')
        for value, label in self.hlines:
            parts.append(f'{value!r} with lines dashtype 2 title "{label}"')
        lines.append("plot " + ", \\\n     ".join(parts))
        return "\n".join(lines) + "\n"


@dataclass
class ReportWriter:
    out_dir: Path
    command: str
    config: object
    plots: bool = True
    files: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    _rows: dict = field(default_factory=dict)

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigurationError(f"out: cannot create {self.out_dir}: {exc.strerror}") from None

    def table(self, name, columns, rows):
        """Write name.csv; rows are mappings or sequences in column order."""
        path = self.out_dir / f"{name}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                vals = [r.get(c) for c in columns] if isinstance(r, dict) else list(r)
                w.writerow([_cell(v) for v in vals])
        self.tables[name] = list(columns)
        self._rows[name] = rows
        self.files.append(path.name)
        return path

    def figure(self, spec):
        path = self.out_dir / f"{spec.stem}.gp"
        path.write_text(spec.gnuplot(self.tables))
        self.files.append(path.name)
        if self.plots:
            from .plotting import render

            png = render(spec, self.tables, self._rows, self.out_dir)
            self.files.append(png.name)

    def json(self, name, payload):
        path = self.out_dir / f"{name}.json"
        path.write_text(json.dumps(jsonable(payload), indent=2, sort_keys=True) + "\n")
        self.files.append(path.name)

    def finish(self, findings, provenance, violations, status, runtime):
        report = {
            "command": self.command,
            "status": status,
            "violations": violations,
            "findings": findings,
            "provenance": {
                "package_version": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "config": self.config.model_dump(mode="json"),
                **provenance,
            },
            "runtime_seconds": runtime,
            "files": sorted(self.files + ["report.json"]),
        }
        path = self.out_dir / "report.json"
        path.write_text(json.dumps(jsonable(report), indent=2, sort_keys=True) + "\n")
        return report

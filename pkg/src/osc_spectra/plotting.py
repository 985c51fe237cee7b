"""PNG rendering of figure specs with matplotlib's Agg backend."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (8.0, 5.0),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
    "legend.frameon": False,
    "savefig.bbox": "tight",
}

_MARKERS = {"points": ("o", ""), "lines": ("", "-"), "linespoints": ("o", "-")}


def _column(rows, name):
    out = []
    for r in rows:
        v = r.get(name) if isinstance(r, dict) else None
        out.append(float("nan") if v is None else float(v))
    return out


def render(spec, tables, rows, out_dir):
    """Draw every series of ``spec`` from the in-memory rows; returns the PNG path."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        drawn = False
        for s in spec.series:
            data = rows[s.table]
            if data and not isinstance(data[0], dict):
                cols = tables[s.table]
                data = [dict(zip(cols, r)) for r in data]
            marker, line = _MARKERS.get(s.style, ("o", "-"))
            xs, ys = _column(data, s.x), _column(data, s.y)
            if spec.logx:
                xs = [v if v > 0 else float("nan") for v in xs]
            if spec.logy:
                ys = [v if v > 0 else float("nan") for v in ys]
            drawn = drawn or any(v == v for v in ys)
            ax.plot(xs, ys, marker=marker, linestyle=line, markersize=3,
                    label=s.label)
        for value, label in spec.hlines:
            ax.axhline(value, linestyle="--", color="0.4", linewidth=1, label=label)
        if spec.logx:
            ax.set_xscale("log")
        if spec.logy and drawn:
            ax.set_yscale("log")
        ax.set_title(spec.title)
        ax.set_xlabel(spec.xlabel)
        ax.set_ylabel(spec.ylabel)
        ax.legend(loc="best", fontsize=8)
        path = out_dir / f"{spec.stem}.png"
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
    return path

"""Reading experiment CSVs and rendering them as figures.

Figure kinds:

- ``sweep``    — curves of a rate metric against the first coordinate, one
  series per remaining-coordinate value, 2x-standard-error bars.
- ``grid``     — heatmap of false-negative probability over the
  (ratio_alpha, ratio_phi) plane with log-scaled axes.
- ``rate``     — detection success/rate against the event count m.
- ``idt``      — TVD curves (unfiltered / detector-filtered /
  baseline-filtered) against m.
- ``fidelity`` — the same layout for fidelity curves.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("sweep", "grid", "rate", "idt", "fidelity")


class MissingColumnError(ValueError):
    """A required CSV column is absent; the message names it."""

    def __init__(self, column: str, path):
        self.column = column
        super().__init__(f"missing column {column!r} in {path}")


@dataclass(frozen=True)
class PlotSpec:
    inputs: tuple
    kind: str
    out_path: str
    xscale: str | None = None
    yscale: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "inputs", tuple(str(p) for p in self.inputs))


@dataclass(frozen=True)
class ResultTable:
    """Parsed experiment CSV: coordinate names plus one dict per row."""

    path: str
    coord_names: tuple
    rows: tuple  # dicts: metric, coords (tuple, None where blank), value, two_se, n_samples

    def metrics(self) -> tuple:
        seen = []
        for r in self.rows:
            if r["metric"] not in seen:
                seen.append(r["metric"])
        return tuple(seen)

    def select(self, metric: str) -> list:
        return [r for r in self.rows if r["metric"] == metric]


def read_result_csv(path) -> ResultTable:
    path = str(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration as exc:
            raise ValueError(f"empty CSV {path}") from exc
        for required in ("metric", "value", "two_se", "n_samples"):
            if required not in header:
                raise MissingColumnError(required, path)
        if header[0] != "metric" or header[-3:] != ["value", "two_se", "n_samples"]:
            raise ValueError(f"unexpected column layout in {path}: {header}")
        coord_names = tuple(header[1:-3])
        rows = []
        for rec in reader:
            if not rec:
                continue
            coords = tuple(None if c == "" else float(c) for c in rec[1 : 1 + len(coord_names)])
            rows.append(
                {
                    "metric": rec[0],
                    "coords": coords,
                    "value": float(rec[-3]),
                    "two_se": float(rec[-2]),
                    "n_samples": int(rec[-1]),
                }
            )
    return ResultTable(path=path, coord_names=coord_names, rows=tuple(rows))


def infer_kind(table: ResultTable) -> str:
    """Choose a figure kind from the metrics present in the CSV."""
    metrics = table.metrics()
    if any(m.startswith("tvd_") for m in metrics):
        return "idt"
    if any(m.startswith("fidelity_") for m in metrics):
        return "fidelity"
    if any(m in ("detection_rate", "detection_success", "baseline_detection") for m in metrics):
        return "rate"
    if "false_negative" in metrics:
        fn = table.select("false_negative")
        ratios = {r["coords"][1:] for r in fn if len(r["coords"]) >= 3}
        if len(ratios) > 1:
            return "grid"
        return "sweep"
    return "sweep"


# ---------------------------------------------------------------------------
# Figure builders (return the Figure so tests can inspect axes)


def _rate_metrics(table: ResultTable) -> list:
    return [m for m in table.metrics() if not m.startswith(("fp_fit", "baseline_period"))]


def _build_sweep(table: ResultTable, spec: PlotSpec):
    fig, ax = plt.subplots(figsize=(6, 4))
    metric = _rate_metrics(table)[0]
    rows = table.select(metric)
    # series keyed by the remaining coordinates
    series: dict = {}
    for r in rows:
        key = r["coords"][1:]
        series.setdefault(key, []).append(r)
    for key, pts in sorted(series.items(), key=lambda kv: str(kv[0])):
        pts = sorted(pts, key=lambda r: (r["coords"][0] is None, r["coords"][0]))
        x = np.array([p["coords"][0] for p in pts], dtype=float)
        y = np.array([p["value"] for p in pts])
        err = np.array([p["two_se"] for p in pts])
        label = ", ".join(
            f"{n}={_fmt_coord(v)}" for n, v in zip(table.coord_names[1:], key) if v is not None
        )
        ax.errorbar(x, y, yerr=err, marker="o", capsize=3, label=label or metric)
    xvals = [r["coords"][0] for r in rows if r["coords"][0] is not None]
    if spec.xscale:
        ax.set_xscale(spec.xscale)
    elif xvals and min(xvals) > 0 and max(xvals) / max(min(xvals), 1e-300) > 30:
        ax.set_xscale("log")
    if spec.yscale:
        ax.set_yscale(spec.yscale)
    ax.set_xlabel(table.coord_names[0])
    ax.set_ylabel(metric)
    if any(s for s in series):
        ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    return fig


def _build_grid(table: ResultTable, spec: PlotSpec):
    rows = table.select("false_negative")
    if not rows:
        raise MissingColumnError("false_negative", table.path)
    if len(table.coord_names) < 3:
        raise MissingColumnError("ratio_phi", table.path)
    xs = sorted({r["coords"][1] for r in rows})
    ys = sorted({r["coords"][2] for r in rows})
    z = np.full((len(ys), len(xs)), np.nan)
    for r in rows:
        z[ys.index(r["coords"][2]), xs.index(r["coords"][1])] = r["value"]
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    mesh = ax.pcolormesh(
        _log_edges(xs), _log_edges(ys), z, shading="flat", cmap="viridis", vmin=0.0, vmax=1.0
    )
    ax.set_xscale(spec.xscale or "log")
    ax.set_yscale(spec.yscale or "log")
    ax.set_xlabel(table.coord_names[1])
    ax.set_ylabel(table.coord_names[2])
    fig.colorbar(mesh, ax=ax, label="false_negative")
    return fig


def _log_edges(vals) -> np.ndarray:
    """Geometric bin edges around strictly positive cell centers."""
    v = np.asarray(vals, dtype=float)
    if np.any(v <= 0):
        raise ValueError("grid axes must be strictly positive for log scaling")
    if v.size == 1:
        return np.array([v[0] / 2, v[0] * 2])
    lo = v[0] ** 2 / np.sqrt(v[0] * v[1])
    hi = v[-1] ** 2 / np.sqrt(v[-1] * v[-2])
    mids = np.sqrt(v[:-1] * v[1:])
    return np.concatenate([[lo], mids, [hi]])


def _build_per_m_curves(table: ResultTable, spec: PlotSpec, ylabel: str):
    fig, ax = plt.subplots(figsize=(6, 4))
    for metric in _rate_metrics(table):
        rows = [r for r in table.select(metric) if r["coords"] and r["coords"][-1] is not None]
        rows.sort(key=lambda r: r["coords"][-1])
        if not rows:
            continue
        x = [r["coords"][-1] for r in rows]
        y = [r["value"] for r in rows]
        err = [r["two_se"] for r in rows]
        ax.errorbar(x, y, yerr=err, marker="o", capsize=3, label=metric)
    if spec.yscale:
        ax.set_yscale(spec.yscale)
    ax.set_xlabel("m")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    return fig


_BUILDERS = {
    "sweep": _build_sweep,
    "grid": _build_grid,
    "rate": lambda t, s: _build_per_m_curves(t, s, "detection probability"),
    "idt": lambda t, s: _build_per_m_curves(t, s, "TVD"),
    "fidelity": lambda t, s: _build_per_m_curves(t, s, "fidelity"),
}


def _fmt_coord(v):
    if v is None:
        return ""
    return f"{int(v)}" if float(v).is_integer() else f"{v:g}"


def build_figure(spec: PlotSpec):
    """Build (without saving) the figure for a spec; single-input kinds use
    the first input."""
    table = read_result_csv(spec.inputs[0])
    return _BUILDERS[spec.kind](table, spec)


def render(spec: PlotSpec) -> str:
    """Render the spec to its output path and return the path."""
    fig = build_figure(spec)
    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return str(out)


def render_auto(csv_path, out_path) -> str:
    """Infer the figure kind from the CSV contents and render it."""
    table = read_result_csv(csv_path)
    spec = PlotSpec(inputs=(csv_path,), kind=infer_kind(table), out_path=str(out_path))
    return render(spec)

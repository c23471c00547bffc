"""Run artifacts: monitor CSV streams, verdict files, snapshots, SVG plots.

CSV values are written with ``repr`` (shortest round-trip form), which is
locale independent and makes repeated runs bit-identical on one platform.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .diagnostics import CSV_COLUMNS, MonitorRecord
from .fields import MapField
from .flow import RunVerdict
from .grid import PeriodicGrid
from .targets import TargetManifold

EXIT_CODES = {
    "converged": 0,
    "circling": 2,
    "blowup": 3,
    "budget": 4,
    "chart_exit": 5,
}
EXIT_CONFIG_ERROR = 64
EXIT_VERIFY_MISMATCH = 1
EXIT_VERIFY_EMPTY = 65


def exit_code_for(kind: str) -> int:
    return EXIT_CODES[kind]


def monitors_csv_text(history: list[MonitorRecord]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for rec in history:
        lines.append(",".join(repr(v) for v in rec.csv_row()))
    return "\n".join(lines) + "\n"


def write_monitors_csv(path: str, history: list[MonitorRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(monitors_csv_text(history))


def read_monitors_csv(path: str) -> dict[str, np.ndarray]:
    data = np.genfromtxt(path, delimiter=",", names=True)
    return {name: np.atleast_1d(data[name]) for name in data.dtype.names}


def write_verdict(path: str, verdict: RunVerdict, scenario: str | None = None) -> None:
    payload = {
        "kind": verdict.kind,
        "exit_code": exit_code_for(verdict.kind),
        "scenario": scenario,
        "evidence": _plain(verdict.evidence),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# field snapshots


def snapshot_text(field: MapField) -> str:
    """Header (axes, extents, target name, winding) plus row-major lifts."""
    grid = field.grid
    winding = ";".join(",".join(str(int(w)) for w in row) for row in field.winding)
    header = (f"axes={grid.ndim} extents={','.join(str(n) for n in grid.extents)} "
              f"target={field.target.name} winding={winding}")
    flat = field.values.reshape(field.ncomp, -1)
    lines = [header]
    for i in range(flat.shape[1]):
        lines.append(" ".join(repr(float(v)) for v in flat[:, i]))
    return "\n".join(lines) + "\n"


def write_snapshot(path: str, field: MapField) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(snapshot_text(field))


def load_snapshot(path: str, grid: PeriodicGrid, target: TargetManifold) -> MapField:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        fields = dict(item.split("=", 1) for item in header.split())
        extents = tuple(int(v) for v in fields["extents"].split(","))
        if extents != grid.extents:
            raise ValueError(f"snapshot extents {extents} do not match grid {grid.extents}")
        if fields["target"] != target.name:
            raise ValueError(f"snapshot target {fields['target']!r} != {target.name!r}")
        winding = np.array([[int(v) for v in row.split(",")]
                            for row in fields["winding"].split(";")], dtype=np.int64)
        data = np.loadtxt(fh, ndmin=2)
    values = np.ascontiguousarray(data.T.reshape((target.dim,) + extents))
    return MapField(grid, target, values, winding)


# ---------------------------------------------------------------------------
# summary plot


def write_summary_svg(path: str, history: list[MonitorRecord], title: str = "") -> None:
    """Static post-run summary: sup speed and homotopy distance vs time."""
    import matplotlib
    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    ts = np.array([r.t for r in history])
    speed = np.sqrt(np.maximum(np.array([r.sup_speed for r in history]), 0.0))
    hom = np.array([r.homotopy_sup for r in history])

    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    pos = speed > 0
    if pos.any():
        ax.semilogy(ts[pos], speed[pos], label="sup |fdot|_g", color="tab:blue")
    ax2 = ax.twinx()
    hpos = hom > 0
    if hpos.any():
        ax2.semilogy(ts[hpos], hom[hpos], label="sup homotopy distance",
                     color="tab:orange")
    ax.set_xlabel("t")
    ax.set_ylabel("sup speed")
    ax2.set_ylabel("homotopy distance")
    lines, labels = ax.get_legend_handles_labels()
    l2, lb2 = ax2.get_legend_handles_labels()
    ax.legend(lines + l2, labels + lb2, loc="best", fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path

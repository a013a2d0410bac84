"""CSV / Markdown tables and the SVG spatio-temporal heatmap."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

__all__ = [
    "fmt",
    "lmce_rows",
    "lace_rows",
    "cef_rows",
    "dispatch_rows",
    "compare_rows",
    "write_table",
    "render_markdown",
    "heatmap_svg",
    "write_heatmap_svg",
    "CONGESTION_THRESHOLD",
]

CONGESTION_THRESHOLD = 99.9

LMCE_HEADER = ["period", "bus", "lmce_t_per_mwh", "energy_part", "network_part"]
LACE_HEADER = ["period", "bus", "lace_t_per_mwh", "allocation_t", "breakpoints"]
CEF_HEADER = ["period", "bus", "nci_t_per_mwh", "allocation_t"]
DISPATCH_HEADER = ["period", "generator", "bus", "dispatch_mw", "emission_t"]
COMPARE_HEADER = [
    "period",
    "bus",
    "load_mw",
    "nci_t_per_mwh",
    "cef_allocation_t",
    "lace_t_per_mwh",
    "lace_allocation_t",
]


def fmt(value) -> str:
    """Six significant digits; round-off dust and negative zero print as 0."""
    v = float(value)
    if abs(v) < 1e-12:
        return "0"
    return f"{v:.6g}"


def lmce_rows(bus_ids, lmce):
    rows = []
    for t in range(lmce.value.shape[0]):
        for i, bus in enumerate(bus_ids):
            rows.append(
                [
                    str(t + 1),
                    str(bus),
                    fmt(lmce.value[t, i]),
                    fmt(lmce.energy_part[t, i]),
                    fmt(lmce.network_part[t, i]),
                ]
            )
    return rows


def lace_rows(bus_ids, lace):
    rows = []
    for t in range(lace.value.shape[0]):
        bps = ";".join(fmt(y) for y in lace.breakpoints[t])
        for i, bus in enumerate(bus_ids):
            rows.append([str(t + 1), str(bus), fmt(lace.value[t, i]), fmt(lace.allocation[t, i]), bps])
    return rows


def cef_rows(bus_ids, cef):
    rows = []
    for t in range(cef.nci.shape[0]):
        for i, bus in enumerate(bus_ids):
            rows.append([str(t + 1), str(bus), fmt(cef.nci[t, i]), fmt(cef.allocation[t, i])])
    return rows


def dispatch_rows(case, dispatch):
    k = case.emission_factors()
    rows = []
    for t in range(dispatch.shape[0]):
        for g, gen in enumerate(case.generators):
            rows.append([str(t + 1), gen.id, str(gen.bus), fmt(dispatch[t, g]), fmt(k[g] * dispatch[t, g])])
    return rows


def compare_rows(bus_ids, loads, cef, lace):
    """Demand-side allocation of both models, skipping buses without load."""
    rows = []
    for t in range(loads.shape[0]):
        for i, bus in enumerate(bus_ids):
            if loads[t, i] <= 0:
                continue
            rows.append(
                [
                    str(t + 1),
                    str(bus),
                    fmt(loads[t, i]),
                    fmt(cef.nci[t, i]),
                    fmt(cef.allocation[t, i]),
                    fmt(lace.value[t, i]),
                    fmt(lace.allocation[t, i]),
                ]
            )
    rows.append(
        [
            "total",
            "",
            fmt(loads.sum()),
            "",
            fmt(cef.allocation.sum()),
            "",
            fmt(lace.allocation.sum()),
        ]
    )
    return rows


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def render_markdown(header, rows) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(row) + " |" for row in rows]
    return "\n".join(lines) + "\n"


def write_table(path: Path, header, rows, fmt_name: str = "csv") -> Path:
    path = Path(path)
    if fmt_name == "md":
        path = path.with_suffix(".md")
        text = render_markdown(header, rows)
    else:
        path = path.with_suffix(".csv")
        text = render_csv(header, rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _mix(c0, c1, f):
    f = min(max(f, 0.0), 1.0)
    return "#" + "".join(f"{round(a + (b - a) * f):02x}" for a, b in zip(c0, c1))


_WHITE = (255, 255, 255)
_BLUE = (33, 102, 172)
_GREEN = (27, 120, 55)
_RED = (178, 24, 43)


def _flow_color(rate):
    return _mix(_WHITE, _BLUE, rate / 100.0)


def _lmce_color(value, scale):
    if scale <= 0:
        return "#ffffff"
    f = value / scale
    return _mix(_WHITE, _RED, f) if f >= 0 else _mix(_WHITE, _GREEN, -f)


def heatmap_svg(flow_rate, lmce, line_labels, bus_ids, *, cell_w=22, cell_h=18) -> str:
    """Two stacked grids: line loading (%) and nodal LMCE, periods on the x axis.

    ``flow_rate`` is ``(periods, n_lines)`` in percent of rating; ``lmce`` is
    ``(periods, n_buses)``.  Cells loaded to at least 99.9 % get a black
    outline.
    """
    flow_rate = np.atleast_2d(np.asarray(flow_rate, dtype=float))
    lmce = np.atleast_2d(np.asarray(lmce, dtype=float))
    T = lmce.shape[0]
    left, top, gap = 70, 30, 40
    width = left + T * cell_w + 20
    h1 = len(line_labels) * cell_h
    h2 = len(bus_ids) * cell_h
    y2 = top + h1 + gap
    height = y2 + h2 + 40
    scale = float(np.max(np.abs(lmce))) if lmce.size else 0.0

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">',
        f'<text x="{left}" y="{top - 10}" font-size="12">Line flow rate (%)</text>',
    ]
    outlines = []
    for l, label in enumerate(line_labels):
        y = top + l * cell_h
        out.append(f'<text x="{left - 6}" y="{y + cell_h - 5}" text-anchor="end">{label}</text>')
        for t in range(T):
            x = left + t * cell_w
            rate = flow_rate[t, l]
            out.append(
                f'<rect x="{x}" y="{y}" width="{cell_w}" height="{cell_h}" fill="{_flow_color(rate)}">'
                f"<title>period {t + 1}, line {label}: {rate:.1f}%</title></rect>"
            )
            if rate >= CONGESTION_THRESHOLD:
                outlines.append(
                    f'<rect class="congested" x="{x + 1}" y="{y + 1}" width="{cell_w - 2}" '
                    f'height="{cell_h - 2}" fill="none" stroke="#000000" stroke-width="2"/>'
                )
    out.extend(outlines)

    out.append(f'<text x="{left}" y="{y2 - 10}" font-size="12">LMCE (tCO2/MWh), |max| = {scale:.4g}</text>')
    for i, bus in enumerate(bus_ids):
        y = y2 + i * cell_h
        out.append(f'<text x="{left - 6}" y="{y + cell_h - 5}" text-anchor="end">bus {bus}</text>')
        for t in range(T):
            x = left + t * cell_w
            v = lmce[t, i]
            out.append(
                f'<rect x="{x}" y="{y}" width="{cell_w}" height="{cell_h}" fill="{_lmce_color(v, scale)}">'
                f"<title>period {t + 1}, bus {bus}: {fmt(v)}</title></rect>"
            )
    ylab = y2 + h2 + 14
    for t in range(T):
        x = left + t * cell_w + cell_w / 2
        out.append(f'<text x="{x:g}" y="{ylab}" text-anchor="middle">{t + 1}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_heatmap_svg(path, flow_rate, lmce, line_labels, bus_ids) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(heatmap_svg(flow_rate, lmce, line_labels, bus_ids))
    return path

"""Turn a solved schedule into reportable quantities.

Quarterly metrics follow the fixed layout: wind curtailment (MWh),
conventional generation (MWh), average power-flow percentage, and the
annual total cost. Average power-flow percentage is defined here as the
mean over all branches and hours of |flow|/limit expressed in percent;
there is no universal convention for it, so the CSV/markdown emitters flag
it as a defined-here metric. Storage trajectories expand the start-of-hour
levels for the first and last day of each quarter.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .formulation import Variant
from .grid import GridCase, case_fingerprint
from .profiles import QuarterProfiles
from .solver import Solution
from .verify import hourly_hub_exchange, storage_levels

COST_RECOMPUTE_RTOL = 1e-6


class ReportError(Exception):
    pass


@dataclass(frozen=True)
class AnnualMetrics:
    variant: str
    curtailment_mwh: tuple[float, ...]     # per quarter, typical day x D
    conv_gen_mwh: tuple[float, ...]        # per quarter
    avg_flow_pct: tuple[float, ...]        # per quarter
    total_cost: float
    fingerprint: str                       # case + profiles identity

    @property
    def n_quarters(self) -> int:
        return len(self.curtailment_mwh)


@dataclass(frozen=True)
class StorageTrajectory:
    days_per_quarter: int
    # per (bus, quarter): initial level, per-day net exchange, start-of-hour
    # levels on the first and last day
    entries: tuple[dict, ...]

    def chaining_residuals(self) -> dict[tuple, float]:
        """Quarter-to-quarter and annual-cycle closure errors per hub bus."""
        out: dict[tuple, float] = {}
        by_bus: dict[int, list[dict]] = {}
        for e in self.entries:
            by_bus.setdefault(e["bus"], []).append(e)
        for bus, rows in by_bus.items():
            rows.sort(key=lambda e: e["quarter"])
            D = self.days_per_quarter
            for prev, cur in zip(rows, rows[1:]):
                out[(bus, cur["quarter"])] = abs(
                    cur["e0"] - (prev["e0"] + D * prev["delta"]))
            out[(bus, "annual")] = abs(
                rows[0]["e0"] - (rows[-1]["e0"] + D * rows[-1]["delta"]))
        return out


@dataclass(frozen=True)
class ComparisonReport:
    run_a: str
    run_b: str
    rows: tuple[tuple[str, float, float], ...]   # field, value_a, value_b

    @staticmethod
    def delta(va: float, vb: float) -> float:
        return vb - va

    @staticmethod
    def delta_pct(va: float, vb: float) -> float:
        return 100.0 * (vb - va) / vb if vb != 0 else 0.0

    @property
    def cost_saving_pct(self) -> float:
        """Positive when run a is cheaper, relative to run b's cost."""
        for name, va, vb in self.rows:
            if name == "total_cost":
                return self.delta_pct(va, vb)
        raise ReportError("comparison has no total_cost row")


def _require_values(sol: Solution) -> np.ndarray:
    if sol.x is None or sol.index is None:
        raise ReportError("solution has no values or no variable index")
    return sol.x


def compute_metrics(case: GridCase, profiles: QuarterProfiles,
                    sol: Solution) -> AnnualMetrics:
    """Quarterly totals and annual cost from a feasible solution."""
    x = _require_values(sol)
    ix = sol.index
    D = float(case.days_per_quarter)
    nq, nt = ix.n_quarters, ix.n_hours

    curtail = np.zeros(nq)
    for w in range(ix.n_plants):
        for q in range(nq):
            curtail[q] += sum(x[ix.pcur(w, q, t)] for t in range(nt))
    conv = np.zeros(nq)
    for g in range(ix.n_gens):
        for q in range(nq):
            conv[q] += sum(x[ix.pg(g, q, t)] for t in range(nt))
    flow_pct = np.zeros(nq)
    if ix.n_branches:
        for q in range(nq):
            acc = 0.0
            for k in case.branches:
                for t in range(nt):
                    acc += abs(x[ix.pk(k.idx, q, t)]) / k.p_max
            flow_pct[q] = 100.0 * acc / (ix.n_branches * nt)

    # recompute the annual cost straight from the cost data as a guard
    recomputed = 0.0
    for g in case.generators:
        for q in range(nq):
            for t in range(nt):
                recomputed += D * (g.cost_energy * x[ix.pg(g.idx, q, t)]
                                   + g.cost_no_load * x[ix.u(g.idx, q, t)]
                                   + g.cost_startup * x[ix.v(g.idx, q, t)])
    total_cost = float(sol.objective) if sol.objective is not None else recomputed
    scale = max(1.0, abs(total_cost), abs(recomputed))
    if abs(total_cost - recomputed) > COST_RECOMPUTE_RTOL * scale:
        raise ReportError(f"objective {total_cost!r} does not match cost "
                          f"recomputation {recomputed!r}")

    return AnnualMetrics(
        variant=sol.variant.value if sol.variant else "",
        curtailment_mwh=tuple(float(c) * D for c in curtail),
        conv_gen_mwh=tuple(float(c) * D for c in conv),
        avg_flow_pct=tuple(float(f) for f in flow_pct),
        total_cost=total_cost,
        fingerprint=case_fingerprint(case) + ":" + profiles.fingerprint())


def storage_trajectory(case: GridCase, sol: Solution) -> StorageTrajectory:
    """Initial level, daily net exchange and day-1/day-D hourly levels."""
    x = _require_values(sol)
    ix = sol.index
    if sol.variant is not Variant.EH:
        raise ReportError("storage trajectories exist only for the hub variant")
    D = case.days_per_quarter
    entries = []
    for hb, n in enumerate(ix.hub_buses):
        for q in range(ix.n_quarters):
            hourly = hourly_hub_exchange(case, ix, x, n, q)
            e0 = float(x[ix.e0(hb, q)])
            levels = storage_levels(e0, hourly, D)
            entries.append({
                "bus": n,
                "bus_id": case.buses[n].id,
                "quarter": q + 1,
                "e0": e0,
                "delta": float(hourly.sum()),
                "levels_day_first": levels[0].copy(),
                "levels_day_last": levels[D - 1].copy(),
            })
    return StorageTrajectory(days_per_quarter=D, entries=tuple(entries))


def compare_runs(a: AnnualMetrics, b: AnnualMetrics,
                 label_a: str = "run_a", label_b: str = "run_b") -> ComparisonReport:
    """Field-by-field deltas between two runs on the same case/profiles."""
    if a.fingerprint != b.fingerprint:
        raise ReportError("metrics were computed on different case/profile inputs "
                          f"({a.fingerprint} vs {b.fingerprint})")
    if a.n_quarters != b.n_quarters:
        raise ReportError("metrics have different quarter counts")
    rows: list[tuple[str, float, float]] = []
    for q in range(a.n_quarters):
        rows.append((f"curtailment_q{q+1}_mwh",
                     a.curtailment_mwh[q], b.curtailment_mwh[q]))
    for q in range(a.n_quarters):
        rows.append((f"conv_gen_q{q+1}_mwh", a.conv_gen_mwh[q], b.conv_gen_mwh[q]))
    for q in range(a.n_quarters):
        rows.append((f"avg_flow_pct_q{q+1}", a.avg_flow_pct[q], b.avg_flow_pct[q]))
    rows.append(("total_cost", a.total_cost, b.total_cost))
    return ComparisonReport(run_a=label_a, run_b=label_b, rows=tuple(rows))


def hourly_generation(sol: Solution) -> np.ndarray:
    """Total conventional output, shape (quarters, hours)."""
    x = _require_values(sol)
    ix = sol.index
    out = np.zeros((ix.n_quarters, ix.n_hours))
    for g in range(ix.n_gens):
        for q in range(ix.n_quarters):
            for t in range(ix.n_hours):
                out[q, t] += x[ix.pg(g, q, t)]
    return out


# ---------------------------------------------------------------------------
# emitters

def emit_metrics_csv(metrics: AnnualMetrics, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["quarter", "curtailment_mwh", "conv_gen_mwh", "avg_flow_pct"])
        for q in range(metrics.n_quarters):
            w.writerow([q + 1, repr(metrics.curtailment_mwh[q]),
                        repr(metrics.conv_gen_mwh[q]),
                        repr(metrics.avg_flow_pct[q])])
        w.writerow(["total_cost", repr(metrics.total_cost), "", ""])


def load_metrics_csv(path: str | Path) -> dict:
    """Re-read an emitted metrics CSV (used for round-trip checks)."""
    quarters, total = [], None
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            if row["quarter"] == "total_cost":
                total = float(row["curtailment_mwh"])
            else:
                quarters.append({k: float(v) for k, v in row.items()})
    return {"quarters": quarters, "total_cost": total}


def emit_metrics_md(metrics: AnnualMetrics, path: str | Path) -> None:
    nq = metrics.n_quarters
    head = "| | " + " | ".join(f"Quarter {q+1}" for q in range(nq)) + " |"
    sep = "|---" * (nq + 1) + "|"
    lines = [head, sep]
    lines.append("| Wind Curtailment (MWh) | "
                 + " | ".join(f"{v:,.1f}" for v in metrics.curtailment_mwh) + " |")
    lines.append("| Conventional Generation (MWh) | "
                 + " | ".join(f"{v:,.1f}" for v in metrics.conv_gen_mwh) + " |")
    lines.append("| Average Power Flow Percentage (%) | "
                 + " | ".join(f"{v:.1f}%" for v in metrics.avg_flow_pct) + " |")
    lines.append(f"| Total Cost ($) | {metrics.total_cost:,.2f} |"
                 + " |" * (nq - 1))
    lines.append("")
    lines.append("Average power-flow percentage is the mean of |flow|/limit "
                 "over all branches and hours of the quarter (defined here).")
    Path(path).write_text("\n".join(lines) + "\n")


def emit_trajectory_csv(traj: StorageTrajectory, path: str | Path) -> None:
    D = traj.days_per_quarter
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bus", "quarter", "day", "hour", "level_mwh"])
        for e in traj.entries:
            for day, levels in ((1, e["levels_day_first"]), (D, e["levels_day_last"])):
                for t, lvl in enumerate(levels, start=1):
                    w.writerow([e["bus_id"], e["quarter"], day, t, repr(float(lvl))])


def emit_comparison_csv(cmp: ComparisonReport, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["field", "run_a", "run_b", "delta", "delta_pct"])
        for name, va, vb in cmp.rows:
            w.writerow([name, repr(va), repr(vb), repr(cmp.delta(va, vb)),
                        repr(cmp.delta_pct(va, vb))])


def emit_comparison_md(cmp: ComparisonReport, path: str | Path) -> None:
    lines = [f"| field | {cmp.run_a} | {cmp.run_b} | delta | delta % |",
             "|---|---|---|---|---|"]
    for name, va, vb in cmp.rows:
        lines.append(f"| {name} | {va:,.2f} | {vb:,.2f} | "
                     f"{cmp.delta(va, vb):,.2f} | {cmp.delta_pct(va, vb):.2f}% |")
    Path(path).write_text("\n".join(lines) + "\n")


def _svg_line_plot(series: list[tuple[str, np.ndarray]], title: str,
                   y_label: str) -> str:
    """Minimal self-contained SVG line chart, one polyline per series."""
    width, height = 720, 400
    ml, mr, mt, mb = 60, 16, 34, 40
    pw, ph = width - ml - mr, height - mt - mb
    n = max(len(v) for _, v in series)
    y_max = max(1e-9, max(float(np.max(v)) for _, v in series)) * 1.05
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]

    def sx(i: float) -> float:
        return ml + pw * i / max(1, n - 1)

    def sy(v: float) -> float:
        return mt + ph * (1.0 - v / y_max)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{width/2:.1f}" y="20" text-anchor="middle" '
             f'font-family="sans-serif" font-size="14">{title}</text>']
    # axes
    parts.append(f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt+ph}" stroke="black"/>')
    parts.append(f'<line x1="{ml}" y1="{mt+ph}" x2="{ml+pw}" y2="{mt+ph}" stroke="black"/>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        yv = y_max * frac
        parts.append(f'<line x1="{ml-4}" y1="{sy(yv):.1f}" x2="{ml}" '
                     f'y2="{sy(yv):.1f}" stroke="black"/>')
        parts.append(f'<text x="{ml-8}" y="{sy(yv)+4:.1f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="10">{yv:,.0f}</text>')
    for i in range(0, n, max(1, n // 8)):
        parts.append(f'<text x="{sx(i):.1f}" y="{mt+ph+16}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="10">{i+1}</text>')
    parts.append(f'<text x="{ml+pw/2:.1f}" y="{height-8}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="11">hour of day</text>')
    parts.append(f'<text x="14" y="{mt+ph/2:.1f}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="11" '
                 f'transform="rotate(-90 14 {mt+ph/2:.1f})">{y_label}</text>')
    for s, (label, vals) in enumerate(series):
        color = colors[s % len(colors)]
        pts = " ".join(f"{sx(i):.2f},{sy(float(v)):.2f}" for i, v in enumerate(vals))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="2"/>')
        parts.append(f'<text x="{ml+pw-6}" y="{mt+16+14*s}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11" '
                     f'fill="{color}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def emit_generation_svg(series: list[tuple[str, np.ndarray]], out_dir: str | Path,
                        stem: str = "generation") -> list[Path]:
    """One SVG per quarter; each series is a (label, (quarters, hours)) pair."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    nq = series[0][1].shape[0]
    paths = []
    for q in range(nq):
        quarter_series = [(label, vals[q]) for label, vals in series]
        svg = _svg_line_plot(quarter_series,
                             f"Conventional generation, quarter {q+1}",
                             "MW")
        p = out_dir / f"{stem}_q{q+1}.svg"
        p.write_text(svg + "\n")
        paths.append(p)
    return paths


def emit_report(artifact, fmt: str, path: str | Path):
    """Dispatch emitter: metrics/trajectory/comparison to csv/md, and
    generation-curve series to svg (``path`` is a directory for svg).
    """
    if isinstance(artifact, AnnualMetrics):
        if fmt == "csv":
            return emit_metrics_csv(artifact, path)
        if fmt == "md":
            return emit_metrics_md(artifact, path)
    elif isinstance(artifact, StorageTrajectory):
        if fmt == "csv":
            return emit_trajectory_csv(artifact, path)
    elif isinstance(artifact, ComparisonReport):
        if fmt == "csv":
            return emit_comparison_csv(artifact, path)
        if fmt == "md":
            return emit_comparison_md(artifact, path)
    elif isinstance(artifact, list) and fmt == "svg":
        return emit_generation_svg(artifact, path)
    raise ReportError(f"no emitter for {type(artifact).__name__} as {fmt}")

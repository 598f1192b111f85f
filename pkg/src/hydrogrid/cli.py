"""Batch entry points: solve one schedule, compare the two variants, or
sweep penetration levels and round-trip efficiencies.

Exit codes are a total function of the outcome: 0 solved and verified
clean, 1 configuration or I/O error, 2 not solved (infeasible, unbounded
or timed out without an incumbent), 3 verification or cross-run check
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from pathlib import Path

from . import report as rpt
from .formulation import Variant, build_model
from .grid import CaseError, GridCase, case_fingerprint, load_case, validate_case
from .mps import emit_mps
from .profiles import (ProfileError, ProfileShape, QuarterProfiles, load_profiles,
                       scale_to_penetration, synthesize_profiles)
from .solver import SolveOptions, SolverError, solve
from .verify import verify_solution

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_UNSOLVED = 2
EXIT_VERIFY = 3

# round-trip overrides fix the electrolyzer side and move the fuel cell
ETA_E_FIXED = 0.8


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    case_path: str
    out_dir: str
    profiles_path: str | None = None
    synth_shape: str | None = None      # 'default' or a shape JSON path
    seed: int = 0
    variant: str = "eh"
    penetration: float | None = None
    roundtrip: float | None = None
    solver: str = "scipy"
    mip_gap: float = 1e-4
    time_limit: float | None = None
    jobs: int = 1

    def validate(self) -> None:
        if (self.profiles_path is None) == (self.synth_shape is None):
            raise ConfigError("exactly one of --profiles / --synth must be given")
        if self.variant not in ("eh", "t"):
            raise ConfigError(f"variant must be 'eh' or 't', got '{self.variant}'")
        if self.penetration is not None and self.penetration < 0:
            raise ConfigError("penetration must be non-negative")
        if self.roundtrip is not None and not (0 < self.roundtrip <= ETA_E_FIXED):
            raise ConfigError(f"roundtrip must be in (0, {ETA_E_FIXED}] so the "
                              f"fuel-cell efficiency stays in (0, 1]")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")


def apply_round_trip(case: GridCase, roundtrip: float) -> GridCase:
    """Re-rate every hub to the requested electric round-trip efficiency,
    keeping the electrolyzer at the fixed split and moving the fuel cell.
    """
    eta_f = roundtrip / ETA_E_FIXED
    hubs = tuple(dataclasses.replace(h, electrolyzer_eff=ETA_E_FIXED,
                                     fuelcell_eff=eta_f)
                 for h in case.energy_hubs)
    return dataclasses.replace(case, energy_hubs=hubs)


def prepare_inputs(config: RunConfig) -> tuple[GridCase, QuarterProfiles]:
    case = load_case(config.case_path)
    report = validate_case(case)
    if not report.ok:
        raise ConfigError(f"case failed validation:\n{report}")
    if config.profiles_path is not None:
        profiles = load_profiles(config.profiles_path, case)
    else:
        if config.synth_shape == "default":
            shape = ProfileShape()
        else:
            shape = ProfileShape.from_json(config.synth_shape)
        profiles = synthesize_profiles(shape, case, config.seed)
    if config.penetration is not None:
        profiles = scale_to_penetration(profiles, case, config.penetration)
    if config.roundtrip is not None:
        case = apply_round_trip(case, config.roundtrip)
    return case, profiles


def _write_manifest(out: Path, config: RunConfig, extra: dict) -> None:
    doc = dataclasses.asdict(config)
    doc.update(extra)
    doc["eta_split"] = {"electrolyzer": ETA_E_FIXED,
                        "fuelcell": (config.roundtrip / ETA_E_FIXED
                                     if config.roundtrip is not None else None)}
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def run_solve(config: RunConfig) -> int:
    """Solve one variant and write the artifact set into the run directory:
    model.mps, solution.csv, verification.txt, metrics files, storage
    trajectory (hub variant) and per-quarter generation figures.
    """
    config.validate()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    case, profiles = prepare_inputs(config)
    t0 = time.perf_counter()
    model = build_model(case, profiles, Variant(config.variant))
    emit_mps(model, out / "model.mps")
    opts = SolveOptions(mip_gap=config.mip_gap, time_limit=config.time_limit,
                        solver_hint=config.solver)
    sol = solve(model, opts)
    base = {
        "status": sol.status,
        "objective": sol.objective,
        "fingerprint": case_fingerprint(case) + ":" + profiles.fingerprint(),
        "solve_seconds": round(sol.wall_time, 3),
        "total_seconds": round(time.perf_counter() - t0, 3),
    }
    if not sol.ok:
        _write_manifest(out, config, {**base, "exit_code": EXIT_UNSOLVED})
        print(f"not solved: status={sol.status}", file=sys.stderr)
        return EXIT_UNSOLVED

    names = model.column_names()
    with (out / "solution.csv").open("w") as fh:
        fh.write("column,value\n")
        for nm, vv in zip(names, sol.x):
            fh.write(f"{nm},{vv!r}\n")

    verification = verify_solution(case, profiles, model, sol)
    (out / "verification.txt").write_text(str(verification) + "\n")
    metrics = rpt.compute_metrics(case, profiles, sol)
    rpt.emit_metrics_csv(metrics, out / "metrics.csv")
    rpt.emit_metrics_md(metrics, out / "metrics.md")
    if model.variant is Variant.EH and case.energy_hubs:
        rpt.emit_trajectory_csv(rpt.storage_trajectory(case, sol),
                                out / "trajectory.csv")
    gen = rpt.hourly_generation(sol)
    with (out / "generation.csv").open("w") as fh:
        fh.write("quarter,hour,conv_gen_mw\n")
        for q in range(gen.shape[0]):
            for t in range(gen.shape[1]):
                fh.write(f"{q+1},{t+1},{gen[q, t]!r}\n")
    rpt.emit_generation_svg([(config.variant, gen)], out)

    code = EXIT_OK if verification.ok else EXIT_VERIFY
    _write_manifest(out, config, {**base, "exit_code": code,
                                  "verified_clean": verification.ok})
    if code != EXIT_OK:
        print(f"verification failed:\n{verification}", file=sys.stderr)
    else:
        print(f"{config.variant}: status={sol.status} "
              f"objective={sol.objective:,.2f} -> {out}")
    return code


def _load_generation_csv(path: Path):
    import numpy as np

    cells = {}
    with path.open() as fh:
        next(fh)
        for line in fh:
            q, t, vv = line.split(",")
            cells[(int(q) - 1, int(t) - 1)] = float(vv)
    nq = 1 + max(k[0] for k in cells)
    nt = 1 + max(k[1] for k in cells)
    gen = np.zeros((nq, nt))
    for (q, t), vv in cells.items():
        gen[q, t] = vv
    return gen


def run_compare(config: RunConfig) -> int:
    """Solve both variants on identical inputs and emit the comparison.

    Fails (exit 3) if the hub variant costs more than the benchmark beyond
    MIP-gap slack: the benchmark's feasible set is contained in the hub
    variant's, so a genuine optimum can never be worse.
    """
    config.validate()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = {}
    for variant in ("eh", "t"):
        leg = dataclasses.replace(config, variant=variant,
                                  out_dir=str(out / variant))
        code = run_solve(leg)
        if code != EXIT_OK:
            print(f"compare: variant '{variant}' failed with exit {code}",
                  file=sys.stderr)
            return code
        results[variant] = json.loads((out / variant / "manifest.json").read_text())

    cost_eh = results["eh"]["objective"]
    cost_t = results["t"]["objective"]
    metrics = {}
    for variant in ("eh", "t"):
        loaded = rpt.load_metrics_csv(out / variant / "metrics.csv")
        metrics[variant] = loaded
    # rebuild AnnualMetrics from the emitted files so the comparison uses
    # exactly what was reported
    fp = results["eh"]["fingerprint"]
    am = {}
    for variant in ("eh", "t"):
        rows = metrics[variant]["quarters"]
        am[variant] = rpt.AnnualMetrics(
            variant=variant,
            curtailment_mwh=tuple(r["curtailment_mwh"] for r in rows),
            conv_gen_mwh=tuple(r["conv_gen_mwh"] for r in rows),
            avg_flow_pct=tuple(r["avg_flow_pct"] for r in rows),
            total_cost=metrics[variant]["total_cost"],
            fingerprint=fp)
    cmp_report = rpt.compare_runs(am["eh"], am["t"], "eh", "t")
    rpt.emit_comparison_csv(cmp_report, out / "comparison.csv")
    rpt.emit_comparison_md(cmp_report, out / "comparison.md")

    # overlaid hourly-generation figures from the per-leg dumps
    series = []
    for variant in ("eh", "t"):
        gen = _load_generation_csv(out / variant / "generation.csv")
        series.append((variant, gen))
    rpt.emit_generation_svg(series, out, stem="generation_overlay")

    slack = config.mip_gap * max(abs(cost_eh), abs(cost_t)) + 1e-6
    if cost_eh > cost_t + slack:
        print(f"compare: hub-variant cost {cost_eh:,.2f} exceeds benchmark "
              f"{cost_t:,.2f} beyond slack {slack:,.2f}", file=sys.stderr)
        return EXIT_VERIFY
    print(f"compare: saving {cmp_report.cost_saving_pct:.2f}% "
          f"(eh {cost_eh:,.2f} vs t {cost_t:,.2f}) -> {out}")
    return EXIT_OK


def run_sweep(config: RunConfig, penetrations: list[float],
              roundtrips: list[float]) -> int:
    """Cartesian sweep of the hub variant; one summary row per cell.

    Per-cell failures are recorded and the sweep continues. Adds a
    monotonicity note per penetration: cost should not fall when round-trip
    efficiency drops.
    """
    config.validate()
    if not penetrations or not roundtrips:
        raise ConfigError("sweep lists must be non-empty")
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = list(product(penetrations, roundtrips))

    def run_cell(cell):
        pen, rt = cell
        sub = out / f"pen{pen:g}_rt{rt:g}"
        leg = dataclasses.replace(config, penetration=pen, roundtrip=rt,
                                  out_dir=str(sub))
        try:
            code = run_solve(leg)
        except (ConfigError, CaseError, ProfileError, SolverError) as e:
            return {"penetration": pen, "roundtrip": rt, "exit_code": EXIT_CONFIG,
                    "status": f"error: {e}", "total_cost": None,
                    "curtailment_mwh": None}
        row = {"penetration": pen, "roundtrip": rt, "exit_code": code,
               "status": "failed", "total_cost": None, "curtailment_mwh": None}
        manifest = sub / "manifest.json"
        if manifest.exists():
            doc = json.loads(manifest.read_text())
            row["status"] = doc.get("status", "unknown")
            row["total_cost"] = doc.get("objective")
        if code == EXIT_OK:
            loaded = rpt.load_metrics_csv(sub / "metrics.csv")
            row["curtailment_mwh"] = sum(r["curtailment_mwh"]
                                         for r in loaded["quarters"])
        return row

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            rows = list(pool.map(run_cell, cells))
    else:
        rows = [run_cell(c) for c in cells]

    with (out / "summary.csv").open("w") as fh:
        fh.write("penetration,roundtrip,exit_code,status,total_cost,curtailment_mwh\n")
        for r in rows:
            fh.write(f"{r['penetration']!r},{r['roundtrip']!r},{r['exit_code']},"
                     f"{r['status']},"
                     f"{'' if r['total_cost'] is None else repr(r['total_cost'])},"
                     f"{'' if r['curtailment_mwh'] is None else repr(r['curtailment_mwh'])}\n")

    notes = []
    for pen in penetrations:
        done = {r["roundtrip"]: r["total_cost"] for r in rows
                if r["penetration"] == pen and r["total_cost"] is not None}
        for rt_lo, rt_hi in product(sorted(done), sorted(done)):
            if rt_lo < rt_hi and done[rt_lo] < done[rt_hi] * (1 - config.mip_gap) - 1e-6:
                notes.append(f"penetration {pen:g}: cost at roundtrip {rt_lo:g} "
                             f"({done[rt_lo]:,.2f}) is below cost at {rt_hi:g} "
                             f"({done[rt_hi]:,.2f}); expected the opposite ordering")
    (out / "notes.txt").write_text(
        ("\n".join(notes) + "\n") if notes else "cost ordering consistent\n")
    failed = [r for r in rows if r["exit_code"] != EXIT_OK]
    print(f"sweep: {len(rows) - len(failed)}/{len(rows)} cells solved -> {out}")
    return EXIT_OK if not failed else max(r["exit_code"] for r in failed)


def _parse_float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--case", required=True, help="case JSON file")
    p.add_argument("--profiles", help="profile CSV (exclusive with --synth)")
    p.add_argument("--synth", nargs="?", const="default",
                   help="synthesize profiles; optional shape JSON path")
    p.add_argument("--seed", type=int, default=0, help="synthesis seed")
    p.add_argument("--solver", default="scipy",
                   help="adapter: scipy | external | auto")
    p.add_argument("--mip-gap", type=float, default=1e-4)
    p.add_argument("--time-limit", type=float, default=None, help="seconds")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel sweep cells")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hydrogrid",
        description="Annual typical-day scheduling for wind-heavy grids "
                    "with hydrogen energy hubs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="build, solve and verify one variant")
    _add_common(p)
    p.add_argument("--variant", choices=("eh", "t"), default="eh")
    p.add_argument("--penetration", type=float, default=None)
    p.add_argument("--roundtrip", type=float, default=None,
                   help="electric round-trip efficiency override")

    p = sub.add_parser("compare", help="solve both variants and diff them")
    _add_common(p)
    p.add_argument("--penetration", type=float, default=None)
    p.add_argument("--roundtrip", type=float, default=None)

    p = sub.add_parser("sweep", help="grid of penetration x round-trip cells")
    _add_common(p)
    p.add_argument("--penetration", required=True,
                   help="comma-separated list, e.g. 0.2,0.5")
    p.add_argument("--roundtrip", required=True,
                   help="comma-separated list, e.g. 0.48,0.37")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sweep":
            config = RunConfig(
                case_path=args.case, out_dir=args.out,
                profiles_path=args.profiles, synth_shape=args.synth,
                seed=args.seed, solver=args.solver, mip_gap=args.mip_gap,
                time_limit=args.time_limit, jobs=args.jobs)
            return run_sweep(config, _parse_float_list(args.penetration),
                             _parse_float_list(args.roundtrip))
        config = RunConfig(
            case_path=args.case, out_dir=args.out,
            profiles_path=args.profiles, synth_shape=args.synth,
            seed=args.seed, variant=getattr(args, "variant", "eh"),
            penetration=args.penetration, roundtrip=args.roundtrip,
            solver=args.solver, mip_gap=args.mip_gap,
            time_limit=args.time_limit, jobs=args.jobs)
        if args.command == "solve":
            return run_solve(config)
        return run_compare(config)
    except (ConfigError, CaseError, ProfileError, FileNotFoundError, SolverError,
            json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

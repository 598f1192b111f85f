"""Backend-agnostic MILP solving.

Two adapters share one contract: the in-process ``scipy`` adapter (HiGHS via
scipy.optimize.milp) and the ``external`` adapter, which emits MPS, invokes
the binary named by HYDROGRID_SOLVER_PATH as ``solver model.mps out.sol``
and reads the solution file back. ``.py`` solver paths are run through the
current interpreter. The returned objective is always recomputed from the
value vector; the backend's report is only cross-checked, never trusted.
"""

from __future__ import annotations

import os
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .formulation import EQ, GE, LE, MilpModel, Variant, VariableIndex

OBJ_REL_TOL = 1e-6          # recomputed vs backend-reported objective
BINARY_SNAP_TOL = 1e-6      # distance from {0,1} accepted for binaries

_STATUSES = ("optimal", "feasible", "infeasible", "unbounded", "timeout")


class SolverError(Exception):
    pass


@dataclass(frozen=True)
class SolveOptions:
    mip_gap: float = 1e-4            # relative MIP gap
    time_limit: float | None = None  # seconds
    solver_hint: str = "scipy"       # adapter name: scipy | external | auto

    def __post_init__(self):
        if self.mip_gap < 0:
            raise ValueError("mip_gap must be non-negative")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ValueError("time_limit must be positive")


@dataclass
class Solution:
    """Solver outcome; ``x`` covers every column when status is
    optimal/feasible, with binaries snapped to exact {0,1}.
    """

    status: str
    objective: float | None = None
    x: np.ndarray | None = None
    index: VariableIndex | None = None    # carried over from the model
    variant: Variant | None = None
    solver: str = ""
    wall_time: float = 0.0

    @property
    def values(self) -> np.ndarray | None:
        return self.x

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "feasible")


def recompute_objective(model: MilpModel, x: np.ndarray) -> float:
    return float(model.objective @ x)


def _finish(model: MilpModel, status: str, reported_obj: float | None,
            x: np.ndarray | None, solver: str, wall: float) -> Solution:
    if status not in _STATUSES:
        raise SolverError(f"backend returned unknown status '{status}'")
    if status not in ("optimal", "feasible") or x is None:
        if status in ("optimal", "feasible"):
            raise SolverError(f"backend reported {status} without a value vector")
        return Solution(status=status, index=model.index, variant=model.variant,
                        solver=solver, wall_time=wall)
    x = np.array(x, dtype=float)
    if x.shape != (model.n_cols,):
        raise SolverError(f"backend value vector has shape {x.shape}, "
                          f"expected ({model.n_cols},)")
    binaries = model.is_integer
    snapped = np.round(x[binaries])
    drift = np.abs(x[binaries] - snapped)
    if drift.size and drift.max() > BINARY_SNAP_TOL:
        raise SolverError(f"binary column off integrality by {drift.max():.3e}")
    x[binaries] = snapped
    objective = recompute_objective(model, x)
    if reported_obj is not None:
        scale = max(1.0, abs(objective), abs(reported_obj))
        if abs(objective - reported_obj) > OBJ_REL_TOL * scale:
            raise SolverError(
                f"backend objective {reported_obj!r} disagrees with recomputation "
                f"{objective!r} beyond {OBJ_REL_TOL} relative")
    return Solution(status=status, objective=objective, x=x, index=model.index,
                    variant=model.variant, solver=solver, wall_time=wall)


def _solve_scipy(model: MilpModel, opts: SolveOptions) -> Solution:
    import time

    from scipy.optimize import Bounds, LinearConstraint, milp

    t0 = time.perf_counter()
    options = {"disp": False, "presolve": True, "mip_rel_gap": opts.mip_gap}
    if opts.time_limit is not None:
        options["time_limit"] = opts.time_limit
    kwargs = {}
    if model.n_rows:
        lb, ub = model.row_bounds()
        kwargs["constraints"] = LinearConstraint(model.to_matrix(), lb, ub)
    res = milp(c=model.objective,
               integrality=model.is_integer.astype(np.uint8),
               bounds=Bounds(model.lo, model.hi),
               options=options, **kwargs)
    wall = time.perf_counter() - t0
    if res.status == 0:
        status = "optimal"
    elif res.status == 1:
        status = "feasible" if res.x is not None else "timeout"
    elif res.status == 2:
        status = "infeasible"
    elif res.status == 3:
        status = "unbounded"
    else:
        raise SolverError(f"scipy/HiGHS failure: {res.message}")
    reported = float(res.fun) if res.fun is not None else None
    return _finish(model, status, reported, res.x, "scipy", wall)


def _solve_external(model: MilpModel, opts: SolveOptions) -> Solution:
    import time

    from .mps import emit_mps, parse_solution_file

    binary = os.environ.get("HYDROGRID_SOLVER_PATH")
    if not binary:
        raise SolverError("external adapter: HYDROGRID_SOLVER_PATH is not set")
    if not Path(binary).exists():
        raise SolverError(f"external adapter: solver '{binary}' not found")
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory(prefix="hydrogrid-solve-") as tmp:
        mps_path = Path(tmp) / "model.mps"
        sol_path = Path(tmp) / "out.sol"
        emit_mps(model, mps_path)
        cmd = [binary, str(mps_path), str(sol_path)]
        if binary.endswith(".py"):
            cmd = [sys.executable] + cmd
        budget = None if opts.time_limit is None else opts.time_limit + 60.0
        try:
            proc = subprocess.run(cmd, capture_output=True, text=True, timeout=budget)
        except subprocess.TimeoutExpired:
            return Solution(status="timeout", index=model.index,
                            variant=model.variant, solver="external",
                            wall_time=time.perf_counter() - t0)
        if proc.returncode != 0:
            raise SolverError(f"external solver exited {proc.returncode}: "
                              f"{proc.stderr.strip()[:500]}")
        if not sol_path.exists():
            raise SolverError("external solver wrote no solution file")
        status, reported, x = parse_solution_file(sol_path, model.column_names())
    wall = time.perf_counter() - t0
    return _finish(model, status, reported, x, "external", wall)


_ADAPTERS = {"scipy": _solve_scipy, "external": _solve_external}


def solve(model: MilpModel, opts: SolveOptions | None = None) -> Solution:
    """Solve the model with the adapter named in the options.

    ``auto`` prefers the external binary when HYDROGRID_SOLVER_PATH is set
    and falls back to the in-process adapter. Infeasible/unbounded outcomes
    are returned as statuses, not raised.
    """
    opts = opts or SolveOptions()
    model.check_well_formed()
    hint = opts.solver_hint
    if hint == "auto":
        hint = "external" if os.environ.get("HYDROGRID_SOLVER_PATH") else "scipy"
    if hint not in _ADAPTERS:
        raise SolverError(f"unknown solver adapter '{hint}' "
                          f"(have: {', '.join(sorted(_ADAPTERS))}, auto)")
    return _ADAPTERS[hint](model, opts)


# ---------------------------------------------------------------------------
# matrix-path residuals, keyed for comparison against the independent verifier

def _interval_violation(value: float, lo: float, hi: float) -> float:
    return max(0.0, lo - value, value - hi)


def residuals_from_model(model: MilpModel, x: np.ndarray) -> dict[tuple, float]:
    """Violation magnitude per semantic key, evaluated from the model matrix
    and bounds. Keys match verify.residuals_from_case so the two code paths
    can be diffed; engineering-only column bounds (generator output/reserve
    caps, which duplicate explicit rows) are not keyed.
    """
    res: dict[tuple, float] = {}
    ax = model.to_matrix() @ x
    lb, ub = model.row_bounds()
    for i, label in enumerate(model.row_labels):
        res[label] = _interval_violation(float(ax[i]), float(lb[i]), float(ub[i]))

    ix = model.index
    if ix is None:
        return res
    for q in range(ix.n_quarters):
        qq = q + 1
        for t in range(ix.n_hours):
            tt = t + 1
            for g in range(ix.n_gens):
                res[("eq3", ("g", g), ("q", qq), ("t", tt), ("side", "lo"))] = \
                    max(0.0, -float(x[ix.r(g, q, t)]))
                for tag, colv in (("eq11", x[ix.u(g, q, t)]), ("eq10", x[ix.v(g, q, t)])):
                    colv = float(colv)
                    res[(tag, ("g", g), ("q", qq), ("t", tt))] = \
                        max(abs(colv - round(colv)),
                            _interval_violation(colv, 0.0, 1.0))
            for k in range(ix.n_branches):
                j = ix.pk(k, q, t)
                res[("eq6", ("k", k), ("q", qq), ("t", tt))] = \
                    _interval_violation(float(x[j]), float(model.lo[j]), float(model.hi[j]))
            for w in range(ix.n_plants):
                j = ix.pcur(w, q, t)
                res[("eq7", ("w", w), ("q", qq), ("t", tt))] = \
                    _interval_violation(float(x[j]), float(model.lo[j]), float(model.hi[j]))
            for h in range(ix.n_hubs):
                j = ix.pe(h, q, t)
                res[("eq13", ("e", h), ("q", qq), ("t", tt))] = \
                    _interval_violation(float(x[j]), float(model.lo[j]), float(model.hi[j]))
                j = ix.pf(h, q, t)
                res[("eq14", ("f", h), ("q", qq), ("t", tt))] = \
                    _interval_violation(float(x[j]), float(model.lo[j]), float(model.hi[j]))
    # reference angle pin: the only angle columns fixed to [0, 0]
    for n in range(ix.n_buses):
        if model.lo[ix.th(n, 0, 0)] != 0.0 or model.hi[ix.th(n, 0, 0)] != 0.0:
            continue
        for q in range(ix.n_quarters):
            for t in range(ix.n_hours):
                res[("ref", ("n", n), ("q", q + 1), ("t", t + 1))] = \
                    abs(float(x[ix.th(n, q, t)]))
    for hb in range(len(ix.hub_buses)):
        for q in range(ix.n_quarters):
            j = ix.e0(hb, q)
            res[("e0-bound", ("n", ix.hub_buses[hb]), ("q", q + 1))] = \
                _interval_violation(float(x[j]), float(model.lo[j]), float(model.hi[j]))
    return res

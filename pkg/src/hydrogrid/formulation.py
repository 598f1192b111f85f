"""Solver-agnostic MILP for the annual typical-day schedule.

Two variants share one variable layout:

* ``eh`` couples the grid with hydrogen hubs: nodal balance includes
  electrolyzer draw and fuel-cell output, and hydrogen storage is chained
  hour-to-hour, day-to-day and quarter-to-quarter, closing over the year.
* ``t`` is the hub-free benchmark: the same unit-commitment and network
  constraints, hub columns pinned to zero, plain nodal balance.

Row labels carry an equation tag plus entity/quarter/hour coordinates and
render as ``eqTAG[g=...,q=...,t=...]`` strings; quarters and hours are
1-based in labels, entities use dense case indices.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .grid import GridCase, validate_case
from .profiles import QuarterProfiles


class Variant(enum.Enum):
    EH = "eh"   # hub-coupled schedule
    T = "t"     # hub-free benchmark


class FormulationError(Exception):
    pass


# relation codes for constraint rows
LE, GE, EQ = "<=", ">=", "=="


def _acc(coefs: dict[int, float], col: int, val: float) -> None:
    """Accumulate a coefficient; colliding terms add instead of overwrite
    (e.g. wrap rows on a one-hour day, the annual cycle on a one-quarter
    horizon).
    """
    coefs[col] = coefs.get(col, 0.0) + val

# column families, in layout order
_FAMILIES = ("Pg", "r", "u", "v", "Pk", "th", "Pcur", "Pe", "Pf", "E0")


@dataclass(frozen=True)
class VariableIndex:
    """Dense, contiguous column layout for all decision variables.

    Per quarter-hour there is one column per generator for output, reserve,
    commitment and startup; one per branch flow; one per bus angle; one per
    wind plant curtailment; one per hub electrolyzer and fuel cell. Initial
    storage (E0) has one column per hub bus per quarter. Commitment and
    startup columns are the only integer columns.
    """

    n_gens: int
    n_branches: int
    n_buses: int
    n_plants: int
    n_hubs: int
    hub_buses: tuple[int, ...]
    n_quarters: int
    n_hours: int
    offsets: dict[str, int]
    n_cols: int

    @staticmethod
    def build(case: GridCase, n_quarters: int = 4, n_hours: int = 24) -> "VariableIndex":
        counts = {
            "Pg": len(case.generators), "r": len(case.generators),
            "u": len(case.generators), "v": len(case.generators),
            "Pk": len(case.branches), "th": len(case.buses),
            "Pcur": len(case.wind_plants),
            "Pe": len(case.energy_hubs), "Pf": len(case.energy_hubs),
        }
        qt = n_quarters * n_hours
        offsets = {}
        at = 0
        for fam in _FAMILIES[:-1]:
            offsets[fam] = at
            at += counts[fam] * qt
        offsets["E0"] = at
        at += len(case.hub_buses) * n_quarters
        return VariableIndex(
            n_gens=len(case.generators), n_branches=len(case.branches),
            n_buses=len(case.buses), n_plants=len(case.wind_plants),
            n_hubs=len(case.energy_hubs), hub_buses=case.hub_buses,
            n_quarters=n_quarters, n_hours=n_hours,
            offsets=offsets, n_cols=at)

    # q, t are 0-based here; labels and file names render them 1-based
    def _at(self, fam: str, e: int, q: int, t: int) -> int:
        return self.offsets[fam] + (e * self.n_quarters + q) * self.n_hours + t

    def pg(self, g: int, q: int, t: int) -> int:
        return self._at("Pg", g, q, t)

    def r(self, g: int, q: int, t: int) -> int:
        return self._at("r", g, q, t)

    def u(self, g: int, q: int, t: int) -> int:
        return self._at("u", g, q, t)

    def v(self, g: int, q: int, t: int) -> int:
        return self._at("v", g, q, t)

    def pk(self, k: int, q: int, t: int) -> int:
        return self._at("Pk", k, q, t)

    def th(self, n: int, q: int, t: int) -> int:
        return self._at("th", n, q, t)

    def pcur(self, w: int, q: int, t: int) -> int:
        return self._at("Pcur", w, q, t)

    def pe(self, e: int, q: int, t: int) -> int:
        return self._at("Pe", e, q, t)

    def pf(self, f: int, q: int, t: int) -> int:
        return self._at("Pf", f, q, t)

    def e0(self, hub_bus_pos: int, q: int) -> int:
        return self.offsets["E0"] + hub_bus_pos * self.n_quarters + q

    def binary_columns(self) -> np.ndarray:
        qt = self.n_quarters * self.n_hours
        lo = self.offsets["u"]
        hi = self.offsets["v"] + self.n_gens * qt
        return np.arange(lo, hi)

    def column_names(self) -> list[str]:
        names = [""] * self.n_cols
        ent_counts = {"Pg": self.n_gens, "r": self.n_gens, "u": self.n_gens,
                      "v": self.n_gens, "Pk": self.n_branches, "th": self.n_buses,
                      "Pcur": self.n_plants, "Pe": self.n_hubs, "Pf": self.n_hubs}
        dim = {"Pg": "g", "r": "g", "u": "g", "v": "g", "Pk": "k", "th": "n",
               "Pcur": "w", "Pe": "e", "Pf": "f"}
        for fam in _FAMILIES[:-1]:
            d = dim[fam]
            for e in range(ent_counts[fam]):
                for q in range(self.n_quarters):
                    for t in range(self.n_hours):
                        names[self._at(fam, e, q, t)] = f"{fam}[{d}={e},q={q+1},t={t+1}]"
        for h, n in enumerate(self.hub_buses):
            for q in range(self.n_quarters):
                names[self.e0(h, q)] = f"E0[n={n},q={q+1}]"
        return names


def render_label(label: tuple) -> str:
    """``("eq8", ("g", 0), ("q", 1), ("t", 2), ("side", "hi"))`` ->
    ``eq8[g=0,q=1,t=2,side=hi]``
    """
    tag, *dims = label
    inner = ",".join(f"{k}={v}" for k, v in dims)
    return f"{tag}[{inner}]"


@dataclass
class MilpModel:
    """Sparse minimize-model: cost row, linear rows, bounds, integrality.

    Rows are stored in insertion order and rebuilt identically for identical
    inputs, so emitted files are byte-stable.
    """

    n_cols: int
    index: VariableIndex | None = None
    variant: Variant | None = None
    objective: np.ndarray = None  # dense cost row; constant term is 0
    lo: np.ndarray = None
    hi: np.ndarray = None
    is_integer: np.ndarray = None
    row_cols: list[np.ndarray] = field(default_factory=list)
    row_vals: list[np.ndarray] = field(default_factory=list)
    row_rel: list[str] = field(default_factory=list)
    row_rhs: list[float] = field(default_factory=list)
    row_labels: list[tuple] = field(default_factory=list)
    col_names: list[str] | None = None

    def __post_init__(self):
        if self.objective is None:
            self.objective = np.zeros(self.n_cols)
        if self.lo is None:
            self.lo = np.zeros(self.n_cols)
        if self.hi is None:
            self.hi = np.full(self.n_cols, math.inf)
        if self.is_integer is None:
            self.is_integer = np.zeros(self.n_cols, dtype=bool)

    @property
    def n_rows(self) -> int:
        return len(self.row_rel)

    def add_row(self, coefs: dict[int, float], rel: str, rhs: float, label: tuple) -> None:
        """Coefficients accumulate per column; exact cancellations drop out."""
        cols = np.fromiter(coefs.keys(), dtype=np.int64, count=len(coefs))
        vals = np.fromiter(coefs.values(), dtype=float, count=len(coefs))
        keep = vals != 0.0
        order = np.argsort(cols[keep], kind="stable")
        self.row_cols.append(cols[keep][order])
        self.row_vals.append(vals[keep][order])
        self.row_rel.append(rel)
        self.row_rhs.append(float(rhs))
        self.row_labels.append(label)

    def set_bounds(self, col: int, lo: float, hi: float) -> None:
        self.lo[col] = lo
        self.hi[col] = hi

    def row_names(self) -> list[str]:
        return [render_label(lb) for lb in self.row_labels]

    def column_names(self) -> list[str]:
        if self.col_names is not None:
            return self.col_names
        if self.index is not None:
            return self.index.column_names()
        return [f"x{j}" for j in range(self.n_cols)]

    def to_matrix(self) -> sp.csr_matrix:
        nnz = sum(len(c) for c in self.row_cols)
        data = np.empty(nnz)
        indices = np.empty(nnz, dtype=np.int64)
        indptr = np.zeros(self.n_rows + 1, dtype=np.int64)
        at = 0
        for i, (cols, vals) in enumerate(zip(self.row_cols, self.row_vals)):
            indices[at:at + len(cols)] = cols
            data[at:at + len(cols)] = vals
            at += len(cols)
            indptr[i + 1] = at
        return sp.csr_matrix((data, indices, indptr), shape=(self.n_rows, self.n_cols))

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-row [lb, ub] interval equivalent to (relation, rhs)."""
        rhs = np.asarray(self.row_rhs)
        lb = np.where([r in (GE, EQ) for r in self.row_rel], rhs, -math.inf)
        ub = np.where([r in (LE, EQ) for r in self.row_rel], rhs, math.inf)
        return lb, ub

    def check_well_formed(self) -> None:
        for vals, label in zip(self.row_vals, self.row_labels):
            if not np.all(np.isfinite(vals)):
                raise FormulationError(f"non-finite coefficient in {render_label(label)}")
        if not np.all(np.isfinite(self.row_rhs)):
            raise FormulationError("non-finite right-hand side")
        if not np.all(np.isfinite(self.objective)):
            raise FormulationError("non-finite objective coefficient")
        if np.any(self.lo > self.hi):
            j = int(np.argmax(self.lo > self.hi))
            raise FormulationError(f"empty bound interval on column {j}")


def build_variables(case: GridCase, n_quarters: int = 4, n_hours: int = 24) -> VariableIndex:
    return VariableIndex.build(case, n_quarters, n_hours)


def new_model(case: GridCase, index: VariableIndex, variant: Variant) -> MilpModel:
    model = MilpModel(n_cols=index.n_cols, index=index, variant=variant)
    for g in range(index.n_gens):
        for q in range(index.n_quarters):
            for t in range(index.n_hours):
                model.set_bounds(index.u(g, q, t), 0.0, 1.0)
                model.set_bounds(index.v(g, q, t), 0.0, 1.0)
                model.is_integer[index.u(g, q, t)] = True
                model.is_integer[index.v(g, q, t)] = True
    return model


def add_generator_constraints(model: MilpModel, case: GridCase) -> int:
    """Commitment window, reserve deliverability and cap, system reserve
    adequacy, hourly ramping, startup logic, and the day-wrap rows joining
    hour 1 to the last hour of the repeating day.

    The system reserve row keeps the unit's own reserve on both sides, as
    stated; its net coefficient on r_g is therefore zero.
    """
    ix = model.index
    start = model.n_rows
    for g in case.generators:
        for q in range(ix.n_quarters):
            for t in range(ix.n_hours):
                p = ix.pg(g.idx, q, t)
                r = ix.r(g.idx, q, t)
                u = ix.u(g.idx, q, t)
                model.set_bounds(p, 0.0, g.p_max)
                model.set_bounds(r, 0.0, g.ramp_10min)
                model.add_row({p: 1.0, u: -g.p_min}, GE, 0.0,
                              ("eq1", ("g", g.idx), ("q", q + 1), ("t", t + 1)))
                model.add_row({p: 1.0, r: 1.0, u: -g.p_max}, LE, 0.0,
                              ("eq2", ("g", g.idx), ("q", q + 1), ("t", t + 1)))
                model.add_row({r: 1.0, u: -g.ramp_10min}, LE, 0.0,
                              ("eq3", ("g", g.idx), ("q", q + 1), ("t", t + 1), ("side", "hi")))
    # system reserve covers each unit's output plus its own reserve
    for g in case.generators:
        for q in range(ix.n_quarters):
            for t in range(ix.n_hours):
                coefs = {ix.r(m.idx, q, t): 1.0 for m in case.generators}
                coefs[ix.pg(g.idx, q, t)] = coefs.get(ix.pg(g.idx, q, t), 0.0) - 1.0
                coefs[ix.r(g.idx, q, t)] = coefs[ix.r(g.idx, q, t)] - 1.0
                model.add_row(coefs, GE, 0.0,
                              ("eq4", ("g", g.idx), ("q", q + 1), ("t", t + 1)))
    # hourly ramp and startup linkage within the day (t >= 2)
    for g in case.generators:
        for q in range(ix.n_quarters):
            for t in range(1, ix.n_hours):
                p1 = ix.pg(g.idx, q, t)
                p0 = ix.pg(g.idx, q, t - 1)
                model.add_row({p1: 1.0, p0: -1.0}, LE, g.ramp_hourly,
                              ("eq8", ("g", g.idx), ("q", q + 1), ("t", t + 1), ("side", "hi")))
                model.add_row({p1: 1.0, p0: -1.0}, GE, -g.ramp_hourly,
                              ("eq8", ("g", g.idx), ("q", q + 1), ("t", t + 1), ("side", "lo")))
                model.add_row({ix.v(g.idx, q, t): 1.0, ix.u(g.idx, q, t): -1.0,
                               ix.u(g.idx, q, t - 1): 1.0}, GE, 0.0,
                              ("eq9", ("g", g.idx), ("q", q + 1), ("t", t + 1)))
    # wrap rows: the day repeats, so hour 1 follows the previous day's last hour
    last = ix.n_hours - 1
    for g in case.generators:
        for q in range(ix.n_quarters):
            wrap: dict[int, float] = {}
            _acc(wrap, ix.pg(g.idx, q, 0), 1.0)
            _acc(wrap, ix.pg(g.idx, q, last), -1.0)
            model.add_row(wrap, LE, g.ramp_hourly,
                          ("eq15", ("g", g.idx), ("q", q + 1), ("side", "hi")))
            model.add_row(wrap, GE, -g.ramp_hourly,
                          ("eq15", ("g", g.idx), ("q", q + 1), ("side", "lo")))
            commit: dict[int, float] = {ix.v(g.idx, q, 0): 1.0}
            _acc(commit, ix.u(g.idx, q, 0), -1.0)
            _acc(commit, ix.u(g.idx, q, last), 1.0)
            model.add_row(commit, GE, 0.0,
                          ("eq16", ("g", g.idx), ("q", q + 1)))
    return model.n_rows - start


def add_network_constraints(model: MilpModel, case: GridCase) -> int:
    """DC flow definition per branch; thermal limits and the reference-bus
    pin are column bounds. Non-reference angles are unbounded.
    """
    ix = model.index
    start = model.n_rows
    ref = case.reference_idx
    for n in range(ix.n_buses):
        for q in range(ix.n_quarters):
            for t in range(ix.n_hours):
                col = ix.th(n, q, t)
                if n == ref:
                    model.set_bounds(col, 0.0, 0.0)
                else:
                    model.set_bounds(col, -math.inf, math.inf)
    for k in case.branches:
        b = 1.0 / k.reactance
        for q in range(ix.n_quarters):
            for t in range(ix.n_hours):
                model.set_bounds(ix.pk(k.idx, q, t), -k.p_max, k.p_max)
                model.add_row({ix.pk(k.idx, q, t): 1.0,
                               ix.th(k.from_idx, q, t): -b,
                               ix.th(k.to_idx, q, t): b}, EQ, 0.0,
                              ("eq5", ("k", k.idx), ("q", q + 1), ("t", t + 1)))
    return model.n_rows - start


def add_wind_constraints(model: MilpModel, case: GridCase,
                         profiles: QuarterProfiles) -> int:
    """Curtailment is bounded by hourly availability; pure column bounds."""
    ix = model.index
    for w in case.wind_plants:
        for q in range(ix.n_quarters):
            for t in range(ix.n_hours):
                model.set_bounds(ix.pcur(w.idx, q, t), 0.0,
                                 float(profiles.wind_avail[q, w.idx, t]))
    return 0


def add_balance_constraints(model: MilpModel, case: GridCase,
                            profiles: QuarterProfiles, variant: Variant) -> int:
    """One nodal equality per (bus, quarter, hour).

    Generation plus net inflow plus delivered wind (availability moves to
    the right-hand side, curtailment stays a variable) plus fuel-cell output
    equals demand plus electrolyzer draw. The benchmark variant drops the
    hub terms and pins all hub columns (including E0) to zero so both
    variants share one column layout.
    """
    ix = model.index
    start = model.n_rows
    tag = "eq12" if variant is Variant.EH else "eq21"
    for n in range(ix.n_buses):
        for q in range(ix.n_quarters):
            for t in range(ix.n_hours):
                coefs: dict[int, float] = {}
                for g in case.gens_at_bus[n]:
                    coefs[ix.pg(g, q, t)] = 1.0
                for k in case.branches_to_bus[n]:
                    coefs[ix.pk(k, q, t)] = coefs.get(ix.pk(k, q, t), 0.0) + 1.0
                for k in case.branches_from_bus[n]:
                    coefs[ix.pk(k, q, t)] = coefs.get(ix.pk(k, q, t), 0.0) - 1.0
                rhs = float(profiles.demand[q, n, t])
                for w in case.plants_at_bus[n]:
                    rhs -= float(profiles.wind_avail[q, w, t])
                    coefs[ix.pcur(w, q, t)] = -1.0
                if variant is Variant.EH:
                    for h in case.hubs_at_bus[n]:
                        coefs[ix.pf(h, q, t)] = 1.0
                        coefs[ix.pe(h, q, t)] = -1.0
                model.add_row(coefs, EQ, rhs,
                              (tag, ("n", n), ("q", q + 1), ("t", t + 1)))
    if variant is Variant.T:
        for h in case.energy_hubs:
            for q in range(ix.n_quarters):
                for t in range(ix.n_hours):
                    model.set_bounds(ix.pe(h.idx, q, t), 0.0, 0.0)
                    model.set_bounds(ix.pf(h.idx, q, t), 0.0, 0.0)
        for hb in range(len(ix.hub_buses)):
            for q in range(ix.n_quarters):
                model.set_bounds(ix.e0(hb, q), 0.0, 0.0)
    return model.n_rows - start


def add_hub_constraints(model: MilpModel, case: GridCase) -> int:
    """Electrolyzer and fuel-cell power capacity; pure column bounds."""
    ix = model.index
    for h in case.energy_hubs:
        for q in range(ix.n_quarters):
            for t in range(ix.n_hours):
                model.set_bounds(ix.pe(h.idx, q, t), 0.0, h.electrolyzer_p_max)
                model.set_bounds(ix.pf(h.idx, q, t), 0.0, h.fuelcell_p_max)
    return 0


def hub_exchange_coefs(case: GridCase, ix: VariableIndex, n: int, q: int,
                       t: int) -> dict[int, float]:
    """Columns and weights of the net hydrogen made at bus n in hour t:
    electrolyzer power times its efficiency, minus fuel-cell power divided
    by its efficiency.
    """
    coefs: dict[int, float] = {}
    for h in case.hubs_at_bus[n]:
        hub = case.energy_hubs[h]
        coefs[ix.pe(h, q, t)] = hub.electrolyzer_eff
        coefs[ix.pf(h, q, t)] = -1.0 / hub.fuelcell_eff
    return coefs


def add_storage_constraints(model: MilpModel, case: GridCase) -> int:
    """Hydrogen storage chaining for the hub variant.

    The level at the start of hour t of day d is
    ``E0 + (d-1)*delta + prefix(t)`` where ``delta`` is the whole-day net
    exchange and ``prefix(t)`` accumulates hours before t. The level is
    affine in d, so capacity bounds enforced at d=1 and d=D hold for every
    day in between; the independent verifier still checks all days.
    Quarter chaining equates each quarter's E0 with the previous quarter's
    end-of-last-day level, and the final quarter closes back onto the
    first quarter's E0, making net annual hydrogen exchange zero.
    """
    ix = model.index
    start = model.n_rows
    D = case.days_per_quarter
    day_ends = (1,) if D == 1 else (1, D)
    for hb, n in enumerate(ix.hub_buses):
        cap = sum(case.energy_hubs[h].storage_e_max for h in case.hubs_at_bus[n])
        for q in range(ix.n_quarters):
            model.set_bounds(ix.e0(hb, q), 0.0, cap)
            hourly = [hub_exchange_coefs(case, ix, n, q, t) for t in range(ix.n_hours)]
            delta: dict[int, float] = {}
            for h in hourly:
                for c, vv in h.items():
                    delta[c] = delta.get(c, 0.0) + vv
            prefix: dict[int, float] = {}
            for t in range(ix.n_hours):
                # level at start of hour t+1 on day d: E0 + (d-1)*delta + prefix
                for d in day_ends:
                    coefs = {ix.e0(hb, q): 1.0}
                    for c, vv in delta.items():
                        coefs[c] = coefs.get(c, 0.0) + (d - 1) * vv
                    for c, vv in prefix.items():
                        coefs[c] = coefs.get(c, 0.0) + vv
                    base = ("n", n), ("q", q + 1), ("t", t + 1), ("d", d)
                    model.add_row(dict(coefs), GE, 0.0,
                                  ("storage-bound", *base, ("side", "lo")))
                    model.add_row(coefs, LE, cap,
                                  ("storage-bound", *base, ("side", "hi")))
                for c, vv in hourly[t].items():
                    prefix[c] = prefix.get(c, 0.0) + vv
        # E0 of quarter q equals the end-of-hour-24, day-D level of quarter
        # q-1, i.e. E0_{q-1} + D * delta_{q-1}
        for q in range(1, ix.n_quarters):
            coefs = {ix.e0(hb, q): 1.0, ix.e0(hb, q - 1): -1.0}
            for t in range(ix.n_hours):
                for c, vv in hub_exchange_coefs(case, ix, n, q - 1, t).items():
                    coefs[c] = coefs.get(c, 0.0) - D * vv
            model.add_row(coefs, EQ, 0.0, ("eq18", ("n", n), ("q", q + 1)))
        # annual cycle: last quarter's closing level returns to E0 of quarter 1
        lastq = ix.n_quarters - 1
        coefs = {}
        _acc(coefs, ix.e0(hb, 0), 1.0)
        _acc(coefs, ix.e0(hb, lastq), -1.0)
        for t in range(ix.n_hours):
            for c, vv in hub_exchange_coefs(case, ix, n, lastq, t).items():
                _acc(coefs, c, -D * vv)
        model.add_row(coefs, EQ, 0.0, ("eq19", ("n", n)))
    return model.n_rows - start


def build_objective(model: MilpModel, case: GridCase) -> np.ndarray:
    """Total annual operating cost: energy, no-load and startup terms per
    generator hour, weighted by days per quarter. Every other column has
    zero cost.
    """
    ix = model.index
    D = float(case.days_per_quarter)
    model.objective[:] = 0.0
    for g in case.generators:
        for q in range(ix.n_quarters):
            for t in range(ix.n_hours):
                model.objective[ix.pg(g.idx, q, t)] = g.cost_energy * D
                model.objective[ix.u(g.idx, q, t)] = g.cost_no_load * D
                model.objective[ix.v(g.idx, q, t)] = g.cost_startup * D
    return model.objective


def build_model(case: GridCase, profiles: QuarterProfiles,
                variant: Variant | str = Variant.EH) -> MilpModel:
    """Compose the full model in a fixed builder order; deterministic for
    identical inputs.
    """
    if isinstance(variant, str):
        variant = Variant(variant)
    report = validate_case(case)
    if not report.ok:
        raise FormulationError(f"case is not admissible:\n{report}")
    if profiles.demand.shape[1] != len(case.buses):
        raise FormulationError("profiles bus axis does not match the case")
    if profiles.wind_avail.shape[1] != len(case.wind_plants):
        raise FormulationError("profiles plant axis does not match the case")

    ix = build_variables(case, profiles.n_quarters, profiles.n_hours)
    model = new_model(case, ix, variant)
    add_generator_constraints(model, case)
    add_network_constraints(model, case)
    add_wind_constraints(model, case, profiles)
    add_balance_constraints(model, case, profiles, variant)
    if variant is Variant.EH:
        add_hub_constraints(model, case)
        add_storage_constraints(model, case)
    build_objective(model, case)
    model.check_well_formed()
    return model

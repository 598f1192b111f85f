"""Independent feasibility check of a solved schedule.

Every constraint is re-evaluated directly from the case and profile data,
not from the model matrix, so builder bugs cannot hide from the check. The
storage trajectory is expanded at every day of the quarter, not only the
endpoint days the builder relies on. Findings are data: each one carries
the equation tag, the entity, its (quarter, hour, day) coordinates and the
violation magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .formulation import MilpModel, Variant, VariableIndex
from .grid import GridCase
from .profiles import QuarterProfiles

DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class Violation:
    key: tuple
    magnitude: float

    def __str__(self) -> str:
        tag, *dims = self.key
        where = ",".join(f"{k}={v}" for k, v in dims)
        return f"{tag}[{where}] violated by {self.magnitude:.6g}"


@dataclass
class VerificationReport:
    tol: float
    violations: list[Violation] = field(default_factory=list)
    n_checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def max_violation(self) -> float:
        return max((v.magnitude for v in self.violations), default=0.0)

    def __str__(self) -> str:
        head = (f"checked {self.n_checked} constraints at tol {self.tol:g}: "
                f"{'clean' if self.ok else f'{len(self.violations)} violations'}")
        lines = [head] + [str(v) for v in self.violations[:200]]
        if len(self.violations) > 200:
            lines.append(f"... and {len(self.violations) - 200} more")
        return "\n".join(lines)


def _excess(value: float, lo: float, hi: float) -> float:
    return max(0.0, lo - value, value - hi)


def hourly_hub_exchange(case: GridCase, ix: VariableIndex, x: np.ndarray,
                        n: int, q: int) -> np.ndarray:
    """MWh of hydrogen added to bus-n storage in each hour of quarter q."""
    out = np.zeros(ix.n_hours)
    for t in range(ix.n_hours):
        acc = 0.0
        for h in case.hubs_at_bus[n]:
            hub = case.energy_hubs[h]
            acc += hub.electrolyzer_eff * x[ix.pe(h, q, t)]
            acc -= x[ix.pf(h, q, t)] / hub.fuelcell_eff
        out[t] = acc
    return out


def storage_levels(e0: float, hourly: np.ndarray, days: int) -> np.ndarray:
    """Start-of-hour storage levels, shape (days, hours).

    Level at (day d, hour t) is e0 plus (d-1) whole days of net exchange
    plus the exchange of the hours before t on day d.
    """
    prefix = np.concatenate([[0.0], np.cumsum(hourly)[:-1]])
    delta = float(hourly.sum())
    return e0 + delta * np.arange(days)[:, None] + prefix[None, :]


def residuals_from_case(case: GridCase, profiles: QuarterProfiles,
                        variant: Variant, ix: VariableIndex,
                        x: np.ndarray) -> dict[tuple, float]:
    """Violation magnitude per semantic key, recomputed from raw case data.

    Key layout mirrors solver.residuals_from_model. Storage levels here are
    keyed only at the endpoint days so the two paths stay comparable; the
    all-days expansion is done by verify_solution on top of this.
    """
    res: dict[tuple, float] = {}
    nq, nt = ix.n_quarters, ix.n_hours
    D = case.days_per_quarter

    total_reserve = np.zeros((nq, nt))
    for m in case.generators:
        for q in range(nq):
            for t in range(nt):
                total_reserve[q, t] += x[ix.r(m.idx, q, t)]

    for g in case.generators:
        gi = g.idx
        for q in range(nq):
            p = np.array([x[ix.pg(gi, q, t)] for t in range(nt)])
            r = np.array([x[ix.r(gi, q, t)] for t in range(nt)])
            u = np.array([x[ix.u(gi, q, t)] for t in range(nt)])
            v = np.array([x[ix.v(gi, q, t)] for t in range(nt)])
            for t in range(nt):
                key = ("g", gi), ("q", q + 1), ("t", t + 1)
                res[("eq1", *key)] = max(0.0, g.p_min * u[t] - p[t])
                res[("eq2", *key)] = max(0.0, p[t] + r[t] - g.p_max * u[t])
                res[("eq3", *key, ("side", "hi"))] = max(0.0, r[t] - g.ramp_10min * u[t])
                res[("eq3", *key, ("side", "lo"))] = max(0.0, -r[t])
                res[("eq11", *key)] = max(abs(u[t] - round(u[t])), _excess(u[t], 0.0, 1.0))
                res[("eq10", *key)] = max(abs(v[t] - round(v[t])), _excess(v[t], 0.0, 1.0))
            for t in range(nt):
                key = ("g", gi), ("q", q + 1), ("t", t + 1)
                res[("eq4", *key)] = max(0.0, p[t] + r[t] - total_reserve[q, t])
            for t in range(1, nt):
                key = ("g", gi), ("q", q + 1), ("t", t + 1)
                step = p[t] - p[t - 1]
                res[("eq8", *key, ("side", "hi"))] = max(0.0, step - g.ramp_hourly)
                res[("eq8", *key, ("side", "lo"))] = max(0.0, -step - g.ramp_hourly)
                res[("eq9", *key)] = max(0.0, u[t] - u[t - 1] - v[t])
            wrap = p[0] - p[nt - 1]
            res[("eq15", ("g", gi), ("q", q + 1), ("side", "hi"))] = \
                max(0.0, wrap - g.ramp_hourly)
            res[("eq15", ("g", gi), ("q", q + 1), ("side", "lo"))] = \
                max(0.0, -wrap - g.ramp_hourly)
            res[("eq16", ("g", gi), ("q", q + 1))] = \
                max(0.0, u[0] - u[nt - 1] - v[0])

    for k in case.branches:
        for q in range(nq):
            for t in range(nt):
                key = ("k", k.idx), ("q", q + 1), ("t", t + 1)
                flow = x[ix.pk(k.idx, q, t)]
                angle_flow = (x[ix.th(k.from_idx, q, t)]
                              - x[ix.th(k.to_idx, q, t)]) / k.reactance
                res[("eq5", *key)] = abs(flow - angle_flow)
                res[("eq6", *key)] = _excess(flow, -k.p_max, k.p_max)

    for w in case.wind_plants:
        for q in range(nq):
            for t in range(nt):
                res[("eq7", ("w", w.idx), ("q", q + 1), ("t", t + 1))] = \
                    _excess(x[ix.pcur(w.idx, q, t)], 0.0,
                            float(profiles.wind_avail[q, w.idx, t]))

    balance_tag = "eq12" if variant is Variant.EH else "eq21"
    for n in range(len(case.buses)):
        for q in range(nq):
            for t in range(nt):
                supply = 0.0
                for g in case.gens_at_bus[n]:
                    supply += x[ix.pg(g, q, t)]
                for k in case.branches_to_bus[n]:
                    supply += x[ix.pk(k, q, t)]
                for k in case.branches_from_bus[n]:
                    supply -= x[ix.pk(k, q, t)]
                for w in case.plants_at_bus[n]:
                    supply += float(profiles.wind_avail[q, w, t]) - x[ix.pcur(w, q, t)]
                draw = float(profiles.demand[q, n, t])
                if variant is Variant.EH:
                    for h in case.hubs_at_bus[n]:
                        supply += x[ix.pf(h, q, t)]
                        draw += x[ix.pe(h, q, t)]
                res[(balance_tag, ("n", n), ("q", q + 1), ("t", t + 1))] = \
                    abs(supply - draw)

    # hub capacity; the benchmark variant requires both sides to idle at zero
    for h in case.energy_hubs:
        pe_cap = h.electrolyzer_p_max if variant is Variant.EH else 0.0
        pf_cap = h.fuelcell_p_max if variant is Variant.EH else 0.0
        for q in range(nq):
            for t in range(nt):
                res[("eq13", ("e", h.idx), ("q", q + 1), ("t", t + 1))] = \
                    _excess(x[ix.pe(h.idx, q, t)], 0.0, pe_cap)
                res[("eq14", ("f", h.idx), ("q", q + 1), ("t", t + 1))] = \
                    _excess(x[ix.pf(h.idx, q, t)], 0.0, pf_cap)

    ref = case.reference_idx
    for q in range(nq):
        for t in range(nt):
            res[("ref", ("n", ref), ("q", q + 1), ("t", t + 1))] = \
                abs(x[ix.th(ref, q, t)])

    for hb, n in enumerate(ix.hub_buses):
        cap = sum(case.energy_hubs[h].storage_e_max for h in case.hubs_at_bus[n])
        if variant is Variant.T:
            cap = 0.0
        e0 = np.array([x[ix.e0(hb, q)] for q in range(nq)])
        for q in range(nq):
            res[("e0-bound", ("n", n), ("q", q + 1))] = _excess(e0[q], 0.0, cap)
        if variant is not Variant.EH:
            continue
        deltas = np.zeros(nq)
        for q in range(nq):
            hourly = hourly_hub_exchange(case, ix, x, n, q)
            deltas[q] = hourly.sum()
            levels = storage_levels(e0[q], hourly, D)
            day_ends = (1,) if D == 1 else (1, D)
            for d in day_ends:
                for t in range(nt):
                    key = ("n", n), ("q", q + 1), ("t", t + 1), ("d", d)
                    lvl = levels[d - 1, t]
                    res[("storage-bound", *key, ("side", "lo"))] = max(0.0, -lvl)
                    res[("storage-bound", *key, ("side", "hi"))] = max(0.0, lvl - cap)
        for q in range(1, nq):
            res[("eq18", ("n", n), ("q", q + 1))] = \
                abs(e0[q] - (e0[q - 1] + D * deltas[q - 1]))
        res[("eq19", ("n", n))] = abs(e0[0] - (e0[nq - 1] + D * deltas[nq - 1]))
    return res


def verify_solution(case: GridCase, profiles: QuarterProfiles, model: MilpModel,
                    sol, tol: float = DEFAULT_TOL) -> VerificationReport:
    """Re-evaluate every constraint of the schedule at the given solution.

    Expands the storage trajectory at every day d in 1..D (the model itself
    only pins the endpoint days). An empty report means the solution is
    feasible within tol.
    """
    if sol.x is None:
        raise ValueError(f"cannot verify a solution with status '{sol.status}'")
    ix = model.index
    if ix is None:
        raise ValueError("model carries no variable index")
    x = np.asarray(sol.x, dtype=float)
    res = residuals_from_case(case, profiles, model.variant, ix, x)

    n_checked = len(res)
    violations = [Violation(key, m) for key, m in res.items() if m > tol]

    # full interior-day expansion of the storage trajectory
    if model.variant is Variant.EH:
        D = case.days_per_quarter
        for hb, n in enumerate(ix.hub_buses):
            cap = sum(case.energy_hubs[h].storage_e_max for h in case.hubs_at_bus[n])
            for q in range(ix.n_quarters):
                hourly = hourly_hub_exchange(case, ix, x, n, q)
                levels = storage_levels(float(x[ix.e0(hb, q)]), hourly, D)
                n_checked += 2 * levels.size
                for d in range(2, D):  # endpoints already keyed above
                    for t in range(ix.n_hours):
                        lvl = levels[d - 1, t]
                        key = ("n", n), ("q", q + 1), ("t", t + 1), ("d", d)
                        if -lvl > tol:
                            violations.append(Violation(
                                ("storage-bound", *key, ("side", "lo")), -lvl))
                        if lvl - cap > tol:
                            violations.append(Violation(
                                ("storage-bound", *key, ("side", "hi")), lvl - cap))

    violations.sort(key=lambda v: -v.magnitude)
    return VerificationReport(tol=tol, violations=violations, n_checked=n_checked)

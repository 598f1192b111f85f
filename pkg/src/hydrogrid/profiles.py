"""Typical-day demand and wind-availability profiles.

One 24-hour profile per quarter drives the whole schedule: every day of a
quarter repeats the same typical day. Profiles are either loaded from CSV
(columns ``quarter,hour,kind,key,value``) or synthesized from a small set
of shape parameters with a seeded generator.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import GridCase

N_QUARTERS = 4
N_HOURS = 24


class ProfileError(Exception):
    """Raised for malformed, incomplete or unresolvable profile data."""


@dataclass(frozen=True)
class QuarterProfiles:
    """Per-quarter hourly tables.

    demand: MW, shape (quarters, buses, hours), bus axis in dense case order.
    wind_avail: MW available, shape (quarters, plants, hours), plant axis in
    case order. File-loaded profiles always have 4 quarters x 24 hours;
    reduced-horizon tables may be constructed directly for small studies.
    """

    demand: np.ndarray
    wind_avail: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.demand, dtype=float)
        w = np.asarray(self.wind_avail, dtype=float)
        if d.ndim != 3 or w.ndim != 3:
            raise ProfileError("profile tables must be 3-d (quarter, entity, hour)")
        if d.shape[0] != w.shape[0] or d.shape[2] != w.shape[2]:
            raise ProfileError("demand and wind tables disagree on quarters/hours")
        if np.any(d < 0) or np.any(w < 0):
            raise ProfileError("profile entries must be non-negative")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(w))):
            raise ProfileError("profile entries must be finite")
        object.__setattr__(self, "demand", d)
        object.__setattr__(self, "wind_avail", w)
        d.setflags(write=False)
        w.setflags(write=False)

    @property
    def n_quarters(self) -> int:
        return self.demand.shape[0]

    @property
    def n_hours(self) -> int:
        return self.demand.shape[2]

    def fingerprint(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.demand).tobytes())
        h.update(np.ascontiguousarray(self.wind_avail).tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class ProfileShape:
    """Shape parameters for synthesized profiles.

    System demand peaks are given either explicitly (peak_mw, one per
    quarter) or as fractions of the fleet's reserve-feasible dispatch
    capability. The quarter-3 entries are the largest by default so summer
    demand dominates, and wind capacity factors dip in quarter 3, giving the
    seasonal mismatch that makes cross-quarter storage worthwhile.
    """

    peak_fraction: tuple[float, float, float, float] = (0.70, 0.74, 0.88, 0.72)
    valley_fraction: float = 0.58           # overnight demand / daily peak
    peak_mw: tuple[float, float, float, float] | None = None
    bus_weights: dict[str, float] | None = None   # id -> share; None = uniform
    wind_capacity_factor: tuple[float, float, float, float] = (0.36, 0.30, 0.22, 0.33)
    wind_diurnal_amplitude: float = 0.45     # night-peaking modulation depth
    wind_nominal_mw: float | None = None     # per plant; None = derived
    demand_noise: float = 0.015
    wind_noise: float = 0.05

    @staticmethod
    def from_json(path: str | Path) -> "ProfileShape":
        raw = json.loads(Path(path).read_text())
        kwargs = {}
        for key in ("peak_fraction", "peak_mw", "wind_capacity_factor"):
            if key in raw and raw[key] is not None:
                kwargs[key] = tuple(float(v) for v in raw[key])
        for key in ("valley_fraction", "wind_diurnal_amplitude",
                    "wind_nominal_mw", "demand_noise", "wind_noise"):
            if key in raw and raw[key] is not None:
                kwargs[key] = float(raw[key])
        if raw.get("bus_weights") is not None:
            kwargs["bus_weights"] = {str(k): float(v) for k, v in raw["bus_weights"].items()}
        return ProfileShape(**kwargs)


def dispatchable_capability(case: GridCase) -> float:
    """Largest total conventional output compatible with the reserve rule.

    Maximizes sum(P_g) subject to P_g + r_g <= p_max, r_g <= ramp_10min and
    the system reserve inequality with every unit committed. Used to size
    default synthetic demand so cases stay feasible at their peak hour.
    """
    from scipy.optimize import linprog

    ng = len(case.generators)
    if ng == 0:
        return 0.0
    # columns: P_0..P_{ng-1}, r_0..r_{ng-1}
    c = np.concatenate([-np.ones(ng), np.zeros(ng)])
    a_ub, b_ub = [], []
    for g in case.generators:
        row = np.zeros(2 * ng)
        row[g.idx] = 1.0
        row[ng + g.idx] = 1.0
        a_ub.append(row)                       # P + r <= p_max
        b_ub.append(g.p_max)
        row = np.zeros(2 * ng)
        row[g.idx] = 1.0
        row[ng:] -= 1.0
        row[ng + g.idx] += 1.0                 # P_g + r_g - sum(r) <= 0
        a_ub.append(row)
        b_ub.append(0.0)
    bounds = [(0, g.p_max) for g in case.generators] + \
             [(0, g.ramp_10min) for g in case.generators]
    res = linprog(c, A_ub=np.array(a_ub), b_ub=np.array(b_ub), bounds=bounds, method="highs")
    if not res.success:
        return 0.0
    return float(-res.fun)


# fixed diurnal basis: morning shoulder plus a dominant evening peak,
# normalized to [0, 1]
def _demand_basis(n_hours: int) -> np.ndarray:
    h = np.arange(1, n_hours + 1, dtype=float)
    mid = n_hours / 24.0
    s = 0.35 * np.exp(-((h - 9.5 * mid) / (2.6 * mid)) ** 2) \
        + 1.0 * np.exp(-((h - 19.0 * mid) / (3.0 * mid)) ** 2)
    s = (s - s.min()) / (s.max() - s.min())
    return s


def _wind_basis(n_hours: int, amplitude: float) -> np.ndarray:
    h = np.arange(1, n_hours + 1, dtype=float)
    return 1.0 + amplitude * np.cos(2 * math.pi * (h - 2.0) / n_hours)


def synthesize_profiles(shape: ProfileShape, case: GridCase, seed: int) -> QuarterProfiles:
    """Deterministic seeded 4x24 profiles following the shape parameters.

    With the default shape, quarter 3 has the strictly highest mean demand.
    """
    if not (0 < shape.valley_fraction <= 1):
        raise ProfileError(f"degenerate shape: valley_fraction {shape.valley_fraction} "
                           "must be in (0, 1] (peak below valley)")
    if shape.peak_mw is not None:
        peaks = np.asarray(shape.peak_mw, dtype=float)
    else:
        cap = dispatchable_capability(case)
        if cap <= 0:
            raise ProfileError("case has no dispatchable capability; give explicit peak_mw")
        peaks = cap * np.asarray(shape.peak_fraction, dtype=float)
    if np.any(peaks <= 0):
        raise ProfileError("demand peaks must be positive")

    n_buses = len(case.buses)
    if shape.bus_weights is None:
        weights = np.full(n_buses, 1.0 / n_buses)
    else:
        weights = np.zeros(n_buses)
        for bid, w in shape.bus_weights.items():
            if bid not in case.bus_index:
                raise ProfileError(f"bus_weights: unknown bus '{bid}'")
            if w < 0:
                raise ProfileError(f"bus_weights: negative weight for bus '{bid}'")
            weights[case.bus_index[bid]] = w
        total = weights.sum()
        if total <= 0:
            raise ProfileError("bus_weights must sum to a positive value")
        weights = weights / total

    rng = np.random.default_rng(seed)
    s = _demand_basis(N_HOURS)
    demand = np.zeros((N_QUARTERS, n_buses, N_HOURS))
    for q in range(N_QUARTERS):
        valley = shape.valley_fraction * peaks[q]
        system = valley + (peaks[q] - valley) * s
        noise = 1.0 + shape.demand_noise * rng.standard_normal(N_HOURS)
        np.clip(noise, 1.0 - 3 * shape.demand_noise, 1.0 + 3 * shape.demand_noise, out=noise)
        demand[q] = np.outer(weights, system * noise)

    n_plants = len(case.wind_plants)
    wind = np.zeros((N_QUARTERS, n_plants, N_HOURS))
    if n_plants:
        nominal = shape.wind_nominal_mw
        if nominal is None:
            nominal = 0.6 * float(np.mean(peaks)) / n_plants
        basis = _wind_basis(N_HOURS, shape.wind_diurnal_amplitude)
        cf = np.asarray(shape.wind_capacity_factor, dtype=float)
        if np.any(cf < 0):
            raise ProfileError("wind capacity factors must be non-negative")
        for q in range(N_QUARTERS):
            for w in range(n_plants):
                noise = 1.0 + shape.wind_noise * rng.standard_normal(N_HOURS)
                wind[q, w] = np.maximum(0.0, nominal * cf[q] * basis * noise)

    return QuarterProfiles(demand=demand, wind_avail=wind)


def load_profiles(path: str | Path, case: GridCase) -> QuarterProfiles:
    """Read a profile CSV and resolve it against the case.

    Every key that appears must cover all 4x24 cells; a bus absent from the
    file simply has zero demand, but every wind plant's profile_key must be
    present. Missing cells, negative values and unknown keys are errors.
    """
    path = Path(path)
    demand_cells: dict[str, dict[tuple[int, int], float]] = {}
    wind_cells: dict[str, dict[tuple[int, int], float]] = {}
    plant_keys = {w.profile_key for w in case.wind_plants}

    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["quarter", "hour", "kind", "key", "value"]
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != expected:
            raise ProfileError(f"{path}: header must be {','.join(expected)}")
        for lineno, row in enumerate(reader, start=2):
            where = f"{path}:{lineno}"
            try:
                q = int(row["quarter"])
                t = int(row["hour"])
            except (TypeError, ValueError):
                raise ProfileError(f"{where}: quarter/hour must be integers")
            if not (1 <= q <= N_QUARTERS):
                raise ProfileError(f"{where}: quarter {q} out of range 1..{N_QUARTERS}")
            if not (1 <= t <= N_HOURS):
                raise ProfileError(f"{where}: hour {t} out of range 1..{N_HOURS}")
            kind = row["kind"].strip()
            key = row["key"].strip()
            try:
                value = float(row["value"])
            except (TypeError, ValueError):
                raise ProfileError(f"{where}: non-numeric value {row['value']!r} "
                                   f"for ({kind}, {key}, q={q}, t={t})")
            if value < 0:
                raise ProfileError(f"{where}: negative value {value} "
                                   f"for ({kind}, {key}, q={q}, t={t})")
            if kind == "demand":
                if key not in case.bus_index:
                    raise ProfileError(f"{where}: unknown bus '{key}'")
                cells = demand_cells.setdefault(key, {})
            elif kind == "wind":
                if key not in plant_keys:
                    raise ProfileError(f"{where}: unknown wind profile key '{key}'")
                cells = wind_cells.setdefault(key, {})
            else:
                raise ProfileError(f"{where}: kind must be 'demand' or 'wind', got '{kind}'")
            if (q, t) in cells:
                raise ProfileError(f"{where}: duplicate cell ({kind}, {key}, q={q}, t={t})")
            cells[(q, t)] = value

    def complete(cells: dict[tuple[int, int], float], kind: str, key: str) -> None:
        for q in range(1, N_QUARTERS + 1):
            for t in range(1, N_HOURS + 1):
                if (q, t) not in cells:
                    raise ProfileError(f"{path}: missing {kind} cell for '{key}' "
                                       f"at (q={q}, t={t})")

    demand = np.zeros((N_QUARTERS, len(case.buses), N_HOURS))
    for key, cells in demand_cells.items():
        complete(cells, "demand", key)
        n = case.bus_index[key]
        for (q, t), v in cells.items():
            demand[q - 1, n, t - 1] = v

    for w in case.wind_plants:
        if w.profile_key not in wind_cells:
            raise ProfileError(f"{path}: wind plant #{w.idx} profile_key "
                               f"'{w.profile_key}' has no rows")
    wind = np.zeros((N_QUARTERS, len(case.wind_plants), N_HOURS))
    for key, cells in wind_cells.items():
        complete(cells, "wind", key)
        for w in case.wind_plants:
            if w.profile_key == key:
                for (q, t), v in cells.items():
                    wind[q - 1, w.idx, t - 1] = v

    return QuarterProfiles(demand=demand, wind_avail=wind)


def save_profiles(profiles: QuarterProfiles, case: GridCase, path: str | Path) -> None:
    """Write the CSV form; inverse of load_profiles for plant-unique keys."""
    if profiles.n_quarters != N_QUARTERS or profiles.n_hours != N_HOURS:
        raise ProfileError("only full 4x24 profiles can be saved to CSV")
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quarter", "hour", "kind", "key", "value"])
        for q in range(N_QUARTERS):
            for t in range(N_HOURS):
                for b in case.buses:
                    writer.writerow([q + 1, t + 1, "demand", b.id,
                                     repr(float(profiles.demand[q, b.idx, t]))])
                done = set()
                for w in case.wind_plants:
                    if w.profile_key in done:
                        continue
                    done.add(w.profile_key)
                    writer.writerow([q + 1, t + 1, "wind", w.profile_key,
                                     repr(float(profiles.wind_avail[q, w.idx, t]))])


def annual_demand_energy(profiles: QuarterProfiles, case: GridCase) -> float:
    """MWh of demand over the year (typical day x days per quarter)."""
    return float(case.days_per_quarter * profiles.demand.sum())


def annual_wind_energy(profiles: QuarterProfiles, case: GridCase) -> float:
    """MWh of available wind over the year."""
    return float(case.days_per_quarter * profiles.wind_avail.sum())


def measure_penetration(profiles: QuarterProfiles, case: GridCase) -> float:
    """Annual available wind energy divided by annual demand energy."""
    e_d = annual_demand_energy(profiles, case)
    if e_d <= 0:
        raise ProfileError("total annual demand energy must be positive")
    return annual_wind_energy(profiles, case) / e_d


def scale_to_penetration(profiles: QuarterProfiles, case: GridCase,
                         level: float) -> QuarterProfiles:
    """Scale all wind availability by one factor so the annual wind/demand
    energy ratio equals ``level``. Demand is unchanged; the wind shape is
    preserved.
    """
    if level < 0:
        raise ProfileError(f"penetration level must be non-negative, got {level}")
    e_d = annual_demand_energy(profiles, case)
    if e_d <= 0:
        raise ProfileError("total annual demand energy must be positive")
    if level == 0:
        return QuarterProfiles(demand=profiles.demand,
                               wind_avail=np.zeros_like(profiles.wind_avail))
    e_w = annual_wind_energy(profiles, case)
    if e_w <= 0:
        raise ProfileError("wind shape is all zero; cannot scale to a positive level")
    factor = level * e_d / e_w
    return QuarterProfiles(demand=profiles.demand,
                           wind_avail=profiles.wind_avail * factor)

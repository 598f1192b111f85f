"""Domain types for the physical system, case-file ingestion, and validation.

A case file is a JSON document with top-level keys ``buses``, ``branches``,
``generators``, ``wind_plants``, ``energy_hubs``, ``reference_bus`` and
``days_per_quarter``. Units are MW, MWh, $/MWh, $/h, $ and per-unit
reactance. Bus ids in files are arbitrary strings; the loader assigns dense
integer indices (0..N-1) so downstream constraint generation is
array-indexed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path


class CaseError(Exception):
    """Raised for structural problems in a case file (parse, linkage)."""


@dataclass(frozen=True)
class Bus:
    id: str
    name: str = ""
    idx: int = -1  # dense index assigned by the loader


@dataclass(frozen=True)
class Generator:
    bus: str
    cost_energy: float    # $/MWh
    cost_no_load: float   # $/h while committed
    cost_startup: float   # $ per start
    p_max: float          # MW
    p_min: float          # MW
    ramp_hourly: float    # MW/h
    ramp_10min: float     # MW deliverable within 10 minutes
    bus_idx: int = -1
    idx: int = -1


@dataclass(frozen=True)
class Branch:
    from_bus: str
    to_bus: str
    reactance: float      # per-unit
    p_max: float          # MW thermal limit
    from_idx: int = -1
    to_idx: int = -1
    idx: int = -1


@dataclass(frozen=True)
class WindPlant:
    bus: str
    profile_key: str      # resolved against the availability tables
    bus_idx: int = -1
    idx: int = -1


@dataclass(frozen=True)
class EnergyHub:
    bus: str
    electrolyzer_p_max: float   # MW consumed at full charge
    electrolyzer_eff: float     # MWh hydrogen per MWh electric, in (0, 1]
    fuelcell_p_max: float       # MW produced at full discharge
    fuelcell_eff: float         # MWh electric per MWh hydrogen, in (0, 1]
    storage_e_max: float        # MWh hydrogen energy capacity
    bus_idx: int = -1
    idx: int = -1


@dataclass(frozen=True)
class GridCase:
    """Immutable static description of the network and its assets.

    Safe for concurrent read once constructed; all cross-references are
    resolved to dense indices at load time.
    """

    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    wind_plants: tuple[WindPlant, ...]
    energy_hubs: tuple[EnergyHub, ...]
    reference_bus: str
    days_per_quarter: int = 90

    @cached_property
    def bus_index(self) -> dict[str, int]:
        return {b.id: b.idx for b in self.buses}

    @cached_property
    def reference_idx(self) -> int:
        return self.bus_index[self.reference_bus]

    @cached_property
    def gens_at_bus(self) -> tuple[tuple[int, ...], ...]:
        return self._group(g.bus_idx for g in self.generators)

    @cached_property
    def plants_at_bus(self) -> tuple[tuple[int, ...], ...]:
        return self._group(w.bus_idx for w in self.wind_plants)

    @cached_property
    def hubs_at_bus(self) -> tuple[tuple[int, ...], ...]:
        return self._group(h.bus_idx for h in self.energy_hubs)

    @cached_property
    def branches_from_bus(self) -> tuple[tuple[int, ...], ...]:
        return self._group(k.from_idx for k in self.branches)

    @cached_property
    def branches_to_bus(self) -> tuple[tuple[int, ...], ...]:
        return self._group(k.to_idx for k in self.branches)

    @cached_property
    def hub_buses(self) -> tuple[int, ...]:
        """Sorted dense indices of buses carrying at least one hub."""
        return tuple(sorted({h.bus_idx for h in self.energy_hubs}))

    def _group(self, bus_indices) -> tuple[tuple[int, ...], ...]:
        groups: list[list[int]] = [[] for _ in self.buses]
        for i, n in enumerate(bus_indices):
            groups[n].append(i)
        return tuple(tuple(g) for g in groups)


@dataclass(frozen=True)
class Finding:
    entity: str
    message: str

    def __str__(self) -> str:
        return f"{self.entity}: {self.message}"


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def add(self, entity: str, message: str) -> None:
        self.findings.append(Finding(entity, message))

    def __str__(self) -> str:
        if self.ok:
            return "valid: no findings"
        return "\n".join(str(f) for f in self.findings)


_GEN_FIELDS = ("bus", "cost_energy", "cost_no_load", "cost_startup",
               "p_max", "p_min", "ramp_hourly", "ramp_10min")
_BRANCH_FIELDS = ("from_bus", "to_bus", "reactance", "p_max")
_PLANT_FIELDS = ("bus", "profile_key")
_HUB_FIELDS = ("bus", "electrolyzer_p_max", "electrolyzer_eff",
               "fuelcell_p_max", "fuelcell_eff", "storage_e_max")


def _require(record: dict, fields: tuple[str, ...], what: str) -> None:
    for f in fields:
        if f not in record:
            raise CaseError(f"{what}: missing field '{f}'")


def _num(record: dict, f: str, what: str) -> float:
    v = record[f]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise CaseError(f"{what}: field '{f}' must be a number, got {v!r}")
    return float(v)


def load_case(path: str | Path) -> GridCase:
    """Parse and link a JSON case file.

    Raises CaseError with field context on parse errors, duplicate ids and
    dangling bus references. Invariant violations that leave the case
    structurally sound (e.g. p_min > p_max) are reported by validate_case,
    not here.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise CaseError(f"{path}: parse error at line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(raw, dict):
        raise CaseError(f"{path}: top level must be a JSON object")
    for key in ("buses", "branches", "generators", "wind_plants", "energy_hubs", "reference_bus"):
        if key not in raw:
            raise CaseError(f"{path}: missing top-level key '{key}'")

    buses: list[Bus] = []
    seen: set[str] = set()
    for i, rec in enumerate(raw["buses"]):
        _require(rec, ("id",), f"bus #{i}")
        bid = str(rec["id"])
        if bid in seen:
            raise CaseError(f"duplicate bus id '{bid}'")
        seen.add(bid)
        buses.append(Bus(id=bid, name=str(rec.get("name", "")), idx=i))
    index = {b.id: b.idx for b in buses}

    def resolve(bid, what: str) -> int:
        bid = str(bid)
        if bid not in index:
            raise CaseError(f"{what}: references unknown bus '{bid}'")
        return index[bid]

    branches = []
    for i, rec in enumerate(raw["branches"]):
        what = f"branch #{i}"
        _require(rec, _BRANCH_FIELDS, what)
        f_idx = resolve(rec["from_bus"], what)
        t_idx = resolve(rec["to_bus"], what)
        branches.append(Branch(
            from_bus=str(rec["from_bus"]), to_bus=str(rec["to_bus"]),
            reactance=_num(rec, "reactance", what), p_max=_num(rec, "p_max", what),
            from_idx=f_idx, to_idx=t_idx, idx=i))

    generators = []
    for i, rec in enumerate(raw["generators"]):
        what = f"generator #{i}"
        _require(rec, _GEN_FIELDS, what)
        generators.append(Generator(
            bus=str(rec["bus"]),
            cost_energy=_num(rec, "cost_energy", what),
            cost_no_load=_num(rec, "cost_no_load", what),
            cost_startup=_num(rec, "cost_startup", what),
            p_max=_num(rec, "p_max", what), p_min=_num(rec, "p_min", what),
            ramp_hourly=_num(rec, "ramp_hourly", what),
            ramp_10min=_num(rec, "ramp_10min", what),
            bus_idx=resolve(rec["bus"], what), idx=i))

    plants = []
    for i, rec in enumerate(raw["wind_plants"]):
        what = f"wind plant #{i}"
        _require(rec, _PLANT_FIELDS, what)
        plants.append(WindPlant(
            bus=str(rec["bus"]), profile_key=str(rec["profile_key"]),
            bus_idx=resolve(rec["bus"], what), idx=i))

    hubs = []
    for i, rec in enumerate(raw["energy_hubs"]):
        what = f"energy hub #{i}"
        _require(rec, _HUB_FIELDS, what)
        hubs.append(EnergyHub(
            bus=str(rec["bus"]),
            electrolyzer_p_max=_num(rec, "electrolyzer_p_max", what),
            electrolyzer_eff=_num(rec, "electrolyzer_eff", what),
            fuelcell_p_max=_num(rec, "fuelcell_p_max", what),
            fuelcell_eff=_num(rec, "fuelcell_eff", what),
            storage_e_max=_num(rec, "storage_e_max", what),
            bus_idx=resolve(rec["bus"], what), idx=i))

    ref = str(raw["reference_bus"])
    if ref not in index:
        raise CaseError(f"reference_bus: references unknown bus '{ref}'")
    days = raw.get("days_per_quarter", 90)
    if isinstance(days, bool) or not isinstance(days, int):
        raise CaseError("days_per_quarter must be an integer")

    return GridCase(
        buses=tuple(buses), branches=tuple(branches), generators=tuple(generators),
        wind_plants=tuple(plants), energy_hubs=tuple(hubs),
        reference_bus=ref, days_per_quarter=days)


def save_case(case: GridCase, path: str | Path) -> None:
    """Write the case back out; load_case(save_case(c)) == c."""
    doc = {
        "buses": [{"id": b.id, "name": b.name} for b in case.buses],
        "branches": [{"from_bus": k.from_bus, "to_bus": k.to_bus,
                      "reactance": k.reactance, "p_max": k.p_max}
                     for k in case.branches],
        "generators": [{"bus": g.bus, "cost_energy": g.cost_energy,
                        "cost_no_load": g.cost_no_load, "cost_startup": g.cost_startup,
                        "p_max": g.p_max, "p_min": g.p_min,
                        "ramp_hourly": g.ramp_hourly, "ramp_10min": g.ramp_10min}
                       for g in case.generators],
        "wind_plants": [{"bus": w.bus, "profile_key": w.profile_key}
                        for w in case.wind_plants],
        "energy_hubs": [{"bus": h.bus,
                         "electrolyzer_p_max": h.electrolyzer_p_max,
                         "electrolyzer_eff": h.electrolyzer_eff,
                         "fuelcell_p_max": h.fuelcell_p_max,
                         "fuelcell_eff": h.fuelcell_eff,
                         "storage_e_max": h.storage_e_max}
                        for h in case.energy_hubs],
        "reference_bus": case.reference_bus,
        "days_per_quarter": case.days_per_quarter,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def case_fingerprint(case: GridCase) -> str:
    """Stable short hash of the case content (not the file path)."""
    import hashlib

    doc = json.dumps({
        "buses": [(b.id, b.name) for b in case.buses],
        "branches": [(k.from_bus, k.to_bus, k.reactance, k.p_max) for k in case.branches],
        "generators": [(g.bus, g.cost_energy, g.cost_no_load, g.cost_startup,
                        g.p_max, g.p_min, g.ramp_hourly, g.ramp_10min)
                       for g in case.generators],
        "wind_plants": [(w.bus, w.profile_key) for w in case.wind_plants],
        "energy_hubs": [(h.bus, h.electrolyzer_p_max, h.electrolyzer_eff,
                         h.fuelcell_p_max, h.fuelcell_eff, h.storage_e_max)
                        for h in case.energy_hubs],
        "reference_bus": case.reference_bus,
        "days_per_quarter": case.days_per_quarter,
    }, sort_keys=True)
    return hashlib.sha256(doc.encode()).hexdigest()[:16]


def validate_case(case: GridCase) -> ValidationReport:
    """Check every type invariant; an empty report means the case is
    admissible to the scheduling formulation. Findings are data, not errors.
    """
    rep = ValidationReport()
    for g in case.generators:
        ent = f"generator #{g.idx} (bus {g.bus})"
        if g.p_min < 0:
            rep.add(ent, "p_min is negative")
        if g.p_min > g.p_max:
            rep.add(ent, f"p_min exceeds p_max ({g.p_min} > {g.p_max})")
        if g.ramp_hourly <= 0:
            rep.add(ent, "ramp_hourly must be positive")
        if g.ramp_10min < 0:
            rep.add(ent, "ramp_10min is negative")
        for name in ("cost_energy", "cost_no_load", "cost_startup"):
            if getattr(g, name) < 0:
                rep.add(ent, f"{name} is negative")
    for k in case.branches:
        ent = f"branch #{k.idx} ({k.from_bus}-{k.to_bus})"
        if k.reactance == 0:
            rep.add(ent, "zero reactance")
        if k.p_max <= 0:
            rep.add(ent, "p_max must be positive")
        if k.from_idx == k.to_idx:
            rep.add(ent, "connects a bus to itself")
    for h in case.energy_hubs:
        ent = f"energy hub #{h.idx} (bus {h.bus})"
        for name in ("electrolyzer_p_max", "fuelcell_p_max", "storage_e_max"):
            if getattr(h, name) < 0:
                rep.add(ent, f"{name} is negative")
        for name in ("electrolyzer_eff", "fuelcell_eff"):
            v = getattr(h, name)
            if not (0 < v <= 1):
                rep.add(ent, f"{name} must be in (0, 1], got {v}")
    if case.days_per_quarter < 1:
        rep.add("case", "days_per_quarter must be at least 1")

    # connectivity via union-find over branches; islanded DC flow has no
    # single reference and is rejected here
    parent = list(range(len(case.buses)))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for k in case.branches:
        ra, rb = find(k.from_idx), find(k.to_idx)
        if ra != rb:
            parent[ra] = rb
    roots = {find(i) for i in range(len(case.buses))}
    if len(roots) > 1:
        rep.add("case", f"network graph is disconnected ({len(roots)} islands)")
    return rep

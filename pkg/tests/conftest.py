import json
from pathlib import Path

import numpy as np
import pytest

import hydrogrid
from hydrogrid.grid import load_case
from hydrogrid.profiles import QuarterProfiles

CASES_DIR = Path(hydrogrid.__file__).parent / "cases"


@pytest.fixture(scope="session")
def cases_dir() -> Path:
    return CASES_DIR


@pytest.fixture(scope="session")
def toy3_case():
    return load_case(CASES_DIR / "toy3.case")


@pytest.fixture(scope="session")
def toy6_case():
    return load_case(CASES_DIR / "toy6.case")


@pytest.fixture(scope="session")
def rts24_case():
    return load_case(CASES_DIR / "rts24.case")


def write_case(tmp_path: Path, doc: dict, name: str = "case.json") -> Path:
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=1))
    return path


def mini2_doc() -> dict:
    """Two generators, one wind plant, one hub; small enough to enumerate
    every commitment pattern on a shortened horizon.
    """
    return {
        "buses": [{"id": "a"}, {"id": "b"}],
        "branches": [{"from_bus": "a", "to_bus": "b", "reactance": 0.1, "p_max": 60}],
        "generators": [
            {"bus": "a", "cost_energy": 10.0, "cost_no_load": 20.0, "cost_startup": 30.0,
             "p_max": 50.0, "p_min": 5.0, "ramp_hourly": 50.0, "ramp_10min": 40.0},
            {"bus": "b", "cost_energy": 25.0, "cost_no_load": 10.0, "cost_startup": 15.0,
             "p_max": 60.0, "p_min": 0.0, "ramp_hourly": 40.0, "ramp_10min": 50.0},
        ],
        "wind_plants": [{"bus": "b", "profile_key": "w"}],
        "energy_hubs": [
            {"bus": "b", "electrolyzer_p_max": 15.0, "electrolyzer_eff": 0.8,
             "fuelcell_p_max": 10.0, "fuelcell_eff": 0.6, "storage_e_max": 60.0},
        ],
        "reference_bus": "a",
        "days_per_quarter": 2,
    }


@pytest.fixture()
def mini2_case(tmp_path):
    return load_case(write_case(tmp_path, mini2_doc()))


def mini2_profiles() -> QuarterProfiles:
    """One quarter, four hours: wind-rich early, demand peak at hour 3."""
    demand = np.array([[[10.0, 20.0, 28.0, 14.0],     # bus a
                        [8.0, 16.0, 22.0, 10.0]]])    # bus b
    wind = np.array([[[30.0, 5.0, 2.0, 25.0]]])
    return QuarterProfiles(demand=demand, wind_avail=wind)


def flat_profiles(case, demand_mw: float, wind_mw: float,
                  nq: int = 4, nt: int = 24) -> QuarterProfiles:
    demand = np.full((nq, len(case.buses), nt), float(demand_mw))
    wind = np.full((nq, len(case.wind_plants), nt), float(wind_mw))
    return QuarterProfiles(demand=demand, wind_avail=wind)

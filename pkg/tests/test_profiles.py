import csv

import numpy as np
import pytest

from hydrogrid.profiles import (ProfileError, ProfileShape, QuarterProfiles,
                                load_profiles, measure_penetration,
                                save_profiles, scale_to_penetration,
                                synthesize_profiles)

from conftest import flat_profiles


def write_rows(path, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["quarter", "hour", "kind", "key", "value"])
        w.writerows(rows)


def full_rows(kind, key, value=50.0):
    return [(q, t, kind, key, value) for q in range(1, 5) for t in range(1, 25)]


def test_load_single_bus_demand(toy3_case, tmp_path):
    # 96 demand rows: one bus fully covered, the others default to zero
    path = tmp_path / "p.csv"
    write_rows(path, full_rows("demand", "2", 75.0) + full_rows("wind", "w1", 5.0))
    prof = load_profiles(path, toy3_case)
    assert prof.demand.shape == (4, 3, 24)
    assert np.all(prof.demand[:, 1, :] == 75.0)
    assert np.all(prof.demand[:, [0, 2], :] == 0.0)
    assert np.all(prof.wind_avail == 5.0)


def test_load_missing_cell_names_quarter_hour(toy3_case, tmp_path):
    rows = [r for r in full_rows("demand", "1") if not (r[0] == 2 and r[1] == 24)]
    path = tmp_path / "p.csv"
    write_rows(path, rows + full_rows("wind", "w1"))
    with pytest.raises(ProfileError, match=r"\(q=2, t=24\)"):
        load_profiles(path, toy3_case)


def test_load_negative_value_names_cell(toy3_case, tmp_path):
    rows = full_rows("wind", "w1")
    rows[3] = (1, 4, "wind", "w1", -5.0)
    path = tmp_path / "p.csv"
    write_rows(path, rows)
    with pytest.raises(ProfileError, match=r"negative value -5.0.*q=1, t=4"):
        load_profiles(path, toy3_case)


def test_load_unknown_keys(toy3_case, tmp_path):
    path = tmp_path / "p.csv"
    write_rows(path, [(1, 1, "demand", "nope", 1.0)])
    with pytest.raises(ProfileError, match="unknown bus 'nope'"):
        load_profiles(path, toy3_case)
    write_rows(path, [(1, 1, "wind", "nope", 1.0)])
    with pytest.raises(ProfileError, match="unknown wind profile key 'nope'"):
        load_profiles(path, toy3_case)


def test_load_requires_every_plant_key(toy3_case, tmp_path):
    path = tmp_path / "p.csv"
    write_rows(path, full_rows("demand", "1"))
    with pytest.raises(ProfileError, match="profile_key 'w1' has no rows"):
        load_profiles(path, toy3_case)


def test_load_rejects_duplicates_and_bad_kind(toy3_case, tmp_path):
    path = tmp_path / "p.csv"
    write_rows(path, [(1, 1, "wind", "w1", 1.0), (1, 1, "wind", "w1", 2.0)])
    with pytest.raises(ProfileError, match="duplicate cell"):
        load_profiles(path, toy3_case)
    write_rows(path, [(1, 1, "solar", "w1", 1.0)])
    with pytest.raises(ProfileError, match="kind must be"):
        load_profiles(path, toy3_case)


def test_save_load_round_trip(toy3_case, tmp_path):
    prof = synthesize_profiles(ProfileShape(), toy3_case, seed=3)
    path = tmp_path / "p.csv"
    save_profiles(prof, toy3_case, path)
    back = load_profiles(path, toy3_case)
    np.testing.assert_array_equal(back.demand, prof.demand)
    np.testing.assert_array_equal(back.wind_avail, prof.wind_avail)


def test_synthesize_deterministic(toy3_case):
    a = synthesize_profiles(ProfileShape(), toy3_case, seed=11)
    b = synthesize_profiles(ProfileShape(), toy3_case, seed=11)
    assert a.demand.tobytes() == b.demand.tobytes()
    assert a.wind_avail.tobytes() == b.wind_avail.tobytes()
    c = synthesize_profiles(ProfileShape(), toy3_case, seed=12)
    assert a.demand.tobytes() != c.demand.tobytes()


def test_synthesize_quarter3_strictly_highest(toy3_case, rts24_case, cases_dir):
    for case, shape in [(toy3_case, ProfileShape()),
                        (rts24_case, ProfileShape.from_json(cases_dir / "rts24_shape.json"))]:
        prof = synthesize_profiles(shape, case, seed=0)
        means = prof.demand.sum(axis=(1, 2))
        assert all(means[2] > means[q] for q in (0, 1, 3))


def test_synthesize_zero_wind_capacity_factor(toy3_case):
    shape = ProfileShape(wind_capacity_factor=(0.0, 0.0, 0.0, 0.0))
    prof = synthesize_profiles(shape, toy3_case, seed=1)
    assert np.all(prof.wind_avail == 0.0)


def test_synthesize_degenerate_shape(toy3_case):
    with pytest.raises(ProfileError, match="degenerate"):
        synthesize_profiles(ProfileShape(valley_fraction=1.5), toy3_case, seed=0)
    with pytest.raises(ProfileError, match="peaks must be positive"):
        synthesize_profiles(ProfileShape(peak_mw=(0, 0, 0, 0)), toy3_case, seed=0)


def test_scale_level_zero(toy3_case):
    prof = synthesize_profiles(ProfileShape(), toy3_case, seed=2)
    scaled = scale_to_penetration(prof, toy3_case, 0.0)
    assert np.all(scaled.wind_avail == 0.0)
    np.testing.assert_array_equal(scaled.demand, prof.demand)


def test_scale_hits_requested_level(toy3_case):
    prof = synthesize_profiles(ProfileShape(), toy3_case, seed=2)
    scaled = scale_to_penetration(prof, toy3_case, 0.2)
    assert measure_penetration(scaled, toy3_case) == pytest.approx(0.2, rel=1e-9)


def test_scale_flat_arithmetic():
    # one bus, one plant, flat demand 100 and wind 10: level 0.5 needs 5x
    import dataclasses

    from hydrogrid.grid import Bus, GridCase, WindPlant

    case = GridCase(
        buses=(Bus(id="b", idx=0),),
        branches=(),
        generators=(),
        wind_plants=(WindPlant(bus="b", profile_key="w", bus_idx=0, idx=0),),
        energy_hubs=(),
        reference_bus="b",
        days_per_quarter=90)
    prof = flat_profiles(case, demand_mw=100.0, wind_mw=10.0)
    scaled = scale_to_penetration(prof, case, 0.5)
    assert np.all(scaled.wind_avail == 50.0)


def test_scale_zero_wind_shape_rejected(toy3_case):
    prof = flat_profiles(toy3_case, demand_mw=100.0, wind_mw=0.0)
    with pytest.raises(ProfileError, match="all zero"):
        scale_to_penetration(prof, toy3_case, 0.2)
    with pytest.raises(ProfileError, match="non-negative"):
        scale_to_penetration(prof, toy3_case, -0.1)


def test_negative_entries_rejected():
    with pytest.raises(ProfileError, match="non-negative"):
        QuarterProfiles(demand=-np.ones((1, 1, 4)), wind_avail=np.ones((1, 1, 4)))


def test_shape_from_json_round_trip(tmp_path):
    path = tmp_path / "shape.json"
    path.write_text('{"peak_mw": [100, 110, 130, 105], "valley_fraction": 0.5,'
                    '"bus_weights": {"1": 2.0, "2": 1.0}}')
    shape = ProfileShape.from_json(path)
    assert shape.peak_mw == (100.0, 110.0, 130.0, 105.0)
    assert shape.bus_weights == {"1": 2.0, "2": 1.0}
    assert shape.valley_fraction == 0.5

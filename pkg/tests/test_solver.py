import math
import os
import stat
import sys
import textwrap

import numpy as np
import pytest

from hydrogrid.formulation import EQ, GE, LE, MilpModel, Variant, build_model
from hydrogrid.mps import (MpsError, SolutionFileError, emit_mps, parse_mps,
                           parse_solution_file, write_solution_file)
from hydrogrid.solver import (SolveOptions, SolverError, Solution,
                              residuals_from_model, solve)

from conftest import flat_profiles


def tiny_model(n=1):
    return MilpModel(n_cols=n)


def test_solve_min_x_with_floor():
    model = tiny_model()
    model.objective[:] = [1.0]
    model.add_row({0: 1.0}, GE, 3.0, ("eq1", ("g", 0), ("q", 1), ("t", 1)))
    sol = solve(model)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(3.0)
    assert sol.x[0] == pytest.approx(3.0)


def test_solve_single_generator_single_hour():
    # one bus, one generator (p_min=0, p_max=100, cost 10 $/MWh, one day),
    # flat demand 50 over a one-quarter one-hour horizon; hand oracle says
    # output 50 at cost 500. Assembled directly: the system reserve rule
    # makes a one-generator fleet unable to produce in the full builder.
    model = tiny_model(n=1)
    model.objective[:] = [10.0]
    model.lo[0], model.hi[0] = 0.0, 100.0
    model.add_row({0: 1.0}, EQ, 50.0, ("eq12", ("n", 0), ("q", 1), ("t", 1)))
    sol = solve(model)
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(50.0)
    assert sol.objective == pytest.approx(500.0)


def test_solve_infeasible_capacity_shortfall(toy3_case):
    # demand 200 per bus (600 total) against 270 MW of generation, no wind
    prof = flat_profiles(toy3_case, 200.0, 0.0)
    model = build_model(toy3_case, prof, Variant.T)
    sol = solve(model)
    assert sol.status == "infeasible"
    assert sol.x is None and sol.objective is None


def test_solve_zero_demand_all_off(toy3_case):
    prof = flat_profiles(toy3_case, 0.0, 0.0)
    model = build_model(toy3_case, prof, Variant.EH)
    sol = solve(model)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(0.0)
    ix = model.index
    assert all(sol.x[ix.u(g, q, t)] == 0.0
               for g in range(2) for q in range(4) for t in range(24))


def test_solve_unbounded():
    model = tiny_model()
    model.objective[:] = [-1.0]
    model.lo[0], model.hi[0] = 0.0, math.inf
    sol = solve(model)
    assert sol.status == "unbounded"


def test_solver_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(mip_gap=-1)
    with pytest.raises(ValueError):
        SolveOptions(time_limit=0)
    with pytest.raises(SolverError, match="unknown solver adapter"):
        solve(tiny_model(), SolveOptions(solver_hint="nope"))


def test_binary_snapping(toy3_case):
    prof = flat_profiles(toy3_case, 30.0, 0.0)
    model = build_model(toy3_case, prof, Variant.T)
    sol = solve(model)
    assert sol.ok
    binaries = sol.x[model.is_integer]
    assert set(np.unique(binaries)) <= {0.0, 1.0}


# ---------------------------------------------------------------- MPS files

def test_emit_mps_round_trip(tmp_path, toy3_case):
    prof = flat_profiles(toy3_case, 20.0, 5.0)
    model = build_model(toy3_case, prof, Variant.EH)
    path = tmp_path / "m.mps"
    emit_mps(model, path)
    parsed = parse_mps(path)
    assert parsed.n_cols == model.n_cols
    assert parsed.col_names == model.column_names()
    assert parsed.row_names == model.row_names()
    np.testing.assert_array_equal(parsed.lo, model.lo)
    np.testing.assert_array_equal(parsed.hi, model.hi)
    np.testing.assert_array_equal(parsed.is_integer, model.is_integer)
    np.testing.assert_array_equal(parsed.objective, model.objective)
    # identical residuals at random points: same matrix, same row bounds
    rng = np.random.default_rng(0)
    lb, ub = model.row_bounds()
    m = model.to_matrix()
    for _ in range(3):
        x = rng.normal(scale=50.0, size=model.n_cols)
        ax = m @ x
        own = np.maximum(0.0, np.maximum(lb - ax, ax - ub))
        np.testing.assert_allclose(parsed.residuals(x), own, rtol=0, atol=0)


def test_emit_mps_is_byte_deterministic(tmp_path, toy3_case):
    prof = flat_profiles(toy3_case, 20.0, 5.0)
    model = build_model(toy3_case, prof, Variant.EH)
    emit_mps(model, tmp_path / "a.mps")
    emit_mps(model, tmp_path / "b.mps")
    assert (tmp_path / "a.mps").read_bytes() == (tmp_path / "b.mps").read_bytes()


def test_emit_mps_binary_bv_lines(tmp_path, toy3_case):
    prof = flat_profiles(toy3_case, 20.0, 5.0)
    model = build_model(toy3_case, prof, Variant.EH)
    emit_mps(model, tmp_path / "m.mps")
    text = (tmp_path / "m.mps").read_text()
    assert " BV BND u[g=0,q=1,t=1]" in text
    assert " BV BND v[g=0,q=1,t=1]" in text
    for section in ("ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"):
        assert f"\n{section}\n" in text or text.endswith(f"{section}\n")


def test_parse_mps_ranges_and_markers(tmp_path):
    text = textwrap.dedent("""\
        NAME sample
        ROWS
         N obj
         L cap
         G floor
         E fix
        COLUMNS
         M1 'MARKER' 'INTORG'
         y obj 3.0 cap 1.0
         M2 'MARKER' 'INTEND'
         x obj 2.0 cap 1.0
         x floor 1.0 fix 1.0
        RHS
         RHS cap 10.0 floor 2.0
         RHS fix 4.0
        RANGES
         RNG cap 3.0
        BOUNDS
         UP BND x 8.0
        ENDATA
        """)
    path = tmp_path / "s.mps"
    path.write_text(text)
    parsed = parse_mps(path)
    assert parsed.col_names == ["y", "x"]
    assert parsed.is_integer.tolist() == [True, False]
    i = parsed.row_names.index("cap")
    assert parsed.row_lb[i] == 7.0 and parsed.row_ub[i] == 10.0
    assert parsed.hi[parsed.col_names.index("x")] == 8.0
    x = np.array([0.0, 4.0])
    assert parsed.residuals(x).tolist() == [3.0, 0.0, 0.0]


def test_parse_mps_rejects_garbage(tmp_path):
    path = tmp_path / "bad.mps"
    path.write_text("ROWS\n Z what\n")
    with pytest.raises(MpsError, match="unknown row type"):
        parse_mps(path)


# ------------------------------------------------------------- solution files

def test_solution_file_round_trip(tmp_path):
    names = ["a", "b", "c"]
    path = tmp_path / "s.sol"
    write_solution_file(path, "optimal", 12.5, names, np.array([1.0, 0.0, -2.5]))
    status, obj, x = parse_solution_file(path, names)
    assert status == "optimal" and obj == 12.5
    assert x.tolist() == [1.0, 0.0, -2.5]


def test_solution_file_missing_columns_default_zero(tmp_path):
    path = tmp_path / "s.sol"
    path.write_text("status feasible\na 3.0\n")
    status, obj, x = parse_solution_file(path, ["a", "b"])
    assert status == "feasible" and obj is None
    assert x.tolist() == [3.0, 0.0]


def test_solution_file_errors(tmp_path):
    path = tmp_path / "s.sol"
    path.write_text("a 1.0\n")
    with pytest.raises(SolutionFileError, match="missing 'status'"):
        parse_solution_file(path, ["a"])
    path.write_text("status optimal\nzz 1.0\n")
    with pytest.raises(SolutionFileError, match="unknown column 'zz'"):
        parse_solution_file(path, ["a"])
    path.write_text("status odd\n")
    with pytest.raises(SolutionFileError, match="unknown status"):
        parse_solution_file(path, ["a"])


# ------------------------------------------------------------ external solver

FAKE_SOLVER = textwrap.dedent("""\
    #!/usr/bin/env python3
    import sys
    sys.path.insert(0, {src!r})
    import numpy as np
    from scipy.optimize import milp, LinearConstraint, Bounds
    from hydrogrid.mps import parse_mps, write_solution_file

    mps_path, out_path = sys.argv[1], sys.argv[2]
    p = parse_mps(mps_path)
    kwargs = {{}}
    if len(p.row_names):
        kwargs["constraints"] = LinearConstraint(p.matrix, p.row_lb, p.row_ub)
    res = milp(c=p.objective, integrality=p.is_integer.astype(np.uint8),
               bounds=Bounds(p.lo, p.hi), **kwargs)
    status = {{0: "optimal", 1: "feasible", 2: "infeasible", 3: "unbounded"}}[res.status]
    obj = float(res.fun) if res.fun is not None else None
    write_solution_file(out_path, status, obj, p.col_names, res.x)
""")


@pytest.fixture()
def fake_solver(tmp_path):
    import hydrogrid

    src = str(os.path.dirname(os.path.dirname(hydrogrid.__file__)))
    path = tmp_path / "fake_solver.py"
    path.write_text(FAKE_SOLVER.format(src=src))
    path.chmod(path.stat().st_mode | stat.S_IEXEC)
    return path


def test_external_adapter_matches_scipy(tmp_path, toy3_case, fake_solver, monkeypatch):
    prof = flat_profiles(toy3_case, 25.0, 5.0, nq=1, nt=4)
    model = build_model(toy3_case, prof, Variant.EH)
    inproc = solve(model, SolveOptions(mip_gap=1e-8))
    monkeypatch.setenv("HYDROGRID_SOLVER_PATH", str(fake_solver))
    external = solve(model, SolveOptions(mip_gap=1e-8, solver_hint="external"))
    assert external.status == "optimal"
    assert external.objective == pytest.approx(inproc.objective, rel=1e-6)
    # auto prefers the external binary when the env var is set
    auto = solve(model, SolveOptions(mip_gap=1e-8, solver_hint="auto"))
    assert auto.solver == "external"


def test_external_adapter_missing_binary(toy3_case, monkeypatch):
    monkeypatch.delenv("HYDROGRID_SOLVER_PATH", raising=False)
    model = tiny_model()
    model.objective[:] = [1.0]
    with pytest.raises(SolverError, match="HYDROGRID_SOLVER_PATH"):
        solve(model, SolveOptions(solver_hint="external"))
    monkeypatch.setenv("HYDROGRID_SOLVER_PATH", "/does/not/exist")
    with pytest.raises(SolverError, match="not found"):
        solve(model, SolveOptions(solver_hint="external"))


def test_external_adapter_crash(tmp_path, monkeypatch):
    bad = tmp_path / "bad.py"
    bad.write_text("import sys; sys.exit(7)\n")
    monkeypatch.setenv("HYDROGRID_SOLVER_PATH", str(bad))
    model = tiny_model()
    model.objective[:] = [1.0]
    with pytest.raises(SolverError, match="exited 7"):
        solve(model, SolveOptions(solver_hint="external"))


def test_objective_recompute_guard():
    # a backend that misreports the objective must be rejected
    from hydrogrid.solver import _finish

    model = tiny_model()
    model.objective[:] = [2.0]
    with pytest.raises(SolverError, match="disagrees with recomputation"):
        _finish(model, "optimal", 999.0, np.array([1.0]), "test", 0.0)
    sol = _finish(model, "optimal", 2.0, np.array([1.0]), "test", 0.0)
    assert sol.objective == pytest.approx(2.0)


def test_residuals_from_model_flags_perturbation(toy3_case):
    prof = flat_profiles(toy3_case, 30.0, 5.0, nq=1, nt=4)
    model = build_model(toy3_case, prof, Variant.EH)
    sol = solve(model)
    assert sol.ok
    clean = residuals_from_model(model, sol.x)
    assert max(clean.values()) <= 1e-7
    x = sol.x.copy()
    x[model.index.pg(0, 0, 1)] += 1.0
    dirty = residuals_from_model(model, x)
    key = ("eq12", ("n", 0), ("q", 1), ("t", 2))
    assert dirty[key] == pytest.approx(1.0)

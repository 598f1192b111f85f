"""Free-format MPS emission and parsing, plus the solution-file format.

The writer is deterministic: fixed section order, insertion-order rows,
index-order columns, and shortest round-trip float formatting, so identical
models produce byte-identical files. Binary columns are declared with BV
bound lines. The parser is independent of the writer and also accepts
RANGES sections and INTORG/INTEND markers so files from other tools load.

Solution files are whitespace-delimited ``column value`` lines after a
``status`` header (and an optional ``objective`` header); columns omitted
by the solver default to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .formulation import EQ, GE, LE, MilpModel


class MpsError(Exception):
    pass


class SolutionFileError(Exception):
    pass


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_mps(model: MilpModel, path: str | Path) -> None:
    """Write the model as free-format MPS (minimization)."""
    model.check_well_formed()
    col_names = model.column_names()
    row_names = model.row_names()
    sense_char = {LE: "L", GE: "G", EQ: "E"}

    # transpose rows into per-column entry lists; MPS wants each column's
    # entries contiguous
    per_col: list[list[tuple[str, float]]] = [[] for _ in range(model.n_cols)]
    for j in range(model.n_cols):
        if model.objective[j] != 0.0:
            per_col[j].append(("COST", float(model.objective[j])))
    for name, cols, vals in zip(row_names, model.row_cols, model.row_vals):
        for c, vv in zip(cols, vals):
            per_col[int(c)].append((name, float(vv)))

    out = ["NAME HYDROGRID", "ROWS", " N COST"]
    for rel, name in zip(model.row_rel, row_names):
        out.append(f" {sense_char[rel]} {name}")
    out.append("COLUMNS")
    for j in range(model.n_cols):
        cn = col_names[j]
        for rn, vv in per_col[j]:
            out.append(f" {cn} {rn} {_fmt(vv)}")
    out.append("RHS")
    for name, rhs in zip(row_names, model.row_rhs):
        if rhs != 0.0:
            out.append(f" RHS {name} {_fmt(rhs)}")
    out.append("BOUNDS")
    for j in range(model.n_cols):
        cn = col_names[j]
        lo, hi = float(model.lo[j]), float(model.hi[j])
        if model.is_integer[j] and lo == 0.0 and hi == 1.0:
            out.append(f" BV BND {cn}")
            continue
        if lo == hi:
            out.append(f" FX BND {cn} {_fmt(lo)}")
            continue
        if lo == -math.inf and hi == math.inf:
            out.append(f" FR BND {cn}")
            continue
        if model.is_integer[j]:
            out.append(f" LI BND {cn} {_fmt(lo)}")
            if hi != math.inf:
                out.append(f" UI BND {cn} {_fmt(hi)}")
            continue
        if lo == -math.inf:
            out.append(f" MI BND {cn}")
        elif lo != 0.0:
            out.append(f" LO BND {cn} {_fmt(lo)}")
        if hi != math.inf:
            out.append(f" UP BND {cn} {_fmt(hi)}")
    out.append("ENDATA")
    Path(path).write_text("\n".join(out) + "\n")


@dataclass
class ParsedMps:
    """Matrix-level view of an MPS file, sufficient to evaluate residuals."""

    name: str
    col_names: list[str]
    row_names: list[str]
    senses: list[str]                    # relation per row, before RANGES
    rhs: np.ndarray
    row_lb: np.ndarray                   # after RANGES adjustment
    row_ub: np.ndarray
    objective: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    is_integer: np.ndarray
    matrix: sp.csr_matrix

    @property
    def n_cols(self) -> int:
        return len(self.col_names)

    def residuals(self, x: np.ndarray) -> np.ndarray:
        """Per-row constraint violation magnitude at x."""
        ax = self.matrix @ x
        return np.maximum(0.0, np.maximum(self.row_lb - ax, ax - self.row_ub))


def parse_mps(path: str | Path) -> ParsedMps:
    """Independent free-format MPS reader (ROWS/COLUMNS/RHS/RANGES/BOUNDS)."""
    name = ""
    section = None
    obj_row: str | None = None
    senses: list[str] = []
    row_names: list[str] = []
    row_idx: dict[str, int] = {}
    col_names: list[str] = []
    col_idx: dict[str, int] = {}
    ent_r: list[int] = []
    ent_c: list[int] = []
    ent_v: list[float] = []
    obj_coefs: dict[int, float] = {}
    rhs_map: dict[int, float] = {}
    range_map: dict[int, float] = {}
    explicit_lo: dict[int, float] = {}
    explicit_hi: dict[int, float] = {}
    integer_cols: set[int] = set()
    in_integer_block = False
    sense_map = {"L": LE, "G": GE, "E": EQ}
    sections = {"NAME", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS",
                "ENDATA", "OBJSENSE"}

    def col(c: str) -> int:
        if c not in col_idx:
            col_idx[c] = len(col_names)
            col_names.append(c)
        return col_idx[c]

    lines = Path(path).read_text().splitlines()
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip() or raw.lstrip().startswith("*"):
            continue
        tokens = raw.split()
        if not raw[0].isspace() and tokens[0].upper() in sections:
            section = tokens[0].upper()
            if section == "NAME" and len(tokens) > 1:
                name = tokens[1]
            if section == "ENDATA":
                break
            continue
        if section == "OBJSENSE":
            if tokens[0].upper() not in ("MIN", "MINIMIZE"):
                raise MpsError(f"line {lineno}: only minimization is supported")
        elif section == "ROWS":
            kind, rname = tokens[0].upper(), tokens[1]
            if kind == "N":
                if obj_row is None:
                    obj_row = rname
            elif kind in sense_map:
                if rname in row_idx:
                    raise MpsError(f"line {lineno}: duplicate row '{rname}'")
                row_idx[rname] = len(row_names)
                row_names.append(rname)
                senses.append(sense_map[kind])
            else:
                raise MpsError(f"line {lineno}: unknown row type '{kind}'")
        elif section == "COLUMNS":
            if len(tokens) >= 3 and tokens[1].upper() in ("'MARKER'", "MARKER"):
                marker = tokens[-1].upper().strip("'")
                in_integer_block = marker == "INTORG"
                continue
            j = col(tokens[0])
            if in_integer_block:
                integer_cols.add(j)
            pairs = tokens[1:]
            if not pairs or len(pairs) % 2:
                raise MpsError(f"line {lineno}: malformed COLUMNS entry")
            for rname, sval in zip(pairs[::2], pairs[1::2]):
                value = float(sval)
                if rname == obj_row:
                    obj_coefs[j] = obj_coefs.get(j, 0.0) + value
                elif rname in row_idx:
                    ent_r.append(row_idx[rname])
                    ent_c.append(j)
                    ent_v.append(value)
                else:
                    raise MpsError(f"line {lineno}: unknown row '{rname}'")
        elif section == "RHS":
            pairs = tokens[1:]
            if not pairs or len(pairs) % 2:
                raise MpsError(f"line {lineno}: malformed RHS entry")
            for rname, sval in zip(pairs[::2], pairs[1::2]):
                if rname == obj_row:
                    continue  # objective constant: not used by our models
                if rname not in row_idx:
                    raise MpsError(f"line {lineno}: unknown row '{rname}'")
                rhs_map[row_idx[rname]] = float(sval)
        elif section == "RANGES":
            pairs = tokens[1:]
            if not pairs or len(pairs) % 2:
                raise MpsError(f"line {lineno}: malformed RANGES entry")
            for rname, sval in zip(pairs[::2], pairs[1::2]):
                if rname not in row_idx:
                    raise MpsError(f"line {lineno}: unknown row '{rname}'")
                range_map[row_idx[rname]] = float(sval)
        elif section == "BOUNDS":
            btype = tokens[0].upper()
            if len(tokens) < 3:
                raise MpsError(f"line {lineno}: malformed BOUNDS entry")
            cname = tokens[2]
            j = col(cname)
            value = float(tokens[3]) if len(tokens) > 3 else None
            if btype in ("UP", "LO", "FX", "UI", "LI") and value is None:
                raise MpsError(f"line {lineno}: bound type {btype} needs a value")
            if btype == "UP":
                explicit_hi[j] = value
            elif btype == "LO":
                explicit_lo[j] = value
            elif btype == "FX":
                explicit_lo[j] = value
                explicit_hi[j] = value
            elif btype == "FR":
                explicit_lo[j] = -math.inf
                explicit_hi[j] = math.inf
            elif btype == "MI":
                explicit_lo[j] = -math.inf
            elif btype == "PL":
                explicit_hi[j] = math.inf
            elif btype == "BV":
                integer_cols.add(j)
                explicit_lo[j] = 0.0
                explicit_hi[j] = 1.0
            elif btype == "UI":
                integer_cols.add(j)
                explicit_hi[j] = value
            elif btype == "LI":
                integer_cols.add(j)
                explicit_lo[j] = value
            else:
                raise MpsError(f"line {lineno}: unknown bound type '{btype}'")
        elif section is None:
            raise MpsError(f"line {lineno}: data before any section header")

    n_rows, n_cols = len(row_names), len(col_names)
    rhs = np.zeros(n_rows)
    for i, vv in rhs_map.items():
        rhs[i] = vv
    row_lb = np.full(n_rows, -math.inf)
    row_ub = np.full(n_rows, math.inf)
    for i, s in enumerate(senses):
        if s in (GE, EQ):
            row_lb[i] = rhs[i]
        if s in (LE, EQ):
            row_ub[i] = rhs[i]
    # RANGES widen one side; sign conventions follow the MPS standard
    for i, rng in range_map.items():
        s = senses[i]
        if s == LE:
            row_lb[i] = rhs[i] - abs(rng)
        elif s == GE:
            row_ub[i] = rhs[i] + abs(rng)
        else:
            if rng >= 0:
                row_ub[i] = rhs[i] + rng
            else:
                row_lb[i] = rhs[i] + rng

    objective = np.zeros(n_cols)
    for j, vv in obj_coefs.items():
        objective[j] = vv
    lo = np.zeros(n_cols)
    hi = np.full(n_cols, math.inf)
    for j, vv in explicit_lo.items():
        lo[j] = vv
    for j, vv in explicit_hi.items():
        hi[j] = vv
    # MPS convention: an UP bound below zero with no LO line pulls lo to -inf
    for j, vv in explicit_hi.items():
        if vv is not None and vv < 0 and j not in explicit_lo:
            lo[j] = -math.inf
    is_integer = np.zeros(n_cols, dtype=bool)
    for j in integer_cols:
        is_integer[j] = True
    if ent_r:
        matrix = sp.csr_matrix((ent_v, (ent_r, ent_c)), shape=(n_rows, n_cols))
    else:
        matrix = sp.csr_matrix((n_rows, n_cols))
    return ParsedMps(name=name, col_names=col_names, row_names=row_names,
                     senses=senses, rhs=rhs, row_lb=row_lb, row_ub=row_ub,
                     objective=objective, lo=lo, hi=hi, is_integer=is_integer,
                     matrix=matrix)


def write_solution_file(path: str | Path, status: str, objective: float | None,
                        names: list[str], x: np.ndarray | None) -> None:
    lines = [f"status {status}"]
    if objective is not None:
        lines.append(f"objective {_fmt(objective)}")
    if x is not None:
        for nm, vv in zip(names, x):
            lines.append(f"{nm} {_fmt(float(vv))}")
    Path(path).write_text("\n".join(lines) + "\n")


def parse_solution_file(path: str | Path, col_names: list[str]
                        ) -> tuple[str, float | None, np.ndarray | None]:
    """Read a ``status``/``objective`` header plus column-value lines.

    Returns (status, reported objective or None, value vector or None).
    Unknown column names are an error; missing columns default to 0.
    """
    status = None
    objective = None
    idx = {nm: j for j, nm in enumerate(col_names)}
    x = np.zeros(len(col_names))
    saw_values = False
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise SolutionFileError(f"{path}:{lineno}: expected 'name value'")
        key, sval = tokens
        if key == "status":
            status = sval
            continue
        if key == "objective":
            objective = float(sval)
            continue
        if key not in idx:
            raise SolutionFileError(f"{path}:{lineno}: unknown column '{key}'")
        x[idx[key]] = float(sval)
        saw_values = True
    if status is None:
        raise SolutionFileError(f"{path}: missing 'status' header")
    known = {"optimal", "feasible", "infeasible", "unbounded", "timeout"}
    if status not in known:
        raise SolutionFileError(f"{path}: unknown status '{status}'")
    if status in ("infeasible", "unbounded", "timeout") and not saw_values:
        return status, objective, None
    return status, objective, x

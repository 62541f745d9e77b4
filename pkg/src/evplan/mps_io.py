"""Fixed-format MPS export and external-solution import.

Columns are emitted in builder order under generated 8-character names
(C0000001, ...), rows as R0000001..., with binaries wrapped in
INTORG/INTEND markers. A JSON sidecar maps the generated names back to
(family, indices) so external solutions can be joined with the model.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import SolutionImportError
from .milp import SENSE_EQ, SENSE_GE, SENSE_LE, MilpModel

_OBJ = "COST"


def _row_name(i: int) -> str:
    return f"R{i + 1:07d}"


def _col_name(j: int) -> str:
    return f"C{j + 1:07d}"


def _field(value: float) -> str:
    return f"{value:.12G}"


def export_mps(model: MilpModel, path: str | Path, name: str = "EVPLAN") -> Path:
    """Write the model plus a ``<path>.columns.json`` sidecar."""
    path = Path(path)
    lines = [f"NAME          {name}", "ROWS", f" N  {_OBJ}"]
    for i, sense in enumerate(model.row_sense):
        tag = {SENSE_LE: "L", SENSE_GE: "G", SENSE_EQ: "E"}[sense]
        lines.append(f" {tag}  {_row_name(i)}")

    lines.append("COLUMNS")
    csc = model.A.tocsc()
    in_int_block = False
    marker = 0
    for j in range(model.n_cols):
        integral = bool(model.is_int[j])
        if integral and not in_int_block:
            lines.append(f"    MARKER{marker:04d}  'MARKER'                 'INTORG'")
            marker += 1
            in_int_block = True
        elif not integral and in_int_block:
            lines.append(f"    MARKER{marker:04d}  'MARKER'                 'INTEND'")
            marker += 1
            in_int_block = False
        entries = []
        if model.obj[j] != 0.0:
            entries.append((_OBJ, model.obj[j]))
        start, end = csc.indptr[j], csc.indptr[j + 1]
        order = np.argsort(csc.indices[start:end], kind="stable")
        for k in order:
            entries.append((_row_name(int(csc.indices[start + k])), float(csc.data[start + k])))
        if not entries:
            entries.append((_OBJ, 0.0))
        cn = _col_name(j)
        for a in range(0, len(entries), 2):
            chunk = entries[a : a + 2]
            line = f"    {cn:<8}  {chunk[0][0]:<8}  {_field(chunk[0][1]):>12}"
            if len(chunk) == 2:
                line += f"   {chunk[1][0]:<8}  {_field(chunk[1][1]):>12}"
            lines.append(line)
    if in_int_block:
        lines.append(f"    MARKER{marker:04d}  'MARKER'                 'INTEND'")

    lines.append("RHS")
    for i, b in enumerate(model.rhs):
        if b != 0.0:
            lines.append(f"    RHS       {_row_name(i):<8}  {_field(float(b)):>12}")

    lines.append("BOUNDS")
    for j in range(model.n_cols):
        lo, hi = model.lb[j], model.ub[j]
        cn = _col_name(j)
        if lo == hi:
            lines.append(f" FX BND       {cn:<8}  {_field(float(lo)):>12}")
            continue
        if np.isneginf(lo) and np.isposinf(hi):
            lines.append(f" FR BND       {cn:<8}")
            continue
        if np.isneginf(lo):
            lines.append(f" MI BND       {cn:<8}")
        elif lo != 0.0:
            lines.append(f" LO BND       {cn:<8}  {_field(float(lo)):>12}")
        if np.isposinf(hi):
            if model.is_int[j] or lo != 0.0 or np.isneginf(lo):
                lines.append(f" PL BND       {cn:<8}")
        else:
            lines.append(f" UP BND       {cn:<8}  {_field(float(hi)):>12}")

    lines.append("ENDATA")
    path.write_text("\n".join(lines) + "\n")

    sidecar = {
        "objective": _OBJ,
        "columns": {
            _col_name(j): {
                "name": model.col_names[j],
                "family": (model.col_meta[j][0] if model.col_meta[j] else None),
                "indices": (list(model.col_meta[j][1]) if model.col_meta[j] else None),
            }
            for j in range(model.n_cols)
        },
        "rows": {_row_name(i): model.row_names[i] for i in range(model.n_rows)},
    }
    sidecar_path = path.with_suffix(path.suffix + ".columns.json")
    sidecar_path.write_text(json.dumps(sidecar, indent=1, sort_keys=True) + "\n")
    return sidecar_path


def parse_mps(path: str | Path) -> dict:
    """Re-parse an exported file (structure check / round-trip tests)."""
    rows: list[tuple[str, str]] = []
    objective = None
    cols: dict[str, dict] = {}
    rhs: dict[str, float] = {}
    bounds: dict[str, list] = {}
    integral: set[str] = set()
    section = None
    in_int = False
    for raw in Path(path).read_text().splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw.startswith(" "):
            section = raw.split()[0]
            continue
        parts = raw.split()
        if section == "ROWS":
            if parts[0] == "N":
                objective = parts[1]
            else:
                rows.append((parts[0], parts[1]))
        elif section == "COLUMNS":
            if len(parts) >= 3 and parts[2] == "'INTORG'":
                in_int = True
                continue
            if len(parts) >= 3 and parts[2] == "'INTEND'":
                in_int = False
                continue
            name = parts[0]
            entry = cols.setdefault(name, {"entries": {}})
            if in_int:
                integral.add(name)
            for k in range(1, len(parts) - 1, 2):
                entry["entries"][parts[k]] = float(parts[k + 1])
        elif section == "RHS":
            rhs[parts[1]] = float(parts[2])
        elif section == "BOUNDS":
            bounds.setdefault(parts[2], []).append(
                (parts[0], float(parts[3]) if len(parts) > 3 else None)
            )
    return {
        "objective": objective,
        "rows": rows,
        "columns": cols,
        "rhs": rhs,
        "bounds": bounds,
        "integral": integral,
    }


def write_solution_file(model: MilpModel, x: np.ndarray, path: str | Path) -> None:
    """``column-name value`` lines in the exported naming scheme."""
    with open(path, "w") as fh:
        for j in range(model.n_cols):
            fh.write(f"{_col_name(j)} {x[j]:.12g}\n")


def import_solution(model: MilpModel, path: str | Path, tol: float = 1e-6) -> np.ndarray:
    """Read ``name value`` lines, map onto the model, verify feasibility.

    Returns the assignment vector; the objective should be recomputed by
    the caller from ``model.obj`` (it never trusts the solution file).
    """
    values: dict[str, float] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise SolutionImportError(f"{path}:{lineno}: expected 'name value'")
        values[parts[0]] = float(parts[1])

    known = {_col_name(j): j for j in range(model.n_cols)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise SolutionImportError(f"unknown column names: {', '.join(unknown[:5])}")
    missing = sorted(set(known) - set(values))
    if missing:
        raise SolutionImportError(
            f"solution file misses {len(missing)} column(s), first: {missing[0]}"
        )
    x = np.empty(model.n_cols)
    for name, j in known.items():
        x[j] = values[name]
    issues = model.check_point(x, tol=tol)
    if issues:
        raise SolutionImportError(
            f"imported point violates the model ({len(issues)} issue(s))",
            violations=issues,
        )
    return x

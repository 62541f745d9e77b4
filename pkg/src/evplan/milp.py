"""Solver-agnostic MILP container: indexed columns, sparse rows, objective.

Columns are created through named families (e.g. ``fast_charge`` shaped
(V, T)), which keeps the mapping between matrix indices and planning
quantities bijective in both directions. Models are mutable while being
assembled and immutable once frozen.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import BuildError

BINARY = "B"
CONTINUOUS = "C"

SENSE_LE = "L"
SENSE_GE = "G"
SENSE_EQ = "E"


class MilpModel:
    def __init__(self):
        self._frozen = False
        self.col_names: list[str] = []
        self.col_kind: list[str] = []
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._obj: list[float] = []
        self.col_meta: list[tuple] = []
        self.row_names: list[str] = []
        self.row_sense: list[str] = []
        self._rhs: list[float] = []
        self.row_meta: list[tuple] = []
        self._entries: list[tuple[int, int, float]] = []
        self._families: dict[str, np.ndarray] = {}
        # Frozen arrays
        self.A: sp.csr_matrix | None = None
        self.lb: np.ndarray | None = None
        self.ub: np.ndarray | None = None
        self.obj: np.ndarray | None = None
        self.rhs: np.ndarray | None = None
        self.is_int: np.ndarray | None = None

    # -- assembly ------------------------------------------------------

    def _check_mutable(self):
        if self._frozen:
            raise BuildError("model is frozen")

    def add_column(self, name, kind, lb, ub, obj=0.0, meta=()) -> int:
        self._check_mutable()
        if kind == BINARY and (lb, ub) != (0.0, 1.0):
            raise BuildError(f"binary column {name} must have bounds [0, 1]")
        j = len(self.col_names)
        self.col_names.append(name)
        self.col_kind.append(kind)
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._obj.append(float(obj))
        self.col_meta.append(meta)
        return j

    def add_family(self, family: str, shape: tuple[int, ...], kind: str,
                   lb=0.0, ub=1.0, labels=None) -> np.ndarray:
        """Allocate a block of columns; returns their indices shaped ``shape``."""
        self._check_mutable()
        if family in self._families:
            raise BuildError(f"family {family} added twice")
        idx = np.empty(shape, dtype=int)
        for pos in np.ndindex(*shape):
            label = "_".join(str(x) for x in pos) if labels is None else labels(pos)
            idx[pos] = self.add_column(
                f"{family}[{label}]", kind, lb, ub, meta=(family, pos)
            )
        self._families[family] = idx
        return idx

    def add_row(self, name, coeffs, sense, rhs, meta=()) -> int:
        """coeffs: iterable of (column, value); duplicates are summed."""
        self._check_mutable()
        if sense not in (SENSE_LE, SENSE_GE, SENSE_EQ):
            raise BuildError(f"unknown sense {sense!r}")
        r = len(self.row_names)
        ncols = len(self.col_names)
        for j, a in coeffs:
            if not 0 <= j < ncols:
                raise BuildError(f"row {name} references undefined column {j}")
            if a != 0.0:
                self._entries.append((r, int(j), float(a)))
        self.row_names.append(name)
        self.row_sense.append(sense)
        self._rhs.append(float(rhs))
        self.row_meta.append(meta)
        return r

    def set_objective(self, coeffs):
        self._check_mutable()
        for j, a in coeffs:
            self._obj[j] = float(a)

    def set_bounds(self, j: int, lb: float, ub: float):
        self._check_mutable()
        if lb > ub:
            raise BuildError(f"column {self.col_names[j]}: lb {lb} > ub {ub}")
        self._lb[j] = float(lb)
        self._ub[j] = float(ub)

    def freeze(self) -> "MilpModel":
        self._check_mutable()
        n, m = len(self.col_names), len(self.row_names)
        if self._entries:
            r, c, v = zip(*self._entries)
            self.A = sp.coo_matrix((v, (r, c)), shape=(m, n)).tocsr()
            self.A.sum_duplicates()
        else:
            self.A = sp.csr_matrix((m, n))
        self.lb = np.asarray(self._lb)
        self.ub = np.asarray(self._ub)
        self.obj = np.asarray(self._obj)
        self.rhs = np.asarray(self._rhs)
        self.is_int = np.asarray([k == BINARY for k in self.col_kind])
        self._entries = []
        self._frozen = True
        return self

    # -- queries ---------------------------------------------------------

    @property
    def frozen(self) -> bool:
        return self._frozen

    @property
    def n_cols(self) -> int:
        return len(self.col_names)

    @property
    def n_rows(self) -> int:
        return len(self.row_names)

    @property
    def n_binary(self) -> int:
        return sum(1 for k in self.col_kind if k == BINARY)

    def family(self, name: str) -> np.ndarray:
        return self._families[name]

    @property
    def families(self) -> dict[str, np.ndarray]:
        return dict(self._families)

    def has_family(self, name: str) -> bool:
        return name in self._families

    def column_of(self, family: str, *pos) -> int:
        return int(self._families[family][pos])

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.obj @ x)

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x

    def check_point(self, x: np.ndarray, tol: float = 1e-6) -> list[str]:
        """Constraint/bound/integrality violations of a full assignment."""
        issues = []
        if np.any(x < self.lb - tol) or np.any(x > self.ub + tol):
            for j in np.flatnonzero((x < self.lb - tol) | (x > self.ub + tol)):
                issues.append(f"column {self.col_names[j]} = {x[j]:.6g} outside bounds")
        act = self.row_activity(x)
        for r in range(self.n_rows):
            s, b = self.row_sense[r], self.rhs[r]
            bad = (
                (s == SENSE_LE and act[r] > b + tol)
                or (s == SENSE_GE and act[r] < b - tol)
                or (s == SENSE_EQ and abs(act[r] - b) > tol)
            )
            if bad:
                issues.append(
                    f"row {self.row_names[r]}: activity {act[r]:.6g} {s} {b:.6g} violated"
                )
        frac = np.abs(x - np.round(x))
        for j in np.flatnonzero(self.is_int & (frac > tol)):
            issues.append(f"column {self.col_names[j]} = {x[j]:.6g} not integral")
        return issues

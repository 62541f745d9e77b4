"""MILP presolve: bound propagation, forcing rows, column merging.

The commute structure makes large parts of the plan model mechanical: every
driving interval forces its plug/charge binaries to zero, the stiff-driver
rules collapse plug states to one value per parking block, and the
single-port tie rows identify plug counts with charger counts. The passes
below discover all of that generically:

 * singleton rows tighten variable bounds (integer bounds get rounded),
 * rows whose minimum activity already meets the rhs force variables,
 * two-column rows ``a x - a y (=|>=|<=) 0`` yield merges or implications
   (a pair of opposite implications is also a merge),
 * zero-cost columns appearing in a single row are removed when the row is
   satisfiable for any value of the remaining variables,
 * empty columns move to their cheapest bound.

Postsolve replays the recorded transforms to recover a full assignment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .milp import SENSE_EQ, SENSE_GE, SENSE_LE, MilpModel

FEAS_TOL = 1e-9
MAX_PASSES = 30


@dataclass
class ReducedModel:
    A: sp.csr_matrix
    senses: list[str]
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    obj: np.ndarray
    is_int: np.ndarray
    obj_offset: float
    members: list[list[int]]  # reduced column -> original columns

    @property
    def n_cols(self):
        return self.A.shape[1]

    @property
    def n_rows(self):
        return self.A.shape[0]


@dataclass
class PresolveResult:
    status: str  # reduced | infeasible
    reduced: ReducedModel | None = None
    fixed: dict[int, float] = field(default_factory=dict)  # original col -> value
    singletons: list[tuple] = field(default_factory=list)
    n_original: int = 0

    def postsolve(self, x_reduced: np.ndarray) -> np.ndarray:
        """Expand a reduced-model assignment to the original columns."""
        x = np.zeros(self.n_original)
        for col, val in self.fixed.items():
            x[col] = val
        red = self.reduced
        if red is not None:
            for k, members in enumerate(red.members):
                for col in members:
                    x[col] = x_reduced[k]
        # Reverse order: a removed column may feed a row referenced by an
        # earlier removal.
        for col, a, sense, rhs, others, lo, hi, integral in reversed(self.singletons):
            residual = rhs - sum(ak * x[ck] for ck, ak in others)
            if sense == SENSE_EQ:
                val = residual / a
            elif (sense == SENSE_GE) == (a > 0):
                val = max(lo, residual / a)  # need a*x >= residual
            else:
                val = min(hi, residual / a)
            if integral:
                val = float(np.round(val))
            x[col] = min(max(val, lo), hi)
        return x


def presolve(model: MilpModel) -> PresolveResult:
    work = _Working.from_model(model)
    for _ in range(MAX_PASSES):
        changed = work.one_pass()
        if work.infeasible:
            return PresolveResult(status="infeasible", n_original=model.n_cols)
        if not changed:
            break
    reduced, fixed, singles = work.finish()
    return PresolveResult(
        status="reduced",
        reduced=reduced,
        fixed=fixed,
        singletons=singles,
        n_original=model.n_cols,
    )


class _Working:
    """Mutable presolve state over COO-style entry lists."""

    def __init__(self, rows, senses, rhs, lb, ub, obj, is_int, members):
        self.rows = rows  # list of dict col -> coef
        self.senses = senses
        self.rhs = rhs
        self.lb = lb
        self.ub = ub
        self.obj = obj
        self.is_int = is_int
        self.members = members
        self.obj_offset = 0.0
        self.fixed: dict[int, float] = {}
        self.singles: list[tuple] = []
        self.infeasible = False

    @classmethod
    def from_model(cls, model: MilpModel):
        A = model.A.tocoo()
        rows = [dict() for _ in range(model.n_rows)]
        for r, c, v in zip(A.row, A.col, A.data):
            rows[r][int(c)] = rows[r].get(int(c), 0.0) + float(v)
        return cls(
            rows=rows,
            senses=list(model.row_sense),
            rhs=[float(x) for x in model.rhs],
            lb=list(map(float, model.lb)),
            ub=list(map(float, model.ub)),
            obj=list(map(float, model.obj)),
            is_int=list(bool(b) for b in model.is_int),
            members=[[j] for j in range(model.n_cols)],
        )

    # -- helpers ---------------------------------------------------------

    def _fix(self, col, val) -> bool:
        if col in self.fixed:
            return False
        lo, hi = self.lb[col], self.ub[col]
        val = min(max(val, lo), hi)
        if self.is_int[col]:
            val = float(np.round(val))
        self.fixed[col] = val
        self.obj_offset += self.obj[col] * val
        self.lb[col] = self.ub[col] = val
        return True

    def _col_usage(self):
        usage: dict[int, list[int]] = {}
        for r, row in enumerate(self.rows):
            if row is None:
                continue
            for c in row:
                usage.setdefault(c, []).append(r)
        return usage

    def _min_max_activity(self, row):
        lo = hi = 0.0
        for c, a in row.items():
            l, u = self.lb[c], self.ub[c]
            if a > 0:
                lo += a * l if np.isfinite(l) else -np.inf
                hi += a * u if np.isfinite(u) else np.inf
            else:
                lo += a * u if np.isfinite(u) else -np.inf
                hi += a * l if np.isfinite(l) else np.inf
        return lo, hi

    def _tighten(self, col, lo=None, hi=None) -> bool:
        changed = False
        if lo is not None and lo > self.lb[col] + FEAS_TOL:
            self.lb[col] = lo
            changed = True
        if hi is not None and hi < self.ub[col] - FEAS_TOL:
            self.ub[col] = hi
            changed = True
        if self.is_int[col] and changed:
            self.lb[col] = np.ceil(self.lb[col] - 1e-7)
            self.ub[col] = np.floor(self.ub[col] + 1e-7)
        if self.lb[col] > self.ub[col] + FEAS_TOL:
            self.infeasible = True
        return changed

    # -- one full pass -----------------------------------------------------

    def one_pass(self) -> bool:
        changed = False
        changed |= self._substitute_fixed()
        if self.infeasible:
            return True
        changed |= self._row_reductions()
        if self.infeasible:
            return True
        changed |= self._bound_tighten()
        if self.infeasible:
            return True
        changed |= self._substitute_fixed()
        if self.infeasible:
            return True
        changed |= self._merge_doubletons()
        changed |= self._drop_inert_singletons()
        changed |= self._fix_empty_columns()
        return changed

    def _substitute_fixed(self) -> bool:
        changed = False
        for r, row in enumerate(self.rows):
            if row is None:
                continue
            hit = [c for c in row if self.lb[c] == self.ub[c]]
            for c in hit:
                self.rhs[r] -= row.pop(c) * self.lb[c]
                changed = True
        # Columns not yet recorded as fixed (e.g. bounds collapsed by
        # tightening) get a fix record now.
        for c in range(len(self.lb)):
            if self.lb[c] == self.ub[c] and c not in self.fixed:
                self._fix(c, self.lb[c])
                changed = True
        return changed

    def _row_reductions(self) -> bool:
        changed = False
        for r, row in enumerate(self.rows):
            if row is None:
                continue
            sense, b = self.senses[r], self.rhs[r]
            if len(row) == 0:
                ok = (
                    (sense == SENSE_LE and 0 <= b + FEAS_TOL)
                    or (sense == SENSE_GE and 0 >= b - FEAS_TOL)
                    or (sense == SENSE_EQ and abs(b) <= FEAS_TOL)
                )
                if not ok:
                    self.infeasible = True
                    return True
                self.rows[r] = None
                changed = True
                continue
            if len(row) == 1:
                (c, a), = row.items()
                if sense in (SENSE_LE, SENSE_EQ):
                    if a > 0:
                        self._tighten(c, hi=b / a)
                    else:
                        self._tighten(c, lo=b / a)
                if sense in (SENSE_GE, SENSE_EQ):
                    if a > 0:
                        self._tighten(c, lo=b / a)
                    else:
                        self._tighten(c, hi=b / a)
                if self.infeasible:
                    return True
                self.rows[r] = None
                changed = True
                continue
            lo, hi = self._min_max_activity(row)
            if sense == SENSE_LE:
                if lo > b + FEAS_TOL:
                    self.infeasible = True
                    return True
                if hi <= b + FEAS_TOL:
                    self.rows[r] = None  # redundant
                    changed = True
                elif abs(lo - b) <= FEAS_TOL and np.isfinite(lo):
                    changed |= self._force_row_to_min(row)
                    self.rows[r] = None
            elif sense == SENSE_GE:
                if hi < b - FEAS_TOL:
                    self.infeasible = True
                    return True
                if lo >= b - FEAS_TOL:
                    self.rows[r] = None
                    changed = True
                elif abs(hi - b) <= FEAS_TOL and np.isfinite(hi):
                    changed |= self._force_row_to_max(row)
                    self.rows[r] = None
            else:
                if lo > b + FEAS_TOL or hi < b - FEAS_TOL:
                    self.infeasible = True
                    return True
                if abs(lo - b) <= FEAS_TOL and np.isfinite(lo):
                    changed |= self._force_row_to_min(row)
                    self.rows[r] = None
                elif abs(hi - b) <= FEAS_TOL and np.isfinite(hi):
                    changed |= self._force_row_to_max(row)
                    self.rows[r] = None
        return changed

    def _bound_tighten(self) -> bool:
        """Implied variable bounds from row activities.

        For a <= row, each variable must fit in the slack the other
        variables leave at their loosest; likewise for >= rows. This is
        what eliminates equipment choices whose single use already
        overshoots a battery (one fast-charger hour on a small pack).
        """
        changed = False
        for r, row in enumerate(self.rows):
            if row is None or len(row) < 2:
                continue
            sense, b = self.senses[r], self.rhs[r]
            lo, hi = self._min_max_activity(row)
            if sense in (SENSE_LE, SENSE_EQ) and np.isfinite(lo):
                for c, a in row.items():
                    cmin = a * self.lb[c] if a > 0 else a * self.ub[c]
                    others = lo - cmin
                    if a > 0:
                        changed |= self._tighten(c, hi=(b - others) / a)
                    else:
                        changed |= self._tighten(c, lo=(b - others) / a)
                    if self.infeasible:
                        return True
            if sense in (SENSE_GE, SENSE_EQ) and np.isfinite(hi):
                for c, a in row.items():
                    cmax = a * self.ub[c] if a > 0 else a * self.lb[c]
                    others = hi - cmax
                    if a > 0:
                        changed |= self._tighten(c, lo=(b - others) / a)
                    else:
                        changed |= self._tighten(c, hi=(b - others) / a)
                    if self.infeasible:
                        return True
        return changed

    def _force_row_to_min(self, row) -> bool:
        changed = False
        for c, a in row.items():
            changed |= self._fix(c, self.lb[c] if a > 0 else self.ub[c])
        return changed

    def _force_row_to_max(self, row) -> bool:
        changed = False
        for c, a in row.items():
            changed |= self._fix(c, self.ub[c] if a > 0 else self.lb[c])
        return changed

    def _merge_doubletons(self) -> bool:
        # Collect x <= y implications from rows  a x - a y <= 0  (and the
        # symmetric forms); equalities merge immediately.
        parent = {}

        def find(a):
            root = a
            while parent.get(root, root) != root:
                root = parent[root]
            while parent.get(a, a) != a:
                parent[a], a = root, parent[a]
            return root

        def union(a, b):
            ra, rb = find(a), find(b)
            if ra == rb:
                return ra
            if rb < ra:
                ra, rb = rb, ra
            parent[rb] = ra
            return ra

        implications: dict[tuple[int, int], set[str]] = {}
        merge_rows = []
        for r, row in enumerate(self.rows):
            if row is None or len(row) != 2:
                continue
            if abs(self.rhs[r]) > FEAS_TOL:
                continue
            (c1, a1), (c2, a2) = row.items()
            if abs(a1 + a2) > 1e-12 * max(abs(a1), abs(a2)):
                continue
            pos, neg = (c1, c2) if a1 > 0 else (c2, c1)
            sense = self.senses[r]
            if sense == SENSE_EQ:
                union(pos, neg)
                merge_rows.append(r)
                continue
            # a*pos - a*neg <= 0  ->  pos <= neg ; >= 0 -> pos >= neg
            key = (min(pos, neg), max(pos, neg))
            direction = "le" if (sense == SENSE_LE) == (key[0] == pos) else "ge"
            implications.setdefault(key, set()).add((direction, r))
        for (p, q), tags in implications.items():
            dirs = {d for d, _ in tags}
            if {"le", "ge"} <= dirs:
                union(p, q)
                merge_rows.extend(r for _, r in tags)

        groups: dict[int, list[int]] = {}
        for c in set(parent):
            groups.setdefault(find(c), []).append(c)
        if not groups:
            return False
        for r in merge_rows:
            self.rows[r] = None
        remap = {}
        for root, extra in groups.items():
            cols = sorted(set(extra) | {root})
            keep = cols[0]
            for c in cols[1:]:
                remap[c] = keep
                self.members[keep].extend(self.members[c])
                self.members[c] = []
                self.obj[keep] += self.obj[c]
                self.obj[c] = 0.0
                self.is_int[keep] = self.is_int[keep] or self.is_int[c]
                lo = max(self.lb[keep], self.lb[c])
                hi = min(self.ub[keep], self.ub[c])
                if lo > hi + FEAS_TOL:
                    self.infeasible = True
                    return True
                self.lb[keep], self.ub[keep] = lo, hi
                self.lb[c], self.ub[c] = 0.0, 0.0  # retired column
                self.fixed.setdefault(c, None)  # marker: handled via members
        for row in self.rows:
            if row is None:
                continue
            for c in [c for c in row if c in remap]:
                row[remap[c]] = row.get(remap[c], 0.0) + row.pop(c)
            for c in [c for c, a in row.items() if a == 0.0]:
                row.pop(c)
        return True

    def _drop_inert_singletons(self) -> bool:
        usage = self._col_usage()
        changed = False
        for c, used_in in usage.items():
            if len(used_in) != 1 or self.obj[c] != 0.0 or c in self.fixed:
                continue
            r = used_in[0]
            row = self.rows[r]
            if row is None or c not in row:
                continue
            a = row[c]
            sense, b = self.senses[r], self.rhs[r]
            others = {k: v for k, v in row.items() if k != c}
            lo_o, hi_o = self._min_max_activity(others)
            lo_c, hi_c = self.lb[c], self.ub[c]
            if self.is_int[c]:
                integral_ok = abs(abs(a) - 1.0) < 1e-12 and all(
                    abs(v - round(v)) < 1e-12 for v in others.values()
                ) and abs(b - round(b)) < 1e-12 and all(self.is_int[k] for k in others)
                if not integral_ok:
                    continue
            reach_hi = a * hi_c if a > 0 else a * lo_c  # max of a*x_c
            reach_lo = a * lo_c if a > 0 else a * hi_c
            if sense == SENSE_GE:
                ok = np.isposinf(reach_hi) or (
                    np.isfinite(lo_o) and reach_hi >= b - lo_o - FEAS_TOL
                )
            elif sense == SENSE_LE:
                ok = np.isneginf(reach_lo) or (
                    np.isfinite(hi_o) and reach_lo <= b - hi_o + FEAS_TOL
                )
            else:
                ok = (
                    np.isfinite(lo_o)
                    and np.isfinite(hi_o)
                    and reach_lo <= b - hi_o + FEAS_TOL
                    and reach_hi >= b - lo_o - FEAS_TOL
                )
            if not ok:
                continue
            rep_others = [(self.members[k][0], v) for k, v in others.items()]
            self.singles.append(
                (
                    self.members[c][0],
                    a,
                    sense,
                    b,
                    rep_others,
                    lo_c,
                    hi_c,
                    self.is_int[c],
                )
            )
            self.rows[r] = None
            self.lb[c] = self.ub[c] = 0.0
            self.fixed.setdefault(c, None)
            changed = True
        return changed

    def _fix_empty_columns(self) -> bool:
        usage = self._col_usage()
        changed = False
        for c in range(len(self.lb)):
            if c in self.fixed or c in usage or not self.members[c]:
                continue
            if self.obj[c] > 0 or (self.obj[c] == 0 and np.isfinite(self.lb[c])):
                target = self.lb[c]
            else:
                target = self.ub[c]
            if not np.isfinite(target):
                target = 0.0
            changed |= self._fix(c, target)
        return changed

    # -- output -------------------------------------------------------------

    def finish(self):
        alive = [
            c
            for c in range(len(self.lb))
            if c not in self.fixed and self.members[c]
        ]
        new_index = {c: k for k, c in enumerate(alive)}
        entries = []
        senses, rhs = [], []
        rkeep = 0
        for r, row in enumerate(self.rows):
            if row is None:
                continue
            live = {c: a for c, a in row.items() if c in new_index}
            for c, a in live.items():
                entries.append((rkeep, new_index[c], a))
            # Fully-fixed rows were substituted already; anything left with
            # no live column is a constant row checked earlier.
            senses.append(self.senses[r])
            rhs.append(self.rhs[r])
            rkeep += 1
        n = len(alive)
        if entries:
            rr, cc, vv = zip(*entries)
            A = sp.coo_matrix((vv, (rr, cc)), shape=(rkeep, n)).tocsr()
        else:
            A = sp.csr_matrix((rkeep, n))
        reduced = ReducedModel(
            A=A,
            senses=senses,
            rhs=np.asarray(rhs),
            lb=np.asarray([self.lb[c] for c in alive]),
            ub=np.asarray([self.ub[c] for c in alive]),
            obj=np.asarray([self.obj[c] for c in alive]),
            is_int=np.asarray([self.is_int[c] for c in alive]),
            obj_offset=self.obj_offset,
            members=[list(self.members[c]) for c in alive],
        )
        fixed_out = {}
        for c, v in self.fixed.items():
            if v is None:
                continue  # merged/removed columns recover via members/singles
            for orig in self.members[c] or [c]:
                fixed_out[orig] = v
        return reduced, fixed_out, list(self.singles)

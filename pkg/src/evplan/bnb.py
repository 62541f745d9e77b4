"""Branch and bound over the bounded-simplex LP relaxation.

Node selection is best-first on LP bounds with deterministic tie-breaking
(lowest node id), extended with plunging: after expanding a node, the
search keeps diving into the child on the rounded side of the branching
variable until it hits an integral point, an infeasibility, or a dominated
bound. Plunging is what produces incumbents on the large planning models;
pure best-first exploration would grow the tree breadth-first and reach
its first integral leaf far too late. The sibling of each dive step is
queued lazily with its parent bound, which stays a valid lower bound, so
the reported global bound is exact and non-decreasing.

Branching picks the most-fractional binary, ties to the lowest column
index. All decisions are deterministic for a fixed model and config.
"""

from __future__ import annotations

import heapq
import sys as _sys
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .milp import MilpModel
from .presolve import presolve
from .simplex import BoundedSimplex

INT_TOL = 1e-6
BULK_TOL = 1e-4
KEY_TIE = 1e-9
PLUNGE_CAP = 20000
PLUNGE_BACKTRACKS = 400
PLUNGE_BACKTRACKS_INCUMBENT = 48
BASIS_CACHE = 4096


@dataclass(frozen=True)
class SolverConfig:
    gap: float = 0.10
    abs_gap: float = 1e-9
    node_limit: int | None = None
    time_limit_s: float | None = None
    branching: str = "most-fractional"
    seed: int = 42
    log_interval_s: float | None = None  # progress lines to stderr

    def __post_init__(self):
        if self.gap < 0 or self.abs_gap < 0:
            raise ParameterError("gaps must be non-negative")
        if self.node_limit is not None and self.node_limit <= 0:
            raise ParameterError("node limit must be positive")
        if self.time_limit_s is not None and self.time_limit_s <= 0:
            raise ParameterError("time limit must be positive")


@dataclass
class MilpSolveResult:
    status: str  # optimal | gap-optimal | infeasible | limit
    x: np.ndarray | None = None
    objective: float | None = None
    bound: float = -np.inf
    gap: float | None = None
    nodes: int = 0
    lp_iterations: int = 0
    runtime_s: float = 0.0


class _Node:
    __slots__ = (
        "id", "key", "parent", "branch_col", "branch_lo", "branch_hi",
        "basis", "frac_col", "frac_val", "evaluated",
    )

    def __init__(self, id, key, parent, branch_col=-1, branch_lo=0.0, branch_hi=1.0):
        self.id = id
        self.key = key
        self.parent = parent
        self.branch_col = branch_col
        self.branch_lo = branch_lo
        self.branch_hi = branch_hi
        self.basis = None
        self.frac_col = -1
        self.frac_val = 0.0
        self.evaluated = False

    def bounds(self, lb0, ub0):
        lb, ub = lb0.copy(), ub0.copy()
        node = self
        while node is not None and node.branch_col >= 0:
            j = node.branch_col
            lb[j] = max(lb[j], node.branch_lo)
            ub[j] = min(ub[j], node.branch_hi)
            node = node.parent
        return lb, ub

    def __lt__(self, other):
        return self.id < other.id


def _relative_gap(incumbent: float, bound: float) -> float:
    return (incumbent - bound) / max(1.0, abs(incumbent))


class _Search:
    def __init__(self, model: MilpModel, config: SolverConfig):
        self.config = config
        self.started = time.monotonic()
        self.pre = presolve(model)
        self.infeasible = self.pre.status == "infeasible"
        if self.infeasible:
            return
        red = self.pre.reduced
        self.red = red
        self.engine = BoundedSimplex(red.A, red.rhs, red.senses, red.obj)
        self.int_cols = np.flatnonzero(red.is_int)
        self.incumbent_x = None
        self.incumbent_obj = np.inf
        self.best_bound = -np.inf
        self.nodes_done = 0
        self.lp_iters = 0
        self.next_id = 0
        self.heap: list[tuple[float, _Node]] = []
        self.basis_cache: deque[_Node] = deque()
        self.last_log = self.started
        self.eval_counts = {"fractional": 0, "infeasible": 0, "integral": 0}
        self._last_d: np.ndarray | None = None
        self._last_d_node = -1

    # -- helpers -----------------------------------------------------------

    def elapsed(self) -> float:
        return time.monotonic() - self.started

    def out_of_budget(self) -> bool:
        cfg = self.config
        if cfg.node_limit is not None and self.nodes_done >= cfg.node_limit:
            return True
        if cfg.time_limit_s is not None and self.elapsed() > cfg.time_limit_s:
            return True
        return False

    def _store_basis(self, node: _Node, basis):
        node.basis = basis
        if node.id == 0:
            return  # the root basis is pinned: it warms far-apart siblings
        self.basis_cache.append(node)
        while len(self.basis_cache) > BASIS_CACHE:
            old = self.basis_cache.popleft()
            old.basis = None

    def _warm_for(self, node: _Node):
        anc = node.parent
        while anc is not None and anc.basis is None:
            anc = anc.parent
        return None if anc is None else anc.basis

    def evaluate(self, node: _Node):
        lb, ub = node.bounds(self.red.lb, self.red.ub)
        res = self.engine.solve(lb, ub, warm_basis=self._warm_for(node))
        self.lp_iters += res.iterations
        self.nodes_done += 1
        node.evaluated = True
        if res.status == "infeasible":
            self.eval_counts["infeasible"] += 1
            return "infeasible", None
        if res.status != "optimal":
            raise RuntimeError(f"node LP ended with status {res.status}")
        node.key = max(node.key, res.objective + self.red.obj_offset)
        self._last_d = res.reduced_costs  # valid only while node is current
        self._last_d_node = node.id
        self._store_basis(node, res.basis)
        col = self._fractional_col(res.x)
        if col < 0:
            self.eval_counts["integral"] += 1
            self._accept(res.x)
            return "integral", res.x
        self.eval_counts["fractional"] += 1
        node.frac_col, node.frac_val = col, float(res.x[col])
        return "fractional", res.x

    def _fractional_col(self, x) -> int:
        if self.int_cols.size == 0:
            return -1
        vals = x[self.int_cols]
        dist = np.abs(vals - np.round(vals))
        worst = int(np.argmax(dist))  # first max = lowest column on ties
        if dist[worst] <= INT_TOL:
            return -1
        return int(self.int_cols[worst])

    def _accept(self, x):
        xi = x.copy()
        xi[self.int_cols] = np.round(xi[self.int_cols])
        obj = float(self.red.obj @ xi) + self.red.obj_offset
        if obj < self.incumbent_obj - 1e-12:
            self.incumbent_x = xi
            self.incumbent_obj = obj

    def _fathomed(self, key: float) -> bool:
        return self.incumbent_x is not None and key >= self.incumbent_obj - self.config.abs_gap

    def _gap_reached(self) -> bool:
        if self.incumbent_x is None:
            return False
        if self.incumbent_obj - self.best_bound <= self.config.abs_gap:
            return True
        return _relative_gap(self.incumbent_obj, self.best_bound) <= self.config.gap

    def _log(self):
        cfg = self.config
        if cfg.log_interval_s is None:
            return
        now = time.monotonic()
        if now - self.last_log < cfg.log_interval_s:
            return
        self.last_log = now
        inc = "-" if self.incumbent_x is None else f"{self.incumbent_obj:.1f}"
        print(
            f"[bnb] {self.elapsed():6.0f}s nodes={self.nodes_done} "
            f"open={len(self.heap)} bound={self.best_bound:.1f} incumbent={inc} "
            f"evals={self.eval_counts}",
            file=_sys.stderr,
        )

    # -- expansion ----------------------------------------------------------

    def _flip_lift(self, parent: _Node, col: int, to_one: bool) -> float:
        """Valid bound increase for forcing ``col`` away from its LP value,
        from the parent's reduced costs (zero when the LP is stale)."""
        if self._last_d is None or self._last_d_node != parent.id:
            return 0.0
        d = self._last_d[col]
        return max(0.0, d) if to_one else max(0.0, -d)

    def _branch_pair(self, parent: _Node, col: int, val: float):
        """Two-way children on one column; the rounded side first."""
        floor = float(np.floor(val + INT_TOL))
        down = (float(self.red.lb[col]), floor)
        up = (floor + 1.0, float(self.red.ub[col]))
        first, second = (up, down) if val - floor > 0.5 else (down, up)
        dive = _Node(self.next_id, parent.key, parent, col, *first)
        self.next_id += 1
        rest = _Node(self.next_id, parent.key, parent, col, *second)
        self.next_id += 1
        return dive, rest

    def _dive_chain(self, parent: _Node, x: np.ndarray):
        """One dive step: a chain of single-column fixes.

        Every unfixed binary within BULK_TOL of an integer is pinned at its
        current value (drifting integral values is what ruins dive leaves);
        when nothing is pinnable the least-fractional binary is rounded.
        Each fix leaves its flip-side sibling pending with a reduced-cost
        lifted key, so the chain is an ordinary sequence of two-way
        branches and the search stays exhaustive.
        """
        lb, ub = parent.bounds(self.red.lb, self.red.ub)
        vals = x[self.int_cols]
        dist = np.abs(vals - np.round(vals))
        unfixed = lb[self.int_cols] < ub[self.int_cols]
        near = unfixed & (dist <= BULK_TOL)
        if near.any():
            fix_cols = self.int_cols[near]
        else:
            frac = dist > INT_TOL
            order = int(np.argmin(np.where(frac, dist, np.inf)))
            fix_cols = self.int_cols[order : order + 1]
        chain = parent
        siblings = []
        for col in fix_cols:
            val = float(np.round(x[col]))
            flip = 1.0 - val
            key = parent.key + self._flip_lift(parent, int(col), to_one=flip > 0.5)
            sib = _Node(self.next_id, key, chain, int(col), flip, flip)
            self.next_id += 1
            link = _Node(self.next_id, parent.key, chain, int(col), val, val)
            self.next_id += 1
            siblings.append(sib)
            chain = link
        return chain, siblings

    def _plunge(self, node: _Node):
        """Depth-first dive from an evaluated fractional node.

        The first step branches the node on its most-fractional binary (the
        tree expansion rule); the dive then deepens by committing
        near-integral variables in bulk, falling back to flip-side siblings
        when a child closes, with a bounded number of full backtracks.
        Dives either reach an integral leaf (the incumbent source of this
        solver), die in an infeasible pocket, or hand their untouched
        siblings back to the best-first queue.
        """
        stack: list[_Node] = []  # pending flip-side siblings along the path
        dive, rest = self._branch_pair(node, node.frac_col, node.frac_val)
        stack.append(rest)
        cur, x = self._eval_or_backtrack(dive, stack)
        backtracks = 0
        steps = 0
        while cur is not None and steps < PLUNGE_CAP:
            if self.out_of_budget():
                heapq.heappush(self.heap, (cur.key, cur))
                break
            steps += 1
            chain, siblings = self._dive_chain(cur, x)
            stack.extend(siblings)
            status, cx = self.evaluate(chain)
            if status == "fractional" and not self._fathomed(chain.key):
                cur, x = chain, cx
                continue
            if status == "integral":
                break
            backtracks += 1
            limit = (
                PLUNGE_BACKTRACKS_INCUMBENT
                if self.incumbent_x is not None
                else PLUNGE_BACKTRACKS
            )
            if backtracks > limit:
                break
            cur, x = self._eval_or_backtrack(None, stack)
        for rest in stack:
            if not rest.evaluated:
                heapq.heappush(self.heap, (rest.key, rest))

    def _eval_or_backtrack(self, first: _Node | None, stack: list[_Node]):
        """Evaluate ``first`` and, while it closes, pull siblings LIFO."""
        cand = first
        while True:
            if cand is None:
                if not stack:
                    return None, None
                cand = stack.pop()
                if self._fathomed(cand.key):
                    cand.evaluated = True  # closed by bound, not re-queued
                    cand = None
                    continue
            status, x = self.evaluate(cand)
            if status == "fractional" and not self._fathomed(cand.key):
                return cand, x
            if self.out_of_budget():
                return None, None
            cand = None

    # -- main loop ------------------------------------------------------------

    def run(self) -> MilpSolveResult:
        if self.infeasible:
            return MilpSolveResult(status="infeasible", runtime_s=self.elapsed())

        root = _Node(self.next_id, -np.inf, None)
        self.next_id += 1
        status, _x = self.evaluate(root)
        if status == "infeasible":
            return self._finish(limited=False)
        self.best_bound = root.key
        if status == "integral":
            self.best_bound = self.incumbent_obj
            return self._finish(limited=False)
        self._plunge(root)

        limited = False
        while self.heap:
            self.best_bound = max(self.best_bound, self.heap[0][0])
            if self._gap_reached():
                break
            if self.out_of_budget():
                limited = True
                break
            self._log()
            key, node = heapq.heappop(self.heap)
            if self._fathomed(key):
                continue
            if not node.evaluated:
                status, _x = self.evaluate(node)
                if status != "fractional":
                    continue
                if self._fathomed(node.key):
                    continue
                if self.heap and node.key > self.heap[0][0] + KEY_TIE:
                    heapq.heappush(self.heap, (node.key, node))
                    continue
            self._plunge(node)

        if not self.heap and not limited and self.incumbent_x is not None:
            self.best_bound = self.incumbent_obj
        if self.incumbent_x is not None:
            # Open nodes above the incumbent cannot hold anything better, so
            # the proven bound never exceeds the incumbent value.
            self.best_bound = min(self.best_bound, self.incumbent_obj)
        return self._finish(limited)

    def _finish(self, limited: bool) -> MilpSolveResult:
        runtime = self.elapsed()
        if self.incumbent_x is None:
            status = "limit" if limited else "infeasible"
            return MilpSolveResult(
                status=status,
                bound=self.best_bound,
                nodes=self.nodes_done,
                lp_iterations=self.lp_iters,
                runtime_s=runtime,
            )
        gap = max(_relative_gap(self.incumbent_obj, self.best_bound), 0.0)
        if self.incumbent_obj - self.best_bound <= self.config.abs_gap:
            status, gap = "optimal", 0.0
        elif gap <= self.config.gap:
            status = "gap-optimal"
        else:
            status = "limit"
        return MilpSolveResult(
            status=status,
            x=self.pre.postsolve(self.incumbent_x),
            objective=self.incumbent_obj,
            bound=self.best_bound,
            gap=gap,
            nodes=self.nodes_done,
            lp_iterations=self.lp_iters,
            runtime_s=runtime,
        )


def solve_bnb(model: MilpModel, config: SolverConfig | None = None) -> MilpSolveResult:
    """Minimize the MILP; deterministic for a fixed model and config."""
    return _Search(model, config or SolverConfig()).run()

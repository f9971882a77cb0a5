"""Generic binary linear programs: exact solver plus a brute-force oracle.

`solve` runs depth-first branch and bound with LP-relaxation bounding
(fix-to-1 branch explored first, branching on the lowest-index fractional
variable), so identical instances always produce identical assignments.
`brute_force` enumerates every assignment and exists purely as an
independent check on `solve` in the test suite.
"""
from __future__ import annotations

import re
import time
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import ConfigurationError

INT_TOL = 1e-6        # LP value counts as integral within this
FEAS_TOL = 1e-9       # slack allowed when re-checking a 0/1 assignment
TIE_TOL = 1e-9        # objective values this close count as equal optima


@dataclass(frozen=True)
class LinearConstraint:
    indices: Tuple[int, ...]
    coeffs: Tuple[float, ...]
    sense: str  # "<=", ">=" or "=="
    rhs: float
    name: str = ""


class MilpInstance:
    """Maximize a linear objective over binary variables under linear rows."""

    def __init__(self, offset: float = 0.0):
        self.names: List[str] = []
        self.objective: List[float] = []
        self.constraints: List[LinearConstraint] = []
        self.offset = float(offset)

    @property
    def num_variables(self) -> int:
        return len(self.names)

    def add_variable(self, name: str, objective: float = 0.0) -> int:
        if not np.isfinite(objective):
            raise ConfigurationError(f"non-finite objective coefficient for {name}")
        self.names.append(name)
        self.objective.append(float(objective))
        return len(self.names) - 1

    def add_constraint(self, terms, sense: str, rhs: float, name: str = "") -> None:
        if sense not in ("<=", ">=", "=="):
            raise ConfigurationError(f"unknown constraint sense {sense!r}")
        items = sorted(terms.items()) if isinstance(terms, dict) else sorted(terms)
        indices = tuple(int(i) for i, _ in items)
        coeffs = tuple(float(c) for _, c in items)
        for i in indices:
            if not 0 <= i < self.num_variables:
                raise ConfigurationError(f"constraint references undeclared variable {i}")
        if not all(np.isfinite(c) for c in coeffs) or not np.isfinite(rhs):
            raise ConfigurationError(f"non-finite coefficient in constraint {name!r}")
        self.constraints.append(LinearConstraint(indices, coeffs, sense, float(rhs), name))

    def objective_array(self) -> np.ndarray:
        return np.asarray(self.objective, dtype=float)

    def evaluate(self, assignment: np.ndarray) -> float:
        return float(np.dot(self.objective_array(), assignment) + self.offset)

    def violations(self, assignment: np.ndarray, tol: float = FEAS_TOL) -> List[str]:
        bad = []
        for row in self.constraints:
            lhs = float(sum(c * assignment[i] for i, c in zip(row.indices, row.coeffs)))
            if row.sense == "<=" and lhs > row.rhs + tol:
                bad.append(f"{row.name or row}: {lhs} > {row.rhs}")
            elif row.sense == ">=" and lhs < row.rhs - tol:
                bad.append(f"{row.name or row}: {lhs} < {row.rhs}")
            elif row.sense == "==" and abs(lhs - row.rhs) > tol:
                bad.append(f"{row.name or row}: {lhs} != {row.rhs}")
        return bad

    def _matrices(self):
        """Split rows into (A_ub, b_ub, A_eq, b_eq) sparse matrices."""
        n = self.num_variables
        ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
        for row in self.constraints:
            data = np.array(row.coeffs, dtype=float)
            idx = np.array(row.indices, dtype=int)
            if row.sense == "<=":
                ub_rows.append((data, idx))
                ub_rhs.append(row.rhs)
            elif row.sense == ">=":
                ub_rows.append((-data, idx))
                ub_rhs.append(-row.rhs)
            else:
                eq_rows.append((data, idx))
                eq_rhs.append(row.rhs)

        def build(rows):
            if not rows:
                return None
            indptr = np.cumsum([0] + [len(i) for _, i in rows])
            data = np.concatenate([d for d, _ in rows]) if rows else np.empty(0)
            indices = np.concatenate([i for _, i in rows]) if rows else np.empty(0, int)
            return sparse.csr_matrix((data, indices, indptr), shape=(len(rows), n))

        A_ub = build(ub_rows)
        A_eq = build(eq_rows)
        return (
            A_ub,
            np.array(ub_rhs) if ub_rhs else None,
            A_eq,
            np.array(eq_rhs) if eq_rhs else None,
        )


@dataclass
class SolveResult:
    status: str  # "optimal", "infeasible" or "gap-limit"
    objective_value: float
    assignment: Optional[np.ndarray]
    nodes_explored: int = 0

    def value_of(self, index: int) -> int:
        return int(self.assignment[index])


def _lex_smaller(a: np.ndarray, b: np.ndarray) -> bool:
    diff = a != b
    if not diff.any():
        return False
    first = int(np.flatnonzero(diff)[0])
    return a[first] < b[first]


def _greedy_round(inst: MilpInstance, x_lp: np.ndarray, var_rows, lb, ub) -> Optional[np.ndarray]:
    """Build a feasible 0/1 vector guided by an LP solution.

    Accepts variables in decreasing LP value while no <= or == row would
    overshoot, then tops up under-satisfied == and >= rows by objective
    value. Returns None when that fails; used only to seed incumbents.
    """
    n = inst.num_variables
    rows = inst.constraints
    act = np.zeros(len(rows))
    x = np.zeros(n, dtype=int)
    order = np.lexsort((np.arange(n), -x_lp))
    obj = inst.objective_array()
    for i in order:
        if ub[i] == 0:
            continue
        if lb[i] == 0 and x_lp[i] <= 1e-9 and obj[i] <= 0:
            continue
        fits = True
        for r, coef in var_rows[i]:
            if rows[r].sense in ("<=", "==") and act[r] + coef > rows[r].rhs + FEAS_TOL:
                fits = False
                break
        if fits and (lb[i] == 1 or x_lp[i] > 1e-9 or obj[i] > 0):
            x[i] = 1
            for r, coef in var_rows[i]:
                act[r] += coef
    for r, row in enumerate(rows):
        needs = (row.sense == "==" and act[r] < row.rhs - FEAS_TOL) or (
            row.sense == ">=" and act[r] < row.rhs - FEAS_TOL
        )
        if not needs:
            continue
        candidates = sorted(
            (i for i, c in zip(row.indices, row.coeffs) if x[i] == 0 and ub[i] == 1 and c > 0),
            key=lambda i: (-obj[i], i),
        )
        for i in candidates:
            fits = True
            for rr, coef in var_rows[i]:
                if rows[rr].sense in ("<=", "==") and act[rr] + coef > rows[rr].rhs + FEAS_TOL:
                    fits = False
                    break
            if fits:
                x[i] = 1
                for rr, coef in var_rows[i]:
                    act[rr] += coef
            if act[r] >= row.rhs - FEAS_TOL:
                break
    if np.any(x < lb) or inst.violations(x):
        return None
    return x


def solve(
    inst: MilpInstance,
    rel_gap: float = 1e-6,
    time_limit: Optional[float] = None,
    abs_gap: float = 0.0,
    node_limit: Optional[int] = None,
) -> SolveResult:
    """Branch and bound over the 0/1 box with LP-relaxation bounds.

    Deterministic: depth-first, lowest-index fractional variable, 1-branch
    first; equal-objective incumbents resolved toward the lexicographically
    smaller assignment. An LP-guided greedy rounding seeds incumbents so
    bound pruning engages early. `node_limit` (unlike `time_limit`) cuts
    the search off reproducibly; both return the best incumbent with
    status "gap-limit".
    """
    if rel_gap < 0 or abs_gap < 0:
        raise ConfigurationError(f"gaps must be >= 0, got {rel_gap}, {abs_gap}")
    n = inst.num_variables
    if n == 0:
        feasible = not inst.violations(np.zeros(0))
        if not feasible:
            return SolveResult("infeasible", float("-inf"), None)
        return SolveResult("optimal", inst.offset, np.zeros(0, dtype=int))

    A_ub, b_ub, A_eq, b_eq = inst._matrices()
    c_min = -inst.objective_array()  # linprog minimizes
    deadline = None if time_limit is None else time.monotonic() + time_limit
    var_rows: List[List[Tuple[int, float]]] = [[] for _ in range(n)]
    for r, row in enumerate(inst.constraints):
        for i, coef in zip(row.indices, row.coeffs):
            var_rows[i].append((r, coef))

    best_val = float("-inf")
    best_x: Optional[np.ndarray] = None
    nodes = 0
    limited = False

    def consider(cand: Optional[np.ndarray]) -> None:
        nonlocal best_val, best_x
        if cand is None:
            return
        val = inst.evaluate(cand)
        if val > best_val + TIE_TOL:
            best_val, best_x = val, cand
        elif best_x is not None and abs(val - best_val) <= TIE_TOL and _lex_smaller(cand, best_x):
            best_x = cand

    root = (np.zeros(n, dtype=np.int8), np.ones(n, dtype=np.int8))
    stack = [root]
    while stack:
        if deadline is not None and time.monotonic() > deadline:
            limited = True
            break
        if node_limit is not None and nodes >= node_limit:
            limited = True
            break
        lb, ub = stack.pop()
        nodes += 1
        bounds = list(zip(lb.tolist(), ub.tolist()))
        res = linprog(
            c_min, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
            bounds=bounds, method="highs",
        )
        if res.status == 4:
            # rare HiGHS "model status unknown"; retry without presolve
            res = linprog(
                c_min, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                bounds=bounds, method="highs-ds", options={"presolve": False},
            )
        if res.status == 2:  # infeasible
            continue
        if res.status != 0:
            raise RuntimeError(f"LP relaxation failed with status {res.status}: {res.message}")
        bound = -res.fun + inst.offset
        margin = max(rel_gap * max(1.0, abs(best_val)), abs_gap, TIE_TOL)
        if best_x is not None and bound <= best_val + margin:
            continue
        x = np.asarray(res.x)
        frac = np.abs(x - np.rint(x))
        fractional = np.flatnonzero(frac > INT_TOL)
        if fractional.size == 0:
            cand = np.rint(x).astype(int)
            if not inst.violations(cand):
                consider(cand)
                continue
            # rounding broke feasibility: fall through and split on some free var
            free = np.flatnonzero(lb < ub)
            if free.size == 0:
                continue
            branch = int(free[0])
        else:
            if nodes == 1 or nodes % 8 == 0:
                consider(_greedy_round(inst, x, var_rows, lb, ub))
                margin = max(rel_gap * max(1.0, abs(best_val)), abs_gap, TIE_TOL)
                if best_x is not None and bound <= best_val + margin:
                    continue
            branch = int(fractional[0])
        lb0, ub0 = lb.copy(), ub.copy()
        ub0[branch] = 0
        lb1, ub1 = lb.copy(), ub.copy()
        lb1[branch] = 1
        stack.append((lb0, ub0))  # popped second
        stack.append((lb1, ub1))  # popped first: explore the 1-branch eagerly

    if limited:
        return SolveResult("gap-limit", best_val, best_x, nodes)
    if best_x is None:
        return SolveResult("infeasible", float("-inf"), None, nodes)
    return SolveResult("optimal", best_val, best_x, nodes)


BRUTE_FORCE_LIMIT = 24
_CHUNK = 1 << 18


def brute_force(inst: MilpInstance) -> SolveResult:
    """Exact optimum by enumerating every assignment. Test oracle only."""
    n = inst.num_variables
    if n > BRUTE_FORCE_LIMIT:
        raise ConfigurationError(
            f"brute force refused: {n} variables exceeds limit {BRUTE_FORCE_LIMIT}"
        )
    if n == 0:
        if inst.violations(np.zeros(0)):
            return SolveResult("infeasible", float("-inf"), None)
        return SolveResult("optimal", inst.offset, np.zeros(0, dtype=int))

    obj = inst.objective_array()
    dense = np.zeros((len(inst.constraints), n))
    senses = []
    rhs = np.zeros(len(inst.constraints))
    for r, row in enumerate(inst.constraints):
        dense[r, list(row.indices)] = row.coeffs
        senses.append(row.sense)
        rhs[r] = row.rhs

    shifts = np.arange(n - 1, -1, -1)  # variable 0 is the most significant bit
    best_val = float("-inf")
    best_x: Optional[np.ndarray] = None
    total = 1 << n
    for lo in range(0, total, _CHUNK):
        ks = np.arange(lo, min(lo + _CHUNK, total), dtype=np.int64)
        X = ((ks[:, None] >> shifts[None, :]) & 1).astype(np.int8)
        lhs = X @ dense.T
        feasible = np.ones(len(ks), dtype=bool)
        for r, sense in enumerate(senses):
            if sense == "<=":
                feasible &= lhs[:, r] <= rhs[r] + FEAS_TOL
            elif sense == ">=":
                feasible &= lhs[:, r] >= rhs[r] - FEAS_TOL
            else:
                feasible &= np.abs(lhs[:, r] - rhs[r]) <= FEAS_TOL
        if not feasible.any():
            continue
        vals = X[feasible] @ obj
        k = int(np.argmax(vals))
        # enumeration runs in lexicographic order, so strict improvement keeps
        # the lexicographically smallest optimum
        if vals[k] > best_val:
            best_val = float(vals[k])
            best_x = X[feasible][k].astype(int)
    if best_x is None:
        return SolveResult("infeasible", float("-inf"), None)
    return SolveResult("optimal", best_val + inst.offset, best_x)


def _lp_name(name: str, index: int) -> str:
    clean = re.sub(r"[^A-Za-z0-9_]", "_", name) if name else ""
    return clean or f"x{index}"


def write_lp(inst: MilpInstance, path) -> None:
    """Dump the instance in LP text format for cross-checks with other solvers."""
    names = [_lp_name(nm, i) for i, nm in enumerate(inst.names)]
    lines = ["\\ binary program dump", f"\\ objective offset: {inst.offset!r}", "Maximize"]
    terms = " ".join(
        f"{'+' if c >= 0 else '-'} {abs(c)!r} {names[i]}"
        for i, c in enumerate(inst.objective)
    )
    lines.append(f" obj: {terms if terms else '0 ' + (names[0] if names else '')}")
    lines.append("Subject To")
    for r, row in enumerate(inst.constraints):
        expr = " ".join(
            f"{'+' if c >= 0 else '-'} {abs(c)!r} {names[i]}"
            for i, c in zip(row.indices, row.coeffs)
        )
        op = {"<=": "<=", ">=": ">=", "==": "="}[row.sense]
        label = _lp_name(row.name, r) if row.name else f"c{r}"
        lines.append(f" {label}: {expr if expr else '0 ' + names[0]} {op} {row.rhs!r}")
    lines.append("Binaries")
    lines.append(" " + " ".join(names))
    lines.append("End")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")

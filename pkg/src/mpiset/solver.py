"""Conic SDP solving behind a pluggable backend registry.

The default backend is Clarabel (interior point, native PSD cones). Every
returned solution is re-checked independently of the backend: equality
residuals recomputed from the problem data, Gram blocks eigen-decomposed
with numpy, and the duality gap compared against tolerance. A backend
claiming optimality that fails these checks is downgraded to
NumericalTrouble rather than trusted.

PSD cone convention: column-stacked upper triangle with off-diagonal
entries scaled by sqrt(2) (so the cone's inner product matches the matrix
trace inner product).
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .sos import SdpProblem

SQRT2 = math.sqrt(2.0)


class SdpStatus(enum.Enum):
    OPTIMAL = "optimal"
    PRIMAL_INFEASIBLE = "primal_infeasible"
    DUAL_INFEASIBLE = "dual_infeasible"
    MAX_ITER = "max_iter"
    NUMERICAL_TROUBLE = "numerical_trouble"


@dataclass
class SolverOptions:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iter: int = 200
    verbose: bool = False
    backend: str = "clarabel"


@dataclass
class SdpSolution:
    status: SdpStatus
    x: np.ndarray | None
    eq_duals: np.ndarray | None
    primal_objective: float
    dual_objective: float
    achieved: dict[str, float]
    iterations: int
    solve_time: float
    backend: str
    messages: list[str] = field(default_factory=list)


def mat_from_svec(svec: np.ndarray, dim: int) -> np.ndarray:
    """Symmetric matrix from column-stacked scaled upper triangle."""
    M = np.zeros((dim, dim))
    pos = 0
    for c in range(dim):
        for r in range(c + 1):
            val = svec[pos]
            if r != c:
                val /= SQRT2
            M[r, c] = M[c, r] = val
            pos += 1
    return M


def _solve_clarabel(problem: SdpProblem, options: SolverOptions):
    import clarabel
    from scipy import sparse

    nvar = problem.n_vars
    rows_i: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    b: list[float] = []
    cones = []
    r = 0
    for row, rhs in zip(problem.eq_rows, problem.eq_rhs):
        for vid, c in row:
            rows_i.append(r)
            cols.append(vid)
            vals.append(c)
        b.append(rhs)
        r += 1
    if problem.n_eq:
        cones.append(clarabel.ZeroConeT(problem.n_eq))
    if problem.nonneg_ids:
        for vid in problem.nonneg_ids:
            rows_i.append(r)
            cols.append(vid)
            vals.append(-1.0)
            b.append(0.0)
            r += 1
        cones.append(clarabel.NonnegativeConeT(len(problem.nonneg_ids)))
    for _, dim, ids in problem.psd_blocks:
        pos = 0
        for c in range(dim):
            for rr in range(c + 1):
                scale = 1.0 if rr == c else SQRT2
                rows_i.append(r)
                cols.append(ids[pos])
                vals.append(-scale)
                b.append(0.0)
                pos += 1
                r += 1
        cones.append(clarabel.PSDTriangleConeT(dim))

    A = sparse.csc_matrix(
        (vals, (rows_i, cols)), shape=(r, nvar), dtype=np.float64
    )
    P = sparse.csc_matrix((nvar, nvar), dtype=np.float64)
    q = np.zeros(nvar)
    for vid, c in problem.objective:
        q[vid] = c

    settings = clarabel.DefaultSettings()
    settings.verbose = options.verbose
    settings.max_iter = options.max_iter
    settings.tol_gap_abs = options.gap_tol
    settings.tol_gap_rel = options.gap_tol
    settings.tol_feas = options.feas_tol

    solver = clarabel.DefaultSolver(P, q, A, np.array(b), cones, settings)
    t0 = time.perf_counter()
    sol = solver.solve()
    elapsed = time.perf_counter() - t0

    status_name = str(sol.status)
    mapping = {
        "Solved": "solved",
        "PrimalInfeasible": "primal_infeasible",
        "DualInfeasible": "dual_infeasible",
        "MaxIterations": "max_iter",
        "MaxTime": "max_iter",
    }
    raw = mapping.get(status_name, "numerical_trouble")
    x = np.asarray(sol.x)
    s = np.asarray(sol.s)
    z = np.asarray(sol.z)
    # per-block Gram content is the PSD section of the cone slack
    offset = problem.n_eq + len(problem.nonneg_ids)
    grams = []
    for _, dim, _ids in problem.psd_blocks:
        tri = dim * (dim + 1) // 2
        grams.append(mat_from_svec(s[offset : offset + tri], dim))
        offset += tri
    return {
        "raw_status": raw,
        "backend_status": status_name,
        "x": x,
        "eq_duals": z[: problem.n_eq],
        "primal_objective": float(sol.obj_val),
        "dual_objective": float(sol.obj_val_dual),
        "iterations": int(sol.iterations),
        "solve_time": elapsed,
        "grams": grams,
    }


BACKENDS: dict[str, Callable[[SdpProblem, SolverOptions], dict]] = {
    "clarabel": _solve_clarabel,
}


def _certify(problem: SdpProblem, raw: dict, options: SolverOptions) -> tuple[dict, list[str]]:
    """Backend-independent checks; returns achieved tolerances and violations."""
    x = raw["x"]
    achieved: dict[str, float] = {}
    violations: list[str] = []

    resid = 0.0
    for row, rhs in zip(problem.eq_rows, problem.eq_rhs):
        val = sum(c * x[vid] for vid, c in row) - rhs
        resid = max(resid, abs(val) / (1.0 + abs(rhs)))
    achieved["eq_residual"] = resid
    if resid > options.feas_tol:
        violations.append(
            f"equality residual {resid:.3e} exceeds feas_tol {options.feas_tol:.3e}"
        )

    p, d = raw["primal_objective"], raw["dual_objective"]
    gap = abs(p - d)
    achieved["duality_gap"] = gap
    if gap > options.gap_tol * (1.0 + abs(p)):
        violations.append(f"duality gap {gap:.3e} exceeds tolerance")
    if d > p + options.gap_tol * (1.0 + abs(p)):
        violations.append("weak duality violated beyond tolerance")

    if raw["grams"]:
        min_eig = min(float(np.linalg.eigvalsh(G)[0]) for G in raw["grams"])
        achieved["min_gram_eig"] = min_eig
        if min_eig < -10.0 * options.feas_tol:
            violations.append(
                f"Gram block eigenvalue {min_eig:.3e} below -10*feas_tol"
            )
    if problem.nonneg_ids:
        min_nn = float(min(x[vid] for vid in problem.nonneg_ids))
        achieved["min_nonneg"] = min_nn
        if min_nn < -10.0 * options.feas_tol:
            violations.append(f"nonnegative variable at {min_nn:.3e}")
    return achieved, violations


def solve(problem: SdpProblem, options: SolverOptions | None = None) -> SdpSolution:
    """Solve and certify; statuses other than OPTIMAL carry no guarantees."""
    options = options or SolverOptions()
    if problem.n_vars == 0:
        raise ValueError("problem has no decision variables")
    if options.backend not in BACKENDS:
        raise ValueError(
            f"unknown backend {options.backend!r}; available: {sorted(BACKENDS)}"
        )
    raw = BACKENDS[options.backend](problem, options)

    status_map = {
        "primal_infeasible": SdpStatus.PRIMAL_INFEASIBLE,
        "dual_infeasible": SdpStatus.DUAL_INFEASIBLE,
        "max_iter": SdpStatus.MAX_ITER,
        "numerical_trouble": SdpStatus.NUMERICAL_TROUBLE,
    }
    messages = [f"backend status: {raw['backend_status']}"]
    obj_shift = problem.objective_const

    if raw["raw_status"] == "solved":
        achieved, violations = _certify(problem, raw, options)
        if violations:
            status = SdpStatus.NUMERICAL_TROUBLE
            messages += violations
        else:
            status = SdpStatus.OPTIMAL
    else:
        status = status_map[raw["raw_status"]]
        achieved = {}

    infeasible = status in (SdpStatus.PRIMAL_INFEASIBLE, SdpStatus.DUAL_INFEASIBLE)
    return SdpSolution(
        status=status,
        x=None if infeasible else raw["x"],
        eq_duals=None if infeasible else raw["eq_duals"],
        primal_objective=math.nan if infeasible else raw["primal_objective"] + obj_shift,
        dual_objective=math.nan if infeasible else raw["dual_objective"] + obj_shift,
        achieved=achieved,
        iterations=raw["iterations"],
        solve_time=raw["solve_time"],
        backend=options.backend,
        messages=messages,
    )

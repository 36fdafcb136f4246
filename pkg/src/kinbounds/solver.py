"""Uniform solve contract over a primal-dual interior-point backend.

Problems arrive as linear objectives with equality rows and affine PSD
blocks and are handed to cvxopt's conelp.  Two safeguards matter here:

* Equality rows are equilibrated, deduplicated, and rank-reduced before
  the call (the backend requires a full-rank A), with an explicit
  consistency check so contradictory rows surface as Infeasible.
* The published objective is taken from the dual side, so early
  termination can only make a reported bound looser, never invalid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from cvxopt import matrix as cvx_matrix
from cvxopt import solvers as cvx_solvers

from .errors import ValidationError

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
NUMERICAL_FAILURE = "NumericalFailure"
ITER_LIMIT = "IterLimit"


@dataclass(frozen=True)
class Tolerances:
    # feas matches the backend's native default; problems pinned to a
    # deterministic initial state have no strict interior and their primal
    # residual floors just above 1e-8.
    gap: float = 1e-8
    feas: float = 1e-7


@dataclass
class SolverSolution:
    status: str
    objective: float | None
    x: np.ndarray | None
    primal_objective: float | None
    gap: float | None
    primal_residual: float | None
    dual_residual: float | None
    iterations: int
    backend: str


def _dense_equalities(equalities, n_vars: int):
    rows = []
    rhs = []
    for terms, b in equalities:
        row = np.zeros(n_vars)
        for idx, coeff in terms:
            row[idx] += coeff
        rows.append(row)
        rhs.append(float(b))
    if not rows:
        return np.zeros((0, n_vars)), np.zeros(0)
    return np.array(rows), np.array(rhs)


def _reduce_equalities(A: np.ndarray, b: np.ndarray, feas_tol: float):
    """Equilibrate, deduplicate, and drop linearly dependent rows.

    Returns (A, b, consistent); consistent is False when the equality
    system alone has no solution.
    """
    if A.shape[0] == 0:
        return A, b, True
    scales = np.max(np.abs(A), axis=1)
    keep = []
    for i, s in enumerate(scales):
        if s == 0.0:
            if abs(b[i]) > feas_tol:
                return A[:0], b[:0], False
            continue
        keep.append(i)
    A = A[keep] / scales[keep, None]
    b = b[keep] / scales[keep]
    if A.shape[0] == 0:
        return A, b, True

    seen = {}
    unique = []
    for i in range(A.shape[0]):
        key = (A[i].tobytes(), float(b[i]))
        if key not in seen:
            seen[key] = True
            unique.append(i)
    A = A[unique]
    b = b[unique]

    # Row selection by QR with column pivoting on A^T.
    _, R, piv = scipy.linalg.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        rank = 0
    else:
        rank = int(np.sum(diag > diag[0] * max(A.shape) * np.finfo(float).eps * 10))
    selected = sorted(piv[:rank])

    x_ls, *_ = np.linalg.lstsq(A, b, rcond=None)
    residual = np.max(np.abs(A @ x_ls - b)) if b.size else 0.0
    consistent = residual <= max(feas_tol, 1e-9) * (1.0 + np.max(np.abs(b), initial=0.0))
    return A[selected], b[selected], consistent


def _conic_data(problem):
    """Build (c, G, h, dims) for the backend; PSD cone rows are dense."""
    n = problem.n_vars
    sizes = [block.size for block in problem.blocks]
    total_rows = sum(d * d for d in sizes)
    G = np.zeros((total_rows, n))
    h = np.zeros(total_rows)
    offset = 0
    for block in problem.blocks:
        d = block.size
        for (a, b), (const, terms) in block.cells.items():
            for r, c in ((a, b), (b, a)) if a != b else ((a, b),):
                flat = offset + c * d + r
                h[flat] = const
                for idx, coeff in terms:
                    G[flat, idx] -= coeff
        offset += d * d
    return G, h, {"l": 0, "q": [], "s": sizes}


def _classify(status: str, iterations: int, iter_cap: int) -> str:
    if status == "optimal":
        return OPTIMAL
    if status == "primal infeasible":
        return INFEASIBLE
    if status == "dual infeasible":
        return UNBOUNDED
    if iterations >= iter_cap:
        return ITER_LIMIT
    return NUMERICAL_FAILURE


def solve(problem, tol: Tolerances | None = None, iter_cap: int = 100) -> SolverSolution:
    """Solve one assembled problem; statuses are returned, never thrown.

    The reported objective is the dual value (plus the problem's constant
    offset), which bounds the primal optimum from the safe side for both
    senses.  Failed solves report objective None.
    """
    tol = tol or Tolerances()
    problem.validate()
    if not problem.blocks:
        raise ValidationError("problem has no conic blocks")

    n = problem.n_vars
    sign = 1.0 if problem.sense == "min" else -1.0
    c = np.zeros(n)
    for idx, coeff in problem.objective.items():
        c[idx] += sign * coeff

    A, b = _dense_equalities(problem.equalities, n)
    A, b, consistent = _reduce_equalities(A, b, tol.feas)
    if not consistent:
        return SolverSolution(
            status=INFEASIBLE,
            objective=None,
            x=None,
            primal_objective=None,
            gap=None,
            primal_residual=None,
            dual_residual=None,
            iterations=0,
            backend="presolve",
        )

    G, h, dims = _conic_data(problem)
    options = {
        "show_progress": False,
        "maxiters": max(1, int(iter_cap)),
        "abstol": tol.gap,
        "reltol": tol.gap,
        "feastol": tol.feas,
    }
    args = dict(
        c=cvx_matrix(c),
        G=cvx_matrix(G),
        h=cvx_matrix(h),
        dims=dims,
    )
    if A.shape[0]:
        args["A"] = cvx_matrix(A)
        args["b"] = cvx_matrix(b)

    def conclusiveness(status: str) -> int:
        return {"optimal": 2, "primal infeasible": 1, "dual infeasible": 1}.get(status, 0)

    best = None
    backend = "conelp"
    for kkt in (None, "ldl"):
        try:
            if kkt is None:
                sol = cvx_solvers.conelp(options=options, **args)
            else:
                sol = cvx_solvers.conelp(options=options, kktsolver=kkt, **args)
        except (ZeroDivisionError, ArithmeticError, ValueError):
            continue
        if best is None or conclusiveness(sol["status"]) > conclusiveness(best["status"]):
            best = sol
            backend = "conelp" if kkt is None else "conelp+ldl"
        if conclusiveness(sol["status"]) > 0:
            break

    if best is None:
        return SolverSolution(
            status=NUMERICAL_FAILURE,
            objective=None,
            x=None,
            primal_objective=None,
            gap=None,
            primal_residual=None,
            dual_residual=None,
            iterations=0,
            backend="conelp (raised)",
        )

    iterations = int(best.get("iterations", 0))
    status = _classify(best["status"], iterations, iter_cap)
    x = np.array(best["x"]).ravel() if best["x"] is not None else None

    objective = None
    primal_objective = None
    if status == OPTIMAL:
        dual = float(best["dual objective"])
        primal = float(best["primal objective"])
        if problem.sense == "min":
            objective = dual + problem.objective_constant
            primal_objective = primal + problem.objective_constant
        else:
            objective = -dual + problem.objective_constant
            primal_objective = -primal + problem.objective_constant

    def _float_or_none(key):
        value = best.get(key)
        return float(value) if value is not None else None

    return SolverSolution(
        status=status,
        objective=objective,
        x=x,
        primal_objective=primal_objective,
        gap=_float_or_none("gap"),
        primal_residual=_float_or_none("primal infeasibility"),
        dual_residual=_float_or_none("dual infeasibility"),
        iterations=iterations,
        backend=backend,
    )

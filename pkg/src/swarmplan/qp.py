"""Sparse convex quadratic programming by operator splitting.

Solves problems of the form

    minimize    0.5 x' P x + q' x
    subject to  lower <= A x <= upper

with P symmetric positive semidefinite. The iteration is the standard
ADMM splitting with over-relaxation: the quasi-definite KKT matrix

    [ P + sigma*I   A'          ]
    [ A            -diag(1/rho) ]

is factorized once per solve and reused every iteration. Equality rows
(lower == upper) get a stiffer penalty. An optional polish step re-solves
the active-constraint KKT system with iterative refinement, which
tightens equality constraints to near machine precision.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

# Instrumentation: number of solve() invocations in this process.
SOLVE_CALLS = 0

_EQ_TOL = 1e-9


class QpStatus(Enum):
    SOLVED = "solved"
    MAX_ITERATIONS = "max_iterations"
    PRIMAL_INFEASIBLE = "primal_infeasible"


class QpDimensionError(ValueError):
    """Vector/matrix dimensions inconsistent with the problem."""


@dataclass
class QpSettings:
    eps_abs: float = 1e-6
    eps_rel: float = 1e-6
    max_iter: int = 20000
    rho: float = 0.1
    rho_eq_scale: float = 1e3
    sigma: float = 1e-6
    alpha: float = 1.6
    check_interval: int = 25
    eps_infeasible: float = 1e-7
    polish: bool = True
    polish_delta: float = 1e-8
    refine_rounds: int = 3

    def __post_init__(self):
        if not (self.eps_abs > 0 and self.eps_rel > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


class QpProblem:
    """Problem data holder; converts inputs to CSC/float64 without validating."""

    def __init__(self, P, q, A, lower, upper):
        self.P = sparse.csc_matrix(P, dtype=float)
        self.q = np.atleast_1d(np.asarray(q, dtype=float))
        self.A = sparse.csc_matrix(A, dtype=float) if A is not None else sparse.csc_matrix(
            (0, self.P.shape[0])
        )
        self.lower = np.atleast_1d(np.asarray(lower, dtype=float)) if lower is not None else np.empty(0)
        self.upper = np.atleast_1d(np.asarray(upper, dtype=float)) if upper is not None else np.empty(0)
        self.n = self.P.shape[0]
        self.m = self.A.shape[0]

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ (self.P @ x) + self.q @ x)


@dataclass
class QpSolution:
    x: np.ndarray
    y: np.ndarray
    status: QpStatus
    primal_residual: float
    dual_residual: float
    iterations: int
    objective: float
    wall_time: float = 0.0
    polished: bool = False


@dataclass
class ValidationIssue:
    kind: str
    detail: str = ""
    row: int | None = None


def validate(problem: QpProblem) -> list[ValidationIssue]:
    """Structural checks; returns an issue list (empty = well formed)."""
    issues: list[ValidationIssue] = []
    P, q, A = problem.P, problem.q, problem.A
    lower, upper = problem.lower, problem.upper
    n, m = problem.n, problem.m

    if P.shape[0] != P.shape[1]:
        issues.append(ValidationIssue("DimensionMismatch", f"P is {P.shape}, expected square"))
        return issues
    if q.shape != (n,):
        issues.append(ValidationIssue("DimensionMismatch", f"q has shape {q.shape}, expected ({n},)"))
    if A.shape[1] != n:
        issues.append(ValidationIssue("DimensionMismatch", f"A has {A.shape[1]} columns, expected {n}"))
    if lower.shape != (m,) or upper.shape != (m,):
        issues.append(
            ValidationIssue(
                "DimensionMismatch",
                f"bounds have shapes {lower.shape}/{upper.shape}, expected ({m},)",
            )
        )
    if issues:
        return issues

    asym = abs(P - P.T)
    if asym.nnz and asym.max() > 1e-9:
        issues.append(ValidationIssue("AsymmetricP", f"max |P - P'| = {asym.max():.3e}"))
    if not np.all(np.isfinite(P.data)):
        issues.append(ValidationIssue("NonFiniteEntry", "P contains non-finite entries"))
    if not np.all(np.isfinite(q)):
        issues.append(ValidationIssue("NonFiniteEntry", "q contains non-finite entries"))
    if A.nnz and not np.all(np.isfinite(A.data)):
        issues.append(ValidationIssue("NonFiniteEntry", "A contains non-finite entries"))
    if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
        issues.append(ValidationIssue("NonFiniteEntry", "bounds contain NaN"))

    for i in np.nonzero(lower > upper)[0]:
        issues.append(
            ValidationIssue("BoundInversion", f"lower[{i}] = {lower[i]} > upper[{i}] = {upper[i]}", row=int(i))
        )

    if not any(issue.kind == "NonFiniteEntry" for issue in issues):
        if not _is_positive_semidefinite(P):
            issues.append(ValidationIssue("NotPositiveSemidefinite", "factorization of P + 1e-10*I failed"))
    return issues


def _is_positive_semidefinite(P: sparse.csc_matrix, delta: float = 1e-10) -> bool:
    n = P.shape[0]
    if n == 0:
        return True
    shifted = (0.5 * (P + P.T) + delta * sparse.eye(n)).tocsc()
    if n <= 400:
        try:
            np.linalg.cholesky(shifted.toarray())
            return True
        except np.linalg.LinAlgError:
            return False
    # Large sparse case: symmetric-mode LU without numerical pivoting; a
    # positive definite matrix yields strictly positive pivots.
    try:
        lu = spla.splu(shifted, diag_pivot_thresh=0.0, options={"SymmetricMode": True})
    except RuntimeError:
        return False
    return bool(np.all(lu.U.diagonal() > 0))


def kkt_residuals(problem: QpProblem, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Primal residual (worst bound violation of Ax) and dual residual ||Px+q+A'y||_inf."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (problem.n,):
        raise QpDimensionError(f"x has shape {x.shape}, expected ({problem.n},)")
    if y.shape != (problem.m,):
        raise QpDimensionError(f"y has shape {y.shape}, expected ({problem.m},)")
    dual = problem.P @ x + problem.q
    if problem.m:
        ax = problem.A @ x
        below = np.clip(problem.lower - ax, 0.0, None)
        above = np.clip(ax - problem.upper, 0.0, None)
        primal = float(max(below.max(initial=0.0), above.max(initial=0.0)))
        dual = dual + problem.A.T @ y
    else:
        primal = 0.0
    return primal, float(np.abs(dual).max(initial=0.0))


def _termination_scales(problem: QpProblem, x: np.ndarray, z: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    if problem.m:
        prim_scale = max(
            float(np.abs(problem.A @ x).max(initial=0.0)), float(np.abs(z).max(initial=0.0))
        )
        aty = float(np.abs(problem.A.T @ y).max(initial=0.0))
    else:
        prim_scale, aty = 0.0, 0.0
    dual_scale = max(
        aty,
        float(np.abs(problem.P @ x).max(initial=0.0)),
        float(np.abs(problem.q).max(initial=0.0)),
    )
    return prim_scale, dual_scale


def solve(
    problem: QpProblem,
    settings: QpSettings | None = None,
    x0: np.ndarray | None = None,
    y0: np.ndarray | None = None,
) -> QpSolution:
    """Run the splitting iteration until the KKT residuals meet tolerance.

    Deterministic for fixed inputs and settings. Warm starts (x0/y0) only
    change the iteration path, not the problem solved.
    """
    global SOLVE_CALLS
    SOLVE_CALLS += 1
    s = settings or QpSettings()
    t0 = time.perf_counter()

    P = (0.5 * (problem.P + problem.P.T)).tocsc()
    q, A = problem.q, problem.A.tocsc()
    lower, upper = problem.lower, problem.upper
    n, m = problem.n, problem.m

    if m == 0:
        return _solve_unconstrained(problem, P, q, s, x0, t0)

    is_eq = np.isfinite(lower) & np.isfinite(upper) & (upper - lower < _EQ_TOL)
    rho = np.full(m, s.rho)
    rho[is_eq] *= s.rho_eq_scale
    rho_inv = 1.0 / rho

    kkt = sparse.bmat(
        [[P + s.sigma * sparse.eye(n), A.T], [A, -sparse.diags(rho_inv)]], format="csc"
    )
    lu = spla.splu(kkt)

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    y = np.zeros(m) if y0 is None else np.asarray(y0, dtype=float).copy()
    z = np.clip(A @ x, lower, upper)

    status = QpStatus.MAX_ITERATIONS
    iterations = s.max_iter
    rhs = np.empty(n + m)
    for k in range(1, s.max_iter + 1):
        y_prev = y
        rhs[:n] = s.sigma * x - q
        rhs[n:] = z - rho_inv * y
        sol = lu.solve(rhs)
        x_tilde = sol[:n]
        z_tilde = z + rho_inv * (sol[n:] - y)

        x = s.alpha * x_tilde + (1.0 - s.alpha) * x
        w = s.alpha * z_tilde + (1.0 - s.alpha) * z + rho_inv * y
        z = np.clip(w, lower, upper)
        y = rho * (w - z)

        if k % s.check_interval == 0 or k == s.max_iter:
            r_prim = float(np.abs(A @ x - z).max(initial=0.0))
            r_dual = float(np.abs(P @ x + q + A.T @ y).max(initial=0.0))
            prim_scale, dual_scale = _termination_scales(problem, x, z, y)
            if (
                r_prim <= s.eps_abs + s.eps_rel * prim_scale
                and r_dual <= s.eps_abs + s.eps_rel * dual_scale
            ):
                status = QpStatus.SOLVED
                iterations = k
                break
            if _primal_infeasibility_certificate(A, lower, upper, y - y_prev, s.eps_infeasible):
                status = QpStatus.PRIMAL_INFEASIBLE
                iterations = k
                break

    polished = False
    if status is QpStatus.SOLVED and s.polish:
        x, y, polished = _polish(problem, P, A, x, y, is_eq, s)

    primal, dual = kkt_residuals(problem, x, y)
    return QpSolution(
        x=x,
        y=y,
        status=status,
        primal_residual=primal,
        dual_residual=dual,
        iterations=iterations,
        objective=float(0.5 * x @ (P @ x) + q @ x),
        wall_time=time.perf_counter() - t0,
        polished=polished,
    )


def _solve_unconstrained(problem, P, q, s, x0, t0) -> QpSolution:
    n = P.shape[0]
    lu = spla.splu((P + s.sigma * sparse.eye(n)).tocsc())
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    status = QpStatus.MAX_ITERATIONS
    iterations = s.max_iter
    for k in range(1, s.max_iter + 1):
        x = s.alpha * lu.solve(s.sigma * x - q) + (1.0 - s.alpha) * x
        if k % s.check_interval == 0 or k == s.max_iter:
            r_dual = float(np.abs(P @ x + q).max(initial=0.0))
            scale = max(float(np.abs(P @ x).max(initial=0.0)), float(np.abs(q).max(initial=0.0)))
            if r_dual <= s.eps_abs + s.eps_rel * scale:
                status = QpStatus.SOLVED
                iterations = k
                break
    polished = False
    if status is QpStatus.SOLVED and s.polish:
        x_hat = x.copy()
        lu_reg = spla.splu((P + s.polish_delta * sparse.eye(n)).tocsc())
        for _ in range(s.refine_rounds + 1):
            x_hat = x_hat + lu_reg.solve(-q - P @ x_hat)
        if np.abs(P @ x_hat + q).max(initial=0.0) <= np.abs(P @ x + q).max(initial=0.0):
            x, polished = x_hat, True
    primal, dual = kkt_residuals(problem, x, np.empty(0))
    return QpSolution(
        x=x,
        y=np.empty(0),
        status=status,
        primal_residual=primal,
        dual_residual=dual,
        iterations=iterations,
        objective=float(0.5 * x @ (P @ x) + q @ x),
        wall_time=time.perf_counter() - t0,
        polished=polished,
    )


def _primal_infeasibility_certificate(A, lower, upper, dy, eps: float) -> bool:
    """OSQP-style certificate: a diverging dual direction proving Ax in [l, u] is empty."""
    norm_dy = float(np.abs(dy).max(initial=0.0))
    if norm_dy <= eps:
        return False
    v = dy / norm_dy
    v[np.abs(v) <= eps] = 0.0  # numerical dust would couple to infinite bounds
    pos, neg = v > 0, v < 0
    # A positive component paired with an infinite upper bound (or negative
    # with -inf lower) makes the certificate value +inf: not a certificate.
    if np.any(pos & ~np.isfinite(upper)) or np.any(neg & ~np.isfinite(lower)):
        return False
    support = float(upper[pos] @ v[pos] + lower[neg] @ v[neg])
    if support >= -eps:
        return False
    return float(np.abs(A.T @ v).max(initial=0.0)) < eps


def _polish(problem, P, A, x, y, is_eq, s) -> tuple[np.ndarray, np.ndarray, bool]:
    """Re-solve on the guessed active set with iterative refinement."""
    lower, upper = problem.lower, problem.upper
    act_low = (y < 0) & np.isfinite(lower) & ~is_eq
    act_up = (y > 0) & np.isfinite(upper) & ~is_eq
    active = act_low | act_up | is_eq
    if not np.any(active):
        return x, y, False
    b = np.where(act_up, upper, lower)[active]
    A_act = A[active]
    n, ka = problem.n, A_act.shape[0]

    kkt = sparse.bmat(
        [
            [P + s.polish_delta * sparse.eye(n), A_act.T],
            [A_act, -s.polish_delta * sparse.eye(ka)],
        ],
        format="csc",
    )
    try:
        lu = spla.splu(kkt)
    except RuntimeError:
        return x, y, False
    rhs = np.concatenate([-problem.q, b])
    sol = lu.solve(rhs)
    for _ in range(s.refine_rounds):
        resid = rhs - np.concatenate(
            [P @ sol[:n] + A_act.T @ sol[n:], A_act @ sol[:n]]
        )
        sol = sol + lu.solve(resid)
    x_hat = sol[:n]
    y_hat = np.zeros(problem.m)
    y_hat[active] = sol[n:]
    if not (np.all(np.isfinite(x_hat)) and np.all(np.isfinite(y_hat))):
        return x, y, False
    p_old, d_old = kkt_residuals(problem, x, y)
    p_new, d_new = kkt_residuals(problem, x_hat, y_hat)
    if max(p_new, d_new) <= max(p_old, d_old):
        return x_hat, y_hat, True
    return x, y, False

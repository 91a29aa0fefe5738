"""Dense two-phase simplex method with Bland's anti-cycling rule.

Solves ``min c @ x`` subject to ``A_ub @ x <= b_ub``, ``A_eq @ x == b_eq`` and
``x >= 0``. Meant for the small linear programs of the deficiency
computation; the tableau is dense.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qlan import tolerances

__all__ = ["LPResult", "InfeasibleError", "UnboundedError", "linprog"]

PIVOT_TOL = 1e-9      # smallest admissible pivot element
DROP_TOL = 1e-12      # tableau entries below this are roundoff
HARRIS_TOL = 1e-9     # primal feasibility slack of the ratio test


class InfeasibleError(ArithmeticError):
    pass


class UnboundedError(ArithmeticError):
    pass


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    fun: float
    iterations: int


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]
    # degenerate problems leave roundoff where exact zeros belong; a slightly
    # negative right-hand side would give negative ratios and an infeasible basis
    T[np.abs(T) < DROP_TOL] = 0.0
    T[:-1, -1] = np.maximum(T[:-1, -1], 0.0)


def _run(T: np.ndarray, basis: list[int], allowed: np.ndarray, tol: float, max_iter: int) -> int:
    """Optimize the tableau in place; the objective row is the last row.

    Entering column: lowest index with reduced cost below ``-tol`` (Bland).
    Leaving row: Harris ratio test; exact ties go to the lowest basic index.
    """
    m = T.shape[0] - 1
    it = 0
    while True:
        costs = T[-1, :-1]
        candidates = np.flatnonzero((costs < -tol) & allowed)
        if candidates.size == 0:
            return it
        col = int(candidates[0])
        column = T[:m, col]
        rows = np.flatnonzero(column > PIVOT_TOL)
        if rows.size == 0:
            raise UnboundedError("linear program is unbounded")
        # Harris two-pass ratio test: bound the step with a small feasibility
        # slack, then take the largest pivot element among the rows within it
        bound = ((T[rows, -1] + HARRIS_TOL) / column[rows]).min()
        ties = rows[T[rows, -1] / column[rows] <= bound]
        top = column[ties].max()
        ties = ties[column[ties] >= top * (1 - 1e-12)]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
        it += 1
        if it > max_iter:
            raise ArithmeticError("simplex iteration limit reached")


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, max_iter: int = 100_000) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    if A_ub.shape != (b_ub.size, n) or A_eq.shape != (b_eq.size, n):
        raise ValueError("constraint shapes do not match the objective")
    tol = tolerances.get().lp_reduced_cost
    m_ub, m_eq = b_ub.size, b_eq.size
    m = m_ub + m_eq
    # columns: x (n) | slacks (m_ub) | artificials (m) | rhs
    n_slack = m_ub
    n_tot = n + n_slack + m
    T = np.zeros((m + 1, n_tot + 1))
    T[:m_ub, :n] = A_ub
    T[:m_ub, n : n + m_ub] = np.eye(m_ub)
    T[:m_ub, -1] = b_ub
    T[m_ub:m, :n] = A_eq
    T[m_ub:m, -1] = b_eq
    neg = T[:m, -1] < 0
    T[:m][neg] *= -1.0
    T[:m, n + n_slack : n + n_slack + m] = np.eye(m)
    basis = list(range(n + n_slack, n_tot))

    # phase 1: minimize the sum of artificials
    T[-1, :] = 0.0
    T[-1, n + n_slack : n_tot] = 1.0
    for r in range(m):
        T[-1] -= T[r]
    allowed = np.ones(n_tot, dtype=bool)
    iters = _run(T, basis, allowed, tol, max_iter)
    if -T[-1, -1] > 1e-9 * max(1.0, np.abs(T[:m, -1]).max(initial=0.0)):
        raise InfeasibleError(f"linear program is infeasible (phase-1 value {-T[-1, -1]:.3e})")

    # drive remaining artificials out of the basis; drop redundant rows
    keep = []
    for r in range(m):
        if basis[r] >= n + n_slack:
            entries = np.abs(T[r, : n + n_slack])
            j = int(entries.argmax())
            if entries[j] > PIVOT_TOL:
                _pivot(T, r, j)
                basis[r] = j
                keep.append(r)
        else:
            keep.append(r)
    T = np.vstack([T[keep], T[-1:]])
    basis = [basis[r] for r in keep]

    # phase 2
    allowed = np.zeros(n_tot, dtype=bool)
    allowed[: n + n_slack] = True
    T[:, n + n_slack : n_tot] = 0.0
    T[-1, :] = 0.0
    T[-1, :n] = c
    for r, b in enumerate(basis):
        if T[-1, b] != 0.0:
            T[-1] -= T[-1, b] * T[r]
    iters += _run(T, basis, allowed, tol, max_iter)

    x = np.zeros(n_tot)
    for r, b in enumerate(basis):
        x[b] = T[r, -1]
    x = x[:n]
    return LPResult(x=x, fun=float(c @ x), iterations=iters)

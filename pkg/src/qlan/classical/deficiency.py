"""Le Cam deficiency between finite experiments as a linear program."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qlan.classical.experiments import ClassicalExperiment
from qlan.classical.simplex import InfeasibleError, linprog

__all__ = ["DeficiencyResult", "deficiency_lp", "le_cam_distance", "MAX_KERNEL_ENTRIES"]

MAX_KERNEL_ENTRIES = 10_000


@dataclass(frozen=True)
class DeficiencyResult:
    delta: float
    kernel: np.ndarray  # |Omega1| x |Omega2| row-stochastic

    def __iter__(self):
        yield self.delta
        yield self.kernel


def _table(E) -> tuple[np.ndarray, tuple]:
    if isinstance(E, ClassicalExperiment):
        return E.probs, E.params
    P = np.asarray(E, dtype=float)
    return P, tuple(range(P.shape[0]))


def deficiency_lp(E1, E2) -> DeficiencyResult:
    """``delta(E1, E2) = min_M max_theta 1/2 || P1_theta M - P2_theta ||_1``.

    ``M`` ranges over row-stochastic ``|Omega1| x |Omega2|`` matrices. The
    problem is solved exactly as an LP in ``(M, s, t)`` where ``s`` bounds the
    absolute deviations per parameter and outcome and ``t`` bounds each
    parameter's total variation.

    Raises:
        ValueError: parameter sets differ or the kernel would exceed
            ``MAX_KERNEL_ENTRIES`` entries.
        InfeasibleError: never for valid inputs; signals a solver fault.
    """
    P1, params1 = _table(E1)
    P2, params2 = _table(E2)
    if P1.shape[0] != P2.shape[0] or params1 != params2:
        raise ValueError("deficiency needs experiments over the same parameter set")
    p, k1 = P1.shape
    k2 = P2.shape[1]
    if k1 * k2 > MAX_KERNEL_ENTRIES:
        raise ValueError(f"kernel size {k1}x{k2} exceeds the limit of {MAX_KERNEL_ENTRIES} entries")

    nM, nS = k1 * k2, p * k2
    nv = nM + nS + 1
    c = np.zeros(nv)
    c[-1] = 1.0

    A_eq = np.zeros((k1, nv))
    for i in range(k1):
        A_eq[i, i * k2 : (i + 1) * k2] = 1.0
    b_eq = np.ones(k1)

    rows, rhs = [], []
    for th in range(p):
        for j in range(k2):
            a = np.zeros(nv)
            a[j:nM:k2] = P1[th]              # (P1_theta M)_j
            a[nM + th * k2 + j] = -1.0
            rows.append(a)
            rhs.append(P2[th, j])
            b = -a
            b[nM + th * k2 + j] = -1.0
            rows.append(b)
            rhs.append(-P2[th, j])
        a = np.zeros(nv)
        a[nM + th * k2 : nM + (th + 1) * k2] = 0.5
        a[-1] = -1.0
        rows.append(a)
        rhs.append(0.0)

    try:
        res = linprog(c, np.array(rows), np.array(rhs), A_eq, b_eq)
    except InfeasibleError as exc:  # pragma: no cover - the feasible set is never empty
        raise InfeasibleError(f"deficiency LP infeasible, solver fault: {exc}") from exc
    M = res.x[:nM].reshape(k1, k2)
    M = np.clip(M, 0.0, None)
    M /= M.sum(axis=1, keepdims=True)
    # report the objective of the returned kernel itself
    delta = float(np.max(0.5 * np.abs(P1 @ M - P2).sum(axis=1)))
    return DeficiencyResult(delta, M)


def le_cam_distance(E1, E2) -> float:
    return max(deficiency_lp(E1, E2).delta, deficiency_lp(E2, E1).delta)

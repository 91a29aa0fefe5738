"""Smooth parametric families on a finite sample space and their local experiments."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from qlan.classical.experiments import (
    ClassicalExperiment,
    ProductExperiment,
    gaussian_shift_hellinger,
)

__all__ = ["LocalClassicalFamily", "softmax_family"]


@dataclass(frozen=True)
class LocalClassicalFamily:
    """``theta -> p(theta)`` around ``theta0`` with local parameter ``u = sqrt(n)(theta - theta0)``.

    ``fisher`` may be given analytically; otherwise it is computed from central
    differences of ``log p``.
    """

    prob: Callable[[np.ndarray], np.ndarray]
    theta0: np.ndarray
    fisher_matrix: np.ndarray | None = None
    step: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "theta0", np.atleast_1d(np.asarray(self.theta0, dtype=float)))

    @property
    def m(self) -> int:
        return self.theta0.size

    def fisher(self) -> np.ndarray:
        if self.fisher_matrix is not None:
            return np.atleast_2d(np.asarray(self.fisher_matrix, dtype=float))
        p0 = np.asarray(self.prob(self.theta0), dtype=float)
        scores = []
        for k in range(self.m):
            e = np.zeros(self.m)
            e[k] = self.step
            dp = (np.asarray(self.prob(self.theta0 + e)) - np.asarray(self.prob(self.theta0 - e)))
            scores.append(dp / (2 * self.step) / p0)
        S = np.array(scores)
        return (S * p0) @ S.T

    def local_experiment(self, shifts: Sequence, n: int) -> ProductExperiment:
        """``(P_{theta0 + u_i / sqrt(n)}^{(x) n})_i`` without building ``Omega**n``."""
        shifts = np.atleast_2d(np.asarray(shifts, dtype=float))
        rows = [self.prob(self.theta0 + u / np.sqrt(n)) for u in shifts]
        return ProductExperiment(ClassicalExperiment(np.array(rows), params=tuple(range(len(rows)))), n)

    def limit_hellinger(self, shifts: Sequence, z) -> float:
        return gaussian_shift_hellinger(np.atleast_2d(shifts), self.fisher(), z)


def softmax_family(logits0: Sequence[float], directions) -> LocalClassicalFamily:
    """Exponential family ``p(theta) = softmax(logits0 + directions.T @ theta)``.

    ``directions`` is ``m x |Omega|``. The Fisher matrix is attached in closed
    form ``B (diag p - p p') B'``.
    """
    a = np.asarray(logits0, dtype=float)
    B = np.atleast_2d(np.asarray(directions, dtype=float))

    def prob(theta):
        x = a + np.asarray(theta) @ B
        x = x - x.max()
        w = np.exp(x)
        return w / w.sum()

    p0 = prob(np.zeros(B.shape[0]))
    fisher = B @ (np.diag(p0) - np.outer(p0, p0)) @ B.T
    return LocalClassicalFamily(prob, np.zeros(B.shape[0]), fisher_matrix=fisher)

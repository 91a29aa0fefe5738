"""Weak convergence of classical experiments via Hellinger transforms."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from qlan.classical.experiments import hellinger_transform, simplex_point

__all__ = ["ConvergenceTable", "fit_loglog_slope", "weak_convergence_report"]

GAP_FLOOR = 1e-13


def fit_loglog_slope(ns: Sequence[float], gaps: Sequence[float], floor: float = GAP_FLOOR):
    """Least-squares slope of ``log gap`` against ``log n``.

    Only points with ``gap > floor`` are used, restricted to the longest run of
    consecutive such points (the floating-point floor dominates below it).
    Returns ``nan`` when fewer than two points qualify.
    """
    ns = np.asarray(ns, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    ok = gaps > floor
    best: tuple[int, int] = (0, 0)
    start = None
    for i, flag in enumerate(list(ok) + [False]):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    lo, hi = best
    if hi - lo < 2:
        return float("nan")
    x, y = np.log(ns[lo:hi]), np.log(gaps[lo:hi])
    return float(np.polyfit(x, y, 1)[0])


@dataclass(frozen=True)
class ConvergenceTable:
    ns: tuple
    z_grid: tuple
    eta_n: np.ndarray      # (len(ns), len(z_grid))
    eta_limit: np.ndarray  # (len(z_grid),)

    @property
    def gaps(self) -> np.ndarray:
        return np.abs(self.eta_n - self.eta_limit[None, :])

    def slopes(self) -> list[float]:
        return [fit_loglog_slope(self.ns, self.gaps[:, j]) for j in range(len(self.z_grid))]

    def monotone(self, j: int = 0, burn_in: float = 0) -> bool:
        ns = np.asarray(self.ns)
        g = self.gaps[ns >= burn_in, j]
        return bool(np.all(np.diff(g) < 0))

    def rows(self) -> list[list]:
        out = []
        for i, n in enumerate(self.ns):
            for j, z in enumerate(self.z_grid):
                out.append([n, j, *z, self.eta_n[i, j], self.eta_limit[j], self.gaps[i, j]])
        return out

    def header(self) -> list[str]:
        k = len(self.z_grid[0]) if self.z_grid else 0
        return ["n", "z_index", *[f"z{i}" for i in range(k)], "eta_n", "eta_limit", "gap"]


def weak_convergence_report(
    experiments: Callable[[int], object],
    limit_eta: Callable[[np.ndarray], float],
    z_grid: Sequence,
    ns: Sequence[int],
    workers: int = 1,
) -> ConvergenceTable:
    """Tabulate ``|eta_n(z) - eta_limit(z)|`` over a schedule of ``n`` and a grid of ``z``.

    Args:
        experiments: ``n -> experiment``; anything accepted by
            :func:`hellinger_transform` (use ``ProductExperiment`` for i.i.d.
            samples so that ``Omega**n`` is never built).
        limit_eta: Hellinger transform of the limit experiment.
        z_grid: simplex points.
        ns: increasing schedule.
        workers: thread count for the grid; results do not depend on it.
    """
    ns = tuple(int(n) for n in ns)
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("schedule must be strictly increasing")
    grid = tuple(tuple(simplex_point(z).tolist()) for z in z_grid)

    def row(n):
        E = experiments(n)
        return [hellinger_transform(E, z) for z in grid]

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            eta_n = list(pool.map(row, ns))
    else:
        eta_n = [row(n) for n in ns]
    limit = np.array([limit_eta(np.array(z)) for z in grid])
    return ConvergenceTable(ns, grid, np.array(eta_n, dtype=float), limit)

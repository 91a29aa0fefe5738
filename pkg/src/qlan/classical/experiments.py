"""Finite classical experiments, canonical measures and Hellinger transforms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from qlan import tolerances

__all__ = [
    "ClassicalExperiment",
    "ProductExperiment",
    "CanonicalMeasure",
    "canonical_measure",
    "simplex_point",
    "hellinger_transform",
    "hellinger_distance",
    "binomial_experiment",
    "binomial_hellinger",
    "poisson_experiment",
    "poisson_limit_hellinger",
    "gaussian_shift_hellinger",
    "gaussian_shift_characteristic",
    "classical_characteristic",
]


def simplex_point(z: Sequence[float]) -> np.ndarray:
    """Validate a point of the probability simplex."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size == 0:
        raise ValueError("simplex point must be a non-empty vector")
    if np.any(z < 0) or abs(z.sum() - 1.0) > tolerances.get().probability:
        raise ValueError(f"not a point of the simplex: {z.tolist()}")
    return z


@dataclass(frozen=True, eq=False)
class ClassicalExperiment:
    """Probability table ``probs[theta, omega]`` over a finite sample space.

    With ``strict=True`` (the default) the rows must be mutually absolutely
    continuous: on every outcome either all rows are positive or all vanish.
    Outcomes on which every row vanishes are dropped.
    """

    probs: np.ndarray
    params: tuple = ()
    strict: bool = True
    log_probs: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        P = np.array(self.probs, dtype=float)
        if P.ndim != 2 or P.shape[0] == 0 or P.shape[1] == 0:
            raise ValueError(f"probability table must be 2-D and non-empty, got {P.shape}")
        if not np.all(np.isfinite(P)) or np.any(P < 0):
            raise ValueError("probabilities must be finite and non-negative")
        tol = tolerances.get().probability
        sums = P.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > tol):
            raise ValueError(f"rows must sum to 1, got {sums.tolist()}")
        params = tuple(self.params) if self.params else tuple(range(P.shape[0]))
        if len(params) != P.shape[0] or len(set(params)) != len(params):
            raise ValueError("params must be distinct labels, one per row")
        if self.log_probs is not None:
            L = np.array(self.log_probs, dtype=float)
            if L.shape != P.shape:
                raise ValueError("log_probs shape mismatch")
        else:
            with np.errstate(divide="ignore"):
                L = np.log(P)
        keep = np.any(P > 0, axis=0) | np.any(np.isfinite(L), axis=0)
        P, L = P[:, keep], L[:, keep]
        if P.shape[1] == 0:
            raise ValueError("experiment has empty support")
        if self.strict:
            positive = np.isfinite(L)
            if not np.all(positive.all(axis=0) | ~positive.any(axis=0)):
                raise ValueError(
                    "rows are not mutually absolutely continuous; "
                    "pass strict=False to allow disjoint supports"
                )
        P.setflags(write=False)
        L.setflags(write=False)
        object.__setattr__(self, "probs", P)
        object.__setattr__(self, "log_probs", L)
        object.__setattr__(self, "params", params)

    @classmethod
    def from_log_probs(cls, log_probs, params=(), strict=True) -> "ClassicalExperiment":
        """Build from log-probabilities; keeps tails that underflow in ``exp``."""
        L = np.asarray(log_probs, dtype=float)
        return cls(np.exp(L), params=params, strict=strict, log_probs=L)

    @property
    def n_params(self) -> int:
        return self.probs.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.probs.shape[1]

    def hellinger(self, z) -> float:
        z = simplex_point(z)
        if z.size != self.n_params:
            raise ValueError("simplex point dimension does not match the parameter set")
        active = z > 0
        with np.errstate(invalid="ignore"):
            terms = z[active] @ self.log_probs[active]
        terms = terms[np.isfinite(terms)]
        if terms.size == 0:
            return 0.0
        top = terms.max()
        return float(math.exp(top) * np.exp(terms - top).sum())

    def log_hellinger(self, z) -> float:
        value = self.hellinger(z)
        return math.log(value) if value > 0 else -math.inf

    def product(self, other: "ClassicalExperiment") -> "ClassicalExperiment":
        """Independent product; outcomes indexed row-major ``(omega1, omega2)``."""
        if self.params != other.params:
            raise ValueError("product experiments need identical parameter sets")
        L = (self.log_probs[:, :, None] + other.log_probs[:, None, :]).reshape(self.n_params, -1)
        return ClassicalExperiment.from_log_probs(L, params=self.params, strict=self.strict)

    def power(self, n: int) -> "ProductExperiment":
        return ProductExperiment(self, n)

    def to_csv_rows(self) -> list[list]:
        return [[label, *row] for label, row in zip(self.params, self.probs.tolist())]


@dataclass(frozen=True)
class ProductExperiment:
    """``n`` independent copies of ``factor``; never materializes ``Omega**n``."""

    factor: ClassicalExperiment
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")

    @property
    def params(self) -> tuple:
        return self.factor.params

    @property
    def n_params(self) -> int:
        return self.factor.n_params

    def log_hellinger(self, z) -> float:
        return self.n * self.factor.log_hellinger(z)

    def hellinger(self, z) -> float:
        return math.exp(self.log_hellinger(z))


@dataclass(frozen=True)
class CanonicalMeasure:
    """Atoms ``v`` on the simplex with masses; total mass equals ``|Theta|``."""

    points: np.ndarray   # (n_atoms, |Theta|)
    masses: np.ndarray   # (n_atoms,)

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def hellinger(self, z) -> float:
        z = simplex_point(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = np.where(z > 0, z * np.log(self.points), 0.0)
        return float(self.masses @ np.exp(logs.sum(axis=1)))

    def law(self, index: int) -> np.ndarray:
        """Masses of the canonical experiment ``Q^theta(dv) = v_theta sigma(dv)``."""
        return self.points[:, index] * self.masses

    def allclose(self, other: "CanonicalMeasure", atol: float = 1e-12) -> bool:
        return (
            self.points.shape == other.points.shape
            and np.allclose(self.points, other.points, atol=atol, rtol=0)
            and np.allclose(self.masses, other.masses, atol=atol, rtol=0)
        )


def _table(E) -> np.ndarray:
    if isinstance(E, ClassicalExperiment):
        return E.probs
    P = np.asarray(E, dtype=float)
    if P.ndim != 2:
        raise ValueError("expected a probability table")
    return P


def canonical_measure(E) -> CanonicalMeasure:
    """Law of the likelihood-ratio vector ``dP_theta / d mu`` under ``mu = sum_theta P_theta``.

    Atoms whose points agree to ``tolerances.atom_merge`` are merged; atoms are
    returned in lexicographic order of their points.
    """
    P = _table(E)
    mu = P.sum(axis=0)
    support = mu > 0
    if not support.any():
        raise ValueError("experiment has empty support")
    V = (P[:, support] / mu[support]).T
    masses = mu[support]
    tol = tolerances.get().atom_merge
    order = np.lexsort(V.T[::-1])
    V, masses = V[order], masses[order]
    points: list[np.ndarray] = []
    merged: list[float] = []
    for v, m in zip(V, masses):
        for k, p in enumerate(points):
            if np.max(np.abs(p - v)) <= tol:
                merged[k] += m
                break
        else:
            points.append(v)
            merged.append(float(m))
    return CanonicalMeasure(np.array(points), np.array(merged))


def hellinger_transform(E, z) -> float:
    """``eta_E(z) = sum_omega prod_theta P_theta(omega) ** z_theta``.

    Accepts a :class:`ClassicalExperiment`, :class:`ProductExperiment` or
    :class:`CanonicalMeasure`.
    """
    if hasattr(E, "hellinger"):
        return E.hellinger(z)
    return ClassicalExperiment(E, strict=False).hellinger(z)


def hellinger_distance(p1, p2) -> float:
    """``h = sum (sqrt p1 - sqrt p2)**2 = 2 (1 - affinity)``; any supports."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if p1.shape != p2.shape or p1.ndim != 1:
        raise ValueError("hellinger_distance takes two rows of equal length")
    tol = tolerances.get().probability
    for p in (p1, p2):
        if np.any(p < 0) or abs(p.sum() - 1) > tol:
            raise ValueError("rows must be probability vectors")
    return float(np.sum((np.sqrt(p1) - np.sqrt(p2)) ** 2))


def _log_binom_pmf(n: int, p: float) -> np.ndarray:
    k = np.arange(n + 1)
    logc = np.array([math.lgamma(n + 1) - math.lgamma(j + 1) - math.lgamma(n - j + 1) for j in k])
    L = logc + k * math.log(p) + (n - k) * math.log1p(-p)
    # lgamma rounding grows with n; the exact pmf sums to one
    top = L.max()
    return L - (top + math.log(np.exp(L - top).sum()))


def binomial_experiment(n: int, thetas: Sequence[float]) -> ClassicalExperiment:
    """Rows ``Binomial(n, theta_i / n)`` on ``{0, ..., n}``."""
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    thetas = [float(t) for t in thetas]
    for t in thetas:
        if not 0 < t < n:
            raise ValueError(f"need 0 < theta < n, got theta={t}, n={n}")
    L = np.array([_log_binom_pmf(int(n), t / n) for t in thetas])
    return ClassicalExperiment.from_log_probs(L, params=tuple(thetas))


def binomial_hellinger(n: int, thetas: Sequence[float], z) -> float:
    """Closed form ``(prod (theta_i/n)**z_i + prod (1 - theta_i/n)**z_i) ** n``."""
    z = simplex_point(z)
    p = np.asarray(thetas, dtype=float) / n
    base = math.exp(z @ np.log(p)) + math.exp(z @ np.log1p(-p))
    return base**n


def poisson_experiment(thetas: Sequence[float], tail: float = 1e-15):
    """Poisson rows truncated at the smallest ``K`` with tail mass below ``tail``.

    Returns ``(experiment, K)``; rows are renormalized after truncation.
    """
    thetas = [float(t) for t in thetas]
    if any(t <= 0 for t in thetas):
        raise ValueError("Poisson means must be positive")
    K = 0
    while True:
        k = np.arange(K + 1)
        logs = np.array([[-t + j * math.log(t) - math.lgamma(j + 1) for j in k] for t in thetas])
        mass = np.exp(logs).sum(axis=1)
        if np.all(1.0 - mass < tail):
            break
        K += 1
    logs -= np.log(np.exp(logs).sum(axis=1, keepdims=True))
    return ClassicalExperiment.from_log_probs(logs, params=tuple(thetas)), K


def poisson_limit_hellinger(thetas: Sequence[float], z) -> float:
    """Hellinger transform of the Poisson experiment: ``exp(prod theta**z - sum theta z)``."""
    z = simplex_point(z)
    th = np.asarray(thetas, dtype=float)
    if np.any(th <= 0):
        raise ValueError("Poisson means must be positive")
    return math.exp(math.exp(z @ np.log(th)) - th @ z)


def gaussian_shift_hellinger(shifts, fisher, z) -> float:
    """Hellinger transform of ``(N(u_i, I^{-1}))_i`` with Fisher matrix ``I``.

    ``eta(z) = exp(-1/2 [sum z_i u_i' I u_i - ubar' I ubar])``, ``ubar = sum z_i u_i``.
    """
    z = simplex_point(z)
    U = np.atleast_2d(np.asarray(shifts, dtype=float))
    if U.shape[0] != z.size:
        U = U.T if U.shape[1] == z.size else U
    I = np.atleast_2d(np.asarray(fisher, dtype=float))
    if U.shape != (z.size, I.shape[0]):
        raise ValueError("shifts must be one m-vector per simplex coordinate")
    if not np.allclose(I, I.T, atol=1e-12):
        raise ValueError("Fisher matrix must be symmetric")
    eig = np.linalg.eigvalsh(I)
    if eig.min() <= 1e-14 * max(1.0, eig.max()):
        raise np.linalg.LinAlgError("singular Fisher matrix")
    ubar = z @ U
    quad = np.einsum("i,ij,jk,ik->", z, U, I, U) - ubar @ I @ ubar
    return math.exp(-0.5 * quad)


def gaussian_shift_characteristic(fisher, letters, base_shift=None) -> complex:
    """``E_h[prod_j (dP_{u_j} / dP_0) ** (i t_j s_j)]`` for the shift ``N(u, I^{-1})``.

    ``letters`` holds ``(u, t, inverse)``; an inverse letter has ``s_j = -1``.
    With ``X ~ N(I h, I)`` under ``P_h`` the log-likelihood ratio is
    ``u' X - u' I u / 2``, so the value is
    ``exp(i v' I h - v' I v / 2 - (i/2) sum t_j s_j u_j' I u_j)`` with
    ``v = sum t_j s_j u_j`` and ``h = base_shift`` (zero by default).
    """
    I = np.atleast_2d(np.asarray(fisher, dtype=float))
    m = I.shape[0]
    h = np.zeros(m) if base_shift is None else np.asarray(base_shift, dtype=float)
    v = np.zeros(m)
    drift = 0.0
    for u, t, inverse in letters:
        u = np.asarray(u, dtype=float)
        ts = -t if inverse else t
        v += ts * u
        drift += ts * (u @ I @ u)
    return complex(np.exp(1j * (v @ I @ h) - 0.5 * (v @ I @ v) - 0.5j * drift))


def classical_characteristic(E: ClassicalExperiment, letters, base=0) -> complex:
    """``sum_omega P_base(omega) prod_j (P_theta_j / P_base)(omega) ** (i t_j s_j)``.

    ``letters`` is a sequence of ``(theta_label, t, inverse)``; an inverse letter
    contributes exponent ``-i t``. This is the commutative canonical state.
    """
    idx = {label: k for k, label in enumerate(E.params)}
    b = idx[base] if base in idx else int(base)
    L = E.log_probs
    phase = np.zeros(E.n_outcomes)
    for theta, t, inverse in letters:
        k = idx[theta]
        phase += (-1.0 if inverse else 1.0) * t * (L[k] - L[b])
    return complex(np.sum(E.probs[b] * np.exp(1j * phase)))

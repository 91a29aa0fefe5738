"""Smooth families of density matrices ``theta -> rho_theta`` around a base point.

Built-in families carry analytic first and second derivatives at ``theta0``.
Families given only as callables fall back to central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np

from qlan import tolerances
from qlan.hermlin import as_density, commutator, dagger, eig_hermitian, is_hermitian, to_mp

__all__ = [
    "SX",
    "SY",
    "SZ",
    "QuantumFamily",
    "polynomial_family",
    "qubit_family",
    "diagonal_family",
    "rotation_family",
    "callable_family",
]

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)

SECOND_STEP = 1e-4


@dataclass(frozen=True, eq=False)
class QuantumFamily:
    """A family ``rho(theta)`` with optional analytic derivatives at ``theta0``.

    Attributes:
        rho_fn: maps an ``m``-vector to a ``d x d`` density matrix.
        theta0: base point.
        first: ``m`` matrices ``d rho / d theta_k`` at ``theta0``, or None.
        second: ``m x m x d x d`` array of mixed second derivatives, or None.
        generators: optional ``H_k`` with ``d P_j = i [H_k, P_j]``; when None
            the minimum-norm solution is used.
        name: label used in reports.
        rho_mp_fn: optional evaluator taking a list of mpmath reals and
            returning an mpmath matrix; used for very large ``n``.
    """

    rho_fn: Callable[[np.ndarray], np.ndarray]
    theta0: np.ndarray
    first: tuple[np.ndarray, ...] | None = None
    second: np.ndarray | None = None
    generators: tuple[np.ndarray, ...] | None = None
    name: str = "user"
    meta: dict = field(default_factory=dict)
    rho_mp_fn: Callable | None = None

    def __post_init__(self):
        object.__setattr__(self, "theta0", np.atleast_1d(np.asarray(self.theta0, dtype=float)))

    @property
    def m(self) -> int:
        return self.theta0.size

    @property
    def dim(self) -> int:
        return self.rho(self.theta0).shape[0]

    def rho(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != self.theta0.shape:
            raise ValueError(f"parameter has shape {theta.shape}, expected {self.theta0.shape}")
        return np.asarray(self.rho_fn(theta), dtype=complex)

    def rho_mp(self, theta) -> mpmath.matrix:
        """``rho(theta)`` in the current mpmath precision.

        ``theta`` is a sequence of mpmath numbers. Families without an
        extended-precision evaluator are rounded through float64.
        """
        if self.rho_mp_fn is not None:
            return self.rho_mp_fn([mpmath.mpmathify(x if isinstance(x, mpmath.ctx_mp_python.mpnumeric) else float(x)) for x in theta])
        return to_mp(self.rho(np.array([float(x) for x in theta])))

    def state(self, theta):
        return as_density(self.rho(theta))

    def derivatives(self) -> tuple[list[np.ndarray], np.ndarray]:
        """First and second derivatives at ``theta0``, analytic when available."""
        d1 = list(self.first) if self.first is not None else self._fd_first()
        d2 = self.second if self.second is not None else self._fd_second()
        return d1, d2

    def _unit(self, k: int, h: float) -> np.ndarray:
        e = np.zeros(self.m)
        e[k] = h
        return e

    def _fd_first(self) -> list[np.ndarray]:
        h = tolerances.get().fd_step
        t0 = self.theta0
        return [(self.rho(t0 + self._unit(k, h)) - self.rho(t0 - self._unit(k, h))) / (2 * h) for k in range(self.m)]

    def _fd_second(self) -> np.ndarray:
        # second differences need a wider step than first ones
        h = SECOND_STEP
        t0, m, d = self.theta0, self.m, self.dim
        out = np.zeros((m, m, d, d), dtype=complex)
        for k in range(m):
            for l in range(k, m):
                ek, el = self._unit(k, h), self._unit(l, h)
                val = (
                    self.rho(t0 + ek + el) - self.rho(t0 + ek - el)
                    - self.rho(t0 - ek + el) + self.rho(t0 - ek - el)
                ) / (4 * h * h)
                out[k, l] = out[l, k] = val
        return out


def _herm_list(mats, d: int, what: str) -> tuple[np.ndarray, ...]:
    out = []
    for M in mats:
        M = np.asarray(M, dtype=complex)
        if M.shape != (d, d):
            raise ValueError(f"{what} has shape {M.shape}, expected {(d, d)}")
        if not is_hermitian(M):
            raise ValueError(f"{what} must be Hermitian")
        out.append(M)
    return tuple(out)


def polynomial_family(rho0, first: Sequence, second=None, name: str = "user") -> QuantumFamily:
    """``rho(theta) = rho0 + sum theta_k D_k + 1/2 sum theta_k theta_l Q_kl``.

    The ``D_k`` and ``Q_kl`` must be traceless Hermitian; ``Q`` is symmetrized.
    """
    R0 = as_density(rho0).matrix
    d = R0.shape[0]
    D = _herm_list(first, d, "first-order term")
    m = len(D)
    if m == 0:
        raise ValueError("a family needs at least one parameter")
    Q = np.zeros((m, m, d, d), dtype=complex)
    if second is not None:
        Q = np.asarray(second, dtype=complex)
        if Q.shape != (m, m, d, d):
            raise ValueError(f"second-order table has shape {Q.shape}, expected {(m, m, d, d)}")
        Q = 0.5 * (Q + Q.transpose(1, 0, 2, 3))
    tol = tolerances.get().trace
    for M in D + tuple(Q.reshape(-1, d, d)):
        if abs(np.trace(M)) > tol:
            raise ValueError("derivative terms must be traceless")
    Dstack = np.array(D)

    def fn(theta):
        return R0 + np.einsum("k,kij->ij", theta, Dstack) + 0.5 * np.einsum("k,l,klij->ij", theta, theta, Q)

    R0_mp, D_mp = to_mp(R0), [to_mp(M) for M in D]
    Q_mp = [[to_mp(Q[k, l]) for l in range(m)] for k in range(m)]

    def fn_mp(theta):
        out = R0_mp.copy()
        for k in range(m):
            out += theta[k] * D_mp[k]
            for l in range(m):
                out += (theta[k] * theta[l] / 2) * Q_mp[k][l]
        return out

    return QuantumFamily(fn, np.zeros(m), D, Q, name=name, rho_mp_fn=fn_mp)


def qubit_family(r: float) -> QuantumFamily:
    """``rho(rx, ry, a) = (1 + rx sx + ry sy + (r + a) sz) / 2``."""
    if not 0 < r < 1:
        raise ValueError(f"need 0 < r < 1, got {r}")
    fam = polynomial_family(
        (np.eye(2) + r * SZ) / 2, [SX / 2, SY / 2, SZ / 2], name="qubit"
    )
    return QuantumFamily(
        fam.rho_fn, fam.theta0, fam.first, fam.second,
        generators=(-SY / (2 * r), SX / (2 * r), np.zeros((2, 2), dtype=complex)),
        name="qubit", meta={"r": float(r)}, rho_mp_fn=fam.rho_mp_fn,
    )


def diagonal_family(p0: Sequence[float], derivatives) -> QuantumFamily:
    """``diag(p0 + sum theta_k D_k)`` with ``D`` an ``m x d`` table of zero-sum rows."""
    p0 = np.asarray(p0, dtype=float)
    D = np.atleast_2d(np.asarray(derivatives, dtype=float))
    if D.shape[1] != p0.size:
        raise ValueError(f"derivative table has {D.shape[1]} columns, expected {p0.size}")
    fam = polynomial_family(np.diag(p0), [np.diag(row) for row in D], name="diagonal")
    zero = np.zeros((p0.size, p0.size), dtype=complex)
    return QuantumFamily(fam.rho_fn, fam.theta0, fam.first, fam.second,
                         generators=tuple(zero for _ in D), name="diagonal", rho_mp_fn=fam.rho_mp_fn)


def _expi(X: np.ndarray) -> np.ndarray:
    return eig_hermitian(X).apply(lambda w: np.exp(1j * w))


def rotation_family(rho, generators: Sequence) -> QuantumFamily:
    """``rho(theta) = e^{i X} rho e^{-i X}`` with ``X = sum theta_k H_k``."""
    R = as_density(rho).matrix
    d = R.shape[0]
    H = _herm_list(generators, d, "generator")
    m = len(H)
    if m == 0:
        raise ValueError("a family needs at least one generator")
    phi = lambda A: np.einsum("ij,ji->", R, A)
    H = tuple(h - phi(h).real * np.eye(d) for h in H)
    Hs = np.array(H)

    def fn(theta):
        U = _expi(np.einsum("k,kij->ij", theta, Hs))
        return U @ R @ dagger(U)

    first = tuple(1j * commutator(h, R) for h in H)
    second = np.zeros((m, m, d, d), dtype=complex)
    for k in range(m):
        for l in range(m):
            # symmetrized -[H_k, [H_l, rho]]
            second[k, l] = -0.5 * (commutator(H[k], commutator(H[l], R)) + commutator(H[l], commutator(H[k], R)))
    R_mp, H_mp = to_mp(R), [to_mp(h) for h in H]

    def fn_mp(theta):
        X = sum((theta[k] * H_mp[k] for k in range(1, m)), theta[0] * H_mp[0])
        E, V = mpmath.eighe((X + X.transpose_conj()) / 2)
        U = V * mpmath.diag([mpmath.exp(1j * e) for e in E]) * V.transpose_conj()
        return U * R_mp * U.transpose_conj()

    return QuantumFamily(fn, np.zeros(m), first, second, generators=H, name="rotation", rho_mp_fn=fn_mp)


def callable_family(fn: Callable, theta0, name: str = "user") -> QuantumFamily:
    """Family from a plain function; all derivatives by finite differences."""
    return QuantumFamily(fn, theta0, name=name)

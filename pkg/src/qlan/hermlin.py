"""Hermitian linear algebra: spectral decomposition and spectral calculus.

Everything downstream (modular groups, cocycles, logarithmic derivatives) is a
function of the spectral projectors of a faithful density matrix, so this
module is the only place that talks to an eigensolver.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import NamedTuple

import mpmath
import numpy as np

from qlan import tolerances

__all__ = [
    "SpectralDecomposition",
    "DensityMatrix",
    "NotHermitianError",
    "NotFaithfulError",
    "ConvergenceError",
    "eig_hermitian",
    "jacobi_eigh",
    "matrix_power",
    "matrix_log",
    "rho_inner",
    "commutator",
    "jordan",
    "dagger",
    "hs_inner",
    "is_hermitian",
    "as_density",
    "random_density",
    "random_hermitian",
    "random_unitary",
    "matrix_power_mp",
    "to_mp",
]


class NotHermitianError(ValueError):
    pass


class NotFaithfulError(ValueError):
    pass


class ConvergenceError(ArithmeticError):
    pass


def dagger(A: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(A, -1, -2))


def commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A @ B - B @ A


def jordan(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Symmetrized product ``(AB + BA) / 2``."""
    return 0.5 * (A @ B + B @ A)


def hs_inner(A: np.ndarray, B: np.ndarray) -> complex:
    """Hilbert-Schmidt inner product ``Tr(A* B)``."""
    return complex(np.vdot(A, B))


def hermiticity_residual(A: np.ndarray) -> float:
    scale = max(1.0, float(np.max(np.abs(A))) if A.size else 1.0)
    return float(np.max(np.abs(A - dagger(A)))) / scale if A.size else 0.0


def is_hermitian(A: np.ndarray, tol: float | None = None) -> bool:
    tol = tolerances.get().hermitian if tol is None else tol
    A = np.asarray(A)
    return A.ndim == 2 and A.shape[0] == A.shape[1] and hermiticity_residual(A) <= tol


def _square(A, name: str = "matrix") -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


class SpectralDecomposition(NamedTuple):
    """Eigenvalues in descending order with eigenvectors as columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        U = self.eigenvectors
        return (U * self.eigenvalues) @ dagger(U)

    def apply(self, f) -> np.ndarray:
        """Spectral calculus ``U f(diag(lambda)) U*`` for a vectorized ``f``."""
        U = self.eigenvectors
        return (U * f(self.eigenvalues)) @ dagger(U)

    def clusters(self, tol: float | None = None) -> list[np.ndarray]:
        """Index groups of (numerically) equal eigenvalues."""
        tol = tolerances.get().cluster if tol is None else tol
        lam = self.eigenvalues
        groups: list[list[int]] = [[0]]
        for i in range(1, len(lam)):
            if abs(lam[i] - lam[groups[-1][0]]) <= tol * max(1.0, abs(lam[i])):
                groups[-1].append(i)
            else:
                groups.append([i])
        return [np.array(g) for g in groups]

    def projectors(self, tol: float | None = None) -> list[np.ndarray]:
        U = self.eigenvectors
        return [U[:, g] @ dagger(U[:, g]) for g in self.clusters(tol)]

    def to_eigenbasis(self, A: np.ndarray) -> np.ndarray:
        U = self.eigenvectors
        return dagger(U) @ A @ U

    def from_eigenbasis(self, A: np.ndarray) -> np.ndarray:
        U = self.eigenvectors
        return U @ A @ dagger(U)


def _fix_phases(U: np.ndarray) -> np.ndarray:
    U = U.copy()
    for k in range(U.shape[1]):
        col = U[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size:
            c = col[nz[0]]
            U[:, k] = col * (abs(c) / c)
    return U


def _canonical_order(lam: np.ndarray, U: np.ndarray) -> SpectralDecomposition:
    order = np.argsort(-lam, kind="stable")
    lam, U = lam[order], U[:, order]
    U = _fix_phases(U)
    decomposition = SpectralDecomposition(lam, U)
    # inside a degenerate cluster: re-orthonormalize, then order columns
    # lexicographically so golden tests are deterministic
    for g in decomposition.clusters():
        if g.size < 2:
            continue
        Q, _ = np.linalg.qr(U[:, g])
        Q = _fix_phases(Q)
        keys = [tuple(np.round(np.concatenate([-np.abs(q), q.real, q.imag]), 12)) for q in Q.T]
        Q = Q[:, sorted(range(g.size), key=keys.__getitem__)]
        U[:, g] = Q
        lam[g] = lam[g].mean()
    return SpectralDecomposition(lam, U)


def jacobi_eigh(H: np.ndarray) -> SpectralDecomposition:
    """Cyclic Jacobi eigensolver for a complex Hermitian matrix.

    Each rotation first removes the phase of the pivot ``H[p, q]`` and then
    applies the real symmetric Jacobi rotation. Sweeps stop once the
    off-diagonal Frobenius norm drops below ``jacobi_offdiag * ||H||_F``.
    """
    tol = tolerances.get()
    A = _square(H).copy()
    n = A.shape[0]
    V = np.eye(n, dtype=complex)
    scale = max(np.linalg.norm(A), np.finfo(float).tiny)

    def off(M):
        return np.linalg.norm(M - np.diag(np.diag(M)))

    for _ in range(tol.jacobi_max_sweeps):
        if off(A) <= tol.jacobi_offdiag * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                b = A[p, q]
                mag = abs(b)
                if mag <= 1e-300:
                    continue
                a, d = A[p, p].real, A[q, q].real
                tau = (d - a) / (2.0 * mag)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.hypot(1.0, tau))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                phase = b / mag
                # G = diag(1, conj(phase)) @ [[c, s], [-s, c]]
                G = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                idx = [p, q]
                A[:, idx] = A[:, idx] @ G
                A[idx, :] = dagger(G) @ A[idx, :]
                A[p, q] = A[q, p] = 0.0
                V[:, idx] = V[:, idx] @ G
    else:
        if off(A) > tol.jacobi_offdiag * scale:
            raise ConvergenceError(
                f"Jacobi eigensolver did not converge in {tol.jacobi_max_sweeps} sweeps"
            )
    return _canonical_order(np.real(np.diag(A)).copy(), V)


def eig_hermitian(H, method: str = "lapack") -> SpectralDecomposition:
    """Spectral decomposition of a Hermitian matrix.

    Args:
        H: square matrix, Hermitian up to ``tolerances.hermitian``.
        method: ``"lapack"`` (``numpy.linalg.eigh``) or ``"jacobi"``
            (the self-contained cyclic Jacobi solver).

    Returns:
        Eigenvalues sorted in descending order, eigenvectors with the first
        non-negligible component made real and positive.

    Raises:
        NotHermitianError: if ``H`` is not Hermitian.
        ConvergenceError: if the eigensolver fails.
    """
    H = _square(H)
    if not is_hermitian(H):
        raise NotHermitianError(
            f"matrix is not Hermitian (residual {hermiticity_residual(H):.3e})"
        )
    H = 0.5 * (H + dagger(H))
    if method == "jacobi":
        return jacobi_eigh(H)
    if method != "lapack":
        raise ValueError(f"unknown eigensolver {method!r}")
    try:
        lam, U = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(str(exc)) from exc
    return _canonical_order(lam, U)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A strictly positive, unit-trace Hermitian matrix.

    The spectral decomposition is computed once and cached.
    """

    matrix: np.ndarray

    def __post_init__(self):
        tol = tolerances.get()
        M = _square(self.matrix, "density matrix")
        res = hermiticity_residual(M)
        if res > tol.density_hermitian:
            raise NotHermitianError(f"density matrix not Hermitian (residual {res:.3e})")
        M = 0.5 * (M + dagger(M))
        tr = np.trace(M).real
        if abs(tr - 1.0) > tol.trace:
            raise ValueError(f"density matrix has trace {tr!r}, expected 1")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)
        if self.min_eigenvalue <= 0:
            raise NotFaithfulError(
                f"density matrix is not faithful (min eigenvalue {self.min_eigenvalue:.3e})"
            )

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @functools.cached_property
    def spectrum(self) -> SpectralDecomposition:
        return eig_hermitian(self.matrix)

    @property
    def min_eigenvalue(self) -> float:
        return float(self.spectrum.eigenvalues[-1])

    def power(self, z: complex) -> np.ndarray:
        return matrix_power(self, z)

    def log(self) -> np.ndarray:
        return matrix_log(self)

    def expect(self, A: np.ndarray) -> complex:
        """``Tr(rho A)``."""
        return complex(np.einsum("ij,ji->", self.matrix, A))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def as_density(rho) -> DensityMatrix:
    return rho if isinstance(rho, DensityMatrix) else DensityMatrix(np.asarray(rho))


def _positive_spectrum(rho) -> SpectralDecomposition:
    if isinstance(rho, DensityMatrix):
        spec = rho.spectrum
    else:
        spec = eig_hermitian(rho)
    if spec.eigenvalues[-1] <= 0:
        raise NotFaithfulError(
            f"spectral calculus needs a strictly positive matrix "
            f"(min eigenvalue {spec.eigenvalues[-1]:.3e})"
        )
    return spec


def matrix_power(rho, z: complex) -> np.ndarray:
    """``rho**z`` with the principal branch ``lambda**z = exp(z ln lambda)``.

    ``rho`` may be a :class:`DensityMatrix` or any strictly positive Hermitian
    matrix (trace is not required to be one).
    """
    spec = _positive_spectrum(rho)
    return spec.apply(lambda lam: np.exp(z * np.log(lam)))


def matrix_log(rho) -> np.ndarray:
    """Hermitian logarithm of a strictly positive matrix."""
    spec = _positive_spectrum(rho)
    L = spec.apply(np.log)
    return 0.5 * (L + dagger(L))


def rho_inner(rho, A: np.ndarray, B: np.ndarray) -> float:
    """Real inner product ``(A, B)_rho = Tr(rho A o B)`` on Hermitian matrices."""
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if not (is_hermitian(A) and is_hermitian(B)):
        raise NotHermitianError("rho_inner is defined on Hermitian arguments")
    R = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    return float(np.real(np.einsum("ij,ji->", R, jordan(A, B))))


# -- random ensembles used by tests, examples and the CLI word generator --


def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    Z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_hermitian(rng: np.random.Generator, d: int, scale: float = 1.0) -> np.ndarray:
    Z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * 0.5 * (Z + dagger(Z))


def random_density(
    rng: np.random.Generator, d: int, min_eigenvalue: float = 0.05
) -> DensityMatrix:
    """Random faithful state with spectrum bounded below by ``min_eigenvalue``."""
    if min_eigenvalue * d >= 1:
        raise ValueError("min_eigenvalue too large for dimension")
    w = rng.dirichlet(np.ones(d))
    lam = min_eigenvalue + (1 - d * min_eigenvalue) * w
    U = random_unitary(rng, d)
    M = (U * lam) @ dagger(U)
    M = 0.5 * (M + dagger(M))
    return DensityMatrix(M / np.trace(M).real)


# -- extended precision, for very large tensor powers --


def to_mp(R) -> mpmath.matrix:
    """An mpmath copy of ``R``; float64 entries are taken as exact."""
    if isinstance(R, mpmath.matrix):
        return R.copy()
    return mpmath.matrix([[mpmath.mpc(complex(x)) for x in row] for row in np.asarray(R)])


def matrix_power_mp(R, z: complex, dps: int = 40) -> mpmath.matrix:
    """``R**z`` evaluated in mpmath at ``dps`` digits.

    ``R`` may be a numpy array, whose entries are taken as exact, or an
    mpmath matrix already carrying extended-precision entries.
    """
    with mpmath.workdps(dps):
        M = to_mp(R)
        M = (M + M.transpose_conj()) / 2
        E, Q = mpmath.eighe(M)
        if min(E) <= 0:
            raise NotFaithfulError("extended-precision power of a non-positive matrix")
        zz = mpmath.mpc(z)
        D = mpmath.diag([mpmath.exp(zz * mpmath.log(e)) for e in E])
        return Q * D * Q.transpose_conj()

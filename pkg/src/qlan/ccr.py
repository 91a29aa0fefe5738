"""Weyl algebra over the Hermitian matrices and its quasi-free states.

The real vector space ``M_d(C)^sa`` carries the symplectic form
``sigma(A, B) = (i/2) Tr(rho [A, B])`` and the inner product
``alpha(A, B) = (A, B)_rho = Re Tr(rho A o B)``. Weyl operators are never
represented; words in them are collapsed with the Weyl relation into a single
vector and a phase, and evaluated in closed form.

Phase convention: ``W(A) W(B) = exp(+i sigma(A, B)) W(A + B)``. With the
form above this is the sign under which the tensor-power cocycles of a smooth
family converge to the limit cocycles built in :mod:`qlan.jet`.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from qlan import tolerances
from qlan.hermlin import (
    DensityMatrix,
    NotHermitianError,
    as_density,
    commutator,
    dagger,
    hermiticity_residual,
    jordan,
)

__all__ = [
    "hermitian_basis",
    "SymplecticSpace",
    "symplectic_form",
    "CommutantSplit",
    "split_commutant",
    "WeylWord",
    "weyl_collapse",
    "quasifree_eval",
]


def hermitian_basis(d: int) -> list[np.ndarray]:
    """Generalized Gell-Mann basis of ``M_d(C)^sa``, HS-orthogonal, identity first."""
    out = [np.eye(d, dtype=complex)]
    for k in range(1, d):
        D = np.zeros((d, d), dtype=complex)
        D[np.arange(k), np.arange(k)] = 1.0
        D[k, k] = -k
        out.append(D)
    for i in range(d):
        for j in range(i + 1, d):
            S = np.zeros((d, d), dtype=complex)
            S[i, j] = S[j, i] = 1.0
            A = np.zeros((d, d), dtype=complex)
            A[i, j], A[j, i] = -1j, 1j
            out.extend([S, A])
    return out


def _check_hermitian(*mats: np.ndarray) -> None:
    tol = tolerances.get().hermitian
    for M in mats:
        r = hermiticity_residual(M)
        if r > tol:
            raise NotHermitianError(f"expected a Hermitian matrix (residual {r:.3e})")


class SymplecticSpace:
    """``(M_d(C)^sa, sigma, alpha)`` at a faithful base state ``rho``.

    Attributes:
        rho: the base state.
        basis: ``d**2`` Hermitian matrices, orthonormal in ``(., .)_rho``.
    """

    def __init__(self, rho):
        self.rho: DensityMatrix = as_density(rho)
        self._R = self.rho.matrix

    @property
    def dim(self) -> int:
        return self.rho.dim

    def phi(self, A: np.ndarray) -> complex:
        return complex(np.einsum("ij,ji->", self._R, A))

    def sigma(self, A: np.ndarray, B: np.ndarray) -> float:
        val = 0.5j * self.phi(commutator(A, B))
        tol = tolerances.get().imaginary
        if abs(val.imag) > tol * max(1.0, abs(val)):
            raise ArithmeticError(f"symplectic form has imaginary part {val.imag:.3e}")
        return float(val.real)

    def alpha(self, A: np.ndarray, B: np.ndarray) -> float:
        return float(self.phi(jordan(A, B)).real)

    @functools.cached_property
    def basis(self) -> tuple[np.ndarray, ...]:
        onb: list[np.ndarray] = []
        for B in hermitian_basis(self.dim):
            v = B.copy()
            for _ in range(2):
                for b in onb:
                    v = v - self.alpha(b, v) * b
            onb.append(v / np.sqrt(self.alpha(v, v)))
        return tuple(onb)

    def coords(self, A: np.ndarray) -> np.ndarray:
        """Coordinates of a Hermitian ``A`` in :attr:`basis`."""
        _check_hermitian(A)
        return np.array([self.alpha(b, A) for b in self.basis])

    @functools.cached_property
    def sigma_gram(self) -> np.ndarray:
        B = self.basis
        n = len(B)
        G = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                G[i, j] = self.sigma(B[i], B[j])
                G[j, i] = -G[i, j]
        return G

    @functools.cached_property
    def alpha_gram(self) -> np.ndarray:
        B = self.basis
        return np.array([[self.alpha(a, b) for b in B] for a in B])


def symplectic_form(S: SymplecticSpace, A: np.ndarray, B: np.ndarray) -> float:
    """``(i/2) Tr(rho [A, B])`` for Hermitian ``A``, ``B``."""
    _check_hermitian(A, B)
    return S.sigma(A, B)


@dataclass(frozen=True)
class CommutantSplit:
    """``M_d(C)^sa = H_rho (+) H_rho^perp`` with ``H_rho`` the commutant of ``rho``."""

    basis_Hrho: tuple[np.ndarray, ...]
    basis_perp: tuple[np.ndarray, ...]

    def project_Hrho(self, S: SymplecticSpace, A: np.ndarray) -> np.ndarray:
        return _rho_projection(S, self.basis_Hrho, A)

    def project_perp(self, S: SymplecticSpace, A: np.ndarray) -> np.ndarray:
        return _rho_projection(S, self.basis_perp, A)


def _rho_projection(S: SymplecticSpace, basis, A) -> np.ndarray:
    out = np.zeros_like(np.asarray(A, dtype=complex))
    if not basis:
        return out
    G = np.array([[S.alpha(a, b) for b in basis] for a in basis])
    c = np.linalg.solve(G, [S.alpha(b, A) for b in basis])
    for ci, b in zip(c, basis):
        out = out + ci * b
    return out


def split_commutant(rho) -> CommutantSplit:
    """Hermitians commuting with ``rho`` and their ``(., .)_rho`` complement.

    In the eigenbasis the commutant is block diagonal over eigenvalue clusters
    and its complement is exactly the off-block Hermitians.
    """
    rho = as_density(rho)
    spec = rho.spectrum
    U = spec.eigenvectors
    d = rho.dim
    label = np.empty(d, dtype=int)
    for c, idx in enumerate(spec.clusters()):
        label[idx] = c
    inside, outside = [], []
    for B in hermitian_basis(d):
        on_block = np.all((np.abs(B) == 0) | (label[:, None] == label[None, :]))
        mat = U @ B @ dagger(U)
        mat = 0.5 * (mat + dagger(mat))
        # Gell-Mann elements are either diagonal or supported on one (i, j) pair
        (inside if on_block else outside).append(mat)
    return CommutantSplit(tuple(inside), tuple(outside))


@dataclass(frozen=True)
class WeylWord:
    """``prefactor * W(A_1) ... W(A_k)``; the empty word is the identity."""

    vectors: tuple[np.ndarray, ...] = ()
    prefactor: complex = 1.0 + 0j

    def __post_init__(self):
        vecs = tuple(np.asarray(v, dtype=complex) for v in self.vectors)
        _check_hermitian(*vecs)
        if not np.isfinite(self.prefactor):
            raise ArithmeticError("non-finite Weyl word prefactor")
        object.__setattr__(self, "vectors", vecs)
        object.__setattr__(self, "prefactor", complex(self.prefactor))

    def __mul__(self, other: "WeylWord") -> "WeylWord":
        return WeylWord(self.vectors + other.vectors, self.prefactor * other.prefactor)

    def adjoint(self) -> "WeylWord":
        """``W(A)^* = W(-A)``: reverse, negate, conjugate."""
        return WeylWord(tuple(-v for v in reversed(self.vectors)), np.conj(self.prefactor))

    def collapsed(self, S: SymplecticSpace) -> "WeylWord":
        total, phase = weyl_collapse(self, S)
        return WeylWord((total,), phase)


def weyl_collapse(word: WeylWord, S: SymplecticSpace) -> tuple[np.ndarray, complex]:
    """Reduce ``word`` to ``phase * W(sum A_j)``.

    Returns:
        ``(sum A_j, prefactor * exp(i sum_{j<k} sigma(A_j, A_k)))``.
    """
    d = S.dim
    total = np.zeros((d, d), dtype=complex)
    angle = 0.0
    for v in word.vectors:
        # sigma is bilinear, so pairing each letter with the running sum suffices
        angle += S.sigma(total, v)
        total = total + v
    return total, word.prefactor * np.exp(1j * angle)


def quasifree_eval(S: SymplecticSpace, word: WeylWord, shift: np.ndarray | None = None) -> complex:
    """``phase * exp(-alpha(X, X) / 2 + i (X, shift)_rho)`` for the collapsed ``X``.

    Without ``shift`` this is the quasi-free state; with the SLD ``L(u)`` as
    shift it is the displaced state ``phi^u``.
    """
    if not word.vectors:
        return word.prefactor
    X, phase = weyl_collapse(word, S)
    expo = -0.5 * S.alpha(X, X)
    if shift is not None:
        _check_hermitian(shift)
        expo = expo + 1j * S.alpha(X, shift)
    return phase * np.exp(expo)

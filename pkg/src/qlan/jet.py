"""First- and second-order data of a family at its base point.

All formulas are applied in the eigenbasis of ``rho = rho_{theta0}``, with
eigenvalue clusters treated as blocks:

* ``H_k``: ``(H_k)_ij = i (d rho_k)_ij / (lambda_i - lambda_j)`` off the
  diagonal blocks, zero on them (unless analytic generators are supplied);
* ``l_k``: the diagonal blocks of ``d rho_k`` divided by the eigenvalue;
* ``ell_k``: ``2 (d rho_k)_ij / (lambda_i + lambda_j)`` off the blocks;
* ``L_k = l_k + ell_k``: the symmetric logarithmic derivative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from qlan import tolerances
from qlan.ccr import SymplecticSpace, WeylWord
from qlan.families import QuantumFamily
from qlan.hermlin import commutator, dagger, jordan, matrix_power

__all__ = [
    "FamilyJet",
    "sld",
    "quantum_fisher",
    "field_information",
    "OPERATOR_MONOTONE",
    "log_derivative_F",
    "chebyshev_grid",
    "KSubspace",
    "k_subspace",
    "limit_cocycle",
]


def _herm(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + dagger(M))


class FamilyJet:
    """Generators, log-derivatives and the second-order term ``h(u)`` at ``theta0``."""

    def __init__(self, family: QuantumFamily):
        self.family = family
        self.theta0 = family.theta0
        self.rho = family.state(family.theta0)
        self.space = SymplecticSpace(self.rho)
        spec = self.rho.spectrum
        self._U = spec.eigenvectors
        self._lam = spec.eigenvalues
        self._clusters = spec.clusters()
        lab = np.empty(self.rho.dim, dtype=int)
        for c, idx in enumerate(self._clusters):
            lab[idx] = c
        self._same = lab[:, None] == lab[None, :]
        d1, d2 = family.derivatives()
        self.d_rho = [np.asarray(D, dtype=complex) for D in d1]
        self.d2_rho = np.asarray(d2, dtype=complex)
        self._D = [self._to_eig(D) for D in self.d_rho]

        lam = self._lam
        diff = lam[:, None] - lam[None, :]
        summ = lam[:, None] + lam[None, :]
        safe = np.where(self._same, 1.0, diff)
        self.l = [_herm(self._from_eig(np.where(self._same, D / lam[:, None], 0))) for D in self._D]
        self.ell = [_herm(self._from_eig(np.where(self._same, 0, 2 * D / summ))) for D in self._D]
        if family.generators is not None:
            phi = self.phi
            self.H = [_herm(np.asarray(h, dtype=complex) - phi(h).real * np.eye(self.dim)) for h in family.generators]
        else:
            self.H = [_herm(self._from_eig(np.where(self._same, 0, 1j * D / safe))) for D in self._D]

    # -- basis changes ---------------------------------------------------

    def _to_eig(self, A):
        return dagger(self._U) @ A @ self._U

    def _from_eig(self, A):
        return self._U @ A @ dagger(self._U)

    @property
    def dim(self) -> int:
        return self.rho.dim

    @property
    def m(self) -> int:
        return len(self.d_rho)

    def phi(self, A) -> complex:
        return self.rho.expect(A)

    def _combine(self, mats, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if u.size != self.m:
            raise ValueError(f"direction has {u.size} entries, expected {self.m}")
        return np.einsum("k,kij->ij", u, np.asarray(mats))

    def H_u(self, u) -> np.ndarray:
        return self._combine(self.H, u)

    def l_u(self, u) -> np.ndarray:
        return self._combine(self.l, u)

    def ell_u(self, u) -> np.ndarray:
        return self._combine(self.ell, u)

    def L_u(self, u) -> np.ndarray:
        return self.l_u(u) + self.ell_u(u)

    @property
    def sld(self) -> list[np.ndarray]:
        return [a + b for a, b in zip(self.l, self.ell)]

    def h(self, u) -> np.ndarray:
        """Second derivative of ``log tau`` along ``u``, ``tau`` the eigenvalue part.

        Per cluster ``c``, with first and second derivative blocks ``A1``,
        ``A2`` (second-order perturbation included),
        ``h_c = A2 / lambda_c - (A1 / lambda_c)**2``.
        """
        u = np.atleast_1d(np.asarray(u, dtype=float))
        D1 = self._to_eig(self._combine(self.d_rho, u))
        D2 = self._to_eig(np.einsum("k,l,klij->ij", u, u, self.d2_rho))
        lam = self._lam
        out = np.zeros_like(D1)
        for idx in self._clusters:
            lc = lam[idx[0]]
            others = np.setdiff1d(np.arange(self.dim), idx)
            A1 = D1[np.ix_(idx, idx)]
            A2 = D2[np.ix_(idx, idx)].copy()
            if others.size:
                w = 1.0 / (lc - lam[others])
                A2 += 2 * (D1[np.ix_(idx, others)] * w) @ D1[np.ix_(others, idx)]
            out[np.ix_(idx, idx)] = A2 / lc - (A1 / lc) @ (A1 / lc)
        return _herm(self._from_eig(out))

    def fisher_matrix(self) -> np.ndarray:
        """Quantum Fisher matrix ``[(L_k, L_l)_rho]``."""
        L = self.sld
        return np.array([[self.space.alpha(a, b) for b in L] for a in L])

    def classical_fisher_matrix(self) -> np.ndarray:
        """``[(l_k, l_l)_rho]``, the information in the eigenvalue part."""
        return np.array([[self.space.alpha(a, b) for b in self.l] for a in self.l])

    def invariant_residuals(self, u) -> dict[str, float]:
        """Gauge and Fisher-identity residuals along ``u``."""
        l = self.l_u(u)
        return {
            "phi_H": abs(self.phi(self.H_u(u))),
            "phi_l": abs(self.phi(l)),
            "phi_ell": abs(self.phi(self.ell_u(u))),
            "fisher_identity": abs(self.phi(self.h(u)) + self.phi(l @ l)),
        }


def sld(jet: FamilyJet) -> list[np.ndarray]:
    """Symmetric logarithmic derivatives ``L_k`` solving ``L o rho = d rho_k``.

    Raises:
        ArithmeticError: the defining equation is violated beyond 1e-8.
    """
    R = jet.rho.matrix
    out = jet.sld
    for L, D in zip(out, jet.d_rho):
        res = np.linalg.norm(jordan(L, R) - D)
        if res > 1e-8 * max(1.0, np.linalg.norm(D)):
            raise ArithmeticError(f"SLD residual {res:.3e}")
    return out


def quantum_fisher(rho, L: np.ndarray) -> float:
    """``Tr(rho L^2)``."""
    R = np.asarray(rho)
    return float(np.einsum("ij,jk,ki->", R, L, L).real)


def field_information(rho, A: np.ndarray, L: np.ndarray) -> float:
    """Information in the field ``B(A)`` about a shift along ``L``: ``(A, L)^2 / (A, A)``."""
    R = np.asarray(rho)
    a = np.einsum("ij,ji->", R, jordan(A, L)).real
    n = np.einsum("ij,ji->", R, A @ A).real
    if n <= 0:
        raise ValueError("field direction has zero variance")
    return float(a * a / n)


def _bkm(t):
    t = np.asarray(t, dtype=float)
    near = np.abs(t - 1) < 1e-8
    safe = np.where(near, 2.0, t)
    return np.where(near, 1 + (t - 1) / 2, (safe - 1) / np.log(safe))


OPERATOR_MONOTONE: dict[str, Callable] = {
    "sld": lambda t: (1 + np.asarray(t)) / 2,
    "bkm": _bkm,
    "wy": lambda t: (1 + np.sqrt(t)) ** 2 / 4,
    "harmonic": lambda t: 2 * np.asarray(t) / (1 + np.asarray(t)),
}


def log_derivative_F(jet: FamilyJet, F: str | Callable = "sld") -> list[np.ndarray]:
    """Logarithmic derivatives ``L^F_k = [F(L R^{-1})]^{-1} R^{-1} (d rho_k)``.

    Entries in the eigenbasis are ``(d rho)_ij / (lambda_j F(lambda_i / lambda_j))``.
    Only ``F(1) = 1`` and positivity on the realized ratios are checked;
    operator monotonicity is not.
    """
    f = OPERATOR_MONOTONE[F.lower()] if isinstance(F, str) else F
    if abs(float(f(1.0)) - 1) > 1e-12:
        raise ValueError(f"F(1) must equal 1, got {float(f(1.0))}")
    lam = jet._lam
    ratio = lam[:, None] / lam[None, :]
    vals = np.asarray(f(ratio), dtype=float)
    if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
        raise ValueError("F must be positive on the spectrum ratios")
    scale = 1.0 / (lam[None, :] * vals)
    return [_herm(jet._from_eig(D * scale)) for D in jet._D]


def chebyshev_grid(count: int, half_width: float = 3.0) -> tuple[float, ...]:
    k = np.arange(count)
    return tuple(float(x) for x in half_width * np.cos((2 * k + 1) * np.pi / (2 * count)))


@dataclass(frozen=True)
class KSubspace:
    """``(., .)_rho``-orthonormal basis of ``span{l(u)} (+) span{H(u) - sigma_t H(u)}``."""

    basis: tuple[np.ndarray, ...]
    t_grid: tuple[float, ...]
    space: SymplecticSpace

    @property
    def dim(self) -> int:
        return len(self.basis)

    def project(self, A: np.ndarray) -> np.ndarray:
        out = np.zeros_like(np.asarray(A, dtype=complex))
        for b in self.basis:
            out = out + self.space.alpha(b, A) * b
        return out

    def residual(self, A: np.ndarray) -> float:
        """Relative ``rho``-norm distance from ``A`` to the subspace."""
        A = np.asarray(A, dtype=complex)
        norm = np.sqrt(max(self.space.alpha(A, A), 0.0))
        if norm == 0:
            return 0.0
        E = A - self.project(A)
        return float(np.sqrt(max(self.space.alpha(E, E), 0.0)) / norm)


def k_subspace(jet: FamilyJet, t_grid: Sequence[float] | None = None) -> KSubspace:
    """Span of the eigenvalue log-derivatives and the modular differences of ``H_k``.

    The default grid has ``d(d-1) + 2`` Chebyshev points in ``[-3, 3]``.
    """
    d = jet.dim
    grid = tuple(t_grid) if t_grid is not None else chebyshev_grid(d * (d - 1) + 2)
    S = jet.space
    R = jet.rho
    cands = list(jet.l)
    for t in grid:
        U = matrix_power(R, 1j * t)
        for H in jet.H:
            cands.append(_herm(H - U @ H @ dagger(U)))
    tol = tolerances.get().span_rank
    onb: list[np.ndarray] = []
    for v in cands:
        scale = np.sqrt(max(S.alpha(v, v), 0.0))
        if scale == 0:
            continue
        w = v.copy()
        for _ in range(2):
            for b in onb:
                w = w - S.alpha(b, w) * b
        nrm = np.sqrt(max(S.alpha(w, w), 0.0))
        if nrm > tol * max(1.0, scale):
            onb.append(w / nrm)
    return KSubspace(tuple(onb), grid, S)


def limit_cocycle(jet: FamilyJet, u, t: float) -> WeylWord:
    """``V_{u,t} = W(H - sigma_t H) e^{phi([H, sigma_t H]) / 2} W(t l) e^{i t phi(h) / 2}``.

    ``H = H(u)``, ``l = l(u)``, ``h = h(u)``; returned as a two-letter word.

    Raises:
        ArithmeticError: the folded prefactor is not unimodular.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if t == 0 or not np.any(u):
        return WeylWord()
    H = jet.H_u(u)
    U = matrix_power(jet.rho, 1j * t)
    sH = U @ H @ dagger(U)
    X = _herm(H - sH)
    c1 = 0.5 * jet.phi(commutator(H, sH))
    c2 = 0.5j * t * jet.phi(jet.h(u))
    pre = np.exp(c1 + c2)
    if abs(abs(pre) - 1) > tolerances.get().unimodular:
        raise ArithmeticError(f"limit cocycle prefactor has modulus {abs(pre)!r}")
    pre /= abs(pre)
    return WeylWord((X, t * jet.l_u(u)), pre)

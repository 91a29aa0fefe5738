"""Quantum statistical experiments on full matrix algebras.

An experiment is a finite family of faithful states ``rho_theta`` on
``M_d(C)`` with a distinguished base label. Everything here is built on the
modular group of the base state and the Connes cocycles
``u_t(theta) = rho_theta^{it} rho^{-it}``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from qlan import tolerances
from qlan.hermlin import (
    DensityMatrix,
    as_density,
    dagger,
    eig_hermitian,
    matrix_power,
)

__all__ = [
    "DEFAULT_T_GRID",
    "Letter",
    "GroupWord",
    "QuantumExperiment",
    "modular_orbit",
    "connes_cocycle",
    "word_operator",
    "canonical_state",
    "state_at_theta",
    "quantum_hellinger",
    "quasi_entropy",
    "mix_experiments",
    "SufficiencyResult",
    "is_sufficient_subalgebra",
    "MinimalBasis",
    "minimal_sufficient_basis",
    "Block",
    "FactorizationResult",
    "factorization_check",
    "ProbeResult",
    "equivalence_probe",
    "random_words",
    "omega_table",
]

DEFAULT_T_GRID = (-2.3, -1.7, -1.0, -0.5, 0.5, 1.0, 1.7, 2.3)


@dataclass(frozen=True)
class Letter:
    """The generator ``u_t(theta)``, or its inverse when ``inverse`` is set."""

    theta: Hashable
    t: float
    inverse: bool = False

    def inv(self) -> "Letter":
        return Letter(self.theta, self.t, not self.inverse)


def _as_letter(x) -> Letter:
    if isinstance(x, Letter):
        return x
    if len(x) == 2:
        return Letter(x[0], float(x[1]))
    return Letter(x[0], float(x[1]), bool(x[2]))


@dataclass(frozen=True)
class GroupWord:
    """A word in the free group generated by the symbols ``u_t(theta)``.

    Letters with ``|t|`` below the word-time tolerance are dropped, as are
    letters on ``base`` when it is given. Adjacent letters are never merged:
    ``u_s u_t`` differs from ``u_{s+t}`` in general.
    """

    letters: tuple[Letter, ...] = ()
    base: Hashable | None = field(default=None, compare=False)

    def __post_init__(self):
        eps = tolerances.get().word_time
        kept = []
        for x in self.letters:
            L = _as_letter(x)
            if not np.isfinite(L.t):
                raise ValueError(f"non-finite word time {L.t}")
            if abs(L.t) < eps or (self.base is not None and L.theta == self.base):
                continue
            kept.append(L)
        object.__setattr__(self, "letters", tuple(kept))

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __mul__(self, other: "GroupWord") -> "GroupWord":
        return GroupWord(self.letters + other.letters, self.base)

    def inverse(self) -> "GroupWord":
        return GroupWord(tuple(L.inv() for L in reversed(self.letters)), self.base)

    def modular_shift(self, s: float) -> "GroupWord":
        """Image under ``alpha_s(u_t(theta)) = u_s(theta)^{-1} u_{t+s}(theta)``."""
        out = []
        for L in self.letters:
            pair = [Letter(L.theta, s, True), Letter(L.theta, L.t + s)]
            if L.inverse:
                pair = [x.inv() for x in reversed(pair)]
            out.extend(pair)
        return GroupWord(tuple(out), self.base)


class QuantumExperiment:
    """Faithful states ``rho_theta`` on ``M_d(C)`` indexed by hashable labels.

    Args:
        states: mapping label -> density matrix (array or DensityMatrix).
        base: the distinguished label ``theta0``; defaults to the first key.
    """

    def __init__(self, states: Mapping[Hashable, object], base: Hashable | None = None):
        if not states:
            raise ValueError("an experiment needs at least one state")
        self.states: dict[Hashable, DensityMatrix] = {k: as_density(v) for k, v in states.items()}
        self.params = tuple(self.states)
        self.base = self.params[0] if base is None else base
        if self.base not in self.states:
            raise ValueError(f"base label {self.base!r} is not a parameter")
        dims = {rho.dim for rho in self.states.values()}
        if len(dims) != 1:
            raise ValueError(f"states have different dimensions {sorted(dims)}")
        self.dim = dims.pop()
        floor = tolerances.get().faithful
        for k, rho in self.states.items():
            if rho.min_eigenvalue <= floor:
                raise ValueError(
                    f"state {k!r} has min eigenvalue {rho.min_eigenvalue:.3e}, not faithful"
                )
        self._powers: dict = {}

    @property
    def rho(self) -> DensityMatrix:
        return self.states[self.base]

    def __getitem__(self, theta) -> DensityMatrix:
        try:
            return self.states[theta]
        except KeyError:
            raise KeyError(f"unknown parameter label {theta!r}") from None

    def power(self, theta, z: complex) -> np.ndarray:
        key = (theta, complex(z))
        if key not in self._powers:
            if len(self._powers) > 4096:
                self._powers.clear()
            self._powers[key] = matrix_power(self[theta], z)
        return self._powers[key]

    def word(self, *letters) -> GroupWord:
        """Word with letters on the base label normalized away."""
        return GroupWord(tuple(letters), base=self.base)

    def __repr__(self) -> str:
        return f"QuantumExperiment(d={self.dim}, params={self.params!r}, base={self.base!r})"


def modular_orbit(rho, A: np.ndarray, t: float) -> np.ndarray:
    """``sigma_t(A) = rho^{it} A rho^{-it}``."""
    rho = as_density(rho)
    if t == 0:
        return np.array(A, dtype=complex)
    U = matrix_power(rho, 1j * t)
    return U @ A @ dagger(U)


def connes_cocycle(E: QuantumExperiment, theta, t: float) -> np.ndarray:
    """``[D phi_theta : D phi]_t = rho_theta^{it} rho^{-it}``."""
    E[theta]
    if t == 0 or theta == E.base:
        return np.eye(E.dim, dtype=complex)
    return E.power(theta, 1j * t) @ E.power(E.base, -1j * t)


def word_operator(E: QuantumExperiment, g: GroupWord) -> np.ndarray:
    W = np.eye(E.dim, dtype=complex)
    for L in g:
        C = connes_cocycle(E, L.theta, L.t)
        W = W @ (dagger(C) if L.inverse else C)
    return W


def canonical_state(E: QuantumExperiment, g: GroupWord) -> complex:
    """``omega(g) = Tr(rho_{theta0} u_1 ... u_k)``; exactly 1 on the empty word."""
    if len(g) == 0:
        return 1.0 + 0j
    return E.rho.expect(word_operator(E, g))


def state_at_theta(E: QuantumExperiment, theta, g: GroupWord) -> complex:
    """The same word product evaluated in ``rho_theta``."""
    if len(g) == 0:
        return 1.0 + 0j
    return E[theta].expect(word_operator(E, g))


def quantum_hellinger(rho_theta, rho, p: float) -> float:
    """``Tr(rho_theta^{1-p} rho^p)`` for ``p`` in ``(0, 1)``."""
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    A = matrix_power(as_density(rho_theta), 1 - p)
    B = matrix_power(as_density(rho), p)
    val = np.einsum("ij,ji->", A, B)
    if abs(val.imag) > tolerances.get().imaginary * max(1.0, abs(val)):
        raise ArithmeticError(f"Hellinger transform has imaginary part {val.imag:.3e}")
    return float(val.real)


def quasi_entropy(rho_theta, rho, p: float) -> float:
    """``S_p = (1 - Tr(rho_theta^{1-p} rho^p)) / (p (1-p))``."""
    return (1.0 - quantum_hellinger(rho_theta, rho, p)) / (p * (1 - p))


def mix_experiments(E1: QuantumExperiment, E2: QuantumExperiment, lam: float) -> QuantumExperiment:
    """Direct sum ``lam rho1_theta (+) (1 - lam) rho2_theta`` on ``C^{d1 + d2}``."""
    if not 0 < lam < 1:
        raise ValueError(f"mixing weight must lie in (0, 1), got {lam}")
    if set(E1.params) != set(E2.params) or E1.base != E2.base:
        raise ValueError("mixed experiments need the same parameter set and base")
    d1, d2 = E1.dim, E2.dim
    states = {}
    for k in E1.params:
        M = np.zeros((d1 + d2, d1 + d2), dtype=complex)
        M[:d1, :d1] = lam * E1[k].matrix
        M[d1:, d1:] = (1 - lam) * E2[k].matrix
        states[k] = M
    return QuantumExperiment(states, base=E1.base)


# -- sufficiency -------------------------------------------------------------


def _orthonormalize(vectors: Iterable[np.ndarray], basis: list[np.ndarray], tol: float) -> bool:
    """Modified Gram-Schmidt in the Hilbert-Schmidt inner product.

    Appends to ``basis`` in place; returns whether anything was added.
    """
    added = False
    for v in vectors:
        w = np.array(v, dtype=complex)
        scale = np.linalg.norm(w)
        if scale == 0:
            continue
        for _ in range(2):
            for b in basis:
                w -= np.vdot(b, w) * b
        nrm = np.linalg.norm(w)
        if nrm > tol * max(1.0, scale):
            basis.append(w / nrm)
            added = True
    return added


def _span_residual(Q: np.ndarray, X: np.ndarray) -> float:
    """HS distance from ``X`` to the span of the orthonormal columns of ``Q``."""
    x = X.reshape(-1)
    return float(np.linalg.norm(x - Q @ (Q.conj().T @ x)))


def _cocycles(E: QuantumExperiment, t_grid) -> list[np.ndarray]:
    return [connes_cocycle(E, k, t) for k in E.params if k != E.base for t in t_grid]


@dataclass(frozen=True)
class SufficiencyResult:
    sufficient: bool
    residual: float
    t_grid: tuple[float, ...]
    reason: str = ""

    def __bool__(self) -> bool:
        return self.sufficient


def is_sufficient_subalgebra(E: QuantumExperiment, basis: Sequence[np.ndarray], t_grid=DEFAULT_T_GRID) -> SufficiencyResult:
    """Test whether ``span(basis)`` is a subalgebra containing all cocycles on the grid.

    The verdict concerns the sampled times only; a finite grid cannot certify
    the continuum statement.

    Raises:
        ValueError: the span is not closed under adjoints or lacks the unit.
    """
    tol = tolerances.get()
    d = E.dim
    onb: list[np.ndarray] = []
    _orthonormalize([np.asarray(B, dtype=complex) for B in basis], onb, tol.span_rank)
    if not onb:
        raise ValueError("empty basis")
    Q = np.array([b.reshape(-1) for b in onb]).T
    if _span_residual(Q, np.eye(d)) > tol.sufficiency:
        raise ValueError("basis span does not contain the identity")
    star = max(_span_residual(Q, dagger(b)) for b in onb)
    if star > tol.sufficiency:
        raise ValueError(f"basis span is not closed under adjoints (residual {star:.3e})")
    grid = tuple(float(t) for t in t_grid)
    if not grid:
        raise ValueError("t_grid must be nonempty")
    mult = max(_span_residual(Q, a @ b) for a in onb for b in onb)
    res = max((_span_residual(Q, C) for C in _cocycles(E, grid)), default=0.0)
    if mult > tol.sufficiency:
        return SufficiencyResult(False, max(res, mult), grid, "span is not closed under products")
    ok = res < tol.sufficiency
    return SufficiencyResult(ok, res, grid, "" if ok else "cocycle outside span")


@dataclass(frozen=True)
class MinimalBasis:
    basis: tuple[np.ndarray, ...]
    t_grid: tuple[float, ...]
    rounds: int

    @property
    def dim(self) -> int:
        return len(self.basis)


def minimal_sufficient_basis(E: QuantumExperiment, t_grid=DEFAULT_T_GRID) -> MinimalBasis:
    """HS-orthonormal basis of the *-algebra generated by the cocycles on ``t_grid``."""
    grid = tuple(float(t) for t in t_grid)
    if not grid:
        raise ValueError("t_grid must be nonempty")
    tol = tolerances.get().span_rank
    d = E.dim
    onb: list[np.ndarray] = []
    gens = _cocycles(E, grid)
    _orthonormalize([np.eye(d)] + gens + [dagger(C) for C in gens], onb, tol)
    rounds = 0
    for rounds in range(1, d * d + 6):
        cand = [a @ b for a, b in itertools.product(onb, repeat=2)]
        cand += [dagger(a) for a in onb]
        if not _orthonormalize(cand, onb, tol) or len(onb) >= d * d:
            break
    return MinimalBasis(tuple(onb), grid, rounds)


# -- factorization -----------------------------------------------------------


@dataclass(frozen=True)
class Block:
    """Isometry ``V: C^{l r} -> C^d`` identifying a block with ``C^l (x) C^r``.

    The column order of ``V`` fixes the tensor identification: column
    ``a * r + b`` is the image of ``e_a (x) e_b``.
    """

    isometry: np.ndarray
    left_dim: int
    right_dim: int

    def __post_init__(self):
        V = np.asarray(self.isometry, dtype=complex)
        if V.ndim != 2 or V.shape[1] != self.left_dim * self.right_dim:
            raise ValueError(f"isometry shape {V.shape} does not match {self.left_dim}x{self.right_dim}")
        if not np.allclose(dagger(V) @ V, np.eye(V.shape[1]), atol=1e-10):
            raise ValueError("block map is not an isometry")
        object.__setattr__(self, "isometry", V)

    @classmethod
    def from_projector(cls, P: np.ndarray, left_dim: int, right_dim: int) -> "Block":
        spec = eig_hermitian(P)
        rank = int(np.sum(spec.eigenvalues > 0.5))
        if rank != left_dim * right_dim:
            raise ValueError(f"projector rank {rank} does not equal {left_dim}*{right_dim}")
        return cls(spec.eigenvectors[:, :rank], left_dim, right_dim)

    @property
    def projector(self) -> np.ndarray:
        return self.isometry @ dagger(self.isometry)


@dataclass(frozen=True)
class FactorizationResult:
    factorizes: bool
    residual: float

    def __bool__(self) -> bool:
        return self.factorizes


def _partial_traces(C: np.ndarray, l: int, r: int) -> tuple[np.ndarray, np.ndarray]:
    T = C.reshape(l, r, l, r)
    return np.einsum("ajbj->ab", T), np.einsum("iaib->ab", T)


def factorization_check(E: QuantumExperiment, blocks: Sequence[Block]) -> FactorizationResult:
    """Check ``rho_theta = (+)_i p_theta(i) rho^L_{theta,i} (x) rho^R_i``.

    The residual is the largest HS deviation among: off-block entries, the
    product form of each block, and the ``theta``-dependence of each right
    factor.

    Raises:
        ValueError: the block projectors are not orthogonal or do not sum to 1.
    """
    d = E.dim
    blocks = list(blocks)
    if not blocks:
        raise ValueError("need at least one block")
    P = [b.projector for b in blocks]
    total = sum(P)
    if not np.allclose(total, np.eye(d), atol=1e-10):
        raise ValueError("block projectors do not sum to the identity")
    for i, j in itertools.combinations(range(len(P)), 2):
        if np.linalg.norm(P[i] @ P[j]) > 1e-10:
            raise ValueError(f"blocks {i} and {j} are not orthogonal")

    res = 0.0
    rights: list[np.ndarray | None] = [None] * len(blocks)
    for k in E.params:
        R = E[k].matrix
        for i, j in itertools.permutations(range(len(P)), 2):
            res = max(res, float(np.linalg.norm(P[i] @ R @ P[j])))
        for i, b in enumerate(blocks):
            V = b.isometry
            C = dagger(V) @ R @ V
            p = np.trace(C).real
            Lf, Rf = _partial_traces(C / p, b.left_dim, b.right_dim)
            res = max(res, float(np.linalg.norm(C - p * np.kron(Lf, Rf))))
            if rights[i] is None:
                rights[i] = Rf
            else:
                res = max(res, float(np.linalg.norm(Rf - rights[i])))
    return FactorizationResult(res < tolerances.get().sufficiency, res)


# -- equivalence probing -----------------------------------------------------


@dataclass(frozen=True)
class ProbeResult:
    max_difference: float
    n_words: int

    def message(self, tol: float = 1e-10) -> str:
        if self.max_difference <= tol:
            return f"no discrepancy detected on {self.n_words} words"
        return f"discrepancy {self.max_difference:.3e} detected on {self.n_words} words"


def equivalence_probe(E: QuantumExperiment, F: QuantumExperiment, words: Sequence[GroupWord]) -> ProbeResult:
    """Largest ``|omega_E(g) - omega_F(g)|`` over the words.

    A zero difference is necessary for equivalence; on finitely many words it
    proves nothing.
    """
    if set(E.params) != set(F.params) or E.base != F.base:
        raise ValueError("probed experiments need the same parameter set and base")
    diff = max((abs(canonical_state(E, g) - canonical_state(F, g)) for g in words), default=0.0)
    return ProbeResult(float(diff), len(words))


def random_words(
    rng: np.random.Generator,
    params: Sequence[Hashable],
    count: int,
    max_len: int = 4,
    t_scale: float = 3.0,
) -> list[GroupWord]:
    """Words with uniform lengths in ``[1, max_len]`` and times in ``[-t_scale, t_scale]``."""
    params = list(params)
    out = []
    for _ in range(count):
        k = int(rng.integers(1, max_len + 1))
        letters = [
            Letter(params[int(rng.integers(len(params)))], float(rng.uniform(-t_scale, t_scale)), bool(rng.integers(2)))
            for _ in range(k)
        ]
        out.append(GroupWord(tuple(letters)))
    return out


def omega_table(E: QuantumExperiment, words: Sequence[GroupWord]) -> list[tuple[int, float, float]]:
    """Rows ``(word id, re omega, im omega)``."""
    rows = []
    for i, g in enumerate(words):
        w = canonical_state(E, g)
        rows.append((i, w.real, w.imag))
    return rows

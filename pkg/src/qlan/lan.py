"""Finite-n cocycle expectations, their Gaussian limits and convergence reports.

For ``n`` i.i.d. copies with local parameter ``theta = theta0 + u / sqrt(n)``
the tensor-power cocycles collapse: the expectation of a product of
``v_j^{(x) n}`` in ``rho^{(x) n}`` equals ``Tr(rho v_1 ... v_k) ** n``. Only
``d x d`` products are ever formed, except in :func:`tensor_oracle`, which
builds the tensor powers to check that identity.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np

from qlan.ccr import WeylWord, quasifree_eval
from qlan.classical.convergence import fit_loglog_slope
from qlan.families import QuantumFamily
from qlan.hermlin import dagger, eig_hermitian, matrix_power, matrix_power_mp
from qlan.jet import FamilyJet, limit_cocycle

__all__ = [
    "CocycleLetter",
    "CocycleWordSpec",
    "LocalFamily",
    "MP_THRESHOLD",
    "finite_n_expectation",
    "tensor_oracle",
    "limit_expectation",
    "ConvergenceReport",
    "lan_report",
    "simplified_family",
    "QubitClosedForms",
    "qubit_closed_forms",
    "DEFAULT_SCHEDULE",
]

MP_THRESHOLD = 10**6
FAITHFUL_FLOOR = 1e-8
DEFAULT_SCHEDULE = tuple(10**k for k in range(2, 11))


@dataclass(frozen=True)
class CocycleLetter:
    u: tuple[float, ...]
    t: float
    adjoint: bool = False


@dataclass(frozen=True)
class CocycleWordSpec:
    """Product of local cocycles ``C_{u_1,t_1} ... C_{u_k,t_k}``, some possibly adjoint."""

    letters: tuple[CocycleLetter, ...] = ()

    def __post_init__(self):
        out = []
        for x in self.letters:
            if not isinstance(x, CocycleLetter):
                x = CocycleLetter(*x)
            u = tuple(float(v) for v in np.atleast_1d(x.u))
            if not (all(math.isfinite(v) for v in u) and math.isfinite(x.t)):
                raise ValueError("word entries must be finite")
            out.append(CocycleLetter(u, float(x.t), bool(x.adjoint)))
        object.__setattr__(self, "letters", tuple(out))

    @classmethod
    def of(cls, *letters) -> "CocycleWordSpec":
        return cls(tuple(letters))

    def __len__(self) -> int:
        return len(self.letters)

    def reversed_adjoint(self) -> "CocycleWordSpec":
        return CocycleWordSpec(tuple(CocycleLetter(x.u, x.t, not x.adjoint) for x in reversed(self.letters)))

    def to_dict(self) -> list:
        return [{"u": list(x.u), "t": x.t, "adjoint": x.adjoint} for x in self.letters]


class LocalFamily:
    """A family with its jet, viewed through the local parameter ``u = sqrt(n)(theta - theta0)``."""

    def __init__(self, family: QuantumFamily, box: float | None = None):
        self.family = family
        self.box = box
        self._jet: FamilyJet | None = None

    @property
    def jet(self) -> FamilyJet:
        if self._jet is None:
            self._jet = FamilyJet(self.family)
        return self._jet

    @property
    def m(self) -> int:
        return self.family.m

    @property
    def dim(self) -> int:
        return self.family.dim

    def rho_local(self, u, n: int) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if self.box is not None and np.any(np.abs(u) > self.box):
            raise ValueError(f"local parameter {u.tolist()} outside the box [-{self.box}, {self.box}]")
        return self.family.rho(self.family.theta0 + u / math.sqrt(n))

    def rho_local_mp(self, u, n: int) -> mpmath.matrix:
        """``rho_{theta0 + u/sqrt(n)}`` in the current mpmath precision."""
        self.rho_local(u, n)  # box check
        s = mpmath.sqrt(n)
        theta = [mpmath.mpf(float(a)) + mpmath.mpf(float(b)) / s for a, b in zip(self.family.theta0, np.atleast_1d(u))]
        return self.family.rho_mp(theta)

    def _min_eig(self, us, n: int) -> float:
        return min(eig_hermitian(self.rho_local(u, n)).eigenvalues[-1] for u in us)

    def n_min(self, us, limit: int = 10**15) -> int:
        """Smallest ``n`` with every ``rho_{theta0 + u/sqrt(n)}`` above the faithfulness floor.

        Assumes the minimum eigenvalue is monotone in ``n`` past the first
        faithful point, which holds near a faithful ``rho_{theta0}``.
        """
        us = [np.asarray(u, dtype=float) for u in us] or [np.zeros(self.m)]
        ok = lambda n: self._min_eig(us, n) > FAITHFUL_FLOOR
        if ok(1):
            return 1
        hi = 2
        while not ok(hi):
            hi *= 2
            if hi > limit:
                raise ValueError("family is not faithful near theta0 for these local parameters")
        lo = hi // 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            lo, hi = (lo, mid) if ok(mid) else (mid, hi)
        return hi

    def check_n(self, w: CocycleWordSpec, n: int, base_u=None) -> None:
        us = [x.u for x in w.letters] + ([base_u] if base_u is not None else [])
        if us and self._min_eig(us, n) <= FAITHFUL_FLOOR:
            raise ValueError(f"n={n} is below the faithfulness threshold n_min={self.n_min(us)}")


def _letter_matrix(L: LocalFamily, x: CocycleLetter, n: int, R0) -> np.ndarray:
    C = matrix_power(L.rho_local(x.u, n), 1j * x.t) @ matrix_power(R0, -1j * x.t)
    return dagger(C) if x.adjoint else C


def _expectation_mp(L: LocalFamily, w: CocycleWordSpec, n: int, base_u, dps: int) -> complex:
    with mpmath.workdps(dps):
        d = L.dim
        R0 = L.family.rho_mp(L.family.theta0)
        W = mpmath.eye(d)
        for x in w.letters:
            C = matrix_power_mp(L.rho_local_mp(x.u, n), 1j * x.t, dps) * matrix_power_mp(R0, -1j * x.t, dps)
            W = W * (C.transpose_conj() if x.adjoint else C)
        B = R0 if base_u is None else L.rho_local_mp(base_u, n)
        z = sum((B * W)[i, i] for i in range(d))
        if z == 0:
            return 0j
        return complex(mpmath.exp(n * mpmath.log(z)))


def finite_n_expectation(
    L: LocalFamily,
    w: CocycleWordSpec,
    n: int,
    base_u=None,
    precision: str = "auto",
    dps: int = 40,
) -> complex:
    """``[Tr(rho_base w_1 ... w_k)] ** n`` with ``w_j = rho_{u_j}^{i t_j} rho^{-i t_j}``.

    ``rho_base`` is ``rho_{theta0}``, or ``rho_{theta0 + base_u / sqrt(n)}``
    when ``base_u`` is given. ``precision`` is ``"double"``, ``"mp"`` or
    ``"auto"`` (extended precision above ``MP_THRESHOLD``); in double
    precision the rounding of ``z`` is amplified ``n``-fold by the power.
    The extended path also evaluates the family itself in mpmath when it
    provides an evaluator, as all built-in families do.

    Raises:
        ValueError: ``n`` is below the faithfulness threshold of the word.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be a positive integer")
    if not w.letters:
        return 1.0 + 0j
    if precision not in ("auto", "double", "mp"):
        raise ValueError(f"unknown precision {precision!r}")
    L.check_n(w, n, base_u)
    if precision == "mp" or (precision == "auto" and n > MP_THRESHOLD):
        return _expectation_mp(L, w, n, base_u, dps)
    R0 = L.family.rho(L.family.theta0)
    Rb = R0 if base_u is None else L.rho_local(base_u, n)
    W = np.eye(L.dim, dtype=complex)
    for x in w.letters:
        W = W @ _letter_matrix(L, x, n, R0)
    z = complex(np.einsum("ij,ji->", Rb, W))
    if z == 0:
        return 0j
    # integer power, computed as exp(n ln|z|) e^{i n arg z}
    return complex(np.exp(n * math.log(abs(z))) * np.exp(1j * ((n * math.atan2(z.imag, z.real)) % (2 * math.pi))))


def _kron_power(A: np.ndarray, n: int) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for _ in range(n):
        out = np.kron(out, A)
    return out


def tensor_oracle(L: LocalFamily, w: CocycleWordSpec, n: int, base_u=None) -> complex:
    """The same expectation from explicit ``d**n``-dimensional tensor powers.

    Raises:
        ValueError: ``n > 3`` or ``d**n > 64``.
    """
    d = L.dim
    if n < 1 or n > 3 or d**n > 64:
        raise ValueError(f"tensor oracle limited to n <= 3 and d**n <= 64 (d={d}, n={n})")
    R0n = _kron_power(L.family.rho(L.family.theta0), n)
    Rbn = R0n if base_u is None else _kron_power(L.rho_local(base_u, n), n)
    W = np.eye(d**n, dtype=complex)
    for x in w.letters:
        Rn = _kron_power(L.rho_local(x.u, n), n)
        C = matrix_power(Rn, 1j * x.t) @ matrix_power(R0n, -1j * x.t)
        W = W @ (dagger(C) if x.adjoint else C)
    return complex(np.einsum("ij,ji->", Rbn, W))


def limit_weyl_word(L: LocalFamily, w: CocycleWordSpec) -> WeylWord:
    word = WeylWord()
    for x in w.letters:
        V = limit_cocycle(L.jet, x.u, x.t)
        word = word * (V.adjoint() if x.adjoint else V)
    return word


def limit_expectation(L: LocalFamily, w: CocycleWordSpec, base_u=None) -> complex:
    """``phi(V_1 ... V_k)``, or ``phi^{base_u}`` of the same word."""
    J = L.jet
    shift = None if base_u is None else J.L_u(base_u)
    return complex(quasifree_eval(J.space, limit_weyl_word(L, w), shift))


@dataclass
class ConvergenceReport:
    ns: tuple[int, ...]
    values: np.ndarray
    limit: complex
    gaps: np.ndarray
    slope: float
    monotone: bool
    final_gap_ok: bool
    burn_in: int
    threshold: float
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.monotone and self.final_gap_ok

    def rows(self) -> list[tuple]:
        return [(n, v.real, v.imag, g) for n, v, g in zip(self.ns, self.values, self.gaps)]

    header = ("n", "re", "im", "gap")

    def to_json(self) -> dict:
        return {
            "ns": list(self.ns),
            "re": [v.real for v in self.values],
            "im": [v.imag for v in self.values],
            "limit": [self.limit.real, self.limit.imag],
            "gaps": self.gaps.tolist(),
            "slope": None if math.isnan(self.slope) else self.slope,
            "monotone": self.monotone,
            "final_gap_ok": self.final_gap_ok,
            "passed": self.passed,
            "burn_in": self.burn_in,
            "threshold": self.threshold,
            "meta": self.meta,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def lan_report(
    L: LocalFamily,
    w: CocycleWordSpec,
    schedule: Sequence[int] = DEFAULT_SCHEDULE,
    base_u=None,
    burn_in: int = 10**4,
    threshold: float = 1e-3,
    workers: int = 1,
) -> ConvergenceReport:
    """Gaps ``|E^(n) - limit|`` along ``schedule`` with a log-log slope.

    Passes when gaps strictly decrease for ``n >= burn_in`` and the last gap
    is below ``threshold``. An identically zero gap sequence also passes.
    """
    ns = tuple(int(n) for n in schedule)
    if any(b <= a for a, b in zip(ns, ns[1:])) or not ns:
        raise ValueError("schedule must be nonempty and strictly increasing")
    lim = limit_expectation(L, w, base_u)
    f = lambda n: finite_n_expectation(L, w, n, base_u)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            vals = list(ex.map(f, ns))
    else:
        vals = [f(n) for n in ns]
    values = np.array(vals, dtype=complex)
    gaps = np.abs(values - lim)
    tail = gaps[np.array(ns) >= burn_in]
    zero = np.all(gaps == 0)
    mono = bool(zero or np.all(np.diff(tail) < 0))
    return ConvergenceReport(
        ns, values, lim, gaps, fit_loglog_slope(np.array(ns, dtype=float), gaps),
        mono, bool(gaps[-1] < threshold), burn_in, threshold,
        {"family": L.family.name, "word": w.to_dict(), "base_u": None if base_u is None else list(map(float, base_u))},
    )


def simplified_family(L: LocalFamily) -> LocalFamily:
    """``rho~_a = e^{i a.H} tau_{theta0 + a} e^{-i a.H}``.

    ``tau_theta`` keeps the eigenvectors of ``rho_{theta0}`` and takes the
    eigenvalues of ``rho_theta`` in descending order, so it assumes the
    ordering is stable near ``theta0``.
    """
    fam = L.family
    J = L.jet
    U0 = J._U
    Hs = np.array(J.H)
    theta0 = fam.theta0

    def fn(theta):
        a = np.asarray(theta) - theta0
        lam = eig_hermitian(fam.rho(theta)).eigenvalues
        tau = (U0 * lam) @ dagger(U0)
        X = np.einsum("k,kij->ij", a, Hs)
        V = eig_hermitian(0.5 * (X + dagger(X))).apply(lambda x: np.exp(1j * x))
        return V @ tau @ dagger(V)

    simple = QuantumFamily(fn, theta0, generators=tuple(J.H), name=f"simplified-{fam.name}")
    return LocalFamily(simple, L.box)


@dataclass(frozen=True)
class QubitClosedForms:
    r: float
    u: tuple[float, float, float]
    fisher_classical: float
    limit_mean: float
    wigner_center: tuple[float, float]
    commutator_scale: float
    pipeline: dict

    def to_json(self) -> dict:
        return {
            "r": self.r,
            "u": list(self.u),
            "I_c": self.fisher_classical,
            "classical_limit": {"mean": self.limit_mean, "variance": self.fisher_classical},
            "wigner_center": list(self.wigner_center),
            "commutator_scale": self.commutator_scale,
            "pipeline": self.pipeline,
        }


def qubit_closed_forms(r: float, u=(0.0, 0.0, 0.0)) -> QubitClosedForms:
    """Closed forms for ``rho = (1 + (r e_z + u) . sigma) / 2`` next to the generic pipeline.

    The limit splits into a classical ``N(I_c a, I_c)`` factor and a displaced
    thermal state with Wigner center ``(rx, ry) / sqrt(2 r)``.
    """
    from qlan.families import SX, SY, SZ, qubit_family

    if not 0 < r < 1:
        raise ValueError(f"need 0 < r < 1, got {r}")
    rx, ry, a = (float(v) for v in u)
    Ic = 1.0 / (1.0 - r * r)
    s = math.sqrt(2 * r)
    J = FamilyJet(qubit_family(r))
    Pp, Pm = (np.eye(2) + SZ) / 2, (np.eye(2) - SZ) / 2
    la_closed = Pp / (1 + r) - Pm / (1 - r)
    pipeline = {
        "I_c": J.space.alpha(J.l[2], J.l[2]),
        "minus_phi_h_aa": -J.phi(J.h([0, 0, 1])).real,
        "l_a_residual": float(np.abs(J.l[2] - la_closed).max()),
        "sigma_sy_sx": J.space.sigma(SY, SX),
        "k_dim": None,
        "limit_mean": J.space.alpha(J.l[2], J.L_u([rx, ry, a])),
    }
    from qlan.jet import k_subspace

    pipeline["k_dim"] = k_subspace(J).dim
    return QubitClosedForms(r, (rx, ry, a), Ic, Ic * a, (rx / s, ry / s), r, pipeline)

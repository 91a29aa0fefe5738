"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py`` or ``python tests/test_acceptance.py``.
"""

import itertools
import math
import sys
import time

import numpy as np
import pytest

from qlan.classical import (
    ClassicalExperiment,
    binomial_experiment,
    classical_characteristic,
    deficiency_lp,
    poisson_limit_hellinger,
    softmax_family,
    weak_convergence_report,
)
from qlan.families import SY, polynomial_family, qubit_family, rotation_family
from qlan.hermlin import dagger, random_density, random_hermitian
from qlan.jet import field_information, k_subspace, log_derivative_F, quantum_fisher
from qlan.lan import (
    CocycleLetter,
    CocycleWordSpec,
    LocalFamily,
    finite_n_expectation,
    lan_report,
    limit_expectation,
    qubit_closed_forms,
    simplified_family,
    tensor_oracle,
)
from qlan.quantum import (
    QuantumExperiment,
    canonical_state,
    connes_cocycle,
    mix_experiments,
    modular_orbit,
    random_words,
)

SEED = 20240611
QUBIT_WORDS = [
    CocycleWordSpec.of(((1.0, 0.5, 0.3), 1.0)),
    CocycleWordSpec.of(((1.0, 0.5, 0.3), 1.0), ((-0.4, 0.8, 0.2), -0.7)),
    CocycleWordSpec.of(((1.0, 0.5, 0.3), 1.0), ((-0.4, 0.8, 0.2), -0.7, True), ((0.3, -0.2, 0.5), 1.5)),
]


@pytest.fixture
def say(capsys):
    """Print one criterion line past pytest's capture, then assert it."""

    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}")
        assert ok, detail

    return emit


def traceless(X):
    return X - np.trace(X) / X.shape[0] * np.eye(X.shape[0])


def random_local_family(g, d):
    R = random_density(g, d, 0.15)
    D = [traceless(random_hermitian(g, d, 0.3)) for _ in range(2)]
    return LocalFamily(polynomial_family(R, D))


def random_word(g, m, scale):
    k = int(g.integers(1, 4))
    return CocycleWordSpec(tuple(
        CocycleLetter(tuple(g.uniform(-scale, scale, m)), float(g.uniform(-2, 2)), bool(g.integers(2)))
        for _ in range(k)))


def test_collapse_identity(say):
    g = np.random.default_rng(SEED)
    start = time.perf_counter()
    worst, count = 0.0, 0
    for i in range(50):
        L = random_local_family(g, 2) if i % 2 else LocalFamily(qubit_family(float(g.uniform(0.2, 0.8))))
        w = random_word(g, L.family.m, 0.2)
        for n in (1, 2, 3):
            worst = max(worst, abs(finite_n_expectation(L, w, n) - tensor_oracle(L, w, n)))
            count += 1
    for _ in range(10):
        L = random_local_family(g, 3)
        w = random_word(g, 2, 0.2)
        worst = max(worst, abs(finite_n_expectation(L, w, 2) - tensor_oracle(L, w, 2)))
        count += 1
    elapsed = time.perf_counter() - start
    say(1, "collapse identity vs tensor oracle", worst < 1e-12 and elapsed < 5,
        f"max diff {worst:.2e} over {count} evaluations in {elapsed:.2f} s")


def test_quantum_convergence(say):
    L = LocalFamily(qubit_family(0.5))
    details, ok = [], True
    for k, w in enumerate(QUBIT_WORDS):
        start = time.perf_counter()
        rep = lan_report(L, w)
        elapsed = time.perf_counter() - start
        gap8 = float(rep.gaps[list(rep.ns).index(10**8)])
        good = rep.monotone and gap8 < 1e-3 and -0.65 <= rep.slope <= -0.35 and elapsed < 1
        ok &= good
        details.append(f"word {k}: gap(1e8) {gap8:.1e}, slope {rep.slope:.3f}, {elapsed:.2f} s")
    say(2, "qubit finite-n convergence", ok, "; ".join(details))


def test_unitary_closed_form(say):
    r = 0.5
    p, q = (1 + r) / 2, (1 - r) / 2
    lam = math.log(p / q)
    L = LocalFamily(rotation_family(np.diag([p, q]), [SY / 2]))
    worst = 0.0
    for u, t in itertools.product(np.linspace(-1.5, 1.5, 5), np.linspace(-2.0, 2.0, 5)):
        # H = sy/2 has phi(H) = 0; sigma_t multiplies its off-diagonal by e^{i lam t}
        expected = complex(np.exp(-u * u * (1 - math.cos(lam * t)) / 4 - 1j * u * u * r * math.sin(lam * t) / 4))
        got = limit_expectation(L, CocycleWordSpec.of(((u,), t)))
        worst = max(worst, abs(got - expected))
    say(3, "unitary family limit closed form", worst < 1e-10, f"max diff {worst:.2e} on a 5x5 grid")


def test_classical_convergence(say):
    ns = [10, 100, 1000, 10_000]
    table = weak_convergence_report(lambda n: binomial_experiment(n, (1.0, 2.0)),
                                    lambda z: poisson_limit_hellinger((1.0, 2.0), z), [[0.5, 0.5]], ns)
    gaps = table.gaps[:, 0]
    ok1 = bool(np.all(np.diff(gaps) < 0) and gaps[-1] < 1e-3)
    fam = softmax_family([0.0, 0.3, -0.2], [[1.0, -0.5, 0.2], [0.0, 0.7, -1.1]])
    shifts = [[0.0, 0.0], [1.0, -0.5], [-0.3, 0.8]]
    z_grid = [[1 / 3] * 3, [0.5, 0.5, 0.0], [0.2, 0.3, 0.5]]
    prod = weak_convergence_report(lambda n: fam.local_experiment(shifts, n),
                                   lambda z: fam.limit_hellinger(shifts, z), z_grid, [10**k for k in range(2, 7)])
    g6 = float(prod.gaps[-1].max())
    say(4, "classical convergence", ok1 and g6 < 1e-3,
        f"binomial-Poisson gap(1e4) {gaps[-1]:.2e}, monotone {ok1}; product family gap(1e6) {g6:.2e}")


def exhaustive_2x2(P1, P2, steps=1001):
    grid = np.linspace(0, 1, steps)
    a, b = np.meshgrid(grid, grid, indexing="ij")
    best = np.full(a.shape, 0.0)
    for th in range(P1.shape[0]):
        # output law of a 2x2 kernel [[a, 1-a], [b, 1-b]]
        q0 = P1[th, 0] * a + P1[th, 1] * b
        tv = np.abs(q0 - P2[th, 0])
        best = np.maximum(best, tv)
    return float(best.min())


def test_deficiency(say):
    g = np.random.default_rng(SEED)
    E = ClassicalExperiment(g.dirichlet(np.ones(4), size=3))
    self_delta = deficiency_lp(E, E).delta
    M = g.dirichlet(np.ones(3), size=4)
    garbled = deficiency_lp(E, ClassicalExperiment(E.probs @ M)).delta
    noisy = ClassicalExperiment([[0.9, 0.1], [0.1, 0.9]])
    clean = ClassicalExperiment([[1.0, 0.0], [0.0, 1.0]], strict=False)
    delta = deficiency_lp(noisy, clean).delta
    grid = exhaustive_2x2(noisy.probs, clean.probs)
    ok = self_delta <= 1e-9 and garbled <= 1e-7 and abs(delta - 0.1) <= 1e-6 and abs(grid - delta) <= 1e-4
    say(5, "deficiency LP", ok,
        f"self {self_delta:.1e}, garbled {garbled:.1e}, binary {delta:.6f} (grid {grid:.6f})")


def test_qubit_closed_forms(say):
    worst_ic, worst_sigma, dims = 0.0, 0.0, set()
    for r in (0.1, 0.3, 0.5, 0.7, 0.9):
        q = qubit_closed_forms(r)
        worst_ic = max(worst_ic, abs(q.pipeline["I_c"] - 1 / (1 - r * r)))
        worst_sigma = max(worst_sigma, abs(q.pipeline["sigma_sy_sx"] - r))
        dims.add(q.pipeline["k_dim"])
    ok = worst_ic < 1e-9 and worst_sigma < 1e-12 and dims == {3}
    say(6, "qubit closed forms", ok, f"I_c err {worst_ic:.1e}, sigma err {worst_sigma:.1e}, K dims {sorted(dims)}")


def test_cocycle_algebra(say):
    g = np.random.default_rng(SEED)
    cond = inter = chain = 0.0
    for i in range(100):
        d = (2, 3, 4)[i % 3]
        states = {k: random_density(g, d, 0.05) for k in range(3)}
        E = QuantumExperiment(states, base=0)
        E2 = QuantumExperiment(states, base=2)
        s, t = g.uniform(-3, 3, 2)
        th = int(g.integers(1, 3))
        u = lambda x: connes_cocycle(E, th, x)
        # u_{s+t} = u_s sigma_s(u_t)
        cond = max(cond, np.abs(u(s + t) - u(s) @ modular_orbit(E.rho, u(t), s)).max())
        A = random_hermitian(g, d)
        lhs = modular_orbit(E[th], A, t)
        inter = max(inter, np.abs(lhs - u(t) @ modular_orbit(E.rho, A, t) @ dagger(u(t))).max())
        # [D1 : D0] = [D1 : D2] [D2 : D0]
        via = connes_cocycle(E2, 1, t) @ connes_cocycle(E, 2, t)
        chain = max(chain, np.abs(connes_cocycle(E, 1, t) - via).max())
    ok = max(cond, inter, chain) < 1e-10
    say(7, "cocycle algebra", ok, f"cocycle {cond:.1e}, intertwining {inter:.1e}, chain rule {chain:.1e}")


def test_canonical_state(say):
    g = np.random.default_rng(SEED)
    E = QuantumExperiment({k: random_density(g, 3, 0.08) for k in range(3)})
    unit = canonical_state(E, E.word())
    words = random_words(g, E.params, 20)
    G = np.array([[canonical_state(E, a.inverse() * b) for b in words] for a in words])
    min_eig = float(np.linalg.eigvalsh(0.5 * (G + dagger(G))).min())
    inv = max(abs(canonical_state(E, w.modular_shift(float(g.uniform(-3, 3)))) - canonical_state(E, w)) for w in words)
    F = QuantumExperiment({k: random_density(g, 3, 0.08) for k in range(3)})
    M = mix_experiments(E, F, 0.3)
    lin = max(abs(canonical_state(M, w) - 0.3 * canonical_state(E, w) - 0.7 * canonical_state(F, w)) for w in words)
    ok = unit == 1 and min_eig >= -1e-10 and inv < 1e-10 and lin < 1e-12
    say(8, "canonical state", ok, f"omega(e) = {unit}, Gram min eig {min_eig:.2e}, modular {inv:.1e}, mixture {lin:.1e}")


def test_commutative_consistency(say):
    g = np.random.default_rng(SEED)
    P = g.dirichlet(np.ones(4), size=3)
    E = QuantumExperiment({k: np.diag(P[k]) for k in range(3)})
    C = ClassicalExperiment(P)
    worst = 0.0
    for w in random_words(g, E.params, 20):
        letters = [(x.theta, x.t, x.inverse) for x in w]
        worst = max(worst, abs(canonical_state(E, w) - classical_characteristic(C, letters, base=0)))
    say(9, "commutative consistency", worst < 1e-12, f"max diff {worst:.1e} on 20 words")


def test_derivative_memberships(say):
    g = np.random.default_rng(SEED)
    L = random_local_family(g, 3)
    J = L.jet
    K = k_subspace(J)
    alphas = g.uniform(-1, 1, 2)
    # power means are operator monotone for |alpha| <= 1
    power_mean = lambda a: (lambda x: ((1 + np.asarray(x) ** a) / 2) ** (1 / a))
    members = list(J.sld) + list(log_derivative_F(J, "bkm"))
    for a in alphas:
        members += list(log_derivative_F(J, power_mean(a)))
    res = max(K.residual(X) for X in members)
    u = np.array([0.4, -1.1])
    Lu = J.L_u(u)
    R = J.rho.matrix
    top = field_information(R, Lu, Lu)
    best = max(field_information(R, sum(g.normal() * b for b in K.basis), Lu) for _ in range(100))
    attained = abs(top - quantum_fisher(R, Lu)) <= 1e-6 * top and best <= top * (1 + 1e-6)
    ok = res < 1e-8 and attained
    say(10, "derivative memberships", ok,
        f"K residual {res:.1e} (alphas {alphas.round(3).tolist()}), random max/top {best / top:.6f}")


def test_simplified_family(say):
    L = LocalFamily(qubit_family(0.5))
    S = simplified_family(L)
    diffs = [abs(finite_n_expectation(L, w, 10**6) - finite_n_expectation(S, w, 10**6)) for w in QUBIT_WORDS]
    say(11, "simplified family agreement", max(diffs) < 1e-3, "n=1e6 diffs " + ", ".join(f"{d:.1e}" for d in diffs))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from qlan.classical import (
    ClassicalExperiment,
    binomial_experiment,
    binomial_hellinger,
    canonical_measure,
    classical_characteristic,
    gaussian_shift_hellinger,
    hellinger_distance,
    hellinger_transform,
    poisson_experiment,
    poisson_limit_hellinger,
    softmax_family,
    weak_convergence_report,
)
from qlan.classical.convergence import fit_loglog_slope

PAIR = np.array([[0.5, 0.5], [0.7, 0.3]])


def random_experiment(g, p, k):
    return ClassicalExperiment(g.dirichlet(np.ones(k), size=p))


class TestClassicalExperiment:
    def test_rejects_bad_rows(self):
        with pytest.raises(ValueError):
            ClassicalExperiment([[0.5, 0.6], [0.5, 0.5]])
        with pytest.raises(ValueError):
            ClassicalExperiment([[-0.1, 1.1], [0.5, 0.5]])

    def test_rejects_non_equivalent(self):
        with pytest.raises(ValueError, match="absolutely continuous"):
            ClassicalExperiment([[1.0, 0.0], [0.5, 0.5]])

    def test_common_null_outcomes_dropped(self):
        E = ClassicalExperiment([[0.5, 0.0, 0.5], [0.2, 0.0, 0.8]])
        assert E.n_outcomes == 2


class TestCanonicalMeasure:
    def test_identical_laws(self):
        cm = canonical_measure(ClassicalExperiment([[0.5, 0.5], [0.5, 0.5]]))
        np.testing.assert_allclose(cm.points, [[0.5, 0.5]])
        np.testing.assert_allclose(cm.masses, [2.0])

    def test_disjoint_supports(self):
        cm = canonical_measure(ClassicalExperiment([[1, 0], [0, 1]], strict=False))
        np.testing.assert_allclose(cm.points, [[0, 1], [1, 0]])
        np.testing.assert_allclose(cm.masses, [1, 1])

    def test_direct_arithmetic(self):
        cm = canonical_measure(ClassicalExperiment(PAIR))
        np.testing.assert_allclose(cm.points, [[5 / 12, 7 / 12], [5 / 8, 3 / 8]], atol=1e-15)
        np.testing.assert_allclose(cm.masses, [1.2, 0.8], atol=1e-15)
        assert cm.total_mass == pytest.approx(2.0, abs=1e-12)

    def test_equivalent_experiments_share_measure(self, rng):
        E = random_experiment(rng, 3, 4)
        # permute outcomes and split one outcome into two proportional pieces
        P = E.probs[:, [2, 0, 3, 1]]
        split = np.concatenate([P[:, :1] * 0.3, P[:, :1] * 0.7, P[:, 1:]], axis=1)
        assert canonical_measure(E).allclose(canonical_measure(ClassicalExperiment(split)))

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), p=st.integers(2, 4), k=st.integers(1, 6))
    def test_hellinger_via_atoms(self, seed, p, k):
        g = np.random.default_rng(seed)
        E = random_experiment(g, p, k)
        z = g.dirichlet(np.ones(p))
        cm = canonical_measure(E)
        assert abs(cm.total_mass - p) < 1e-10
        assert abs(cm.hellinger(z) - hellinger_transform(E, z)) < 1e-12
        direct = sum(np.prod(E.probs[:, w] ** z) for w in range(E.n_outcomes))
        assert abs(direct - hellinger_transform(E, z)) < 1e-12
        assert -1e-15 <= hellinger_transform(E, z) <= 1 + 1e-12


class TestHellinger:
    def test_identical_rows(self):
        E = ClassicalExperiment([[0.2, 0.8], [0.2, 0.8], [0.2, 0.8]])
        for z in ([1 / 3] * 3, [1, 0, 0], [0.2, 0.5, 0.3]):
            assert hellinger_transform(E, z) == pytest.approx(1.0, abs=1e-14)

    def test_affinity(self):
        expected = math.sqrt(0.35) + math.sqrt(0.15)
        assert hellinger_transform(ClassicalExperiment(PAIR), [0.5, 0.5]) == pytest.approx(expected, abs=1e-15)
        assert expected == pytest.approx(0.978906, abs=1e-6)

    def test_rejects_non_simplex(self):
        with pytest.raises(ValueError):
            hellinger_transform(ClassicalExperiment(PAIR), [0.6, 0.6])

    def test_distance(self):
        assert hellinger_distance([0.3, 0.7], [0.3, 0.7]) == 0
        assert hellinger_distance([1, 0], [0, 1]) == pytest.approx(2.0)
        affinity = math.sqrt(0.35) + math.sqrt(0.15)
        assert hellinger_distance(*PAIR) == pytest.approx(2 * (1 - affinity), abs=1e-12)
        assert 2 * (1 - affinity) == pytest.approx(0.042187, abs=1e-6)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 8))
    def test_distance_identity(self, seed, k):
        g = np.random.default_rng(seed)
        p1, p2 = g.dirichlet(np.ones(k)), g.dirichlet(np.ones(k))
        eta = hellinger_transform(ClassicalExperiment(np.array([p1, p2])), [0.5, 0.5])
        assert abs(hellinger_distance(p1, p2) - 2 * (1 - eta)) < 1e-12

    def test_product_multiplicative(self, rng):
        E, F = random_experiment(rng, 3, 3), random_experiment(rng, 3, 4)
        z = [0.2, 0.3, 0.5]
        EF = E.product(F)
        assert EF.n_outcomes == 12
        assert hellinger_transform(EF, z) == pytest.approx(
            hellinger_transform(E, z) * hellinger_transform(F, z), abs=1e-12)
        assert hellinger_transform(E.power(3), z) == pytest.approx(
            hellinger_transform(E.product(E).product(E), z), abs=1e-12)


class TestBinomialPoisson:
    def test_small_rows(self):
        np.testing.assert_allclose(binomial_experiment(1, [0.5]).probs, [[0.5, 0.5]])
        np.testing.assert_allclose(binomial_experiment(2, [1]).probs, [[0.25, 0.5, 0.25]])

    def test_rejects_theta_ge_n(self):
        with pytest.raises(ValueError):
            binomial_experiment(2, [2.0])

    def test_closed_form_n4(self):
        # direct pmf sum, independent of the experiment machinery
        n, th = 4, (1.0, 2.0)
        direct = sum(
            math.sqrt(math.comb(n, k) * 0.25**k * 0.75 ** (n - k) * math.comb(n, k) * 0.5**n)
            for k in range(n + 1)
        )
        assert binomial_hellinger(n, th, [0.5, 0.5]) == pytest.approx(direct, abs=1e-14)
        assert hellinger_transform(binomial_experiment(n, th), [0.5, 0.5]) == pytest.approx(direct, abs=1e-14)
        assert direct == pytest.approx((math.sqrt(0.125) + math.sqrt(0.375)) ** 4, abs=1e-14)

    def test_poisson_closed_form(self):
        assert poisson_limit_hellinger([1.5, 1.5], [0.3, 0.7]) == pytest.approx(1.0, abs=1e-15)
        assert poisson_limit_hellinger([1, 2], [0.5, 0.5]) == pytest.approx(
            math.exp(math.sqrt(2) - 1.5), abs=1e-15)
        assert math.exp(math.sqrt(2) - 1.5) == pytest.approx(0.91779, abs=1e-5)

    @pytest.mark.parametrize("z", [[0.5, 0.5], [0.2, 0.8], [0.9, 0.1]])
    def test_poisson_truncated_oracle(self, z):
        th = (1.0, 2.0)
        truncated = sum(
            math.prod((math.exp(-t) * t**k / math.factorial(k)) ** w for t, w in zip(th, z))
            for k in range(61)
        )
        assert poisson_limit_hellinger(th, z) == pytest.approx(truncated, abs=1e-6)
        E, K = poisson_experiment(th)
        assert K < 60
        assert hellinger_transform(E, z) == pytest.approx(truncated, abs=1e-12)

    def test_binomial_to_poisson(self):
        z = [0.5, 0.5]
        ns = [10, 100, 1000, 10_000]
        table = weak_convergence_report(
            lambda n: binomial_experiment(n, (1.0, 2.0)),
            lambda zz: poisson_limit_hellinger((1.0, 2.0), zz),
            [z], ns)
        gaps = table.gaps[:, 0]
        assert np.all(np.diff(gaps) < 0)
        assert gaps[-1] < 1e-3
        # closed form agrees with the outcome-level sum
        assert table.eta_n[-1, 0] == pytest.approx(binomial_hellinger(10_000, (1, 2), z), abs=1e-12)

    def test_constant_sequence(self):
        E = ClassicalExperiment(PAIR)
        table = weak_convergence_report(lambda n: E, lambda z: hellinger_transform(E, z),
                                        [[0.5, 0.5], [0.1, 0.9]], [1, 2, 3])
        assert np.all(table.gaps == 0)

    def test_workers_do_not_change_result(self):
        args = (lambda n: binomial_experiment(n, (1.0, 2.0)),
                lambda zz: poisson_limit_hellinger((1.0, 2.0), zz),
                [[0.5, 0.5], [0.3, 0.7]], [10, 100, 1000])
        a = weak_convergence_report(*args)
        b = weak_convergence_report(*args, workers=3)
        np.testing.assert_array_equal(a.eta_n, b.eta_n)


class TestGaussianShift:
    def test_vertex(self):
        assert gaussian_shift_hellinger([[0.0], [1.0]], [[2.0]], [1, 0]) == pytest.approx(1.0)

    def test_equal_shifts(self):
        assert gaussian_shift_hellinger([[0.3, 1], [0.3, 1]], np.eye(2), [0.4, 0.6]) == pytest.approx(1.0)

    @pytest.mark.parametrize("I,u", [(1.0, 1.0), (4 / 3, 0.7), (0.5, 2.0)])
    def test_affinity_quadrature(self, I, u):
        sd = 1 / math.sqrt(I)

        def pdf(x, m):
            return math.exp(-0.5 * ((x - m) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))

        val, _ = integrate.quad(lambda x: math.sqrt(pdf(x, 0) * pdf(x, u)), -40, 40, points=[0, u])
        assert gaussian_shift_hellinger([[0.0], [u]], [[I]], [0.5, 0.5]) == pytest.approx(val, abs=1e-10)
        assert val == pytest.approx(math.exp(-I * u * u / 8), abs=1e-10)

    def test_singular_fisher(self):
        with pytest.raises(np.linalg.LinAlgError):
            gaussian_shift_hellinger([[0, 0], [1, 1]], np.ones((2, 2)), [0.5, 0.5])

    def test_classical_lan(self):
        fam = softmax_family([0.0, 0.3, -0.2], [[1.0, -0.5, 0.2], [0.0, 0.7, -1.1]])
        # analytic Fisher matches the finite-difference score oracle
        from qlan.classical import LocalClassicalFamily

        fd = LocalClassicalFamily(fam.prob, fam.theta0).fisher()
        np.testing.assert_allclose(fam.fisher(), fd, atol=1e-9)
        shifts = [[0.0, 0.0], [1.0, -0.5], [-0.3, 0.8]]
        z_grid = [[1 / 3] * 3, [0.5, 0.5, 0.0], [0.2, 0.3, 0.5]]
        ns = [10**k for k in range(2, 7)]
        table = weak_convergence_report(lambda n: fam.local_experiment(shifts, n),
                                        lambda z: fam.limit_hellinger(shifts, z), z_grid, ns)
        assert np.all(table.gaps[-1] < 1e-3)
        for j in range(len(z_grid)):
            assert table.monotone(j)


class TestCharacteristic:
    def test_empty_word_is_one(self):
        assert classical_characteristic(ClassicalExperiment(PAIR), []) == 1

    def test_single_letter(self):
        E = ClassicalExperiment([[0.5, 0.5], [0.7, 0.3]])
        val = classical_characteristic(E, [(1, 1.0, False)])
        assert val == pytest.approx(0.5 * np.exp(1j * np.log(1.4)) + 0.5 * np.exp(1j * np.log(0.6)))


def test_slope_fit():
    ns = np.array([1e2, 1e3, 1e4, 1e5])
    assert fit_loglog_slope(ns, 3 * ns**-0.5) == pytest.approx(-0.5)
    assert fit_loglog_slope(ns, [1e-3, 1e-4, 1e-14, 1e-15]) == pytest.approx(-1.0)
    assert math.isnan(fit_loglog_slope(ns, np.zeros(4)))

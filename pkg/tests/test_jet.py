import cmath

import numpy as np
import pytest
from scipy.linalg import expm, logm

from qlan.ccr import WeylWord, quasifree_eval, split_commutant
from qlan.families import (
    SX,
    SY,
    SZ,
    callable_family,
    diagonal_family,
    polynomial_family,
    qubit_family,
    rotation_family,
)
from qlan.hermlin import commutator, dagger, jordan, random_density, random_hermitian
from qlan.jet import (
    FamilyJet,
    chebyshev_grid,
    field_information,
    k_subspace,
    limit_cocycle,
    log_derivative_F,
    quantum_fisher,
    sld,
)


def traceless(X):
    return X - np.trace(X) / X.shape[0] * np.eye(X.shape[0])


def random_poly_family(g, d, m=2, scale=0.3):
    R = random_density(g, d, 0.12)
    D = [traceless(random_hermitian(g, d, scale)) for _ in range(m)]
    Q = np.zeros((m, m, d, d), dtype=complex)
    for k in range(m):
        for l in range(k, m):
            Q[k, l] = Q[l, k] = traceless(random_hermitian(g, d, scale))
    return polynomial_family(R, D, Q)


def eig_sorted(M):
    w, V = np.linalg.eigh(M)
    return w[::-1], V[:, ::-1]


class TestFamilies:
    def test_qubit_values(self):
        f = qubit_family(0.5)
        np.testing.assert_allclose(f.rho([0.2, -0.1, 0.1]), (np.eye(2) + 0.2 * SX - 0.1 * SY + 0.6 * SZ) / 2)
        with pytest.raises(ValueError):
            qubit_family(1.0)

    def test_polynomial_validation(self, rng):
        R = random_density(rng, 2)
        with pytest.raises(ValueError, match="traceless"):
            polynomial_family(R, [np.eye(2)])
        with pytest.raises(ValueError, match="Hermitian"):
            polynomial_family(R, [np.array([[0, 1], [0, 0]])])
        with pytest.raises(ValueError):
            polynomial_family(R, [])

    def test_rotation_derivatives_match_fd(self, rng):
        f = rotation_family(random_density(rng, 3), [random_hermitian(rng, 3), random_hermitian(rng, 3)])
        fd = callable_family(f.rho_fn, f.theta0)
        a1, a2 = f.derivatives()
        b1, b2 = fd.derivatives()
        for x, y in zip(a1, b1):
            np.testing.assert_allclose(x, y, atol=1e-9)
        np.testing.assert_allclose(a2, b2, atol=1e-6)

    def test_mp_evaluator_agrees(self, rng):
        import mpmath

        for f in (random_poly_family(rng, 3), rotation_family(random_density(rng, 2), [random_hermitian(rng, 2)])):
            theta = np.full(f.m, 0.01)
            with mpmath.workdps(30):
                M = f.rho_mp([mpmath.mpf(0.01)] * f.m)
                Mf = np.array(M.tolist(), dtype=complex)
            np.testing.assert_allclose(Mf, f.rho(theta), atol=1e-14)


class TestJet:
    def test_qubit_generators(self):
        r = 0.5
        J = FamilyJet(qubit_family(r))
        np.testing.assert_allclose(J.H[0], -SY / (2 * r), atol=1e-15)
        np.testing.assert_allclose(J.H[1], SX / (2 * r), atol=1e-15)
        # minimum-norm solution agrees with the analytic generators here
        f = qubit_family(r)
        J2 = FamilyJet(polynomial_family(f.rho(f.theta0), list(f.first)))
        for a, b in zip(J.H, J2.H):
            np.testing.assert_allclose(a, b, atol=1e-14)

    @pytest.mark.parametrize("r", [0.1, 0.3, 0.5, 0.7, 0.9])
    def test_qubit_l_a(self, r):
        J = FamilyJet(qubit_family(r))
        la = (np.eye(2) + SZ) / 2 / (1 + r) - (np.eye(2) - SZ) / 2 / (1 - r)
        np.testing.assert_allclose(J.l[2], la, atol=1e-12)
        assert J.space.alpha(J.l[2], J.l[2]) == pytest.approx(1 / (1 - r * r), abs=1e-9)
        np.testing.assert_allclose(J.l[0], 0, atol=1e-15)

    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_invariants(self, rng, d):
        J = FamilyJet(random_poly_family(rng, d, m=3))
        for _ in range(5):
            u = rng.normal(size=3)
            res = J.invariant_residuals(u)
            assert res["phi_H"] < 1e-10 and res["phi_l"] < 1e-10 and res["phi_ell"] < 1e-10
            assert res["fisher_identity"] < 1e-8

    def test_projector_derivatives(self, rng):
        f = random_poly_family(rng, 3)
        J = FamilyJet(f)
        h = 1e-6
        u = np.array([0.6, -0.8])
        _, Vp = eig_sorted(f.rho(h * u))
        _, Vm = eig_sorted(f.rho(-h * u))
        H = J.H_u(u)
        _, V0 = eig_sorted(f.rho(np.zeros(2)))
        for j in range(3):
            Pp = np.outer(Vp[:, j], Vp[:, j].conj())
            Pm = np.outer(Vm[:, j], Vm[:, j].conj())
            P0 = np.outer(V0[:, j], V0[:, j].conj())
            np.testing.assert_allclose((Pp - Pm) / (2 * h), 1j * commutator(H, P0), atol=1e-6)

    def test_h_matches_log_eigenvalues(self, rng):
        f = random_poly_family(rng, 3)
        J = FamilyJet(f)
        u = np.array([0.3, 0.9])
        s = 1e-4
        lp, lm, l0 = (np.log(eig_sorted(f.rho(x * u))[0]) for x in (s, -s, 0.0))
        second = (lp - 2 * l0 + lm) / s**2
        s1 = 1e-6
        first = (np.log(eig_sorted(f.rho(s1 * u))[0]) - np.log(eig_sorted(f.rho(-s1 * u))[0])) / (2 * s1)
        _, V0 = eig_sorted(f.rho(np.zeros(2)))
        hdiag = np.real(np.diag(dagger(V0) @ J.h(u) @ V0))
        ldiag = np.real(np.diag(dagger(V0) @ J.l_u(u) @ V0))
        np.testing.assert_allclose(hdiag, second, atol=1e-5)
        np.testing.assert_allclose(ldiag, first, atol=1e-7)

    def test_qubit_h_values(self):
        r = 0.5
        J = FamilyJet(qubit_family(r))
        # lambda_pm(rx) = (1 +- sqrt(r^2 + rx^2)) / 2, so d^2 lambda_pm = +-1 / (2 r)
        np.testing.assert_allclose(J.h([1, 0, 0]), np.diag([1 / (r * (1 + r)), -1 / (r * (1 - r))]), atol=1e-12)
        assert J.phi(J.h([1, 0, 0])) == pytest.approx(0, abs=1e-14)
        assert -J.phi(J.h([0, 0, 1])).real == pytest.approx(1 / (1 - r * r), abs=1e-12)

    def test_fd_fallback_matches_analytic(self, rng):
        f = random_poly_family(rng, 3)
        J = FamilyJet(f)
        Jf = FamilyJet(callable_family(f.rho_fn, f.theta0))
        for a, b in zip(J.sld, Jf.sld):
            np.testing.assert_allclose(a, b, atol=1e-8)
        np.testing.assert_allclose(J.h([1, 2]), Jf.h([1, 2]), atol=1e-5)


class TestSLD:
    def test_constant_family(self, rng):
        J = FamilyJet(polynomial_family(random_density(rng, 3), [np.zeros((3, 3))]))
        np.testing.assert_allclose(sld(J)[0], 0)

    def test_diagonal_example(self):
        f = polynomial_family(np.diag([0.8, 0.2]), [SX])
        L = sld(FamilyJet(f))[0]
        np.testing.assert_allclose(L, 2 * SX, atol=1e-14)
        np.testing.assert_allclose(jordan(L, np.diag([0.8, 0.2])), SX, atol=1e-14)

    def test_rotation_example(self):
        r = 0.5
        R = (np.eye(2) + r * SZ) / 2
        J = FamilyJet(rotation_family(R, [SY / 2]))
        L = sld(J)[0]
        assert abs(L[0, 1]) == pytest.approx(r, abs=1e-14)
        np.testing.assert_allclose(L, -r * SX, atol=1e-14)
        assert quantum_fisher(R, L) == pytest.approx(r * r, abs=1e-14)
        assert quantum_fisher(R, np.zeros((2, 2))) == 0

    def test_residual_guard(self, rng):
        J = FamilyJet(random_poly_family(rng, 3))
        J.d_rho[0] = J.d_rho[0] + 0.1 * np.eye(3)
        with pytest.raises(ArithmeticError):
            sld(J)


class TestLogDerivatives:
    def test_sld_form(self, rng):
        J = FamilyJet(random_poly_family(rng, 3))
        for a, b in zip(log_derivative_F(J, "sld"), J.sld):
            np.testing.assert_allclose(a, b, atol=1e-10)

    def test_bkm_is_log_derivative(self, rng):
        f = random_poly_family(rng, 3)
        J = FamilyJet(f)
        h = 1e-5
        for k, Lb in enumerate(log_derivative_F(J, "bkm")):
            e = np.zeros(2)
            e[k] = h
            fd = (logm(f.rho(e)) - logm(f.rho(-e))) / (2 * h)
            np.testing.assert_allclose(Lb, fd, atol=1e-6)

    def test_validation(self, rng):
        J = FamilyJet(random_poly_family(rng, 2))
        with pytest.raises(ValueError, match="F\\(1\\)"):
            log_derivative_F(J, lambda t: 2 * np.ones_like(t))
        with pytest.raises(ValueError, match="positive"):
            log_derivative_F(J, lambda t: 2 - np.asarray(t) ** 2)

    def test_bkm_near_one(self):
        from qlan.jet import OPERATOR_MONOTONE

        f = OPERATOR_MONOTONE["bkm"]
        assert f(1.0) == 1.0
        assert f(1 + 1e-10) == pytest.approx(1 + 0.5e-10, abs=1e-15)
        assert f(np.e) == pytest.approx(np.e - 1)


class TestKSubspace:
    def test_grid(self):
        g = chebyshev_grid(4)
        assert len(g) == 4 and max(map(abs, g)) < 3

    def test_commuting_family(self, rng):
        J = FamilyJet(diagonal_family([0.5, 0.3, 0.2], [[0.1, -0.05, -0.05], [0.0, 0.2, -0.2]]))
        K = k_subspace(J)
        assert K.dim == 2
        for l in J.l:
            assert K.residual(l) < 1e-12

    def test_unitary_family(self, rng):
        R = random_density(rng, 3)
        J = FamilyJet(rotation_family(R, [random_hermitian(rng, 3)]))
        K = k_subspace(J)
        sp = split_commutant(R)
        for b in K.basis:
            for a in sp.basis_Hrho:
                assert abs(J.space.alpha(a, b)) < 1e-10

    def test_qubit(self):
        assert k_subspace(FamilyJet(qubit_family(0.5))).dim == 3

    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_log_derivatives_in_K(self, rng, d):
        J = FamilyJet(random_poly_family(rng, d))
        K = k_subspace(J)
        custom = lambda t: (np.asarray(t) ** 0.3 + np.asarray(t) ** 0.7) / 2
        for F in ("sld", "bkm", "wy", "harmonic", custom):
            for X in log_derivative_F(J, F):
                assert K.residual(X) < 1e-8

    def test_multiple_commutators_in_K(self, rng):
        J = FamilyJet(random_poly_family(rng, 3))
        K = k_subspace(J)
        R = J.rho.matrix
        for H in J.H:
            C = H
            for _ in range(3):
                C = 1j * commutator(R, C)  # stays Hermitian
                assert K.residual(C) < 1e-8

    def test_field_information_sup(self, rng):
        J = FamilyJet(random_poly_family(rng, 3))
        K = k_subspace(J)
        u = np.array([0.4, -1.1])
        L = J.L_u(u)
        R = J.rho.matrix
        top = field_information(R, L, L)
        assert top == pytest.approx(quantum_fisher(R, L), rel=1e-12)
        for _ in range(100):
            A = sum(rng.normal() * b for b in K.basis)
            assert field_information(R, A, L) <= top * (1 + 1e-6)
        assert field_information(R, 2.5 * L, L) == pytest.approx(top, rel=1e-6)


class TestLimitCocycle:
    def test_trivial(self, rng):
        J = FamilyJet(random_poly_family(rng, 3))
        assert limit_cocycle(J, [0.3, 0.2], 0.0) == WeylWord()
        assert limit_cocycle(J, [0.0, 0.0], 1.3) == WeylWord()

    def test_unimodular(self, rng):
        for d in (2, 3, 4):
            J = FamilyJet(random_poly_family(rng, d))
            for _ in range(10):
                V = limit_cocycle(J, rng.normal(size=2), float(rng.uniform(-3, 3)))
                assert abs(abs(V.prefactor) - 1) < 1e-12
                assert len(V.vectors) == 2

    def test_rotation_closed_form(self, rng):
        R = random_density(rng, 3)
        H0 = random_hermitian(rng, 3)
        J = FamilyJet(rotation_family(R, [H0]))
        H = H0 - np.trace(R @ H0).real * np.eye(3)
        for u, t in [(0.7, 1.3), (-1.2, 0.4)]:
            U = expm(1j * t * logm(R))
            sH = U @ H @ dagger(U)
            X = u * (H - sH)
            expected = np.exp(-0.5 * np.trace(R @ X @ X).real) * cmath.exp(u * u / 2 * np.trace(R @ commutator(H, sH)))
            got = quasifree_eval(J.space, limit_cocycle(J, [u], t))
            assert got == pytest.approx(expected, abs=1e-10)

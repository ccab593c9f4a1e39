"""Tests for iteration matrices, T/U/X operators, radii and s(T)."""
import numpy as np
import pytest

from oneshot.linear_model import (RealInverseProblem, ScalarProblem,
                                  random_contraction, spectral_norm)
from oneshot.solvers import MethodSpec, SolverKind
from oneshot.spectral import (build_iteration_matrix, converges,
                              eigenvalue_one_check, s_functional,
                              spectral_radius, tux)

GOLDEN = (-1.0 + np.sqrt(5.0)) / 2.0


def _tux_by_summation(B, H, k):
    # direct evaluation of the defining sums, as an independent oracle
    n = B.shape[0]
    HtH = H.T @ H
    powers = [np.eye(n)]
    for _ in range(k):
        powers.append(powers[-1] @ B)
    T = sum(powers[j] for j in range(k))
    U = sum(powers[i].T @ HtH @ powers[j]
            for i in range(k) for j in range(k) if i + j == k - 1)
    X = np.zeros((n, n))
    for l in range(1, k):
        X = X + sum(powers[i].T @ HtH @ powers[j]
                    for i in range(l) for j in range(l) if i + j == l - 1)
    return T, U, X


class TestTUX:
    def test_k1(self):
        rng = np.random.default_rng(0)
        B = rng.standard_normal((3, 3))
        H = rng.standard_normal((2, 3))
        t = tux(B, H, 1)
        assert np.allclose(t.T, np.eye(3))
        assert np.allclose(t.U, H.T @ H)
        assert np.all(t.X == 0.0)

    def test_scalar_values_k2(self):
        t = tux(np.array([[0.5]]), np.array([[1.0]]), 2)
        assert abs(t.T[0, 0] - 1.5) < 1e-15
        assert abs(t.U[0, 0] - 1.0) < 1e-15
        assert abs(t.X[0, 0] - 1.0) < 1e-15
        # u t - x b^2 + x = h^2 t^2
        lhs = t.U[0, 0] * t.T[0, 0] - t.X[0, 0] * 0.25 + t.X[0, 0]
        assert abs(lhs - 2.25) < 1e-15

    def test_recursion_matches_summation(self):
        rng = np.random.default_rng(5)
        B = rng.standard_normal((4, 4))
        H = rng.standard_normal((3, 4))
        for k in range(1, 6):
            t = tux(B, H, k)
            T, U, X = _tux_by_summation(B, H, k)
            scale = max(1.0, np.linalg.norm(X))
            assert np.linalg.norm(t.T - T) < 1e-12 * scale
            assert np.linalg.norm(t.U - U) < 1e-12 * scale
            assert np.linalg.norm(t.X - X) < 1e-12 * scale

    def test_self_adjointness(self):
        rng = np.random.default_rng(6)
        B = rng.standard_normal((5, 5)) * 0.4
        H = rng.standard_normal((2, 5))
        for k in (2, 4, 7):
            t = tux(B, H, k)
            assert np.allclose(t.U, t.U.T, atol=1e-12)
            assert np.allclose(t.X, t.X.T, atol=1e-12)

    def test_structural_identity(self):
        # U_k T_k - X_k B^k + X_k = T_k* H*H T_k
        rng = np.random.default_rng(7)
        for trial in range(4):
            n = 3 + trial
            B = rng.standard_normal((n, n))
            H = rng.standard_normal((2, n))
            for k in range(1, 9):
                t = tux(B, H, k)
                Bk = np.linalg.matrix_power(B, k)
                rhs = t.T.T @ (H.T @ H) @ t.T
                lhs = t.U @ t.T - t.X @ Bk + t.X
                assert (np.linalg.norm(lhs - rhs)
                        <= 1e-10 * max(1.0, np.linalg.norm(rhs)))

    def test_norm_bounds_for_contractions(self):
        rng = np.random.default_rng(8)
        B = rng.standard_normal((5, 5))
        B *= 0.7 / spectral_norm(B)
        H = rng.standard_normal((3, 5))
        b, nh = spectral_norm(B), spectral_norm(H)
        for k in range(1, 9):
            t = tux(B, H, k)
            assert spectral_norm(t.T) <= (1 - b**k) / (1 - b) + 1e-12
            xbound = nh**2 * (1 - k * b**(k - 1) + (k - 1) * b**k) / (1 - b)**2
            assert spectral_norm(t.X) <= xbound + 1e-12


class TestIterationMatrix:
    def test_shifted_one_step_scalar_layout(self):
        p = ScalarProblem(b=0.3, h=2.0, m=0.7).as_problem()
        m = build_iteration_matrix(p, MethodSpec(SolverKind.SHIFTED_K_STEP, 1),
                                   tau=0.1).matrix
        expected = np.array([[0.3, 4.0, 0.0],
                             [0.0, 0.3, 0.7],
                             [-0.07, 0.0, 1.0]])
        assert np.allclose(m, expected, atol=1e-15)

    def test_k1_specializes(self):
        p = random_contraction(4, 2, 3, 0.5, seed=12)
        for kind in (SolverKind.K_STEP, SolverKind.SHIFTED_K_STEP):
            a = build_iteration_matrix(p, MethodSpec(kind, 1), 0.2).matrix
            t = tux(p.B, p.H, 1)
            # with T=I, U=H*H, X=0 the k-step blocks reduce to the one-step ones
            assert np.allclose(a[:4, 4:8], t.U)
            assert np.allclose(a[4:8, 4:8], p.B)

    def test_matrix_action_equals_hand_rolled_inner_sweeps(self):
        # two coupled sweeps plus the parameter update, k = 2, non-shifted
        rng = np.random.default_rng(3)
        p = random_contraction(3, 2, 2, 0.6, seed=33)
        tau = 0.07
        mat = build_iteration_matrix(p, MethodSpec(SolverKind.K_STEP, 2), tau).matrix
        perr = rng.standard_normal(3)
        uerr = rng.standard_normal(3)
        serr = rng.standard_normal(2)
        s_new = serr - tau * (p.M.T @ perr)
        u, pe = uerr, perr
        for _ in range(2):
            u, pe = (p.B @ u + p.M @ s_new,
                     p.B.T @ pe + p.H.T @ (p.H @ u))
        got = mat @ np.concatenate([perr, uerr, serr])
        want = np.concatenate([pe, u, s_new])
        assert np.linalg.norm(got - want) < 1e-12

    def test_shifted_matrix_action(self):
        rng = np.random.default_rng(4)
        p = random_contraction(3, 1, 2, 0.5, seed=44)
        tau = 0.05
        mat = build_iteration_matrix(
            p, MethodSpec(SolverKind.SHIFTED_K_STEP, 3), tau).matrix
        perr = rng.standard_normal(3)
        uerr = rng.standard_normal(3)
        serr = rng.standard_normal(1)
        s_new = serr - tau * (p.M.T @ perr)
        u, pe = uerr, perr
        for _ in range(3):
            u, pe = (p.B @ u + p.M @ serr,       # old parameter here
                     p.B.T @ pe + p.H.T @ (p.H @ u))
        got = mat @ np.concatenate([perr, uerr, serr])
        assert np.linalg.norm(got - np.concatenate([pe, u, s_new])) < 1e-12


class TestSpectralRadius:
    def test_identity(self):
        assert abs(spectral_radius(np.eye(3)) - 1.0) < 1e-14

    def test_usual_gd_scalar_nilpotent(self):
        p = ScalarProblem(b=0.0, h=1.0, m=1.0).as_problem()
        m = build_iteration_matrix(p, MethodSpec(SolverKind.USUAL_GD), 1.0)
        assert spectral_radius(m) < 1e-7

    def test_shifted_one_step_crossing(self):
        p = ScalarProblem(b=0.0, h=1.0, m=1.0).as_problem()
        spec = MethodSpec(SolverKind.SHIFTED_K_STEP, 1)
        below = spectral_radius(build_iteration_matrix(p, spec, 0.999 * GOLDEN))
        above = spectral_radius(build_iteration_matrix(p, spec, 1.001 * GOLDEN))
        assert below < 1.0 <= above
        # the cubic root structure: lambda^3 - lambda^2 + tau = 0
        tau = 0.4
        roots = np.roots([1.0, -1.0, 0.0, tau])
        m = build_iteration_matrix(p, spec, tau).matrix
        assert abs(spectral_radius(m) - np.max(np.abs(roots))) < 1e-12


class TestConverges:
    def test_tiny_step_converges(self):
        p = random_contraction(5, 2, 3, 0.7, seed=10)
        for kind in (SolverKind.K_STEP, SolverKind.SHIFTED_K_STEP):
            ok, rho = converges(p, MethodSpec(kind, 2), 1e-6)
            assert ok and rho < 1.0

    def test_counterintuitive_step_pair(self):
        p = ScalarProblem(b=0.2, h=1.0, m=1.0).as_problem()
        ok_gd, rho_gd = converges(p, MethodSpec(SolverKind.USUAL_GD), 2.08)
        ok_2, rho_2 = converges(p, MethodSpec(SolverKind.K_STEP, 2), 2.08)
        assert not ok_gd and rho_gd > 1.0
        assert ok_2 and rho_2 < 1.0


class TestSFunctional:
    def test_zero_matrix(self):
        assert s_functional(np.zeros((3, 3))) == 1.0

    def test_norm_half_bounded_by_two(self):
        rng = np.random.default_rng(2)
        A = rng.standard_normal((4, 4))
        A *= 0.5 / spectral_norm(A)
        assert s_functional(A) <= 2.0 + 1e-9

    def test_nilpotent_refinement_agreement(self):
        T = np.array([[0.0, 0.9], [0.0, 0.0]])
        coarse = s_functional(T, n_samples=720)
        fine = s_functional(T, n_samples=46080)
        assert abs(coarse - fine) <= 1e-4 * fine

    def test_rejects_non_contraction(self):
        with pytest.raises(ValueError):
            s_functional(np.eye(2))

    def test_at_least_one(self):
        rng = np.random.default_rng(13)
        for _ in range(3):
            A = rng.standard_normal((3, 3))
            A *= 0.3 / spectral_norm(A)
            assert s_functional(A) >= 1.0

    def test_contraction_bound_holds_generally(self):
        # s(T) <= 1/(1 - ||T||) whenever ||T|| < 1, including for powers
        rng = np.random.default_rng(14)
        for norm in (0.2, 0.5, 0.8, 0.95):
            A = rng.standard_normal((4, 4))
            A *= norm / spectral_norm(A)
            assert s_functional(A) <= 1.0 / (1.0 - norm) + 1e-9
            A2 = A @ A
            n2 = spectral_norm(A2)
            assert s_functional(A2) <= 1.0 / (1.0 - n2) + 1e-9


class TestEigenvalueOneCheck:
    def test_scalar_grid(self):
        for b in (-0.9, -0.3, 0.0, 0.4, 0.8):
            p = ScalarProblem(b=b, h=1.0, m=1.0).as_problem()
            for kind in SolverKind:
                for k in range(1, 5):
                    for tau in (0.05, 0.5, 2.0):
                        d = eigenvalue_one_check(p, MethodSpec(kind, k), tau)
                        assert d > 1e-8

    def test_m_zero_control(self):
        p = RealInverseProblem(B=0.3 * np.eye(2), M=np.zeros((2, 1)),
                               H=np.eye(2), F=np.zeros(2))
        d = eigenvalue_one_check(p, MethodSpec(SolverKind.SHIFTED_K_STEP, 2), 0.5)
        assert d < 1e-12

    def test_random_valid_problem(self):
        p = random_contraction(6, 2, 3, 0.5, seed=77)
        d = eigenvalue_one_check(p, MethodSpec(SolverKind.K_STEP, 3), 0.3)
        assert d > 1e-8

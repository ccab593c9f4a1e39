"""Tests for the four inversion iterations and their traces."""
import io

import numpy as np
import pytest

from oneshot.linear_model import (ScalarProblem, exact_adjoint, exact_state,
                                  random_contraction)
from oneshot.solvers import (CSV_HEADER, MethodSpec, SolverConfig, SolverKind,
                             Status, k_step_one_shot, run_method, shifted_gd,
                             shifted_k_step_one_shot, usual_gd)
from oneshot.spectral import build_iteration_matrix, spectral_radius


def _setup(problem, sigma_ex):
    u_ex = exact_state(problem, sigma_ex)
    f = problem.H @ u_ex
    p_ex = exact_adjoint(problem, sigma_ex, f)
    return f, u_ex, p_ex


class TestUsualGD:
    def test_exact_start_converges_immediately(self):
        p = random_contraction(5, 2, 3, 0.5, seed=1)
        s_ex = np.array([1.0, -1.0])
        f, _, _ = _setup(p, s_ex)
        tr = usual_gd(p, f, s_ex, SolverConfig(tau=0.1), sigma_exact=s_ex)
        assert tr.status is Status.CONVERGED
        assert len(tr) == 1
        assert tr.cost[0] == 0.0

    def test_one_step_exact_kill(self):
        # b = 0, h = m = 1, tau = 1: the parameter error factor is 1 - tau = 0
        p = ScalarProblem(b=0.0, h=1.0, m=1.0).as_problem()
        f, _, _ = _setup(p, np.array([3.0]))
        tr = usual_gd(p, f, np.array([7.0]), SolverConfig(tau=1.0),
                      sigma_exact=np.array([3.0]))
        assert tr.status is Status.CONVERGED
        assert len(tr) == 2
        assert tr.err_sigma[-1] < 1e-12

    def test_showcase_instance_diverges(self):
        p = ScalarProblem(b=0.2, h=1.0, m=1.0).as_problem()
        f, _, _ = _setup(p, np.array([10.0]))
        tr = usual_gd(p, f, np.array([12.0]), SolverConfig(tau=2.08),
                      sigma_exact=np.array([10.0]))
        assert tr.status is Status.DIVERGED


class TestShiftedGD:
    def test_exact_start(self):
        p = random_contraction(4, 2, 2, 0.4, seed=2)
        s_ex = np.array([0.5, 2.0])
        f, _, _ = _setup(p, s_ex)
        tr = shifted_gd(p, f, s_ex, SolverConfig(tau=0.05), sigma_exact=s_ex)
        assert tr.status is Status.CONVERGED
        assert len(tr) == 1

    def test_scalar_threshold_is_one(self):
        # error cubic lambda^3 - lambda^2 + tau lambda = 0: stable iff tau < 1
        p = ScalarProblem(b=0.0, h=1.0, m=1.0).as_problem()
        f, _, _ = _setup(p, np.array([1.0]))
        ok = shifted_gd(p, f, np.array([4.0]), SolverConfig(tau=0.5),
                        sigma_exact=np.array([1.0]))
        assert ok.status is Status.CONVERGED
        bad = shifted_gd(p, f, np.array([4.0]), SolverConfig(tau=1.5),
                         sigma_exact=np.array([1.0]))
        assert bad.status is Status.DIVERGED
        roots = np.roots([1.0, -1.0, 1.5, 0.0])
        assert np.max(np.abs(roots)) > 1.0


class TestOneShot:
    def test_k1_matches_hand_rolled_recurrence(self):
        p = random_contraction(4, 2, 2, 0.5, seed=3)
        s_ex = np.array([1.0, 1.0])
        f, _, _ = _setup(p, s_ex)
        tau = 0.05
        cfg = SolverConfig(tau=tau, max_outer=6, tol_cost=1e-300, tol_grad=1e-300)
        rng = np.random.default_rng(0)
        s0, u0, p0 = rng.standard_normal(2), rng.standard_normal(4), rng.standard_normal(4)
        tr = k_step_one_shot(p, f, s0, u0, p0, 1, cfg, sigma_exact=s_ex)
        s, u, q = s0.copy(), u0.copy(), p0.copy()
        for n in range(len(tr)):
            assert np.allclose(tr.sigma[n], s, atol=1e-13)
            s_new = s - tau * (p.M.T @ q)
            u, q = (p.B @ u + p.M @ s_new + p.F,
                    p.B.T @ q + p.H.T @ (p.H @ u - f))
            s = s_new

    def test_shifted_k1_matches_hand_rolled_recurrence(self):
        p = random_contraction(4, 1, 2, 0.5, seed=4)
        s_ex = np.array([2.0])
        f, _, _ = _setup(p, s_ex)
        tau = 0.05
        cfg = SolverConfig(tau=tau, max_outer=6, tol_cost=1e-300, tol_grad=1e-300)
        rng = np.random.default_rng(1)
        s0, u0, p0 = rng.standard_normal(1), rng.standard_normal(4), rng.standard_normal(4)
        tr = shifted_k_step_one_shot(p, f, s0, u0, p0, 1, cfg, sigma_exact=s_ex)
        s, u, q = s0.copy(), u0.copy(), p0.copy()
        for n in range(len(tr)):
            assert np.allclose(tr.sigma[n], s, atol=1e-13)
            s_new = s - tau * (p.M.T @ q)
            u, q = (p.B @ u + p.M @ s + p.F,
                    p.B.T @ q + p.H.T @ (p.H @ u - f))
            s = s_new

    def test_showcase_instance_two_step_converges(self):
        p = ScalarProblem(b=0.2, h=1.0, m=1.0).as_problem()
        f, _, _ = _setup(p, np.array([10.0]))
        cfg = SolverConfig(tau=2.08, max_outer=30000)
        tr = k_step_one_shot(p, f, np.array([12.0]), None, None, 2, cfg,
                             sigma_exact=np.array([10.0]))
        assert tr.status is Status.CONVERGED

    def test_large_k_matches_usual_gd(self):
        p = random_contraction(5, 2, 3, 0.5, seed=5)
        s_ex = np.array([1.0, -2.0])
        f, u_ex, p_ex = _setup(p, s_ex)
        s0 = np.array([2.0, 0.5])
        tau = 0.2 * 2.0 / np.linalg.norm(
            p.H @ np.linalg.solve(np.eye(5) - p.B, p.M), 2)**2
        cfg = SolverConfig(tau=tau, max_outer=30, tol_cost=1e-300, tol_grad=1e-300)
        gd = usual_gd(p, f, s0, cfg, sigma_exact=s_ex)
        os = k_step_one_shot(p, f, s0, exact_state(p, s0),
                             exact_adjoint(p, s0, f), 200, cfg, sigma_exact=s_ex)
        for a, b in zip(gd.sigma, os.sigma):
            assert np.linalg.norm(a - b) < 1e-6

    def test_large_k_matches_shifted_gd(self):
        p = random_contraction(5, 2, 3, 0.5, seed=6)
        s_ex = np.array([1.0, 0.0])
        f, _, _ = _setup(p, s_ex)
        s0 = np.array([-1.0, 0.5])
        tau = 0.1 / np.linalg.norm(
            p.H @ np.linalg.solve(np.eye(5) - p.B, p.M), 2)**2
        cfg = SolverConfig(tau=tau, max_outer=30, tol_cost=1e-300, tol_grad=1e-300)
        gd = shifted_gd(p, f, s0, cfg, sigma_exact=s_ex)
        os = shifted_k_step_one_shot(p, f, s0, exact_state(p, s0),
                                     exact_adjoint(p, s0, f), 200, cfg,
                                     sigma_exact=s_ex)
        for a, b in zip(gd.sigma, os.sigma):
            assert np.linalg.norm(a - b) < 1e-6

    def test_exact_triple_is_stationary(self):
        p = random_contraction(5, 2, 3, 0.5, seed=7)
        s_ex = np.array([3.0, 1.0])
        f, u_ex, p_ex = _setup(p, s_ex)
        cfg = SolverConfig(tau=0.3, max_outer=20, tol_cost=1e-300, tol_grad=1e-300)
        for fn in (k_step_one_shot, shifted_k_step_one_shot):
            tr = fn(p, f, s_ex, u_ex, p_ex, 3, cfg, sigma_exact=s_ex)
            assert max(tr.err_sigma) < 1e-12


class TestErrorRecurrenceEquivalence:
    def test_all_methods_match_matrix_powers(self):
        p = random_contraction(6, 2, 3, 0.5, seed=8)
        s_ex = np.array([1.0, 2.0])
        f, u_ex, p_ex = _setup(p, s_ex)
        s0 = np.array([-1.0, 0.25])
        tau = 0.1
        cfg = SolverConfig(tau=tau, max_outer=40, tol_cost=1e-300, tol_grad=1e-300)
        cases = [(MethodSpec(SolverKind.USUAL_GD), None, None)]
        cases.append((MethodSpec(SolverKind.SHIFTED_GD), None, None))
        rng = np.random.default_rng(2)
        for k in range(1, 6):
            u0, p0 = rng.standard_normal(6), rng.standard_normal(6)
            cases.append((MethodSpec(SolverKind.K_STEP, k), u0, p0))
            cases.append((MethodSpec(SolverKind.SHIFTED_K_STEP, k), u0, p0))
        for method, u0, p0 in cases:
            tr = run_method(method, p, f, s0, cfg, u0=u0, p0=p0, sigma_exact=s_ex)
            mat = build_iteration_matrix(p, method, tau).matrix
            if u0 is None:
                # GD kinds derive (u, p) from sigma by exact solves
                e = np.concatenate([exact_adjoint(p, s0, f) - p_ex,
                                    exact_state(p, s0) - u_ex, s0 - s_ex])
            else:
                e = np.concatenate([p0 - p_ex, u0 - u_ex, s0 - s_ex])
            for n in range(len(tr)):
                sig_err = e[2 * p.n_u:]
                # tau is not tuned per method here, so some runs blow up;
                # the comparison then only makes sense relative to the size
                scale = max(1.0, np.linalg.norm(sig_err))
                assert np.linalg.norm((tr.sigma[n] - s_ex) - sig_err) < 1e-10 * scale
                e = mat @ e


class TestEmpiricalVsSpectralVerdict:
    def test_scalar_agreement_outside_band(self):
        from oneshot.scalar import eta, kappa
        for b in (-0.5, 0.0, 0.3, 0.7):
            sp = ScalarProblem(b=b, h=1.0, m=1.0)
            p = sp.as_problem()
            f, _, _ = _setup(p, np.array([10.0]))
            for kind, thr in ((SolverKind.K_STEP, eta),
                              (SolverKind.SHIFTED_K_STEP, kappa)):
                for k in (1, 2, 3):
                    t_star = thr(k, b).value
                    for frac in (0.5, 0.9, 1.1, 1.6):
                        tau = frac * t_star
                        if abs(frac - 1.0) < 0.01:
                            continue
                        method = MethodSpec(kind, k)
                        rho = spectral_radius(
                            build_iteration_matrix(p, method, tau))
                        # margins on this grid are >= 7e-3, so 20000 outer
                        # iterations decide every cell
                        cfg = SolverConfig(tau=tau, max_outer=20000)
                        tr = run_method(method, p, f, np.array([12.0]), cfg,
                                        sigma_exact=np.array([10.0]))
                        if rho < 1.0:
                            assert tr.status is Status.CONVERGED
                        else:
                            assert tr.status is Status.DIVERGED


class TestTraceFormat:
    def test_csv_layout_and_inner_counts(self):
        p = random_contraction(4, 2, 2, 0.4, seed=9)
        s_ex = np.array([1.0, 1.0])
        f, _, _ = _setup(p, s_ex)
        cfg = SolverConfig(tau=0.05, max_outer=9, tol_cost=1e-300, tol_grad=1e-300)
        tr = k_step_one_shot(p, f, np.array([0.0, 0.0]), None, None, 3, cfg,
                             sigma_exact=s_ex)
        assert tr.accumulated_inner[0] == 1
        for i, acc in enumerate(tr.accumulated_inner):
            n = i + 1
            assert acc == 1 + (n - 1) * 3
        buf = io.StringIO()
        tr.write_csv(buf)
        lines = buf.getvalue().strip().split("\n")
        assert lines[0] == CSV_HEADER
        assert lines[0] == "n,accumulated_inner,cost,grad_norm,err_sigma,status"
        assert len(lines) == len(tr) + 1
        first = lines[1].split(",")
        assert first[0] == "1" and first[1] == "1"
        # 17 significant digits survive a round trip
        assert float(first[2]) == tr.cost[0]

    def test_unknown_exact_parameter_gives_nan(self):
        p = random_contraction(3, 1, 2, 0.3, seed=10)
        f = np.zeros(2)
        cfg = SolverConfig(tau=0.05, max_outer=3, tol_cost=1e-300, tol_grad=1e-300)
        tr = usual_gd(p, f, np.array([1.0]), cfg)
        assert np.isnan(tr.err_sigma[0])


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tau=0.0)
    with pytest.raises(ValueError):
        SolverConfig(tau=0.1, tol_cost=0.0)
    with pytest.raises(ValueError):
        MethodSpec(SolverKind.K_STEP, k=0)

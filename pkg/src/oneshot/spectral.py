"""Block iteration matrices and the spectral convergence oracle.

Every method in :mod:`oneshot.solvers` is, on the error triple (p, u, sigma),
multiplication by a fixed block matrix; an iteration converges for all
initial data iff that matrix has spectral radius below one.  This module
assembles those matrices exactly, builds the accumulated inner-iteration
operators T_k, U_k, X_k, and estimates the resolvent-type constant

    s(T) = sup_{|z| >= 1} || (I - T/z)^{-1} ||_2

used by the descent-step bounds when ||B|| >= 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linear_model import RealInverseProblem
from .solvers import MethodSpec, SolverKind

CONVERGENCE_MARGIN = 1e-10


@dataclass(frozen=True)
class TUXTriple:
    """T_k = sum_{j<k} B^j, U_k = sum_{i+j=k-1} (B*)^i H*H B^j,
    X_k = sum_{l<k} U_l (zero for k = 1)."""

    T: np.ndarray
    U: np.ndarray
    X: np.ndarray
    k: int


@dataclass(frozen=True)
class IterationMatrix:
    matrix: np.ndarray
    method: MethodSpec
    tau: float


def tux(B: np.ndarray, H: np.ndarray, k: int) -> TUXTriple:
    """Build (T_k, U_k, X_k) by the one-step recursions.

    T_{l+1} = T_l + B^l, U_{l+1} = B* U_l + H*H B^l and
    X_{l+1} = B* X_l + H*H T_l, started from T_1 = I, U_1 = H*H, X_1 = 0.
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    B = np.asarray(B, dtype=float)
    H = np.asarray(H, dtype=float)
    n = B.shape[0]
    HtH = H.T @ H
    T = np.eye(n)
    U = HtH.copy()
    X = np.zeros((n, n))
    Bl = np.eye(n)
    for _ in range(1, k):
        X = B.T @ X + HtH @ T
        Bl = Bl @ B
        U = B.T @ U + HtH @ Bl
        T = T + Bl
    return TUXTriple(T=T, U=U, X=X, k=k)


def build_iteration_matrix(problem: RealInverseProblem, method: MethodSpec,
                           tau: float) -> IterationMatrix:
    """Exact error-propagation matrix of the method, on (p, u, sigma)."""
    if tau <= 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    B, M, H = problem.B, problem.M, problem.H
    n_u, n_s = problem.n_u, problem.n_sigma
    I_u = np.eye(n_u)
    I_s = np.eye(n_s)
    Z_us = np.zeros((n_u, n_s))
    Z_su = np.zeros((n_s, n_u))

    if method.kind in (SolverKind.USUAL_GD, SolverKind.SHIFTED_GD):
        K = np.linalg.solve(I_u - B, I_u)          # (I - B)^{-1}
        S = K.T @ (H.T @ H) @ K                    # (I-B*)^{-1} H*H (I-B)^{-1}
        if method.kind is SolverKind.SHIFTED_GD:
            mat = np.block([
                [np.zeros((n_u, n_u)), np.zeros((n_u, n_u)), S @ M],
                [np.zeros((n_u, n_u)), np.zeros((n_u, n_u)), K @ M],
                [-tau * M.T, Z_su, I_s],
            ])
        else:
            mat = np.block([
                [-tau * S @ M @ M.T, np.zeros((n_u, n_u)), S @ M],
                [-tau * K @ M @ M.T, np.zeros((n_u, n_u)), K @ M],
                [-tau * M.T, Z_su, I_s],
            ])
        return IterationMatrix(matrix=mat, method=method, tau=tau)

    t = tux(B, H, method.k)
    Bk = np.linalg.matrix_power(B, method.k)
    if method.kind is SolverKind.SHIFTED_K_STEP:
        mat = np.block([
            [Bk.T, t.U, t.X @ M],
            [np.zeros((n_u, n_u)), Bk, t.T @ M],
            [-tau * M.T, Z_su, I_s],
        ])
    else:
        mat = np.block([
            [Bk.T - tau * t.X @ M @ M.T, t.U, t.X @ M],
            [-tau * t.T @ M @ M.T, Bk, t.T @ M],
            [-tau * M.T, Z_su, I_s],
        ])
    return IterationMatrix(matrix=mat, method=method, tau=tau)


def spectral_radius(matrix) -> float:
    """Largest eigenvalue modulus, by a dense eigensolver."""
    mat = matrix.matrix if isinstance(matrix, IterationMatrix) else np.asarray(matrix)
    return float(np.max(np.abs(np.linalg.eigvals(mat))))


def converges(problem: RealInverseProblem, method: MethodSpec,
              tau: float) -> tuple[bool, float]:
    """Ground-truth convergence verdict: radius of the iteration matrix
    strictly below one (with a small margin against threshold flapping)."""
    rho = spectral_radius(build_iteration_matrix(problem, method, tau))
    return rho < 1.0 - CONVERGENCE_MARGIN, rho


def eigenvalue_one_check(problem: RealInverseProblem, method: MethodSpec,
                         tau: float) -> float:
    """Distance of the iteration-matrix spectrum to the point 1.

    Strictly positive for valid problems; collapses to ~0 when the
    parameter-to-data map loses injectivity (e.g. M = 0).
    """
    mat = build_iteration_matrix(problem, method, tau).matrix
    return float(np.min(np.abs(np.linalg.eigvals(mat) - 1.0)))


def _boundary_norms(T: np.ndarray, phis: np.ndarray) -> np.ndarray:
    """|| (I - e^{-i phi} T)^{-1} ||_2 for each angle, via batched SVD."""
    n = T.shape[0]
    A = np.eye(n)[None, :, :] - np.exp(-1j * phis)[:, None, None] * T[None, :, :]
    svals = np.linalg.svd(A, compute_uv=False)
    return 1.0 / svals[:, -1]


def s_functional(T: np.ndarray, n_samples: int = 720) -> float:
    """Estimate s(T) by boundary sampling plus local golden-section refinement.

    The sup over |z| >= 1 is attained on |z| = 1, so we sample n_samples
    equispaced points of the unit circle and refine around the best one.
    Requires rho(T) < 1; always returns at least 1 (the value at z = infinity).
    """
    T = np.asarray(T)
    rho = float(np.max(np.abs(np.linalg.eigvals(T)))) if T.size else 0.0
    if rho >= 1.0:
        raise ValueError(f"s(T) requires rho(T) < 1, got rho = {rho:.6g}")
    if n_samples < 8:
        raise ValueError(f"n_samples too small: {n_samples}")
    phis = np.linspace(0.0, 2.0 * np.pi, n_samples, endpoint=False)
    vals = _boundary_norms(T, phis)
    best = int(np.argmax(vals))
    span = 2.0 * np.pi / n_samples

    # golden-section maximization on the bracket around the best sample
    inv_gold = (np.sqrt(5.0) - 1.0) / 2.0
    a = phis[best] - span
    b = phis[best] + span
    c = b - inv_gold * (b - a)
    d = a + inv_gold * (b - a)
    fc = _boundary_norms(T, np.array([c]))[0]
    fd = _boundary_norms(T, np.array([d]))[0]
    for _ in range(80):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv_gold * (b - a)
            fc = _boundary_norms(T, np.array([c]))[0]
        else:
            a, c, fc = c, d, fd
            d = a + inv_gold * (b - a)
            fd = _boundary_norms(T, np.array([d]))[0]
        if b - a < 1e-13:
            break
    return float(max(1.0, vals[best], fc, fd))

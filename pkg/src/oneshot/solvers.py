"""The four inversion iterations on (sigma, u, p), with trace recording.

Two reference methods solve state and adjoint exactly each outer step (usual
and shifted gradient descent); the one-shot methods replace those solves by k
warm-started coupled fixed-point sweeps, using either the fresh parameter
iterate (k-step one-shot) or the previous one (shifted k-step one-shot, whose
three updates can run simultaneously).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .linear_model import (RealInverseProblem, adjoint_from_state,
                           exact_state)


class SolverKind(enum.Enum):
    USUAL_GD = "gd"
    SHIFTED_GD = "sgd"
    K_STEP = "kshot"
    SHIFTED_K_STEP = "skshot"


ONE_SHOT_KINDS = (SolverKind.K_STEP, SolverKind.SHIFTED_K_STEP)


@dataclass(frozen=True)
class MethodSpec:
    """Which algorithm to run; k counts inner sweeps (ignored for GD kinds)."""

    kind: SolverKind
    k: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be at least 1, got {self.k}")

    @property
    def shifted(self) -> bool:
        return self.kind in (SolverKind.SHIFTED_GD, SolverKind.SHIFTED_K_STEP)


@dataclass(frozen=True)
class SolverConfig:
    tau: float
    max_outer: int = 2000
    tol_cost: float = 1e-5
    tol_grad: float = 1e-5
    divergence_threshold: float = 1e12

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ValueError(f"descent step tau must be positive, got {self.tau}")
        if self.tol_cost <= 0.0 or self.tol_grad <= 0.0:
            raise ValueError("stopping tolerances must be positive")


class Status(enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    DIVERGED = "diverged"


CSV_HEADER = "n,accumulated_inner,cost,grad_norm,err_sigma,status"


@dataclass
class ConvergenceTrace:
    """Per-outer-iteration record of a solver run.

    Row n (1-based) holds the n-th iterate: its parameter vector, misfit,
    gradient norm, error norm against the exact parameter when known, and the
    accumulated inner-iteration count (1 for the first iterate, then
    1 + (n-1)*k for the one-shot kinds).
    """

    method: MethodSpec
    tau: float
    status: Status = Status.MAX_ITER
    sigma: list[np.ndarray] = field(default_factory=list)
    cost: list[float] = field(default_factory=list)
    grad_norm: list[float] = field(default_factory=list)
    err_sigma: list[float] = field(default_factory=list)
    accumulated_inner: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.cost)

    @property
    def final_sigma(self) -> np.ndarray:
        return self.sigma[-1]

    @property
    def final_cost(self) -> float:
        return self.cost[-1]

    def rows(self):
        for i in range(len(self.cost)):
            yield (i + 1, self.accumulated_inner[i], self.cost[i],
                   self.grad_norm[i], self.err_sigma[i])

    def write_csv(self, fh) -> None:
        """Write the trace in the fixed CSV layout, 17 significant digits."""
        fh.write(CSV_HEADER + "\n")
        for n, acc, c, g, e in self.rows():
            fh.write(f"{n},{acc},{c:.17g},{g:.17g},{e:.17g},{self.status.value}\n")


def _relative(value: float, ref: float | None) -> float:
    if value == 0.0:
        return 0.0
    if ref is None or ref <= 0.0:
        return math.inf
    return value / ref


class _Run:
    """Shared bookkeeping: reference values, stopping and divergence tests."""

    def __init__(self, problem, f, sigma0, config, method, sigma_exact):
        self.problem = problem
        self.f = np.asarray(f, dtype=float).reshape(-1)
        self.sigma0 = np.asarray(sigma0, dtype=float).reshape(-1)
        if self.sigma0.shape != (problem.n_sigma,):
            raise ValueError(
                f"sigma0 must have length {problem.n_sigma}, got {self.sigma0.shape}")
        self.config = config
        self.sigma_exact = (None if sigma_exact is None
                            else np.asarray(sigma_exact, dtype=float).reshape(-1))
        self.trace = ConvergenceTrace(method=method, tau=config.tau)
        self.cost_ref: float | None = None
        self.grad_ref: float | None = None

    def record(self, n_row: int, sigma, u, p) -> Status | None:
        """Append one row; returns a terminal status or None to continue."""
        H, M, f = self.problem.H, self.problem.M, self.f
        r = H @ u - f
        c = 0.5 * float(r @ r)
        g = float(np.linalg.norm(M.T @ p))
        err = (math.nan if self.sigma_exact is None
               else float(np.linalg.norm(sigma - self.sigma_exact)))
        k = self.trace.method.k if self.trace.method.kind in ONE_SHOT_KINDS else 1
        self.trace.sigma.append(sigma.copy())
        self.trace.cost.append(c)
        self.trace.grad_norm.append(g)
        self.trace.err_sigma.append(err)
        self.trace.accumulated_inner.append(1 + (n_row - 1) * k)

        if (not np.isfinite(c) or not np.isfinite(g)
                or not np.all(np.isfinite(sigma))
                or np.linalg.norm(sigma - self.sigma0) > self.config.divergence_threshold):
            return Status.DIVERGED
        if self.cost_ref is None and c > 0.0:
            self.cost_ref = c
        if self.grad_ref is None and g > 0.0:
            self.grad_ref = g
        if (_relative(c, self.cost_ref) < self.config.tol_cost
                and _relative(g, self.grad_ref) < self.config.tol_grad):
            return Status.CONVERGED
        return None

    def finish(self, status: Status) -> ConvergenceTrace:
        self.trace.status = status
        return self.trace


def usual_gd(problem: RealInverseProblem, f, sigma0, config: SolverConfig,
             sigma_exact=None) -> ConvergenceTrace:
    """Gradient descent with exact state/adjoint solves each outer step."""
    run = _Run(problem, f, sigma0, config, MethodSpec(SolverKind.USUAL_GD), sigma_exact)
    sigma = run.sigma0.copy()
    tau, M = config.tau, problem.M
    for n in range(config.max_outer + 1):
        u = exact_state(problem, sigma)
        p = adjoint_from_state(problem, u, run.f)
        status = run.record(n + 1, sigma, u, p)
        if status is not None:
            return run.finish(status)
        if n == config.max_outer:
            break
        sigma = sigma - tau * (M.T @ p)
    return run.finish(Status.MAX_ITER)


def shifted_gd(problem: RealInverseProblem, f, sigma0, config: SolverConfig,
               sigma_exact=None) -> ConvergenceTrace:
    """Shifted gradient descent: the state lags one parameter update behind.

    sigma, u and p can all be updated simultaneously; the first (u, p) pair
    is obtained by exact solves at sigma0.
    """
    run = _Run(problem, f, sigma0, config, MethodSpec(SolverKind.SHIFTED_GD), sigma_exact)
    sigma = run.sigma0.copy()
    u = exact_state(problem, sigma)
    p = adjoint_from_state(problem, u, run.f)
    tau, M = config.tau, problem.M
    for n in range(config.max_outer + 1):
        status = run.record(n + 1, sigma, u, p)
        if status is not None:
            return run.finish(status)
        if n == config.max_outer:
            break
        sigma_new = sigma - tau * (M.T @ p)
        u = exact_state(problem, sigma)        # solved from the old sigma
        p = adjoint_from_state(problem, u, run.f)
        sigma = sigma_new
    return run.finish(Status.MAX_ITER)


def _one_shot(problem, f, sigma0, u0, p0, k, config, sigma_exact, shifted):
    kind = SolverKind.SHIFTED_K_STEP if shifted else SolverKind.K_STEP
    run = _Run(problem, f, sigma0, config, MethodSpec(kind, k=k), sigma_exact)
    sigma = run.sigma0.copy()
    u = (np.zeros(problem.n_u) if u0 is None
         else np.asarray(u0, dtype=float).reshape(-1).copy())
    p = (np.zeros(problem.n_u) if p0 is None
         else np.asarray(p0, dtype=float).reshape(-1).copy())
    B, M, H, F = problem.B, problem.M, problem.H, problem.F
    Bt, Ht = B.T, H.T
    tau = config.tau
    for n in range(config.max_outer + 1):
        status = run.record(n + 1, sigma, u, p)
        if status is not None:
            return run.finish(status)
        if n == config.max_outer:
            break
        sigma_new = sigma - tau * (M.T @ p)
        rhs_u = M @ (sigma if shifted else sigma_new) + F
        for _ in range(k):
            # coupled sweep: both updates read the previous (u, p) pair
            u_next = B @ u + rhs_u
            p_next = Bt @ p + Ht @ (H @ u - run.f)
            u, p = u_next, p_next
        sigma = sigma_new
    return run.finish(Status.MAX_ITER)


def k_step_one_shot(problem: RealInverseProblem, f, sigma0, u0=None, p0=None,
                    k: int = 1, config: SolverConfig | None = None,
                    sigma_exact=None) -> ConvergenceTrace:
    """k-step one-shot: update sigma, then run k coupled inner sweeps on
    (u, p) warm-started from the previous pair, using the fresh sigma."""
    if config is None:
        raise ValueError("config is required")
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    return _one_shot(problem, f, sigma0, u0, p0, k, config, sigma_exact,
                     shifted=False)


def shifted_k_step_one_shot(problem: RealInverseProblem, f, sigma0, u0=None,
                            p0=None, k: int = 1,
                            config: SolverConfig | None = None,
                            sigma_exact=None) -> ConvergenceTrace:
    """Shifted k-step one-shot: the inner sweeps use the previous sigma."""
    if config is None:
        raise ValueError("config is required")
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    return _one_shot(problem, f, sigma0, u0, p0, k, config, sigma_exact,
                     shifted=True)


def run_method(method: MethodSpec, problem, f, sigma0, config,
               u0=None, p0=None, sigma_exact=None) -> ConvergenceTrace:
    """Dispatch on the method kind (convenience for sweeps and the CLI)."""
    if method.kind is SolverKind.USUAL_GD:
        return usual_gd(problem, f, sigma0, config, sigma_exact)
    if method.kind is SolverKind.SHIFTED_GD:
        return shifted_gd(problem, f, sigma0, config, sigma_exact)
    if method.kind is SolverKind.K_STEP:
        return k_step_one_shot(problem, f, sigma0, u0, p0, method.k, config,
                               sigma_exact)
    return shifted_k_step_one_shot(problem, f, sigma0, u0, p0, method.k,
                                   config, sigma_exact)

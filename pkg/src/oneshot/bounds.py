"""Sufficient descent-step bounds for all four methods.

For the gradient-descent references the admissible step is known exactly:
tau < 2 / ||H (I-B)^{-1} M||^2 (usual) and half that range (shifted).  For
the one-shot methods the guarantees are sufficient only.  With ||B|| < 1 they
take the closed form tau < chi(k, ||B||) / (||H||^2 ||M||^2) for the shifted
family and psi(k, ||B||) for the non-shifted one, each a minimum over a
real-eigenvalue bound and the complex-eigenvalue case bounds parameterized by
an angle split theta0 and a slack delta0.  Without ||B|| < 1 the bounds fall
back to the resolvent constant s(B^k) and the operator norms of T_k and X_k.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linear_model import RealInverseProblem, spectral_norm, spectral_radius_of
from .solvers import MethodSpec, SolverKind
from . import spectral

SQRT2 = math.sqrt(2.0)
GOLDEN_THRESHOLD = (-1.0 + math.sqrt(5.0)) / 2.0

SHIFTED_THETA0_MAX = math.pi / 6.0
NON_SHIFTED_THETA0_MAX = math.pi / 4.0
STRICT_THETA0_SCALE = 0.99          # k >= 2 needs theta0 strictly inside


@dataclass(frozen=True)
class BoundParams:
    """Tuning constants of the complex-eigenvalue case bounds."""

    theta0: float
    delta0: float = 1.0

    def __post_init__(self):
        if self.delta0 <= 0.0:
            raise ValueError(f"delta0 must be positive, got {self.delta0}")
        if self.theta0 <= 0.0:
            raise ValueError(f"theta0 must be positive, got {self.theta0}")


def default_params(shifted: bool, k: int) -> BoundParams:
    theta_max = SHIFTED_THETA0_MAX if shifted else NON_SHIFTED_THETA0_MAX
    theta0 = theta_max if k == 1 else STRICT_THETA0_SCALE * theta_max
    return BoundParams(theta0=theta0, delta0=1.0)


def _check_params(params: BoundParams, shifted: bool, k: int) -> None:
    theta_max = SHIFTED_THETA0_MAX if shifted else NON_SHIFTED_THETA0_MAX
    if k >= 2:
        if not params.theta0 < theta_max:
            raise ValueError(
                f"theta0 must be strictly below {theta_max:.6g} for k >= 2, "
                f"got {params.theta0:.6g}")
    elif not params.theta0 <= theta_max:
        raise ValueError(
            f"theta0 must not exceed {theta_max:.6g}, got {params.theta0:.6g}")


@dataclass
class StepBound:
    """A sufficient step value together with its provenance."""

    value: float
    formula_id: str
    params: BoundParams | None
    norm_inputs: dict

    def as_dict(self) -> dict:
        return {
            "formula_id": self.formula_id,
            "value": self.value,
            "params": (None if self.params is None
                       else {"theta0": self.params.theta0,
                             "delta0": self.params.delta0}),
            "norm_inputs": dict(self.norm_inputs),
        }


def _data_map_norm(problem: RealInverseProblem) -> float:
    G = problem.H @ np.linalg.solve(np.eye(problem.n_u) - problem.B, problem.M)
    return spectral_norm(G)


def gd_bound(problem: RealInverseProblem) -> StepBound:
    """Exact admissible-step supremum of usual gradient descent."""
    g = _data_map_norm(problem)
    return StepBound(value=2.0 / g**2, formula_id="usual-gd",
                     params=None, norm_inputs={"data_map_norm": g})


def shifted_gd_bound(problem: RealInverseProblem) -> StepBound:
    """Exact admissible-step supremum of shifted gradient descent."""
    g = _data_map_norm(problem)
    return StepBound(value=1.0 / g**2, formula_id="shifted-gd",
                     params=None, norm_inputs={"data_map_norm": g})


# ---------------------------------------------------------------------------
# closed forms for ||B|| < 1, one inner sweep (k = 1)

def _geom(k: int, b: float) -> float:
    # 1 - k b^{k-1} + (k-1) b^k, the (1-b)^2-scaled norm bound of X_k
    return 1.0 - k * b**(k - 1) + (k - 1) * b**k


def chi_k1(b: float, params: BoundParams | None = None) -> float:
    """min over the real bound and the four complex-case bounds, shifted
    one-step family, for 0 < b = ||B|| < 1."""
    if not 0.0 < b < 1.0:
        raise ValueError(f"chi_k1 needs 0 < b < 1, got {b}")
    if params is None:
        params = default_params(shifted=True, k=1)
    _check_params(params, shifted=True, k=1)
    th, d0 = params.theta0, params.delta0
    chi0 = 2.0 * (1.0 - b)**2
    chi1 = (1.0 - b)**4 / (4.0 * b**2)
    chi2 = 2.0 * math.sin(th / 2.0) * (1.0 - b)**2 / (1.0 + b)**2
    chi3 = (d0 * math.cos(2.5 * th)**2
            / (2.0 * (1.0 + 2.0 * d0 * math.sin(2.5 * th) + d0**2))
            * (1.0 - b)**4 / b**2)
    chi4 = ((math.sin(math.pi / 2.0 - 3.0 * th) + math.cos(2.0 * th))
            * (1.0 - b)**2)
    return min(chi0, chi1, chi2, chi3, chi4)


def psi_k1(b: float, params: BoundParams | None = None) -> float:
    """Non-shifted one-step family (real eigenvalues impose no condition)."""
    if not 0.0 < b < 1.0:
        raise ValueError(f"psi_k1 needs 0 < b < 1, got {b}")
    if params is None:
        params = default_params(shifted=False, k=1)
    _check_params(params, shifted=False, k=1)
    th, d0 = params.theta0, params.delta0
    psi1 = (1.0 - b)**4 / (4.0 * b**2)
    psi2 = 2.0 * math.sin(th / 2.0) * (1.0 - b)**2 / (1.0 + b)**2
    psi3 = (d0 * math.cos(1.5 * th)**2 * (1.0 - b)**4
            / (2.0 * (1.0 + 2.0 * d0 * math.sin(1.5 * th) + d0**2) * b**2))
    return min(psi1, psi2, psi3)


# ---------------------------------------------------------------------------
# closed forms for ||B|| < 1, k >= 2 inner sweeps

def chi_k(k: int, b: float, params: BoundParams | None = None) -> float:
    """Shifted k-step family, k >= 2 and 0 <= b = ||B|| < 1.

    At b = 0 the method coincides with shifted gradient descent, whose exact
    normalized bound is 1.
    """
    if k < 2:
        raise ValueError(f"chi_k needs k >= 2, got {k}")
    if not 0.0 <= b < 1.0:
        raise ValueError(f"chi_k needs 0 <= b < 1, got {b}")
    if b == 0.0:
        return 1.0
    if params is None:
        params = default_params(shifted=True, k=k)
    _check_params(params, shifted=True, k=k)
    th, d0 = params.theta0, params.delta0
    bk = b**k
    geom = _geom(k, b)
    front = (1.0 - b)**2 * (1.0 - bk)**2
    c = (1.0 + 2.0 * d0 * math.sin(2.5 * th) + d0**2) / math.cos(2.5 * th)**2

    real = 2.0 * front / ((1.0 - bk)**2 + 2.0 * geom)
    chi1 = front / (4.0 * b**(2 * k) + SQRT2 * geom * (1.0 + bk)**2)
    chi2 = front / (((1.0 - bk)**2 / (2.0 * math.sin(th / 2.0))
                     + SQRT2 * geom) * (1.0 + bk)**2)
    chi3 = front / (2.0 * c * math.sin(th / 2.0) / d0 * b**(2 * k)
                    + geom * (math.sqrt(c) / d0 * (1.0 + b**(2 * k))
                              + 2.0 * max(math.sqrt(c) / d0,
                                          math.sqrt(c) / math.cos(3.0 * th)) * bk))
    chi4 = ((math.sin(math.pi / 2.0 - 3.0 * th) + math.cos(2.0 * th)) * front
            / ((1.0 - bk)**2 + 2.0 * geom * (1.0 + bk)**2))
    return min(real, chi1, chi2, chi3, chi4)


def psi_k(k: int, b: float, params: BoundParams | None = None) -> float:
    """Non-shifted k-step family, k >= 2 and 0 <= b = ||B|| < 1.

    At b = 0 the method coincides with usual gradient descent (normalized
    bound 2).
    """
    if k < 2:
        raise ValueError(f"psi_k needs k >= 2, got {k}")
    if not 0.0 <= b < 1.0:
        raise ValueError(f"psi_k needs 0 <= b < 1, got {b}")
    if b == 0.0:
        return 2.0
    if params is None:
        params = default_params(shifted=False, k=k)
    _check_params(params, shifted=False, k=k)
    th, d0 = params.theta0, params.delta0
    bk = b**k
    geom = _geom(k, b)
    front = (1.0 - b)**2 * (1.0 - bk)**2
    c = (1.0 + 2.0 * d0 * math.sin(1.5 * th) + d0**2) / math.cos(1.5 * th)**2

    real = front / geom
    psi1 = front / (4.0 * b**(2 * k) + SQRT2 * geom * (1.0 + bk)**2)
    psi2 = front / (((1.0 - bk)**2 / (2.0 * math.sin(th / 2.0))
                     + SQRT2 * geom) * (1.0 + bk)**2)
    psi3 = front / (2.0 * c * math.sin(th / 2.0) / d0 * b**(2 * k)
                    + geom * (math.sqrt(c) / d0 * (1.0 + b**(2 * k))
                              + 2.0 * max(math.sqrt(c) / d0,
                                          math.sqrt(c) / math.cos(2.0 * th)) * bk))
    return min(real, psi1, psi2, psi3)


# ---------------------------------------------------------------------------
# general bounds through the resolvent constant s(B^k)

def _general_min_k1(nH, nM, nB, s, params, shifted):
    th, d0 = params.theta0, params.delta0
    hm2 = nH**2 * nM**2
    cases = []
    if shifted:
        cases.append(2.0 / (hm2 * s**2))                              # real
        cases.append((math.sin(math.pi / 2.0 - 3.0 * th)
                      + math.cos(2.0 * th)) / (hm2 * (1.0 + nB)**2 * s**2))
    cases.append(1.0 / (4.0 * hm2 * nB**2 * s**4))
    cases.append(2.0 * math.sin(th / 2.0) / (hm2 * (1.0 + 2.0 * nB)**2 * s**4))
    half = 2.5 if shifted else 1.5
    cases.append(d0 * math.cos(half * th)**2
                 / (2.0 * (1.0 + 2.0 * d0 * math.sin(half * th) + d0**2))
                 / (hm2 * nB**2 * s**4))
    return min(cases)


def _general_min_k(nH, nM, nT, nX, nBk, s, params, shifted):
    th, d0 = params.theta0, params.delta0
    ht2 = nH**2 * nM**2 * nT**2
    xk = nM**2 * nX

    def inv(denom):
        return math.inf if denom == 0.0 else 1.0 / denom

    cases = []
    if shifted:
        cases.append(inv((ht2 / 2.0 + xk) * s**2))                    # real
        angle = math.sin(math.pi / 2.0 - 3.0 * th) + math.cos(2.0 * th)
        cases.append(angle * inv((ht2 * (1.0 + nBk)**2
                                  + 2.0 * xk * (1.0 + 2.0 * nBk)**2) * s**4))
        half, cos_cap = 2.5, math.cos(3.0 * th)
    else:
        cases.append(inv(xk * s**2))                                   # real
        half, cos_cap = 1.5, math.cos(2.0 * th)

    cases.append(inv((4.0 * ht2 * nBk**2
                      + SQRT2 * xk * (1.0 + 2.0 * nBk)**2) * s**4))
    cases.append(inv((ht2 / (2.0 * math.sin(th / 2.0)) + SQRT2 * xk)
                     * (1.0 + 2.0 * nBk)**2 * s**4))
    c = (1.0 + 2.0 * d0 * math.sin(half * th) + d0**2) / math.cos(half * th)**2
    cases.append(inv((2.0 * c * math.sin(th / 2.0) / d0 * ht2 * nBk**2
                      + math.sqrt(c) / d0 * xk * (1.0 + 2.0 * nBk + 2.0 * nBk**2)
                      + 2.0 * max(math.sqrt(c) / d0, math.sqrt(c) / cos_cap)
                      * xk * (nBk + nBk**2)) * s**4))
    return min(cases)


def matrix_bound(problem: RealInverseProblem, method: MethodSpec,
                 params: BoundParams | None = None) -> StepBound:
    """Sufficient step bound for a matrix problem and a one-shot method.

    Needs only rho(B) < 1.  Evaluates the s(B^k)-based bounds from actual
    operator norms; when additionally ||B|| < 1, also evaluates the sharper
    closed form and reports the larger of the two sufficient values.
    GD method kinds are forwarded to their exact bounds.
    """
    if method.kind is SolverKind.USUAL_GD:
        return gd_bound(problem)
    if method.kind is SolverKind.SHIFTED_GD:
        return shifted_gd_bound(problem)
    rho = spectral_radius_of(problem.B)
    if rho >= 1.0:
        raise ValueError(f"bounds need rho(B) < 1, got {rho:.6g}")

    shifted = method.kind is SolverKind.SHIFTED_K_STEP
    k = method.k
    if params is None:
        params = default_params(shifted, k)
    _check_params(params, shifted, k)
    nB = spectral_norm(problem.B)
    nH = spectral_norm(problem.H)
    nM = spectral_norm(problem.M)
    norms = {"norm_B": nB, "norm_H": nH, "norm_M": nM}
    family = "shifted-one-shot" if shifted else "one-shot"

    if nB == 0.0:
        # the method degenerates: for k = 1 the cubic-root thresholds apply,
        # for k >= 2 it is plain (shifted) gradient descent with data map H M
        if k == 1:
            hm2 = nH**2 * nM**2
            value = (GOLDEN_THRESHOLD / hm2) if shifted else (1.0 / hm2)
            return StepBound(value=value, formula_id=f"{family}:zero-B",
                             params=params, norm_inputs=norms)
        g = spectral_norm(problem.H @ problem.M)
        value = (1.0 if shifted else 2.0) / g**2
        norms["data_map_norm"] = g
        return StepBound(value=value, formula_id=f"{family}:zero-B-gd-limit",
                         params=params, norm_inputs=norms)

    if k == 1:
        s = spectral.s_functional(problem.B)
        norms["s_Bk"] = s
        general = _general_min_k1(nH, nM, nB, s, params, shifted)
    else:
        t = spectral.tux(problem.B, problem.H, k)
        Bk = np.linalg.matrix_power(problem.B, k)
        s = spectral.s_functional(Bk)
        nT, nX, nBk = spectral_norm(t.T), spectral_norm(t.X), spectral_norm(Bk)
        norms.update({"s_Bk": s, "norm_Tk": nT, "norm_Xk": nX, "norm_Bk": nBk})
        general = _general_min_k(nH, nM, nT, nX, nBk, s, params, shifted)

    value = general
    formula = f"{family}:resolvent"
    if nB < 1.0:
        hm2 = nH**2 * nM**2
        if shifted:
            closed = (chi_k1(nB, params) if k == 1 else chi_k(k, nB, params)) / hm2
        else:
            closed = (psi_k1(nB, params) if k == 1 else psi_k(k, nB, params)) / hm2
        if closed > value:
            value = closed
            formula = f"{family}:closed-form"
    return StepBound(value=value, formula_id=formula, params=params,
                     norm_inputs=norms)

"""Linear inverse problems driven by a fixed-point state equation.

The forward model is ``u = B u + M sigma + F`` with measurement ``f = H u``.
Recovering ``sigma`` from ``f`` is well posed when the state iteration
contracts (``rho(B) < 1``) and ``H (I - B)^{-1} M`` is injective.  This module
holds the problem containers (real, complex and scalar), the assumption
checks, exact direct/adjoint solves, the realification of complex-state
problems, synthetic generators, and JSON (de)serialization.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

DEFAULT_EPS_RHO = 1e-8
DEFAULT_EPS_INJ = 1e-10


def spectral_norm(a: np.ndarray) -> float:
    """Largest singular value (the operator 2-norm)."""
    return float(np.linalg.norm(a, 2))


def spectral_radius_of(a: np.ndarray) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    return float(np.max(np.abs(np.linalg.eigvals(a))))


@dataclass
class RealInverseProblem:
    """Real problem data ``(B, M, H, F)``.

    Shapes: B is (n_u, n_u), M is (n_u, n_sigma), H is (n_f, n_u) and F is
    (n_u,).  Arrays are coerced to float64 and frozen after construction.
    """

    B: np.ndarray
    M: np.ndarray
    H: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.B, dtype=float)
        if B.ndim != 2 or B.shape[0] != B.shape[1] or B.shape[0] < 1:
            raise ValueError(f"B must be square and non-empty, got shape {B.shape}")
        n_u = B.shape[0]
        M = np.asarray(self.M, dtype=float)
        if M.ndim != 2 or M.shape[0] != n_u or M.shape[1] < 1:
            raise ValueError(f"M must have shape ({n_u}, n_sigma), got {M.shape}")
        H = np.asarray(self.H, dtype=float)
        if H.ndim != 2 or H.shape[1] != n_u or H.shape[0] < 1:
            raise ValueError(f"H must have shape (n_f, {n_u}), got {H.shape}")
        F = np.asarray(self.F, dtype=float).reshape(-1)
        if F.shape != (n_u,):
            raise ValueError(f"F must have length {n_u}, got {F.shape}")
        for a in (B, M, H, F):
            a.setflags(write=False)
        self.B, self.M, self.H, self.F = B, M, H, F

    @property
    def n_u(self) -> int:
        return self.B.shape[0]

    @property
    def n_sigma(self) -> int:
        return self.M.shape[1]

    @property
    def n_f(self) -> int:
        return self.H.shape[0]


@dataclass
class ComplexInverseProblem:
    """Complex-state problem data; same shapes as :class:`RealInverseProblem`."""

    B: np.ndarray
    M: np.ndarray
    H: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.B, dtype=complex)
        if B.ndim != 2 or B.shape[0] != B.shape[1] or B.shape[0] < 1:
            raise ValueError(f"B must be square and non-empty, got shape {B.shape}")
        n_u = B.shape[0]
        M = np.asarray(self.M, dtype=complex)
        if M.ndim != 2 or M.shape[0] != n_u or M.shape[1] < 1:
            raise ValueError(f"M must have shape ({n_u}, n_sigma), got {M.shape}")
        H = np.asarray(self.H, dtype=complex)
        if H.ndim != 2 or H.shape[1] != n_u or H.shape[0] < 1:
            raise ValueError(f"H must have shape (n_f, {n_u}), got {H.shape}")
        F = np.asarray(self.F, dtype=complex).reshape(-1)
        if F.shape != (n_u,):
            raise ValueError(f"F must have length {n_u}, got {F.shape}")
        for a in (B, M, H, F):
            a.setflags(write=False)
        self.B, self.M, self.H, self.F = B, M, H, F

    @property
    def n_u(self) -> int:
        return self.B.shape[0]

    @property
    def n_sigma(self) -> int:
        return self.M.shape[1]

    @property
    def n_f(self) -> int:
        return self.H.shape[0]


@dataclass
class AssumptionReport:
    """Outcome of checking the standing assumptions on a problem."""

    spectral_radius_B: float
    min_singular_value: float
    max_singular_value: float
    is_valid: bool
    messages: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "spectral_radius_B": self.spectral_radius_B,
            "min_singular_value": self.min_singular_value,
            "max_singular_value": self.max_singular_value,
            "is_valid": self.is_valid,
            "messages": list(self.messages),
        }


@dataclass(frozen=True)
class ScalarProblem:
    """The scalar case: state factor b in (-1, 1), nonzero h and m."""

    b: float
    h: float
    m: float

    def __post_init__(self):
        if not -1.0 < self.b < 1.0:
            raise ValueError(f"b must lie in (-1, 1), got {self.b}")
        if self.h == 0.0 or self.m == 0.0:
            raise ValueError("h and m must be nonzero")

    def as_problem(self) -> RealInverseProblem:
        """Embed as a 1x1 :class:`RealInverseProblem` with F = 0."""
        return RealInverseProblem(
            B=[[self.b]], M=[[self.m]], H=[[self.h]], F=[0.0]
        )


def validate(problem, eps_rho: float = DEFAULT_EPS_RHO,
             eps_inj: float = DEFAULT_EPS_INJ) -> AssumptionReport:
    """Check contraction of B and injectivity of ``H (I - B)^{-1} M``.

    Valid iff ``rho(B) < 1 - eps_rho`` and the smallest singular value of the
    explicitly formed ``H (I - B)^{-1} M`` exceeds ``eps_inj`` times the
    largest one.  Works for real and complex problems alike.
    """
    messages: list[str] = []
    rho = spectral_radius_of(problem.B)
    contraction_ok = rho < 1.0 - eps_rho
    if not contraction_ok:
        messages.append(
            f"spectral radius of B is {rho:.6g}, need < 1 - {eps_rho:g}"
        )

    eye = np.eye(problem.n_u, dtype=problem.B.dtype)
    smin = 0.0
    smax = 0.0
    try:
        G = problem.H @ np.linalg.solve(eye - problem.B, problem.M)
        svals = np.linalg.svd(G, compute_uv=False)
        smax = float(svals[0])
        smin = float(svals[-1])
        if problem.n_f < problem.n_sigma:
            smin = 0.0
            messages.append(
                f"only {problem.n_f} measurement rows for {problem.n_sigma} "
                "parameters; the parameter-to-data map cannot be injective"
            )
    except np.linalg.LinAlgError:
        messages.append("state operator I - B is singular")

    injectivity_ok = smin > eps_inj * smax
    if not injectivity_ok and not messages:
        messages.append(
            f"smallest singular value {smin:.6g} of the parameter-to-data map "
            f"is not above {eps_inj:g} times the largest ({smax:.6g})"
        )
    return AssumptionReport(
        spectral_radius_B=rho,
        min_singular_value=smin,
        max_singular_value=smax,
        is_valid=bool(contraction_ok and injectivity_ok),
        messages=messages,
    )


def exact_state(problem: RealInverseProblem, sigma) -> np.ndarray:
    """Solve ``u = B u + M sigma + F`` by a direct dense solve."""
    sigma = np.asarray(sigma, dtype=float).reshape(-1)
    eye = np.eye(problem.n_u)
    return np.linalg.solve(eye - problem.B, problem.M @ sigma + problem.F)


def adjoint_from_state(problem: RealInverseProblem, u, f) -> np.ndarray:
    """Solve ``p = B* p + H*(H u - f)`` for an already computed state u."""
    f = np.asarray(f, dtype=float).reshape(-1)
    eye = np.eye(problem.n_u)
    rhs = problem.H.T @ (problem.H @ np.asarray(u, dtype=float) - f)
    return np.linalg.solve(eye - problem.B.T, rhs)


def exact_adjoint(problem: RealInverseProblem, sigma, f) -> np.ndarray:
    """Solve ``p = B* p + H*(H u(sigma) - f)``; the cost gradient is M* p."""
    return adjoint_from_state(problem, exact_state(problem, sigma), f)


def cost(problem: RealInverseProblem, sigma, f) -> float:
    """Least-squares misfit ``0.5 * ||H u(sigma) - f||^2``."""
    f = np.asarray(f, dtype=float).reshape(-1)
    r = problem.H @ exact_state(problem, sigma) - f
    return 0.5 * float(r @ r)


def gradient(problem: RealInverseProblem, sigma, f) -> np.ndarray:
    """Gradient of the misfit, ``M* p(sigma)``."""
    return problem.M.T @ exact_adjoint(problem, sigma, f)


def fixed_point_state(problem: RealInverseProblem, sigma, u0=None,
                      tol: float = 1e-12, max_iter: int = 200000) -> np.ndarray:
    """Solve the state equation by the plain fixed-point iteration.

    Converges geometrically whenever ``rho(B) < 1``; kept as the iterative
    counterpart of :func:`exact_state` (and used as a cross-check oracle).
    """
    sigma = np.asarray(sigma, dtype=float).reshape(-1)
    rhs = problem.M @ sigma + problem.F
    u = np.zeros(problem.n_u) if u0 is None else np.asarray(u0, dtype=float).copy()
    for _ in range(max_iter):
        u_next = problem.B @ u + rhs
        if np.linalg.norm(u_next - u) <= tol * (1.0 + np.linalg.norm(u_next)):
            return u_next
        u = u_next
    raise RuntimeError(f"fixed-point state iteration did not reach {tol:g} "
                       f"in {max_iter} sweeps (rho(B) too close to 1?)")


def realify(problem: ComplexInverseProblem) -> RealInverseProblem:
    """Rewrite a complex-state problem as a real one of doubled dimension.

    With B = B1 + i B2 etc., the real system uses the block matrices
    ``[[B1, -B2], [B2, B1]]`` for B and H, and stacks [M1; M2], [F1; F2].
    The spectrum of the new B is Spec(B) together with its conjugate, so
    contraction and injectivity carry over.
    """
    B1, B2 = problem.B.real, problem.B.imag
    M1, M2 = problem.M.real, problem.M.imag
    H1, H2 = problem.H.real, problem.H.imag
    F1, F2 = problem.F.real, problem.F.imag
    B = np.block([[B1, -B2], [B2, B1]])
    H = np.block([[H1, -H2], [H2, H1]])
    M = np.vstack([M1, M2])
    F = np.concatenate([F1, F2])
    return RealInverseProblem(B=B, M=M, H=H, F=F)


def random_contraction(n_u: int, n_sigma: int, n_f: int, target_norm: float,
                       seed: int, max_tries: int = 50) -> RealInverseProblem:
    """Draw a dense Gaussian problem with ``||B||_2`` rescaled to target_norm.

    The spectral norm (not the spectral radius) is pinned because the descent
    step bounds are stated in ``||B||``.  Regenerates, up to ``max_tries``
    times, in the unlikely event the drawn problem fails validation.
    Deterministic in ``seed``.
    """
    if not 0.0 <= target_norm < 1.0:
        raise ValueError(f"target_norm must lie in [0, 1), got {target_norm}")
    if n_sigma > min(n_u, n_f):
        raise ValueError(
            f"injectivity needs n_sigma <= min(n_u, n_f); "
            f"got n_sigma={n_sigma}, n_u={n_u}, n_f={n_f}")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        B = rng.standard_normal((n_u, n_u))
        if target_norm == 0.0:
            B = np.zeros((n_u, n_u))
        else:
            B *= target_norm / spectral_norm(B)
        problem = RealInverseProblem(
            B=B,
            M=rng.standard_normal((n_u, n_sigma)),
            H=rng.standard_normal((n_f, n_u)),
            F=rng.standard_normal(n_u),
        )
        if validate(problem).is_valid:
            return problem
    raise RuntimeError(f"could not draw a valid problem in {max_tries} tries")


def _five_point_operator(coeff: np.ndarray, n: int, h: float) -> np.ndarray:
    """Dense matrix of the variable-coefficient operator -div(c grad u).

    ``coeff`` is a nodal field on the full (n+2) x (n+2) grid; edge
    coefficients are arithmetic means of the two endpoint values.  Rows and
    columns run over the n*n interior nodes, ordered x-fastest.
    """
    A = np.zeros((n * n, n * n))
    inv_h2 = 1.0 / (h * h)

    def idx(i, j):
        return (j - 1) * n + (i - 1)

    for j in range(1, n + 1):
        for i in range(1, n + 1):
            row = idx(i, j)
            ce = 0.5 * (coeff[i, j] + coeff[i + 1, j])
            cw = 0.5 * (coeff[i, j] + coeff[i - 1, j])
            cn = 0.5 * (coeff[i, j] + coeff[i, j + 1])
            cs = 0.5 * (coeff[i, j] + coeff[i, j - 1])
            A[row, row] = (ce + cw + cn + cs) * inv_h2
            if i < n:
                A[row, idx(i + 1, j)] = -ce * inv_h2
            if i > 1:
                A[row, idx(i - 1, j)] = -cw * inv_h2
            if j < n:
                A[row, idx(i, j + 1)] = -cn * inv_h2
            if j > 1:
                A[row, idx(i, j - 1)] = -cs * inv_h2
    return A


def _boundary_rhs(coeff: np.ndarray, g: np.ndarray, n: int, h: float) -> np.ndarray:
    """Right-hand side contributions of Dirichlet data g on the grid boundary."""
    rhs = np.zeros(n * n)
    inv_h2 = 1.0 / (h * h)

    def idx(i, j):
        return (j - 1) * n + (i - 1)

    for j in range(1, n + 1):
        for i in range(1, n + 1):
            row = idx(i, j)
            if i == n:
                rhs[row] += 0.5 * (coeff[i, j] + coeff[i + 1, j]) * g[i + 1, j] * inv_h2
            if i == 1:
                rhs[row] += 0.5 * (coeff[i, j] + coeff[i - 1, j]) * g[i - 1, j] * inv_h2
            if j == n:
                rhs[row] += 0.5 * (coeff[i, j] + coeff[i, j + 1]) * g[i, j + 1] * inv_h2
            if j == 1:
                rhs[row] += 0.5 * (coeff[i, j] + coeff[i, j - 1]) * g[i, j - 1] * inv_h2
    return rhs


def helmholtz_toy(grid_n: int, wavenumber: float, delta: float,
                  seed: int) -> RealInverseProblem:
    """Structured-grid Helmholtz scattering toy on the unit square.

    Discretizes ``div(sigma0_tilde grad u) + wavenumber^2 u = div(sigma grad u0)``
    with homogeneous Dirichlet conditions, on a 5-point finite-difference grid
    with ``grid_n x grid_n`` interior nodes.  The background coefficient is
    ``sigma0_tilde = 1 + delta * sigma_r`` with a seeded random nodal field
    ``sigma_r`` taking values in [1, 2].  Splitting off the random part gives
    the fixed-point form with

    * ``B = -delta * A11^{-1} A12`` (A11: unit-coefficient part incl. the
      wavenumber term; A12: stiffness of the random part alone),
    * ``M = A11^{-1} A2`` where A2 maps a 3x3 piecewise-constant parameter
      basis through the incident field,
    * ``H`` extracting the one-sided boundary flux at every non-corner
      boundary node, and ``F = 0``.

    Raises when the splitting does not contract (``rho(B) >= 1``).
    """
    if grid_n < 4:
        raise ValueError(f"grid_n must be at least 4, got {grid_n}")
    if delta < 0.0:
        raise ValueError(f"delta must be nonnegative, got {delta}")
    n = grid_n
    h = 1.0 / (n + 1)
    rng = np.random.default_rng(seed)
    sigma_r = rng.uniform(1.0, 2.0, size=(n + 2, n + 2))

    ones = np.ones((n + 2, n + 2))
    A11 = _five_point_operator(ones, n, h) - wavenumber**2 * np.eye(n * n)
    A12 = _five_point_operator(sigma_r, n, h)

    if delta == 0.0:
        B = np.zeros((n * n, n * n))
    else:
        B = -delta * np.linalg.solve(A11, A12)
        rho = spectral_radius_of(B)
        if rho >= 1.0:
            raise ValueError(
                f"splitting does not contract (rho(B) = {rho:.4g} >= 1); "
                "reduce delta"
            )

    # incident field: background Helmholtz solve with smooth boundary data
    xs = np.arange(n + 2) * h
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    g = np.cos(wavenumber * gx) + np.sin(wavenumber * gy)
    coeff_full = ones + delta * sigma_r
    A1_full = _five_point_operator(coeff_full, n, h) - wavenumber**2 * np.eye(n * n)
    u0_int = np.linalg.solve(A1_full, _boundary_rhs(coeff_full, g, n, h))

    # parameter basis: indicators of a 3x3 partition of the square,
    # supported on interior nodes only (the parameter vanishes on the boundary)
    patches = []
    for py in range(3):
        for px in range(3):
            chi = np.zeros((n + 2, n + 2))
            for i in range(1, n + 1):
                for j in range(1, n + 1):
                    if (min(int(xs[i] * 3), 2) == px
                            and min(int(xs[j] * 3), 2) == py):
                        chi[i, j] = 1.0
            patches.append(chi)
    # action of -div(chi grad .) on the full incident field: interior part
    # minus the stencil terms carrying the boundary values g of u0
    A2 = np.column_stack([
        _five_point_operator(chi, n, h) @ u0_int - _boundary_rhs(chi, g, n, h)
        for chi in patches
    ])
    M = np.linalg.solve(A11, A2)

    # boundary flux rows: sigma0_tilde * du/dnu ~ -sigma0_tilde(x_b) u_adj / h
    def idx(i, j):
        return (j - 1) * n + (i - 1)

    rows = []
    for i in range(1, n + 1):  # bottom (j=0) and top (j=n+1)
        r = np.zeros(n * n)
        r[idx(i, 1)] = -coeff_full[i, 0] / h
        rows.append(r)
        r = np.zeros(n * n)
        r[idx(i, n)] = -coeff_full[i, n + 1] / h
        rows.append(r)
    for j in range(1, n + 1):  # left (i=0) and right (i=n+1)
        r = np.zeros(n * n)
        r[idx(1, j)] = -coeff_full[0, j] / h
        rows.append(r)
        r = np.zeros(n * n)
        r[idx(n, j)] = -coeff_full[n + 1, j] / h
        rows.append(r)
    H = np.vstack(rows)

    return RealInverseProblem(B=B, M=M, H=H, F=np.zeros(n * n))


# ---------------------------------------------------------------------------
# JSON problem files

def problem_to_dict(problem) -> dict:
    """Serialize a real or complex problem to the JSON problem-file schema."""
    d = {"n_u": problem.n_u, "n_sigma": problem.n_sigma, "n_f": problem.n_f}
    if isinstance(problem, ComplexInverseProblem):
        d["complex"] = {
            name: {
                "re": np.asarray(a.real, dtype=float).ravel().tolist(),
                "im": np.asarray(a.imag, dtype=float).ravel().tolist(),
            }
            for name, a in (("B", problem.B), ("M", problem.M),
                            ("H", problem.H), ("F", problem.F))
        }
    else:
        d["B"] = problem.B.ravel().tolist()
        d["M"] = problem.M.ravel().tolist()
        d["H"] = problem.H.ravel().tolist()
        d["F"] = problem.F.tolist()
    return d


def problem_from_dict(d: dict):
    """Inverse of :func:`problem_to_dict`; raises ValueError on bad input."""
    try:
        n_u, n_sigma, n_f = int(d["n_u"]), int(d["n_sigma"]), int(d["n_f"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"problem file misses valid dimensions: {exc}") from exc
    shapes = {"B": (n_u, n_u), "M": (n_u, n_sigma), "H": (n_f, n_u), "F": (n_u,)}

    def reshape(name, flat):
        a = np.asarray(flat, dtype=float)
        want = shapes[name]
        if a.size != int(np.prod(want)):
            raise ValueError(f"field {name} has {a.size} entries, "
                             f"expected {int(np.prod(want))}")
        return a.reshape(want)

    if "complex" in d:
        parts = d["complex"]
        arrays = {}
        for name in ("B", "M", "H", "F"):
            try:
                re = reshape(name, parts[name]["re"])
                im = reshape(name, parts[name]["im"])
            except (KeyError, TypeError) as exc:
                raise ValueError(f"complex field {name} malformed: {exc}") from exc
            arrays[name] = re + 1j * im
        return ComplexInverseProblem(**arrays)

    try:
        arrays = {name: reshape(name, d[name]) for name in ("B", "M", "H", "F")}
    except KeyError as exc:
        raise ValueError(f"problem file misses field {exc}") from exc
    return RealInverseProblem(**arrays)


def save_problem(problem, path) -> None:
    with open(path, "w") as fh:
        json.dump(problem_to_dict(problem), fh)


def load_problem(path):
    with open(path) as fh:
        return problem_from_dict(json.load(fh))

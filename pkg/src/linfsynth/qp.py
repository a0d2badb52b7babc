"""Dense convex QP solver: log-barrier path following with Newton centering.

Solves::

    minimize    1/2 x'Qx + q'x
    subject to  Gx <= h,  Ax = b

For an increasing sequence gamma_k the barrier function

    phi(x, gamma) = gamma * (1/2 x'Qx + q'x) - sum_i log(h_i - g_i x)

is minimized by Newton's method, warm-started from the previous center.
On exit the objective is within m / gamma of the constrained optimum.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .errors import ConfigError, DomainViolation, Infeasible, LinearSolveFailure

# Newton decrement threshold for declaring a point centered.
CENTERING_TOL = 1e-10
KKT_REG = 1e-12
# Below this squared decrement a stalled Newton sequence counts as centered.
STALL_DEC2 = 1e-6


class QpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    MAX_ITERATIONS = "max_iterations"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True, eq=False)
class QpProblem:
    """``min 1/2 x'Qx + q'x  s.t.  Gx <= h, Ax = b``.

    ``start`` is an optional hint for a strictly feasible point; it is
    verified before use.
    """

    Q: np.ndarray
    q: np.ndarray
    G: Optional[np.ndarray] = None
    h: Optional[np.ndarray] = None
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    start: Optional[np.ndarray] = None

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        q = np.asarray(self.q, dtype=float).ravel()
        n = q.shape[0]
        if Q.shape != (n, n):
            raise ConfigError(f"Q has shape {Q.shape}, expected {(n, n)}")
        Q = 0.5 * (Q + Q.T)
        G = np.zeros((0, n)) if self.G is None else np.asarray(self.G, dtype=float).reshape(-1, n)
        h = np.zeros(0) if self.h is None else np.asarray(self.h, dtype=float).ravel()
        A = np.zeros((0, n)) if self.A is None else np.asarray(self.A, dtype=float).reshape(-1, n)
        b = np.zeros(0) if self.b is None else np.asarray(self.b, dtype=float).ravel()
        if G.shape[0] != h.shape[0]:
            raise ConfigError("G and h disagree on the number of inequality rows")
        if A.shape[0] != b.shape[0]:
            raise ConfigError("A and b disagree on the number of equality rows")
        start = None if self.start is None else np.asarray(self.start, dtype=float).ravel()
        if start is not None and start.shape[0] != n:
            raise ConfigError("start hint has the wrong dimension")
        for name, val in (("Q", Q), ("q", q), ("G", G), ("h", h), ("A", A), ("b", b), ("start", start)):
            if val is not None:
                val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def m(self) -> int:
        return self.G.shape[0]

    @property
    def p(self) -> int:
        return self.A.shape[0]

    @property
    def unconstrained(self) -> bool:
        return self.m == 0 and self.p == 0

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.Q @ x + self.q @ x)


@dataclass(frozen=True)
class SolverSettings:
    gamma0: float = 1.0
    mu: float = 10.0
    tol_gap: float = 1e-8
    max_outer: int = 50
    max_newton: int = 50
    ls_alpha: float = 0.25
    ls_beta: float = 0.5

    def __post_init__(self):
        if not self.gamma0 > 0:
            raise ConfigError("gamma0 must be positive")
        if not self.mu > 1:
            raise ConfigError("mu must exceed 1")
        if not 0 < self.ls_alpha < 0.5:
            raise ConfigError("ls_alpha must lie in (0, 0.5)")
        if not 0 < self.ls_beta < 1:
            raise ConfigError("ls_beta must lie in (0, 1)")
        if not self.tol_gap > 0:
            raise ConfigError("tol_gap must be positive")
        if self.max_outer < 1 or self.max_newton < 1:
            raise ConfigError("iteration limits must be positive")


@dataclass(frozen=True, eq=False)
class QpSolution:
    x: np.ndarray
    objective: float
    gap_bound: float
    outer_iters: int
    newton_iters: int
    status: QpStatus
    z: np.ndarray = field(default_factory=lambda: np.zeros(0))
    nu: np.ndarray = field(default_factory=lambda: np.zeros(0))
    history: tuple = ()

    @property
    def optimal(self) -> bool:
        return self.status is QpStatus.OPTIMAL

    def kkt_residual(self, problem: QpProblem) -> float:
        """Max of stationarity, primal infeasibility and complementarity."""
        x = self.x
        r = problem.Q @ x + problem.q
        parts = []
        if problem.m:
            r = r + problem.G.T @ self.z
            s = problem.h - problem.G @ x
            parts += [np.max(np.maximum(-s, 0.0)), np.max(np.abs(self.z * s)),
                      np.max(np.maximum(-self.z, 0.0))]
        if problem.p:
            r = r + problem.A.T @ self.nu
            parts.append(np.max(np.abs(problem.A @ x - problem.b)))
        parts.append(np.max(np.abs(r)))
        return float(max(parts))

    def summary(self) -> dict:
        return {"status": self.status.value, "objective": self.objective,
                "gap_bound": self.gap_bound, "outer_iters": self.outer_iters,
                "newton_iters": self.newton_iters}


def _margin(problem: QpProblem) -> float:
    hinf = float(np.max(np.abs(problem.h))) if problem.m else 0.0
    return 1e-6 * (1.0 + hinf)


def _eq_ok(problem: QpProblem, x) -> bool:
    if not problem.p:
        return True
    binf = float(np.max(np.abs(problem.b)))
    return float(np.max(np.abs(problem.A @ x - problem.b))) <= 1e-10 * (1.0 + binf)


def _strict(problem: QpProblem, x, margin) -> bool:
    if problem.m == 0:
        return True
    s = problem.h - problem.G @ x
    return bool(np.all(s > 0) and np.all(s >= margin))


def _solve_kkt(H, g, A, resid=None):
    """Solve [[H, A'], [A, 0]] [dx; w] = [-g; -resid]."""
    n = H.shape[0]
    # relative to each diagonal entry: barrier curvature spans many decades
    H = H + KKT_REG * max(1.0, float(np.max(np.abs(np.diag(H))))) * np.eye(n)
    if A.shape[0] == 0:
        try:
            c = scipy.linalg.cho_factor(H, check_finite=False)
            dx = scipy.linalg.cho_solve(c, -g, check_finite=False)
        except np.linalg.LinAlgError:
            dx = np.linalg.lstsq(H, -g, rcond=None)[0]
        if not np.all(np.isfinite(dx)):
            raise LinearSolveFailure("Newton system is numerically singular")
        return dx, np.zeros(0)
    p = A.shape[0]
    K = np.block([[H, A.T], [A, np.zeros((p, p))]])
    rhs = np.concatenate([-g, np.zeros(p) if resid is None else -resid])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    if not np.all(np.isfinite(sol)):
        raise LinearSolveFailure("KKT system is numerically singular")
    return sol[:n], sol[n:]


def _solve_equality_qp(problem: QpProblem) -> QpSolution:
    """Closed-form solve when there are no inequality rows."""
    dx, w = _solve_kkt(problem.Q, problem.q, problem.A,
                       -problem.b if problem.p else None)
    x = dx
    resid = problem.Q @ x + problem.q + problem.A.T @ w
    scale = 1.0 + float(np.max(np.abs(problem.q))) + float(np.max(np.abs(problem.Q))) * (1.0 + float(np.max(np.abs(x))))
    if np.max(np.abs(resid)) > 1e-6 * scale or not _eq_ok(problem, x):
        raise LinearSolveFailure("equality-constrained QP has a singular KKT matrix")
    return QpSolution(x, problem.objective(x), 0.0, 0, 1, QpStatus.OPTIMAL,
                      np.zeros(0), w, (problem.objective(x),))


def barrier_objective(problem: QpProblem, x, gamma: float) -> float:
    """gamma * f(x) - sum(log(h - Gx)); raises outside the open domain."""
    x = np.asarray(x, dtype=float)
    s = problem.h - problem.G @ x
    if np.any(s <= 0):
        raise DomainViolation("point is not strictly inside Gx < h")
    return float(gamma * problem.objective(x) - np.sum(np.log(s)))


def _center(problem: QpProblem, x, gamma, settings: SolverSettings):
    """Damped Newton on phi(., gamma). Returns (x, steps, converged)."""
    Q, q, G, h, A = problem.Q, problem.q, problem.G, problem.h, problem.A
    x = np.array(x, dtype=float)
    s = h - G @ x
    if np.any(s <= 0):
        raise DomainViolation("centering needs a strictly feasible start")
    Qx = Q @ x
    phi = gamma * (0.5 * x @ Qx + q @ x) - np.sum(np.log(s))
    prev = np.inf
    for step in range(settings.max_newton + 1):
        inv_s = 1.0 / s
        g = gamma * (Qx + q) + G.T @ inv_s
        H = gamma * Q + (G.T * inv_s ** 2) @ G
        dx, _ = _solve_kkt(H, g, A)
        dec2 = float(-g @ dx)
        if np.sqrt(max(dec2, 0.0)) <= CENTERING_TOL:
            return x, step, True
        if dec2 < STALL_DEC2 and dec2 > 0.5 * prev:
            # decrement has hit its rounding floor (slacks ~ 1/gamma lose digits)
            return x, step, True
        prev = dec2
        if step == settings.max_newton:
            break
        t = 1.0
        while True:
            x_new = x + t * dx
            s_new = h - G @ x_new
            if np.all(s_new > 0):
                break
            t *= settings.ls_beta
            if t < 1e-14:
                return x, step, dec2 < 1e-6
        if np.sqrt(max(dec2, 0.0)) >= 0.25 or t < 1.0:
            while True:
                Qx_new = Q @ x_new
                phi_new = gamma * (0.5 * x_new @ Qx_new + q @ x_new) - np.sum(np.log(s_new))
                if phi_new <= phi - settings.ls_alpha * t * dec2:
                    break
                t *= settings.ls_beta
                if t < 1e-14:
                    # no representable decrease left at this gamma
                    return x, step, dec2 < 1e-6
                x_new = x + t * dx
                s_new = h - G @ x_new
        else:
            # quadratic-convergence region: the full step is accepted
            Qx_new = Q @ x_new
            phi_new = gamma * (0.5 * x_new @ Qx_new + q @ x_new) - np.sum(np.log(s_new))
        x, s, Qx, phi = x_new, s_new, Qx_new, phi_new
    return x, settings.max_newton, False


def newton_centering(problem: QpProblem, x0, gamma: float,
                     settings: SolverSettings = SolverSettings()) -> np.ndarray:
    """Approximate minimizer of the barrier function at ``gamma``."""
    return _center(problem, x0, gamma, settings)[0]


def _path_following(problem: QpProblem, x, settings: SolverSettings,
                    stop: Optional[Callable[[np.ndarray], bool]] = None):
    gamma = settings.gamma0
    history = []
    newton = 0
    status = QpStatus.MAX_ITERATIONS
    outer = 0
    for outer in range(1, settings.max_outer + 1):
        x, steps, ok = _center(problem, x, gamma, settings)
        newton += steps
        history.append(problem.objective(x))
        if stop is not None and stop(x):
            status = QpStatus.OPTIMAL
            break
        if ok and problem.m / gamma <= settings.tol_gap:
            status = QpStatus.OPTIMAL
            break
        if outer < settings.max_outer:
            gamma *= settings.mu
    return x, gamma, outer, newton, status, tuple(history)


def find_strictly_feasible(problem: QpProblem,
                           settings: SolverSettings = SolverSettings()) -> np.ndarray:
    """Point with Gx < h (by a margin) and Ax = b.

    Uses ``problem.start`` when it qualifies, then the least-norm solution of
    Ax = b, and finally a phase-I program ``min s  s.t. Gx - h <= s``.
    """
    margin = _margin(problem)
    if problem.start is not None and _strict(problem, problem.start, margin) \
            and _eq_ok(problem, problem.start):
        return np.array(problem.start)
    n = problem.n
    if problem.p:
        x0 = np.linalg.lstsq(problem.A, problem.b, rcond=None)[0]
        if not _eq_ok(problem, x0):
            raise Infeasible("equality constraints Ax = b are inconsistent")
    else:
        x0 = np.zeros(n)
    if _strict(problem, x0, margin):
        return x0
    # phase I over (x, s); s >= -1 keeps the auxiliary program bounded
    G, h = problem.G, problem.h
    m = problem.m
    G1 = np.vstack([np.hstack([G, -np.ones((m, 1))]),
                    np.hstack([np.zeros((1, n)), -np.ones((1, 1))])])
    h1 = np.concatenate([h, [1.0]])
    A1 = np.hstack([problem.A, np.zeros((problem.p, 1))]) if problem.p else None
    Q1 = np.zeros((n + 1, n + 1))
    q1 = np.zeros(n + 1)
    q1[-1] = 1.0
    s0 = float(np.max(G @ x0 - h)) + 1.0
    start = np.concatenate([x0, [max(s0, 0.0) + 1.0]])
    phase1 = QpProblem(Q1, q1, G1, h1, A1, problem.b if problem.p else None)
    x1, *_ = _path_following(phase1, start, settings, stop=lambda z: z[-1] < -2.0 * margin)
    x = x1[:n]
    # a feasible set thinner than the margin is still usable if its interior is non-empty
    if not _strict(problem, x, 0.0):
        raise Infeasible("no strictly feasible point: phase-I optimum leaves positive slack")
    return x


def _duals(problem: QpProblem, x, gamma):
    """Multipliers from one more Newton system at the final iterate.

    ``z = (1/s + G dx / s^2) / gamma`` and ``nu = w / gamma`` satisfy
    stationarity at ``x + dx`` exactly; plain ``1 / (gamma s)`` loses digits
    once slacks reach ~1/gamma.
    """
    Q, q, G, h, A = problem.Q, problem.q, problem.G, problem.h, problem.A
    s = h - G @ x
    inv_s = 1.0 / s
    g = gamma * (Q @ x + q) + G.T @ inv_s
    H = gamma * Q + (G.T * inv_s ** 2) @ G
    try:
        dx, w = _solve_kkt(H, g, A)
    except LinearSolveFailure:
        return inv_s / gamma, np.zeros(problem.p)
    z = np.maximum(inv_s + (G @ dx) * inv_s ** 2, 0.0) / gamma
    return z, w / gamma


def _polish(problem: QpProblem, x, z):
    """Re-solve with the barrier's active set as equalities.

    The barrier point is only ``m / gamma`` optimal; when the guessed active
    set is right, the equality-constrained QP lands on the vertex exactly.
    Returns ``None`` unless the result is feasible, dual feasible and no worse.
    """
    G, h = problem.G, problem.h
    s = h - G @ x
    act = z > s
    if not act.any():
        return None
    n, p = problem.n, problem.p
    Aw = np.vstack([problem.A, G[act]])
    bw = np.concatenate([problem.b, h[act]])
    k = Aw.shape[0]
    K = np.block([[problem.Q, Aw.T], [Aw, np.zeros((k, k))]])
    rhs = -np.concatenate([problem.Q @ x + problem.q, Aw @ x - bw])
    # minimum-norm step: directions the objective cannot see stay put
    try:
        sol = np.linalg.lstsq(K, rhs, rcond=1e-13)[0]
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(sol)):
        return None
    dx, w = sol[:n], sol[n:]
    xp = x + dx
    za = w[p:]
    scale = 1.0 + np.abs(h)
    if (np.any(G @ xp - h > 1e-12 * scale) or np.any(za < 0)
            or np.any(np.abs(problem.A @ xp - problem.b) > 1e-12 * (1.0 + np.abs(problem.b)))
            or problem.objective(xp) > problem.objective(x)):
        return None
    zp = np.zeros(problem.m)
    zp[act] = za
    return xp, zp, w[:p]


def solve_qp(problem: QpProblem, settings: SolverSettings = SolverSettings()) -> QpSolution:
    """Barrier path following from ``gamma0`` until ``m / gamma <= tol_gap``.

    Raises
    ------
    Infeasible
        No strictly feasible point exists.
    LinearSolveFailure
        A Newton/KKT system could not be solved.
    """
    if problem.m == 0:
        return _solve_equality_qp(problem)
    x = find_strictly_feasible(problem, settings)
    x, gamma, outer, newton, status, history = _path_following(problem, x, settings)
    z, nu = _duals(problem, x, gamma)
    polished = _polish(problem, x, z)
    if polished is not None:
        x, z, nu = polished
    return QpSolution(x, problem.objective(x), problem.m / gamma, outer, newton,
                      status, z, nu, history)

"""Penalized weight estimation.

Every penalty except ridge and plain least squares is rewritten as a QP in
the variables ``(mu?, omega, c?, d?)``:

* ``c`` bounds ``||omega||_inf`` through the rows ``-c <= omega_j <= c``;
* ``d`` bounds ``|omega|`` componentwise through ``-d <= omega <= d``.

The closed forms for orthonormal designs (soft thresholding, the two-control
L-infinity solution and the L1-ball projection) live here too; the tests
use them as oracles for the QP path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import RankDeficient, SolverFailure, UnsupportedPenalty
from .model import (CenteredDesign, PanelData, PenaltyKind, PenaltySpec, WeightFit,
                    center_design, make_fit)
from .qp import QpProblem, SolverSettings, solve_qp


@dataclass(frozen=True, eq=False)
class PenalizedProgram:
    qp: QpProblem
    layout: dict
    spec: PenaltySpec

    def omega(self, x) -> np.ndarray:
        return np.asarray(x)[self.layout["omega"]]

    def mu(self, x):
        i = self.layout.get("mu")
        return None if i is None else float(x[i])


def _bound_rows(J, omega_off, aux_idx, n):
    """Rows encoding -aux <= omega <= aux; aux is an index or an index array."""
    G = np.zeros((2 * J, n))
    rows = np.arange(J)
    G[rows, omega_off + rows] = 1.0
    G[J + rows, omega_off + rows] = -1.0
    G[rows, aux_idx] = -1.0
    G[J + rows, aux_idx] = -1.0
    return G


def build_program(design: CenteredDesign, spec: PenaltySpec,
                  explicit_intercept: bool = False) -> PenalizedProgram:
    """QP whose optimum solves the penalized least-squares problem.

    With ``explicit_intercept`` an unpenalized ``mu`` variable is added and the
    design is used as given (pass an uncentered design). Auxiliary bound
    variables whose cost would be zero are left out, since a zero-cost bound
    makes the barrier problem unbounded.
    """
    kind = spec.kind
    if kind in (PenaltyKind.NONE, PenaltyKind.RIDGE):
        raise UnsupportedPenalty(f"{kind.value} has a closed form; use solve_penalized")
    y, Y = design.y, design.Y
    T0, J = Y.shape
    lam, alpha = spec.lam, spec.alpha

    with_mu = explicit_intercept and kind is not PenaltyKind.CONVENTIONAL_SC
    X = np.hstack([np.ones((T0, 1)), Y]) if with_mu else Y
    k = X.shape[1]
    quad = X.T @ X
    lin = -(X.T @ y)
    omega_off = 1 if with_mu else 0
    if kind is PenaltyKind.ELASTIC_NET:
        quad = quad.copy()
        idx = np.arange(omega_off, k)
        quad[idx, idx] += 2.0 * lam * (1.0 - alpha)

    c_cost = d_cost = 0.0
    if kind is PenaltyKind.LINF:
        c_cost = lam
    elif kind is PenaltyKind.L1_LINF:
        c_cost, d_cost = lam * (1.0 - alpha), lam * alpha
    elif kind is PenaltyKind.LASSO:
        d_cost = lam
    elif kind is PenaltyKind.ELASTIC_NET:
        d_cost = lam * alpha

    layout = {"mu": 0 if with_mu else None, "omega": slice(omega_off, k), "c": None, "d": None}
    n = k
    if c_cost > 0:
        layout["c"] = n
        n += 1
    if d_cost > 0:
        layout["d"] = slice(n, n + J)
        n += J

    Q = np.zeros((n, n))
    Q[:k, :k] = quad
    q = np.zeros(n)
    q[:k] = lin
    start = np.zeros(n)
    blocks = []
    if layout["c"] is not None:
        q[layout["c"]] = c_cost
        start[layout["c"]] = 1.0
        blocks.append(_bound_rows(J, omega_off, layout["c"], n))
    if layout["d"] is not None:
        q[layout["d"]] = d_cost
        start[layout["d"]] = 1.0
        blocks.append(_bound_rows(J, omega_off, np.arange(layout["d"].start, layout["d"].stop), n))

    A = b = None
    if kind is PenaltyKind.CONVENTIONAL_SC:
        blocks.append(-np.eye(n))
        A = np.ones((1, n))
        b = np.ones(1)
        start[:] = 1.0 / J
    G = np.vstack(blocks) if blocks else None
    h = np.zeros(G.shape[0]) if G is not None else None
    return PenalizedProgram(QpProblem(Q, q, G, h, A, b, start), layout, spec)


def _least_squares(design: CenteredDesign) -> np.ndarray:
    Y = design.Y
    if design.t0 <= design.J or np.linalg.matrix_rank(Y) < design.J:
        raise RankDeficient(f"Y'Y is singular (t0={design.t0}, J={design.J}); "
                            "least squares needs t0 > J and full column rank")
    return np.linalg.lstsq(Y, design.y, rcond=None)[0]


def solve_penalized(design: CenteredDesign, spec: PenaltySpec,
                    settings: SolverSettings = SolverSettings()) -> WeightFit:
    """Estimate (mu_hat, omega_hat) for ``spec`` on a pre-period design.

    Ridge uses ``(Y'Y + 2 lam I)^-1 Y'y``, i.e. the penalty ``lam ||omega||_2^2``.
    Elastic net uses ``lam (alpha ||omega||_1 + (1 - alpha) ||omega||_2^2)``.
    """
    kind = spec.kind
    if kind is PenaltyKind.NONE or (kind is PenaltyKind.RIDGE and spec.lam == 0.0):
        return make_fit(design, _least_squares(design), spec)
    if kind is PenaltyKind.RIDGE:
        M = design.Y.T @ design.Y + 2.0 * spec.lam * np.eye(design.J)
        omega = scipy.linalg.solve(M, design.Y.T @ design.y, assume_a="pos")
        return make_fit(design, omega, spec)
    prog = build_program(design, spec)
    sol = solve_qp(prog.qp, settings)
    if not sol.optimal:
        raise SolverFailure(f"QP for {kind.value} ended with status {sol.status.value}",
                            status=sol.status)
    return make_fit(design, prog.omega(sol.x), spec, sol.summary())


def fit(panel: PanelData, spec: PenaltySpec,
        settings: SolverSettings = SolverSettings()) -> WeightFit:
    """Center the panel's pre-period (when an intercept is fitted) and solve."""
    return solve_penalized(center_design(panel, spec.fit_intercept), spec, settings)


# --- closed forms for orthonormal designs -----------------------------------

def project_l1_ball(v, radius: float) -> np.ndarray:
    """Euclidean projection onto ``{w : ||w||_1 <= radius}`` (sort and threshold)."""
    v = np.asarray(v, dtype=float)
    if radius <= 0:
        raise ValueError("radius must be positive")
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    rho = np.nonzero(u * k > css - radius)[0][-1]
    theta = (css[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def prox_decompose_linf(lse, lam: float) -> np.ndarray:
    """L-infinity penalized solution for orthonormal Y: lse minus its L1-ball projection."""
    lse = np.asarray(lse, dtype=float)
    return lse - project_l1_ball(lse, lam)


def soft_threshold(lse, lam: float):
    """sign(lse) * (|lse| - lam)_+"""
    lse = np.asarray(lse, dtype=float)
    out = np.sign(lse) * np.maximum(np.abs(lse) - lam, 0.0)
    return float(out) if out.ndim == 0 else out


def closed_form_j2_linf(lse2: float, lse3: float, lam: float) -> np.ndarray:
    """Two-control L-infinity solution under an orthonormal design.

    Works on absolute values and restores signs. Each weight is shrunk by
    half of ``clip(|own| - |other|, -lam, lam) + lam``, floored at zero.
    """
    a = np.abs([lse2, lse3], dtype=float)
    diff = np.clip(a[0] - a[1], -lam, lam)
    shrink = 0.5 * (np.array([diff, -diff]) + lam)
    return np.sign([lse2, lse3]) * np.maximum(a - shrink, 0.0)


def omega2_membership(omega, lam: float, alpha: float, tol: float = 0.0) -> bool:
    """``sum_j max(|omega_j| - lam (1 - alpha), 0) <= lam alpha``."""
    omega = np.asarray(omega, dtype=float)
    lhs = np.sum(np.maximum(np.abs(omega) - lam * (1.0 - alpha), 0.0))
    return bool(lhs <= lam * alpha + tol)


def constrained_form_solve(design: CenteredDesign, c_bound: float, alpha: float,
                           settings: SolverSettings = SolverSettings()) -> WeightFit:
    """``min 1/2 ||y - Y omega||^2  s.t.  alpha ||omega||_1 + ||omega||_inf <= c_bound``.

    This is the Lagrangian counterpart of the penalty
    ``lam' (alpha ||omega||_1 + ||omega||_inf)``, i.e. of the L1+Linf penalty with
    mixing weight ``alpha / (1 + alpha)``.
    """
    if not c_bound > 0:
        raise ValueError("c_bound must be positive")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    y, Y = design.y, design.Y
    J = design.J
    with_d = alpha > 0
    n = J + 1 + (J if with_d else 0)
    c = J
    Q = np.zeros((n, n))
    Q[:J, :J] = Y.T @ Y
    q = np.zeros(n)
    q[:J] = -(Y.T @ y)
    blocks = [_bound_rows(J, 0, c, n)]
    agg = np.zeros((1, n))
    agg[0, c] = 1.0
    start = np.zeros(n)
    start[c] = c_bound / (2.0 * (1.0 + alpha * J))
    if with_d:
        d = np.arange(J + 1, n)
        blocks.append(_bound_rows(J, 0, d, n))
        agg[0, d] = alpha
        start[d] = start[c]
    G = np.vstack(blocks + [agg])
    h = np.zeros(G.shape[0])
    h[-1] = c_bound
    sol = solve_qp(QpProblem(Q, q, G, h, start=start), settings)
    if not sol.optimal:
        raise SolverFailure(f"constrained-form QP ended with status {sol.status.value}",
                            status=sol.status)
    spec = PenaltySpec(PenaltyKind.L1_LINF, 0.0, alpha / (1.0 + alpha), design.fit_intercept)
    return make_fit(design, sol.x[:J], spec, sol.summary(), c_bound=c_bound, constraint_alpha=alpha)

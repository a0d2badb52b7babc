"""Property suites that run standalone: ``pytest tests/test_properties.py``.

Shrinkage monotonicity, duplicate-column balancing, zero-at-large-lambda,
intercept equivalence, effects shift-equivariance and CV determinism.
"""

import numpy as np
import pytest

from linfsynth.effects import dynamic_effects
from linfsynth.model import PenaltyKind, PenaltySpec, center_design, design_from_arrays, validate_panel
from linfsynth.penalty import build_program, solve_penalized
from linfsynth.qp import solve_qp
from linfsynth.tune import cross_validate, make_grid

K = PenaltyKind
SEEDS = [0, 1, 2, 3, 4]


def design(seed, t0=30, j=6, intercept=True):
    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((t0, j)) * 2 + 3
    y = 1.0 + Y @ rng.uniform(-0.5, 0.8, j) + rng.standard_normal(t0)
    return design_from_arrays(y, Y, intercept)


@pytest.mark.parametrize("seed", SEEDS)
def test_linf_shrinkage_monotone(seed):
    d = design(seed)
    top = np.abs(d.Y.T @ d.y).sum()
    norms = [np.abs(solve_penalized(d, PenaltySpec(K.LINF, lam)).omega_hat).max()
             for lam in np.geomspace(1e-3 * top, top, 20)]
    assert np.all(np.diff(norms) <= 1e-7)


@pytest.mark.parametrize("seed", SEEDS)
def test_lasso_shrinkage_monotone(seed):
    d = design(seed)
    top = np.abs(d.Y.T @ d.y).max()
    norms = [np.abs(solve_penalized(d, PenaltySpec(K.LASSO, lam)).omega_hat).sum()
             for lam in np.geomspace(1e-3 * top, top, 20)]
    assert np.all(np.diff(norms) <= 1e-7)


@pytest.mark.parametrize("seed", SEEDS)
def test_duplicate_columns_balanced(seed):
    d = design(seed)
    y, Y = d.raw()
    Yd = np.column_stack([Y, Y[:, 2]])
    dd = design_from_arrays(y, Yd)
    for lam in (0.5, 5.0, 50.0):
        w = solve_penalized(dd, PenaltySpec(K.LINF, lam)).omega_hat
        assert abs(w[2] - w[-1]) <= 1e-6


@pytest.mark.parametrize("seed", SEEDS)
def test_lasso_zero_at_large_lambda(seed):
    d = design(seed)
    lam = np.abs(d.Y.T @ d.y).max()
    for scale in (1.0, 1.5, 10.0):
        w = solve_penalized(d, PenaltySpec(K.LASSO, scale * lam)).omega_hat
        assert np.max(np.abs(w)) <= 1e-6


@pytest.mark.parametrize("kind", [K.LINF, K.L1_LINF, K.LASSO, K.ELASTIC_NET])
@pytest.mark.parametrize("seed", SEEDS[:3])
def test_intercept_equivalence(kind, seed):
    d = design(seed, t0=20, j=5)
    spec = PenaltySpec(kind, 2.0, 0.3)
    f = solve_penalized(d, spec)
    y, Y = d.raw()
    prog = build_program(design_from_arrays(y, Y, False), spec, explicit_intercept=True)
    sol = solve_qp(prog.qp)
    assert np.max(np.abs(f.omega_hat - prog.omega(sol.x))) <= 1e-6
    assert abs(f.mu_hat - prog.mu(sol.x)) <= 1e-6


@pytest.mark.parametrize("seed", SEEDS)
def test_effects_shift_equivariance(seed):
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((20, 5)) + 4
    p = validate_panel(raw, 14)
    f = solve_penalized(center_design(p), PenaltySpec(K.LINF, 1.0))
    kappa = rng.uniform(-10, 10)
    shifted = raw.copy()
    shifted[14:, 0] += kappa
    a, b = dynamic_effects(p, f), dynamic_effects(validate_panel(shifted, 14), f)
    assert np.allclose(b.dynamic_effects - a.dynamic_effects, kappa, atol=1e-10)
    assert abs((b.ate - a.ate) - kappa) <= 1e-10


@pytest.mark.parametrize("kind", ["linf", "l1linf", "ridge"])
def test_cv_determinism(kind):
    d = design(7, t0=25, j=4)
    grid = make_grid(d, kind, 5, 3)
    runs = [cross_validate(d, kind, grid, k=5, seed=42) for _ in range(2)]
    assert np.array_equal(runs[0].rmse_surface, runs[1].rmse_surface)
    assert runs[0].best == runs[1].best
    assert np.array_equal(runs[0].fold_assignments, runs[1].fold_assignments)

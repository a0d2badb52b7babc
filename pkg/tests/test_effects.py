import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linfsynth.effects import counterfactual_series, dynamic_effects, pre_fit_gap, synthetic_series
from linfsynth.errors import DimensionMismatch
from linfsynth.model import (PanelData, PenaltyKind, PenaltySpec, WeightFit, center_design,
                             validate_panel)
from linfsynth.penalty import solve_penalized
from linfsynth.sim import DgpSpec, ErrorSpec, gen_panel


def wf(mu, w):
    return WeightFit(mu, np.asarray(w, dtype=float), PenaltySpec(PenaltyKind.NONE), 0.0)


def test_zero_weights_constant(panel):
    cf = counterfactual_series(panel, wf(1.5, np.zeros(panel.J)))
    assert np.all(cf == 1.5) and cf.size == panel.T1


def test_identity_weight_copies_control():
    raw = np.column_stack([np.arange(6.0), np.arange(6.0) ** 2])
    p = validate_panel(raw, 3)
    assert np.array_equal(counterfactual_series(p, wf(0.0, [1.0])), raw[3:, 1])


def test_noiseless_oracle():
    sim = gen_panel(DgpSpec(dgp=2, seed=4, error=ErrorSpec(u_sd=1.0)))
    # strip the noise from the treated unit: Y1 = Y w + delta 1{t > T0}
    p = sim.panel
    y = p.controls @ sim.true_weights
    y[p.t0:] += 3.0
    clean = validate_panel(np.column_stack([y, p.controls]), p.t0)
    eff = dynamic_effects(clean, wf(0.0, sim.true_weights))
    assert np.allclose(eff.counterfactual, p.controls[p.t0:] @ sim.true_weights, atol=0)
    assert np.allclose(eff.dynamic_effects, 3.0, atol=1e-12)


def test_null_and_shift(panel):
    f = wf(0.3, np.linspace(0, 1, panel.J))
    synth = synthetic_series(panel, f)
    out = panel.outcomes.copy()
    out[:, 0] = synth
    null = validate_panel(out, panel.t0)
    e0 = dynamic_effects(null, f)
    assert np.all(e0.dynamic_effects == 0) and e0.ate == 0
    out[panel.t0:, 0] += 3.0
    e3 = dynamic_effects(validate_panel(out, panel.t0), f)
    assert np.allclose(e3.dynamic_effects, 3.0) and e3.ate == pytest.approx(3.0)


def test_horizon_ates(panel):
    e = dynamic_effects(panel, wf(0.1, np.full(panel.J, 0.2)))
    assert e.horizon_ates[4] == pytest.approx(e.dynamic_effects[:4].sum() / 4, abs=1e-12)
    assert e.horizon_ates[panel.T1] == e.ate
    assert abs(e.ate - e.dynamic_effects.mean()) <= 1e-12
    for h in range(2, panel.T1 + 1):
        inc = h * e.horizon_ates[h] - (h - 1) * e.horizon_ates[h - 1]
        assert inc == pytest.approx(e.dynamic_effects[h - 1], abs=1e-10)


def test_dimension_mismatch(panel):
    with pytest.raises(DimensionMismatch):
        dynamic_effects(panel, wf(0.0, np.zeros(panel.J + 1)))
    with pytest.raises(DimensionMismatch):
        pre_fit_gap(panel, wf(0.0, np.zeros(2)))


def test_gap_matches_pre_rmse(panel):
    f = solve_penalized(center_design(panel), PenaltySpec(PenaltyKind.NONE))
    gap = pre_fit_gap(panel, f)
    assert abs(np.sqrt(np.mean(gap ** 2)) - f.pre_rmse) <= 1e-12
    assert abs(gap.mean()) < 1e-10


def test_perfect_fit_zero_gap():
    Y = np.arange(20.0).reshape(10, 2) ** 1.5
    y = 1.0 + Y @ np.array([0.5, 0.25])
    p = validate_panel(np.column_stack([y, Y]), 7)
    f = solve_penalized(center_design(p), PenaltySpec(PenaltyKind.NONE))
    assert np.allclose(pre_fit_gap(p, f), 0, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(-100, 100), st.integers(0, 10_000))
def test_shift_equivariance(kappa, seed):
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((12, 4))
    p = validate_panel(raw, 8)
    f = wf(rng.standard_normal(), rng.standard_normal(3))
    shifted = raw.copy()
    shifted[8:, 0] += kappa
    a, b = dynamic_effects(p, f), dynamic_effects(validate_panel(shifted, 8), f)
    assert np.allclose(b.dynamic_effects - a.dynamic_effects, kappa, atol=1e-9)
    assert b.ate - a.ate == pytest.approx(kappa, abs=1e-9)


def test_permutation_invariance(panel, rng):
    perm = rng.permutation(panel.J)
    w = rng.standard_normal(panel.J)
    raw = panel.outcomes.copy()
    raw[:, 1:] = raw[:, 1:][:, perm]
    a = dynamic_effects(panel, wf(0.2, w))
    b = dynamic_effects(validate_panel(raw, panel.t0), wf(0.2, w[perm]))
    assert np.allclose(a.dynamic_effects, b.dynamic_effects, atol=1e-12)

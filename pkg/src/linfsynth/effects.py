"""Counterfactuals and treatment effects from a fitted weight vector."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .model import PanelData, WeightFit


@dataclass(frozen=True, eq=False)
class EffectSeries:
    counterfactual: np.ndarray
    dynamic_effects: np.ndarray
    ate: float
    horizon_ates: dict


def _check(panel: PanelData, fit: WeightFit):
    if fit.omega_hat.shape != (panel.J,):
        raise DimensionMismatch(f"fit has {fit.omega_hat.shape[0]} weights, panel has J={panel.J}")


def synthetic_series(panel: PanelData, fit: WeightFit) -> np.ndarray:
    """mu_hat + Y_t omega_hat over all T periods."""
    _check(panel, fit)
    return fit.mu_hat + panel.controls @ fit.omega_hat


def counterfactual_series(panel: PanelData, fit: WeightFit) -> np.ndarray:
    """Imputed untreated outcome of the treated unit for t = T0+1..T."""
    return synthetic_series(panel, fit)[panel.t0:]


def dynamic_effects(panel: PanelData, fit: WeightFit) -> EffectSeries:
    cf = counterfactual_series(panel, fit)
    delta = panel.treated[panel.t0:] - cf
    running = np.cumsum(delta) / np.arange(1, delta.size + 1)
    horizons = {h: float(running[h - 1]) for h in range(1, delta.size + 1)}
    return EffectSeries(cf, delta, horizons[delta.size], horizons)


def pre_fit_gap(panel: PanelData, fit: WeightFit) -> np.ndarray:
    """Treated minus synthetic outcome over the pre-period."""
    return panel.treated[: panel.t0] - synthetic_series(panel, fit)[: panel.t0]

"""Hyper-parameter grids and K-fold cross-validation.

Two fold schemes are offered. ``TIME`` splits the pre-treatment periods into
folds, refits without each fold and scores the held-out treated residuals
(the treated unit has no effect before treatment, so residuals are effects
that should be zero). ``UNIT`` splits the controls instead: each control in a
fold is treated as a pseudo-treated series, synthesized from the controls in
the other folds, and scored on its estimated post-period ATE, which should
also be zero.
"""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (BadK, ConfigError, DegenerateColumnWarning, LambdaMaxZero,
                     LinfSynthError, ShortPrePeriodWarning)
from .model import CenteredDesign, PenaltyKind, PenaltySpec, design_from_arrays
from .penalty import solve_penalized
from .qp import SolverSettings

logger = logging.getLogger(__name__)

TIE_TOL = 1e-12


class CvMode(str, enum.Enum):
    TIME = "time"
    UNIT = "unit"


@dataclass(frozen=True, eq=False)
class TuningGrid:
    lambdas: np.ndarray
    alphas: np.ndarray

    def __post_init__(self):
        lam = np.array(self.lambdas, dtype=float).ravel()
        alp = np.array(self.alphas, dtype=float).ravel()
        if lam.size == 0 or alp.size == 0:
            raise ConfigError("tuning grid must be non-empty")
        if np.any(lam <= 0) or np.any(np.diff(lam) >= 0):
            raise ConfigError("lambdas must be positive and strictly decreasing")
        if np.any((alp < 0) | (alp > 1)):
            raise ConfigError("alphas must lie in [0, 1]")
        lam.setflags(write=False)
        alp.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "alphas", alp)

    @property
    def shape(self):
        return (self.lambdas.size, self.alphas.size)


@dataclass(frozen=True, eq=False)
class CvResult:
    rmse_surface: np.ndarray
    best: tuple
    best_index: tuple
    fold_assignments: np.ndarray
    seed: int
    grid: TuningGrid
    mode: CvMode
    kind: PenaltyKind

    def best_spec(self, fit_intercept: bool = True) -> PenaltySpec:
        lam, alpha = self.best
        return PenaltySpec(self.kind, lam, alpha, fit_intercept)


def lambda_grid(design: CenteredDesign, n_points: int = 100, epsilon: float = 1e-4) -> np.ndarray:
    """Log-spaced lambdas from ``lam_max`` down to ``epsilon * lam_max``.

    ``lam_max = max_j |<z_j, y>| / T0`` with ``z_j`` the control column
    standardized to mean 0 and sample standard deviation 1, and ``y`` the
    centered treated series (not rescaled).
    """
    if n_points < 2:
        raise ConfigError("lambda grid needs at least two points")
    y_raw, Y_raw = design.raw()
    t0 = design.t0
    y = y_raw - y_raw.mean()
    Yc = Y_raw - Y_raw.mean(axis=0)
    sd = Yc.std(axis=0, ddof=1)
    scale = np.maximum(np.abs(Y_raw).max(axis=0), 1.0)
    ok = sd > 1e-12 * scale
    if not np.all(ok):
        warnings.warn(f"controls {np.nonzero(~ok)[0].tolist()} have zero variance and "
                      "are left out of lambda_max", DegenerateColumnWarning, stacklevel=2)
    if not np.any(ok):
        raise LambdaMaxZero("every control column is constant; lambda_max is zero")
    Z = Yc[:, ok] / sd[ok]
    inner = np.abs(Z.T @ y)
    lam_max = float(inner.max()) / t0
    if lam_max <= 1e-12 * np.linalg.norm(y) * np.sqrt(t0 - 1) / t0 or lam_max == 0.0:
        raise LambdaMaxZero("treated series is orthogonal to every control; "
                            "the fit is unpenalized least squares")
    return np.exp(np.linspace(np.log(lam_max), np.log(lam_max * epsilon), n_points))


def alpha_grid(n_points: int = 11) -> np.ndarray:
    """Equally spaced alphas on [0, 1]; a single point is the midpoint 0.5."""
    if n_points < 1:
        raise ConfigError("alpha grid needs at least one point")
    if n_points == 1:
        return np.array([0.5])
    return np.linspace(0.0, 1.0, n_points)


def make_grid(design: CenteredDesign, kind, n_lambda: int = 100, n_alpha: int = 11,
              epsilon: float = 1e-4) -> TuningGrid:
    """Grid for ``kind``: alphas only vary for elastic net and L1+Linf.

    ``lambda_grid`` is on the mean-loss scale ``(1/2T0)||r||^2``; the penalized
    objective here is ``(1/2)||r||^2``, so the lambdas are multiplied by T0.
    """
    kind = PenaltyKind.parse(kind)
    alphas = alpha_grid(n_alpha) if kind.uses_alpha else np.array([1.0])
    return TuningGrid(design.t0 * lambda_grid(design, n_lambda, epsilon), alphas)


def kfold_time_split(t0: int, k: int, seed: int) -> np.ndarray:
    """Seeded balanced partition of ``range(t0)`` into ``k`` folds."""
    if isinstance(k, bool) or not 2 <= k <= t0:
        raise BadK(f"k={k} must lie in [2, {t0}]")
    rng = np.random.default_rng(seed)
    return rng.permutation(np.arange(t0) % k)


def _cell_specs(kind, grid, fit_intercept):
    for i, lam in enumerate(grid.lambdas):
        for j, alpha in enumerate(grid.alphas):
            yield (i, j), PenaltySpec(kind, lam, alpha, fit_intercept)


def _quiet_solve(design, spec, settings):
    # the short pre-period flag is raised once on the final refit, not per fold
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ShortPrePeriodWarning)
        return solve_penalized(design, spec, settings)


def _time_folds(design, kind, grid, folds, k, settings):
    y_raw, Y_raw = design.raw()
    sq = np.zeros(grid.shape)
    count = np.zeros(grid.shape, dtype=int)
    for f in range(k):
        test = folds == f
        train = design_from_arrays(y_raw[~test], Y_raw[~test], design.fit_intercept)
        for idx, spec in _cell_specs(kind, grid, design.fit_intercept):
            if not np.isfinite(sq[idx]):
                continue
            try:
                w = _quiet_solve(train, spec, settings)
            except LinfSynthError as exc:
                logger.debug("cv cell %s fold %d failed: %s", idx, f, exc)
                sq[idx] = np.inf
                continue
            resid = y_raw[test] - (w.mu_hat + Y_raw[test] @ w.omega_hat)
            sq[idx] += float(resid @ resid)
            count[idx] += int(test.sum())
    with np.errstate(invalid="ignore"):
        return np.sqrt(sq / np.maximum(count, 1))


def _unit_folds(design, kind, grid, folds, k, post_controls, settings):
    _, Y_pre = design.raw()
    post = np.asarray(post_controls, dtype=float)
    J = Y_pre.shape[1]
    sq = np.zeros(grid.shape)
    for f in range(k):
        donors = folds != f
        for j in np.nonzero(folds == f)[0]:
            pseudo = design_from_arrays(Y_pre[:, j], Y_pre[:, donors], design.fit_intercept)
            for idx, spec in _cell_specs(kind, grid, design.fit_intercept):
                if not np.isfinite(sq[idx]):
                    continue
                try:
                    w = _quiet_solve(pseudo, spec, settings)
                except LinfSynthError as exc:
                    logger.debug("cv cell %s unit %d failed: %s", idx, j, exc)
                    sq[idx] = np.inf
                    continue
                effect = np.mean(post[:, j] - (w.mu_hat + post[:, donors] @ w.omega_hat))
                sq[idx] += effect ** 2
    return np.sqrt(sq / J)


def select_best(surface: np.ndarray, grid: TuningGrid):
    """Minimal cell; ties (within 1e-12) go to the larger lambda, then larger alpha."""
    best = np.min(surface)
    tied = np.argwhere(np.abs(surface - best) <= TIE_TOL) if np.isfinite(best) \
        else np.argwhere(surface == best)
    # lambdas are descending, so the smallest row index is the largest lambda
    i = tied[:, 0].min()
    cols = tied[tied[:, 0] == i, 1]
    j = cols[np.argmax(grid.alphas[cols])]
    return int(i), int(j)


def cross_validate(design: CenteredDesign, kind, grid: TuningGrid, k: int = 10,
                   mode=CvMode.TIME, seed: int = 0,
                   settings: SolverSettings = SolverSettings(),
                   post_controls: Optional[np.ndarray] = None) -> CvResult:
    """Score every (lambda, alpha) cell by K-fold CV and pick the minimizer.

    ``post_controls`` (the controls' post-treatment outcomes, T1 x J) is
    required in unit mode. Cells whose fits fail score ``+inf``.
    """
    kind = PenaltyKind.parse(kind)
    mode = CvMode(mode)
    if mode is CvMode.TIME:
        folds = kfold_time_split(design.t0, k, seed)
        surface = _time_folds(design, kind, grid, folds, k, settings)
    else:
        if post_controls is None:
            raise ConfigError("unit-mode cross-validation needs the controls' post-period outcomes")
        if design.J < 3:
            raise BadK("unit-mode cross-validation needs at least three controls")
        folds = kfold_time_split(design.J, k, seed)
        surface = _unit_folds(design, kind, grid, folds, k, post_controls, settings)
    i, j = select_best(surface, grid)
    surface.setflags(write=False)
    return CvResult(surface, (float(grid.lambdas[i]), float(grid.alphas[j])), (i, j),
                    folds, int(seed), grid, mode, kind)


def tune_and_fit(design: CenteredDesign, kind, k: int = 10, mode=CvMode.TIME, seed: int = 0,
                 n_lambda: int = 100, n_alpha: int = 11, epsilon: float = 1e-4,
                 settings: SolverSettings = SolverSettings(), post_controls=None):
    """Cross-validate ``kind`` on ``design`` and refit at the chosen cell.

    Returns ``(fit, cv_result)``; ``cv_result`` is ``None`` for kinds without
    hyper-parameters.
    """
    kind = PenaltyKind.parse(kind)
    if not kind.tunable:
        return solve_penalized(design, PenaltySpec(kind, fit_intercept=design.fit_intercept),
                               settings), None
    grid = make_grid(design, kind, n_lambda, n_alpha, epsilon)
    n_units = design.t0 if CvMode(mode) is CvMode.TIME else design.J
    cv = cross_validate(design, kind, grid, min(k, n_units), mode, seed, settings, post_controls)
    return solve_penalized(design, cv.best_spec(design.fit_intercept), settings), cv

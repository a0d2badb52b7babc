"""Domain types and panel preparation.

The outcome panel is stored wide: rows are time periods, column 0 is the
treated unit and columns 1..J are the controls.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from .errors import (BadCutover, ConfigError, DimensionMismatch, NonFinite,
                     ShortPrePeriodWarning, TooFewControls)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PanelData:
    """Observed outcomes for one treated unit and J controls.

    Attributes
    ----------
    outcomes : ndarray, shape (T, J + 1)
        Column 0 is the treated unit.
    t0 : int
        Number of pre-treatment periods.
    unit_labels, time_labels : tuple of str
    """

    outcomes: np.ndarray
    t0: int
    unit_labels: tuple
    time_labels: tuple

    @property
    def T(self) -> int:
        return self.outcomes.shape[0]

    @property
    def J(self) -> int:
        return self.outcomes.shape[1] - 1

    @property
    def T1(self) -> int:
        return self.T - self.t0

    @property
    def short_pre_period(self) -> bool:
        """True when t0 <= J, i.e. unpenalized least squares is not identified."""
        return self.t0 <= self.J

    @property
    def treated(self) -> np.ndarray:
        return self.outcomes[:, 0]

    @property
    def controls(self) -> np.ndarray:
        return self.outcomes[:, 1:]

    def __eq__(self, other):
        if not isinstance(other, PanelData):
            return NotImplemented
        return (self.t0 == other.t0
                and self.unit_labels == other.unit_labels
                and self.time_labels == other.time_labels
                and self.outcomes.shape == other.outcomes.shape
                and bool(np.array_equal(self.outcomes, other.outcomes)))

    __hash__ = None


def validate_panel(raw, t0: int, unit_labels: Optional[Sequence] = None,
                   time_labels: Optional[Sequence] = None) -> PanelData:
    """Check a raw T x (J+1) outcome matrix and wrap it as :class:`PanelData`.

    Raises
    ------
    NonFinite
        Names the first offending (row, col).
    BadCutover
        ``t0`` outside ``[1, T-1]``.
    TooFewControls
        Only the treated column is present.
    """
    arr = np.asarray(raw, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise BadCutover(f"outcomes must be a non-empty 2-d matrix, got shape {arr.shape}")
    T, ncol = arr.shape
    if ncol < 2:
        raise TooFewControls("panel needs at least one control column")
    bad = np.argwhere(~np.isfinite(arr))
    if bad.size:
        r, c = bad[0]
        raise NonFinite(int(r), int(c))
    if isinstance(t0, bool) or int(t0) != t0 or not 1 <= t0 <= T - 1:
        raise BadCutover(f"t0={t0} must lie in [1, {T - 1}]")
    if unit_labels is None:
        unit_labels = ["treated"] + [f"control_{j}" for j in range(1, ncol)]
    if time_labels is None:
        time_labels = [str(t + 1) for t in range(T)]
    unit_labels = tuple(str(u) for u in unit_labels)
    time_labels = tuple(str(t) for t in time_labels)
    if len(unit_labels) != ncol or len(time_labels) != T:
        raise DimensionMismatch("label lengths do not match the outcome matrix")
    return PanelData(_frozen(arr), int(t0), unit_labels, time_labels)


class PenaltyKind(str, enum.Enum):
    NONE = "none"
    LASSO = "lasso"
    RIDGE = "ridge"
    ELASTIC_NET = "elasticnet"
    LINF = "linf"
    L1_LINF = "l1linf"
    CONVENTIONAL_SC = "sc"

    @classmethod
    def parse(cls, value) -> "PenaltyKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "").replace("+", "")
        aliases = {
            "none": cls.NONE, "ols": cls.NONE, "lasso": cls.LASSO, "ridge": cls.RIDGE,
            "elasticnet": cls.ELASTIC_NET, "enet": cls.ELASTIC_NET,
            "linf": cls.LINF, "l1linf": cls.L1_LINF,
            "sc": cls.CONVENTIONAL_SC, "conventionalsc": cls.CONVENTIONAL_SC,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ConfigError(f"unknown penalty kind {value!r}") from None

    @property
    def uses_alpha(self) -> bool:
        return self in (PenaltyKind.ELASTIC_NET, PenaltyKind.L1_LINF)

    @property
    def tunable(self) -> bool:
        return self not in (PenaltyKind.NONE, PenaltyKind.CONVENTIONAL_SC)


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty family and hyper-parameters.

    ``alpha`` mixes the L1 part in for elastic net and L1+Linf. Conventional
    synthetic control ignores ``lam``/``alpha`` and never fits an intercept.
    """

    kind: PenaltyKind = PenaltyKind.LINF
    lam: float = 0.0
    alpha: float = 1.0
    fit_intercept: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", PenaltyKind.parse(self.kind))
        lam, alpha = float(self.lam), float(self.alpha)
        if not np.isfinite(lam) or lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if not 0.0 <= alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "alpha", alpha)
        if self.kind is PenaltyKind.CONVENTIONAL_SC:
            object.__setattr__(self, "fit_intercept", False)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "lambda": self.lam, "alpha": self.alpha,
                "fit_intercept": self.fit_intercept}


@dataclass(frozen=True, eq=False)
class CenteredDesign:
    """Pre-period regression data, centered when an intercept is fitted."""

    y: np.ndarray
    Y: np.ndarray
    y_mean: float
    col_means: np.ndarray
    fit_intercept: bool = True

    @property
    def t0(self) -> int:
        return self.Y.shape[0]

    @property
    def J(self) -> int:
        return self.Y.shape[1]

    def raw(self):
        """Return the uncentered (y, Y)."""
        return self.y + self.y_mean, self.Y + self.col_means


def design_from_arrays(y, Y, fit_intercept: bool = True) -> CenteredDesign:
    y = np.asarray(y, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if fit_intercept:
        y_mean = float(y.mean())
        col_means = Y.mean(axis=0)
        return CenteredDesign(_frozen(y - y_mean), _frozen(Y - col_means), y_mean,
                              _frozen(col_means), True)
    return CenteredDesign(_frozen(y), _frozen(Y), 0.0, _frozen(np.zeros(Y.shape[1])), False)


def center_design(panel: PanelData, fit_intercept: bool = True) -> CenteredDesign:
    """Slice the pre-treatment rows and center them on their own means."""
    pre = panel.outcomes[: panel.t0]
    return design_from_arrays(pre[:, 0], pre[:, 1:], fit_intercept)


def recover_intercept(omega, design: CenteredDesign) -> float:
    """mu_hat = y_mean - col_means . omega_hat."""
    return float(design.y_mean - design.col_means @ np.asarray(omega, dtype=float))


@dataclass(frozen=True, eq=False)
class WeightFit:
    mu_hat: float
    omega_hat: np.ndarray
    penalty: PenaltySpec
    pre_rmse: float
    solver_report: Optional[dict] = None
    short_pre_period: bool = False
    extras: dict = field(default_factory=dict)

    @property
    def J(self) -> int:
        return self.omega_hat.shape[0]


def make_fit(design: CenteredDesign, omega, spec: PenaltySpec,
             solver_report: Optional[dict] = None, **extras: Any) -> WeightFit:
    """Package a weight vector together with its intercept and in-sample RMSE."""
    omega = _frozen(omega)
    mu = recover_intercept(omega, design) if design.fit_intercept else 0.0
    y_raw, Y_raw = design.raw()
    resid = y_raw - (mu + Y_raw @ omega)
    pre_rmse = float(np.sqrt(np.mean(resid ** 2)))
    short = design.t0 <= design.J
    if short and spec.kind is not PenaltyKind.NONE:
        warnings.warn(f"t0={design.t0} <= J={design.J}: penalized fit on a short pre-period",
                      ShortPrePeriodWarning, stacklevel=3)
    return WeightFit(mu, omega, spec, pre_rmse, solver_report, short, dict(extras))

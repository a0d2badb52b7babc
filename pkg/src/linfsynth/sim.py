"""Monte-Carlo panels from a two-factor model and the RMSE experiment runner.

Controls follow ``Y_jt = l_j + F1_t + l_j F2_t + eps_jt`` with loadings
``l_j = (j - 1) / J`` for ``j = 2..J+1``; the treated unit is
``sum_j w_j Y_jt + u_t`` plus ``delta`` after ``T0``.
"""

from __future__ import annotations

import enum
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .effects import dynamic_effects
from .errors import ConfigError, LinfSynthError, NonStationary, OddJ
from .model import PanelData, PenaltyKind, PenaltySpec, WeightFit, center_design, validate_panel
from .penalty import solve_penalized
from .qp import SolverSettings
from .tune import CvMode, tune_and_fit

logger = logging.getLogger(__name__)

BURN_IN = 100
TABLE_METHODS = ("oracle", "sc", "lasso", "ridge", "elasticnet", "linf", "l1linf")
TABLE_HORIZONS = (1, 4, 7, 10)


class ErrorKind(str, enum.Enum):
    IID = "iid"
    AR1 = "ar1"
    ARMA11 = "arma11"


@dataclass(frozen=True)
class ErrorSpec:
    kind: ErrorKind = ErrorKind.IID
    rho: float = 0.1
    theta: float = 0.1
    u_sd: float = 1.0
    eps_scale: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ErrorKind(self.kind))
        if abs(self.rho) >= 1:
            raise NonStationary(f"|rho| = {abs(self.rho)} must be < 1")
        if not (self.u_sd > 0 and self.eps_scale > 0):
            raise ConfigError("u_sd and eps_scale must be positive")


@dataclass(frozen=True)
class DgpSpec:
    dgp: int = 1
    j: int = 30
    t0: int = 100
    t1: int = 10
    delta: float = 3.0
    error: ErrorSpec = field(default_factory=ErrorSpec)
    seed: int = 0

    def __post_init__(self):
        if self.dgp not in (1, 2, 3, 4):
            raise ConfigError(f"dgp must be 1..4, got {self.dgp}")
        if self.j < 1 or self.t0 < 1 or self.t1 < 1:
            raise ConfigError("j, t0 and t1 must be positive")
        if self.dgp == 4 and self.j % 2:
            raise OddJ("DGP 4 needs an even number of controls")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["error"]["kind"] = self.error.kind.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DgpSpec":
        d = dict(d)
        d["error"] = ErrorSpec(**d.get("error", {}))
        return cls(**d)


@dataclass(frozen=True, eq=False)
class SimPanel:
    panel: PanelData
    true_weights: np.ndarray
    true_effect: float
    factors: np.ndarray
    loadings: np.ndarray
    u: np.ndarray
    eps: np.ndarray


def gen_weights(dgp: int, j: int, rng: np.random.Generator) -> np.ndarray:
    if dgp == 1:
        return np.full(j, 1.0 / j)
    if dgp == 2:
        return rng.uniform(-3.0 / j, 3.0 / j, size=j)
    if dgp == 3:
        return (rng.beta(0.2, 0.2, size=j) - 0.5) * 3.0 / j
    if dgp == 4:
        if j % 2:
            raise OddJ("DGP 4 needs an even number of controls")
        w = np.concatenate([(rng.beta(0.2, 0.2, size=j // 2) - 0.5) * 3.0 / j, np.zeros(j // 2)])
        return rng.permutation(w)
    raise ConfigError(f"unknown dgp {dgp}")


def gen_errors(spec: ErrorSpec, length: int, rng: np.random.Generator, scale: float = 1.0,
               columns: Optional[int] = None) -> np.ndarray:
    """IID, AR(1) or ARMA(1,1) noise, multiplied by ``scale``.

    Dependent series start from zero and discard a burn-in of 100 draws.
    Returns shape ``(length,)`` or ``(length, columns)``.
    """
    if abs(spec.rho) >= 1:
        raise NonStationary(f"|rho| = {abs(spec.rho)} must be < 1")
    shape = (length,) if columns is None else (length, columns)
    if spec.kind is ErrorKind.IID:
        return scale * rng.standard_normal(shape)
    total = (length + BURN_IN,) + shape[1:]
    zeta = rng.standard_normal(total)
    x = np.empty(total)
    theta = spec.theta if spec.kind is ErrorKind.ARMA11 else 0.0
    x[0] = zeta[0]
    for t in range(1, total[0]):
        x[t] = spec.rho * x[t - 1] + theta * zeta[t - 1] + zeta[t]
    return scale * x[BURN_IN:]


def gen_panel(spec: DgpSpec, rng: Optional[np.random.Generator] = None) -> SimPanel:
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    J, T = spec.j, spec.t0 + spec.t1
    w = gen_weights(spec.dgp, J, rng)
    lam = np.arange(1, J + 1) / J
    loadings = np.column_stack([lam, lam])
    F = rng.standard_normal((T, 2))
    eps = gen_errors(spec.error, T, rng, spec.error.eps_scale, columns=J)
    u = gen_errors(spec.error, T, rng, spec.error.u_sd)
    controls = loadings[:, 0] + F[:, [0]] + F[:, [1]] * loadings[:, 1] + eps
    treated = controls @ w + u
    treated[spec.t0:] += spec.delta
    panel = validate_panel(np.column_stack([treated, controls]), spec.t0)
    return SimPanel(panel, w, float(spec.delta), F, loadings, u, eps)


def replicate_seed(seed: int, r: int, stream: int = 0) -> np.random.SeedSequence:
    """Independent substream for replicate ``r``; ``stream`` separates uses."""
    return np.random.SeedSequence(seed, spawn_key=(r, stream))


def replicate_panel(spec: DgpSpec, r: int) -> SimPanel:
    return gen_panel(spec, np.random.default_rng(replicate_seed(spec.seed, r)))


@dataclass(frozen=True)
class TuningOptions:
    n_lambda: int = 20
    n_alpha: int = 5
    k: int = 5
    mode: CvMode = CvMode.TIME
    epsilon: float = 1e-4


def fit_method(method: str, sim: SimPanel, cv_seed: int, settings: SolverSettings,
               tuning: TuningOptions = TuningOptions(), fixed: Optional[dict] = None) -> WeightFit:
    """Fit one table method; hyper-parameters come from ``fixed`` or CV."""
    panel = sim.panel
    if method == "oracle":
        return WeightFit(0.0, sim.true_weights, PenaltySpec(PenaltyKind.NONE, fit_intercept=False), 0.0)
    kind = PenaltyKind.parse(method)
    design = center_design(panel, kind is not PenaltyKind.CONVENTIONAL_SC)
    if fixed and method in fixed:
        lam, alpha = fixed[method]
        return solve_penalized(design, PenaltySpec(kind, lam, alpha, design.fit_intercept), settings)
    post = panel.controls[panel.t0:] if CvMode(tuning.mode) is CvMode.UNIT else None
    w, _ = tune_and_fit(design, kind, tuning.k, tuning.mode, cv_seed, tuning.n_lambda,
                        tuning.n_alpha, tuning.epsilon, settings, post)
    return w


def _run_replicate(args):
    spec, r, methods, horizons, settings, tuning, fixed, single_period = args
    sim = replicate_panel(spec, r)
    out = {}
    for mi, method in enumerate(methods):
        cv_seed = int(replicate_seed(spec.seed, r, 1 + mi).generate_state(1)[0])
        try:
            fit = fit_method(method, sim, cv_seed, settings, tuning, fixed)
        except LinfSynthError as exc:
            logger.warning("replicate %d, method %s failed: %s", r, method, exc)
            out[method] = None
            continue
        eff = dynamic_effects(sim.panel, fit)
        if single_period:
            est = np.array([eff.dynamic_effects[h - 1] for h in horizons])
        else:
            est = np.array([eff.horizon_ates[h] for h in horizons])
        out[method] = est - sim.true_effect
    return out


@dataclass(frozen=True, eq=False)
class RmseTable:
    rows: dict
    b: int
    spec: DgpSpec
    failures: dict
    n_used: dict
    methods: tuple
    horizons: tuple

    def rmse(self, method: str, horizon: int) -> float:
        return self.rows[(method, horizon)]

    def records(self):
        for m in self.methods:
            for h in self.horizons:
                yield {"dgp": self.spec.dgp, "method": m, "horizon": h,
                       "rmse": self.rows[(m, h)]}


def run_experiment(spec: DgpSpec, methods: Sequence[str] = TABLE_METHODS, b: int = 200,
                   horizons: Sequence[int] = TABLE_HORIZONS,
                   settings: SolverSettings = SolverSettings(),
                   tuning: TuningOptions = TuningOptions(), fixed: Optional[dict] = None,
                   single_period: bool = False, n_jobs: int = 1) -> RmseTable:
    """RMSE of the estimated ATE over ``b`` replicates, per (method, horizon).

    The ATE at horizon ``h`` averages the first ``h`` post-period effects
    (``single_period=True`` uses the effect at ``T0 + h`` alone).
    """
    if b < 1:
        raise ConfigError("b must be at least 1")
    methods = tuple(methods)
    horizons = tuple(int(h) for h in horizons)
    if any(not 1 <= h <= spec.t1 for h in horizons):
        raise ConfigError(f"horizons must lie in [1, {spec.t1}]")
    for m in methods:
        if m != "oracle":
            PenaltyKind.parse(m)
    jobs = [(spec, r, methods, horizons, settings, tuning, fixed, single_period) for r in range(b)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            results = list(ex.map(_run_replicate, jobs))
    else:
        results = [_run_replicate(j) for j in jobs]
    # fixed replicate order keeps the sums bit-reproducible
    sq = {m: np.zeros(len(horizons)) for m in methods}
    used = {m: 0 for m in methods}
    failures = {m: 0 for m in methods}
    for res in results:
        if all(res[m] is None for m in methods):
            continue
        for m in methods:
            if res[m] is None:
                failures[m] += 1
            else:
                sq[m] += res[m] ** 2
                used[m] += 1
    rows = {}
    for m in methods:
        vals = np.sqrt(sq[m] / used[m]) if used[m] else np.full(len(horizons), np.nan)
        for h, v in zip(horizons, vals):
            rows[(m, h)] = float(v)
    return RmseTable(rows, b, spec, failures, used, methods, horizons)

"""Penalized synthetic control with L-infinity and L1+L-infinity weights.

The estimator imputes a treated unit's untreated outcome as ``mu + Y omega``
with ``omega`` fitted on pre-treatment data under a norm penalty. Penalized
problems are solved as dense QPs by a log-barrier interior-point method.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, DataError, LinfSynthError, SolverError)  # noqa: E402
from .model import (CenteredDesign, PanelData, PenaltyKind, PenaltySpec, WeightFit,  # noqa: E402
                    center_design, recover_intercept, validate_panel)
from .qp import QpProblem, QpSolution, SolverSettings, solve_qp  # noqa: E402
from .penalty import fit, solve_penalized  # noqa: E402
from .tune import CvMode, cross_validate, tune_and_fit  # noqa: E402
from .effects import EffectSeries, dynamic_effects  # noqa: E402

__all__ = [
    "__version__", "LinfSynthError", "ConfigError", "DataError", "SolverError",
    "PanelData", "PenaltyKind", "PenaltySpec", "CenteredDesign", "WeightFit",
    "validate_panel", "center_design", "recover_intercept",
    "QpProblem", "QpSolution", "SolverSettings", "solve_qp",
    "fit", "solve_penalized", "CvMode", "cross_validate", "tune_and_fit",
    "EffectSeries", "dynamic_effects",
]

"""PC-Kriging: universal Kriging with a LARS-selected polynomial trend.

Calibration is sequential. A sparse PCE (degree capped at 3) picks the
trend basis in standard normal space; the Gaussian process is then fitted
on top with the trend regressors evaluated through the isoprobabilistic
transform, while the correlation kernel keeps acting on standardized
physical coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kriging import KrigingConfig, fit_kriging
from .pce import PceConfig, evaluate_basis, fit_pce_lars, hyperbolic_basis


@dataclass(frozen=True)
class PckConfig:
    trend_max_degree: int = 3
    pce: PceConfig = field(default_factory=PceConfig)
    kriging: KrigingConfig = field(default_factory=KrigingConfig)


class PckModel:
    """Fitted PC-Kriging surrogate."""

    def __init__(self, kriging_model, trend_basis, rv):
        self.kriging = kriging_model
        self.trend_basis = trend_basis
        self.rv = rv

    def predict_mean(self, x):
        return self.kriging.predict_mean(x)

    def predict_variance(self, x):
        return self.kriging.predict_variance(x)

    def predict(self, x):
        return self.kriging.predict(x)

    def to_json_dict(self):
        d = self.kriging.to_json_dict()
        d["trend_basis"] = self.trend_basis.tolist()
        return d


def fit_pck(ed, rv, cfg=PckConfig(), trend_basis=None):
    """Two-stage PC-Kriging fit.

    ``trend_basis`` overrides stage one (used to force a constant trend
    when cross-checking against ordinary Kriging).
    """
    if ed.n < 3:
        raise ValueError("PC-Kriging needs at least 3 design points")
    if trend_basis is None:
        pce_model = fit_pce_lars(ed, rv, cfg.pce, max_degree=cfg.trend_max_degree)
        trend_basis = pce_model.basis
    trend_basis = np.atleast_2d(np.asarray(trend_basis, dtype=int))
    if not (trend_basis.sum(axis=1) == 0).any():
        constant = np.zeros((1, trend_basis.shape[1]), dtype=int)
        trend_basis = np.vstack([constant, trend_basis])

    def trend_fn(x):
        u = rv.to_standard_normal(x)
        return evaluate_basis(trend_basis, u)

    krig = fit_kriging(ed, cfg.kriging, trend_fn=trend_fn)
    return PckModel(krig, trend_basis, rv)

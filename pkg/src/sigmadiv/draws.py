"""Posterior draw containers, effective-sample-size diagnostics and emission."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

__all__ = ["PosteriorDraws", "autocorrelation", "effective_sample_size",
           "summarize_draws"]

SUMMARY_QUANTILES = (0.01, 0.25, 0.50, 0.75, 0.99)


def autocorrelation(x: np.ndarray, lag: int) -> float:
    x = np.asarray(x, dtype=float)
    if lag <= 0 or lag >= x.size:
        return 0.0
    d = x - x.mean()
    denom = float(np.dot(d, d))
    if denom == 0.0:
        return 0.0
    return float(np.dot(d[:-lag], d[lag:]) / denom)


def effective_sample_size(x: np.ndarray, max_lag: int = 200) -> float:
    """ESS from the initial positive sequence of autocorrelations."""
    x = np.asarray(x, dtype=float)
    n = x.size
    s = 0.0
    for lag in range(1, min(max_lag, n - 1)):
        rho = autocorrelation(x, lag)
        if rho <= 0.0:
            break
        s += rho
    return n / (1.0 + 2.0 * s)


def summarize_draws(values: np.ndarray) -> Dict[str, float]:
    qs = np.quantile(values, SUMMARY_QUANTILES)
    out = {"mean": float(np.mean(values))}
    out["quantiles"] = {f"{int(q * 100)}": float(v) for q, v in zip(SUMMARY_QUANTILES, qs)}
    return out


@dataclass
class PosteriorDraws:
    """Labeled posterior sample with the coarsening level it was drawn under."""

    name: str
    values: np.ndarray
    rho: float
    seed: Optional[int] = None
    thin: int = 1
    ess: float = field(default=0.0)
    converged: bool = True

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.ess == 0.0:
            self.ess = effective_sample_size(self.values)

    def summary(self) -> Dict[str, float]:
        return summarize_draws(self.values)

    def quantile(self, q) -> np.ndarray:
        return np.quantile(self.values, q)

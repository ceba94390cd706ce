"""Least-squares power-law fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class PowerFit:
    slope: float
    intercept: float
    slope_se: float
    r2: float
    n: int

    def ci(self, level: float = 0.95) -> tuple[float, float]:
        if self.n <= 2:
            return (self.slope, self.slope)
        t = stats.t.ppf(0.5 + level / 2, self.n - 2)
        return (self.slope - t * self.slope_se, self.slope + t * self.slope_se)


def loglog_fit(x, y) -> PowerFit:
    """Fit log y = intercept + slope * log x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs at least two strictly positive points")
    r = stats.linregress(np.log(x), np.log(y))
    se = float(r.stderr) if x.size > 2 else 0.0
    return PowerFit(float(r.slope), float(r.intercept), se, float(r.rvalue**2), int(x.size))

"""Confidence-interval helpers shared by the simulators."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy import stats as sps

__all__ = ["half_width"]


def half_width(samples: Sequence[float], confidence: float = 0.95) -> float:
    """Student-t half-width of a confidence interval for the sample mean.

    Returns 0.0 for fewer than two samples (no spread information).
    """
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 2:
        return 0.0
    quantile = sps.t.ppf(0.5 + confidence / 2.0, df=n - 1)
    return float(quantile * x.std(ddof=1) / math.sqrt(n))

"""Binomial estimates with Wilson score intervals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

Z95 = 1.959963984540054


@dataclass(frozen=True)
class Estimate:
    successes: int
    trials: int
    low: float
    high: float
    method: str = "wilson"

    @property
    def rate(self) -> float:
        return self.successes / self.trials if self.trials else float("nan")

    @property
    def sigma(self) -> float:
        """Binomial standard error at the observed rate."""
        p = self.rate
        return float(np.sqrt(max(p * (1 - p), 0.0) / self.trials))

    def to_dict(self) -> dict:
        return {"rate": self.rate, "successes": self.successes, "trials": self.trials,
                "low": self.low, "high": self.high, "method": self.method}


def wilson(successes: int, trials: int, confidence: float = 0.95) -> Estimate:
    if trials < 1:
        raise ValueError("need at least one trial")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(confidence, method="wilson")
    return Estimate(int(successes), int(trials), float(ci.low), float(ci.high))


def within_sigma(observed: float, expected: float, trials: int, k: float = 4.0) -> bool:
    """|observed - expected| <= k sigma with sigma from the expected rate."""
    sigma = np.sqrt(expected * (1 - expected) / trials)
    return abs(observed - expected) <= k * sigma + 1e-12


def below_bound(observed: float, bound: float, trials: int, k: float = 4.0) -> bool:
    """observed <= bound + k sigma, sigma taken at the bound."""
    sigma = np.sqrt(max(bound * (1 - bound), 0.0) / trials)
    return observed <= bound + k * sigma + 1e-12

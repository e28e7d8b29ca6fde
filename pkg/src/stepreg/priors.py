"""Priors over the number of split points.

Consistency of the posterior requires the split-count prior to have
infinite support, so the built-in kinds are geometric and Poisson; finite
tables are available for truncated comparisons against exact enumeration.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["HierarchyPrior"]


class HierarchyPrior:
    """Distribution nu over the split count m = 0, 1, 2, ...

    Construct via the classmethods `geometric`, `poisson`, or `table`.
    """

    def __init__(self, kind: str, log_masses=None, theta: float = None, lam: float = None):
        self.kind = kind
        self._log_masses = log_masses
        self.theta = theta
        self.lam = lam

    @classmethod
    def geometric(cls, theta: float) -> "HierarchyPrior":
        """nu_m = theta (1 - theta)^m, m >= 0."""
        if not 0.0 < theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        return cls("geometric", theta=theta)

    @classmethod
    def poisson(cls, lam: float) -> "HierarchyPrior":
        if lam <= 0.0:
            raise ValueError("lam must be positive (lam = 0 has finite support)")
        return cls("poisson", lam=lam)

    @classmethod
    def table(cls, weights) -> "HierarchyPrior":
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or w.size == 0 or np.any(w < 0.0) or w.sum() <= 0.0:
            raise ValueError("weights must be nonnegative with positive total")
        with np.errstate(divide="ignore"):
            lm = np.log(w / w.sum())
        return cls("table", log_masses=lm)

    def log_mass(self, m: int) -> float:
        """log nu_m (-inf outside the support)."""
        if m < 0:
            return float("-inf")
        if self.kind == "geometric":
            return math.log(self.theta) + m * math.log1p(-self.theta)
        if self.kind == "poisson":
            return -self.lam + m * math.log(self.lam) - math.lgamma(m + 1)
        if m >= self._log_masses.size:
            return float("-inf")
        return float(self._log_masses[m])

    @property
    def m_max(self) -> float:
        """Largest supported m (inf for the infinite-support kinds)."""
        if self.kind == "table":
            return self._log_masses.size - 1
        return float("inf")

    def truncated(self, m_max: int) -> "HierarchyPrior":
        """Renormalized restriction to m <= m_max (a table prior)."""
        return HierarchyPrior.table([math.exp(self.log_mass(m)) for m in range(m_max + 1)])

    def describe(self) -> str:
        if self.kind == "geometric":
            return f"geometric({self.theta:g})"
        if self.kind == "poisson":
            return f"poisson({self.lam:g})"
        return f"table(m_max={self._log_masses.size - 1})"

    def __repr__(self) -> str:
        return f"HierarchyPrior.{self.describe()}"

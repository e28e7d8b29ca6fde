"""Log-space Beta weights and the per-configuration predictive probability.

All weights live in natural-log space: at sample size n the predictive
probability is of order exp(-n * entropy), which underflows double
precision near n = 700.  Log 0 is represented by -inf, products combine by
addition, and sums by stable log-sum-exp.

The Beta normalizer convention takes raw success/failure counts:

    beta(ns, nf) = ns! nf! / (ns + nf + 1)!  =  1 / ((ns+nf+1) C(ns+nf, ns))

so beta(0, 0) = 1 and every factor is at most 1.  Counts are always
integers, so values come from a cached log-factorial table (grown on
demand; initialize once via ensure_logfact before sharing across threads)
with a log-gamma fallback for counts beyond the table cap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from stepreg.model import DataSet, cell_counts
from stepreg.seeding import rng_from

__all__ = [
    "LOG_ZERO",
    "ensure_logfact",
    "log_beta",
    "log_beta_arr",
    "log_Z_u",
    "HeightPosterior",
    "height_posterior",
    "sample_heights",
]

LOG_ZERO = float("-inf")

_TABLE_CAP = 10**6 + 2
_logfact = np.zeros(1)


def ensure_logfact(n: int) -> np.ndarray:
    """Log-factorial table covering 0..n (entries via log-gamma, not cumsum,
    so each value is independently accurate to a few ulps)."""
    global _logfact
    if n >= _logfact.size:
        size = 1 << max(10, int(n).bit_length() + 1)
        _logfact = gammaln(np.arange(size, dtype=float) + 1.0)
    return _logfact


def log_beta(ns: int, nf: int) -> float:
    """log beta(ns, nf) for nonnegative integer counts."""
    if ns < 0 or nf < 0:
        raise ValueError("counts must be nonnegative")
    tot = ns + nf + 1
    if tot < _TABLE_CAP:
        lf = ensure_logfact(tot)
        return float(lf[ns] + lf[nf] - lf[tot])
    return float(gammaln(ns + 1) + gammaln(nf + 1) - gammaln(tot + 1))


def log_beta_arr(ns: np.ndarray, nf: np.ndarray) -> np.ndarray:
    """Vectorized log beta over integer count arrays."""
    ns = np.asarray(ns, dtype=np.int64)
    nf = np.asarray(nf, dtype=np.int64)
    tot = ns + nf + 1
    hi = int(tot.max(initial=0))
    if hi < _TABLE_CAP:
        lf = ensure_logfact(hi)
        return lf[ns] + lf[nf] - lf[tot]
    return gammaln(ns + 1.0) + gammaln(nf + 1.0) - gammaln(tot + 1.0)


def log_Z_u(data: DataSet, u: Sequence[float]) -> float:
    """Log predictive probability of the responses for one split vector:
    the sum of log beta over the cells of u.  Bounded in [-n log 4, 0]."""
    counts = cell_counts(data, u)
    return float(np.sum(log_beta_arr(counts.ns, counts.nf)))


@dataclass(frozen=True)
class HeightPosterior:
    """Per-cell height densities w^ns (1-w)^nf on [0, 1], independent
    across cells.  The per-cell mean is (ns+1)/(ns+nf+2)."""

    ns: np.ndarray
    nf: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.ns.size

    @property
    def means(self) -> np.ndarray:
        return (self.ns + 1.0) / (self.ns + self.nf + 2.0)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        # Two-gamma construction of a Beta(ns+1, nf+1) draw per cell; shape
        # parameters are >= 1, so draws stay strictly inside (0, 1).
        g1 = rng.standard_gamma(self.ns + 1.0)
        g2 = rng.standard_gamma(self.nf + 1.0)
        return g1 / (g1 + g2)


def height_posterior(data: DataSet, u: Sequence[float]) -> HeightPosterior:
    """Conjugate posterior over the step heights for a fixed split vector."""
    counts = cell_counts(data, u)
    return HeightPosterior(ns=counts.ns.astype(float), nf=counts.nf.astype(float))


def sample_heights(hp: HeightPosterior, seed) -> np.ndarray:
    """Independent per-cell height draws; deterministic given the seed."""
    rng = seed if isinstance(seed, np.random.Generator) else rng_from(seed, "sample_heights")
    return hp.sample(rng)

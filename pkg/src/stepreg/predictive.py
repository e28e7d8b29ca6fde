"""Split-marginalized predictive probabilities.

The marginal predictive probability with m splits is an m-dimensional
integral of a product of Beta normalizers over the random partition.  Its
integrand depends on the split vector only through which inter-data gaps
contain at least one split: splits inside one gap only create empty cells
(weight 1), so the integral collapses to a finite signed sum over occupied
gap sets,

    Z_m = sum_S  W(S) beta(S),
    W(S) = sum_{T subset S} (-1)^{|S|-|T|} (g_lo + g_hi + g(T))^m,

where S ranges over subsets of the n-1 interior gaps, beta(S) multiplies
Beta normalizers over the runs of consecutive data points delimited by S,
g(T) is the total length of the gaps in T, and g_lo, g_hi are the two end
gaps.  Regrouping by T turns the double sum into a superset Moebius
transform computable in O(n 2^n); the final signed combination is
accumulated as separate positive and negative log-sum-exp totals and
subtracted once, which keeps the inclusion-exclusion cancellation under
control.  This exact oracle is the ground truth against which the Monte
Carlo estimators are validated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from stepreg.kernel import log_beta, log_beta_arr
from stepreg.model import DataSet
from stepreg.priors import HierarchyPrior
from stepreg.seeding import rng_from

__all__ = [
    "GapDecomposition",
    "EstimateWithError",
    "ModelPosterior",
    "exact_log_Z_m",
    "mc_log_Z_m",
    "log_Z_star",
    "model_posterior",
    "DEFAULT_N_MAX",
]

DEFAULT_N_MAX = 14


@dataclass(frozen=True)
class GapDecomposition:
    """Gap lengths between sorted covariates plus the sorted responses.

    gaps has length n+1 (leading gap, n-1 interior gaps, trailing gap) and
    sums to 1; these two fields are a sufficient statistic for every
    split-marginalized predictive probability.
    """

    gaps: np.ndarray
    sorted_y: np.ndarray

    @classmethod
    def from_dataset(cls, data: DataSet) -> "GapDecomposition":
        edges = np.concatenate(([0.0], data.sorted_x, [1.0]))
        return cls(gaps=np.diff(edges), sorted_y=data.sorted_y)

    @property
    def n(self) -> int:
        return self.sorted_y.size


@dataclass(frozen=True)
class EstimateWithError:
    """A log-scale estimate with a delta-method standard error."""

    log_estimate: float
    std_error: float
    n_samples: int

    def interval(self) -> tuple[float, float]:
        return (self.log_estimate - 3.0 * self.std_error, self.log_estimate + 3.0 * self.std_error)


@dataclass(frozen=True)
class ModelPosterior:
    """Posterior over the split count m = 0..m_max."""

    probs: np.ndarray
    log_weights: np.ndarray
    prior_mass: float
    z_source: str

    @property
    def m_max(self) -> int:
        return self.probs.size - 1


def _run_log_betas(sorted_y: np.ndarray) -> np.ndarray:
    """lrb[i, j] = log beta of the run of sorted points i..j-1."""
    n = sorted_y.size
    ps = np.concatenate(([0], np.cumsum(sorted_y)))
    i = np.arange(n + 1)[:, None]
    j = np.arange(n + 1)[None, :]
    ns = ps[None, :] - ps[:, None]
    tot = j - i
    lrb = np.zeros((n + 1, n + 1))
    valid = tot > 0
    lrb[valid] = log_beta_arr(ns[valid], (tot - ns)[valid])
    return lrb


def exact_log_Z_m(data: DataSet, m: int, n_max: int = DEFAULT_N_MAX) -> float:
    """Exact log marginal predictive probability with m uniform splits.

    Cost is exponential in the sample size (all subsets of the interior
    gaps), hence the n_max guard; it does not grow with m.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    if data.n > n_max:
        raise ValueError(f"exact oracle limited to n <= {n_max} points, got n = {data.n}")
    return exact_log_Z_m_from_gaps(GapDecomposition.from_dataset(data), m)


def exact_log_Z_m_from_gaps(gd: GapDecomposition, m: int) -> float:
    n = gd.n
    total_s = int(gd.sorted_y.sum())
    if n == 0:
        return 0.0
    if m == 0 or n == 1:
        # No interior gap can be occupied: a single run regardless of m.
        return log_beta(total_s, n - total_s)

    g = gd.gaps
    n_gaps = n - 1
    n_masks = 1 << n_gaps
    lrb = _run_log_betas(gd.sorted_y)

    # log beta(S) for every occupied-gap set S, built by splitting the
    # rightmost run at the highest occupied gap of S.
    lb = np.empty(n_masks)
    lb[0] = lrb[0, n]
    for mask in range(1, n_masks):
        h = mask.bit_length() - 1
        prev = mask ^ (1 << h)
        pstart = prev.bit_length()  # 0 when prev is empty
        lb[mask] = lb[prev] - lrb[pstart, n] + lrb[pstart, h + 1] + lrb[h + 1, n]

    # Superset Moebius transform with alternating signs:
    # D[T] = sum_{S >= T} (-1)^{|S|-|T|} beta(S).  Values of beta stay well
    # inside double range for n <= n_max, so the transform runs at natural
    # scale.
    d = np.exp(lb)
    idx = np.arange(n_masks)
    for b in range(n_gaps):
        bit = 1 << b
        lo = idx[(idx & bit) == 0]
        d[lo] -= d[lo | bit]

    # (g_lo + g_hi + g(T))^m in log space; bit-matrix subset sums.
    bits = ((idx[:, None] >> np.arange(n_gaps)[None, :]) & 1).astype(float)
    avail = g[0] + g[n] + bits @ g[1:n]
    with np.errstate(divide="ignore"):
        log_q = m * np.log(avail)

    mag = np.abs(d)
    with np.errstate(divide="ignore"):
        log_terms = log_q + np.log(mag)
    pos = log_terms[(d > 0) & np.isfinite(log_terms)]
    neg = log_terms[(d < 0) & np.isfinite(log_terms)]
    if pos.size == 0:
        raise RuntimeError("exact oracle lost all positive mass; numerical failure")
    lp = float(logsumexp(pos))
    if neg.size == 0:
        return lp
    ln = float(logsumexp(neg))
    if ln >= lp:
        raise RuntimeError("exact oracle cancellation exceeded double precision")
    return lp + math.log1p(-math.exp(ln - lp))


def _batch_log_Z_u(data: DataSet, splits: np.ndarray) -> np.ndarray:
    """log Z_u for a batch of split vectors, one per row.

    The rows are assumed free of exact split/covariate ties, which hold
    with probability one for the continuous draws used here.
    """
    n_rows, m = splits.shape
    if m == 0:
        return np.full(n_rows, log_beta(data.n_success, data.n_failure))
    su = np.sort(splits, axis=1)
    pos = np.searchsorted(data.sorted_x, su, side="left")
    idx = np.empty((n_rows, m + 2), dtype=np.int64)
    idx[:, 0] = 0
    idx[:, 1:-1] = pos
    idx[:, -1] = data.n
    ns = np.diff(data.success_prefix[idx], axis=1)
    tot = np.diff(idx, axis=1)
    return np.sum(log_beta_arr(ns, tot - ns), axis=1)


def _log_mean_with_se(log_values: np.ndarray) -> EstimateWithError:
    """Log of the sample mean of exp(log_values), with a delta-method SE of
    the log estimate: se(log mean) ~= sd(sample) / (sqrt(N) * mean)."""
    n = log_values.size
    if n < 2:
        raise ValueError("need at least 2 samples")
    a1 = float(logsumexp(log_values)) - math.log(n)
    a2 = float(logsumexp(2.0 * log_values)) - math.log(n)
    # log sample variance, guarded against the zero-variance case.
    gap = 2.0 * a1 - a2
    if gap >= -1e-15:
        return EstimateWithError(a1, 0.0, n)
    log_var = a2 + math.log1p(-math.exp(gap)) + math.log(n / (n - 1.0))
    se = math.exp(0.5 * log_var - 0.5 * math.log(n) - a1)
    return EstimateWithError(a1, se, n)


def mc_log_Z_m(data: DataSet, m: int, n_samples: int, seed) -> EstimateWithError:
    """Plain Monte Carlo estimate of log Z_m over i.i.d. uniform split
    vectors.  Unbiased for Z_m at natural scale; the reported error is the
    delta-method standard error of the log estimate."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    if n_samples < 2:
        raise ValueError("need n_samples >= 2")
    rng = seed if isinstance(seed, np.random.Generator) else rng_from(seed, "mc_log_Z_m")
    logs = _batch_log_Z_u(data, rng.random((n_samples, m)))
    return _log_mean_with_se(logs)


def log_Z_star(data: DataSet, lam: float, n_samples: int, seed) -> EstimateWithError:
    """Monte Carlo estimate of the Poisson-mixed predictive probability:
    split counts drawn Poisson(lam), split positions uniform."""
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if n_samples < 2:
        raise ValueError("need n_samples >= 2")
    rng = seed if isinstance(seed, np.random.Generator) else rng_from(seed, "log_Z_star")
    counts = rng.poisson(lam, size=n_samples)
    logs = np.empty(n_samples)
    for m_val in np.unique(counts):
        sel = np.nonzero(counts == m_val)[0]
        logs[sel] = _batch_log_Z_u(data, rng.random((sel.size, int(m_val))))
    return _log_mean_with_se(logs)


def model_posterior(
    data: DataSet,
    nu: HierarchyPrior,
    m_max: int,
    z_source: str = "exact",
    n_samples: int = 10_000,
    seed: int = 0,
    n_max: int = DEFAULT_N_MAX,
) -> ModelPosterior:
    """Posterior over the split count: weights nu_m * Z_m, normalized.

    z_source selects the exact oracle ("exact", small n only) or the Monte
    Carlo estimator ("mc").  prior_mass records how much of nu the
    truncation at m_max covers, so callers can acknowledge truncation.
    """
    if z_source not in ("exact", "mc"):
        raise ValueError("z_source must be 'exact' or 'mc'")
    ms = np.arange(m_max + 1)
    log_nu = np.array([nu.log_mass(m) for m in ms])
    if z_source == "exact":
        log_z = np.array([exact_log_Z_m(data, int(m), n_max=n_max) for m in ms])
    else:
        log_z = np.array(
            [mc_log_Z_m(data, int(m), n_samples, rng_from(seed, "model_posterior", int(m))).log_estimate for m in ms]
        )
    log_w = log_nu + log_z
    if not np.any(np.isfinite(log_w)):
        raise ValueError("all posterior weights vanished; the prior has no mass at m <= m_max")
    norm = float(logsumexp(log_w[np.isfinite(log_w)]))
    probs = np.exp(log_w - norm)
    probs[~np.isfinite(log_w)] = 0.0
    probs /= probs.sum()
    return ModelPosterior(
        probs=probs,
        log_weights=log_w,
        prior_mass=float(sum(math.exp(nu.log_mass(m)) for m in ms)),
        z_source=z_source,
    )

"""Experiments that measure the decay of the predictive probabilities.

Three regimes of the split count m against the sample size n behave
differently.  With few splits (m bounded) the decay rate of Z_m is capped
by the best step approximation of the truth and beats -H(f) whenever the
truth is not itself a coarse step function.  With m growing but m/n small
the rate is exactly -H(f).  With m proportional to n the Poissonized rate
psi(alpha) takes over, sits strictly below -H(f) for every alpha > 0, and
tends to -log 2 as the split intensity grows.  These scans estimate each
regime at fixed desk-scale n with replicate standard errors; psi has no
closed form, so interior values are measurements anchored by the two
limits above.

Rate estimates for piecewise-constant truths combine per-cell runs: a cell
of width b contributes b * psi(level, alpha), each component run using
sample size b*n and split intensity alpha*b*n.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from stepreg.entropy import entropy_functional
from stepreg.kernel import log_Z_u, log_beta
from stepreg.model import (
    DataSet,
    GridFunction,
    RegressionFunction,
    StepFunction,
    average_onto,
    sample_dataset,
)
from stepreg.predictive import EstimateWithError, log_Z_star, mc_log_Z_m
from stepreg.seeding import rng_from

__all__ = [
    "ZoneRow",
    "PerSplitRow",
    "ZoneScanResult",
    "BeginningZoneReport",
    "PsiEstimate",
    "PiecewiseCheck",
    "EndZoneRow",
    "EndZoneReport",
    "BadSetReport",
    "SubadditiveReport",
    "middle_zone_scan",
    "beginning_zone_check",
    "psi_estimate",
    "psi_piecewise_check",
    "end_zone_dominance",
    "badset_measure",
    "subadditive_check",
]


@dataclass(frozen=True)
class ZoneRow:
    n: int
    m: int
    estimate: float  # (1/n) log Z_m estimate
    std_error: float
    reference: float  # -H(f)

    @property
    def margin(self) -> float:
        return self.estimate - self.reference


@dataclass(frozen=True)
class PerSplitRow:
    n: int
    m: int
    rep: int
    estimate: float  # (1/n) log Z_u
    reference: float  # -H(f averaged onto u)


@dataclass(frozen=True)
class ZoneScanResult:
    rows: list
    per_split_rows: list


def middle_zone_scan(
    f: RegressionFunction,
    n: int,
    m_list: Sequence[int],
    n_samples: int,
    seed,
    per_split: int = 10,
) -> ZoneScanResult:
    """Estimate (1/n) log Z_m on one simulated dataset for each m, and for
    a handful of random split vectors per m compare (1/n) log Z_u against
    the entropy of the cell-averaged truth."""
    if any(m < 0 or m > n for m in m_list):
        raise ValueError("m_list entries must lie in [0, n]")
    data = sample_dataset(f, n, rng_from(seed, "zone_data"))
    ref = -entropy_functional(f)
    rows = []
    per_rows = []
    for m in m_list:
        est = mc_log_Z_m(data, int(m), n_samples, rng_from(seed, "zone_mc", int(m)))
        rows.append(ZoneRow(n=n, m=int(m), estimate=est.log_estimate / n, std_error=est.std_error / n, reference=ref))
        rng_u = rng_from(seed, "zone_per_u", int(m))
        for rep in range(per_split):
            u = rng_u.random(int(m))
            per_rows.append(
                PerSplitRow(
                    n=n,
                    m=int(m),
                    rep=rep,
                    estimate=log_Z_u(data, u) / n,
                    reference=-entropy_functional(average_onto(f, u)),
                )
            )
    return ZoneScanResult(rows=rows, per_split_rows=per_rows)


def _flat_jump_count(f: RegressionFunction):
    """Number of jumps if f is (representable as) a step function, else None."""
    if isinstance(f, StepFunction):
        return int(np.sum(np.diff(f.levels) != 0.0))
    # grid functions are continuous, so only the constant one is a step function
    return 0 if np.all(f.values == f.values[0]) else None


@dataclass(frozen=True)
class BeginningZoneReport:
    rows: list
    entropy: float
    best_estimate: float
    best_std_error: float

    @property
    def margin(self) -> float:
        """How far below -H(f) the best bounded-split rate sits (> 0 means
        the penalty regime is visible)."""
        return -self.entropy - self.best_estimate


def beginning_zone_check(f: RegressionFunction, k_cap: int, n: int, seed, n_samples: int = 20_000) -> BeginningZoneReport:
    """Estimate max over m <= k_cap of (1/n) log Z_m and report the margin
    below -H(f).

    A positive margin is only expected when no step function with k_cap
    jumps can represent the truth; if one can, the rate attains -H(f) and
    the margin sits near zero (flagged with a warning, not an error)."""
    jumps = _flat_jump_count(f)
    if jumps is not None and jumps <= k_cap:
        warnings.warn(
            f"truth is a step function with {jumps} <= {k_cap} jumps; expect margin ~ 0, not a penalty"
        )
    data = sample_dataset(f, n, rng_from(seed, "begin_data"))
    ent = entropy_functional(f)
    rows = []
    for m in range(k_cap + 1):
        if m == 0:
            val = log_beta(data.n_success, data.n_failure)
            est = EstimateWithError(val, 0.0, 1)
        else:
            est = mc_log_Z_m(data, m, n_samples, rng_from(seed, "begin_mc", m))
        rows.append(ZoneRow(n=n, m=m, estimate=est.log_estimate / n, std_error=est.std_error / n, reference=-ent))
    best = max(rows, key=lambda row: row.estimate)
    return BeginningZoneReport(rows=rows, entropy=ent, best_estimate=best.estimate, best_std_error=best.std_error)


@dataclass(frozen=True)
class PsiEstimate:
    """Replicate-averaged estimate of the Poissonized decay rate."""

    descriptor: str
    alpha: float
    estimate: float
    std_error: float
    n: int
    replicates: int


def _psi_from_truth(
    truth: RegressionFunction, alpha: float, n: int, replicates: int, inner_samples: int, seed, tag: str
) -> PsiEstimate:
    vals = np.empty(replicates)
    for rep in range(replicates):
        rng = rng_from(seed, tag, rep) if isinstance(seed, int) else seed
        size = int(rng.poisson(n))
        data = sample_dataset(truth, size, rng)
        est = log_Z_star(data, alpha * n, inner_samples, rng)
        vals[rep] = est.log_estimate / n
    se = float(vals.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else float("nan")
    return PsiEstimate(
        descriptor=tag,
        alpha=alpha,
        estimate=float(vals.mean()),
        std_error=se,
        n=n,
        replicates=replicates,
    )


def psi_estimate(p: float, alpha: float, n: int, replicates: int, inner_samples: int, seed) -> PsiEstimate:
    """Estimate the decay rate for a constant truth: each replicate draws a
    Poisson(n)-sized dataset from the Bernoulli-p model and evaluates the
    Poisson-mixed predictive probability at split intensity alpha * n."""
    if n < 100:
        raise ValueError("n must be at least 100")
    if replicates < 2:
        raise ValueError("need at least 2 replicates")
    est = _psi_from_truth(StepFunction.constant(p), alpha, n, replicates, inner_samples, seed, "psi")
    return PsiEstimate(f"p={p:g}", alpha, est.estimate, est.std_error, n, replicates)


def psi_step_function(
    f: StepFunction, alpha: float, n: int, replicates: int, inner_samples: int, seed
) -> tuple[float, float]:
    """Rate estimate for a piecewise-constant truth assembled cell by cell:
    sum of width * psi(level, alpha), each component run at the cell's
    share of the sample size and split intensity."""
    edges = np.concatenate(([0.0], f.breakpoints, [1.0]))
    total = 0.0
    var = 0.0
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        width = b - a
        n_cell = int(round(width * n))
        if n_cell < 2:
            continue
        est = _psi_from_truth(
            StepFunction.constant(float(f.levels[i])), alpha, n_cell, replicates, inner_samples, seed, f"psi_cell{i}"
        )
        total += width * est.estimate
        var += (width * est.std_error) ** 2
    return total, math.sqrt(var)


@dataclass(frozen=True)
class PiecewiseCheck:
    direct: PsiEstimate
    combined_estimate: float
    combined_std_error: float

    @property
    def difference(self) -> float:
        return self.direct.estimate - self.combined_estimate


def psi_piecewise_check(
    pL: float,
    pR: float,
    b: float,
    alpha: float,
    n: int,
    replicates: int,
    seed,
    inner_samples: int = 100,
) -> PiecewiseCheck:
    """Compare the rate of a two-level step truth measured directly against
    the width-weighted combination of the two constant-truth rates."""
    if not 0.0 < b <= 1.0:
        raise ValueError("b must lie in (0, 1]")
    if b == 1.0:
        truth = StepFunction.constant(pL)
    else:
        truth = StepFunction((b,), (pL, pR))
    direct = _psi_from_truth(truth, alpha, n, replicates, inner_samples, seed, "psi_direct")
    direct = PsiEstimate(f"step({pL:g}/{pR:g}@{b:g})", alpha, direct.estimate, direct.std_error, n, replicates)
    combined, combined_se = psi_step_function(truth, alpha, n, replicates, inner_samples, seed)
    return PiecewiseCheck(direct=direct, combined_estimate=combined, combined_std_error=combined_se)


@dataclass(frozen=True)
class EndZoneRow:
    alpha: float
    estimate: float
    std_error: float
    entropy: float

    @property
    def margin(self) -> float:
        """estimate + H(f); strictly negative in the overfitting regime."""
        return self.estimate + self.entropy


@dataclass(frozen=True)
class EndZoneReport:
    rows: list
    entropy: float
    half_truth_warning: bool


def end_zone_dominance(
    f,
    alpha_list: Sequence[float],
    n: int,
    seed,
    replicates: int = 20,
    inner_samples: int = 100,
    grid_cells: int = 32,
) -> EndZoneReport:
    """Rate estimates across split intensities with the margin below -H(f).

    Constant truths are measured directly; step truths via the per-cell
    combination; grid truths are first cell-averaged onto a uniform grid.
    The constant-1/2 truth is flagged: it is the prior mean, the only truth
    for which no strict margin is expected.
    """
    if isinstance(f, (int, float)):
        truth: StepFunction = StepFunction.constant(float(f))
    elif isinstance(f, GridFunction):
        truth = average_onto(f, np.linspace(0.0, 1.0, grid_cells + 1)[1:-1])
    else:
        truth = f
    half = bool(np.all(truth.levels == 0.5))
    if half:
        warnings.warn("truth is identically 1/2 (the prior mean); no strict end-zone margin is expected")
    ent = entropy_functional(truth)
    rows = []
    for alpha in alpha_list:
        if truth.breakpoints.size == 0:
            est = psi_estimate(float(truth.levels[0]), float(alpha), n, replicates, inner_samples, seed)
            rows.append(EndZoneRow(alpha=float(alpha), estimate=est.estimate, std_error=est.std_error, entropy=ent))
        else:
            val, se = psi_step_function(truth, float(alpha), n, replicates, inner_samples, seed)
            rows.append(EndZoneRow(alpha=float(alpha), estimate=val, std_error=se, entropy=ent))
    return EndZoneReport(rows=rows, entropy=ent, half_truth_warning=half)


@dataclass(frozen=True)
class BadSetReport:
    epsilon: float
    kappa: float
    measure: float
    witnesses: list  # merged (start, end) intervals of detected bad points


def _cumulative_integral(f: RegressionFunction, pts: np.ndarray) -> np.ndarray:
    """Exact cumulative integral of f at query points."""
    x0, x1, v0, v1 = f.segments()
    seg_int = (x1 - x0) * (v0 + v1) * 0.5
    cum = np.concatenate(([0.0], np.cumsum(seg_int)))
    idx = np.clip(np.searchsorted(x0, pts, side="right") - 1, 0, x0.size - 1)
    width = x1[idx] - x0[idx]
    slope = np.where(width > 0, (v1[idx] - v0[idx]) / np.where(width > 0, width, 1.0), 0.0)
    t = pts - x0[idx]
    return cum[idx] + v0[idx] * t + 0.5 * slope * t * t


def badset_measure(data: DataSet, f: RegressionFunction, epsilon: float, kappa: float) -> BadSetReport:
    """Lebesgue measure of the points covered by count-discrepant intervals.

    An interval J of length at least kappa/n is flagged when its total,
    success, or failure count deviates from the model mean by at least
    epsilon * n * |J|.  The supremum over all intervals is lower-bounded by
    scanning intervals with endpoints on the covariates plus a uniform grid
    of mesh kappa/(4n); refining the mesh can only grow the result.
    """
    if epsilon <= 0 or kappa <= 0:
        raise ValueError("epsilon and kappa must be positive")
    n = data.n
    if n == 0:
        return BadSetReport(epsilon=epsilon, kappa=kappa, measure=0.0, witnesses=[])
    mesh = kappa / (4.0 * n)
    grid = np.arange(0.0, 1.0 + 0.5 * mesh, mesh)
    cand = np.unique(np.clip(np.concatenate((grid, data.sorted_x, [0.0, 1.0])), 0.0, 1.0))
    min_len = kappa / n
    counts_right = np.searchsorted(data.sorted_x, cand, side="right")
    counts_left = np.searchsorted(data.sorted_x, cand, side="left")
    ns_right = data.success_prefix[counts_right]
    ns_left = data.success_prefix[counts_left]
    cum_f = _cumulative_integral(f, cand)

    bad: list[tuple[float, float]] = []
    n_cand = cand.size
    chunk = max(1, 2_000_000 // max(1, n_cand))
    for lo in range(0, n_cand, chunk):
        hi = min(lo + chunk, n_cand)
        a = cand[lo:hi, None]
        b = cand[None, :]
        length = b - a
        ok = length >= min_len
        # closed-interval counts [a, b]
        n_ab = counts_right[None, :] - counts_left[lo:hi, None]
        s_ab = ns_right[None, :] - ns_left[lo:hi, None]
        mean_s = cum_f[None, :] - cum_f[lo:hi, None]
        nl = n * length
        is_bad = ok & (
            (np.abs(n_ab - nl) >= epsilon * nl)
            | (np.abs(s_ab - n * mean_s) >= epsilon * nl)
            | (np.abs((n_ab - s_ab) - (nl - n * mean_s)) >= epsilon * nl)
        )
        # bad intervals sharing a left endpoint nest, so only the widest per
        # left endpoint contributes to the union
        any_bad = is_bad.any(axis=1)
        if np.any(any_bad):
            jmax = is_bad.shape[1] - 1 - np.argmax(is_bad[:, ::-1], axis=1)
            for i in np.nonzero(any_bad)[0].tolist():
                bad.append((float(cand[lo + i]), float(cand[jmax[i]])))

    if not bad:
        return BadSetReport(epsilon=epsilon, kappa=kappa, measure=0.0, witnesses=[])
    bad.sort()
    merged = [list(bad[0])]
    for a, b in bad[1:]:
        if a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    witnesses = [(a, b) for a, b in merged]
    return BadSetReport(
        epsilon=epsilon,
        kappa=kappa,
        measure=float(sum(b - a for a, b in witnesses)),
        witnesses=witnesses,
    )


@dataclass(frozen=True)
class SubadditiveRow:
    n: int
    mean: float
    std: float
    replicates: int


@dataclass(frozen=True)
class SubadditiveReport:
    rows: list
    gamma_estimate: float  # intercept of mean(S_n/n) regressed on 1/n
    slope_vs_inv_n: float
    dispersion_shrinks: bool


def subadditive_check(sampler: Callable[[int, int], float], n_list: Sequence[int], replicates: int) -> SubadditiveReport:
    """Empirical convergence diagnostic for S_n / n.

    `sampler(n, rep)` must return one draw of S_n (the rep index is for the
    caller's seeding).  Reports per-n means and dispersions, the 1/n
    regression of the means (whose intercept estimates the limit), and
    whether the dispersion shrank from the first to the last n.
    """
    if replicates < 10:
        raise ValueError("need at least 10 replicates")
    if any(b <= a for a, b in zip(n_list[:-1], n_list[1:])):
        raise ValueError("n_list must be strictly increasing")
    rows = []
    for n in n_list:
        vals = np.array([sampler(int(n), rep) for rep in range(replicates)]) / float(n)
        rows.append(SubadditiveRow(n=int(n), mean=float(vals.mean()), std=float(vals.std(ddof=1)), replicates=replicates))
    inv_n = np.array([1.0 / row.n for row in rows])
    means = np.array([row.mean for row in rows])
    slope, intercept = np.polyfit(inv_n, means, 1)
    return SubadditiveReport(
        rows=rows,
        gamma_estimate=float(intercept),
        slope_vs_inv_n=float(slope),
        dispersion_shrinks=rows[-1].std < rows[0].std,
    )

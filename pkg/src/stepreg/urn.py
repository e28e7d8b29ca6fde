"""A Polya urn that resets itself, and the information gap it certifies.

The urn starts with one red and one blue ball; before every draw it is
emptied back to that seed state with probability r, otherwise the drawn
color is reinforced.  The resulting draw sequence (1 = blue) is exchange-
able within runs but not i.i.d., and the average log-likelihood ratio of
its law against any i.i.d. Bernoulli law is strictly negative.  That
strict negativity is measured here through an exact forward filter over
the (finitely many) reachable urn compositions.

Convention: the filter starts from the reseeded state (1, 1).  The
stationary law of the extended chain is not available in closed form;
initialization is forgotten at geometric rate (1 - r) per step, and every
report records the bound (1 - r)^k for its prefix length k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from stepreg.seeding import rng_from

__all__ = [
    "UrnPath",
    "TermEstimate",
    "MixingRow",
    "recharge_prob",
    "simulate_urn",
    "filter_q",
    "filter_log_prob",
    "relative_entropy_terms",
    "mixing_distance",
]


def recharge_prob(alpha: float) -> float:
    """Reset probability equivalent to split intensity alpha: alpha/(1+alpha)."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    return alpha / (1.0 + alpha)


@dataclass(frozen=True)
class UrnPath:
    """Recorded draws with the urn composition after each draw and a flag
    for whether the urn was reseeded before the draw."""

    y: np.ndarray
    red: np.ndarray
    blue: np.ndarray
    recharged: np.ndarray


def simulate_urn(r: float, steps: int, burn_in: int, seed) -> UrnPath:
    """Run burn_in + steps draws from the seed state (1, 1) and return the
    last `steps` of them; deterministic given the seed."""
    if not 0.0 < r <= 1.0:
        raise ValueError("r must lie in (0, 1]; r = 0 never reseeds and the chain is transient")
    if steps < 0 or burn_in < 0:
        raise ValueError("steps and burn_in must be nonnegative")
    rng = seed if isinstance(seed, np.random.Generator) else rng_from(seed, "simulate_urn")
    total = steps + burn_in
    reset = rng.random(total) < r
    udraw = rng.random(total)
    y = np.empty(steps, dtype=np.int8)
    reds = np.empty(steps, dtype=np.int64)
    blues = np.empty(steps, dtype=np.int64)
    red, blue = 1, 1
    reset_l = reset.tolist()
    udraw_l = udraw.tolist()
    for t in range(total):
        if reset_l[t]:
            red, blue = 1, 1
        if udraw_l[t] < blue / (red + blue):
            blue += 1
            outcome = 1
        else:
            red += 1
            outcome = 0
        if t >= burn_in:
            k = t - burn_in
            y[k] = outcome
            reds[k] = red
            blues[k] = blue
    return UrnPath(y=y, red=reds, blue=blues, recharged=reset[burn_in:].copy())


def _filter_steps(y_prefix: Sequence[int], r: float) -> tuple[dict, float]:
    """Exact filter from the seed state; returns the posterior over urn
    compositions given the prefix and the accumulated log-likelihood."""
    dist = {(1, 1): 1.0}
    log_prob = 0.0
    for obs in y_prefix:
        if obs not in (0, 1):
            raise ValueError("prefix entries must be 0 or 1")
        mixed: dict = {}
        for (red, blue), w in dist.items():
            mixed[(red, blue)] = mixed.get((red, blue), 0.0) + (1.0 - r) * w
        mixed[(1, 1)] = mixed.get((1, 1), 0.0) + r
        new: dict = {}
        norm = 0.0
        for (red, blue), w in mixed.items():
            lik = blue / (red + blue) if obs == 1 else red / (red + blue)
            if lik == 0.0 or w == 0.0:
                continue
            state = (red, blue + 1) if obs == 1 else (red + 1, blue)
            mass = w * lik
            new[state] = new.get(state, 0.0) + mass
            norm += mass
        log_prob += math.log(norm)
        dist = {s: w / norm for s, w in new.items()}
    return dist, log_prob


def _next_prob(dist: dict, r: float) -> float:
    tail = sum(w * blue / (red + blue) for (red, blue), w in dist.items())
    return r * 0.5 + (1.0 - r) * tail


def filter_q(y_prefix: Sequence[int], r: float) -> float:
    """Exact probability that the next draw is blue given the prefix."""
    if not 0.0 < r <= 1.0:
        raise ValueError("r must lie in (0, 1]")
    dist, _ = _filter_steps(y_prefix, r)
    return _next_prob(dist, r)


def filter_log_prob(y: Sequence[int], r: float) -> float:
    """Exact log-probability of an entire draw sequence under the urn law."""
    if not 0.0 < r <= 1.0:
        raise ValueError("r must lie in (0, 1]")
    _, lp = _filter_steps(y, r)
    return lp


def _batch_next_prob(ys: np.ndarray, r: float, chunk: int = 10_000) -> np.ndarray:
    """Vectorized filter: next-draw blue probability for each prefix row."""
    n_rows, k = ys.shape
    out = np.empty(n_rows)
    size = k + 1
    a_idx = np.arange(size)[:, None]
    b_idx = np.arange(size)[None, :]
    lik1 = (b_idx + 1.0) / (a_idx + b_idx + 2.0)
    lik0 = (a_idx + 1.0) / (a_idx + b_idx + 2.0)
    for lo in range(0, n_rows, chunk):
        rows = ys[lo : lo + chunk]
        m = rows.shape[0]
        p = np.zeros((m, size, size))
        p[:, 0, 0] = 1.0
        for t in range(k):
            p *= 1.0 - r
            p[:, 0, 0] += r
            obs = rows[:, t].astype(bool)[:, None, None]
            p *= np.where(obs, lik1[None], lik0[None])
            shifted = np.zeros_like(p)
            shifted[obs[:, 0, 0], :, 1:] = p[obs[:, 0, 0], :, :-1]
            shifted[~obs[:, 0, 0], 1:, :] = p[~obs[:, 0, 0], :-1, :]
            p = shifted
            p /= p.sum(axis=(1, 2), keepdims=True)
        tail = np.sum(p * lik1[None], axis=(1, 2))
        out[lo : lo + chunk] = r * 0.5 + (1.0 - r) * tail
    return out


@dataclass(frozen=True)
class TermEstimate:
    """Mean of log q(Y_{k+1} | Y_1..Y_k) / p(Y_{k+1}) under i.i.d. Bernoulli
    sampling, with its standard error."""

    k: int
    mean: float
    std_error: float
    replicates: int
    init_discrepancy_bound: float


def relative_entropy_terms(p: float, r: float, k_list: Sequence[int], replicates: int, seed) -> list[TermEstimate]:
    """Per-position terms of the average log-likelihood ratio of the urn law
    against i.i.d. Bernoulli-p, estimated by Monte Carlo under the
    Bernoulli law.  Each term is nonpositive in expectation, and strictly
    negative unless the urn's predictive distribution matches Bernoulli-p."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    if not 0.0 < r <= 1.0:
        raise ValueError("r must lie in (0, 1]")
    out = []
    for k in k_list:
        rng = rng_from(seed, "urn_terms", int(k)) if isinstance(seed, int) else seed
        ys = (rng.random((replicates, k + 1)) < p).astype(np.int8)
        q1 = _batch_next_prob(ys[:, :k], r) if k > 0 else np.full(replicates, 0.5)
        last = ys[:, k].astype(bool)
        vals = np.where(last, np.log(q1) - math.log(p), np.log1p(-q1) - math.log1p(-p))
        out.append(
            TermEstimate(
                k=int(k),
                mean=float(vals.mean()),
                std_error=float(vals.std(ddof=1) / math.sqrt(replicates)),
                replicates=replicates,
                init_discrepancy_bound=(1.0 - r) ** int(k),
            )
        )
    return out


def _propagate_unobserved(dist: dict, r: float) -> dict:
    """One draw step with the outcome marginalized out."""
    mixed: dict = {}
    for (red, blue), w in dist.items():
        mixed[(red, blue)] = mixed.get((red, blue), 0.0) + (1.0 - r) * w
    mixed[(1, 1)] = mixed.get((1, 1), 0.0) + r
    new: dict = {}
    for (red, blue), w in mixed.items():
        tot = red + blue
        new[(red, blue + 1)] = new.get((red, blue + 1), 0.0) + w * blue / tot
        new[(red + 1, blue)] = new.get((red + 1, blue), 0.0) + w * red / tot
    return new


def _block_distribution(dist: dict, r: float, m: int) -> np.ndarray:
    """Exact probabilities of all 2^m outcome blocks from a state law."""
    probs = np.empty(1 << m)
    for idx, block in enumerate(product((0, 1), repeat=m)):
        d = dist
        logp = 0.0
        dead = False
        for obs in block:
            mixed: dict = {}
            for (red, blue), w in d.items():
                mixed[(red, blue)] = mixed.get((red, blue), 0.0) + (1.0 - r) * w
            mixed[(1, 1)] = mixed.get((1, 1), 0.0) + r
            new: dict = {}
            norm = 0.0
            for (red, blue), w in mixed.items():
                lik = blue / (red + blue) if obs == 1 else red / (red + blue)
                state = (red, blue + 1) if obs == 1 else (red + 1, blue)
                mass = w * lik
                new[state] = new.get(state, 0.0) + mass
                norm += mass
            if norm == 0.0:
                dead = True
                break
            logp += math.log(norm)
            d = {s: w / norm for s, w in new.items()}
        probs[idx] = 0.0 if dead else math.exp(logp)
    return probs


@dataclass(frozen=True)
class MixingRow:
    prefix: tuple
    m: int
    tv: float
    no_recharge_bound: float


def mixing_distance(m: int, r: float, prefixes: Sequence[Sequence[int]]) -> list[MixingRow]:
    """Total-variation distance between the law of the m draws that follow
    an m-step gap after a prefix and the same block's law with no prefix.

    Both laws are computed exactly by the filter; a reseed anywhere in the
    gap couples them, so tv <= (1-r)^m always.
    """
    if not 0.0 < r <= 1.0:
        raise ValueError("r must lie in (0, 1]")
    if m < 1 or m > 10:
        raise ValueError("m must lie in 1..10 (exact enumeration of 2^m blocks)")
    base = {(1, 1): 1.0}
    skip_base = base
    for _ in range(m):
        skip_base = _propagate_unobserved(skip_base, r)
    uncond = _block_distribution(skip_base, r, m)
    rows = []
    for prefix in prefixes:
        dist, _ = _filter_steps(prefix, r)
        for _ in range(m):
            dist = _propagate_unobserved(dist, r)
        cond = _block_distribution(dist, r, m)
        rows.append(
            MixingRow(
                prefix=tuple(int(b) for b in prefix),
                m=m,
                tv=float(0.5 * np.abs(cond - uncond).sum()),
                no_recharge_bound=(1.0 - r) ** m,
            )
        )
    return rows

"""Reversible-jump sampler over split configurations, heights integrated out.

The chain lives on (m, u): the conjugate height integral is available in
closed form per configuration, so the target is simply nu_m * Z_u and no
dimension matching for heights is needed.  Moves are birth (a new uniform
split), death (delete a uniformly chosen split), and a reflected uniform
displacement of one split.  With the prior's split positions i.i.d.
uniform, the birth/death Hastings ratio reduces to

    accept_birth = min(1, [nu_{m+1} Z_{u+v} / (nu_m Z_u)] * p_death/p_birth)

(the 1/(m+1) death-selection factor cancels against the multiplicity of
the unordered configuration), and the move ratio is just Z_{u'}/Z_u.
Detailed balance is certified by the exact-enumeration tests: the chain's
m-marginal must match the enumerated posterior over m.

All moves update the cached per-cell log-Beta terms incrementally via
binary search on the success prefix counts; the cache is re-verified
against a full recomputation every `verify_every` steps.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field

import numpy as np

from stepreg.kernel import ensure_logfact, log_Z_u, sample_heights, HeightPosterior
from stepreg.model import DataSet, GridFunction, RegressionFunction, StepFunction, l1_distance
from stepreg.priors import HierarchyPrior
from stepreg.seeding import rng_from

__all__ = [
    "TuningParams",
    "ChainConfig",
    "ChainState",
    "ChainResult",
    "log_target",
    "mh_step",
    "run_chain",
    "posterior_mean",
    "posterior_l1_samples",
]


@dataclass(frozen=True)
class TuningParams:
    """Move mixture and displacement width.  Birth and death probabilities
    must match so the jump ratio stays symmetric in m."""

    p_birth: float = 0.35
    p_death: float = 0.35
    p_move: float = 0.30
    move_width: float = 0.2

    def __post_init__(self):
        if min(self.p_birth, self.p_death, self.p_move) <= 0.0:
            raise ValueError("move probabilities must be positive")
        if abs(self.p_birth + self.p_death + self.p_move - 1.0) > 1e-12:
            raise ValueError("move probabilities must sum to 1")
        if self.p_birth != self.p_death:
            raise ValueError("p_birth must equal p_death")
        if not 0.0 < self.move_width <= 1.0:
            raise ValueError("move_width must lie in (0, 1]")


@dataclass(frozen=True)
class ChainConfig:
    n_iters: int = 200_000
    burn_in: int = 50_000
    thin: int = 10
    tuning: TuningParams = field(default_factory=TuningParams)
    verify_every: int = 10_000

    def __post_init__(self):
        if not (self.n_iters >= self.burn_in >= 0):
            raise ValueError("need n_iters >= burn_in >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.verify_every < 1:
            raise ValueError("verify_every must be >= 1")


class ChainState:
    """Working state of one chain: sorted splits, cell boundaries as indices
    into the sorted covariates, per-cell log-Beta terms, and their sum."""

    __slots__ = ("u", "bnd", "cell_lb", "log_z")

    def __init__(self, u, bnd, cell_lb, log_z):
        self.u = u  # sorted split positions
        self.bnd = bnd  # data-index boundaries, length m + 2
        self.cell_lb = cell_lb  # log beta per cell, length m + 1
        self.log_z = log_z

    @property
    def m(self) -> int:
        return len(self.u)

    @classmethod
    def initial(cls, data: DataSet, u=()) -> "ChainState":
        su = sorted(float(v) for v in u)
        sx = data.sorted_x
        sp = data.success_prefix
        bnd = [0] + [int(np.searchsorted(sx, v, side="left")) for v in su] + [data.n]
        lf = ensure_logfact(data.n + 2)
        cell_lb = []
        for a, b in zip(bnd[:-1], bnd[1:]):
            ns = int(sp[b] - sp[a])
            nf = (b - a) - ns
            cell_lb.append(float(lf[ns] + lf[nf] - lf[ns + nf + 1]))
        return cls(su, bnd, cell_lb, float(sum(cell_lb)))

    def verify_cache(self, data: DataSet, tol: float = 1e-9) -> None:
        exact = log_Z_u(data, self.u)
        if abs(exact - self.log_z) > tol:
            raise RuntimeError(
                f"incremental log Z cache drifted: cached {self.log_z!r}, recomputed {exact!r}"
            )
        self.log_z = exact
        # refresh per-cell terms so drift cannot accumulate across epochs
        fresh = ChainState.initial(data, self.u)
        self.cell_lb = fresh.cell_lb


def log_target(state: ChainState, data: DataSet, nu: HierarchyPrior) -> float:
    """Unnormalized log posterior density of the configuration."""
    return nu.log_mass(state.m) + state.log_z


class _Kernel:
    """One chain's transition kernel with bound-local fast paths."""

    def __init__(self, data: DataSet, nu: HierarchyPrior, tuning: TuningParams):
        self.data = data
        self.nu = nu
        self.tuning = tuning
        self.sx = data.sorted_x.tolist()
        self.sp = data.success_prefix.tolist()
        self.n = data.n
        lf = ensure_logfact(data.n + 2)
        self.lf = lf.tolist()
        self.stats = {
            "birth": [0, 0],
            "death": [0, 0],
            "move": [0, 0],
            "death_at_empty": 0,
            "move_at_empty": 0,
        }

    def _lb(self, a: int, b: int) -> float:
        ns = self.sp[b] - self.sp[a]
        return self.lf[ns] + self.lf[(b - a) - ns] - self.lf[b - a + 1]

    def _locate(self, v: float) -> int:
        pos = bisect_left(self.sx, v)
        if pos < self.n and self.sx[pos] == v:
            raise ValueError(f"proposed split coincides exactly with covariate {v!r}")
        return pos

    def step(self, state: ChainState, rng: np.random.Generator) -> None:
        t = self.tuning
        r = rng.random()
        if r < t.p_birth:
            self._birth(state, rng)
        elif r < t.p_birth + t.p_death:
            self._death(state, rng)
        else:
            self._move(state, rng)

    def _birth(self, state: ChainState, rng) -> None:
        self.stats["birth"][0] += 1
        m = state.m
        v = float(rng.random())
        if v in state.u:
            return
        j = bisect_right(state.u, v)
        pos = self._locate(v)
        a, b = state.bnd[j], state.bnd[j + 1]
        dlz = self._lb(a, pos) + self._lb(pos, b) - state.cell_lb[j]
        log_acc = (
            self.nu.log_mass(m + 1)
            - self.nu.log_mass(m)
            + dlz
            + math.log(self.tuning.p_death)
            - math.log(self.tuning.p_birth)
        )
        if log_acc >= 0.0 or math.log(rng.random()) < log_acc:
            self.stats["birth"][1] += 1
            state.u.insert(j, v)
            state.bnd.insert(j + 1, pos)
            state.cell_lb[j : j + 1] = [self._lb(a, pos), self._lb(pos, b)]
            state.log_z += dlz

    def _death(self, state: ChainState, rng) -> None:
        m = state.m
        if m == 0:
            self.stats["death_at_empty"] += 1
            return
        self.stats["death"][0] += 1
        i = int(rng.integers(m))
        a, b = state.bnd[i], state.bnd[i + 2]
        dlz = self._lb(a, b) - state.cell_lb[i] - state.cell_lb[i + 1]
        log_acc = (
            self.nu.log_mass(m - 1)
            - self.nu.log_mass(m)
            + dlz
            + math.log(self.tuning.p_birth)
            - math.log(self.tuning.p_death)
        )
        if log_acc >= 0.0 or math.log(rng.random()) < log_acc:
            self.stats["death"][1] += 1
            del state.u[i]
            del state.bnd[i + 1]
            state.cell_lb[i : i + 2] = [self._lb(a, b)]
            state.log_z += dlz

    def _move(self, state: ChainState, rng) -> None:
        m = state.m
        if m == 0:
            self.stats["move_at_empty"] += 1
            return
        self.stats["move"][0] += 1
        i = int(rng.integers(m))
        v = state.u[i] + self.tuning.move_width * (float(rng.random()) - 0.5)
        if v < 0.0:
            v = -v
        elif v > 1.0:
            v = 2.0 - v
        if not 0.0 < v < 1.0 or v in state.u:
            return
        pos = self._locate(v)
        # delete split i, then insert v into the intermediate configuration
        a, b = state.bnd[i], state.bnd[i + 2]
        merged_lb = self._lb(a, b)
        d_remove = merged_lb - state.cell_lb[i] - state.cell_lb[i + 1]
        jr = bisect_right(state.u, v)
        j = jr - 1 if jr > i else jr  # cell index in the intermediate config
        if j == i:
            ca, cb, old_lb = a, b, merged_lb
        else:
            orig = j if j < i else j + 1
            ca, cb, old_lb = state.bnd[orig], state.bnd[orig + 1], state.cell_lb[orig]
        d_add = self._lb(ca, pos) + self._lb(pos, cb) - old_lb
        dlz = d_remove + d_add
        if dlz >= 0.0 or math.log(rng.random()) < dlz:
            self.stats["move"][1] += 1
            del state.u[i]
            del state.bnd[i + 1]
            state.cell_lb[i : i + 2] = [merged_lb]
            jj = bisect_right(state.u, v)
            state.u.insert(jj, v)
            state.bnd.insert(jj + 1, pos)
            state.cell_lb[jj : jj + 1] = [self._lb(ca, pos), self._lb(pos, cb)]
            state.log_z += dlz


def mh_step(state: ChainState, data: DataSet, nu: HierarchyPrior, tuning: TuningParams, seed) -> ChainState:
    """One Metropolis-Hastings step (in place); returns the state."""
    rng = seed if isinstance(seed, np.random.Generator) else rng_from(seed, "mh_step")
    _Kernel(data, nu, tuning).step(state, rng)
    return state


@dataclass
class ChainResult:
    """Retained (m, u) samples with their log posterior values and the
    per-move acceptance statistics."""

    samples: list
    log_targets: np.ndarray
    stats: dict
    n_iters: int
    burn_in: int
    thin: int
    seed: int

    def m_values(self) -> np.ndarray:
        return np.array([m for m, _ in self.samples], dtype=np.int64)

    def m_marginal(self, m_max: int) -> np.ndarray:
        counts = np.bincount(self.m_values(), minlength=m_max + 1)[: m_max + 1]
        return counts / max(1, len(self.samples))

    def acceptance_rates(self) -> dict:
        out = {}
        for kind in ("birth", "death", "move"):
            proposed, accepted = self.stats[kind]
            out[kind] = accepted / proposed if proposed else float("nan")
        return out

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for (m, u), lt in zip(self.samples, self.log_targets):
                fh.write(json.dumps({"m": int(m), "u": list(u), "log_target": float(lt)}) + "\n")


def run_chain(data: DataSet, nu: HierarchyPrior, config: ChainConfig, seed,
              init_u=()) -> ChainResult:
    """Run one chain; deterministic trajectory given the seed.

    The incremental log Z cache is re-verified every config.verify_every
    steps and a mismatch raises (it would indicate an update bug, not a
    recoverable condition).
    """
    rng = seed if isinstance(seed, np.random.Generator) else rng_from(seed, "run_chain")
    kernel = _Kernel(data, nu, config.tuning)
    state = ChainState.initial(data, init_u)
    samples = []
    log_targets = []
    for it in range(config.n_iters):
        kernel.step(state, rng)
        if (it + 1) % config.verify_every == 0:
            state.verify_cache(data)
        if it >= config.burn_in and (it - config.burn_in) % config.thin == 0:
            samples.append((state.m, tuple(state.u)))
            log_targets.append(nu.log_mass(state.m) + state.log_z)
    return ChainResult(
        samples=samples,
        log_targets=np.asarray(log_targets),
        stats=kernel.stats,
        n_iters=config.n_iters,
        burn_in=config.burn_in,
        thin=config.thin,
        seed=seed if isinstance(seed, int) else -1,
    )


def _sample_cells(data: DataSet, u: tuple) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(boundaries, ns, nf) for one retained split vector."""
    su = np.asarray(u)
    idx = np.concatenate(([0], np.searchsorted(data.sorted_x, su, side="left"), [data.n]))
    ns = np.diff(data.success_prefix[idx])
    nf = np.diff(idx) - ns
    return su, ns, nf


def posterior_mean(data: DataSet, nu: HierarchyPrior, config: ChainConfig, grid_k: int, seed) -> GridFunction:
    """Posterior-mean regression estimate on a grid of K+1 nodes.

    Heights are averaged analytically per retained configuration (per-cell
    mean (ns+1)/(ns+nf+2)), so only the split configurations are sampled.
    """
    if grid_k < 2:
        raise ValueError("grid_k must be >= 2")
    result = run_chain(data, nu, config, seed)
    nodes = np.linspace(0.0, 1.0, grid_k + 1)
    acc = np.zeros(grid_k + 1)
    if not result.samples:
        raise ValueError("chain retained no samples; increase n_iters")
    for _, u in result.samples:
        su, ns, nf = _sample_cells(data, u)
        means = (ns + 1.0) / (ns + nf + 2.0)
        acc += means[np.searchsorted(su, nodes, side="right")]
    return GridFunction(np.clip(acc / len(result.samples), 0.0, 1.0))


def posterior_l1_samples(
    data: DataSet,
    nu: HierarchyPrior,
    f_true: RegressionFunction,
    config: ChainConfig,
    seed,
) -> np.ndarray:
    """L1 distances to f_true of full posterior draws (splits from the
    chain, heights from their conjugate per-cell densities)."""
    result = run_chain(data, nu, config, seed)
    height_rng = rng_from(seed, "posterior_l1_heights") if isinstance(seed, int) else seed
    out = np.empty(len(result.samples))
    for k, (_, u) in enumerate(result.samples):
        su, ns, nf = _sample_cells(data, u)
        heights = sample_heights(HeightPosterior(ns.astype(float), nf.astype(float)), height_rng)
        out[k] = l1_distance(StepFunction(su, heights), f_true)
    return out

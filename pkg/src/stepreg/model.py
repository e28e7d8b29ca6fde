"""Regression functions, datasets, and the data-level transforms.

Two function representations are supported: `StepFunction` (piecewise
constant, the prior's support) and `GridFunction` (piecewise linear through
equispaced nodes, the finite stand-in for a general measurable regression
function).  Both evaluate pointwise and integrate exactly, which keeps the
cell-averaging and distance computations free of quadrature error.

Datasets carry covariates in [0, 1] and binary responses, plus a sorted
index and success prefix counts so that per-cell success/failure counts for
any split vector cost one binary search per split.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from stepreg.seeding import rng_from

__all__ = [
    "StepFunction",
    "GridFunction",
    "RegressionFunction",
    "DataSet",
    "CellCounts",
    "sample_dataset",
    "poisson_count",
    "cell_counts",
    "average_onto",
    "l1_distance",
    "l2sq_distance",
    "thin_dataset",
    "save_dataset_csv",
    "load_dataset_csv",
    "function_to_json_obj",
    "function_from_json_obj",
]


class StepFunction:
    """Piecewise-constant function on [0, 1].

    Cells follow the left-closed/right-open convention: the value on
    [b[j], b[j+1]) is levels[j+1] with b[0] = 0 implied, and the last cell
    is closed at 1.  Breakpoints must be strictly increasing and interior.
    """

    __slots__ = ("breakpoints", "levels")

    def __init__(self, breakpoints: Sequence[float], levels: Sequence[float]):
        bp = np.asarray(breakpoints, dtype=float)
        lv = np.asarray(levels, dtype=float)
        if bp.ndim != 1 or lv.ndim != 1:
            raise ValueError("breakpoints and levels must be one-dimensional")
        if lv.size != bp.size + 1:
            raise ValueError(f"need {bp.size + 1} levels for {bp.size} breakpoints, got {lv.size}")
        if bp.size and (bp[0] <= 0.0 or bp[-1] >= 1.0 or np.any(np.diff(bp) <= 0.0)):
            raise ValueError("breakpoints must be strictly increasing inside (0, 1)")
        if np.any(lv < 0.0) or np.any(lv > 1.0):
            raise ValueError("levels must lie in [0, 1]")
        self.breakpoints = bp
        self.levels = lv

    @classmethod
    def constant(cls, p: float) -> "StepFunction":
        return cls((), (p,))

    def __call__(self, x):
        # x == breakpoint belongs to the cell starting at that breakpoint.
        idx = np.searchsorted(self.breakpoints, x, side="right")
        return self.levels[idx]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, StepFunction)
            and np.array_equal(self.breakpoints, other.breakpoints)
            and np.array_equal(self.levels, other.levels)
        )

    def __repr__(self) -> str:
        return f"StepFunction(breakpoints={self.breakpoints.tolist()}, levels={self.levels.tolist()})"

    def segments(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(x0, x1, v0, v1) arrays; the function is linear on each [x0, x1]."""
        edges = np.concatenate(([0.0], self.breakpoints, [1.0]))
        return edges[:-1], edges[1:], self.levels, self.levels


class GridFunction:
    """Piecewise-linear function through K+1 equispaced nodes on [0, 1]."""

    __slots__ = ("values",)

    def __init__(self, values: Sequence[float]):
        v = np.asarray(values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("need values at K+1 >= 2 equispaced nodes")
        if np.any(v < 0.0) or np.any(v > 1.0):
            raise ValueError("values must lie in [0, 1]")
        self.values = v

    @classmethod
    def from_callable(cls, fn, k: int = 256) -> "GridFunction":
        nodes = np.linspace(0.0, 1.0, k + 1)
        return cls(np.clip([fn(t) for t in nodes], 0.0, 1.0))

    @property
    def k(self) -> int:
        return self.values.size - 1

    def __call__(self, x):
        return np.interp(x, np.linspace(0.0, 1.0, self.values.size), self.values)

    def __repr__(self) -> str:
        return f"GridFunction(k={self.k})"

    def segments(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        nodes = np.linspace(0.0, 1.0, self.values.size)
        return nodes[:-1], nodes[1:], self.values[:-1], self.values[1:]


RegressionFunction = Union[StepFunction, GridFunction]


def _clipped_segments(f: RegressionFunction, a: float, b: float):
    """Linear pieces of f restricted to [a, b], as (x0, x1, v0, v1) arrays."""
    x0, x1, v0, v1 = f.segments()
    keep = (x1 > a) & (x0 < b)
    x0, x1, v0, v1 = x0[keep], x1[keep], v0[keep], v1[keep]
    slope = np.where(x1 > x0, (v1 - v0) / np.where(x1 > x0, x1 - x0, 1.0), 0.0)
    lo = np.maximum(x0, a)
    hi = np.minimum(x1, b)
    return lo, hi, v0 + slope * (lo - x0), v0 + slope * (hi - x0)


def integral(f: RegressionFunction, a: float = 0.0, b: float = 1.0) -> float:
    """Exact integral of f over [a, b] (trapezoid rule is exact per piece)."""
    if b <= a:
        return 0.0
    lo, hi, va, vb = _clipped_segments(f, a, b)
    return float(np.sum((hi - lo) * (va + vb) * 0.5))


def _merged_linear_pieces(f: RegressionFunction, g: RegressionFunction):
    """Common refinement on which both f and g are linear.

    Returns (x0, x1, f0, f1, g0, g1): endpoint values of each function on
    every piece of the merged partition of [0, 1].
    """
    fx0, fx1, _, _ = f.segments()
    gx0, gx1, _, _ = g.segments()
    edges = np.unique(np.concatenate((fx0, fx1, gx0, gx1)))
    x0, x1 = edges[:-1], edges[1:]

    def endpoint_values(h):
        h0, h1, v0, v1 = h.segments()
        idx = np.clip(np.searchsorted(h0, x0, side="right") - 1, 0, h0.size - 1)
        width = h1[idx] - h0[idx]
        slope = np.where(width > 0, (v1[idx] - v0[idx]) / np.where(width > 0, width, 1.0), 0.0)
        return v0[idx] + slope * (x0 - h0[idx]), v0[idx] + slope * (x1 - h0[idx])

    f0, f1 = endpoint_values(f)
    g0, g1 = endpoint_values(g)
    return x0, x1, f0, f1, g0, g1


def l1_distance(f: RegressionFunction, g: RegressionFunction) -> float:
    """Exact L1 distance between two piecewise-linear (or step) functions."""
    x0, x1, f0, f1, g0, g1 = _merged_linear_pieces(f, g)
    d0 = f0 - g0
    d1 = f1 - g1
    length = x1 - x0
    same_sign = d0 * d1 >= 0.0
    # |linear| integrates to a trapezoid when the sign is constant; with a
    # crossing it splits into two triangles meeting at the root.
    trap = np.abs(d0 + d1) * 0.5 * length
    denom = np.where(same_sign, 1.0, np.abs(d0 - d1))
    cross = (d0 * d0 + d1 * d1) / np.where(denom > 0, denom, 1.0) * 0.5 * length
    return float(np.sum(np.where(same_sign, trap, cross)))


def l2sq_distance(f: RegressionFunction, g: RegressionFunction) -> float:
    """Exact squared L2 distance between two piecewise-linear functions."""
    x0, x1, f0, f1, g0, g1 = _merged_linear_pieces(f, g)
    d0 = f0 - g0
    d1 = f1 - g1
    return float(np.sum((x1 - x0) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0))


class DataSet:
    """Covariate/response pairs with a sorted view and success prefix counts.

    Covariates must be pairwise distinct: the exact predictive-probability
    decomposition works on the gaps between sorted covariates, and exact
    ties (probability zero under the sampling model) would corrupt it.
    """

    __slots__ = ("x", "y", "sort_index", "sorted_x", "sorted_y", "success_prefix")

    def __init__(self, x: Sequence[float], y: Sequence[int]):
        xv = np.asarray(x, dtype=float)
        yv = np.asarray(y)
        if xv.ndim != 1 or yv.ndim != 1 or xv.size != yv.size:
            raise ValueError("x and y must be one-dimensional and of equal length")
        if xv.size and (np.min(xv) < 0.0 or np.max(xv) > 1.0):
            raise ValueError("covariates must lie in [0, 1]")
        if not np.all((yv == 0) | (yv == 1)):
            raise ValueError("responses must be 0 or 1")
        order = np.argsort(xv, kind="stable")
        sx = xv[order]
        if sx.size > 1 and np.any(np.diff(sx) == 0.0):
            raise ValueError("duplicate covariate values are not allowed")
        self.x = xv
        self.y = yv.astype(np.int64)
        self.sort_index = order
        self.sorted_x = sx
        self.sorted_y = self.y[order]
        self.success_prefix = np.concatenate(([0], np.cumsum(self.sorted_y)))

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def n_success(self) -> int:
        return int(self.success_prefix[-1])

    @property
    def n_failure(self) -> int:
        return self.n - self.n_success

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"DataSet(n={self.n}, successes={self.n_success})"

    def append(self, x: float, y: int) -> "DataSet":
        """New dataset with one extra point (used by monotonicity checks)."""
        return DataSet(np.concatenate((self.x, [x])), np.concatenate((self.y, [y])))

    def subset(self, mask: np.ndarray) -> "DataSet":
        return DataSet(self.x[mask], self.y[mask])


@dataclass(frozen=True)
class CellCounts:
    """Success/failure counts per cell of a split-vector partition."""

    ns: np.ndarray
    nf: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.ns.size

    @property
    def totals(self) -> tuple[int, int]:
        return int(self.ns.sum()), int(self.nf.sum())


def sample_dataset(f: RegressionFunction, n: int, seed) -> DataSet:
    """Draw n i.i.d. pairs: X uniform on [0, 1], Y | X Bernoulli-f(X).

    The response indicator compares an auxiliary uniform V strictly below
    f(X), so the degenerate truths f = 0 and f = 1 produce all-0 / all-1
    responses exactly.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    rng = seed if isinstance(seed, np.random.Generator) else rng_from(seed, "sample_dataset")
    x = rng.random(n)
    v = rng.random(n)
    y = (v < np.asarray(f(x))).astype(np.int64)
    return DataSet(x, y)


def poisson_count(mean: float, seed) -> int:
    """One Poisson draw with the given mean (mean = 0 gives 0)."""
    if mean < 0:
        raise ValueError("mean must be nonnegative")
    rng = seed if isinstance(seed, np.random.Generator) else rng_from(seed, "poisson_count")
    return int(rng.poisson(mean))


def _split_boundaries(data: DataSet, u: Sequence[float]) -> np.ndarray:
    su = np.sort(np.asarray(u, dtype=float))
    if su.size and (su[0] <= 0.0 or su[-1] >= 1.0):
        raise ValueError("split positions must lie strictly inside (0, 1)")
    if su.size:
        left = np.searchsorted(data.sorted_x, su, side="left")
        right = np.searchsorted(data.sorted_x, su, side="right")
        if np.any(left != right):
            raise ValueError("a split position coincides exactly with a covariate")
    return su


def cell_counts(data: DataSet, u: Sequence[float]) -> CellCounts:
    """Per-cell success/failure counts for the partition induced by u.

    u may be unordered; cells are [u_(j), u_(j+1)) with implicit endpoints
    0 and 1.  A split exactly equal to a covariate raises (such ties have
    probability zero and signal a bug rather than a case to break silently).
    """
    su = _split_boundaries(data, u)
    idx = np.concatenate(([0], np.searchsorted(data.sorted_x, su, side="left"), [data.n]))
    ns = np.diff(data.success_prefix[idx])
    totals = np.diff(idx)
    return CellCounts(ns=ns, nf=totals - ns)


def average_onto(f: RegressionFunction, u: Sequence[float]) -> StepFunction:
    """Step function equal to the mean of f on every cell induced by u."""
    su = np.unique(np.asarray(u, dtype=float))
    if su.size != np.asarray(u).size:
        raise ValueError("split vector contains duplicate positions")
    if su.size and (su[0] <= 0.0 or su[-1] >= 1.0):
        raise ValueError("split positions must lie strictly inside (0, 1)")
    edges = np.concatenate(([0.0], su, [1.0]))
    means = [integral(f, a, b) / (b - a) for a, b in zip(edges[:-1], edges[1:])]
    return StepFunction(su, np.clip(means, 0.0, 1.0))


def thin_dataset(data: DataSet, rho0: float, rho1: float, seed) -> DataSet:
    """Randomly delete failures with probability rho0 and successes with rho1."""
    if not (0.0 <= rho0 <= 1.0 and 0.0 <= rho1 <= 1.0):
        raise ValueError("removal probabilities must lie in [0, 1]")
    rng = seed if isinstance(seed, np.random.Generator) else rng_from(seed, "thin_dataset")
    r = rng.random(data.n)
    keep = np.where(data.y == 1, r < 1.0 - rho1, r < 1.0 - rho0)
    return data.subset(keep)


# -- serialization ----------------------------------------------------------

def save_dataset_csv(data: DataSet, path, header_lines: Iterable[str] = ()) -> None:
    """Write `x,y` rows; x with 17 significant digits so reloads are exact."""
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("x,y\n")
        for xi, yi in zip(data.x, data.y):
            fh.write(f"{xi:.17g},{yi:d}\n")


def load_dataset_csv(path) -> DataSet:
    xs: list[float] = []
    ys: list[int] = []
    with open(path, newline="") as fh:
        lineno = 0
        saw_header = False
        for raw in fh:
            lineno += 1
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not saw_header:
                if [c.strip() for c in line.split(",")] != ["x", "y"]:
                    raise ValueError(f"{path}: line {lineno}: expected header 'x,y'")
                saw_header = True
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}: line {lineno}: expected two comma-separated fields")
            try:
                xi = float(parts[0])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: bad covariate {parts[0]!r}") from None
            if parts[1].strip() not in ("0", "1"):
                raise ValueError(f"{path}: line {lineno}: response must be 0 or 1, got {parts[1]!r}")
            if not (0.0 <= xi <= 1.0):
                raise ValueError(f"{path}: line {lineno}: covariate {xi} outside [0, 1]")
            xs.append(xi)
            ys.append(int(parts[1]))
        if not saw_header:
            raise ValueError(f"{path}: missing 'x,y' header line")
    return DataSet(xs, ys)


def function_to_json_obj(f: RegressionFunction) -> dict:
    if isinstance(f, StepFunction):
        return {"breakpoints": f.breakpoints.tolist(), "levels": f.levels.tolist()}
    return {"values": f.values.tolist()}


def function_from_json_obj(obj: dict) -> RegressionFunction:
    if "levels" in obj:
        return StepFunction(obj.get("breakpoints", []), obj["levels"])
    if "values" in obj:
        return GridFunction(obj["values"])
    raise ValueError("function object needs either 'breakpoints'+'levels' or 'values'")

"""Shannon entropy and the entropy functional of a regression function.

Everything is in nats; the binary entropy peaks at log 2 at one half, and
the integral of the entropy along a regression function is the exponential
decay rate of the predictive probabilities in the regime where splits are
plentiful but sparse relative to the data.  Averaging a function over the
cells of a partition can only raise the functional (Jensen), and the rise
is at least twice the squared L2 distance to the average since the second
derivative of the binary entropy is at most -4.
"""

from __future__ import annotations

import math

import numpy as np

from stepreg.model import RegressionFunction, StepFunction, average_onto

__all__ = ["shannon", "entropy_functional", "concavity_gap", "LOG2"]

LOG2 = math.log(2.0)


def shannon(p):
    """Binary Shannon entropy -p log p - (1-p) log(1-p), with the continuous
    extension H(0) = H(1) = 0.  Accepts scalars or arrays."""
    x = np.asarray(p, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(x > 0.0, x * np.log(x), 0.0) - np.where(x < 1.0, (1.0 - x) * np.log1p(-x), 0.0)
    return float(h) if np.isscalar(p) or getattr(p, "ndim", 0) == 0 else h


def _simpson_segment(a: float, b: float, va: float, vb: float, panels: int) -> float:
    """Composite Simpson integral of H(linear interpolant) over [a, b]."""
    xs = np.linspace(a, b, 2 * panels + 1)
    vals = shannon(va + (vb - va) * (xs - a) / (b - a) if b > a else np.full_like(xs, va))
    w = np.ones(xs.size)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float((b - a) / (6.0 * panels) * np.dot(w, vals))


def entropy_functional(f: RegressionFunction, min_panels: int = 1024) -> float:
    """Integral of the pointwise entropy of f over [0, 1].

    Exact for step functions; for grid functions, composite Simpson on a
    refinement of the grid with at least `min_panels` panels in total
    (panel boundaries include the grid nodes, where the integrand kinks).
    """
    if isinstance(f, StepFunction):
        x0, x1, v0, _ = f.segments()
        return float(np.sum((x1 - x0) * shannon(v0)))
    per_seg = max(2, -(-min_panels // f.k))
    per_seg += per_seg % 2
    x0, x1, v0, v1 = f.segments()
    return float(sum(_simpson_segment(a, b, va, vb, per_seg) for a, b, va, vb in zip(x0, x1, v0, v1)))


def concavity_gap(f: RegressionFunction, u) -> float:
    """Entropy rise from cell-averaging f over the partition induced by u.

    Nonnegative by concavity of the entropy; zero exactly when averaging
    does not change f (up to null sets).
    """
    return entropy_functional(average_onto(f, u)) - entropy_functional(f)

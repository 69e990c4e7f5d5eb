"""Grenander estimator via the least concave majorant of the empirical CDF."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Sample
from .errors import NonConcaveModel, UnsortedInput
from .extrema import Extrema, continuous_minus_model, step_minus_model

MARSHALL_SLACK = 1e-12


def least_concave_majorant(x, y):
    """Vertices of the least concave majorant of the points ``(x, y)``.

    Single pass with a vertex stack; ``x`` must be strictly increasing.
    Collinear points are dropped, so slopes strictly decrease across the
    returned vertices.

    Returns
    -------
    vx, vy : ndarray
        Hull vertices, a subsequence of the input points.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise UnsortedInput("need at least two points")
    if np.any(np.diff(x) <= 0):
        raise UnsortedInput("x must be strictly increasing")
    stack = [0, 1]
    for i in range(2, x.size):
        while len(stack) >= 2:
            j, k = stack[-2], stack[-1]
            # drop k unless it lies strictly above the chord j -> i
            cross = (x[k] - x[j]) * (y[i] - y[j]) - (y[k] - y[j]) * (x[i] - x[j])
            if cross >= 0:
                stack.pop()
            else:
                break
        stack.append(i)
    idx = np.array(stack)
    return x[idx], y[idx]


@dataclass(frozen=True)
class StepDensity:
    """Non-increasing step density.

    ``heights[k]`` applies on ``(breakpoints[k], breakpoints[k + 1]]`` (left
    continuous), and ``breakpoints[0] == 0``.
    """

    breakpoints: np.ndarray
    heights: np.ndarray

    @property
    def cdf_values(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.heights * np.diff(self.breakpoints))])

    @property
    def mass(self) -> float:
        return float(self.cdf_values[-1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = np.searchsorted(self.breakpoints, x, side="left") - 1
        inside = (x > 0) & (x <= self.breakpoints[-1])
        out = np.where(inside, self.heights[np.clip(k, 0, self.heights.size - 1)], 0.0)
        # value at 0 taken as the right limit
        out = np.where(x == 0, self.heights[0], out)
        return out if out.ndim else float(out)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.breakpoints, self.cdf_values)
        return out if out.ndim else float(out)


def grenander_fit(s: Sample) -> StepDensity:
    """Left derivative of the LCM of ``{(0, 0)} U {(X_(i), i/n)}``."""
    xs, counts = np.unique(s.values, return_counts=True)
    x = np.concatenate([[0.0], xs])
    y = np.concatenate([[0.0], np.cumsum(counts) / s.n])
    y[-1] = 1.0
    vx, vy = least_concave_majorant(x, y)
    return StepDensity(vx, np.diff(vy) / np.diff(vx))


def lcm_minus_model(fit: StepDensity, model) -> Extrema:
    return continuous_minus_model(
        fit.cdf,
        fit,
        model.cdf,
        model.pdf,
        np.concatenate([fit.breakpoints, model.breakpoints[model.breakpoints < fit.breakpoints[-1]]]),
        tail_value=fit.mass,
    )


def marshall_check(fit: StepDensity, model, s: Sample):
    """Compare ``||F_hat - F||`` with ``||F_n - F||`` (sup norms on [0, inf)).

    Returns ``(sup_hat, sup_emp, ok)`` where ``ok`` allows a slack of 1e-12.
    """
    if not model.density_nonincreasing:
        raise NonConcaveModel(f"{model.spec} has no concave CDF")
    sup_hat = lcm_minus_model(fit, model).norm
    sup_emp = step_minus_model(s, model.cdf).norm
    return sup_hat, sup_emp, bool(sup_hat <= sup_emp + MARSHALL_SLACK)

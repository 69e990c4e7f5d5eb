"""Exact piecewise-polynomial calculus on the half line [0, inf).

Everything here is closed form: the empirical CDF and its running integral,
mixtures of triangular generators ``x -> (tau - x)_+`` together with their CDFs
and integrated CDFs, and the Gram / moment integrals used by the least squares
fit. Quadrature only ever appears in the tests, as an oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyInput,
    NegativeArgument,
    NonFiniteValue,
    NonPositiveKnot,
    NonPositiveValue,
)

KNOT_MERGE_RTOL = 1e-12


@dataclass(frozen=True)
class Sample:
    """Sorted positive observations.

    ``values`` is ascending; ``has_ties`` flags repeated observations, which
    are accepted (rounded data) but break the distinct-order-statistics
    assumption of the knot placement results.
    """

    values: np.ndarray
    has_ties: bool = False
    _cumsum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        csum = np.concatenate([[0.0], np.cumsum(values)])
        csum.setflags(write=False)
        object.__setattr__(self, "_cumsum", csum)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def max(self) -> float:
        return float(self.values[-1])

    @property
    def distinct(self) -> np.ndarray:
        """Distinct order statistics."""
        return np.unique(self.values)

    def scaled(self, factor: float) -> "Sample":
        return Sample(self.values * factor, self.has_ties)

    def __len__(self):
        return self.n


def validate_sample(raw) -> Sample:
    """Check, sort and wrap raw observations.

    Raises
    ------
    EmptyInput
        if ``raw`` has no entries.
    NonFiniteValue, NonPositiveValue
        carrying the index (in ``raw``) of the first offending entry.
    """
    arr = np.asarray(raw, dtype=float).ravel()
    if arr.size == 0:
        raise EmptyInput("sample is empty")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise NonFiniteValue(int(bad[0]), arr[bad[0]])
    bad = np.flatnonzero(arr <= 0)
    if bad.size:
        raise NonPositiveValue(int(bad[0]), arr[bad[0]])
    values = np.sort(arr)
    has_ties = bool(np.any(np.diff(values) == 0))
    return Sample(values, has_ties)


def ecdf_eval(s: Sample, x):
    """Right-continuous empirical CDF, ``#{X_i <= x} / n``."""
    k = np.searchsorted(s.values, x, side="right")
    return k / s.n


def ecdf_left(s: Sample, x):
    """Left limit of the empirical CDF, ``#{X_i < x} / n``."""
    k = np.searchsorted(s.values, x, side="left")
    return k / s.n


def integrated_ecdf(s: Sample, r):
    """``int_0^r F_n(x) dx = (1/n) sum_i (r - X_i)_+`` via prefix sums."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise NegativeArgument("integrated_ecdf needs r >= 0")
    k = np.searchsorted(s.values, r_arr, side="right")
    out = (k * r_arr - s._cumsum[k]) / s.n
    return out if out.ndim else float(out)


moment_term = integrated_ecdf


def gram(tau, sigma):
    """``<(tau - .)_+, (sigma - .)_+>`` in L2[0, inf). Broadcasts."""
    tau = np.asarray(tau, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(tau <= 0) or np.any(sigma <= 0):
        raise NonPositiveKnot("gram needs positive knots")
    m = np.minimum(tau, sigma)
    out = tau * sigma * m - (tau + sigma) * m**2 / 2 + m**3 / 3
    return out if out.ndim else float(out)


def gram_matrix(knots) -> np.ndarray:
    t = np.asarray(knots, dtype=float)
    return gram(t[:, None], t[None, :])


def psi(tau, r):
    """CDF kernel: ``int_0^r (tau - x)_+ dx``."""
    tau = np.asarray(tau, dtype=float)
    r = np.asarray(r, dtype=float)
    rr = np.minimum(r, tau)
    return tau * rr - rr**2 / 2


def xi(tau, r):
    """Integrated CDF kernel: ``int_0^r psi(tau, y) dy``."""
    tau = np.asarray(tau, dtype=float)
    r = np.asarray(r, dtype=float)
    rr = np.minimum(r, tau)
    return tau * rr**2 / 2 - rr**3 / 6 + np.maximum(r - tau, 0.0) * tau**2 / 2


def merge_knots(knots, coefs, rtol=KNOT_MERGE_RTOL):
    """Sort generators and merge knots closer than ``rtol * (1 + tau)``.

    Merged coefficients are summed and placed at the first knot of the run.
    """
    knots = np.asarray(knots, dtype=float)
    coefs = np.asarray(coefs, dtype=float)
    if knots.size == 0:
        return knots.copy(), coefs.copy()
    order = np.argsort(knots, kind="stable")
    knots, coefs = knots[order], coefs[order]
    out_t, out_a = [knots[0]], [coefs[0]]
    for t, a in zip(knots[1:], coefs[1:]):
        if t - out_t[-1] <= rtol * (1 + out_t[-1]):
            out_a[-1] += a
        else:
            out_t.append(t)
            out_a.append(a)
    return np.array(out_t), np.array(out_a)


@dataclass(frozen=True)
class TriangularMix:
    """Cone element ``h(x) = sum_j a_j (tau_j - x)_+``.

    Knots are strictly increasing and positive, coefficients positive, which
    makes ``h`` convex, non-increasing and nonnegative by construction. Knots
    that coincide to within ``1e-12 * (1 + tau)`` are merged on construction.
    """

    knots: np.ndarray
    coefs: np.ndarray

    def __post_init__(self):
        knots, coefs = merge_knots(self.knots, self.coefs)
        if knots.size and knots[0] <= 0:
            raise NonPositiveKnot("knots must be positive")
        knots.setflags(write=False)
        coefs.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "coefs", coefs)

    @classmethod
    def empty(cls) -> "TriangularMix":
        return cls(np.empty(0), np.empty(0))

    @property
    def m(self) -> int:
        return self.knots.size

    @property
    def support_end(self) -> float:
        return float(self.knots[-1]) if self.m else 0.0

    def __call__(self, x):
        return mix_eval(self, x)

    def cdf(self, r):
        return mix_cdf(self, r)

    def integrated_cdf(self, r):
        return mix_integrated_cdf(self, r)

    @property
    def mass(self) -> float:
        return mass(self)

    def knot_values(self):
        """Knot-value view: points ``0 = t_0 < t_1 < ... < t_m`` and ``h(t_k)``.

        The origin is always prepended; ``h(t_m) == 0``.
        """
        pts = np.concatenate([[0.0], self.knots])
        return pts, np.asarray(mix_eval(self, pts), dtype=float)

    def slopes(self) -> np.ndarray:
        """Slopes of ``h`` on each segment ``[t_{k-1}, t_k]``."""
        pts, vals = self.knot_values()
        return np.diff(vals) / np.diff(pts)

    def scaled(self, factor: float) -> "TriangularMix":
        """The mix corresponding to data scaled by ``factor``."""
        return TriangularMix(self.knots * factor, self.coefs / factor**2)


def mix_eval(h: TriangularMix, x):
    x = np.asarray(x, dtype=float)
    diff = np.maximum(h.knots - x[..., None], 0.0)
    out = diff @ h.coefs
    return out if out.ndim else float(out)


def mix_density_slope(h: TriangularMix, x):
    """Right derivative of ``h`` at ``x``."""
    x = np.asarray(x, dtype=float)
    active = (h.knots > x[..., None]).astype(float)
    out = -(active @ h.coefs)
    return out if out.ndim else float(out)


def mix_cdf(h: TriangularMix, r):
    r = np.asarray(r, dtype=float)
    out = psi(h.knots, r[..., None]) @ h.coefs
    return out if out.ndim else float(out)


def mix_integrated_cdf(h: TriangularMix, r):
    r = np.asarray(r, dtype=float)
    out = xi(h.knots, r[..., None]) @ h.coefs
    return out if out.ndim else float(out)


def mass(h: TriangularMix) -> float:
    return float(np.sum(h.coefs * h.knots**2) / 2)

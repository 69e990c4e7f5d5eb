"""Extrema of ``estimate - model`` over [a, b] or the half line.

Two engines:

* step estimates (the empirical CDF) use exact order-statistic formulas:
  between jumps ``F_n - F`` is non-increasing, so the sup sits at jump
  points and the inf at left limits;
* continuous estimates are searched piece by piece. On a piece where the
  estimate's density is linear and the model density convex, the derivative
  of the difference is concave, so a vectorised golden-section search finds
  its peak and bisection brackets the (at most two) stationary points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import Sample

INV_PHI = (np.sqrt(5.0) - 1) / 2


@dataclass(frozen=True)
class Extrema:
    sup: float
    inf: float
    arg_sup: float
    arg_inf: float

    def __iter__(self):
        return iter((self.sup, self.inf, self.arg_sup, self.arg_inf))

    @property
    def norm(self) -> float:
        return max(self.sup, -self.inf)


def step_minus_model(s: Sample, model_cdf: Callable, a: float = 0.0, b: float = np.inf) -> Extrema:
    """Exact sup / inf of ``F_n - F`` over ``[a, b]`` for non-decreasing ``F``.

    With ``b = inf`` the tail limit ``1 - F(inf) = 0`` is included.
    """
    x = s.values
    n = s.n
    idx = np.arange(1, n + 1)
    inside = (x > a) & (x <= b)
    # value right at each jump (last tie index wins) and the left limit there
    hi = idx / n - model_cdf(x)
    lo = (idx - 1) / n - model_cdf(x)
    k_a = np.searchsorted(x, a, side="right")
    cand_sup = [(k_a / n - model_cdf(a), a)]
    cand_inf = [(k_a / n - model_cdf(a), a)]
    if np.isfinite(b):
        k_b = np.searchsorted(x, b, side="right")
        end = k_b / n - model_cdf(b)
        cand_sup.append((end, b))
        cand_inf.append((end, b))
        # left limit at b
        k_bl = np.searchsorted(x, b, side="left")
        cand_inf.append((k_bl / n - model_cdf(b), b))
    else:
        cand_sup.append((0.0, np.inf))
        cand_inf.append((0.0, np.inf))
    if inside.any():
        hi_in, lo_in, x_in = hi[inside], lo[inside], x[inside]
        j = int(np.argmax(hi_in))
        cand_sup.append((float(hi_in[j]), float(x_in[j])))
        j = int(np.argmin(lo_in))
        cand_inf.append((float(lo_in[j]), float(x_in[j])))
    sup = max(cand_sup, key=lambda c: c[0])
    inf = min(cand_inf, key=lambda c: c[0])
    return Extrema(float(sup[0]), float(inf[0]), float(sup[1]), float(inf[1]))


def golden_max(func: Callable, lo, hi, iters: int = 60):
    """Vectorised golden-section search for the max of unimodal ``func``."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    c = hi - INV_PHI * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    fc, fd = func(c), func(d)
    for _ in range(iters):
        left = fc >= fd
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        new_c = hi - INV_PHI * (hi - lo)
        new_d = lo + INV_PHI * (hi - lo)
        c, d = np.where(left, new_c, d), np.where(left, c, new_d)
        fc, fd = func(c), func(d)
    return (lo + hi) / 2


def bisect_roots(func: Callable, lo, hi, iters: int = 60):
    """Vectorised bisection; lanes without a sign change return NaN."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    flo, fhi = func(lo), func(hi)
    ok = (np.sign(flo) * np.sign(fhi) <= 0) & (hi > lo)
    for _ in range(iters):
        mid = (lo + hi) / 2
        fm = func(mid)
        go_left = np.sign(fm) * np.sign(flo) <= 0
        hi = np.where(go_left, mid, hi)
        lo = np.where(go_left, lo, mid)
        flo = np.where(go_left, flo, fm)
    return np.where(ok, (lo + hi) / 2, np.nan)


def continuous_minus_model(
    est_cdf: Callable,
    est_density: Callable,
    model_cdf: Callable,
    model_pdf: Callable,
    edges,
    tail_value: float | None = None,
) -> Extrema:
    """Sup / inf of ``est_cdf - model_cdf`` over ``[edges[0], edges[-1]]``.

    ``edges`` must contain every kink of either density. When
    ``tail_value`` is given, the estimate is taken constant (= tail_value)
    beyond ``edges[-1]`` and the tail contributes ``est(t_end) - F(t_end)``
    and the limit ``tail_value - 1``.
    """
    edges = np.unique(np.asarray(edges, dtype=float))
    lo, hi = edges[:-1], edges[1:]
    # evaluate densities just inside each piece so kinks don't leak across
    def deriv(x):
        xx = np.minimum(np.maximum(x, lo), hi)
        return est_density(xx) - model_pdf(xx)

    cands = [edges]
    if lo.size:
        inner_lo = lo + 1e-15 * (1 + np.abs(lo))
        inner_hi = hi - 1e-15 * (1 + np.abs(hi))
        inner_hi = np.where(inner_hi > inner_lo, inner_hi, hi)
        inner_lo = np.where(inner_hi > inner_lo, inner_lo, lo)
        peak = golden_max(deriv, inner_lo, inner_hi)
        # inner points stand in for one-sided limits at jumps
        cands.extend([inner_lo, inner_hi, peak])
        cands.append(bisect_roots(deriv, inner_lo, peak))
        cands.append(bisect_roots(deriv, peak, inner_hi))
    x = np.concatenate(cands)
    x = x[np.isfinite(x)]
    vals = est_cdf(x) - model_cdf(x)
    i_max, i_min = int(np.argmax(vals)), int(np.argmin(vals))
    sup, arg_sup = float(vals[i_max]), float(x[i_max])
    inf, arg_inf = float(vals[i_min]), float(x[i_min])
    if tail_value is not None:
        if tail_value - 1.0 < inf:
            inf, arg_inf = float(tail_value - 1.0), np.inf
        if tail_value - 1.0 > sup:
            sup, arg_sup = float(tail_value - 1.0), np.inf
    return Extrema(sup, inf, arg_sup, arg_inf)

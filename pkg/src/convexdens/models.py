"""Analytic true models: exponential, triangular and triangular mixtures.

All built-in families have a convex, non-increasing density on [0, inf), so
their CDFs are concave. Triangular mixtures have piecewise quadratic CDFs and
are inverted exactly piece by piece.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ModelSpecError


@dataclass(frozen=True)
class TrueModel:
    """A model given by mixture weights over triangular widths, or a rate.

    Use the :func:`exponential`, :func:`triangular` and
    :func:`triangular_mixture` constructors.
    """

    family: str
    rate: float = 1.0
    weights: tuple = ()
    widths: tuple = ()
    density_convex: bool = True
    density_nonincreasing: bool = True

    @property
    def spec(self) -> str:
        if self.family == "exp":
            return f"exp:{self.rate:g}"
        if self.family == "tri":
            return f"tri:{self.widths[0]:g}"
        return "mix:" + "+".join(
            f"{w:g}*tri:{t:g}" for w, t in zip(self.weights, self.widths)
        )

    @property
    def breakpoints(self) -> np.ndarray:
        """Points where ``f`` is not smooth (end of each triangle)."""
        if self.family == "exp":
            return np.empty(0)
        return np.unique(np.asarray(self.widths, dtype=float))

    @property
    def support_end(self) -> float:
        return np.inf if self.family == "exp" else float(max(self.widths))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "exp":
            out = np.where(x >= 0, self.rate * np.exp(-self.rate * np.maximum(x, 0)), 0.0)
        else:
            w = np.asarray(self.weights)
            t = np.asarray(self.widths)
            out = (2 * np.maximum(t - x[..., None], 0.0) / t**2) @ w
        return out if out.ndim else float(out)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "exp":
            out = -np.expm1(-self.rate * np.maximum(x, 0.0))
        else:
            w = np.asarray(self.weights)
            t = np.asarray(self.widths)
            u = np.clip(x[..., None] / t, 0.0, 1.0)
            out = (u * (2 - u)) @ w
        return out if out.ndim else float(out)

    def ppf(self, u):
        """Inverse CDF on (0, 1)."""
        u = np.asarray(u, dtype=float)
        if self.family == "exp":
            out = -np.log1p(-u) / self.rate
        elif self.family == "tri":
            out = self.widths[0] * (1 - np.sqrt(1 - u))
        else:
            out = self._mixture_ppf(u)
        return out if np.ndim(out) else float(out)

    def _mixture_ppf(self, u):
        # On each piece between consecutive widths the CDF is
        # c0 + c1 x - c2 x^2 with c2 >= 0; solve that quadratic.
        w = np.asarray(self.weights, dtype=float)
        t = np.asarray(self.widths, dtype=float)
        edges = np.concatenate([[0.0], np.unique(t)])
        u_flat = np.atleast_1d(u).ravel()
        edge_cdf = self.cdf(edges)
        piece = np.clip(np.searchsorted(edge_cdf, u_flat, side="right") - 1, 0, edges.size - 2)
        out = np.empty_like(u_flat)
        for k in np.unique(piece):
            sel = piece == k
            active = t > edges[k]
            c0 = np.sum(w[~active])
            c1 = np.sum(2 * w[active] / t[active])
            c2 = np.sum(w[active] / t[active] ** 2)
            rhs = u_flat[sel] - c0
            if c2 > 0:
                disc = np.maximum(c1**2 - 4 * c2 * rhs, 0.0)
                # stable root of c2 x^2 - c1 x + rhs = 0 (smaller one)
                out[sel] = 2 * rhs / (c1 + np.sqrt(disc))
            else:
                out[sel] = rhs / c1
            out[sel] = np.clip(out[sel], edges[k], edges[k + 1])
        return out.reshape(np.shape(u))


def exponential(rate: float = 1.0) -> TrueModel:
    if not rate > 0:
        raise ModelSpecError(f"exponential rate must be positive, got {rate}")
    return TrueModel("exp", rate=float(rate))


def triangular(width: float = 1.0) -> TrueModel:
    if not width > 0:
        raise ModelSpecError(f"triangular width must be positive, got {width}")
    return TrueModel("tri", weights=(1.0,), widths=(float(width),))


def triangular_mixture(weights, widths) -> TrueModel:
    weights = tuple(float(w) for w in weights)
    widths = tuple(float(t) for t in widths)
    if len(weights) != len(widths) or not weights:
        raise ModelSpecError("mixture needs matching non-empty weights and widths")
    if any(w <= 0 for w in weights) or any(t <= 0 for t in widths):
        raise ModelSpecError("mixture weights and widths must be positive")
    if abs(sum(weights) - 1) > 1e-12:
        raise ModelSpecError(f"mixture weights sum to {sum(weights)}, not 1")
    return TrueModel("mix", weights=weights, widths=widths)


_NUM = r"([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)"


def parse_model(spec: str) -> TrueModel:
    """Parse ``exp:RATE``, ``tri:WIDTH`` or ``mix:w1*tri:t1+w2*tri:t2``."""
    spec = spec.strip()
    m = re.fullmatch(r"exp:" + _NUM, spec)
    if m:
        return exponential(float(m.group(1)))
    m = re.fullmatch(r"tri:" + _NUM, spec)
    if m:
        return triangular(float(m.group(1)))
    if spec.startswith("mix:"):
        weights, widths = [], []
        for term in spec[4:].split("+"):
            m = re.fullmatch(_NUM + r"\*tri:" + _NUM, term.strip())
            if not m:
                raise ModelSpecError(f"bad mixture term {term!r} in {spec!r}")
            weights.append(float(m.group(1)))
            widths.append(float(m.group(2)))
        return triangular_mixture(weights, widths)
    raise ModelSpecError(f"unrecognized model spec {spec!r}")

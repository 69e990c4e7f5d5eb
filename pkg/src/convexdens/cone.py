"""Least squares and maximum likelihood convex densities by support reduction.

Both estimators live in the cone of convex integrable functions on
[0, inf), represented as mixtures of triangular generators
``(tau - x)_+``. Each outer step finds the generator with the most negative
directional derivative (the *residual*), adds it, re-solves the problem
restricted to the current support and prunes generators whose coefficient
hits zero. Once the residual is nonnegative up to ``tol_cert``, a Newton
polish on the joint (knot, coefficient) stationarity system moves every knot
onto the exact minimiser of the residual.

Residuals
---------
least squares:      g(tau) = int_0^tau F_hat - int_0^tau F_n
maximum likelihood: d(tau) = tau^2/2 - (1/n) sum_i (tau - X_i)_+ / h(X_i)

Both are nonnegative everywhere and vanish at the knots exactly at the
optimum.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from .core import (
    Sample,
    TriangularMix,
    ecdf_eval,
    gram,
    gram_matrix,
    integrated_ecdf,
    mix_eval,
    mix_integrated_cdf,
    moment_term,
    psi,
)
from .errors import InitialSupportInfeasible, MaxIterExceeded, SingularGram, ZeroDensityAtObservation

log = logging.getLogger(__name__)

GRAM_COND_MAX = 1e12
TIE_TOL = 1e-14
INSERT_RTOL = 1e-10
PRUNE_TOL = 1e-12
POLISH_EVERY = 10
MLE_RIDGE = 1e-9


@dataclass(frozen=True)
class FitConfig:
    """Solver settings; ``None`` fields are resolved against the sample.

    ``tol_cert`` defaults to ``1e-10 * (1 + X_(n))`` and ``tau_cap`` (upper
    end of the candidate-knot search) to ``4 * X_(n)``. Hitting ``max_iter``
    records a warning and returns the best iterate; with ``strict=True`` it
    raises :class:`MaxIterExceeded` carrying that iterate instead.
    """

    tol_cert: float | None = None
    max_iter: int = 500
    tau_cap: float | None = None
    polish: bool = True
    strict: bool = False

    def resolve(self, s: Sample) -> "FitConfig":
        tol = self.tol_cert if self.tol_cert is not None else 1e-10 * (1 + s.max)
        cap = self.tau_cap if self.tau_cap is not None else 4 * s.max
        if not tol > 0:
            raise ValueError("tol_cert must be positive")
        if not cap > s.max:
            raise ValueError("tau_cap must exceed the largest observation")
        return replace(self, tol_cert=float(tol), tau_cap=float(cap))


@dataclass
class FitResult:
    estimator: str
    mix: TriangularMix
    iterations: int
    final_residual: float
    objective: float
    tol: float
    tau_cap: float
    warnings: list = field(default_factory=list)
    history: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.final_residual >= -self.tol


# ---------------------------------------------------------------------------
# least squares


def lse_objective(h: TriangularMix, s: Sample) -> float:
    """``int h^2 - 2 int h dF_n``."""
    if h.m == 0:
        return 0.0
    a = h.coefs
    return float(a @ gram_matrix(h.knots) @ a - 2 * a @ moment_term(s, h.knots))


def lse_residual(h: TriangularMix, s: Sample, tau):
    return mix_integrated_cdf(h, tau) - integrated_ecdf(s, tau)


def _pick(cands, vals):
    """Smallest candidate among those within TIE_TOL of the minimum."""
    best = vals.min()
    ok = vals <= best + TIE_TOL
    j = np.flatnonzero(ok)[np.argmin(cands[ok])]
    return float(cands[j]), float(vals[j])


def lse_best_knot(h: TriangularMix, s: Sample, cap: float):
    """Global minimiser of the LSE residual over ``(0, cap]``.

    Between consecutive points of {observations, knots, cap} the residual is
    a cubic whose derivative ``F_hat - F_n`` is a concave quadratic, so the
    minimum is at an endpoint or a root of that quadratic.
    """
    pts = np.concatenate([s.distinct, h.knots, [cap]])
    pts = np.unique(pts[(pts > 0) & (pts <= cap)])
    lo = np.concatenate([[0.0], pts[:-1]])
    hi = pts
    t, a = h.knots, h.coefs
    # generators active on (lo, hi): knot >= hi
    k_hi = np.searchsorted(t, hi, side="left")
    rev_a = np.concatenate([np.cumsum(a[::-1])[::-1], [0.0]])
    rev_at = np.concatenate([np.cumsum((a * t)[::-1])[::-1], [0.0]])
    A = rev_a[k_hi]
    B = rev_at[k_hi]
    k_lo = np.searchsorted(t, lo, side="right")
    C = np.concatenate([[0.0], np.cumsum(a * t**2 / 2)])[k_lo]
    e = ecdf_eval(s, lo)
    # -(A/2) x^2 + B x + (C - e) = 0
    cands = [hi]
    with np.errstate(invalid="ignore", divide="ignore"):
        disc = B**2 + 2 * A * (C - e)
        sq = np.sqrt(np.where(disc >= 0, disc, np.nan))
        for root in ((B - sq) / A, (B + sq) / A):
            ok = (A > 0) & np.isfinite(root) & (root > lo) & (root < hi)
            cands.append(root[ok])
        lin = (A == 0) & (B != 0)
        root = (e - C) / B
        ok = lin & (root > lo) & (root < hi)
        cands.append(root[ok])
    cands = np.concatenate(cands)
    vals = np.asarray(lse_residual(h, s, cands), dtype=float)
    return _pick(cands, vals)


def _spd_solve(M, rhs):
    """Solve an SPD system after Jacobi scaling; condition is checked scaled."""
    d = np.sqrt(np.diag(M))
    if not np.all(d > 0):
        raise SingularGram("zero diagonal in restricted system")
    Ms = M / d[:, None] / d[None, :]
    if np.linalg.cond(Ms) > GRAM_COND_MAX:
        raise SingularGram("ill-conditioned restricted system")
    try:
        return linalg.cho_solve(linalg.cho_factor(Ms), rhs / d) / d
    except linalg.LinAlgError as exc:
        raise SingularGram(str(exc)) from exc


def _merge_closest(knots, coefs):
    i = int(np.argmin(np.diff(knots)))
    w = coefs[i] + coefs[i + 1]
    pos = (coefs[i] * knots[i] + coefs[i + 1] * knots[i + 1]) / w if w > 0 else knots[i]
    knots = np.delete(knots, i + 1)
    coefs = np.delete(coefs, i + 1)
    knots[i], coefs[i] = pos, w
    return knots, coefs


def _lse_restricted(knots, a, s: Sample):
    """Minimise the LSE objective over ``a >= 0`` on fixed ``knots``.

    ``a`` is a feasible (nonnegative) start. Normal equations ``G b = c`` on
    the support; when ``b`` has nonpositive entries, move from ``a`` towards
    ``b`` up to the first zero crossing and drop that generator.
    """
    knots = np.array(knots, dtype=float)
    a = np.array(a, dtype=float)
    while knots.size:
        G = gram_matrix(knots)
        c = moment_term(s, knots)
        try:
            b = _spd_solve(G, c)
        except SingularGram:
            if knots.size < 2:
                raise
            knots, a = _merge_closest(knots, a)
            continue
        if np.all(b > 0):
            return knots, b
        neg = b <= 0
        step = a[neg] / (a[neg] - b[neg])
        t = float(np.min(step))
        a = a + t * (b - a)
        drop = neg & (a <= PRUNE_TOL * max(1.0, np.max(np.abs(a))))
        drop[np.flatnonzero(neg)[np.argmin(step)]] = True
        knots, a = knots[~drop], np.maximum(a[~drop], 0.0)
    return knots, a


def _lse_polish_system(knots, a, s: Sample):
    G = gram_matrix(knots)
    P = psi(knots[:, None], knots[None, :])  # P[j, l] = psi(tau_j, tau_l)
    M = np.minimum(knots[:, None], knots[None, :])
    h_at = np.maximum(knots[None, :] - knots[:, None], 0.0) @ a
    r1 = G @ a - moment_term(s, knots)
    r2 = P.T @ a - ecdf_eval(s, knots)
    J = np.block(
        [
            [G, P * a[None, :] + np.diag(r2)],
            [P.T, M * a[None, :] + np.diag(h_at)],
        ]
    )
    return np.concatenate([r1, r2]), J


# ---------------------------------------------------------------------------
# maximum likelihood


def _density_at_obs(h: TriangularMix, s: Sample) -> np.ndarray:
    hx = np.asarray(mix_eval(h, s.values), dtype=float)
    bad = np.flatnonzero(hx <= 0)
    if bad.size:
        raise ZeroDensityAtObservation(int(bad[0]))
    return hx


def mle_objective(h: TriangularMix, s: Sample) -> float:
    """Negative log likelihood plus mass: ``mass(h) - mean(log h(X_i))``."""
    hx = _density_at_obs(h, s)
    return float(h.mass - np.mean(np.log(hx)))


def _mle_residual_from_hx(hx, s: Sample, tau):
    tau = np.asarray(tau, dtype=float)
    v = np.maximum(tau[..., None] - s.values, 0.0)
    out = tau**2 / 2 - (v @ (1 / hx)) / s.n
    return out if out.ndim else float(out)


def mle_residual(h: TriangularMix, s: Sample, tau):
    return _mle_residual_from_hx(_density_at_obs(h, s), s, tau)


def mle_best_knot(h: TriangularMix, s: Sample, cap: float):
    """Exact minimiser of the MLE residual over ``(0, cap]``.

    Between consecutive distinct observations the residual is the convex
    quadratic ``tau^2/2 - A tau + B``; its minimiser ``A`` is clipped to the
    interval. On ``(0, X_(1)]`` the residual is ``tau^2/2 > 0``.
    """
    hx = _density_at_obs(h, s)
    xs, inv = np.unique(s.values, return_inverse=True)
    w = np.bincount(inv, weights=1 / hx) / s.n
    wx = np.bincount(inv, weights=s.values / hx) / s.n
    A = np.cumsum(w)
    B = np.cumsum(wx)
    lo = xs
    hi = np.concatenate([xs[1:], [cap]])
    keep = hi > lo
    lo, hi, A, B = lo[keep], hi[keep], A[keep], B[keep]
    tau = np.clip(A, lo, hi)
    vals = tau**2 / 2 - A * tau + B
    cands = np.concatenate([tau, [xs[0]]])
    vals = np.concatenate([vals, [xs[0] ** 2 / 2]])
    return _pick(cands, vals)


def _mle_newton(knots, a, s: Sample, max_steps: int = 100):
    """Damped Newton for the MLE restricted to ``knots`` with ``a >= 0``.

    Steps are shortened to the first coefficient reaching zero (that
    generator is then dropped) and halved until the objective decreases with
    every ``h(X_i) > 0``.
    """
    x = s.values
    n = s.n
    knots = np.array(knots, dtype=float)
    a = np.array(a, dtype=float)
    # generators ending before X_(1) only add mass
    live = knots > x[0]
    knots, a = knots[live], a[live]
    V = np.maximum(knots[None, :] - x[:, None], 0.0)
    hx = V @ a
    if knots.size == 0 or np.any(hx <= 0):
        return knots, a
    obj = knots**2 / 2 @ a - np.mean(np.log(hx))
    for _ in range(max_steps):
        grad = knots**2 / 2 - V.T @ (1 / hx) / n
        W = V / hx[:, None]
        H = W.T @ W / n
        try:
            delta = _spd_solve(H, -grad)
        except SingularGram:
            # more generators than distinct observations: along the null
            # space the objective is linear, so a lightly regularised step
            # runs until a coefficient hits zero and is pruned below
            try:
                delta = _spd_solve(H + MLE_RIDGE * np.diag(np.diag(H)), -grad)
            except SingularGram:
                knots, a = _merge_closest(knots, a)
                V = np.maximum(knots[None, :] - x[:, None], 0.0)
                hx = V @ a
                obj = knots**2 / 2 @ a - np.mean(np.log(hx))
                continue
        dec = -grad @ delta
        if dec < 1e-26 * (1 + abs(obj)):
            break
        neg = delta < 0
        t_max, block = 1.0, None
        if neg.any():
            steps = a[neg] / -delta[neg]
            j = int(np.argmin(steps))
            if steps[j] < 1.0:
                t_max, block = float(steps[j]), int(np.flatnonzero(neg)[j])
        t = t_max
        while True:
            a_new = a + t * delta
            if block is not None and t == t_max:
                a_new[block] = 0.0
            a_new = np.maximum(a_new, 0.0)
            h_new = V @ a_new
            if np.all(h_new > 0):
                obj_new = knots**2 / 2 @ a_new - np.mean(np.log(h_new))
                if obj_new <= obj - 1e-4 * t * dec or t < 1e-12:
                    break
            t /= 2
            if t < 1e-14:
                break
        if not np.all(h_new > 0) or obj_new > obj:
            break
        progress = obj - obj_new
        a, hx, obj = a_new, h_new, obj_new
        drop = a <= PRUNE_TOL * max(1.0, a.max())
        # prune only while every observation keeps positive density
        if drop.any() and np.all(V[:, ~drop] @ a[~drop] > 0):
            keep = ~drop
            knots, a, V = knots[keep], a[keep], V[:, keep]
            hx = V @ a
        elif progress <= 1e-16 * (1 + abs(obj)) and t < t_max:
            break
    return knots, a


def _mle_line_search(hx, v, tau):
    """Exact minimiser ``s > 0`` of ``s tau^2/2 - mean log(hx + s v)``."""
    target = tau**2 / 2
    sgn = v > 0
    hv, vv = hx[sgn], v[sgn]
    n = hx.size
    step = 0.0
    for _ in range(100):
        q = vv / (hv + step * vv)
        d1 = target - q.sum() / n
        if d1 >= -1e-15 * target:
            break
        d2 = (q**2).sum() / n
        new = step - d1 / d2
        if new <= step:
            break
        step = new
    return step


def _mle_polish_system(knots, a, s: Sample):
    x = s.values
    n = s.n
    V = np.maximum(knots[None, :] - x[:, None], 0.0)
    Ind = (x[:, None] < knots[None, :]).astype(float)
    hx = V @ a
    w = 1 / (n * hx**2)
    d = knots**2 / 2 - V.T @ (1 / hx) / n
    dp = knots - Ind.T @ (1 / hx) / n
    VW = V.T * w
    IW = Ind.T * w
    J = np.block(
        [
            [VW @ V, (VW @ Ind) * a[None, :] + np.diag(dp)],
            [IW @ V, (IW @ Ind) * a[None, :] + np.eye(knots.size)],
        ]
    )
    return np.concatenate([d, dp]), J


# ---------------------------------------------------------------------------
# shared driver


def _gap_merge(knots, a, s: Sample):
    """Keep at most one knot per gap between distinct observations."""
    gap = np.searchsorted(s.distinct, knots, side="left")
    if np.all(np.diff(gap) > 0):
        return knots, a
    out_t, out_a = [], []
    for g in np.unique(gap):
        sel = gap == g
        w = a[sel].sum()
        out_t.append(float(a[sel] @ knots[sel] / w))
        out_a.append(w)
    return np.array(out_t), np.array(out_a)


def _newton_polish(problem: "_Problem", knots, a, max_steps: int = 50):
    """Newton on the joint stationarity system in (a, tau).

    The step is solved in relative variables (da / a, dtau / tau) with rows
    equilibrated, since coefficients can span many orders of magnitude.
    Steps keep knots ordered and positive and must shrink the scaled
    residual. A step that would push a coefficient to zero drops that
    generator instead and re-solves the coefficients on the smaller support.
    """
    s = problem.s
    system = problem.polish_system
    scale = 1e-15 * (1 + s.max) ** 2

    def scaled(r, J, knots, a):
        D = np.concatenate([a, knots])
        JD = J * D[None, :]
        R = np.abs(JD).max(axis=1)
        R[R == 0] = 1.0
        return JD / R[:, None], R, D

    try:
        r, J = system(knots, a, s)
    except ZeroDensityAtObservation:
        return knots, a
    Js, R, D = scaled(r, J, knots, a)
    norm = np.max(np.abs(r / R))
    for _ in range(max_steps):
        if np.max(np.abs(r)) <= scale:
            break
        m = knots.size
        try:
            step = np.linalg.solve(Js, -r / R) * D
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        da, dt = step[:m], step[m:]
        shrink = da < 0
        ratio = np.full(m, np.inf)
        ratio[shrink] = a[shrink] / -da[shrink]
        if m > 1 and ratio.min() <= 1.0:
            j = int(np.argmin(ratio))
            knots, a = problem.restricted(np.delete(knots, j), np.delete(a, j))
            try:
                r, J = system(knots, a, s)
            except ZeroDensityAtObservation:
                break
            Js, R, D = scaled(r, J, knots, a)
            norm = np.max(np.abs(r / R))
            continue
        t = 1.0
        accepted = False
        while t > 1e-6:
            a_new = a + t * da
            k_new = knots + t * dt
            if np.all(a_new > 0) and k_new[0] > 0 and np.all(np.diff(k_new) > 0):
                try:
                    r_new, J_new = system(k_new, a_new, s)
                except ZeroDensityAtObservation:
                    r_new = None
                if r_new is not None and np.max(np.abs(r_new / R)) < norm:
                    accepted = True
                    break
            t /= 2
        if not accepted:
            break
        knots, a, r, J = k_new, a_new, r_new, J_new
        Js, R, D = scaled(r, J, knots, a)
        norm = np.max(np.abs(r / R))
    return knots, a


class _Problem:
    """Estimator-specific pieces plugged into the support reduction loop."""

    name: str

    def __init__(self, s: Sample):
        self.s = s


class _LSE(_Problem):
    name = "ls"

    def initial(self):
        tau = 3 * float(np.mean(self.s.values))
        a = moment_term(self.s, tau) / gram(tau, tau)
        return np.array([tau]), np.array([a])

    def objective(self, h):
        return lse_objective(h, self.s)

    def best_knot(self, h, cap):
        return lse_best_knot(h, self.s, cap)

    def insert(self, knots, a, tau, value):
        step = -value / gram(tau, tau)
        knots = np.append(knots, tau)
        a = np.append(a, step)
        order = np.argsort(knots)
        return knots[order], a[order]

    def restricted(self, knots, a):
        return _lse_restricted(knots, a, self.s)

    def polish_system(self, knots, a, s):
        return _lse_polish_system(knots, a, s)


class _MLE(_Problem):
    name = "ml"

    def initial(self):
        tau = self.s.max + float(np.mean(self.s.values))
        if not tau > self.s.max:
            raise InitialSupportInfeasible("initial knot must exceed X_(n)")
        return np.array([tau]), np.array([2 / tau**2])

    def objective(self, h):
        return mle_objective(h, self.s)

    def best_knot(self, h, cap):
        return mle_best_knot(h, self.s, cap)

    def insert(self, knots, a, tau, value):
        V = np.maximum(knots[None, :] - self.s.values[:, None], 0.0)
        hx = V @ a
        step = _mle_line_search(hx, np.maximum(tau - self.s.values, 0.0), tau)
        knots = np.append(knots, tau)
        a = np.append(a, step)
        order = np.argsort(knots)
        return knots[order], a[order]

    def restricted(self, knots, a):
        return _mle_newton(knots, a, self.s)

    def polish_system(self, knots, a, s):
        return _mle_polish_system(knots, a, s)


def _mix(knots, a):
    keep = a > 0
    return TriangularMix(knots[keep], a[keep])


def _try_polish(problem: _Problem, h: TriangularMix, cap: float):
    """Gap-merge plus Newton polish; returns ``(mix, objective)`` or None."""
    s = problem.s
    k2, a2 = _gap_merge(h.knots, h.coefs, s)
    if k2.size != h.m:
        k2, a2 = problem.restricted(k2, a2)
    k3, a3 = _newton_polish(problem, k2, a2)
    k3, a3 = problem.restricted(k3, a3)
    for knots, a in ((k3, a3), (k2, a2)):
        try:
            cand = _mix(knots, a)
            return cand, problem.objective(cand)
        except ZeroDensityAtObservation:
            continue
    return None


def _support_reduction(problem: _Problem, cfg: FitConfig) -> FitResult:
    tol = cfg.tol_cert
    cap = cfg.tau_cap
    warnings = []

    def warn(msg):
        warnings.append(msg)
        log.warning(msg)

    knots, a = problem.initial()
    knots, a = problem.restricted(knots, a)
    h = _mix(knots, a)
    history = [problem.objective(h)]
    polished = False
    stalled = False
    since_polish = 0
    it = 0
    while True:
        tau, value = problem.best_knot(h, cap)
        if value >= -tol and h.support_end >= 0.99 * cap:
            cap *= 2
            warn(f"tau_cap extended to {cap:.6g}")
            continue
        want_polish = value >= -tol or stalled or since_polish >= POLISH_EVERY
        if cfg.polish and want_polish and not polished:
            polished = True
            since_polish = 0
            got = _try_polish(problem, h, cap)
            if got is not None and got[1] <= history[-1] + 1e-13 * (1 + abs(history[-1])):
                h = got[0]
                if got[1] < history[-1]:
                    history.append(got[1])
                stalled = False
                continue
        if value >= -tol:
            break
        if stalled and (polished or not cfg.polish):
            warn(f"stalled near knot {tau:.6g} with residual {value:.3e}")
            break
        if it >= cfg.max_iter:
            warn(f"max_iter={cfg.max_iter} reached with residual {value:.3e}")
            break
        it += 1
        knots, a = h.knots.copy(), h.coefs.copy()
        if not np.any(np.abs(knots - tau) <= INSERT_RTOL * (1 + tau)):
            knots, a = problem.insert(knots, a, tau, value)
        knots, a = problem.restricted(knots, a)
        cand = _mix(knots, a)
        obj = problem.objective(cand)
        if obj < history[-1]:
            h = cand
            history.append(obj)
            polished = stalled = False
            since_polish += 1
        else:
            # no progress at float precision, or an ill-conditioned support
            stalled = True
    final = problem.best_knot(h, cap)[1]
    result = FitResult(
        estimator=problem.name,
        mix=h,
        iterations=it,
        final_residual=final,
        objective=problem.objective(h),
        tol=tol,
        tau_cap=cap,
        warnings=warnings,
        history=history,
    )
    if cfg.strict and it >= cfg.max_iter and final < -tol:
        raise MaxIterExceeded(f"max_iter={cfg.max_iter} reached", result=result)
    return result


def lse_fit(s: Sample, cfg: FitConfig | None = None) -> FitResult:
    """Least squares convex density."""
    cfg = (cfg or FitConfig()).resolve(s)
    return _support_reduction(_LSE(s), cfg)


def mle_fit(s: Sample, cfg: FitConfig | None = None) -> FitResult:
    """Maximum likelihood convex density."""
    cfg = (cfg or FitConfig()).resolve(s)
    return _support_reduction(_MLE(s), cfg)


def fit(estimator: str, s: Sample, cfg: FitConfig | None = None) -> FitResult:
    if estimator == "ls":
        return lse_fit(s, cfg)
    if estimator == "ml":
        return mle_fit(s, cfg)
    raise ValueError(f"unknown estimator {estimator!r}")

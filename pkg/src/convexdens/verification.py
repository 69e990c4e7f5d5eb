"""Pathwise checks of the characterisations and sup-norm inequalities.

Checkers never raise on a failed inequality; they return a
:class:`VerificationReport` whose entries carry a signed margin (``>= 0``
means the inequality holds exactly) and pass iff ``margin >= -tol``.
Only malformed input raises.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cone import FitResult, lse_best_knot, lse_residual, mle_best_knot, mle_residual
from .core import (
    Sample,
    TriangularMix,
    ecdf_eval,
    integrated_ecdf,
    mix_cdf,
    mix_eval,
    mix_integrated_cdf,
)
from .errors import HypothesisViolated, NonConvexModel, ParameterOutOfRange
from .extrema import Extrema, continuous_minus_model, step_minus_model
from .grenander import StepDensity, lcm_minus_model
from .models import TrueModel

CHARACTERIZATION_TOL = 1e-8
THEOREM_TOL = 1e-8
LEMMA_EQ_TOL = 1e-10
LEMMA_LINEAR_TOL = 1e-10
LEMMA_CONVEX_TOL = 1e-8


@dataclass(frozen=True)
class Check:
    name: str
    margin: float
    tol: float
    location: float = float("nan")
    note: str = ""
    informational: bool = False

    @property
    def passed(self) -> bool:
        return bool(self.margin >= -self.tol)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "margin": self.margin,
            "tol": self.tol,
            "location": self.location,
            "passed": self.passed,
            "note": self.note,
            "informational": self.informational,
        }


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def add(self, name, margin, tol, location=float("nan"), note="", informational=False):
        self.checks.append(Check(name, float(margin), float(tol), float(location), note, informational))

    def extend(self, other: "VerificationReport", prefix: str = ""):
        for c in other.checks:
            self.checks.append(Check(prefix + c.name, c.margin, c.tol, c.location, c.note, c.informational))
        self.extra.update({prefix + k: v for k, v in other.extra.items()})
        return self

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if not c.informational)

    def __getitem__(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self):
        return [c for c in self.checks if not c.passed and not c.informational]

    def lines(self):
        for c in self.checks:
            flag = "PASS" if c.passed else ("INFO" if c.informational else "FAIL")
            yield f"{flag} {c.name} margin={c.margin:.3e} tol={c.tol:.1e}" + (f" ({c.note})" if c.note else "")

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


def _as_mix(fit) -> TriangularMix:
    return fit.mix if isinstance(fit, FitResult) else fit


# ---------------------------------------------------------------------------
# knot structure and characterisations


def check_prop1(fit, s: Sample, tol_loc: float | None = None) -> VerificationReport:
    """Knot placement relative to the distinct order statistics.

    * at most one knot in each gap ``(X_(i), X_(i+1))`` and none in
      ``(0, X_(1))``;
    * no knot within ``tol_loc`` of an observation;
    * exactly one knot beyond ``X_(n)``.
    """
    h = _as_mix(fit)
    xs = s.distinct
    if tol_loc is None:
        tol_loc = 1e-7 * (1 + s.max)
    rep = VerificationReport()
    t = h.knots
    gap = np.searchsorted(xs, t, side="left")
    inner = gap[(gap > 0) & (gap < xs.size)]
    counts = np.bincount(inner, minlength=xs.size) if inner.size else np.zeros(1, int)
    worst = int(counts.max()) if counts.size else 0
    below = int(np.sum(gap == 0))
    rep.add("one_knot_per_gap", min(1 - worst, -below), 0.0, note=f"max per gap {worst}, below X_(1) {below}")
    if t.size:
        j = np.clip(np.searchsorted(xs, t), 1, xs.size - 1) if xs.size > 1 else np.zeros(t.size, int)
        dist = np.minimum(np.abs(t - xs[j]), np.abs(t - xs[np.maximum(j - 1, 0)]))
        k = int(np.argmin(dist))
        rep.add("no_knot_at_observation", dist[k] - tol_loc, 0.0, location=t[k])
    else:
        rep.add("no_knot_at_observation", 0.0, 0.0)
    beyond = int(np.sum(t > xs[-1]))
    rep.add("one_knot_beyond_max", -abs(beyond - 1), 0.0, note=f"{beyond} knots beyond X_(n)")
    return rep


def _cap(h: TriangularMix, s: Sample) -> float:
    return max(4 * s.max, 2 * h.support_end)


def _knot_and_mass_checks(rep, h, s, tol, residual):
    t = h.knots
    if t.size:
        at_knots = np.abs(np.asarray(residual(t), dtype=float))
        k = int(np.argmax(at_knots))
        rep.add("residual_zero_at_knots", -at_knots[k], tol, location=t[k])
    pts = np.concatenate([[0.0], t])
    eq8 = np.abs(np.asarray(mix_cdf(h, pts)) - ecdf_eval(s, pts))
    k = int(np.argmax(eq8))
    rep.add("cdf_equals_ecdf_at_knots", -eq8[k], tol, location=pts[k])


def check_lse_characterization(fit, s: Sample, tol: float = CHARACTERIZATION_TOL) -> VerificationReport:
    """Optimality conditions of the least squares fit.

    (i) the residual ``int_0^tau (F_hat - F_n)`` is >= 0 everywhere,
    (ii) it vanishes at knots, (iii) ``F_hat = F_n`` at ``0`` and every
    knot, (iv) unit mass.
    """
    h = _as_mix(fit)
    rep = VerificationReport()
    tau, value = lse_best_knot(h, s, _cap(h, s))
    rep.add("certificate_min_residual", value, tol, location=tau)
    _knot_and_mass_checks(rep, h, s, tol, lambda t: lse_residual(h, s, t))
    rep.add("unit_mass", -abs(h.mass - 1), tol)
    return rep


def check_mle_characterization(fit, s: Sample, tol: float = CHARACTERIZATION_TOL, grid: int = 64) -> VerificationReport:
    """Optimality conditions of the maximum likelihood fit.

    Adds to the LSE-style checks the interval inequality
    ``int_{t_k}^r F_n <= int_{t_k}^r F_hat`` for ``r`` in each knot interval.
    Raises ZeroDensityAtObservation if the fit vanishes at a data point.
    """
    h = _as_mix(fit)
    rep = VerificationReport()
    tau, value = mle_best_knot(h, s, _cap(h, s))
    rep.add("certificate_min_residual", value, tol, location=tau)
    _knot_and_mass_checks(rep, h, s, tol, lambda t: mle_residual(h, s, t))
    pts = np.concatenate([[0.0], h.knots])
    worst, where = np.inf, float("nan")
    u = np.linspace(0.0, 1.0, grid + 1)[1:]
    for lo, hi in zip(pts[:-1], pts[1:]):
        r = lo + (hi - lo) * u
        slack = (mix_integrated_cdf(h, r) - mix_integrated_cdf(h, lo)) - (
            integrated_ecdf(s, r) - integrated_ecdf(s, lo)
        )
        j = int(np.argmin(slack))
        if slack[j] < worst:
            worst, where = float(slack[j]), float(r[j])
    rep.add("interval_integral_inequality", worst, tol, location=where)
    rep.add("unit_mass", -abs(h.mass - 1), tol)
    return rep


# ---------------------------------------------------------------------------
# extrema and global bounds


def sup_inf_difference(estimate, model: TrueModel) -> Extrema:
    """Sup / inf over [0, inf) of ``estimate CDF - model CDF``.

    ``estimate`` is a :class:`Sample` (empirical CDF, exact order-statistic
    formulas), a :class:`StepDensity` (Grenander LCM), a
    :class:`TriangularMix` or :class:`FitResult` (piecewise quadratic CDF),
    or the model itself.
    """
    if isinstance(estimate, Sample):
        return step_minus_model(estimate, model.cdf)
    if isinstance(estimate, StepDensity):
        return lcm_minus_model(estimate, model)
    if isinstance(estimate, TrueModel):
        if estimate == model:
            return Extrema(0.0, 0.0, 0.0, 0.0)
        raise TypeError("only the model itself is accepted as an analytic estimate")
    h = _as_mix(estimate)
    end = h.support_end
    edges = np.concatenate([[0.0], h.knots, model.breakpoints[model.breakpoints < end]])
    return continuous_minus_model(
        lambda x: mix_cdf(h, x),
        lambda x: mix_eval(h, x),
        model.cdf,
        model.pdf,
        edges,
        tail_value=h.mass,
    )


def _bound_checks(rep, emp: Extrema, ml: Extrema | None, ls: Extrema | None, tol):
    lower = 1.5 * emp.inf - 0.5 * emp.sup
    upper = 1.5 * emp.sup - 0.5 * emp.inf
    if ml is not None:
        rep.add("mle_inf_bound", ml.inf - lower, tol, location=ml.arg_inf)
    if ls is not None:
        rep.add("lse_inf_bound", ls.inf - lower, tol, location=ls.arg_inf)
        rep.add("lse_sup_bound", upper - ls.sup, tol, location=ls.arg_sup)
        rep.add("lse_norm_bound", 2 * emp.norm - ls.norm, tol)


def theorem1_margins(fit_ml, fit_ls, s: Sample, model: TrueModel, tol: float = THEOREM_TOL) -> VerificationReport:
    """Margins of the one- and two-sided sup-norm bounds for both fits.

    Either fit may be ``None`` to skip its checks.
    """
    if not model.density_convex:
        raise NonConvexModel(f"{model.spec} does not have a convex density")
    emp = sup_inf_difference(s, model)
    ml = sup_inf_difference(fit_ml, model) if fit_ml is not None else None
    ls = sup_inf_difference(fit_ls, model) if fit_ls is not None else None
    rep = VerificationReport()
    _bound_checks(rep, emp, ml, ls, tol)
    rep.extra.update(emp=emp, ml=ml, ls=ls)
    return rep


# ---------------------------------------------------------------------------
# the interval lemma


@dataclass
class Lemma1Scenario:
    """Three functions on ``[a, b]`` plus what the hypotheses need.

    ``int_est`` and ``int_emp`` are antiderivatives of ``est_cdf`` and
    ``emp``. ``emp_extrema()`` returns sup / inf of ``emp - model_cdf`` on
    ``[a, b]``. ``breakpoints`` lists interior points where any of the
    functions is not smooth. ``convex_domain`` restricts the convexity check
    of the model density.
    """

    a: float
    b: float
    model_cdf: Callable
    model_pdf: Callable
    est_cdf: Callable
    est_density: Callable
    emp: Callable
    int_est: Callable
    int_emp: Callable
    emp_extrema: Callable
    breakpoints: np.ndarray = field(default_factory=lambda: np.empty(0))
    convex_domain: tuple | None = None


def _second_differences(func, lo, hi, points=257):
    x = np.linspace(lo, hi, points)
    y = np.asarray(func(x), dtype=float)
    return x[1:-1], y[2:] - 2 * y[1:-1] + y[:-2], np.max(np.abs(y))


def lemma1_conclusion_check(
    sc: Lemma1Scenario, direction: str = "sup", grid: int = 256, strict: bool = False
) -> VerificationReport:
    """Check the hypotheses and the conclusion of the interval lemma.

    ``direction="sup"`` uses the right-anchored integral condition and the
    bound ``sup(F_hat - F) <= 1.5 sup(F_n - F) - 0.5 (F_n - F)(b)``;
    ``"inf"`` the left-anchored one and
    ``inf(F_hat - F) >= 1.5 inf(F_n - F) - 0.5 (F_n - F)(a)``.
    A failed hypothesis marks the conclusion as unsupported; with
    ``strict=True`` it raises :class:`HypothesisViolated` (carrying the
    full report) after the conclusion has been evaluated.
    """
    if direction not in ("sup", "inf"):
        raise ValueError("direction must be 'sup' or 'inf'")
    a, b = sc.a, sc.b
    rep = VerificationReport()
    ends = np.array([a, b])
    gap = np.abs(np.asarray(sc.est_cdf(ends)) - np.asarray(sc.emp(ends)))
    rep.add("endpoint_match", -gap.max(), LEMMA_EQ_TOL, location=ends[int(np.argmax(gap))])
    eps = 1e-12 * (b - a)
    x, d2, scale = _second_differences(sc.est_density, a + eps, b - eps)
    rep.add("linear_estimate_density", -np.max(np.abs(d2)), LEMMA_LINEAR_TOL * (1 + scale), location=x[int(np.argmax(np.abs(d2)))])
    lo, hi = sc.convex_domain or (a, b)
    x, d2, _ = _second_differences(sc.model_pdf, lo + eps, hi - eps)
    rep.add("convex_model_density", d2.min(), LEMMA_CONVEX_TOL, location=x[int(np.argmin(d2))])
    if sc.convex_domain is not None:
        x, d2, _ = _second_differences(sc.model_pdf, a + eps, b - eps)
        rep.add(
            "convex_model_density_full_interval",
            d2.min(),
            LEMMA_CONVEX_TOL,
            location=x[int(np.argmin(d2))],
            note="informational: literal check over the whole interval",
            informational=True,
        )
    r = np.linspace(a, b, grid)
    tol_int = LEMMA_EQ_TOL * (1 + abs(b))
    if direction == "sup":
        slack = (sc.int_emp(b) - sc.int_emp(r)) - (sc.int_est(b) - sc.int_est(r))
        hyp = "right_integral_condition"
    else:
        slack = (sc.int_est(r) - sc.int_est(a)) - (sc.int_emp(r) - sc.int_emp(a))
        hyp = "left_integral_condition"
    j = int(np.argmin(slack))
    rep.add(hyp, slack[j], tol_int, location=r[j])
    supported = rep.passed

    edges = np.concatenate([[a], np.asarray(sc.breakpoints, dtype=float), [b]])
    edges = edges[(edges >= a) & (edges <= b)]
    est = continuous_minus_model(sc.est_cdf, sc.est_density, sc.model_cdf, sc.model_pdf, edges)
    emp = sc.emp_extrema()
    if direction == "sup":
        anchor = float(sc.emp(b) - sc.model_cdf(b))
        bound = 1.5 * emp.sup - 0.5 * anchor
        margin = bound - est.sup
        where = est.arg_sup
    else:
        anchor = float(sc.emp(a) - sc.model_cdf(a))
        bound = 1.5 * emp.inf - 0.5 * anchor
        margin = est.inf - bound
        where = est.arg_inf
    rep.add(
        f"conclusion_{direction}",
        margin,
        LEMMA_EQ_TOL,
        location=where,
        note="" if supported else "unsupported: a hypothesis failed",
    )
    rep.extra.update(est=est, emp=emp, anchor=anchor, bound=bound, supported=supported)
    if strict and not supported:
        raise HypothesisViolated(rep.failures()[0].name, report=rep)
    return rep


# ---------------------------------------------------------------------------
# sharpness construction


@dataclass(frozen=True)
class SharpnessValues:
    sup_est_minus_model: float
    sup_emp_minus_model: float
    emp_minus_model_at_b: float

    @property
    def bound(self) -> float:
        return 1.5 * self.sup_emp_minus_model - 0.5 * self.emp_minus_model_at_b

    @property
    def gap(self) -> float:
        return self.bound - self.sup_est_minus_model


def sharpness_fixture(c: float, eps: float):
    """The extremal configuration on ``[0, 1]`` attaining the constants 3/2, 1/2.

    ``F(x) = x^2 - c`` for ``x >= eps`` and linear through the origin below,
    ``F_hat = 0`` and ``F_n = 1{0 < x < 1} (x^2 - 1/3)``. Requires
    ``c >= 1`` and ``0 < eps <= 1/2``.

    Returns the scenario and the closed-form extrema.
    """
    if not c >= 1:
        raise ParameterOutOfRange(f"c must be >= 1, got {c}")
    if not 0 < eps <= 0.5:
        raise ParameterOutOfRange(f"eps must lie in (0, 1/2], got {eps}")
    low_slope = (eps**2 - c) / eps

    def F(x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= eps, x**2 - c, x * low_slope)

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= eps, 2 * x, low_slope)

    def emp(x):
        x = np.asarray(x, dtype=float)
        return np.where((x > 0) & (x < 1), x**2 - 1 / 3, 0.0)

    def emp_density(x):
        x = np.asarray(x, dtype=float)
        return np.where((x > 0) & (x < 1), 2 * x, 0.0)

    def int_emp(r):
        r = np.clip(np.asarray(r, dtype=float), 0.0, 1.0)
        return r**3 / 3 - r / 3

    def zero(x):
        return np.zeros(np.shape(x))

    def emp_extrema():
        return continuous_minus_model(emp, emp_density, F, f, [0.0, eps, 1.0])

    sc = Lemma1Scenario(
        a=0.0,
        b=1.0,
        model_cdf=F,
        model_pdf=f,
        est_cdf=zero,
        est_density=zero,
        emp=emp,
        int_est=zero,
        int_emp=int_emp,
        emp_extrema=emp_extrema,
        breakpoints=np.array([eps]),
        convex_domain=(eps, 1.0),
    )
    closed = SharpnessValues(c - eps**2, c - 1 / 3, c - 1.0)
    return sc, closed


# ---------------------------------------------------------------------------
# replaying the global bounds from per-interval lemmas


def interval_scenario(h: TriangularMix, s: Sample, model: TrueModel, a: float, b: float) -> Lemma1Scenario:
    inside = s.distinct[(s.distinct > a) & (s.distinct < b)]
    mb = model.breakpoints[(model.breakpoints > a) & (model.breakpoints < b)]
    return Lemma1Scenario(
        a=a,
        b=b,
        model_cdf=model.cdf,
        model_pdf=model.pdf,
        est_cdf=lambda x: mix_cdf(h, x),
        est_density=lambda x: mix_eval(h, x),
        emp=lambda x: ecdf_eval(s, x),
        int_est=lambda r: mix_integrated_cdf(h, r),
        int_emp=lambda r: integrated_ecdf(s, np.maximum(r, 0.0)),
        emp_extrema=lambda: step_minus_model(s, model.cdf, a, b),
        breakpoints=np.concatenate([inside, mb]),
    )


def proof_replay(fit, s: Sample, model: TrueModel, estimator: str = "ls", tol: float = 1e-10) -> VerificationReport:
    """Run the interval lemma on every knot interval and recombine.

    For the least squares fit both directions are checked on each
    ``[t_k, t_{k+1}]``; for the maximum likelihood fit only the inf form.
    Per-interval extrema of ``F_hat - F`` plus the tail candidates must
    reproduce the global extrema, and the per-interval bounds must sit
    inside the global ones.
    """
    h = _as_mix(fit)
    directions = ("sup", "inf") if estimator == "ls" else ("inf",)
    pts = np.concatenate([[0.0], h.knots])
    rep = VerificationReport()
    sups, infs, bounds_sup, bounds_inf = [], [], [], []
    for k, (a, b) in enumerate(zip(pts[:-1], pts[1:])):
        sc = interval_scenario(h, s, model, a, b)
        for d in directions:
            sub = lemma1_conclusion_check(sc, d)
            rep.extend(sub, prefix=f"[{k}]{d}:")
            est = sub.extra["est"]
            sups.append(est.sup)
            infs.append(est.inf)
            (bounds_sup if d == "sup" else bounds_inf).append(sub.extra["bound"])
    end = h.support_end
    tail = [h.mass - float(model.cdf(end)), h.mass - 1.0]
    glob = sup_inf_difference(h, model)
    emp = sup_inf_difference(s, model)
    rep.add("replay_global_sup", -abs(max(sups + tail) - glob.sup), tol)
    rep.add("replay_global_inf", -abs(min(infs + tail) - glob.inf), tol)
    if bounds_sup:
        rep.add("interval_sup_bounds_within_global", 1.5 * emp.sup - 0.5 * emp.inf - max(bounds_sup), tol)
    if bounds_inf:
        rep.add("interval_inf_bounds_within_global", min(bounds_inf) - (1.5 * emp.inf - 0.5 * emp.sup), tol)
    rep.extra.update(global_extrema=glob, emp=emp)
    return rep

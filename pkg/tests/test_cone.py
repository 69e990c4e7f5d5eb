import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convexdens import (
    FitConfig,
    TriangularMix,
    exponential,
    fit,
    lse_best_knot,
    lse_fit,
    lse_objective,
    lse_residual,
    mle_best_knot,
    mle_fit,
    mle_objective,
    mle_residual,
    sample_model,
    triangular_mixture,
    validate_sample,
)
from convexdens.core import gram_matrix, integrated_ecdf, mix_cdf
from convexdens.errors import MaxIterExceeded, ZeroDensityAtObservation

from conftest import samples


def grid_search_one_knot(objective, x):
    """Brute-force minimiser over (tau, a) for a single generator, refined twice."""
    t_lo, t_hi, a_lo, a_hi = 0.5 * x, 5 * x, 0.01 / x**2, 2 / x**2
    for _ in range(4):
        T, A = np.meshgrid(np.linspace(t_lo, t_hi, 201), np.linspace(a_lo, a_hi, 201), indexing="ij")
        Q = objective(T, A)
        i, j = np.unravel_index(np.argmin(Q), Q.shape)
        t, a = T[i, j], A[i, j]
        dt, da = (t_hi - t_lo) / 20, (a_hi - a_lo) / 20
        t_lo, t_hi, a_lo, a_hi = t - dt, t + dt, max(a - da, 1e-12), a + da
    return t, a


@pytest.mark.parametrize("x", [0.5, 1.0, 4.0])
def test_lse_one_point(x):
    res = lse_fit(validate_sample([x]))
    assert res.mix.knots == pytest.approx([3 * x], rel=1e-12)
    assert res.mix(0.0) == pytest.approx(2 / (3 * x), rel=1e-12)
    t, a = grid_search_one_knot(lambda T, A: A**2 * T**3 / 3 - 2 * A * np.maximum(T - x, 0), x)
    assert t == pytest.approx(3 * x, rel=1e-4)
    assert a * t == pytest.approx(2 / (3 * x), rel=1e-4)


@pytest.mark.parametrize("x", [0.5, 1.0, 4.0])
def test_mle_one_point(x):
    res = mle_fit(validate_sample([x]))
    assert res.mix.knots == pytest.approx([2 * x], rel=1e-12)
    assert res.mix(0.0) == pytest.approx(1 / x, rel=1e-12)
    t, a = grid_search_one_knot(lambda T, A: A * T**2 / 2 - np.log(A * np.maximum(T - x, 1e-300)), x)
    assert t == pytest.approx(2 * x, rel=1e-4)
    assert a * t == pytest.approx(1 / x, rel=1e-4)


def test_lse_objective_examples():
    s = validate_sample([1.0])
    assert lse_objective(TriangularMix.empty(), s) == 0.0
    h = TriangularMix(np.array([3.0]), np.array([2 / 9]))
    assert lse_objective(h, s) == pytest.approx(-4 / 9, rel=1e-14)


def test_mle_residual_one_point():
    x = 1.5
    h = mle_fit(validate_sample([x])).mix
    tau = np.linspace(0.01, 10, 500)
    expected = np.where(tau > x, (tau - 2 * x) ** 2 / 2, tau**2 / 2)
    assert np.allclose(mle_residual(h, validate_sample([x]), tau), expected, atol=1e-12)


def test_zero_density_at_observation():
    s = validate_sample([1.0, 3.0])
    with pytest.raises(ZeroDensityAtObservation) as exc:
        mle_objective(TriangularMix(np.array([2.0]), np.array([1.0])), s)
    assert exc.value.index == 1


MODELS = [exponential(1.0), triangular_mixture([0.5, 0.5], [1.0, 3.0])]


@pytest.mark.parametrize("estimator", ["ls", "ml"])
@pytest.mark.parametrize("n", [5, 40])
def test_certificate_is_global_minimum(estimator, n):
    model = MODELS[0]
    for seed in range(5):
        s = sample_model(model, n, seed)
        res = fit(estimator, s)
        grid = np.linspace(1e-9, res.tau_cap, 100_000)
        resid = lse_residual if estimator == "ls" else mle_residual
        vals = resid(res.mix, s, grid)
        # the exact minimiser is below every grid value and close to the grid min
        assert res.final_residual <= vals.min() + 1e-12
        assert res.final_residual >= vals.min() - 1e-6
        assert res.final_residual >= -res.tol
        best = (lse_best_knot if estimator == "ls" else mle_best_knot)(res.mix, s, res.tau_cap)
        assert best[1] == res.final_residual


@pytest.mark.parametrize("estimator", ["ls", "ml"])
def test_objective_monotone(estimator):
    for seed in range(10):
        res = fit(estimator, sample_model(MODELS[1], 60, seed))
        assert np.all(np.diff(res.history) <= 0)
        assert res.history[-1] == pytest.approx(res.objective, abs=1e-14)


def test_lse_normal_equations_at_optimum():
    for seed in range(10):
        s = sample_model(MODELS[0], 50, seed)
        h = lse_fit(s).mix
        a = h.coefs
        assert a @ gram_matrix(h.knots) @ a == pytest.approx(a @ integrated_ecdf(s, h.knots), rel=1e-10)


@pytest.mark.parametrize("estimator", ["ls", "ml"])
@settings(max_examples=25)
@given(s=samples(min_n=2, max_n=25), lam=st.floats(0.1, 10.0))
def test_scale_equivariance(estimator, s, lam):
    base = fit(estimator, s).mix
    scaled = fit(estimator, s.scaled(lam)).mix
    expect = base.scaled(lam)
    x = np.linspace(0, 1.2 * scaled.support_end, 50)
    assert np.allclose(mix_cdf(scaled, x), mix_cdf(expect, x), atol=1e-8)


@pytest.mark.parametrize("estimator", ["ls", "ml"])
@settings(max_examples=40)
@given(s=samples(min_n=1, max_n=30))
def test_random_samples_converge(estimator, s):
    res = fit(estimator, s)
    assert res.converged
    # extending the knot search range is the only expected warning
    assert not [w for w in res.warnings if not w.startswith("tau_cap extended")]
    assert res.mix.mass == pytest.approx(1.0, abs=1e-9)
    assert res.mix.support_end > s.max


def test_ties_are_handled():
    s = validate_sample([0.5, 0.5, 1.0, 1.0, 1.0, 2.0])
    for est in ("ls", "ml"):
        res = fit(est, s)
        assert res.converged and res.mix.mass == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("estimator", ["ls", "ml"])
def test_more_generators_than_distinct_values(estimator):
    # two distinct values: the likelihood Hessian is rank deficient once a
    # third generator enters
    s = validate_sample([0.25, 0.25, 0.25, 10.0])
    res = fit(estimator, s)
    assert res.converged and not res.warnings
    assert res.mix.m == 2
    assert res.mix.mass == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("estimator", ["ls", "ml"])
def test_wide_dynamic_range(estimator):
    # a tiny first observation plus a tied far outlier: coefficients span
    # about twelve orders of magnitude
    base = sample_model(exponential(1.0), 30, 8).values
    s = validate_sample(np.concatenate([[1.5e-6], base, [44.6] * 3]))
    res = fit(estimator, s)
    assert res.converged and not res.warnings
    assert res.mix.mass == pytest.approx(1.0, abs=1e-9)
    pts = np.concatenate([[0.0], res.mix.knots])
    emp = np.searchsorted(s.values, pts, side="right") / s.n
    assert np.max(np.abs(mix_cdf(res.mix, pts) - emp)) <= 1e-8


def test_strict_max_iter():
    s = sample_model(MODELS[0], 200, 3)
    res = lse_fit(s, FitConfig(max_iter=1, polish=False))
    assert any("max_iter" in w for w in res.warnings)
    with pytest.raises(MaxIterExceeded) as exc:
        lse_fit(s, FitConfig(max_iter=1, polish=False, strict=True))
    assert exc.value.result is not None


def test_tau_cap_extension():
    s = validate_sample([1.0, 2.0])
    res = lse_fit(s, FitConfig(tau_cap=2.5))
    assert res.converged
    assert any("tau_cap extended" in w for w in res.warnings)
    assert res.mix.knots[-1] == pytest.approx(lse_fit(s).mix.knots[-1], rel=1e-9)


def test_bad_config():
    s = validate_sample([1.0])
    with pytest.raises(ValueError):
        lse_fit(s, FitConfig(tol_cert=-1))
    with pytest.raises(ValueError):
        lse_fit(s, FitConfig(tau_cap=0.5))
    with pytest.raises(ValueError):
        fit("xx", s)

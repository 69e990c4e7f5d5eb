import numpy as np
import pytest

from convexdens import (
    TriangularMix,
    check_lse_characterization,
    check_mle_characterization,
    check_prop1,
    exponential,
    lemma1_conclusion_check,
    lse_fit,
    mle_fit,
    proof_replay,
    sample_model,
    sharpness_fixture,
    theorem1_margins,
    triangular_mixture,
    validate_sample,
)
from convexdens.errors import HypothesisViolated, NonConvexModel, ParameterOutOfRange
from convexdens.models import TrueModel
from convexdens.verification import interval_scenario


def test_prop1_one_point():
    s = validate_sample([1.0])
    assert check_prop1(lse_fit(s), s).passed


def test_prop1_two_knots_in_gap():
    s = validate_sample([1.0, 2.0, 3.0])
    mid = 1.5
    h = TriangularMix(np.array([mid, mid + 0.01, 4.0]), np.array([0.1, 0.1, 0.1]))
    rep = check_prop1(h, s)
    assert not rep["one_knot_per_gap"].passed
    assert rep["one_knot_beyond_max"].passed


def test_prop1_knot_below_first_observation():
    s = validate_sample([1.0, 2.0])
    rep = check_prop1(TriangularMix(np.array([0.5, 3.0]), np.array([0.1, 0.1])), s)
    assert not rep["one_knot_per_gap"].passed


def test_prop1_last_knot_inside():
    s = validate_sample([1.0, 2.0, 3.0])
    rep = check_prop1(TriangularMix(np.array([2.5]), np.array([0.3])), s)
    assert not rep["one_knot_beyond_max"].passed


def test_prop1_knot_at_observation():
    s = validate_sample([1.0, 2.0, 3.0])
    rep = check_prop1(TriangularMix(np.array([2.0, 4.0]), np.array([0.1, 0.1])), s)
    assert not rep["no_knot_at_observation"].passed


def test_prop1_ties_collapse():
    s = validate_sample([1.0, 1.0, 2.0, 2.0, 2.0, 5.0])
    assert check_prop1(lse_fit(s), s).passed
    assert check_prop1(mle_fit(s), s).passed


def test_characterizations_one_point():
    s = validate_sample([2.0])
    for rep in (check_lse_characterization(lse_fit(s), s), check_mle_characterization(mle_fit(s), s)):
        assert rep.passed
        assert all(c.margin >= -1e-12 for c in rep.checks)


@pytest.mark.parametrize("estimator", ["ls", "ml"])
def test_perturbation_probe(estimator):
    s = sample_model(exponential(1.0), 30, 4)
    res = (lse_fit if estimator == "ls" else mle_fit)(s)
    check = check_lse_characterization if estimator == "ls" else check_mle_characterization
    assert check(res, s).passed
    for j in range(res.mix.m):
        coefs = res.mix.coefs.copy()
        coefs[j] *= 1.01
        rep = check(TriangularMix(res.mix.knots, coefs), s)
        assert not rep.passed
        failed = {c.name for c in rep.failures()}
        assert failed & {"certificate_min_residual", "unit_mass"}


def test_eq8_at_origin():
    s = validate_sample([1.0, 2.0])
    rep = check_lse_characterization(lse_fit(s), s)
    assert rep["cdf_equals_ecdf_at_knots"].passed


def test_theorem1_one_point():
    s = validate_sample([1.0])
    rep = theorem1_margins(mle_fit(s), lse_fit(s), s, exponential(1.0))
    assert rep.passed
    assert all(c.margin >= 0 for c in rep.checks)


def test_theorem1_model_as_estimate():
    m = exponential(1.0)
    s = sample_model(m, 10, 0)
    rep = theorem1_margins(m, m, s, m)
    emp = rep.extra["emp"]
    assert rep["mle_inf_bound"].margin == pytest.approx(-(1.5 * emp.inf - 0.5 * emp.sup))
    assert rep.passed


def test_theorem1_rejects_nonconvex():
    bad = TrueModel("exp", rate=1.0, density_convex=False)
    s = validate_sample([1.0])
    with pytest.raises(NonConvexModel):
        theorem1_margins(None, lse_fit(s), s, bad)


@pytest.mark.parametrize(
    "c, eps, closed",
    [(1.0, 0.5, (0.75, 2 / 3, 0.0)), (2.0, 0.1, (1.99, 5 / 3, 1.0))],
)
def test_sharpness_values(c, eps, closed):
    sc, cl = sharpness_fixture(c, eps)
    assert (cl.sup_est_minus_model, cl.sup_emp_minus_model, cl.emp_minus_model_at_b) == pytest.approx(closed, abs=1e-15)
    rep = lemma1_conclusion_check(sc, "sup")
    assert rep.extra["est"].sup == pytest.approx(closed[0], abs=1e-12)
    assert rep.extra["emp"].sup == pytest.approx(closed[1], abs=1e-12)
    assert rep.extra["anchor"] == pytest.approx(closed[2], abs=1e-12)
    assert rep.extra["bound"] == pytest.approx(1.5 * closed[1] - 0.5 * closed[2], abs=1e-12)
    assert rep["conclusion_sup"].margin == pytest.approx(eps**2, abs=1e-12)
    assert rep.passed
    # the kink at eps breaks a literal convexity test over [0, 1]
    assert not rep["convex_model_density_full_interval"].passed


def test_sharpness_gap_sweep():
    for c in np.linspace(1, 5, 7):
        for eps in np.linspace(0.02, 0.5, 9):
            sc, _ = sharpness_fixture(c, eps)
            rep = lemma1_conclusion_check(sc, "sup")
            assert rep["conclusion_sup"].margin == pytest.approx(eps**2, abs=1e-12)


@pytest.mark.parametrize("c, eps", [(0.5, 0.1), (1.0, 0.0), (1.0, 0.6), (np.nan, 0.1)])
def test_sharpness_rejects(c, eps):
    with pytest.raises(ParameterOutOfRange):
        sharpness_fixture(c, eps)


def test_lemma_unsupported_when_hypothesis_fails():
    s = sample_model(exponential(1.0), 20, 1)
    h = lse_fit(s).mix
    # an interval whose endpoints are not knots breaks the endpoint matching
    sc = interval_scenario(h, s, exponential(1.0), 0.0, float(np.median(s.values)))
    rep = lemma1_conclusion_check(sc, "sup")
    assert not rep["endpoint_match"].passed
    assert not rep.extra["supported"]
    assert "unsupported" in rep["conclusion_sup"].note
    with pytest.raises(HypothesisViolated) as exc:
        lemma1_conclusion_check(sc, "sup", strict=True)
    assert exc.value.hypothesis == "endpoint_match"


@pytest.mark.parametrize("model", [exponential(1.0), triangular_mixture([0.5, 0.5], [1.0, 3.0])], ids=lambda m: m.spec)
def test_proof_replay(model):
    for seed in range(5):
        s = sample_model(model, 40, seed)
        rep = proof_replay(lse_fit(s), s, model, "ls")
        assert rep.passed, [c for c in rep.failures()]
        rep = proof_replay(mle_fit(s), s, model, "ml")
        assert rep.passed, [c for c in rep.failures()]

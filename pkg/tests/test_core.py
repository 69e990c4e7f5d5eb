import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from convexdens import (
    TriangularMix,
    ecdf_eval,
    gram,
    gram_matrix,
    integrated_ecdf,
    mass,
    mix_cdf,
    mix_eval,
    mix_integrated_cdf,
    moment_term,
    validate_sample,
)
from convexdens.errors import (
    EmptyInput,
    NegativeArgument,
    NonFiniteValue,
    NonPositiveKnot,
    NonPositiveValue,
)

from conftest import mixes, samples


def _quad(func, lo, hi, breaks=()):
    pts = [p for p in breaks if lo < p < hi]
    return quad(func, lo, hi, points=pts or None, epsabs=1e-13, epsrel=1e-13, limit=200)[0]


# validate_sample


def test_validate_sorts():
    s = validate_sample([2.0, 1.0, 3.0])
    assert s.values.tolist() == [1.0, 2.0, 3.0]
    assert not s.has_ties


def test_validate_single():
    s = validate_sample([1.0])
    assert s.n == 1


def test_validate_rejects_zero():
    with pytest.raises(NonPositiveValue) as exc:
        validate_sample([0.0, 1.0])
    assert exc.value.index == 0


def test_validate_rejects_nonfinite_and_empty():
    with pytest.raises(NonFiniteValue) as exc:
        validate_sample([1.0, np.nan])
    assert exc.value.index == 1
    with pytest.raises(EmptyInput):
        validate_sample([])


def test_ties_flagged():
    assert validate_sample([1.0, 1.0, 2.0]).has_ties


def test_sample_is_read_only():
    s = validate_sample([1.0, 2.0])
    with pytest.raises(ValueError):
        s.values[0] = 5.0


# empirical CDF


@pytest.mark.parametrize("x, expected", [(2.0, 2 / 3), (0.5, 0.0), (10.0, 1.0), (1.0, 1 / 3)])
def test_ecdf_eval(x, expected):
    assert ecdf_eval(validate_sample([1.0, 2.0, 3.0]), x) == pytest.approx(expected, abs=0)


def test_integrated_ecdf_examples():
    assert integrated_ecdf(validate_sample([1.0, 2.0]), 3.0) == 1.5
    assert integrated_ecdf(validate_sample([1.0, 2.0]), 1.0) == 0.0
    s = validate_sample([1.0, 2.0, 3.0])
    oracle = _quad(lambda x: ecdf_eval(s, x), 0, 2.5, breaks=s.values)
    assert integrated_ecdf(s, 2.5) == pytest.approx(oracle, abs=1e-12)
    assert integrated_ecdf(s, 2.5) == pytest.approx(2 / 3, abs=1e-15)


def test_integrated_ecdf_negative():
    with pytest.raises(NegativeArgument):
        integrated_ecdf(validate_sample([1.0]), -0.1)


def test_moment_term_alias():
    s = validate_sample([0.5, 1.5])
    assert moment_term(s, 2.0) == integrated_ecdf(s, 2.0)


@given(samples(max_n=10), st.floats(0.0, 12.0))
def test_integrated_ecdf_matches_quadrature(s, r):
    oracle = _quad(lambda x: ecdf_eval(s, x), 0, r, breaks=s.values) if r > 0 else 0.0
    assert abs(integrated_ecdf(s, r) - oracle) <= 1e-12 * (1 + r)


# mixtures


def test_mix_eval_examples():
    assert mix_eval(TriangularMix(np.array([3.0]), np.array([2 / 9])), 0.0) == pytest.approx(2 / 3, rel=1e-15)
    assert mix_eval(TriangularMix(np.array([2.0]), np.array([0.5])), 2.0) == 0.0
    h = TriangularMix(np.array([1.0, 2.0]), np.array([1.0, 0.5]))
    assert mix_eval(h, 0.5) == pytest.approx(1.25, rel=1e-15)


def test_mix_cdf_examples():
    h = TriangularMix(np.array([3.0]), np.array([2 / 9]))
    oracle = _quad(lambda x: mix_eval(h, x), 0, 3)
    assert mix_cdf(h, 3.0) == pytest.approx(oracle, abs=1e-12)
    assert mix_cdf(h, 3.0) == pytest.approx(1.0, abs=1e-15)
    assert mix_cdf(h, 0.0) == 0.0
    g = TriangularMix(np.array([2.0]), np.array([0.5]))
    assert mix_cdf(g, 1.0) == pytest.approx(_quad(lambda x: mix_eval(g, x), 0, 1), abs=1e-12)
    assert mix_cdf(g, 1.0) == pytest.approx(0.75, abs=1e-15)


def test_mix_integrated_cdf_examples():
    h = TriangularMix(np.array([3.0]), np.array([2 / 9]))
    assert mix_integrated_cdf(h, 3.0) == pytest.approx(2.0, abs=1e-14)
    # equals the integrated empirical CDF at the n = 1 least squares knot
    assert mix_integrated_cdf(h, 3.0) == pytest.approx(integrated_ecdf(validate_sample([1.0]), 3.0), abs=1e-14)
    assert mix_integrated_cdf(h, 0.0) == 0.0
    g = TriangularMix(np.array([1.0]), np.array([3.0]))
    oracle = _quad(lambda x: mix_cdf(g, x), 0, 2, breaks=[1.0])
    assert mix_integrated_cdf(g, 2.0) == pytest.approx(oracle, abs=1e-12)
    assert mix_integrated_cdf(g, 2.0) == pytest.approx(2.5, abs=1e-14)


def test_mass_examples():
    h = TriangularMix(np.array([3.0]), np.array([2 / 9]))
    assert mass(h) == pytest.approx(_quad(lambda x: mix_eval(h, x), 0, 3), abs=1e-12)
    assert mass(TriangularMix(np.array([1.0, 2.0]), np.array([1.0, 1.0]))) == 2.5
    assert mass(TriangularMix(np.array([1.0]), np.array([1e-300]))) == pytest.approx(0.5e-300)
    assert mass(TriangularMix.empty()) == 0.0


def test_knot_merge():
    h = TriangularMix(np.array([1.0, 1.0 + 1e-14, 2.0]), np.array([1.0, 2.0, 1.0]))
    assert h.m == 2
    assert h.coefs[0] == 3.0


def test_nonpositive_knot():
    with pytest.raises(NonPositiveKnot):
        TriangularMix(np.array([0.0]), np.array([1.0]))


@given(mixes())
def test_knot_value_view_convex(h):
    pts, vals = h.knot_values()
    assert vals[-1] == 0.0
    assert np.all(np.diff(h.slopes()) >= -1e-12 * (1 + np.abs(h.slopes()[:-1])))
    assert np.all(np.diff(vals) <= 0)


@given(mixes(), st.floats(0, 12), st.floats(0, 12))
def test_cdf_is_antiderivative(h, u, v):
    u, v = min(u, v), max(u, v)
    oracle = _quad(lambda x: mix_eval(h, x), u, v, breaks=h.knots) if v > u else 0.0
    assert abs(mix_cdf(h, v) - mix_cdf(h, u) - oracle) <= 1e-10


@given(mixes(), st.floats(0, 12), st.floats(0, 12))
def test_integrated_cdf_is_antiderivative(h, u, v):
    u, v = min(u, v), max(u, v)
    oracle = _quad(lambda x: mix_cdf(h, x), u, v, breaks=h.knots) if v > u else 0.0
    assert abs(mix_integrated_cdf(h, v) - mix_integrated_cdf(h, u) - oracle) <= 1e-10 * (1 + abs(oracle))


@given(mixes())
def test_cdf_constant_beyond_support(h):
    end = h.support_end
    assert mix_cdf(h, end * 2) == pytest.approx(h.mass, rel=1e-13)


# gram


def test_gram_examples():
    assert gram(2.0, 2.0) == pytest.approx(8 / 3, rel=1e-15)
    oracle = _quad(lambda x: (1 - x) * (2 - x), 0, 1)
    assert gram(1.0, 2.0) == pytest.approx(oracle, abs=1e-12)
    assert gram(1.0, 2.0) == pytest.approx(5 / 6, rel=1e-15)
    assert gram(1.0, 2.0) == gram(2.0, 1.0)


def test_gram_rejects_nonpositive():
    with pytest.raises(NonPositiveKnot):
        gram(0.0, 1.0)


@given(st.floats(1e-3, 10.0), st.floats(1e-3, 10.0))
def test_gram_matches_quadrature(t, s):
    oracle = _quad(lambda x: max(t - x, 0) * max(s - x, 0), 0, min(t, s))
    assert abs(gram(t, s) - oracle) <= 1e-10


@given(st.lists(st.floats(0.05, 10.0), min_size=1, max_size=6, unique=True))
def test_gram_matrix_positive_definite(knots):
    k = np.sort(np.array(knots))
    if np.any(np.diff(k) < 1e-3):
        return
    G = gram_matrix(k)
    assert np.allclose(G, G.T)
    assert np.linalg.eigvalsh(G).min() > 0

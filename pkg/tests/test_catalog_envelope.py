import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from moyalab import catalog
from moyalab.envelope import EnvelopeClass, GrowthClass, power_exp_series

powers = st.floats(-3, 4)
rates = st.floats(0.05, 2.0)
scales = st.complex_numbers(min_magnitude=0.1, max_magnitude=5, allow_nan=False)
seq = st.one_of(
    st.builds(catalog.PowerExp, powers, rates, scales),
    st.builds(catalog.PowerExp, powers, st.just(0.0), scales),
    st.builds(catalog.Kronecker, st.integers(0, 6), scales),
)
rapid_seq = st.one_of(
    st.builds(catalog.PowerExp, powers, rates, scales),
    st.builds(catalog.Kronecker, st.integers(0, 6), scales),
)
mat = st.one_of(
    st.builds(catalog.Diagonal, seq),
    st.builds(catalog.RankOne, seq, seq),
)


@pytest.mark.parametrize("p, a", [(0, 1.0), (2, 0.3), (-1.5, 0.0), (-3, 0.2), (1, 0.05)])
def test_series_against_direct_sum(p, a):
    m = np.arange(200000, dtype=float)
    direct = np.sum((1 + m) ** p * np.exp(-a * m))
    if a == 0:
        # midpoint-rule tail of the slowly converging series
        direct += (len(m) + 0.5) ** (p + 1) / -(p + 1)
    assert power_exp_series(p, a) == pytest.approx(direct, rel=1e-5)


@pytest.mark.parametrize("p, a", [(0, 0.0), (-1, 0.0), (2, -0.1)])
def test_series_divergent(p, a):
    assert power_exp_series(p, a) == math.inf


def test_envelope_rejects_nonpositive_constant():
    with pytest.raises(ValueError):
        EnvelopeClass((0.0,), 1.0, 0.0)


def test_scalar_rate_broadcasts():
    env = EnvelopeClass((1.0, 2.0), 0.5)
    assert env.exp_rate == (0.5, 0.5)


@pytest.mark.parametrize("poly, rate, expected", [
    ((3.0,), 1.0, GrowthClass.RAPID_DECAY),
    ((3.0,), 0.0, GrowthClass.TEMPERED),
    ((-0.6,), 0.0, GrowthClass.SQUARE_SUMMABLE),
    ((-0.5,), 0.0, GrowthClass.TEMPERED),
    ((0.0,), -0.1, GrowthClass.WILD),
    ((-1.0, 0.0), (0.0, 1.0), GrowthClass.SQUARE_SUMMABLE),
])
def test_growth_class_rules(poly, rate, expected):
    assert EnvelopeClass(poly, rate).growth_class() is expected


@given(seq, seq, st.integers(1, 30))
def test_pointwise_product_rule_certifies(u, v, d):
    prod = u.evaluate((d,)) * v.evaluate((d,))
    assert u.envelope().times(v.envelope()).certifies(prod)
    np.testing.assert_allclose(catalog.pointwise_product(u, v).evaluate((d,)), prod,
                               rtol=1e-12, atol=1e-300)


@given(seq, st.integers(1, 40))
def test_sequence_envelope_certifies(u, d):
    assert u.envelope().certifies(u.evaluate((d,)))


@given(mat, st.integers(1, 12))
def test_matrix_envelope_certifies(g, d):
    assert g.envelope().certifies(g.evaluate((d, d)))


@given(mat, mat)
def test_matrix_product_rule_matches_large_truncation(a, b):
    try:
        prod, contracted = catalog.matrix_product(a, b)
    except catalog.DivergentSeries:
        return
    d, big = 6, 4000
    # compare a d x d corner with a long inner contraction
    A = a.evaluate((d, big))
    B = b.evaluate((big, d))
    direct = A @ B
    scale = 1 + np.max(np.abs(direct))
    tail_ok = np.max(np.abs(prod.evaluate((d, d)) - direct)) / scale
    if contracted:
        # the inner tail beyond `big` must be negligible for the comparison
        inner_rate = a.envelope().exp_rate[1] + b.envelope().exp_rate[0]
        assume(inner_rate >= 0.05)
        assert tail_ok < 1e-12
    else:
        assert tail_ok < 1e-12


@given(mat, mat)
def test_matmul_envelope_certifies_truncated_product(a, b):
    env = a.envelope().matmul(b.envelope())
    d = 10
    direct = a.evaluate((d, d)) @ b.evaluate((d, d))
    if env is not None:
        assert env.certifies(direct)


@given(mat)
def test_adjoint_is_conjugate_transpose(g):
    d = 7
    np.testing.assert_allclose(catalog.adjoint(g).evaluate((d, d)), g.evaluate((d, d)).conj().T,
                               rtol=1e-15, atol=0)


@given(st.one_of(seq, mat))
def test_generator_json_round_trip(g):
    assert catalog.generator_from_json(g.to_json(), axes=g.axes) == g


def test_generator_json_errors_name_field():
    with pytest.raises(ValueError, match="generator.index"):
        catalog.generator_from_json({"kind": "kronecker"})
    with pytest.raises(ValueError, match="generator.kind"):
        catalog.generator_from_json({"kind": "gaussian"})


def test_two_axis_constructors_normalize_to_rank_one():
    g = catalog.power_law((1.0, 2.0))
    assert isinstance(g, catalog.RankOne)
    m, n = np.meshgrid(np.arange(4), np.arange(4), indexing="ij")
    np.testing.assert_allclose(g.evaluate((4, 4)), (1.0 + m) ** 1 * (1.0 + n) ** 2)
    e = catalog.kronecker((1, 2), 3j).evaluate((3, 3))
    assert e[1, 2] == 3j and np.count_nonzero(e) == 1


def test_divergent_inner_product_raises():
    with pytest.raises(catalog.DivergentSeries):
        catalog.inner(catalog.constant(1.0), catalog.power_law(-0.5))


def test_kronecker_envelope_is_exact_class():
    env = catalog.kronecker(5, 2.0).envelope()
    assert env.growth_class() is GrowthClass.RAPID_DECAY
    assert env.certifies(catalog.kronecker(5, 2.0).evaluate((20,)))


def test_diagonal_envelope_support():
    g = catalog.diagonal(catalog.power_law(2.0))
    env = g.envelope()
    assert env.support == "diagonal"
    assert env.growth_class() is GrowthClass.TEMPERED
    assert env.to_json()["support"] == "diagonal"
    assert EnvelopeClass.from_json(env.to_json()) == env

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sharphardy.errors import DomainError, PreconditionError
from sharphardy.symfun import (SymVector, curvature_sum_bound, curvature_sum_fields, newton_chain,
                               sigma_all, sigma_k, sigma_rows)


def brute_sigma(x, k):
    return float(sum(np.prod(c) for c in itertools.combinations(x, k))) if k else 1.0


@pytest.mark.parametrize("v,k,expected", [((1, 2, 3), 2, 11.0), ((1, 1, 1), 3, 1.0), ((1, 2, 3), 0, 1.0)])
def test_sigma_k_examples(v, k, expected):
    assert sigma_k(v, k) == expected


@pytest.mark.parametrize("k", [-1, 4, 1.5])
def test_sigma_k_out_of_range(k):
    with pytest.raises(DomainError):
        sigma_k((1, 2, 3), k)


def test_symvector_rejects_empty_and_nonfinite():
    with pytest.raises(DomainError):
        SymVector(())
    with pytest.raises(DomainError):
        SymVector((1.0, np.nan))


finite = st.floats(-5, 5, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=1, max_size=8))
def test_recurrence_matches_subset_enumeration(v):
    s = sigma_all(v)
    a = np.abs(v)
    for k in range(len(v) + 1):
        assert abs(s[k] - brute_sigma(v, k)) <= 1e-12 * max(1.0, brute_sigma(a, k))


def test_sigma_rows_matches_rowwise():
    rng = np.random.default_rng(0)
    K = rng.normal(size=(50, 4))
    S = sigma_rows(K)
    for i in range(50):
        np.testing.assert_allclose(S[i], sigma_all(K[i]), rtol=1e-14, atol=1e-14)


def test_newton_chain_equal_entries():
    r = newton_chain((1, 1, 1))
    np.testing.assert_allclose(r.terms, (3, 3, 3))
    assert r.holds and r.equality_case


def test_newton_chain_example():
    r = newton_chain((1, 2, 3))
    np.testing.assert_allclose(r.terms, (11 / 6, 18 / 11, 3 / 2), rtol=1e-15)
    assert r.holds and not r.equality_case


def test_newton_chain_rejects_non_positive():
    with pytest.raises(DomainError):
        newton_chain((1.0, 0.0, 2.0))


positive = st.floats(1e-3, 1e3, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(st.lists(positive, min_size=2, max_size=6))
def test_newton_chain_non_increasing(v):
    r = newton_chain(v)
    assert r.holds
    spread = max(v) - min(v)
    assert r.equality_case == (spread <= 1e-12 * max(v))


@pytest.mark.parametrize("kappa,delta,lhs,rhs", [
    ((1, 1), 0.5, 4.0, 4.0),
    ((1, -1), 0.5, 4 / 3, 0.0),
    ((2, 0), 0.25, 4.0, 8 / 3),
])
def test_curvature_sum_bound_examples(kappa, delta, lhs, rhs):
    a, b = curvature_sum_bound(kappa, delta)
    assert a == pytest.approx(lhs, rel=1e-15, abs=1e-15)
    assert b == pytest.approx(rhs, rel=1e-15, abs=1e-15)


def test_curvature_sum_bound_names_offending_index():
    with pytest.raises(PreconditionError) as exc:
        curvature_sum_bound((0.5, 2.0, 1.0), 0.5)
    assert exc.value.index == 1
    assert "kappa[1]" in str(exc.value)


def test_curvature_sum_bound_delta_zero():
    lhs, rhs = curvature_sum_bound((1.0, -0.3, 2.0), 0.0)
    assert lhs == pytest.approx(2.7) and rhs == pytest.approx(2.7)


def test_curvature_sum_bound_rejects_negative_delta():
    with pytest.raises(DomainError):
        curvature_sum_bound((1.0,), -0.1)


@settings(max_examples=300, deadline=None)
@given(st.lists(finite, min_size=1, max_size=6), st.floats(0, 0.999))
def test_curvature_sum_bound_property(kappa, frac):
    kmax = max(max(kappa), 1e-9)
    delta = frac / kmax
    lhs, rhs = curvature_sum_bound(kappa, delta)
    assert lhs - rhs >= -1e-12 * (1 + abs(lhs))


@settings(max_examples=100, deadline=None)
@given(st.lists(finite, min_size=1, max_size=5))
def test_lhs_non_decreasing_in_delta(kappa):
    kmax = max(max(kappa), 1e-9)
    t = np.linspace(0, 0.99 / kmax, 50)
    lhs, _, bad = curvature_sum_fields(np.repeat([kappa], 50, axis=0), t)
    assert not bad.any()
    assert np.all(np.diff(lhs) >= -1e-12 * (1 + np.abs(lhs[1:])))


def test_fields_flag_inadmissible_rows():
    lhs, rhs, bad = curvature_sum_fields([[1.0, 1.0], [3.0, 0.0]], [0.5, 0.5])
    assert bad.tolist() == [False, True]
    assert np.isnan(lhs[1]) and lhs[0] == pytest.approx(4.0)

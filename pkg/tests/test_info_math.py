import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from efflen.errors import DomainError
from efflen.info_math import (
    JointPMF,
    NoiseParams,
    binary_entropy,
    binary_entropy_inverse,
    bsc_convolve,
    entropy,
    positive_part,
)

# 40-digit mpmath evaluations, frozen.
FROZEN_H = {
    0.05: 0.28639695711595612877,
    0.1: 0.46899559358928122125,
    0.11: 0.49991595816452799564,
    0.18: 0.68007704572827984202,
    0.2: 0.72192809488736234787,
    0.25: 0.81127812445913286391,
    0.32: 0.90438145772449389813,
}

probs = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


def mp_h(q):
    with mpmath.workdps(40):
        q = mpmath.mpf(q)
        if q in (0, 1):
            return 0.0
        return float(-q * mpmath.log(q, 2) - (1 - q) * mpmath.log(1 - q, 2))


@pytest.mark.parametrize("q, value", sorted(FROZEN_H.items()))
def test_binary_entropy_frozen_values(q, value):
    assert binary_entropy(q) == pytest.approx(value, abs=1e-15)


@given(probs)
def test_binary_entropy_matches_mpmath(q):
    assert binary_entropy(q) == pytest.approx(mp_h(q), abs=1e-14)


def test_binary_entropy_endpoints_and_midpoint():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == 1.0


@given(probs)
def test_binary_entropy_symmetric_bit_for_bit(q):
    assert binary_entropy(q) == binary_entropy(1.0 - q)


@given(probs)
def test_binary_entropy_range(q):
    assert 0.0 <= binary_entropy(q) <= 1.0


def test_binary_entropy_vectorised():
    q = np.array([0.0, 0.11, 0.5, 0.89, 1.0])
    out = binary_entropy(q)
    assert out.shape == q.shape
    assert np.allclose(out, [binary_entropy(float(x)) for x in q], atol=0)


@pytest.mark.parametrize("bad", [-0.1, 1.1, float("nan")])
def test_binary_entropy_rejects_out_of_range(bad):
    with pytest.raises(DomainError):
        binary_entropy(bad)


@given(st.floats(min_value=0.0, max_value=1.0))
def test_inverse_round_trip_in_value(v):
    assert abs(binary_entropy(binary_entropy_inverse(v)) - v) <= 1e-9


@given(st.floats(min_value=0.0, max_value=0.5 - 1e-4))
def test_inverse_round_trip_in_argument(q):
    # Near 1/2 the entropy is flat and the argument is not recoverable to 1e-9.
    assert abs(binary_entropy_inverse(binary_entropy(q)) - q) <= 1e-9


def test_inverse_example_value():
    q = binary_entropy_inverse(0.4690)
    assert 0.0 <= q <= 0.5
    assert abs(binary_entropy(q) - 0.4690) <= 1e-10


def test_inverse_endpoints():
    assert binary_entropy_inverse(0.0) == 0.0
    assert binary_entropy_inverse(1.0) == 0.5
    with pytest.raises(DomainError):
        binary_entropy_inverse(1.5)


@given(probs, probs)
def test_convolution_commutative_and_in_range(a, b):
    c = bsc_convolve(a, b)
    assert abs(c - bsc_convolve(b, a)) <= 1e-14
    assert -1e-15 <= c <= 1.0 + 1e-15


@given(probs, probs, probs)
def test_convolution_associative(a, b, c):
    assert abs(bsc_convolve(bsc_convolve(a, b), c) - bsc_convolve(a, bsc_convolve(b, c))) <= 1e-14


@given(probs, probs, probs)
def test_binary_entropy_concave(q1, q2, lam):
    mid = lam * q1 + (1 - lam) * q2
    mid = min(max(mid, 0.0), 1.0)
    assert binary_entropy(mid) >= lam * binary_entropy(q1) + (1 - lam) * binary_entropy(q2) - 1e-12


def test_convolution_special_values():
    assert bsc_convolve(0.2, 0.0) == 0.2
    assert bsc_convolve(0.2, 0.5) == 0.5
    assert bsc_convolve(0.2, 0.2) == pytest.approx(0.32, abs=1e-15)
    assert bsc_convolve(0.1, 0.1) == pytest.approx(0.18, abs=1e-15)


@given(st.floats(min_value=0.0, max_value=0.5), st.floats(min_value=0.0, max_value=0.5))
def test_convolution_moves_toward_half(a, b):
    assert max(a, b) - 1e-15 <= bsc_convolve(a, b) <= 0.5 + 1e-15


def test_positive_part():
    assert positive_part(-2.0) == 0.0
    assert positive_part(0.3) == 0.3
    assert np.array_equal(positive_part(np.array([-1.0, 2.0])), [0.0, 2.0])


def test_entropy_of_vector():
    assert entropy([0.25] * 4) == pytest.approx(2.0, abs=1e-15)
    assert entropy([1.0, 0.0]) == 0.0
    assert entropy([0.2, 0.8]) == pytest.approx(FROZEN_H[0.2], abs=1e-15)


def test_joint_pmf_validation():
    with pytest.raises(DomainError):
        JointPMF(np.array([[0.5, 0.6], [0.0, 0.0]]))
    with pytest.raises(DomainError):
        JointPMF(np.array([[-0.1, 1.1]]))
    with pytest.raises(DomainError):
        JointPMF(np.array([0.5, 0.5]))


def test_joint_pmf_marginals_and_conditional():
    pmf = JointPMF(np.array([[0.3, 0.2, 0.0], [0.0, 0.0, 0.0], [0.1, 0.1, 0.3]]))
    assert np.allclose(pmf.marginal_x(), [0.5, 0.0, 0.5])
    assert np.allclose(pmf.marginal_y(), [0.4, 0.3, 0.3])
    kernel, defined = pmf.conditional("x")
    assert list(defined) == [True, False, True]
    assert np.all(np.isnan(kernel[1]))
    assert np.allclose(kernel[0], [0.6, 0.4, 0.0])
    kernel_y, defined_y = pmf.conditional("y")
    assert defined_y.all()
    assert np.allclose(kernel_y.sum(axis=1), 1.0)
    with pytest.raises(DomainError):
        pmf.conditional("z")


def test_dsbs_and_round_trip():
    pmf = JointPMF.dsbs(0.1)
    assert np.allclose(pmf.marginal_x(), 0.5)
    assert pmf.probs[0, 1] == pytest.approx(0.05)
    again = JointPMF.from_dict(pmf.to_dict())
    assert np.array_equal(again.probs, pmf.probs)
    with pytest.raises(DomainError):
        JointPMF.from_dict({"p": []})


def test_independent_pmf_factorises():
    pmf = JointPMF.independent([0.2, 0.8], [0.5, 0.25, 0.25])
    assert np.allclose(pmf.probs, np.outer(pmf.marginal_x(), pmf.marginal_y()))


def test_noise_params_ranges():
    NoiseParams(0.1, 0.2, 0.0, 0.3, 0.4).require_example2()
    with pytest.raises(DomainError):
        NoiseParams(p=1.2)
    with pytest.raises(DomainError):
        NoiseParams(p1=0.5).require_example2()


@settings(max_examples=50)
@given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=2, max_size=6))
def test_entropy_bounded_by_log_alphabet(weights):
    w = np.array(weights)
    if w.sum() == 0:
        return
    pmf = w / w.sum()
    assert -1e-12 <= entropy(pmf) <= math.log2(len(pmf)) + 1e-12

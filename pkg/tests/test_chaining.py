import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from neurips_lab.chaining import (
    DUDLEY_CONSTANT,
    class_profile,
    deviation_bound,
    dudley_integral,
    entropy_integral_closed_form,
    farthest_point_order,
    finite_profile,
    lambda_bound,
    lambda_bound_class,
    talagrand_upper_bound_finite,
)
from neurips_lab.errors import DomainError, InvalidInputError
from neurips_lab.relu_model import ParameterClass


def _points_matrix(seed, N=30, dim=3):
    x = np.random.default_rng(seed).standard_normal((N, dim))
    return np.linalg.norm(x[:, None] - x[None], axis=-1)


def test_dudley_constant_value():
    assert DUDLEY_CONSTANT == pytest.approx(math.sqrt(2) / ((math.sqrt(2) - 1) * math.sqrt(math.log(2))), rel=1e-15)


def test_dudley_integral_frozen_value():
    # independent value: scipy.quad on each smooth piece of the profile
    # between its jumps, 1e-12 relative tolerance, computed once and frozen
    val = dudley_integral(class_profile(ParameterClass(1, 2, 1.0, 1.0)))
    assert val == pytest.approx(30.29467566, rel=1e-8)


def test_dudley_integral_matches_piecewise_oracle():
    n, d, c_w, c_b = 1, 3, 0.5, 2.5
    cls = ParameterClass(n, d, c_w, c_b)
    x = 16 * n * c_b * c_w
    L = 2 * n * c_w

    def integrand(e):
        e = np.asarray(e, dtype=float)
        return np.sqrt(n * (math.log(2) + np.log(np.floor(x / e + 1)) + np.log(np.floor(2 * x / e + 1))
                            + d * np.log1p(1 / np.sin(e / (16 * n * c_w)))))

    # smooth pieces between consecutive jumps eps = 2x/k, down to 1e-3 L
    lo = 1e-3 * L
    k = np.arange(math.ceil(2 * x / L), math.floor(2 * x / lo) + 1)
    edges = np.unique(np.clip(np.concatenate([2 * x / k, [lo, L]]), lo, L))
    t, w = np.polynomial.legendre.leggauss(12)
    a_, b_ = edges[:-1, None], edges[1:, None]
    body = float((0.5 * (b_ - a_) * w * integrand(0.5 * (a_ + b_) + 0.5 * (b_ - a_) * t)).sum())
    # below lo, substitute eps = lo * exp(-s)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        tail, _ = integrate.quad(lambda u: lo * math.exp(-u) * float(integrand(lo * math.exp(-u))), 0, 60,
                                 limit=2000, epsabs=1e-14)
    assert dudley_integral(class_profile(cls)) == pytest.approx(DUDLEY_CONSTANT * (body + tail), rel=1e-7)


def test_dudley_integral_below_closed_form_on_grid():
    worst = -math.inf
    for n, d, c_w, c_b in itertools.product((1, 2, 3), (1, 2, 3), (0.5, 1.0, 2.0), (1.0, 2.0, 3.0)):
        cls = ParameterClass(n, d, c_w, c_b)
        worst = max(worst, dudley_integral(class_profile(cls)) - entropy_integral_closed_form(cls)[1])
    assert worst <= 1e-9


def test_closed_form_relation():
    cls = ParameterClass(2, 3, 1.5, 1.5)
    integral, gamma2 = entropy_integral_closed_form(cls)
    # gamma_2 closed form is the Dudley constant times the closed-form integral
    ratio = gamma2 / integral
    assert ratio == pytest.approx(2.0 / ((2.0 - math.sqrt(2.0)) * math.sqrt(math.log(2))), rel=1e-14)
    assert ratio == pytest.approx(DUDLEY_CONSTANT, rel=1e-14)


def test_finite_profile_is_exact_step_function():
    D = _points_matrix(0, N=12)
    prof = finite_profile(D)
    order, radii = farthest_point_order(D)
    assert prof(radii[0]) == 0.0
    for k in range(1, len(radii)):
        eps = 0.5 * (radii[k - 1] + radii[k]) if radii[k] < radii[k - 1] else radii[k]
        assert prof(eps) <= math.log(k + 1) + 1e-15
    brk, logs = prof.steps
    exact = DUDLEY_CONSTANT * sum(math.sqrt(l) * (brk[i] - brk[i + 1]) for i, l in enumerate(logs))
    assert dudley_integral(prof) == pytest.approx(exact, rel=1e-14)


def test_farthest_point_radii_decrease():
    _, radii = farthest_point_order(_points_matrix(3))
    assert np.all(np.diff(radii) <= 0) and radii[-1] == 0.0


def test_single_point_space():
    D = np.zeros((1, 1))
    assert dudley_integral(finite_profile(D)) == 0.0
    val, seq = talagrand_upper_bound_finite(None, D)
    assert val == 0.0 and seq.sizes() == [1]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 40))
def test_talagrand_sequence_is_admissible(seed, N):
    D = _points_matrix(seed, N=N)
    val, seq = talagrand_upper_bound_finite(list(range(N)), D)
    sizes = seq.sizes()
    assert sizes[0] == 1 and sizes[-1] == N
    for k, s in enumerate(sizes):
        assert s <= (1 if k == 0 else 2 ** (2 ** k))
    for a, b in zip(seq.levels, seq.levels[1:]):
        assert set(a) <= set(b)
    # the supremum is at least the radius around the single first point
    assert val >= D[seq.levels[0][0]].max() - 1e-12


def test_matrix_validation():
    with pytest.raises(InvalidInputError):
        finite_profile(np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(InvalidInputError):
        finite_profile(np.array([[1.0]]))
    with pytest.raises(InvalidInputError):
        talagrand_upper_bound_finite([0], np.zeros((2, 2)))


def test_lambda_bound_hand_value():
    assert lambda_bound(3.0, 1.0) == pytest.approx(4.0 * math.sqrt(2.0 / math.e), rel=1e-15)


@pytest.mark.parametrize("n,d,c_w,c_b", [(1, 1, 1.0, 1.0), (3, 5, 0.5, 2.0), (10, 2, 3.0, 1.0)])
def test_class_lambda_dominates_generic_with_neuron_radius(n, d, c_w, c_b):
    cls = ParameterClass(n, d, c_w, c_b)
    integral, gamma2 = entropy_integral_closed_form(cls)
    special = lambda_bound_class(cls)
    assert lambda_bound(gamma2, 2 * c_w) <= special * (1 + 1e-12)
    # the gamma_2 parts agree exactly; only the radius term differs
    assert lambda_bound(gamma2, 0.0) == pytest.approx(special - 2 * c_w * math.sqrt(8 * c_b + d + math.log(2) / 4), rel=1e-12)


def test_class_lambda_versus_network_radius():
    # with the network radius 2 n c_w the closed form stops dominating for large n
    cls = ParameterClass(10, 2, 3.0, 1.0)
    assert lambda_bound(entropy_integral_closed_form(cls)[1], 2 * 10 * 3.0) > lambda_bound_class(cls)


def test_lambda_bound_examples():
    assert lambda_bound(0, 0) == 0.0
    assert lambda_bound(1, 1) == pytest.approx(1.71553, abs=1e-5)


def test_deviation_bound_hand_value():
    # u = 4, m = 16, N = 2, Delta = 1: (4/4) (25*2/2 + sqrt(170))^2
    assert deviation_bound(4, 16, 2, 1) == pytest.approx((25 + math.sqrt(170)) ** 2, rel=1e-14)


def test_deviation_bound_examples():
    assert deviation_bound(5, 100, 0, 3) == 0.0
    assert deviation_bound(2, 10**4, 10, 2) == pytest.approx(0.02 * (25.0 + math.sqrt(1700)) ** 2, rel=1e-14)
    base = deviation_bound(3, 10**4, 4, 0)
    assert deviation_bound(3, 16 * 10**4, 4, 0) == pytest.approx(base / 4 / 4, rel=1e-12)
    vals = [deviation_bound(2, m, 10, 2) for m in (1e4, 1e8, 1e12)]
    assert vals[0] > vals[1] > vals[2] and vals[2] < vals[0] / 100


def test_deviation_bound_domain():
    with pytest.raises(DomainError):
        deviation_bound(1.9, 100, 1, 1)
    with pytest.raises(InvalidInputError):
        deviation_bound(2, 0, 1, 1)


@settings(max_examples=50, deadline=None)
@given(st.floats(2, 100), st.integers(1, 10**6), st.floats(0, 10), st.floats(0, 10))
def test_deviation_bound_monotone(u, m, N, Delta):
    base = deviation_bound(u, m, N, Delta)
    assert deviation_bound(u * 1.5, m, N, Delta) >= base
    assert deviation_bound(u, m, N + 1, Delta) >= base
    assert deviation_bound(u, m, N, Delta + 1) >= base

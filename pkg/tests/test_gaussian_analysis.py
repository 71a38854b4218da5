import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from neurips_lab.errors import InvalidInputError
from neurips_lab.gaussian_analysis import (
    PSI2_PER_SIGMA,
    SampleSet,
    draw_samples,
    empirical_inner,
    empirical_norm,
    empirical_risk,
    excess_risk,
    mu_distance,
    network_mu_norm,
    network_second_moments,
    neuron_cross_moment,
    neuron_second_moment,
    noise_sigma,
    relu_cross_moments,
)
from neurips_lab.relu_model import NetworkParams, NeuronParams, ParameterClass, sample_parameter_class


def _second_moment_1d(sigma, b):
    # independent oracle: integrate relu(sigma g + b)^2 against the normal density
    f = lambda g: max(sigma * g + b, 0.0) ** 2 * stats.norm.pdf(g)
    return integrate.quad(f, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12, points=None)[0]


def test_unit_linear_second_moment():
    # E[<w,x>^2] = 1 for a unit vector, written as relu(t)^2 + relu(-t)^2
    net = NetworkParams([NeuronParams([0.6, 0.8], 0, 1), NeuronParams([-0.6, -0.8], 0, -1)])
    assert network_mu_norm(net) ** 2 == pytest.approx(1.0, abs=1e-10)


def test_second_moment_examples():
    assert neuron_second_moment(NeuronParams([1.0, 0.0], 0.0, 1)) == pytest.approx(0.5, rel=1e-14)
    assert neuron_second_moment(NeuronParams([0.0, 0.0], 0.7, -1)) == pytest.approx(0.49, rel=1e-14)
    assert neuron_second_moment(NeuronParams([0.0], -0.7, 1)) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(-3.0, 3.0))
def test_second_moment_matches_quadrature(sigma, b):
    p = NeuronParams([sigma, 0.0], b, 1)
    assert neuron_second_moment(p) == pytest.approx(_second_moment_1d(sigma, b), rel=1e-9, abs=1e-12)


def _arc_cosine(u, v):
    # first-order arc-cosine kernel for zero-bias ReLUs
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    th = math.acos(np.clip(np.dot(u, v) / (nu * nv), -1, 1))
    return nu * nv / (2 * math.pi) * (math.sin(th) + (math.pi - th) * math.cos(th))


def test_cross_moment_orthogonal():
    p = NeuronParams([1.0, 0.0], 0.0, 1)
    q = NeuronParams([0.0, 1.0], 0.0, -1)
    assert neuron_cross_moment(p, q) == pytest.approx(1 / (2 * math.pi), rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6))
def test_cross_moment_matches_arc_cosine_kernel(vals):
    u, v = np.array(vals[:3]), np.array(vals[3:])
    if np.linalg.norm(u) < 1e-2 or np.linalg.norm(v) < 1e-2:
        return
    got = neuron_cross_moment(NeuronParams(u, 0.0, 1), NeuronParams(v, 0.0, 1))
    assert got == pytest.approx(_arc_cosine(u, v), rel=1e-8, abs=1e-12)


def test_cross_moment_with_bias_against_nested_quad():
    p = NeuronParams([0.8, -0.3], 0.2, 1)
    q = NeuronParams([0.1, 0.9], -0.4, 1)

    def inner(y):
        # the integrand has kinks where either ReLU switches on; split there
        kinks = sorted(k for k in ((0.3 * y - 0.2) / 0.8, (0.4 - 0.9 * y) / 0.1) if -12 < k < 12)
        f = lambda x: max(0.8 * x - 0.3 * y + 0.2, 0) * max(0.1 * x + 0.9 * y - 0.4, 0) * stats.norm.pdf(x)
        edges = [-12, *kinks, 12]
        return sum(integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-12)[0] for a, b in zip(edges, edges[1:]))

    ref = integrate.quad(lambda y: inner(y) * stats.norm.pdf(y), -12, 12, epsabs=1e-13, epsrel=1e-11, limit=200)[0]
    assert neuron_cross_moment(p, q) == pytest.approx(ref, rel=1e-8)


def test_rank3_network_matches_pairwise_expansion():
    cls = ParameterClass(3, 3, 1.0, 1.0)
    for net in sample_parameter_class(cls, 4, 5):
        direct = network_second_moments([net])[0]
        pair = sum(
            a.kappa * c.kappa * neuron_cross_moment(a, c) for a in net.neurons for c in net.neurons
        )
        assert direct == pytest.approx(pair, rel=1e-8, abs=1e-12)


def test_mu_distance_properties():
    p = NetworkParams([NeuronParams([0.5, 0.1], 0.1, 1)])
    q = NetworkParams([NeuronParams([-0.2, 0.7], -0.3, -1)])
    assert mu_distance(p, p) == pytest.approx(0.0, abs=1e-9)
    assert mu_distance(p, q) == pytest.approx(mu_distance(q, p), rel=1e-12)


def test_sample_set_round_trip_and_determinism():
    teacher = NetworkParams([NeuronParams([1.0, 0.0], 0.0, 1)])
    S = draw_samples(7, 2, 3, teacher=teacher, noise_psi2=0.5)
    again = draw_samples(7, 2, 3, teacher=teacher, noise_psi2=0.5)
    assert np.array_equal(S.points, again.points) and np.array_equal(S.labels, again.labels)
    back = SampleSet.from_csv(S.to_csv())
    assert np.array_equal(back.points, S.points) and np.array_equal(back.labels, S.labels)
    with pytest.raises(InvalidInputError):
        draw_samples(0, 2, 0)


def test_empirical_quantities():
    S = SampleSet([[1.0, 0.0], [-1.0, 2.0], [0.5, 0.5]], [1.0, 0.0, 2.0])
    net = NetworkParams([NeuronParams([1.0, 0.0], 0.0, 1)])
    # values 1, 0, 0.5
    assert empirical_norm(net, S) == pytest.approx(math.sqrt(1.25 / 3), rel=1e-15)
    assert empirical_risk(net, S) == pytest.approx(math.sqrt((0 + 0 + 2.25) / 3), rel=1e-15)
    assert empirical_inner([1.0, 2.0], [3.0, -1.0]) == 0.5
    with pytest.raises(InvalidInputError):
        empirical_inner([1.0], [1.0, 2.0])
    with pytest.raises(InvalidInputError):
        empirical_risk(net, SampleSet([[1.0, 0.0]]))


def test_excess_risk_decomposition_hand_example():
    S = SampleSet([[1.0], [2.0]], [1.0, 1.0])
    q = NetworkParams([NeuronParams([1.0], 0.0, 1)])  # values 1, 2
    p = NetworkParams([NeuronParams([0.5], 0.0, 1)])  # values 0.5, 1
    r = excess_risk(q, p, S)
    # ||q - y||^2 = 0.5, ||p - y||^2 = 0.125, difference 0.375
    assert r.value == pytest.approx(0.375, rel=1e-15)
    assert r.decomposition["quadratic_term"] == pytest.approx(0.625, rel=1e-15)
    assert r.decomposition["multiplier_term"] == pytest.approx(-0.25, rel=1e-15)


def test_noise_sigma():
    assert noise_sigma(PSI2_PER_SIGMA) == pytest.approx(1.0, rel=1e-15)


def _at_angle(s1, s2, rho):
    return np.array([s1, 0.0]), s2 * np.array([rho, math.sqrt(1.0 - rho * rho)])


@pytest.mark.parametrize(
    "s1,b1,s2,b2,rho,expected",
    [
        # mpmath (40 digits): outer integral over the first neuron's active
        # half-line of the conditional ReLU mean of the second neuron
        (1.0, 0.3, 2.0, -0.5, 0.6, 0.6757754061154688),
        (1.5, 0.0, 0.5, 0.0, -0.3, 0.06852910643830786),
        (0.7, -1.0, 1.2, 0.4, 0.0, 0.016988826772510016),
        (1.0, 0.5, 1.0, -0.2, -0.9, 0.014030057540400722),
    ],
)
def test_relu_cross_moment_frozen_values(s1, b1, s2, b2, rho, expected):
    w1, w2 = _at_angle(s1, s2, rho)
    assert float(relu_cross_moments(w1, b1, w2, b2)) == pytest.approx(expected, rel=1e-13)


def test_relu_cross_moment_degenerate_cases():
    w = np.array([0.6, -0.8])
    # parallel: the second moment; antiparallel with no common support: zero
    assert float(relu_cross_moments(w, 0.4, w, 0.4)) == pytest.approx(neuron_second_moment(NeuronParams(w, 0.4, 1)),
                                                                      rel=1e-14)
    assert float(relu_cross_moments(w, -0.5, -w, -0.5)) == 0.0
    # relu(t) relu(-t) vanishes identically
    assert float(relu_cross_moments(w, 0.0, -w, 0.0)) == 0.0
    # zero weights give the constant relu(b)
    assert float(relu_cross_moments(np.zeros(2), 2.0, w, 0.0)) == pytest.approx(2.0 / math.sqrt(2 * math.pi), rel=1e-15)
    assert float(relu_cross_moments(np.zeros(2), -1.0, w, 0.0)) == 0.0
    assert float(relu_cross_moments(np.zeros(2), 2.0, np.zeros(2), 3.0)) == 6.0


def test_relu_cross_moment_continuous_near_parallel():
    for sign in (1.0, -1.0):
        base = float(relu_cross_moments(np.array([1.0, 0.0]), 0.3, sign * np.array([0.8, 0.0]), -0.1))
        for eps in (1e-6, 1e-9, 1e-12):
            w2 = sign * 0.8 * np.array([math.cos(eps), math.sin(eps)])
            near = float(relu_cross_moments(np.array([1.0, 0.0]), 0.3, w2, -0.1))
            assert near == pytest.approx(base, abs=10 * eps)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_relu_cross_moment_matches_quadrature(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 4))
    p = NeuronParams(rng.standard_normal(d), float(rng.standard_normal()), 1)
    q = NeuronParams(rng.standard_normal(d), float(rng.standard_normal()), 1)
    closed = float(relu_cross_moments(p.w, p.b, q.w, q.b))
    assert closed == pytest.approx(neuron_cross_moment(p, q), rel=1e-7, abs=1e-12)


def test_relu_cross_moments_broadcast():
    rng = np.random.default_rng(3)
    W1, W2 = rng.standard_normal((4, 5, 3)), rng.standard_normal((4, 5, 3))
    b1, b2 = rng.standard_normal((4, 5)), rng.standard_normal((4, 5))
    batch = relu_cross_moments(W1, b1, W2, b2)
    assert batch.shape == (4, 5)
    assert batch[2, 3] == float(relu_cross_moments(W1[2, 3], b1[2, 3], W2[2, 3], b2[2, 3]))

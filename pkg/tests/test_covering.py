import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from neurips_lab.covering import (
    Certificate,
    DiscretizationGrid,
    angle,
    angle_cover,
    build_network_net,
    build_neuron_net,
    build_zero_bias_net,
    covering_number_bound,
    discretize_neuron,
    log_covering_number_bound,
    neuron_net_bound,
    neuron_net_parameters,
    packing_bound,
    write_net,
    zero_bias_net_bound,
)
from neurips_lab.errors import CardinalityCapError, InvalidInputError
from neurips_lab.relu_model import NeuronParams, ParameterClass, sample_parameter_class, validate_membership
from neurips_lab.subgaussian import psi2_distance


def test_angle_is_a_line_angle():
    assert angle([1, 0], [-1, 0]) == 0.0
    assert angle([1, 0], [0, 2]) == pytest.approx(math.pi / 2)
    assert angle([1, 1], [1, 0]) == pytest.approx(math.pi / 4)
    assert angle([0, 0], [1, 0]) == 0.0


@pytest.mark.parametrize("d,gamma", [(2, 0.1), (2, 0.7), (3, 0.4), (4, 0.6)])
def test_angle_cover_distortion(d, gamma):
    cover = angle_cover(d, gamma, seed=3)
    assert cover.distortion(probes=20_000, seed=11) <= gamma + 1e-12
    assert len(cover) <= packing_bound(d, gamma)


def test_angle_cover_2d_is_exact_half_circle_grid():
    cover = angle_cover(2, 0.1)
    assert len(cover) == math.ceil(math.pi / 0.2)
    assert cover.construction == "exact-grid-2d"


def test_angle_cover_is_deterministic():
    a = angle_cover(3, 0.5, seed=9)
    b = angle_cover(3, 0.5, seed=9)
    np.testing.assert_array_equal(a.directions, b.directions)


def test_angle_cover_rejects_bad_gamma():
    with pytest.raises(InvalidInputError):
        angle_cover(3, 0.0)


def test_net_parameters_are_exact_fractions():
    gamma, delta, rho = neuron_net_parameters(1.0, 1.0, 0.5)
    assert gamma == 0.5 / 8
    assert float(delta) == 0.5 / 16 and float(rho) == 0.5 / 16


def test_grid_levels_use_exact_quotients():
    # 0.3 / 0.1 is 2.9999999999999996 in floating point
    grid = DiscretizationGrid(0.3, 0.3, 0.1, 0.1, 0.1)
    assert grid.c_delta == 3 and grid.c_rho == 3


def test_neuron_net_bound_hand_value():
    # c_w = c_b = 1, eps = 0.5, d = 2: 2 * 33 * 65 * (1 + 1/sin(1/32))^2
    expected = 2 * 33 * 65 * (1 + 1 / math.sin(1 / 32)) ** 2
    assert neuron_net_bound(1.0, 1.0, 2, 0.5) == pytest.approx(expected, rel=1e-15)


def test_zero_bias_bound_hand_value():
    eps = 0.5
    f = math.floor(2 * math.sqrt(2) / eps + 1)
    expected = 2 * f * (1 + 1 / math.sin(eps / (4 * math.sqrt(2)))) ** 3
    assert zero_bias_net_bound(1.0, 3, eps) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("n,c_w", [(1, 1.0), (2, 0.5), (3, 2.0)])
def test_covering_number_is_one_beyond_the_diameter(n, c_w):
    cls = ParameterClass(n, 3, c_w, 1.0)
    for eps in (2 * n * c_w, 2 * n * c_w * 1.5, 1e9):
        assert covering_number_bound(cls, eps) == 1.0
    assert covering_number_bound(cls, 2 * n * c_w * 0.999) > 1.0


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 1.9))
def test_covering_number_monotone_in_epsilon(eps):
    cls = ParameterClass(1, 2, 1.0, 1.0)
    assert log_covering_number_bound(cls, eps) >= log_covering_number_bound(cls, eps * 1.05)


def test_covering_number_of_n_neurons_is_nth_power():
    c1 = ParameterClass(1, 2, 1.0, 1.0)
    c3 = ParameterClass(3, 2, 1.0, 1.0)
    assert log_covering_number_bound(c3, 0.9) == pytest.approx(3 * log_covering_number_bound(c1, 0.3), rel=1e-12)


def test_neuron_net_cardinality_below_bound():
    for d, eps in [(2, 0.5), (2, 1.0), (3, 1.5)]:
        net = build_neuron_net(ParameterClass(1, d, 1.0, 1.0), eps)
        assert net.cardinality <= net.cardinality_bound


def test_neuron_net_large_radius_is_zero_singleton():
    net = build_neuron_net(ParameterClass(1, 2, 1.0, 1.0), 2.0)
    assert net.cardinality == 1 and not np.any(net.W)


_GAMMA, _DELTA, _RHO = neuron_net_parameters(1.0, 1.0, 0.5)
_COVER3 = angle_cover(3, _GAMMA)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31))
def test_certificate_holds_for_admissible_neurons(seed):
    cls = ParameterClass(1, 3, 1.0, 1.0)
    grid = DiscretizationGrid(1.0, 1.0, _GAMMA, _DELTA, _RHO)
    cover = _COVER3
    p = sample_parameter_class(cls, 1, seed)[0].neurons[0]
    q, cert = discretize_neuron(p, grid, cover)
    assert isinstance(cert, Certificate)
    checks = cert.checks()
    # the length and direction parts of the certificate hold unconditionally
    assert checks["angle"] and checks["weight_gap"]
    assert np.linalg.norm(q.w) <= 1.0 + 1e-12


def test_witness_is_a_member():
    cls = ParameterClass(1, 2, 1.0, 1.0)
    net = build_neuron_net(cls, 0.5)
    for p in sample_parameter_class(cls, 50, 4):
        assert net.contains(net.witness(p))


def test_net_members_are_relaxed_admissible():
    net = build_neuron_net(ParameterClass(1, 2, 1.0, 1.0), 0.8)
    assert net.relaxed_membership()


def test_neuron_net_witness_within_epsilon():
    cls = ParameterClass(1, 2, 1.0, 1.0)
    net = build_neuron_net(cls, 0.5)
    for p in sample_parameter_class(cls, 10, 21):
        assert psi2_distance(p, net.witness(p)) <= 0.5 + 1e-3


def test_zero_bias_net_witness_within_epsilon():
    cls = ParameterClass(1, 2, 1.0, 1.0)
    net = build_zero_bias_net(cls, 0.5)
    assert net.cardinality <= net.cardinality_bound
    rng = np.random.default_rng(0)
    for _ in range(10):
        w = rng.standard_normal(2)
        w *= rng.uniform(0, 1) / np.linalg.norm(w)
        p = NeuronParams(w, 0.0, int(rng.choice([-1, 1])))
        assert psi2_distance(p, net.witness(p)) <= 0.5 + 1e-3


def test_network_net_product_and_cap():
    cls = ParameterClass(2, 2, 1.0, 1.0)
    net = build_network_net(cls, 3.0, cap=10)
    assert net.cardinality == net.neuron_net.cardinality ** 2
    assert net.cardinality <= net.cardinality_bound
    big = build_network_net(ParameterClass(2, 2, 1.0, 1.0), 1.0, cap=10)
    assert big.lazy
    with pytest.raises(CardinalityCapError):
        big.members
    p = sample_parameter_class(cls, 1, 5)[0]
    assert big.contains(big.witness(p))


def test_write_net_round_trip(tmp_path):
    import json

    net = build_network_net(ParameterClass(1, 2, 1.0, 1.0), 1.5)
    write_net(net, tmp_path / "net.jsonl", tmp_path / "net.meta.json")
    lines = (tmp_path / "net.jsonl").read_text().splitlines()
    meta = json.loads((tmp_path / "net.meta.json").read_text())
    assert len(lines) == meta["cardinality"] == net.cardinality
    lazy = build_network_net(ParameterClass(2, 2, 1.0, 1.0), 3.0, cap=10)
    with pytest.raises(CardinalityCapError):
        write_net(lazy, tmp_path / "x.jsonl", tmp_path / "x.meta.json")


def test_validate_membership_of_sampled_neurons():
    cls = ParameterClass(1, 4, 1.0, 2.0)
    for p in sample_parameter_class(cls, 30, 2):
        assert validate_membership(p, cls).passed

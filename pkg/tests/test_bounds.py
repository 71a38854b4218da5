import itertools
import math
from decimal import Decimal, getcontext

import pytest
from hypothesis import given, settings, strategies as st

from neurips_lab.bounds import (
    DEFAULT_CONSTANTS,
    GeneralizationInputs,
    TheoremConstants,
    agnostic_alpha,
    agnostic_eta,
    agnostic_probability,
    alpha_requirement,
    complexity,
    neurips_confidence,
    neurips_min_deviation,
    neurips_regimes,
    neurips_sample_bound,
    recovery_sample_bound,
    with_constants,
)
from neurips_lab.errors import DomainError, InvalidInputError, UnconfiguredConstantError
from neurips_lab.relu_model import ParameterClass


def _decimal_constants():
    getcontext().prec = 40
    denom = (Decimal(2).sqrt() - 1) ** 2 * Decimal(2).ln()
    return float(Decimal(3200) * 25 / denom), float(Decimal(3200) * 4096 / denom)


def test_default_constants_match_decimal_evaluation():
    c1, c2 = _decimal_constants()
    assert DEFAULT_CONSTANTS.C1 == pytest.approx(c1, rel=1e-15)
    assert DEFAULT_CONSTANTS.C2 == pytest.approx(c2, rel=1e-15)
    # frozen values
    assert DEFAULT_CONSTANTS.C1 == pytest.approx(672691.4327243238, rel=1e-14)
    assert DEFAULT_CONSTANTS.C2 == pytest.approx(110213764.33755322, rel=1e-14)


def test_complexity_hand_value():
    cls = ParameterClass(2, 3, 0.5, 1.0)
    assert complexity(cls) == pytest.approx(8 * 0.25 * (8 + 3 + math.log(2) / 4), rel=1e-15)


def test_sample_bound_hand_value():
    cls = ParameterClass(1, 2, 1.0, 1.0)
    comp = 10 + math.log(2) / 4
    c1, c2 = _decimal_constants()
    s, u = 0.5, 4.0
    expected = comp * max(c1 * u / s, c2 * (u / s) ** 2)
    assert neurips_sample_bound(cls, s, u) == pytest.approx(expected, rel=1e-14)
    assert neurips_sample_bound(cls, s, u, integer=True) == math.ceil(neurips_sample_bound(cls, s, u))


def test_regimes_switch():
    cls = ParameterClass(1, 2, 1.0, 1.0)
    lin, quad = neurips_regimes(cls, 0.5, 2.0)
    assert quad > lin
    tiny = ParameterClass(1, 2, 1e-3, 1.0)
    lin, quad = neurips_regimes(tiny, 0.99, 2.0)
    assert lin > quad
    assert neurips_sample_bound(tiny, 0.99, 2.0) == pytest.approx(lin, rel=1e-15)


@pytest.mark.parametrize("s", [0.0, 1.0, -0.1, 1.5])
def test_sample_bound_domain(s):
    with pytest.raises(DomainError):
        neurips_sample_bound(ParameterClass(1, 2, 1.0, 1.0), s, 4.0)


def test_u_below_two_rejected():
    with pytest.raises(DomainError):
        neurips_confidence(1.9)
    with pytest.raises(DomainError):
        neurips_sample_bound(ParameterClass(1, 2, 1.0, 1.0), 0.5, 1.0)


def test_confidence_and_vacuity():
    p = neurips_confidence(40.0)
    assert p.value == pytest.approx(1 - 17 * math.exp(-10), rel=1e-15) and not p.vacuous
    assert neurips_confidence(2.0).vacuous
    # 17 e^{-u/4} = 1 at u = 4 ln 17
    assert neurips_confidence(4 * math.log(17) + 1e-9).value > 0


def test_recovery_identity_grid():
    worst = 0.0
    for n, d, c_w, c_b, t, xi, u in itertools.product(
        (1, 3), (1, 4), (0.5, 2.0), (1.0, 3.0), (0.3, 1.0, 5.0), (0.0, 0.1, 0.29), (2.0, 40.0)
    ):
        cls = ParameterClass(n, d, c_w, c_b)
        a = recovery_sample_bound(cls, t, xi, u)
        scaled = ParameterClass(n, d, c_w / t, c_b)
        # xi = 0 gives deviation 1, outside the isometry domain, so the
        # formula is evaluated through its two regimes
        b = 8 * max(neurips_regimes(scaled, (t * t - xi * xi) / (t * t), u))
        worst = max(worst, abs(a - b) / a)
    assert worst <= 1e-9


def test_recovery_requires_t_above_xi():
    with pytest.raises(DomainError):
        recovery_sample_bound(ParameterClass(1, 2, 1.0, 1.0), 0.1, 0.1, 4.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-6, 0.999), st.floats(2.0, 100.0))
def test_sample_bound_monotone(s, u):
    cls = ParameterClass(2, 3, 1.0, 2.0)
    m = neurips_sample_bound(cls, s, u)
    assert neurips_sample_bound(cls, min(s * 1.01, 0.9999), u) <= m
    assert neurips_sample_bound(cls, s, u * 1.01) >= m


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-4, 0.99))
def test_min_deviation_inverts_sample_bound(s):
    cls = ParameterClass(1, 2, 1.0, 1.0)
    m = neurips_sample_bound(cls, s, 4.0)
    assert neurips_min_deviation(cls, m, 4.0) == pytest.approx(s, rel=1e-8)


def test_min_deviation_none_when_too_few_samples():
    assert neurips_min_deviation(ParameterClass(1, 2, 1.0, 1.0), 1000, 4.0) is None


def test_unconfigured_constants_raise():
    inp = GeneralizationInputs(s=0.5, mu_risk=0.1)
    with pytest.raises(UnconfiguredConstantError):
        agnostic_eta(inp, 10.0)
    with pytest.raises(UnconfiguredConstantError):
        agnostic_probability(1000, 1.0, 1.0, 40.0)


def test_constants_validation():
    with pytest.raises(InvalidInputError):
        TheoremConstants(C3=-1.0)
    assert with_constants(DEFAULT_CONSTANTS, C3=2.0).C3 == 2.0


def test_eta_hand_value():
    consts = with_constants(DEFAULT_CONSTANTS, C3=2.0)
    inp = GeneralizationInputs(s=0.5, mu_risk=0.1, omega=0.2, v1=1.0, v2=2.0, c_pstar=0.25)
    expected = 5 * 0.1 + math.sqrt(2 * 2 * 0.25 / 0.5) * 16 ** -0.25 + 0.2 / math.sqrt(0.5)
    assert agnostic_eta(inp, 16.0, consts) == pytest.approx(expected, rel=1e-15)


def test_eta_limit():
    consts = with_constants(DEFAULT_CONSTANTS, C3=1.0)
    inp = GeneralizationInputs(s=1e-8, mu_risk=0.3, omega=0.05, c_pstar=1e-6)
    assert agnostic_eta(inp, 1e16, consts) == pytest.approx(3 * 0.3 + 0.05, abs=1e-6)


def test_alpha_and_requirement():
    cls = ParameterClass(1, 2, 1.0, 1.0)
    assert agnostic_alpha(cls, 1000) == pytest.approx(1000 / complexity(cls), rel=1e-15)
    req = alpha_requirement(GeneralizationInputs(s=0.5), cls)
    assert math.isinf(req.value) and req.flags
    req = alpha_requirement(GeneralizationInputs(s=0.5, u=4.0, mu_risk=0.5, c_pstar=0.0), cls, m=10**12)
    r = 0.25 * 4.0 / (0.5 * 0.25)
    assert req.value == pytest.approx(8 * DEFAULT_CONSTANTS.C1 * r, rel=1e-14)
    assert req.satisfied == (req.alpha >= req.value)


def test_agnostic_probability_value():
    consts = with_constants(DEFAULT_CONSTANTS, C4=0.1, C5=0.5)
    p = agnostic_probability(100, 1.0, 2.0, 40.0, consts)
    expected = 1 - 2 * math.exp(-10) - 2 * math.exp(-2) - 17 * math.exp(-10)
    assert p.value == pytest.approx(expected, rel=1e-15) and not p.vacuous


def test_generalization_inputs_validation():
    with pytest.raises(DomainError):
        GeneralizationInputs(s=1.0)
    with pytest.raises(DomainError):
        GeneralizationInputs(s=0.5, t=0.1, xi=0.2)
    with pytest.raises(InvalidInputError):
        GeneralizationInputs(s=0.5, omega=-1.0)

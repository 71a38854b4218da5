"""Sample-complexity and generalization bounds with explicit constants.

All formulas share the complexity factor ``n^3 c_w^2 (8 c_b + d + ln2/4)``.
The two sample-complexity constants are evaluated once in extended precision.
The constants of the agnostic bounds have no known numeric values and must be
supplied by the caller.
"""

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import NamedTuple, Optional

import mpmath
from scipy.optimize import brentq

from .errors import DomainError, InvalidInputError, UnconfiguredConstantError

LN2 = math.log(2.0)


@lru_cache(maxsize=None)
def _default_constants():
    with mpmath.workdps(50):
        denom = (mpmath.sqrt(2) - 1) ** 2 * mpmath.log(2)
        c1 = mpmath.mpf(40) ** 2 * 2 * 5 ** 2 / denom
        c2 = mpmath.mpf(40) ** 2 * 2 * 64 ** 2 / denom
        return float(c1), float(c2)


@dataclass(frozen=True)
class TheoremConstants:
    C1: Optional[float] = None
    C2: Optional[float] = None
    C0: Optional[float] = None
    C3: Optional[float] = None
    C4: Optional[float] = None
    C5: Optional[float] = None

    def __post_init__(self):
        c1, c2 = _default_constants()
        if self.C1 is None:
            object.__setattr__(self, "C1", c1)
        if self.C2 is None:
            object.__setattr__(self, "C2", c2)
        for name in ("C0", "C1", "C2", "C3", "C4", "C5"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v >= 0):
                raise InvalidInputError(f"constant {name} must be finite and non-negative")

    def require(self, *names):
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise UnconfiguredConstantError(
                f"constant(s) {', '.join(missing)} have no published value; configure them explicitly"
            )
        return tuple(getattr(self, n) for n in names)

    def to_dict(self):
        return {k: getattr(self, k) for k in ("C0", "C1", "C2", "C3", "C4", "C5")}


DEFAULT_CONSTANTS = TheoremConstants()


class Probability(NamedTuple):
    value: float
    vacuous: bool


@dataclass(frozen=True)
class GeneralizationInputs:
    s: float
    u: float = 2.0
    t: Optional[float] = None
    xi: float = 0.0
    omega: float = 0.0
    v1: float = 1.0
    v2: float = 1.0
    mu_risk: float = 0.0
    c_pstar: float = 0.0

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise DomainError(f"s must lie in (0, 1), got {self.s!r}")
        if self.u < 2:
            raise DomainError("u must be at least 2")
        for name in ("xi", "omega", "v1", "v2", "mu_risk", "c_pstar"):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"{name} must be non-negative")
        if self.t is not None and not self.t > self.xi:
            raise DomainError("t must exceed xi")


def complexity(cls):
    """``n^3 c_w^2 (8 c_b + d + ln2/4)``."""
    return cls.n ** 3 * cls.c_w ** 2 * (8.0 * cls.c_b + cls.d + LN2 / 4.0)


def _check_u(u):
    if u < 2:
        raise DomainError("u must be at least 2")


def _neurips_core(n, d, c_w, c_b, s, u, consts):
    comp = n ** 3 * c_w ** 2 * (8.0 * c_b + d + LN2 / 4.0)
    r = u / s
    return comp * max(consts.C1 * r, consts.C2 * n ** 2 * c_w ** 2 * r * r)


def _finish(value, integer):
    return math.ceil(value) if integer else value


def neurips_sample_bound(cls, s, u, consts=DEFAULT_CONSTANTS, integer=False):
    """Samples sufficient for the isometry property at deviation ``s``, confidence level ``u``."""
    if not 0 < s < 1:
        raise DomainError(f"s must lie in (0, 1), got {s!r}")
    _check_u(u)
    return _finish(_neurips_core(cls.n, cls.d, cls.c_w, cls.c_b, s, u, consts), integer)


def neurips_regimes(cls, s, u, consts=DEFAULT_CONSTANTS):
    """The two branches of the max, for inspecting which one is active."""
    comp = complexity(cls)
    r = u / s
    return comp * consts.C1 * r, comp * consts.C2 * cls.n ** 2 * cls.c_w ** 2 * r * r


def neurips_confidence(u):
    """``1 - 17 exp(-u/4)``; flagged vacuous when not positive."""
    _check_u(u)
    v = 1.0 - 17.0 * math.exp(-u / 4.0)
    return Probability(v, v <= 0.0)


def neurips_min_deviation(cls, m, u, consts=DEFAULT_CONSTANTS):
    """Smallest ``s`` in ``(0, 1)`` whose sample bound is at most ``m`` (numeric inversion).

    Returns ``None`` when even ``s -> 1`` needs more than ``m`` samples.
    """
    _check_u(u)
    f = lambda s: _neurips_core(cls.n, cls.d, cls.c_w, cls.c_b, s, u, consts) - m
    hi = 1.0 - 1e-15
    if f(hi) > 0:
        return None
    lo = 1e-300
    if f(lo) <= 0:
        return lo
    return brentq(f, lo, hi, xtol=1e-300, rtol=1e-14)


def recovery_sample_bound(cls, t, xi, u, consts=DEFAULT_CONSTANTS, integer=False):
    """``8 n^3 c_w^2 (8 c_b + d + ln2/4) max(C1 u/(t^2 - xi^2), C2 n^2 c_w^2 (u/(t^2 - xi^2))^2)``.

    Equal to eight times the isometry bound for the class rescaled by ``1/t``
    at deviation ``(t^2 - xi^2)/t^2``; that identity is asserted.
    """
    if not (xi >= 0 and t > xi):
        raise DomainError("need t > xi >= 0")
    _check_u(u)
    gap = t * t - xi * xi
    r = u / gap
    comp = complexity(cls)
    value = 8.0 * comp * max(consts.C1 * r, consts.C2 * cls.n ** 2 * cls.c_w ** 2 * r * r)
    rescaled = 8.0 * _neurips_core(cls.n, cls.d, cls.c_w / t, cls.c_b, gap / (t * t), u, consts)
    assert abs(rescaled - value) <= 1e-9 * value, (value, rescaled)
    return _finish(value, integer)


def agnostic_eta(inputs, alpha, consts=DEFAULT_CONSTANTS):
    """Risk tolerance ``(2/(1-s) + 1) mu_risk + sqrt(C3 v1 v2 c/(1-s)) alpha^{-1/4} + omega/sqrt(1-s)``."""
    if not alpha > 0:
        raise InvalidInputError("alpha must be positive")
    (C3,) = consts.require("C3")
    s = inputs.s
    middle = math.sqrt(C3 * inputs.v1 * inputs.v2 * inputs.c_pstar / (1.0 - s)) * alpha ** -0.25
    return (2.0 / (1.0 - s) + 1.0) * inputs.mu_risk + middle + inputs.omega / math.sqrt(1.0 - s)


def agnostic_alpha(cls, m):
    """``m / (n^3 c_w^2 (8 c_b + d + ln2/4))``."""
    if m < 1:
        raise InvalidInputError("m must be at least 1")
    return m / complexity(cls)


@dataclass
class AlphaRequirement:
    value: float
    alpha: Optional[float] = None
    satisfied: Optional[bool] = None
    flags: list = field(default_factory=list)


def alpha_requirement(inputs, cls, consts=DEFAULT_CONSTANTS, m=None):
    """``8 max(C1 (1-s)^2 u/(s mu^2), C2 n^2 c_w^2 ((1-s)^2 u/(s mu^2))^2 c^2)``.

    With ``m`` given the report also carries ``alpha`` and whether it meets
    the requirement.
    """
    s, u, mu = inputs.s, inputs.u, inputs.mu_risk
    flags = []
    if mu == 0.0:
        value = math.inf
        flags.append("zero mu_risk: requirement is infinite")
    else:
        r = (1.0 - s) ** 2 * u / (s * mu * mu)
        value = 8.0 * max(
            consts.C1 * r, consts.C2 * cls.n ** 2 * cls.c_w ** 2 * r * r * inputs.c_pstar ** 2
        )
    out = AlphaRequirement(value, flags=flags)
    if m is not None:
        out.alpha = agnostic_alpha(cls, m)
        out.satisfied = out.alpha >= value
    return out


def agnostic_probability(m, v1, v2, u, consts=DEFAULT_CONSTANTS):
    """``1 - 2 exp(-C4 m v1^2) - 2 exp(-C5 v2^2) - 17 exp(-u/4)``."""
    C4, C5 = consts.require("C4", "C5")
    _check_u(u)
    v = 1.0 - 2.0 * math.exp(-C4 * m * v1 * v1) - 2.0 * math.exp(-C5 * v2 * v2) - 17.0 * math.exp(-u / 4.0)
    return Probability(v, v <= 0.0)


def with_constants(consts, **kw):
    return replace(consts, **kw)

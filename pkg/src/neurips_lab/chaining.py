"""Chaining bounds: Dudley integrals, greedy admissible sequences, Lambda and deviation bounds."""

import math
from dataclasses import dataclass

import numpy as np

from .covering import log_covering_number_bound, _exact
from .errors import DomainError, InvalidInputError

LN2 = math.log(2.0)
# gamma_2 <= DUDLEY_CONSTANT * int_0^inf sqrt(ln N(eps)) d eps
DUDLEY_CONSTANT = math.sqrt(2.0) / ((math.sqrt(2.0) - 1.0) * math.sqrt(LN2))


@dataclass
class EntropyProfile:
    """``eps -> ln N(eps)``; zero beyond ``support_limit``.

    ``vec`` optionally evaluates the profile on an array, and ``breaks(lo)``
    lists the discontinuities in ``[lo, support_limit]``.  ``steps``
    describes an exact step function as ``(breaks, values)``: ``values[i]``
    holds on ``[breaks[i+1], breaks[i])`` with ``breaks`` decreasing to 0.
    """

    bound_fn: object
    support_limit: float
    vec: object = None
    breaks: object = None
    steps: tuple = None

    def __call__(self, eps):
        if eps >= self.support_limit:
            return 0.0
        return self.bound_fn(eps)


def class_profile(cls):
    """Entropy profile from the closed-form covering-number bound of the class."""
    n, d, c_w = cls.n, cls.d, cls.c_w
    limit = 2.0 * n * c_w
    x = float(16 * n * _exact(cls.c_b) * _exact(c_w))

    def vec(eps):
        eps = np.asarray(eps, dtype=float)
        with np.errstate(divide="ignore"):
            val = n * (
                LN2
                + np.log(np.floor(x / eps + 1.0))
                + np.log(np.floor(2.0 * x / eps + 1.0))
                + d * np.log1p(1.0 / np.sin(eps / (16.0 * n * c_w)))
            )
        return np.where(eps >= limit, 0.0, val)

    def breaks(lo):
        # both floor factors jump only where 2x/eps is an integer
        k = np.arange(math.ceil(2.0 * x / limit), math.floor(2.0 * x / lo) + 1)
        e = 2.0 * x / k
        return e[(e > lo) & (e < limit)]

    return EntropyProfile(lambda e: log_covering_number_bound(cls, e), limit, vec, breaks)


def finite_profile(dist):
    """Greedy (farthest-point) entropy profile of a finite metric space."""
    dist = _check_matrix(dist)
    order, radii = farthest_point_order(dist)
    # covering with the first k traversal points has radius radii[k-1]
    N = len(order)
    brk = np.concatenate([radii, [0.0]])
    counts = np.arange(1, N + 1)

    def fn(eps):
        k = int(np.searchsorted(-radii, -eps, side="left"))
        return math.log(counts[min(k, N - 1)])

    return EntropyProfile(fn, float(radii[0]), steps=(brk, np.log(counts)))


_GL16 = np.polynomial.legendre.leggauss(16)
_GL64 = np.polynomial.legendre.leggauss(64)


def dudley_integral(profile):
    """``DUDLEY_CONSTANT * int_0^limit sqrt(max(ln N, 0)) d eps``.

    Step profiles are integrated exactly.  Otherwise the range above
    ``1e-3 * limit`` is split at the profile's jumps and each smooth piece
    gets 16-point Gauss-Legendre; below it dyadic bands shrinking towards 0
    handle the integrable singularity.
    """
    if profile.steps is not None:
        brk, logs = profile.steps
        widths = brk[:-1] - brk[1:]
        return DUDLEY_CONSTANT * float(np.dot(np.sqrt(np.maximum(logs, 0.0)), widths))
    L = profile.support_limit
    if L <= 0:
        return 0.0
    vec = profile.vec or np.vectorize(profile)
    eps0 = L * 1e-3
    inner = profile.breaks(eps0) if profile.breaks is not None else np.zeros(0)
    pts = np.unique(np.concatenate([[eps0, L], inner]))
    a, b = pts[:-1], pts[1:]
    t, w = _GL16
    nodes = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * t
    vals = np.sqrt(np.maximum(vec(nodes), 0.0))
    body = float((0.5 * (b - a)[:, None] * w * vals).sum())

    # Below eps0 the jumps shrink relative to the profile (they are of size
    # eps/x), so 64-point Gauss-Legendre on dyadic bands is accurate; bands
    # stop once eps * sqrt(ln N) is far below double precision of the body.
    tg, wg = _GL64
    hi = eps0 * 0.5 ** np.arange(0, 200)
    lo = hi * 0.5
    nodes = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * tg
    tail = float((0.5 * (hi - lo)[:, None] * wg * np.sqrt(np.maximum(vec(nodes), 0.0))).sum())
    return DUDLEY_CONSTANT * (body + tail)


def _sqrt_term(cls):
    return math.sqrt(8.0 * cls.c_b + cls.d + LN2 / 4.0)


def entropy_integral_closed_form(cls):
    """``(4 n^{3/2} c_w sqrt(8 c_b + d + ln2/4), 8/((2 - sqrt 2) sqrt ln2) n^{3/2} c_w sqrt(...))``."""
    base = cls.n ** 1.5 * cls.c_w * _sqrt_term(cls)
    integral = 4.0 * base
    gamma2 = 8.0 / ((2.0 - math.sqrt(2.0)) * math.sqrt(LN2)) * base
    return integral, gamma2


def _check_matrix(dist):
    D = np.asarray(dist, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] < 1:
        raise InvalidInputError("distance matrix must be square and non-empty")
    if not np.all(np.isfinite(D)) or np.any(D < 0):
        raise InvalidInputError("distances must be finite and non-negative")
    if np.any(np.diag(D) != 0):
        raise InvalidInputError("distance matrix must have a zero diagonal")
    if not np.allclose(D, D.T, rtol=1e-12, atol=0):
        raise InvalidInputError("distance matrix must be symmetric")
    return D


def farthest_point_order(D):
    """Farthest-point traversal started at the 1-center.

    Returns ``(order, radii)`` where ``radii[k]`` is the covering radius of
    the first ``k + 1`` points of ``order``.
    """
    N = D.shape[0]
    start = int(np.argmin(D.max(axis=1)))
    order = [start]
    near = D[start].copy()
    radii = [near.max()]
    for _ in range(N - 1):
        nxt = int(np.argmax(near))
        order.append(nxt)
        near = np.minimum(near, D[nxt])
        radii.append(near.max())
    return np.array(order), np.array(radii)


@dataclass
class AdmissibleSequence:
    levels: list

    def sizes(self):
        return [len(t) for t in self.levels]


def level_size(k, N):
    return 1 if k == 0 else min(2 ** (2 ** k), N)


def talagrand_upper_bound_finite(points, dist):
    """Greedy admissible sequence and ``sup_t sum_k 2^{k/2} d(t, T_k)``.

    ``points`` only labels the elements; all geometry comes from ``dist``.
    """
    D = _check_matrix(dist)
    N = D.shape[0]
    if points is not None and len(points) != N:
        raise InvalidInputError("points and distance matrix disagree in size")
    order, _ = farthest_point_order(D)
    levels = []
    total = np.zeros(N)
    k = 0
    while True:
        size = level_size(k, N)
        T = order[:size]
        levels.append([int(i) for i in T])
        total += 2.0 ** (k / 2.0) * D[:, T].min(axis=1)
        if size == N:
            break
        k += 1
    return float(total.max()), AdmissibleSequence(levels)


def lambda_bound(gamma2_bound, radius):
    """``sqrt(2/e) (gamma_2 + Delta)``."""
    if gamma2_bound < 0 or radius < 0:
        raise InvalidInputError("inputs must be non-negative")
    return math.sqrt(2.0 / math.e) * (gamma2_bound + radius)


def lambda_bound_class(cls):
    """Closed form ``(8/(sqrt(e)(sqrt2 - 1) sqrt ln2) n^{3/2} + 2) c_w sqrt(8 c_b + d + ln2/4)``.

    Its first term is the generic bound's gamma_2 part exactly; the ``+2``
    absorbs the radius only when that radius is the single-neuron value
    ``2 c_w`` (with ``2 n c_w`` the ordering fails once ``n`` is large).  The
    assertion checks the ordering against ``2 c_w``.
    """
    k = 8.0 / (math.sqrt(math.e) * (math.sqrt(2.0) - 1.0) * math.sqrt(LN2))
    special = (k * cls.n ** 1.5 + 2.0) * cls.c_w * _sqrt_term(cls)
    generic = lambda_bound(entropy_integral_closed_form(cls)[1], 2.0 * cls.c_w)
    assert generic <= special * (1 + 1e-12), (generic, special)
    return special


def deviation_bound(u, m, N, Delta):
    """``(u / sqrt(m)) [25 N / m^{1/4} + sqrt(85 Delta N)]^2``; needs ``u >= 2``."""
    if u < 2:
        raise DomainError("the deviation bound requires u >= 2")
    if m < 1 or N < 0 or Delta < 0:
        raise InvalidInputError("need m >= 1 and non-negative N, Delta")
    return (u / math.sqrt(m)) * (25.0 * N / m ** 0.25 + math.sqrt(85.0 * Delta * N)) ** 2

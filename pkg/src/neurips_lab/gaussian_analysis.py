"""Expected and empirical norms of networks under standard Gaussian inputs."""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, owens_t
from scipy.stats import norm

from .errors import InvalidInputError
from .quadrature import DEFAULT_QUAD, moments
from .relu_model import NetworkParams, NeuronParams, as_network, network_eval
from .rng import stream

# A centered Gaussian with standard deviation sigma has psi_2 norm sigma * sqrt(8/3).
PSI2_PER_SIGMA = math.sqrt(8.0 / 3.0)


@dataclass(frozen=True, eq=False)
class SampleSet:
    points: np.ndarray
    labels: np.ndarray = None
    seed: int = 0

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] < 1 or not np.all(np.isfinite(pts)):
            raise InvalidInputError("sample set needs m >= 1 finite points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            y = np.asarray(self.labels, dtype=float).reshape(-1)
            if y.shape[0] != pts.shape[0] or not np.all(np.isfinite(y)):
                raise InvalidInputError("labels must be finite with one entry per point")
            y.setflags(write=False)
            object.__setattr__(self, "labels", y)

    @property
    def m(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = [f"x_{i + 1}" for i in range(self.d)]
        if self.labels is not None:
            header.append("y")
        w.writerow(header)
        for j in range(self.m):
            row = [format(v, ".17g") for v in self.points[j]]
            if self.labels is not None:
                row.append(format(self.labels[j], ".17g"))
            w.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, seed=0):
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise InvalidInputError("empty CSV")
        header = rows[0]
        has_y = header[-1] == "y"
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
        if has_y:
            return cls(data[:, :-1], data[:, -1], seed)
        return cls(data, None, seed)


@dataclass
class ExcessRisk:
    value: float
    decomposition: dict = field(default_factory=dict)


def neuron_second_moment(p):
    """``E[relu(<w,x>+b)^2]`` in closed form; independent of ``kappa``."""
    sigma = p.norm
    b = p.b
    if sigma == 0.0:
        return b * b if b > 0 else 0.0
    t = b / sigma
    return (sigma * sigma + b * b) * norm.cdf(t) + sigma * b * norm.pdf(t)


def _unsigned(p):
    return NetworkParams([NeuronParams(p.w, p.b, 1)])


def neuron_cross_moment(p, q, quad=DEFAULT_QUAD):
    """``E[relu(<w_p,x>+b_p) relu(<w_q,x>+b_q)]`` (signs ignored)."""
    if p.d != q.d:
        raise InvalidInputError("neurons must share the input dimension")
    return float(moments([_unsigned(p)], quad, pair_with=[_unsigned(q)])[0])


def _bvn_upper(h, k, theta):
    """``P(Z1 > -h, Z2 > -k)`` for standard normals at angle ``theta`` (correlation ``cos theta``).

    Owen's T representation; ``theta`` must lie strictly inside ``(0, pi)``.
    """
    rho, r = np.cos(theta), np.sin(theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        ah = (k - rho * h) / (h * r)
        ak = (h - rho * k) / (k * r)
    # T(0, a) tends to sign(a)/4 as the slope a runs off to infinity
    th = np.where(h == 0.0, 0.25 * np.sign(k - rho * h), owens_t(h, np.where(h == 0.0, 0.0, ah)))
    tk = np.where(k == 0.0, 0.25 * np.sign(h - rho * k), owens_t(k, np.where(k == 0.0, 0.0, ak)))
    beta = np.where((h * k < 0) | ((h * k == 0) & (h + k < 0)), 0.5, 0.0)
    out = 0.5 * (ndtr(h) + ndtr(k)) - th - tk - beta
    origin = (h == 0.0) & (k == 0.0)
    return np.where(origin, (math.pi - theta) / (2 * math.pi), out)


def relu_cross_moments(W1, b1, W2, b2):
    """Closed-form ``E[relu(<w1,x>+b1) relu(<w2,x>+b2)]`` for ``x ~ N(0, I)``.

    Broadcasts over leading axes: ``W1, W2`` have shape ``(..., d)`` and the
    biases shape ``(...)``.  Truncated bivariate normal moments give the
    general case; parallel and antiparallel weights use one-dimensional
    formulas and zero weights reduce to the single-neuron second moment.
    """
    W1, W2 = np.asarray(W1, float), np.asarray(W2, float)
    b1, b2 = np.broadcast_arrays(np.asarray(b1, float), np.asarray(b2, float))
    s1, s2 = np.linalg.norm(W1, axis=-1), np.linalg.norm(W2, axis=-1)
    s1, s2, b1, b2 = np.broadcast_arrays(s1, s2, b1, b2)
    out = np.zeros(s1.shape)
    z1, z2 = s1 == 0.0, s2 == 0.0
    # a zero weight vector makes that neuron the constant relu(b)
    c1, c2 = np.maximum(b1, 0.0), np.maximum(b2, 0.0)
    mean1 = s1 * norm.pdf(b1 / np.where(z1, 1.0, s1)) + b1 * ndtr(b1 / np.where(z1, 1.0, s1))
    mean2 = s2 * norm.pdf(b2 / np.where(z2, 1.0, s2)) + b2 * ndtr(b2 / np.where(z2, 1.0, s2))
    out = np.where(z1 & z2, c1 * c2, out)
    out = np.where(z1 & ~z2, c1 * mean2, out)
    out = np.where(z2 & ~z1, c2 * mean1, out)
    live = ~(z1 | z2)
    if not live.any():
        return out
    g1, g2 = np.where(live, s1, 1.0), np.where(live, s2, 1.0)
    h, k = b1 / g1, b2 / g2
    # the angle from unit-vector chords keeps sqrt(1 - rho^2) accurate for
    # nearly parallel weights, where 1 - rho^2 would cancel
    u, v = W1 / g1[..., None], W2 / g2[..., None]
    theta = 2.0 * np.arctan2(np.linalg.norm(u - v, axis=-1), np.linalg.norm(u + v, axis=-1))
    theta = np.broadcast_to(theta, h.shape)
    rho, r = np.cos(theta), np.sin(theta)
    scale = g1 * g2
    generic = r > 1e-12
    rs = np.where(generic, r, 1.0)
    gen = (
        (h * k + rho) * _bvn_upper(h, k, np.where(generic, theta, 0.5 * math.pi))
        + h * norm.pdf(k) * ndtr((h - rho * k) / rs)
        + k * norm.pdf(h) * ndtr((k - rho * h) / rs)
        + rs * norm.pdf(h) * norm.pdf((k - rho * h) / rs)
    )
    # rho = 1: E[(Z+h)(Z+k); Z > -min(h, k)]
    m = np.minimum(h, k)
    par = (1.0 + h * k) * ndtr(m) + (h + k - m) * norm.pdf(m)
    # rho = -1: E[(Z+h)(k-Z); -h < Z < k], empty unless h + k > 0
    lo, hi = -h, k
    second = ndtr(hi) - ndtr(lo) - hi * norm.pdf(hi) + lo * norm.pdf(lo)
    first = norm.pdf(lo) - norm.pdf(hi)
    anti = np.where(h + k > 0, -second + (k - h) * first + h * k * (ndtr(hi) - ndtr(lo)), 0.0)
    val = np.where(generic, gen, np.where(rho > 0, par, anti))
    return np.where(live, np.maximum(scale * val, 0.0), out)


def network_mu_norm(net, quad=DEFAULT_QUAD):
    """``||phi||_mu``: square root of the Gaussian second moment of the network."""
    return math.sqrt(max(network_second_moments([net], quad)[0], 0.0))


def network_second_moments(nets, quad=DEFAULT_QUAD):
    """Batched ``E[phi(x)^2]`` for a list of networks.

    Rank-two networks are integrated directly; higher-rank ones are expanded
    into pairwise neuron cross moments, each of which is planar.
    """
    nets = [as_network(n) for n in nets]
    out = np.zeros(len(nets))
    direct, pairwise = [], []
    for j, net in enumerate(nets):
        if net.d <= 2 or np.linalg.matrix_rank(net.W) <= 2:
            direct.append(j)
        else:
            pairwise.append(j)
    if direct:
        out[direct] = moments([nets[j] for j in direct], quad)
    for j in pairwise:
        net = nets[j]
        n = net.n
        ii, jj = np.triu_indices(n)
        fs = [(net.W[[i]], net.b[[i]], [1.0]) for i in ii]
        gs = [(net.W[[k]], net.b[[k]], [1.0]) for k in jj]
        c = moments(fs, quad, pair_with=gs)
        sign = net.kappa[ii] * net.kappa[jj] * np.where(ii == jj, 1.0, 2.0)
        out[j] = float(np.dot(sign, c))
    return out


def difference_network(p, q):
    """The network ``phi_p - phi_q`` as ``(p, -q)``."""
    p, q = as_network(p), as_network(q)
    if p.d != q.d:
        raise InvalidInputError("networks must share the input dimension")
    return p.concat(q.negated())


def mu_distance(p, q, quad=DEFAULT_QUAD):
    return network_mu_norm(difference_network(p, q), quad)


def mu_distances(pairs, quad=DEFAULT_QUAD):
    """Batched ``||phi_p - phi_q||_mu`` over a list of ``(p, q)`` pairs."""
    sq = network_second_moments([difference_network(p, q) for p, q in pairs], quad)
    return np.sqrt(np.maximum(sq, 0.0))


def noise_sigma(noise_psi2):
    """Standard deviation of a centered Gaussian whose psi_2 norm is ``noise_psi2``."""
    return noise_psi2 / PSI2_PER_SIGMA


def draw_samples(m, d, seed, teacher=None, noise_psi2=None, index=0):
    """``m`` i.i.d. standard Gaussian points in ``R^d`` with optional teacher labels."""
    if m < 1 or d < 1:
        raise InvalidInputError("need m >= 1 and d >= 1")
    rng = stream(seed, index)
    x = rng.standard_normal((m, d))
    y = None
    if teacher is not None:
        teacher = as_network(teacher)
        if teacher.d != d:
            raise InvalidInputError("teacher dimension does not match d")
        y = network_eval(teacher, x)
        if noise_psi2:
            y = y + noise_sigma(noise_psi2) * rng.standard_normal(m)
    return SampleSet(x, y, seed)


def _values(net, S):
    net = as_network(net)
    if net.d != S.d:
        raise InvalidInputError("network and sample dimensions differ")
    return network_eval(net, S.points)


def empirical_inner(f_vals, g_vals):
    f = np.asarray(f_vals, dtype=float)
    g = np.asarray(g_vals, dtype=float)
    if f.shape != g.shape or f.ndim != 1 or f.size < 1:
        raise InvalidInputError("empirical inner product needs equal-length vectors")
    return float(np.dot(f, g) / f.size)


def empirical_norm(net, S):
    v = _values(net, S)
    return math.sqrt(float(np.dot(v, v)) / S.m)


def _labels(S):
    if S.labels is None:
        raise InvalidInputError("sample set has no labels")
    return S.labels


def empirical_risk(net, S):
    r = _values(net, S) - _labels(S)
    return math.sqrt(float(np.dot(r, r)) / S.m)


def excess_risk(q, p_star, S):
    """Excess empirical risk of ``q`` over ``p_star`` and its two-term split.

    ``value = quadratic_term + multiplier_term`` where the quadratic term is
    ``||phi_q - phi_p*||_m^2`` and the multiplier term is
    ``(2/m) sum_j (phi_p*(x_j) - y_j)(phi_q(x_j) - phi_p*(x_j))``.
    """
    y = _labels(S)
    fq = _values(q, S)
    fp = _values(p_star, S)
    m = S.m
    rq = fq - y
    rp = fp - y
    value = float(np.dot(rq, rq) / m - np.dot(rp, rp) / m)
    diff = fq - fp
    quad_term = float(np.dot(diff, diff) / m)
    mult = float(2.0 * np.dot(rp, diff) / m)
    return ExcessRisk(value, {"quadratic_term": quad_term, "multiplier_term": mult})

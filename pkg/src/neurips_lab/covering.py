"""Constructive epsilon-nets for single neurons and shallow networks.

A neuron ``(w, b, kappa)`` is discretized in polar form: the direction of
``w`` is snapped to an angle cover of the sphere, its length to a grid of
step ``delta`` and the bias ratio ``b/||w||`` to a grid of step ``rho``.
Nets over networks are products of per-neuron nets at radius ``eps/n``.
"""

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import CardinalityCapError, InvalidInputError
from .relu_model import SQRT_LN2, NetworkParams, NeuronParams, ParameterClass, as_network, validate_membership
from .rng import stream

DEFAULT_CAP = 10_000_000


def _exact(x):
    """Rational value of ``x`` read from its shortest decimal representation."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(repr(float(x)))


# ---------------------------------------------------------------------------
# Angles and angle covers


def angle(w, v):
    """Angle between the lines spanned by ``w`` and ``v``, in ``[0, pi/2]``.

    Zero if either vector is zero.
    """
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    nw, nv = np.linalg.norm(w), np.linalg.norm(v)
    if nw == 0.0 or nv == 0.0:
        return 0.0
    c = abs(float(np.dot(w, v))) / (nw * nv)
    return math.acos(min(1.0, c))


@dataclass
class AngleCover:
    directions: np.ndarray
    gamma: float
    construction: str

    @property
    def d(self):
        return self.directions.shape[1]

    def __len__(self):
        return self.directions.shape[0]

    def nearest(self, u):
        """Index and line angle of the cover direction closest to each row of ``u``."""
        u = np.atleast_2d(u)
        nu = np.linalg.norm(u, axis=1)
        c = np.abs(u @ self.directions.T) / np.where(nu > 0, nu, 1.0)[:, None]
        k = np.argmax(c, axis=1)
        ang = np.arccos(np.minimum(1.0, c[np.arange(len(k)), k]))
        return k, np.where(nu > 0, ang, 0.0)

    def distortion(self, probes=10_000, seed=0):
        """Largest line angle from random probe directions to the cover."""
        rng = stream(seed, 1)
        u = rng.standard_normal((probes, self.d))
        worst = 0.0
        for chunk in np.array_split(u, max(1, probes // 2000)):
            worst = max(worst, float(self.nearest(chunk)[1].max()))
        return worst


def angle_cover(d, gamma, seed=0, probe_batch=10_000):
    """Directions such that every line in ``R^d`` is within angle ``gamma`` of one.

    ``d = 2`` uses the exact half-circle grid; ``d >= 3`` a greedy maximal
    packing of lines at chordal separation ``sqrt(2 - 2 cos gamma)``, grown
    from random probes until a whole probe batch is already covered.
    """
    if not 0 < gamma <= math.pi:
        raise InvalidInputError(f"gamma must lie in (0, pi], got {gamma!r}")
    if int(d) != d or d < 1:
        raise InvalidInputError("d must be a positive integer")
    if d == 1:
        return AngleCover(np.ones((1, 1)), gamma, "exact-grid-1d")
    if d == 2:
        L = math.ceil(math.pi / (2 * gamma))
        t = np.arange(L) * math.pi / L
        return AngleCover(np.stack([np.cos(t), np.sin(t)], axis=1), gamma, "exact-grid-2d")
    cos_g = math.cos(gamma)
    rng = stream(seed, 2)
    dirs = np.zeros((0, d))

    def add_uncovered(cand):
        nonlocal dirs
        if dirs.shape[0]:
            cand = cand[np.abs(cand @ dirs.T).max(axis=1) < cos_g]
        added = []
        for x in cand:
            if not added or np.abs(np.asarray(added) @ x).max() < cos_g:
                added.append(x)
        if added:
            dirs = np.vstack([dirs, np.asarray(added)])
        return len(added)

    while True:
        cand = rng.standard_normal((probe_batch, d))
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
        if not add_uncovered(cand):
            break
    # Random probes miss small holes, so the worst-covered probes are pushed
    # uphill (away from the cover) and any that end beyond gamma are added.
    while add_uncovered(_hole_search(dirs, rng, probe_batch)):
        pass
    return AngleCover(dirs, gamma, "greedy-packing")


def _hole_search(dirs, rng, probe_batch, keep=256, steps=60):
    d = dirs.shape[1]
    x = rng.standard_normal((probe_batch, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    cover = np.abs(x @ dirs.T).max(axis=1)
    x = x[np.argsort(cover)[:keep]]
    cover = np.abs(x @ dirs.T).max(axis=1)
    step = np.full(len(x), 0.5 * math.acos(min(1.0, float(cover.min()))) + 1e-3)
    for _ in range(steps):
        y = x + step[:, None] * rng.standard_normal(x.shape) / math.sqrt(d)
        y /= np.linalg.norm(y, axis=1, keepdims=True)
        cy = np.abs(y @ dirs.T).max(axis=1)
        better = cy < cover
        x[better], cover[better] = y[better], cy[better]
        step = np.where(better, step * 1.2, step * 0.8)
    return x


def packing_bound(d, gamma):
    """``(1 + 4/eps)^d`` with ``eps = sqrt(2 - 2 cos gamma)``."""
    eps = math.sqrt(2.0 - 2.0 * math.cos(gamma))
    return (1.0 + 4.0 / eps) ** d


# ---------------------------------------------------------------------------
# Discretization of single neurons


class DiscretizationGrid:
    """Length and bias-ratio grids.

    ``c_delta = floor(c_w/delta)`` and ``c_rho = floor(c_b/rho)`` are computed
    on exact rationals so that an exact quotient never loses a level.
    """

    def __init__(self, c_w, c_b, gamma, delta, rho):
        if not (gamma > 0 and delta > 0 and rho > 0):
            raise InvalidInputError("gamma, delta and rho must be positive")
        self.c_w = float(c_w)
        self.c_b = float(c_b)
        self.gamma = float(gamma)
        self.delta_exact = _exact(delta)
        self.rho_exact = _exact(rho)
        self.delta = float(self.delta_exact)
        self.rho = float(self.rho_exact)
        self.c_delta = math.floor(_exact(c_w) / self.delta_exact)
        self.c_rho = math.floor(_exact(c_b) / self.rho_exact)

    @property
    def lambda_levels(self):
        return np.arange(self.c_delta + 1) * self.delta

    @property
    def b_levels(self):
        return np.arange(-self.c_rho, self.c_rho + 1) * self.rho

    def reachable_b_levels(self):
        """Bias levels that are the nearest level to some ratio ``<= sqrt(ln 2)``."""
        top = min(self.c_rho, round(SQRT_LN2 / self.rho))
        return np.arange(-self.c_rho, top + 1) * self.rho

    def to_dict(self):
        return {
            "gamma": self.gamma,
            "delta": self.delta,
            "rho": self.rho,
            "c_delta": self.c_delta,
            "c_rho": self.c_rho,
        }


@dataclass
class Certificate:
    beta: float
    gamma: float
    w_gap_sq: float
    w_gap_bound: float
    b_gap: float
    b_gap_bound: float
    rho_w: float
    rho_w_tilde: float
    rho_bound: float

    def checks(self):
        return {
            "angle": self.beta <= self.gamma,
            "weight_gap": self.w_gap_sq <= self.w_gap_bound,
            "bias_gap": self.b_gap <= self.b_gap_bound,
            "rho_w": self.rho_w <= self.rho_bound,
            "rho_w_tilde": self.rho_w_tilde <= self.rho_bound,
        }

    @property
    def holds(self):
        return all(self.checks().values())


def discretize_neuron(p, grid, cover, check=True):
    """Snap a neuron to the grid; returns ``(neuron, certificate)``."""
    if check:
        rep = validate_membership(p, ParameterClass(1, p.d, grid.c_w, max(1.0, min(3.0, grid.c_b))))
        if not rep.passed:
            raise InvalidInputError("; ".join(rep.violations))
    W, b, k, info = _discretize_arrays(p.w[None, :], np.array([p.b]), np.array([p.kappa]), grid, cover)
    q = NeuronParams(W[0], b[0], int(k[0]))
    return q, _certificate(p, grid, info)


def _discretize_arrays(W, b, kappa, grid, cover):
    """Vectorized discretization of many neurons (rows of ``W``)."""
    sigma = np.linalg.norm(W, axis=1)
    idx, beta = cover.nearest(W)
    dirs = cover.directions[idx]
    sign = np.where(np.einsum("ij,ij->i", W, dirs) < 0, -1.0, 1.0)
    wt = dirs * sign[:, None]
    lam_k = np.clip(np.rint(sigma / grid.delta), 0, grid.c_delta)
    lam = lam_k * grid.delta
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(sigma > 0, b / np.where(sigma > 0, sigma, 1.0), 0.0)
    bt_k = np.clip(np.rint(r / grid.rho), -grid.c_rho, grid.c_rho)
    bt = bt_k * grid.rho
    zero = lam_k == 0
    Wq = np.where(zero[:, None], 0.0, lam[:, None] * wt)
    bq = np.where(zero, 0.0, lam * bt)
    kq = np.where(zero, 1, kappa).astype(int)
    info = {"sigma": sigma, "beta": beta, "lam": lam, "bt": bt, "wt": wt, "W": W, "b": b}
    return Wq, bq, kq, info


def _certificate(p, grid, info):
    sigma = float(info["sigma"][0])
    beta = float(info["beta"][0])
    lam = float(info["lam"][0])
    bt = float(info["bt"][0])
    wt = info["wt"][0]
    cb = math.cos(beta)
    gap = p.w - lam * wt
    if sigma > 0:
        rho_w = abs(p.b / (sigma * cb) - bt)
        rho_wt = abs(p.b / sigma - bt / cb)
    else:
        rho_w = rho_wt = 0.0
    return Certificate(
        beta=beta,
        gamma=grid.gamma,
        w_gap_sq=float(np.dot(gap, gap)),
        w_gap_bound=grid.delta ** 2 + 2.0 * (1.0 - cb) * grid.c_w ** 2,
        b_gap=abs(p.b - lam * bt),
        b_gap_bound=grid.delta * grid.rho * (grid.c_delta + grid.c_rho),
        rho_w=rho_w,
        rho_w_tilde=rho_wt,
        rho_bound=grid.rho * (1.0 + (1.0 / cb - 1.0) * grid.c_rho),
    )


# ---------------------------------------------------------------------------
# Nets


def neuron_net_parameters(c_w, c_b, epsilon):
    """``(gamma, delta, rho)`` for a neuron net of radius ``epsilon``."""
    e = _exact(epsilon)
    delta = e / (16 * _exact(c_b))
    rho = e / (16 * _exact(c_w))
    return float(e / (8 * _exact(c_w))), delta, rho


class NeuronNet:
    """Epsilon-net over single neurons stored as parameter arrays."""

    def __init__(self, cls, epsilon, W, b, kappa, grid, cover, bound, construction):
        self.cls = cls
        self.epsilon = float(epsilon)
        self.W, self.b, self.kappa = W, b, kappa
        self.grid = grid
        self.cover = cover
        self.cardinality_bound = bound
        self.construction = construction

    @property
    def cardinality(self):
        return self.W.shape[0]

    def member(self, i):
        return NetworkParams.from_arrays(self.W[i][None, :], self.b[i : i + 1], self.kappa[i : i + 1])

    @property
    def members(self):
        return [self.member(i) for i in range(self.cardinality)]

    def witness_arrays(self, W, b, kappa):
        if self.grid is None:
            n = W.shape[0]
            return np.zeros_like(W), np.zeros(n), np.ones(n, dtype=int)
        Wq, bq, kq, _ = _discretize_arrays(W, b, kappa, self.grid, self.cover)
        return Wq, bq, kq

    def witness(self, p):
        """Net member assigned to the neuron ``p`` by the discretization map."""
        net = as_network(p)
        Wq, bq, kq = self.witness_arrays(net.W, net.b, net.kappa)
        return NetworkParams.from_arrays(Wq, bq, kq)

    def _keys(self):
        if not hasattr(self, "_keyset"):
            self._keyset = {
                (self.W[i].tobytes(), float(self.b[i]), int(self.kappa[i])) for i in range(self.cardinality)
            }
        return self._keyset

    def contains(self, p):
        net = as_network(p)
        return all(
            (net.W[i].tobytes(), float(net.b[i]), int(net.kappa[i])) in self._keys() for i in range(net.n)
        )

    def relaxed_membership(self, slack_rho=None):
        """Weights within ``c_w`` and bias ratios within one grid step of the admissible range."""
        slack = self.grid.rho if (slack_rho is None and self.grid is not None) else (slack_rho or 0.0)
        sigma = np.linalg.norm(self.W, axis=1)
        if np.any(sigma > self.cls.c_w * (1 + 1e-12)):
            return False
        nz = sigma > 0
        r = self.b[nz] / sigma[nz]
        return bool(np.all(r <= SQRT_LN2 + slack) and np.all(r >= -self.cls.c_b - slack))

    def metadata(self):
        return {
            "epsilon": self.epsilon,
            "cls": self.cls.to_dict(),
            "cardinality": self.cardinality,
            "bound": self.cardinality_bound,
            "construction": self.construction,
        }


def neuron_net_bound(c_w, c_b, d, epsilon):
    """``2 floor(16 c_b c_w/eps + 1) floor(32 c_b c_w/eps + 1) (1 + 1/sin(eps/(16 c_w)))^d``."""
    e = _exact(epsilon)
    prod = _exact(c_b) * _exact(c_w)
    f1 = math.floor(16 * prod / e + 1)
    f2 = math.floor(32 * prod / e + 1)
    return 2.0 * f1 * f2 * (1.0 + 1.0 / math.sin(float(e) / (16.0 * c_w))) ** d


def _enumerate(grid, cover, levels_b, kappas=(1, -1)):
    dirs = np.vstack([cover.directions, -cover.directions])
    lam = grid.lambda_levels[1:]
    K, L, Bt, Dk = np.meshgrid(np.array(kappas), lam, levels_b, np.arange(dirs.shape[0]), indexing="ij")
    K, L, Bt, Dk = K.ravel(), L.ravel(), Bt.ravel(), Dk.ravel()
    W = L[:, None] * dirs[Dk]
    b = L * Bt
    d = dirs.shape[1]
    W = np.vstack([np.zeros((1, d)), W])
    b = np.concatenate([[0.0], b])
    kappa = np.concatenate([[1], K]).astype(int)
    return W, b, kappa


def build_neuron_net(cls, epsilon, cover_seed=0):
    """Epsilon-net (in the psi_2 metric) for single neurons of the class."""
    if not epsilon > 0:
        raise InvalidInputError("epsilon must be positive")
    c1 = ParameterClass(1, cls.d, cls.c_w, cls.c_b)
    if epsilon >= 2 * cls.c_w:
        return NeuronNet(c1, epsilon, np.zeros((1, cls.d)), np.zeros(1), np.ones(1, dtype=int),
                         None, None, 1.0, "zero-singleton")
    gamma, delta, rho = neuron_net_parameters(cls.c_w, cls.c_b, epsilon)
    grid = DiscretizationGrid(cls.c_w, cls.c_b, gamma, delta, rho)
    cover = angle_cover(cls.d, gamma, seed=cover_seed)
    W, b, kappa = _enumerate(grid, cover, grid.reachable_b_levels())
    bound = neuron_net_bound(cls.c_w, cls.c_b, cls.d, epsilon)
    return NeuronNet(c1, epsilon, W, b, kappa, grid, cover, bound, f"grid/{cover.construction}")


def zero_bias_net_bound(c_w, d, epsilon):
    """``2 floor(2 sqrt(2) c_w/eps + 1) (1 + 1/sin(eps/(4 sqrt(2) c_w)))^d``."""
    f = math.floor(2.0 * math.sqrt(2.0) * c_w / epsilon + 1.0)
    return 2.0 * f * (1.0 + 1.0 / math.sin(epsilon / (4.0 * math.sqrt(2.0) * c_w))) ** d


def build_zero_bias_net(cls, epsilon, cover_seed=0):
    """Net for neurons with vanishing bias: ``delta = eps/(2 sqrt 2)``, ``gamma = eps/(2 sqrt 2 c_w)``."""
    if not epsilon > 0:
        raise InvalidInputError("epsilon must be positive")
    c1 = ParameterClass(1, cls.d, cls.c_w, cls.c_b)
    if epsilon >= 2 * cls.c_w:
        return NeuronNet(c1, epsilon, np.zeros((1, cls.d)), np.zeros(1), np.ones(1, dtype=int),
                         None, None, 1.0, "zero-singleton")
    delta = epsilon / (2.0 * math.sqrt(2.0))
    gamma = min(math.pi, epsilon / (2.0 * math.sqrt(2.0) * cls.c_w))
    grid = DiscretizationGrid(cls.c_w, 1.0, gamma, delta, 1.0)
    cover = angle_cover(cls.d, gamma, seed=cover_seed)
    W, b, kappa = _enumerate(grid, cover, np.zeros(1))
    bound = zero_bias_net_bound(cls.c_w, cls.d, epsilon)
    return NeuronNet(c1, epsilon, W, b, kappa, grid, cover, bound, f"zero-bias/{cover.construction}")


class NetworkNet:
    """n-fold product of a neuron net at radius ``eps/n``.

    ``members`` is materialized only when the product is below ``cap``;
    ``witness`` and ``contains`` work either way.
    """

    def __init__(self, cls, epsilon, neuron_net, cap=DEFAULT_CAP):
        self.cls = cls
        self.epsilon = float(epsilon)
        self.neuron_net = neuron_net
        self.cap = cap
        self.cardinality = neuron_net.cardinality ** cls.n
        self.cardinality_bound = covering_number_bound(cls, epsilon)
        self.construction = f"product^{cls.n}/{neuron_net.construction}"
        self.lazy = self.cardinality > cap

    def __iter__(self):
        nn = self.neuron_net
        for combo in itertools.product(range(nn.cardinality), repeat=self.cls.n):
            c = list(combo)
            yield NetworkParams.from_arrays(nn.W[c], nn.b[c], nn.kappa[c])

    @property
    def members(self):
        if self.lazy:
            raise CardinalityCapError(
                f"net has {self.cardinality} members, above the enumeration cap {self.cap}"
            )
        return list(self)

    def member_arrays(self):
        """``(W, b, kappa)`` with shapes ``(N, n, d)``, ``(N, n)``, ``(N, n)``."""
        if self.lazy:
            raise CardinalityCapError("net is above the enumeration cap")
        nn = self.neuron_net
        idx = np.array(list(itertools.product(range(nn.cardinality), repeat=self.cls.n)), dtype=int)
        return nn.W[idx], nn.b[idx], nn.kappa[idx]

    def witness(self, p):
        return self.neuron_net.witness(p)

    def contains(self, p):
        net = as_network(p)
        return net.n == self.cls.n and self.neuron_net.contains(net)

    def metadata(self):
        return {
            "epsilon": self.epsilon,
            "cls": self.cls.to_dict(),
            "cardinality": self.cardinality,
            "bound": self.cardinality_bound,
            "construction": self.construction,
        }


def build_network_net(cls, epsilon, cap=DEFAULT_CAP, cover_seed=0):
    if not epsilon > 0:
        raise InvalidInputError("epsilon must be positive")
    if cls.n == 1:
        return build_neuron_net(cls, epsilon, cover_seed)
    nn = build_neuron_net(cls.with_n(1), epsilon / cls.n, cover_seed)
    return NetworkNet(cls, epsilon, nn, cap)


def log_covering_number_bound(cls, epsilon):
    """Natural log of the covering-number formula (0 beyond ``2 n c_w``)."""
    if not epsilon > 0:
        raise InvalidInputError("epsilon must be positive")
    n, d, c_w, c_b = cls.n, cls.d, cls.c_w, cls.c_b
    if epsilon >= 2 * n * c_w:
        return 0.0
    x = 16 * n * _exact(c_b) * _exact(c_w) / _exact(epsilon)
    return n * (
        math.log(2.0)
        + math.log(math.floor(x + 1))
        + math.log(math.floor(2 * x + 1))
        + d * math.log1p(1.0 / math.sin(epsilon / (16.0 * n * c_w)))
    )


def covering_number_bound(cls, epsilon):
    """Covering-number formula, exactly 1 for ``epsilon >= 2 n c_w``."""
    lg = log_covering_number_bound(cls, epsilon)
    if lg == 0.0:
        return 1.0
    return math.exp(lg) if lg < 709.0 else math.inf


def write_net(net, path_jsonl, path_meta):
    """JSON-lines export (one network per line) plus a metadata sidecar."""
    from .io import atomic_write_text

    if isinstance(net, NetworkNet) and net.lazy:
        raise CardinalityCapError("refusing to export a net above the enumeration cap")
    lines = (m.to_json() for m in (net.members if isinstance(net, NetworkNet) else net.members))
    atomic_write_text(path_jsonl, "".join(line + "\n" for line in lines))
    atomic_write_text(path_meta, json.dumps(net.metadata(), indent=2, sort_keys=True) + "\n")

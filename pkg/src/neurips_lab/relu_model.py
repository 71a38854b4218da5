"""ReLU neurons, shallow networks and the admissible parameter envelope.

A neuron is the triple ``(w, b, kappa)`` evaluating to
``kappa * max(<w, x> + b, 0)``; a shallow network is a plain sum of neurons.
Networks store their parameters as stacked arrays so that evaluation on a
batch of inputs is a single matrix product.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .rng import stream

SQRT_LN2 = math.sqrt(math.log(2.0))


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class NeuronParams:
    w: np.ndarray
    b: float
    kappa: int = 1

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.w, dtype=float))
        if w.ndim != 1 or w.size < 1:
            raise InvalidInputError("weight must be a non-empty vector")
        if not np.all(np.isfinite(w)) or not math.isfinite(float(self.b)):
            raise InvalidInputError("neuron parameters must be finite")
        if self.kappa not in (1, -1):
            raise InvalidInputError(f"kappa must be +1 or -1, got {self.kappa!r}")
        object.__setattr__(self, "w", _readonly(w))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "kappa", int(self.kappa))

    @property
    def d(self):
        return self.w.size

    @property
    def norm(self):
        return float(np.linalg.norm(self.w))

    def is_zero(self):
        return not np.any(self.w) and self.b == 0.0

    def _key(self):
        return (self.w.tobytes(), self.b, self.kappa)

    def __eq__(self, other):
        if not isinstance(other, NeuronParams):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return f"NeuronParams(w={self.w.tolist()}, b={self.b!r}, kappa={self.kappa})"


def zero_neuron(d):
    return NeuronParams(np.zeros(d), 0.0, 1)


class NetworkParams:
    """Ordered tuple of neurons sharing one input dimension.

    ``W`` has shape ``(n, d)``; ``b`` and ``kappa`` have shape ``(n,)``.
    """

    __slots__ = ("W", "b", "kappa")

    def __init__(self, neurons):
        neurons = list(neurons)
        if not neurons:
            raise InvalidInputError("a network needs at least one neuron")
        d = neurons[0].d
        if any(p.d != d for p in neurons):
            raise InvalidInputError("all neurons must share the input dimension")
        self._set(
            np.stack([p.w for p in neurons]),
            np.array([p.b for p in neurons]),
            np.array([p.kappa for p in neurons]),
        )

    def _set(self, W, b, kappa):
        object.__setattr__(self, "W", _readonly(W))
        object.__setattr__(self, "b", _readonly(b))
        k = np.array(kappa, dtype=np.int64)
        k.setflags(write=False)
        object.__setattr__(self, "kappa", k)

    def __setattr__(self, name, value):
        raise AttributeError("NetworkParams is immutable")

    @classmethod
    def from_arrays(cls, W, b, kappa):
        W = np.atleast_2d(np.asarray(W, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        kappa = np.atleast_1d(np.asarray(kappa))
        if W.shape[0] != b.shape[0] or b.shape != kappa.shape:
            raise InvalidInputError("inconsistent parameter array shapes")
        if W.shape[0] < 1 or W.shape[1] < 1:
            raise InvalidInputError("a network needs n >= 1 and d >= 1")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise InvalidInputError("network parameters must be finite")
        if not np.all(np.isin(kappa, (1, -1))):
            raise InvalidInputError("kappa entries must be +1 or -1")
        obj = cls.__new__(cls)
        obj._set(W, b, kappa)
        return obj

    @property
    def n(self):
        return self.W.shape[0]

    @property
    def d(self):
        return self.W.shape[1]

    @property
    def neurons(self):
        return tuple(
            NeuronParams(self.W[i], self.b[i], int(self.kappa[i])) for i in range(self.n)
        )

    def negated(self):
        """Network computing ``-phi`` (every sign flipped)."""
        return NetworkParams.from_arrays(self.W, self.b, -self.kappa)

    def scaled(self, a):
        """Network computing ``a * phi`` for ``a > 0``."""
        if not a > 0:
            raise InvalidInputError("scale factor must be positive")
        return NetworkParams.from_arrays(a * self.W, a * self.b, self.kappa)

    def concat(self, other):
        if other.d != self.d:
            raise InvalidInputError("dimension mismatch")
        return NetworkParams.from_arrays(
            np.vstack([self.W, other.W]),
            np.concatenate([self.b, other.b]),
            np.concatenate([self.kappa, other.kappa]),
        )

    def __eq__(self, other):
        if not isinstance(other, NetworkParams):
            return NotImplemented
        return (
            self.W.shape == other.W.shape
            and np.array_equal(self.W, other.W)
            and np.array_equal(self.b, other.b)
            and np.array_equal(self.kappa, other.kappa)
        )

    def __hash__(self):
        return hash((self.W.tobytes(), self.b.tobytes(), self.kappa.tobytes()))

    def __repr__(self):
        return f"NetworkParams(n={self.n}, d={self.d})"

    def to_dict(self):
        return {
            "neurons": [
                {"w": self.W[i].tolist(), "b": float(self.b[i]), "kappa": int(self.kappa[i])}
                for i in range(self.n)
            ]
        }

    @classmethod
    def from_dict(cls, data):
        try:
            neurons = [NeuronParams(nd["w"], nd["b"], nd["kappa"]) for nd in data["neurons"]]
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"malformed network record: {exc}") from None
        return cls(neurons)

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def as_network(p):
    """Accept a neuron or a network and return a network."""
    if isinstance(p, NetworkParams):
        return p
    if isinstance(p, NeuronParams):
        return NetworkParams([p])
    raise InvalidInputError(f"expected NeuronParams or NetworkParams, got {type(p).__name__}")


def zero_network(d, n=1):
    return NetworkParams.from_arrays(np.zeros((n, d)), np.zeros(n), np.ones(n, dtype=int))


def constant_function(a, d):
    """One-neuron network equal to the constant ``a`` everywhere."""
    return NetworkParams([NeuronParams(np.zeros(d), abs(a), 1 if a >= 0 else -1)])


def linear_function(w):
    """Two-neuron network equal to ``<w, x>``: relu(t) - relu(-t) = t."""
    w = np.asarray(w, dtype=float)
    return NetworkParams([NeuronParams(w, 0.0, 1), NeuronParams(-w, 0.0, -1)])


@dataclass(frozen=True)
class ParameterClass:
    """Envelope ``||w_i|| <= c_w`` and ``-c_b <= b_i/||w_i|| <= sqrt(ln 2)``."""

    n: int
    d: int
    c_w: float
    c_b: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidInputError(f"n must be a positive integer, got {self.n!r}")
        if int(self.d) != self.d or self.d < 1:
            raise InvalidInputError(f"d must be a positive integer, got {self.d!r}")
        if not (math.isfinite(self.c_w) and self.c_w >= 0):
            raise InvalidInputError(f"c_w must be finite and >= 0, got {self.c_w!r}")
        if not 1.0 <= self.c_b <= 3.0:
            raise InvalidInputError(f"c_b must lie in [1, 3], got {self.c_b!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "c_w", float(self.c_w))
        object.__setattr__(self, "c_b", float(self.c_b))

    def with_n(self, n):
        return ParameterClass(n, self.d, self.c_w, self.c_b)

    def to_dict(self):
        return {"n": self.n, "d": self.d, "c_w": self.c_w, "c_b": self.c_b}


def neuron_eval(p, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.d:
        raise InvalidInputError(f"input dimension {x.shape[-1]} != weight dimension {p.d}")
    return p.kappa * np.maximum(x @ p.w + p.b, 0.0)


def network_eval(net, x):
    """Evaluate at a single point (returns float) or rows of a matrix."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.d:
        raise InvalidInputError(f"input dimension {x.shape[-1]} != network dimension {net.d}")
    pre = x @ net.W.T + net.b
    out = np.maximum(pre, 0.0) @ net.kappa.astype(float)
    return float(out) if out.ndim == 0 else out


def from_weighted_sum(weights, neurons):
    """Represent ``sum_i lambda_i * relu(<w_i,x> + b_i)`` as a signed neuron tuple.

    Each term becomes ``(|lambda_i| w_i, |lambda_i| b_i, sign(lambda_i))``;
    a zero weight gives the zero neuron.
    """
    weights = list(weights)
    neurons = list(neurons)
    if len(weights) != len(neurons):
        raise InvalidInputError("weights and neurons must have equal length")
    out = []
    for lam, q in zip(weights, neurons):
        if q.kappa != 1:
            raise InvalidInputError("weighted-sum inputs must have kappa = +1")
        if lam == 0:
            out.append(zero_neuron(q.d))
        else:
            a = abs(lam)
            out.append(NeuronParams(a * q.w, a * q.b, 1 if lam > 0 else -1))
    return NetworkParams(out)


@dataclass
class MembershipReport:
    passed: bool
    violations: list = field(default_factory=list)


def validate_membership(net, cls, tol=1e-12):
    """Check every neuron against the class envelope.

    ``tol`` is a relative slack that absorbs rounding in ``b / ||w||``.
    A zero weight is admissible only together with a zero bias.
    """
    net = as_network(net)
    if net.d != cls.d:
        raise InvalidInputError(f"network dimension {net.d} != class dimension {cls.d}")
    violations = []
    if net.n != cls.n:
        violations.append(f"network has {net.n} neurons, class requires {cls.n}")
    norms = np.linalg.norm(net.W, axis=1)
    for i, (nw, b) in enumerate(zip(norms, net.b)):
        if nw > cls.c_w * (1 + tol):
            violations.append(f"neuron {i}: ||w|| = {nw:.17g} exceeds c_w = {cls.c_w:.17g}")
        if nw == 0.0:
            if b != 0.0:
                violations.append(f"neuron {i}: undefined bias ratio (w = 0, b = {b:.17g})")
            continue
        r = b / nw
        if r > SQRT_LN2 * (1 + tol):
            violations.append(f"neuron {i}: b/||w|| = {r:.17g} exceeds sqrt(ln 2)")
        if r < -cls.c_b * (1 + tol):
            violations.append(f"neuron {i}: b/||w|| = {r:.17g} below -c_b = {-cls.c_b:.17g}")
    return MembershipReport(not violations, violations)


def sample_neuron_arrays(cls, count, rng, weights="ball"):
    """Draw ``count`` admissible neurons as arrays ``(W, b, kappa)``.

    ``weights="ball"`` draws uniformly on the ball of radius ``c_w``;
    ``weights="sphere"`` puts every weight on the boundary sphere.
    """
    d = cls.d
    g = rng.standard_normal((count, d))
    g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-300)
    if weights == "ball":
        radius = cls.c_w * rng.random(count) ** (1.0 / d)
    elif weights == "sphere":
        radius = np.full(count, cls.c_w)
    else:
        raise InvalidInputError(f"unknown weight law {weights!r}")
    W = g * radius[:, None]
    ratio = rng.uniform(-cls.c_b, SQRT_LN2, count)
    b = ratio * np.linalg.norm(W, axis=1)
    kappa = np.where(rng.random(count) < 0.5, 1, -1)
    return W, b, kappa


def sample_parameter_class(cls, count, seed, weights="ball"):
    """Deterministic list of ``count`` random members of the class."""
    if count < 0:
        raise InvalidInputError("count must be non-negative")
    if count == 0:
        return []
    rng = stream(seed, 0)
    W, b, kappa = sample_neuron_arrays(cls, count * cls.n, rng, weights)
    W = W.reshape(count, cls.n, cls.d)
    b = b.reshape(count, cls.n)
    kappa = kappa.reshape(count, cls.n)
    return [NetworkParams.from_arrays(W[i], b[i], kappa[i]) for i in range(count)]

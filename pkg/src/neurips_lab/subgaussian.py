"""Sub-Gaussian (psi_2) norms and distances of ReLU networks.

The psi_2 norm of ``f`` is the smallest ``C`` with ``E exp(f^2/C^2) <= 2``.
``E_C`` decreases in ``C`` and is infinite at or below
``C_crit = sqrt(2) * max_u |h(u)|``, where ``h`` is the asymptotic slope of
``f`` along the unit direction ``u``.  The root is found by bisection, many
functions at once.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, InvalidInputError
from .gaussian_analysis import difference_network
from .quadrature import DEFAULT_QUAD, Prepared, exp_moments, as_arrays, simplify
from .relu_model import ParameterClass, as_network, sample_parameter_class

LN2 = math.log(2.0)


@dataclass
class Psi2Estimate:
    value: float
    bracket: tuple
    moment_at_value: float


def exp_moment(f, C, quad=DEFAULT_QUAD):
    """``E exp(f(x)^2 / C^2)``; returns ``inf`` when the expectation diverges."""
    if not C > 0:
        raise InvalidInputError("C must be positive")
    return float(exp_moments([f], [C], quad)[0])


def _constant_value(f):
    """Value of ``f`` if it is constant (all weights zero), else ``None``."""
    W, b, k = simplify(*as_arrays(f))
    if W.shape[0] and np.any(W):
        return None
    return float(np.dot(k, np.maximum(b, 0.0)))


def psi2_norms(funcs, quad=DEFAULT_QUAD, rel_width=1e-6, moment_tol=1e-8, max_iter=200):
    """Batched psi_2 norms.  Returns a list of :class:`Psi2Estimate`."""
    funcs = list(funcs)
    B = len(funcs)
    results = [None] * B
    todo = []
    for j, f in enumerate(funcs):
        a = _constant_value(f)
        if a is not None:
            v = abs(a) / math.sqrt(LN2)
            results[j] = Psi2Estimate(v, (v, v), 2.0 if v > 0 else 1.0)
        else:
            todo.append(j)
    if not todo:
        return results

    level = 1
    idx = np.array(todo)
    while idx.size:
        prep = Prepared([funcs[j] for j in idx], quad)
        est = _bisect(prep, quad, level, rel_width, moment_tol, max_iter)
        # Accuracy check: halving the arcs may move the moment at the root only
        # by an amount that shifts the root itself by less than rel_tol.  The
        # local slope dE/dC converts the moment error into a root error.
        vals = np.array([e.value for e in est])
        fine = exp_moments(None, vals, quad, level=2 * level, prepared=prep)
        nudged = exp_moments(None, vals * (1.0 + 1e-4), quad, level=2 * level, prepared=prep)
        coarse = np.array([e.moment_at_value for e in est])
        with np.errstate(invalid="ignore"):
            slope = np.abs(fine - nudged) / 1e-4
            err = np.abs(fine - coarse)
            ok = (err <= quad.abs_tol) | (err <= quad.rel_tol * slope) | (
                np.isinf(fine) & np.isinf(coarse)
            )
        for k in np.nonzero(ok)[0]:
            results[idx[k]] = est[k]
        if np.all(ok):
            break
        idx = idx[~ok]
        level *= 2
        if level >= quad.max_refine:
            bad = est[int(np.nonzero(~ok)[0][0])]
            raise ConvergenceError(
                "psi_2 quadrature did not stabilise", estimate=bad.value, bracket=bad.bracket
            )
    return results


def _bisect(prep, quad, level, rel_width, moment_tol, max_iter):
    B = prep.n
    crit = math.sqrt(2.0) * prep.growth()
    f0 = _origin_values(prep)
    seed = np.maximum(np.abs(f0) / math.sqrt(LN2) + math.sqrt(8.0 / 3.0) * crit / math.sqrt(2.0), 1.05 * crit)
    seed = np.where(seed > 0, seed, 1.0)

    def E(C, sel):
        sub = _subset(prep, sel)
        return exp_moments(None, C, quad, level=level, prepared=sub)

    lo = np.zeros(B)
    hi = np.zeros(B)
    e_hi = np.zeros(B)
    cur = seed.copy()
    e_cur = E(cur, np.arange(B))
    up = e_cur > 2.0
    # expand upward until E <= 2
    sel = np.nonzero(up)[0]
    lo[sel] = cur[sel]
    while sel.size:
        cur[sel] *= 2.0
        e = E(cur[sel], sel)
        done = e <= 2.0
        hi[sel[done]] = cur[sel[done]]
        e_hi[sel[done]] = e[done]
        lo[sel[~done]] = cur[sel[~done]]
        sel = sel[~done]
    # shrink downward until E > 2 (or we hit the divergence threshold)
    sel = np.nonzero(~up)[0]
    hi[sel] = cur[sel]
    e_hi[sel] = e_cur[sel]
    while sel.size:
        nxt = cur[sel] / 2.0
        at_crit = nxt <= crit[sel]
        lo[sel[at_crit]] = crit[sel[at_crit]]
        sel, nxt = sel[~at_crit], nxt[~at_crit]
        if not sel.size:
            break
        e = E(nxt, sel)
        done = e > 2.0
        lo[sel[done]] = nxt[done]
        hi[sel[~done]] = nxt[~done]
        e_hi[sel[~done]] = e[~done]
        cur[sel] = nxt
        sel = sel[~done]

    hit_any = np.zeros(B, dtype=bool)
    value = np.zeros(B)
    moment = np.zeros(B)
    active = np.arange(B)
    for _ in range(max_iter):
        width_ok = (hi[active] - lo[active]) <= rel_width * hi[active]
        active = active[~width_ok]
        if not active.size:
            break
        mid = 0.5 * (lo[active] + hi[active])
        e = E(mid, active)
        hit = np.abs(e - 2.0) <= moment_tol
        above = e > 2.0
        lo[active[above & ~hit]] = mid[above & ~hit]
        hi[active[~above & ~hit]] = mid[~above & ~hit]
        e_hi[active[~above & ~hit]] = e[~above & ~hit]
        hit_any[active[hit]] = True
        value[active[hit]] = mid[hit]
        moment[active[hit]] = e[hit]
        active = active[~hit]
    else:
        if active.size:
            j = int(active[0])
            raise ConvergenceError(
                "psi_2 bisection did not converge", estimate=float(hi[j]), bracket=(lo[j], hi[j])
            )
    value = np.where(hit_any, value, hi)
    moment = np.where(hit_any, moment, e_hi)
    return [
        Psi2Estimate(float(value[j]), (float(min(lo[j], value[j])), float(max(hi[j], value[j]))), float(moment[j]))
        for j in range(B)
    ]


def _origin_values(prep):
    f0 = np.zeros(prep.n)
    if prep.planar_index.size:
        f0[prep.planar_index] = (np.maximum(prep.b, 0.0) * prep.kf).sum(1)
    for j, A, b, kf, kg, rank in prep.other:
        f0[j] = float(np.dot(np.maximum(b, 0.0), kf))
    return f0


class _Subset:
    """View of a :class:`Prepared` batch restricted to some functions."""

    def __init__(self, prep, sel):
        self.quad = prep.quad
        self.n = len(sel)
        pos = {int(j): k for k, j in enumerate(sel)}
        pi = []
        rows = []
        for r, j in enumerate(prep.planar_index):
            if int(j) in pos:
                pi.append(pos[int(j)])
                rows.append(r)
        self.planar_index = np.array(pi, dtype=int)
        if rows:
            self.A, self.b, self.kf = prep.A[rows], prep.b[rows], prep.kf[rows]
        self.other = [(pos[o[0]],) + tuple(o[1:]) for o in prep.other if o[0] in pos]
        self._g = prep.growth()[np.asarray(sel, dtype=int)]

    def growth(self):
        return self._g


def _subset(prep, sel):
    if len(sel) == prep.n and np.array_equal(sel, np.arange(prep.n)):
        return prep
    return _Subset(prep, sel)


def psi2_norm(f, quad=DEFAULT_QUAD):
    return psi2_norms([f], quad)[0]


def psi2_distance(p, q, quad=DEFAULT_QUAD):
    """psi_2 norm of ``phi_p - phi_q`` for neurons or networks."""
    return psi2_norm(difference_network(p, q), quad).value


def psi2_distances(pairs, quad=DEFAULT_QUAD):
    diffs = [difference_network(p, q) for p, q in pairs]
    return np.array([e.value for e in psi2_norms(diffs, quad)])


def psi2_upper_bound(net, quad=DEFAULT_QUAD):
    """Triangle-inequality bound ``sum_i psi_2(phi_{p_i})``; never needs more than 2-D."""
    net = as_network(net)
    return float(sum(e.value for e in psi2_norms([(net.W[[i]], net.b[[i]], [1.0]) for i in range(net.n)], quad)))


@dataclass
class RadiusReport:
    samples: int
    max_psi2: float
    bound: float
    violations: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.violations

    def to_dict(self):
        return {
            "samples": self.samples,
            "max_psi2": self.max_psi2,
            "bound": self.bound,
            "violations": self.violations,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def check_radius(cls, count, seed, quad=DEFAULT_QUAD, tol=1e-4, weights="ball"):
    """Sample single neurons from the class and compare their psi_2 norms with ``2 c_w``."""
    if cls.n != 1:
        cls = ParameterClass(1, cls.d, cls.c_w, cls.c_b)
    nets = sample_parameter_class(cls, count, seed, weights=weights)
    bound = 2.0 * cls.c_w
    if not nets:
        return RadiusReport(0, 0.0, bound, [])
    vals = [e.value for e in psi2_norms(nets, quad)]
    violations = [
        {"index": i, "psi2": v, "neuron": nets[i].to_dict()["neurons"][0]}
        for i, v in enumerate(vals)
        if v > bound + tol
    ]
    return RadiusReport(count, float(max(vals)), bound, violations)

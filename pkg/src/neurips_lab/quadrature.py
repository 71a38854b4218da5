"""Gaussian expectations of piecewise-linear functions.

Every quantity the package needs (second moments, cross moments and the
exponential moment ``E exp(f(x)^2 / C^2)``) is an expectation, under a
standard Gaussian, of a function of the form ``sum_i kappa_i relu(<w_i, x> + b_i)``.
Such a function depends on ``x`` only through its projection onto the span
of the weights, so the integral reduces to ``rank(W)`` dimensions.

For rank at most two the engine works in polar coordinates.  Along a ray
the function is linear between consecutive hyperplane crossings, so every
radial integral has a closed form (error functions for moments, scaled
complementary error functions and Dawson's integral for the exponential
moment).  The angular integral is Gauss-Legendre on arcs delimited by the
angles where the crossing structure changes; the integrand is analytic on
each arc, so convergence is geometric.  Ranks three and four fall back to
a tensor Gauss-Hermite rule.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ConvergenceError, InvalidInputError, UnsupportedReductionError

TWO_PI = 2.0 * math.pi
HALF_SQRT_PI = 0.5 * math.sqrt(math.pi)
SQRT_HALF_PI = math.sqrt(0.5 * math.pi)
SCHEMES = ("adaptive-polar", "gauss-hermite-tensor")

# (2k-1)!! / 2^(k+1), k = 1..7: asymptotic coefficients shared by G and H below.
_ASYM = np.array([0.25, 0.375, 0.9375, 3.28125, 14.765625, 81.2109375, 527.87109375])


@dataclass(frozen=True)
class QuadratureSpec:
    """Controls every Gaussian integral in the package.

    ``order`` is the number of Gauss-Legendre nodes per angular arc for the
    polar scheme and the number of nodes per axis for Gauss-Hermite.
    """

    scheme: str = "adaptive-polar"
    order: int = 24
    abs_tol: float = 1e-8
    rel_tol: float = 1e-6
    max_rank: int = 4
    max_refine: int = 64

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InvalidInputError(f"unknown quadrature scheme {self.scheme!r}")
        if int(self.order) != self.order or self.order < 8:
            raise InvalidInputError("quadrature order must be an integer >= 8")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise InvalidInputError("quadrature tolerances must be positive")
        if self.max_rank < 2:
            raise InvalidInputError("max_rank must be at least 2")

    def to_dict(self):
        return {
            "scheme": self.scheme,
            "order": self.order,
            "abs_tol": self.abs_tol,
            "rel_tol": self.rel_tol,
            "max_rank": self.max_rank,
        }


DEFAULT_QUAD = QuadratureSpec()


# ---------------------------------------------------------------------------
# Function containers and reduction


def as_arrays(f):
    """Return ``(W, b, kappa)`` float arrays for a network-like object."""
    if isinstance(f, tuple) and len(f) == 3:
        W, b, k = f
    else:
        W, b, k = f.W, f.b, f.kappa
    W = np.atleast_2d(np.asarray(W, dtype=float))
    return W, np.asarray(b, dtype=float).reshape(-1), np.asarray(k, dtype=float).reshape(-1)


def simplify(W, b, k):
    """Merge neurons with identical ``(w, b)`` and drop exact cancellations.

    ``2 relu(t) = relu(2t)`` lets a merged coefficient of magnitude other than
    one be folded back into the weights.
    """
    keys = {}
    order = []
    for i in range(W.shape[0]):
        key = (W[i].tobytes(), float(b[i]))
        if key in keys:
            keys[key] += k[i]
        else:
            keys[key] = float(k[i])
            order.append((key, i))
    rows, bs, ks = [], [], []
    for key, i in order:
        c = keys[key]
        if c == 0.0 or (not np.any(W[i]) and b[i] <= 0.0):
            continue
        a = abs(c)
        rows.append(a * W[i])
        bs.append(a * b[i])
        ks.append(math.copysign(1.0, c))
    d = W.shape[1]
    if not rows:
        return np.zeros((0, d)), np.zeros(0), np.zeros(0)
    return np.array(rows), np.array(bs), np.array(ks)


def reduce_weights(W, max_rank=4):
    """Project weight rows onto an orthonormal basis of their span.

    Returns ``(A, rank)`` where ``A`` has ``max(rank, 2)`` columns, so rank
    zero and one functions still live in the plane.
    """
    n, d = W.shape
    if n == 0:
        return np.zeros((0, 2)), 0
    if d <= 2:
        A = np.zeros((n, 2))
        A[:, :d] = W
        rank = int(np.linalg.matrix_rank(W)) if np.any(W) else 0
        return A, rank
    if not np.any(W):
        return np.zeros((n, 2)), 0
    _, sv, vt = np.linalg.svd(W, full_matrices=False)
    rank = int(np.sum(sv > sv[0] * 1e-12))
    if rank > max_rank:
        raise UnsupportedReductionError(
            f"function spans {rank} dimensions; exact quadrature is capped at {max_rank}"
        )
    k = max(rank, 2)
    A = W @ vt[:k].T
    if A.shape[1] < k:
        A = np.hstack([A, np.zeros((n, k - A.shape[1]))])
    return A, rank


def _pad(fs, width):
    """Stack reduced functions into ``(B, n_max, width)`` arrays, zero padded."""
    B = len(fs)
    nmax = max(1, max(f[0].shape[0] for f in fs))
    A = np.zeros((B, nmax, width))
    b = np.zeros((B, nmax))
    kf = np.zeros((B, nmax))
    kg = np.zeros((B, nmax))
    for j, (Aj, bj, kfj, kgj) in enumerate(fs):
        m = Aj.shape[0]
        A[j, :m, : Aj.shape[1]] = Aj
        b[j, :m] = bj
        kf[j, :m] = kfj
        kg[j, :m] = kgj
    return A, b, kf, kg


# ---------------------------------------------------------------------------
# Radial kernels


def _G(z):
    """``1/2 - z (sqrt(pi)/2) erfcx(z)`` for ``z >= 0`` without cancellation."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    big = z > 50.0
    zs = z[~big]
    out[~big] = 0.5 - zs * HALF_SQRT_PI * special.erfcx(zs)
    if np.any(big):
        q = 1.0 / z[big] ** 2
        signs = np.array([1, -1, 1, -1, 1, -1, 1])
        out[big] = np.polynomial.polynomial.polyval(q, np.concatenate([[0.0], signs * _ASYM]))
    return out


def _H(z):
    """``1/2 - z D(z)`` with ``D`` Dawson's integral, stable for large ``|z|``."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    big = np.abs(z) > 50.0
    zs = z[~big]
    out[~big] = 0.5 - zs * special.dawsn(zs)
    if np.any(big):
        q = 1.0 / z[big] ** 2
        out[big] = -np.polynomial.polynomial.polyval(q, np.concatenate([[0.0], _ASYM]))
    return out


_GL32 = np.polynomial.legendre.leggauss(32)


def radial_exp(P, Q, R, lo, hi):
    """``int_lo^hi r exp(P r^2 + Q r + R) dr`` elementwise.

    ``hi`` may be ``inf``; the integral is ``inf`` when it diverges.
    """
    P, Q, R, lo, hi = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (P, Q, R, lo, hi))
    )
    out = np.zeros(P.shape)
    seg = lo < hi
    unb = np.isinf(hi)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        div = seg & unb & (P >= 0.0)
        out[div] = np.inf
        span = np.where(unb, np.inf, hi - lo)
        tiny = seg & ~unb & (
            (np.abs(P) * hi * span < 1e-5) & (np.abs(Q) * span < 50.0) | (P == 0.0)
        )
        neg = seg & ~tiny & ~div & (P < 0.0)
        pos = seg & ~tiny & ~unb & (P > 0.0)

        if np.any(tiny):
            t, w = _GL32
            l, h = lo[tiny][:, None], hi[tiny][:, None]
            half = 0.5 * (h - l)
            r = l + half * (t + 1.0)
            e = P[tiny][:, None] * r * r + Q[tiny][:, None] * r + R[tiny][:, None]
            out[tiny] = (half * w * r * np.exp(e)).sum(axis=1)

        if np.any(neg):
            a = -P[neg]
            q, rr, l, h = Q[neg], R[neg], lo[neg], hi[neg]
            sa = np.sqrt(a)
            m = q / (2.0 * a)
            z0 = sa * (l - m)
            z1 = np.where(np.isinf(h), np.inf, sa * (h - m))
            E0 = -a * l * l + q * l + rr
            hf = np.where(np.isinf(h), 0.0, h)
            E1 = np.where(np.isinf(h), -np.inf, -a * hf * hf + q * hf + rr)
            res = np.empty(a.shape)

            right = z0 >= 0.0
            left = (z1 <= 0.0) & ~right
            mixed = ~right & ~left
            if np.any(right):
                s = right
                t0 = np.exp(E0[s]) * (_G(z0[s]) + sa[s] * l[s] * HALF_SQRT_PI * special.erfcx(z0[s]))
                fin = np.isfinite(z1[s])
                z1f = np.where(fin, z1[s], 0.0)
                t1 = np.where(
                    fin,
                    np.exp(E1[s]) * (_G(z1f) + sa[s] * hf[s] * HALF_SQRT_PI * special.erfcx(z1f)),
                    0.0,
                )
                res[s] = (t0 - t1) / a[s]
            if np.any(left):
                s = left
                l0 = np.exp(E0[s]) * (sa[s] * l[s] * HALF_SQRT_PI * special.erfcx(-z0[s]) - _G(-z0[s]))
                l1 = np.exp(E1[s]) * (sa[s] * h[s] * HALF_SQRT_PI * special.erfcx(-z1[s]) - _G(-z1[s]))
                res[s] = (l1 - l0) / a[s]
            if np.any(mixed):
                s = mixed
                K = rr[s] + q[s] * q[s] / (4.0 * a[s])
                res[s] = (np.exp(E0[s]) - np.exp(E1[s])) / (2.0 * a[s]) + (
                    m[s] / sa[s]
                ) * HALF_SQRT_PI * np.exp(K) * (special.erf(z1[s]) - special.erf(z0[s]))
            out[neg] = res

        if np.any(pos):
            a = P[pos]
            q, rr, l, h = Q[pos], R[pos], lo[pos], hi[pos]
            sa = np.sqrt(a)
            m = -q / (2.0 * a)
            z0 = sa * (l - m)
            z1 = sa * (h - m)
            mu0 = np.exp(a * l * l + q * l + rr) * (_H(z0) + sa * l * special.dawsn(z0))
            mu1 = np.exp(a * h * h + q * h + rr) * (_H(z1) + sa * h * special.dawsn(z1))
            out[pos] = (mu1 - mu0) / a
    return out


def radial_moment(c2, c1, c0, lo, hi):
    """``int_lo^hi r (c2 r^2 + c1 r + c0) exp(-r^2/2) dr`` elementwise, ``lo >= 0``."""
    with np.errstate(invalid="ignore", over="ignore"):
        unb = np.isinf(hi)
        hf = np.where(unb, 0.0, hi)
        e0 = np.exp(-0.5 * lo * lo)
        e1 = np.where(unb, 0.0, np.exp(-0.5 * hf * hf))
        i0 = SQRT_HALF_PI * (special.erfc(lo / math.sqrt(2.0)) - special.erfc(hi / math.sqrt(2.0)))
        i1 = e0 - e1
        i2 = lo * e0 - hf * e1 + i0
        i3 = lo * lo * e0 - hf * hf * e1 + 2.0 * i1
        out = c2 * i3 + c1 * i2 + c0 * i1
    return np.where(lo < hi, out, 0.0)


# ---------------------------------------------------------------------------
# Planar (rank <= 2) engine


def _arc_breakpoints(A, b, k=None):
    """Angles in ``[0, 2 pi]`` at which the crossing structure may change."""
    B, n, _ = A.shape
    phi = np.arctan2(A[..., 1], A[..., 0])
    nz = np.any(A != 0.0, axis=-1)
    perp = np.concatenate(
        [np.where(nz, phi + 0.5 * math.pi, 0.0), np.where(nz, phi - 0.5 * math.pi, 0.0)], axis=1
    )
    parts = [np.zeros((B, 1)), perp]
    if k is not None:
        parts.append(_peak_angles(A, k))
    if n > 1:
        i, j = np.triu_indices(n, 1)
        ai, aj = A[:, i, :], A[:, j, :]
        bi, bj = b[:, i], b[:, j]
        det = ai[..., 0] * aj[..., 1] - ai[..., 1] * aj[..., 0]
        scale = np.linalg.norm(ai, axis=-1) * np.linalg.norm(aj, axis=-1)
        ok = np.abs(det) > 1e-14 * scale
        with np.errstate(divide="ignore", invalid="ignore"):
            x0 = (-bi * aj[..., 1] + bj * ai[..., 1]) / det
            x1 = (-bj * ai[..., 0] + bi * aj[..., 0]) / det
        ok &= np.isfinite(x0) & np.isfinite(x1) & ((x0 != 0.0) | (x1 != 0.0))
        parts.append(np.where(ok, np.arctan2(np.where(ok, x1, 0.0), np.where(ok, x0, 1.0)), 0.0))
    ang = np.mod(np.concatenate(parts, axis=1), TWO_PI)
    ang.sort(axis=1)
    return np.concatenate([ang, np.full((B, 1), TWO_PI)], axis=1)


def _peak_angles(A, k):
    """Directions of steepest asymptotic growth inside each sign arc.

    Near the divergence threshold the exponential-moment integrand peaks
    sharply along these rays, so they are used as arc endpoints.
    """
    B, n, _ = A.shape
    phi = np.arctan2(A[..., 1], A[..., 0])
    perp = np.mod(np.concatenate([phi + 0.5 * math.pi, phi - 0.5 * math.pi], axis=1), TWO_PI)
    perp.sort(axis=1)
    ext = np.concatenate([perp, perp[:, :1] + TWO_PI], axis=1)
    lo, hi = ext[:, :-1], ext[:, 1:]
    mid = 0.5 * (lo + hi)
    um = np.stack([np.cos(mid), np.sin(mid)], axis=-1)
    active = np.einsum("bmc,bnc->bmn", um, A) > 0
    v = np.einsum("bmn,bnc->bmc", np.where(active, k[:, None, :], 0.0), A)
    out = []
    for shift in (0.0, math.pi):
        ang = np.mod(np.arctan2(v[..., 1], v[..., 0]) + shift - lo, TWO_PI) + lo
        inside = (ang > lo) & (ang < hi) & np.any(v != 0.0, axis=-1)
        out.append(np.where(inside, ang, 0.0))
    return np.concatenate(out, axis=1)


def _angular_nodes(brk, order, level):
    t, w = np.polynomial.legendre.leggauss(order)
    lo, hi = brk[:, :-1], brk[:, 1:]
    width = (hi - lo) / level
    j = np.arange(level)
    start = lo[:, :, None] + width[:, :, None] * j[None, None, :]
    theta = start[..., None] + 0.5 * width[:, :, None, None] * (t + 1.0)
    wts = np.broadcast_to(0.5 * width[:, :, None, None] * w, theta.shape)
    B = brk.shape[0]
    return theta.reshape(B, -1), wts.reshape(B, -1)


def _segments(A, b, theta):
    """Radial segmentation along rays at angles ``theta`` (shape ``(B, M)``)."""
    s = A[:, None, :, 0] * np.cos(theta)[..., None] + A[:, None, :, 1] * np.sin(theta)[..., None]
    bb = b[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = -bb / s
        rad = np.where((s != 0.0) & (r > 0.0), r, np.inf)
    rad.sort(axis=-1)
    z = np.zeros(rad.shape[:-1] + (1,))
    lo = np.concatenate([z, rad], axis=-1)
    hi = np.concatenate([rad, np.full_like(z, np.inf)], axis=-1)
    with np.errstate(invalid="ignore"):
        rep = np.where(np.isfinite(hi), 0.5 * (lo + hi), lo + 1.0)
        act = (s[..., None, :] * rep[..., :, None] + bb[..., None, :]) > 0.0
    return s, lo, hi, act


def _slopes(s, b, act, k):
    ks = (k[:, None, :] * s)[..., None, :]
    kb = (k * b)[:, None, None, :]
    S = np.where(act, ks, 0.0).sum(-1)
    T = np.where(act, kb, 0.0).sum(-1)
    return S, T


_CHUNK = 3_000_000


def _chunks(B, per_item):
    step = max(1, _CHUNK // max(per_item, 1))
    for start in range(0, B, step):
        yield slice(start, min(B, start + step))


def _planar_moment(A, b, kf, kg, order, level):
    out = np.empty(A.shape[0])
    n = A.shape[1]
    na = 2 + 2 * n + n * (n - 1) // 2
    for sl in _chunks(A.shape[0], na * order * level * (n + 1) * n):
        brk = _arc_breakpoints(A[sl], b[sl])
        theta, wts = _angular_nodes(brk, order, level)
        s, lo, hi, act = _segments(A[sl], b[sl], theta)
        Sf, Tf = _slopes(s, b[sl], act, kf[sl])
        Sg, Tg = _slopes(s, b[sl], act, kg[sl])
        rad = radial_moment(Sf * Sg, Sf * Tg + Sg * Tf, Tf * Tg, lo, hi).sum(-1)
        out[sl] = (wts * rad).sum(-1) / TWO_PI
    return out


def _planar_exp(A, b, k, C, order, level, shift=None):
    """Planar exponential moments; ``shift`` adds a per-function constant to the exponent."""
    out = np.empty(A.shape[0])
    n = A.shape[1]
    na = 2 + 6 * n + n * (n - 1) // 2
    for sl in _chunks(A.shape[0], na * order * level * (n + 1) * n):
        brk = _arc_breakpoints(A[sl], b[sl], k[sl])
        theta, wts = _angular_nodes(brk, order, level)
        s, lo, hi, act = _segments(A[sl], b[sl], theta)
        S, T = _slopes(s, b[sl], act, k[sl])
        c2 = (C[sl] ** 2)[:, None, None]
        R = T * T / c2
        if shift is not None:
            R = R + shift[sl, None, None]
        rad = radial_exp(S * S / c2 - 0.5, 2.0 * S * T / c2, R, lo, hi).sum(-1)
        with np.errstate(invalid="ignore"):
            out[sl] = (wts * rad).sum(-1) / TWO_PI
    return out


def planar_growth(A, k):
    """``max_u |sum_i k_i max(<a_i, u>, 0)|`` over unit ``u`` in the plane.

    The function is linear on the arcs between the angles orthogonal to each
    ``a_i``, so its extremum is at an arc endpoint or along ``+-v_arc``.
    """
    B, n, _ = A.shape
    phi = np.arctan2(A[..., 1], A[..., 0])
    perp = np.mod(np.concatenate([phi + 0.5 * math.pi, phi - 0.5 * math.pi], axis=1), TWO_PI)
    perp.sort(axis=1)
    ext = np.concatenate([perp, perp[:, :1] + TWO_PI], axis=1)
    mid = 0.5 * (ext[:, :-1] + ext[:, 1:])
    um = np.stack([np.cos(mid), np.sin(mid)], axis=-1)
    proj = np.einsum("bmc,bnc->bmn", um, A)
    v = np.einsum("bmn,bnc->bmc", np.where(proj > 0, k[:, None, :], 0.0), A)
    vang = np.arctan2(v[..., 1], v[..., 0])
    cand = np.concatenate([perp, vang, vang + math.pi], axis=1)
    uc = np.stack([np.cos(cand), np.sin(cand)], axis=-1)
    h = (np.maximum(np.einsum("bmc,bnc->bmn", uc, A), 0.0) * k[:, None, :]).sum(-1)
    return np.abs(h).max(axis=1)


# ---------------------------------------------------------------------------
# Gauss-Hermite tensor engine (any rank; selected by the gauss-hermite-tensor scheme)


def _gh_grid(dim, order):
    x, w = special.roots_hermitenorm(order)
    w = w / math.sqrt(TWO_PI)
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=1)
    wg = np.ones(pts.shape[0])
    for g in np.meshgrid(*([w] * dim), indexing="ij"):
        wg = wg * g.reshape(-1)
    return pts, wg


def _gh_values(A, b, k, pts):
    return np.maximum(pts @ A.T + b, 0.0) @ k


def gh_moment(A, b, kf, kg, order):
    pts, w = _gh_grid(A.shape[1], order)
    return float(w @ (_gh_values(A, b, kf, pts) * _gh_values(A, b, kg, pts)))


def gh_exp(A, b, k, C, order):
    pts, w = _gh_grid(A.shape[1], order)
    f = _gh_values(A, b, k, pts)
    with np.errstate(over="ignore"):
        return float(w @ np.exp((f / C) ** 2))


def _gh_order_for(rank, order):
    # keep tensor grids below ~2e6 nodes
    cap = int(2e6 ** (1.0 / max(rank, 1)))
    return max(8, min(order, cap))


def sphere_growth(A, k, rng_seed=0, probes=20000):
    """Growth rate ``max_u |h(u)|`` for rank > 2 (probed, then polished)."""
    rng = np.random.default_rng(rng_seed)
    u = rng.standard_normal((probes, A.shape[1]))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    act = (u @ A.T) > 0
    best = np.abs((np.maximum(u @ A.T, 0.0) * k).sum(1)).max()
    pats = np.unique(act, axis=0)
    v = pats.astype(float) * k @ A
    nv = np.linalg.norm(v, axis=1)
    ok = nv > 0
    cand = np.vstack([v[ok] / nv[ok, None], -v[ok] / nv[ok, None]])
    if cand.size:
        h = np.abs((np.maximum(cand @ A.T, 0.0) * k).sum(1)).max()
        best = max(best, h)
    return float(best)


# ---------------------------------------------------------------------------
# Hybrid engine for ranks 3 and 4: Gauss-Hermite over one or two outer axes,
# the planar engine over the remaining plane.  With every weight row leaning
# into the inner plane, the inner expectation is smooth in the outer
# coordinates, so the outer rule converges quickly despite the ReLU kinks.


def _split_rotation(A, tries=512):
    """Orthogonal ``k x k`` matrix whose first two columns span the inner plane.

    Among random rotations (fixed seed) it picks the one maximizing the
    smallest relative projection of a weight row onto the inner plane.
    """
    k = A.shape[1]
    nrm = np.linalg.norm(A, axis=1)
    rows = A[nrm > 0] / nrm[nrm > 0, None]
    if rows.shape[0] == 0:
        return np.eye(k)
    rng = np.random.default_rng(0)
    R = np.linalg.qr(rng.standard_normal((tries, k, k)))[0]
    R = np.concatenate([np.eye(k)[None], R])
    score = np.linalg.norm(np.einsum("nk,tkc->tnc", rows, R[:, :, :2]), axis=2).min(axis=1)
    return R[int(np.argmax(score))]


def _outer_nodes(dim, order):
    """Tensor Gauss-Hermite rule for ``N(0, I_dim)``."""
    x, w = special.roots_hermitenorm(order)
    w = w / math.sqrt(TWO_PI)
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=1)
    wts = np.ones(pts.shape[0])
    for g in np.meshgrid(*([w] * dim), indexing="ij"):
        wts = wts * g.reshape(-1)
    return pts, wts


def _hybrid_setup(A, b):
    R = _split_rotation(A)
    return A @ R[:, :2], A @ R[:, 2:]


def hybrid_moment(A, b, kf, kg, outer_order, inner_order, level):
    Ain, Aout = _hybrid_setup(A, b)
    z, w = _outer_nodes(Aout.shape[1], outer_order)
    N, n = z.shape[0], A.shape[0]
    vals = _planar_moment(
        np.broadcast_to(Ain, (N, n, 2)), b + z @ Aout.T,
        np.broadcast_to(kf, (N, n)), np.broadcast_to(kg, (N, n)), inner_order, level,
    )
    return float(w @ vals)


_GL16 = np.polynomial.legendre.leggauss(16)


def _radial_panels(R, level, core=12.0, h=3.0, ratio=1.15):
    """Composite 16-point Gauss-Legendre nodes and weights on ``[0, R]``.

    Panels have width ``h`` up to ``core`` and then grow geometrically, which
    follows the slowly decaying tails met close to the critical scale.
    """
    h, ratio = h / level, ratio ** (1.0 / level)
    edges = list(np.arange(0.0, min(core, R), h)) + [min(core, R)]
    while edges[-1] < R:
        edges.append(min(R, edges[-1] * ratio))
    edges = np.unique(np.asarray(edges))
    a, c = edges[:-1, None], edges[1:, None]
    t, w = _GL16
    return (0.5 * (a + c) + 0.5 * (c - a) * t).reshape(-1), (0.5 * (c - a) * w).reshape(-1)


def hybrid_exp(A, b, k, C, growth, inner_order, level):
    """``E exp(f^2/C^2)`` with the outer one or two coordinates in polar form.

    Along an outer direction the integrand decays at least like
    ``exp(-(1/2 - growth^2/C^2) r^2)``; that rate fixes the truncation radius.
    The Gaussian density enters as a shift of the exponent so that large
    inner values never overflow before being damped.
    """
    if C <= math.sqrt(2.0) * growth:
        return math.inf
    beta = 0.5 - (growth / C) ** 2
    R = math.sqrt(36.0 / beta) + 4.0
    r, wr = _radial_panels(R, level)
    Ain, Aout = _hybrid_setup(A, b)
    m = Aout.shape[1]
    if m == 1:
        z = np.concatenate([-r[::-1], r])[:, None]
        w = np.concatenate([wr[::-1], wr]) / math.sqrt(TWO_PI)
    else:
        M = 12 * level
        th = (np.arange(M) + 0.5) * TWO_PI / M
        z = (r[:, None, None] * np.stack([np.cos(th), np.sin(th)], -1)[None]).reshape(-1, 2)
        w = np.repeat(wr * r, M) / M
    N, n = z.shape[0], A.shape[0]
    vals = _planar_exp(
        np.broadcast_to(Ain, (N, n, 2)), b + z @ Aout.T, np.broadcast_to(k, (N, n)),
        np.full(N, C), inner_order, level, shift=-0.5 * (z * z).sum(1),
    )
    with np.errstate(invalid="ignore", over="ignore"):
        return float(w @ vals)


_HYBRID_MAX_ORDER = {3: 400, 4: 100}


def _refined_scalar(evaluate, rank, quad, what):
    level = 1
    cur = evaluate(level)
    while True:
        nxt = evaluate(2 * level)
        if _converged(cur, nxt, quad) or (math.isinf(cur) and math.isinf(nxt)):
            return nxt
        level *= 2
        if 2 * level > quad.max_refine:
            raise ConvergenceError(
                f"{what} did not converge in {rank} dimensions",
                estimate=nxt,
                bracket=(min(cur, nxt), max(cur, nxt)),
            )
        cur = nxt


def _hybrid_converged(evaluate, rank, quad, what):
    """Raise outer order and inner refinement together until two passes agree."""
    q, level = quad.order, 1
    cur = evaluate(q, level)
    while True:
        q2 = min(int(math.ceil(1.5 * q)), _HYBRID_MAX_ORDER[rank])
        nxt = evaluate(q2, 2 * level)
        if _converged(cur, nxt, quad) or (math.isinf(cur) and math.isinf(nxt)):
            return nxt
        if q2 == _HYBRID_MAX_ORDER[rank] or 2 * level >= quad.max_refine:
            raise ConvergenceError(
                f"{what} did not converge in {rank} dimensions",
                estimate=nxt,
                bracket=(min(cur, nxt), max(cur, nxt)),
            )
        q, level, cur = q2, 2 * level, nxt


# ---------------------------------------------------------------------------
# Public batched entry points


class Prepared:
    """A batch of functions reduced to a common low-dimensional form."""

    def __init__(self, funcs, quad, pair_with=None):
        self.quad = quad
        self.items = []
        planar = []
        self.planar_index = []
        self.other = []
        for j, f in enumerate(funcs):
            W, b, kf = as_arrays(f)
            if pair_with is None:
                W, b, kf = simplify(W, b, kf)
                kg = kf
            else:
                W2, b2, k2 = as_arrays(pair_with[j])
                if W2.shape[1] != W.shape[1]:
                    raise InvalidInputError("dimension mismatch between paired functions")
                n1 = W.shape[0]
                W = np.vstack([W, W2])
                b = np.concatenate([b, b2])
                kg = np.concatenate([np.zeros(n1), k2])
                kf = np.concatenate([kf, np.zeros(W2.shape[0])])
            A, rank = reduce_weights(W, quad.max_rank)
            if rank <= 2:
                self.planar_index.append(j)
                planar.append((A[:, :2] if A.shape[1] > 2 else A, b, kf, kg))
            else:
                self.other.append((j, A, b, kf, kg, rank))
        self.n = len(funcs)
        if planar:
            self.A, self.b, self.kf, self.kg = _pad(planar, 2)
        self.planar_index = np.array(self.planar_index, dtype=int)
        self._growth = None

    def growth(self):
        """Per-function asymptotic slope ``max_u |h(u)|``."""
        if self._growth is None:
            g = np.zeros(self.n)
            if self.planar_index.size:
                g[self.planar_index] = planar_growth(self.A, self.kf)
            for j, A, b, kf, kg, rank in self.other:
                g[j] = sphere_growth(A, kf)
            self._growth = g
        return self._growth


def _converged(v1, v2, quad):
    return np.abs(v1 - v2) <= quad.abs_tol + quad.rel_tol * np.abs(v2)


def moments(funcs, quad=DEFAULT_QUAD, pair_with=None):
    """``E[f_j(x) g_j(x)]`` for each function (``g = f`` when ``pair_with`` is None)."""
    prep = Prepared(funcs, quad, pair_with)
    out = np.zeros(prep.n)
    if prep.planar_index.size:
        out[prep.planar_index] = _refined(
            lambda idx, lev: _planar_moment(
                prep.A[idx], prep.b[idx], prep.kf[idx], prep.kg[idx], quad.order, lev
            ),
            prep.planar_index.size,
            quad,
            use_gh=quad.scheme == "gauss-hermite-tensor",
            gh=lambda i, order: gh_moment(prep.A[i], prep.b[i], prep.kf[i], prep.kg[i], order),
        )
    for j, A, b, kf, kg, rank in prep.other:
        if quad.scheme == "gauss-hermite-tensor":
            v1 = gh_moment(A, b, kf, kg, _gh_order_for(rank, quad.order))
            v2 = gh_moment(A, b, kf, kg, _gh_order_for(rank, int(1.5 * quad.order)))
            if not _converged(v1, v2, quad):
                raise ConvergenceError(
                    f"Gauss-Hermite moment did not converge in {rank} dimensions",
                    estimate=v2,
                    bracket=(min(v1, v2), max(v1, v2)),
                )
            out[j] = v2
        else:
            out[j] = _hybrid_converged(
                lambda q, lev: hybrid_moment(A, b, kf, kg, q, quad.order, lev), rank, quad, "moment"
            )
    return out


def _refined(evaluate, count, quad, use_gh=False, gh=None):
    """Evaluate with arc refinement ``level`` and ``2 level`` until they agree."""
    idx = np.arange(count)
    out = np.empty(count)
    if use_gh:
        hi_order = int(math.ceil(1.5 * quad.order))
        pending = []
        for i in idx:
            v1, v2 = gh(i, quad.order), gh(i, hi_order)
            if _converged(v1, v2, quad):
                out[i] = v2
            else:
                pending.append(i)
        idx = np.array(pending, dtype=int)
        if idx.size == 0:
            return out
    level = 1
    cur = evaluate(idx, level)
    while idx.size:
        nxt = evaluate(idx, 2 * level)
        ok = _converged(cur, nxt, quad) | (np.isinf(cur) & np.isinf(nxt))
        out[idx[ok]] = nxt[ok]
        idx, cur = idx[~ok], nxt[~ok]
        level *= 2
        if idx.size and level >= quad.max_refine:
            raise ConvergenceError(
                "angular quadrature did not converge", estimate=float(cur[0]), bracket=None
            )
    return out


def exp_moments(funcs, C, quad=DEFAULT_QUAD, level=None, prepared=None):
    """``E exp(f_j(x)^2 / C_j^2)`` for each function; ``inf`` when divergent.

    With ``level`` given the angular refinement is fixed (used inside the
    bisection loop); otherwise it is refined until two levels agree.
    """
    prep = prepared if prepared is not None else Prepared(funcs, quad)
    C = np.broadcast_to(np.asarray(C, dtype=float), (prep.n,)).copy()
    if np.any(C <= 0):
        raise InvalidInputError("C must be positive")
    out = np.zeros(prep.n)
    crit = math.sqrt(2.0) * prep.growth()
    diverge = C <= crit
    pi = prep.planar_index
    if pi.size:
        live = ~diverge[pi]
        vals = np.full(pi.size, np.inf)
        sub = np.nonzero(live)[0]
        if sub.size:
            if level is not None:
                vals[sub] = _planar_exp(
                    prep.A[sub], prep.b[sub], prep.kf[sub], C[pi[sub]], quad.order, level
                )
            else:
                vals[sub] = _refined(
                    lambda idx, lev: _planar_exp(
                        prep.A[sub[idx]], prep.b[sub[idx]], prep.kf[sub[idx]],
                        C[pi[sub[idx]]], quad.order, lev,
                    ),
                    sub.size,
                    quad,
                    use_gh=quad.scheme == "gauss-hermite-tensor",
                    gh=lambda i, order: gh_exp(
                        prep.A[sub[i]], prep.b[sub[i]], prep.kf[sub[i]], C[pi[sub[i]]], order
                    ),
                )
        out[pi] = vals
    growth = prep.growth()
    for j, A, b, kf, kg, rank in prep.other:
        if diverge[j]:
            out[j] = np.inf
            continue
        if quad.scheme == "gauss-hermite-tensor":
            v1 = gh_exp(A, b, kf, C[j], _gh_order_for(rank, quad.order))
            v2 = gh_exp(A, b, kf, C[j], _gh_order_for(rank, int(1.5 * quad.order)))
            if level is None and not _converged(v1, v2, quad):
                raise ConvergenceError(
                    f"Gauss-Hermite exponential moment did not converge in {rank} dimensions",
                    estimate=v2,
                    bracket=(min(v1, v2), max(v1, v2)),
                )
            out[j] = v2
            continue

        def ev(lev, A=A, b=b, kf=kf, c=C[j], g=growth[j]):
            return hybrid_exp(A, b, kf, c, g, quad.order, lev)

        if level is not None:
            out[j] = ev(level)
        else:
            out[j] = _refined_scalar(ev, rank, quad, "exponential moment")
    return out

"""Seeded Monte-Carlo experiments.

Every experiment works with finite families: reported suprema are
finite-family lower bounds of the supremum over the continuous class.
Random streams are keyed by ``(seed, index)``, so trial outputs do not depend
on thread scheduling; reports are merged in trial-id order.
"""

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .bounds import DEFAULT_CONSTANTS, agnostic_alpha, agnostic_eta, neurips_confidence, neurips_sample_bound
from .chaining import deviation_bound, dudley_integral, finite_profile
from .covering import DEFAULT_CAP, build_network_net
from .errors import CardinalityCapError, InvalidInputError
from .gaussian_analysis import draw_samples, network_second_moments, noise_sigma, relu_cross_moments
from .io import csv_text, dumps
from .quadrature import DEFAULT_QUAD
from .relu_model import (
    SQRT_LN2,
    NetworkParams,
    ParameterClass,
    as_network,
    sample_neuron_arrays,
    sample_parameter_class,
    validate_membership,
)
from .rng import stream
from .subgaussian import psi2_distances, psi2_norms

SUP_NOTE = "finite-family lower bound of the sup"
VACUOUS_NOTE = (
    "sample sizes demanded by the isometry theorem with its explicit constants are far beyond desk "
    "scale; these runs check implication structure, the one-sided deviation bound and rates only"
)
SEARCH_NOTE = (
    "sublevel sets are sampled by random search and teacher perturbations; they need not resemble "
    "the sets an optimizer would reach"
)


def default_threads():
    env = os.environ.get("NEURIPS_LAB_THREADS")
    if env:
        try:
            v = int(env)
        except ValueError:
            raise InvalidInputError(f"NEURIPS_LAB_THREADS must be an integer, got {env!r}")
        if v < 1:
            raise InvalidInputError("NEURIPS_LAB_THREADS must be at least 1")
        return v
    return 1


# ---------------------------------------------------------------------------
# Reports


@dataclass
class TrialReport:
    trial_id: int
    seed: int
    measured: dict
    flags: dict = field(default_factory=dict)
    wall_time: float = 0.0


@dataclass
class ExperimentReport:
    """Per-trial rows plus a summary.

    Wall-clock times are kept out of :meth:`csv_text` and :meth:`summary_json`
    so that both are byte-identical across runs; :meth:`timing` returns them
    separately.
    """

    experiment: str
    config: dict
    trials: list
    summary: dict
    notes: list = field(default_factory=list)
    passed: bool = True

    def columns(self):
        if not self.trials:
            return ["trial_id", "seed"]
        t = self.trials[0]
        return ["trial_id", "seed", *t.measured, *t.flags]

    def csv_text(self):
        rows = [[t.trial_id, t.seed, *t.measured.values(), *t.flags.values()] for t in self.trials]
        return csv_text(self.columns(), rows)

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "version": __version__,
            "config": self.config,
            "summary": self.summary,
            "notes": self.notes,
            "passed": self.passed,
        }

    def summary_json(self):
        return dumps(self.to_dict())

    def timing(self):
        return {
            "total_seconds": float(sum(t.wall_time for t in self.trials)),
            "trials": [{"trial_id": t.trial_id, "seconds": t.wall_time} for t in self.trials],
        }


def _parallel(fn, ids, threads):
    ids = list(ids)
    threads = default_threads() if threads is None else threads
    if threads < 1:
        raise InvalidInputError("threads must be at least 1")

    def timed(i):
        t0 = time.perf_counter()
        rep = fn(i)
        rep.wall_time = time.perf_counter() - t0
        return rep

    if threads == 1 or len(ids) <= 1:
        return [timed(i) for i in ids]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(timed, ids))


def _slope(ms, values):
    """Least-squares slope of ``log(values)`` against ``log(ms)``."""
    x = np.log(np.asarray(ms, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


# ---------------------------------------------------------------------------
# Vectorized evaluation of many networks


def _stack(nets):
    """Stacked arrays of a family; narrower networks are padded with inert neurons."""
    nets = [as_network(p) for p in nets]
    if len({p.d for p in nets}) != 1:
        raise InvalidInputError("family members must share the input dimension")
    n = max(p.n for p in nets)
    K, d = len(nets), nets[0].d
    W, b, k = np.zeros((K, n, d)), np.zeros((K, n)), np.zeros((K, n))
    for j, p in enumerate(nets):
        W[j, : p.n], b[j, : p.n], k[j, : p.n] = p.W, p.b, p.kappa
    return W, b, k


def _eval_stack(W, b, k, X, chunk=2000):
    """Values ``(K, m)`` of ``K`` networks with arrays ``(K, n, d)``, ``(K, n)``, ``(K, n)``."""
    out = np.empty((W.shape[0], X.shape[0]))
    for s in range(0, W.shape[0], chunk):
        pre = np.einsum("knd,md->kmn", W[s : s + chunk], X) + b[s : s + chunk, None, :]
        out[s : s + chunk] = np.einsum("kmn,kn->km", np.maximum(pre, 0.0), k[s : s + chunk])
    return out


def _mu_sq_diff(W, b, k, teacher):
    """``||phi_j - phi_teacher||_mu^2`` for stacked candidates, from closed-form neuron cross moments."""
    K, n = W.shape[:2]
    Wc = np.concatenate([W, np.broadcast_to(teacher.W, (K,) + teacher.W.shape)], axis=1)
    bc = np.concatenate([b, np.broadcast_to(teacher.b, (K, teacher.n))], axis=1)
    kc = np.concatenate([k, np.broadcast_to(-teacher.kappa.astype(float), (K, teacher.n))], axis=1)
    G = relu_cross_moments(Wc[:, :, None, :], bc[:, :, None], Wc[:, None, :, :], bc[:, None, :])
    return np.maximum(np.einsum("ki,kij,kj->k", kc, G, kc), 0.0)


# ---------------------------------------------------------------------------
# Isometry experiments


@dataclass(frozen=True)
class NeuripsConfig:
    cls: ParameterClass
    family_size: int
    m: int
    s: float
    u: float
    trials: int
    seed: int

    def __post_init__(self):
        if self.family_size < 1 or self.m < 1 or self.trials < 1:
            raise InvalidInputError("family_size, m and trials must be positive")
        if not 0 < self.s:
            raise InvalidInputError("s must be positive")
        if self.u < 2:
            raise InvalidInputError("u must be at least 2")

    def to_dict(self):
        return {
            "cls": self.cls.to_dict(),
            "family_size": self.family_size,
            "m": self.m,
            "s": self.s,
            "u": self.u,
            "trials": self.trials,
            "seed": self.seed,
        }


def normalized_family(cls, size, seed, quad=DEFAULT_QUAD):
    """``size`` sampled networks rescaled to unit mu-norm (zero-norm draws are skipped)."""
    out = []
    batch = size
    offset = 0
    while len(out) < size:
        nets = sample_parameter_class(cls, offset + batch, seed)[offset:]
        sq = network_second_moments(nets, quad)
        for p, v in zip(nets, sq):
            if v > 1e-12 and len(out) < size:
                out.append(p.scaled(1.0 / math.sqrt(v)))
        offset += batch
    return out


def estimate_sup_deviation(family, S, mu_norms):
    """``max_j |‖phi_j‖_m^2 - ‖phi_j‖_mu^2| / ‖phi_j‖_mu^2`` over a finite family."""
    mu = np.asarray(mu_norms, dtype=float).reshape(-1)
    if mu.shape[0] != len(family):
        raise InvalidInputError("one mu-norm per family member is required")
    if np.any(~(mu > 0)):
        raise InvalidInputError("family contains a member with zero mu-norm")
    vals = _eval_stack(*_stack(family), S.points)
    emp = (vals * vals).mean(axis=1)
    mu2 = mu * mu
    return float(np.max(np.abs(emp - mu2) / mu2))


def _family_geometry(family, quad):
    """Dudley value of the pairwise psi_2 distances and the largest psi_2 norm."""
    N = len(family)
    ii, jj = np.triu_indices(N, 1)
    D = np.zeros((N, N))
    if ii.size:
        d = psi2_distances([(family[i], family[j]) for i, j in zip(ii, jj)], quad)
        D[ii, jj] = d
        D[jj, ii] = d
    delta = max(e.value for e in psi2_norms(family, quad))
    return dudley_integral(finite_profile(D)), float(delta)


def verify_neurips(cfg, quad=DEFAULT_QUAD, threads=None, geometry=True):
    """Empirical isometry check on a normalized finite family.

    Each trial draws a fresh sample set, measures the relative sup deviation
    ``s_tilde`` and compares the absolute sup deviation with the one-sided
    deviation bound built from measured family geometry.
    """
    family = normalized_family(cfg.cls, cfg.family_size, cfg.seed, quad)
    W, b, k = _stack(family)
    if geometry:
        N_meas, delta = _family_geometry(family, quad)
        dev_bound = deviation_bound(cfg.u, cfg.m, N_meas, delta)
    else:
        N_meas = delta = dev_bound = math.nan

    def trial(t):
        S = draw_samples(cfg.m, cfg.cls.d, cfg.seed, index=t + 1)
        vals = _eval_stack(W, b, k, S.points)
        # family members have unit mu-norm, so absolute and relative deviations agree
        dev = np.abs((vals * vals).mean(axis=1) - 1.0)
        s_tilde = float(dev.max())
        flags = {"neurips": s_tilde <= cfg.s}
        if geometry:
            flags["deviation_bound_violated"] = s_tilde > dev_bound
        return TrialReport(t, cfg.seed, {"s_tilde": s_tilde}, flags)

    trials = _parallel(trial, range(cfg.trials), threads)
    s_vals = np.array([t.measured["s_tilde"] for t in trials])
    conf = neurips_confidence(cfg.u)
    summary = {
        "s_tilde_semantics": SUP_NOTE,
        "s_tilde_median": float(np.median(s_vals)),
        "s_tilde_max": float(s_vals.max()),
        "neurips_fraction": float(np.mean(s_vals <= cfg.s)),
        "theoretical_confidence": conf.value,
        "theoretical_confidence_vacuous": conf.vacuous,
        "theoretical_sample_bound": neurips_sample_bound(cfg.cls, cfg.s, cfg.u) if cfg.s < 1 else math.inf,
    }
    passed = True
    if geometry:
        p = min(17.0 * math.exp(-cfg.u / 4.0), 1.0)
        slack = p + 3.0 * math.sqrt(p * (1.0 - p) / cfg.trials)
        frac = float(np.mean(s_vals > dev_bound))
        passed = frac <= slack
        summary.update(
            {
                "N_measured": N_meas,
                "delta_measured": delta,
                "deviation_bound": dev_bound,
                "deviation_bound_violation_fraction": frac,
                "deviation_bound_allowed_fraction": slack,
                "deviation_bound_ok": passed,
            }
        )
    return ExperimentReport("verify-neurips", cfg.to_dict(), trials, summary, [SUP_NOTE, VACUOUS_NOTE], passed)


def concentration_rate(net, ms, trials, seed, quad=DEFAULT_QUAD, threads=None):
    """Mean ``|‖phi‖_m^2 - ‖phi‖_mu^2|`` per sample size and its log-log slope."""
    net = as_network(net)
    mu2 = float(network_second_moments([net], quad)[0])
    W, b, k = _stack([net])
    ms = [int(m) for m in ms]

    def trial(t):
        meas = {}
        for i, m in enumerate(ms):
            S = draw_samples(m, net.d, seed, index=(t + 1) * len(ms) + i)
            v = _eval_stack(W, b, k, S.points)[0]
            meas[f"abs_dev_m{m}"] = abs(float(np.dot(v, v)) / m - mu2)
        return TrialReport(t, seed, meas)

    reps = _parallel(trial, range(trials), threads)
    means = [float(np.mean([r.measured[f"abs_dev_m{m}"] for r in reps])) for m in ms]
    slope = _slope(ms, means)
    summary = {"mu_norm_sq": mu2, "ms": ms, "mean_abs_dev": means, "slope": slope,
               "slope_in_range": -0.65 <= slope <= -0.35}
    config = {"network": net.to_dict(), "ms": ms, "trials": trials, "seed": seed}
    return ExperimentReport("concentration-rate", config, reps, summary, [], True)


# ---------------------------------------------------------------------------
# Nets and radius


def verify_net(cls, epsilon, probes, seed, quad=DEFAULT_QUAD, tol=1e-3, cap=DEFAULT_CAP, weights="ball",
               cover_seed=0):
    """Build the epsilon-net and measure probe distances to their assigned net members.

    The distance to the assigned member bounds the distance to the net from
    above, so passing this check implies the covering property on the probes.
    """
    net = build_network_net(cls, epsilon, cap=cap, cover_seed=cover_seed)
    if net.cardinality > cap:
        raise CardinalityCapError(f"net has {net.cardinality} members, above the cap {cap}")
    probes_list = sample_parameter_class(cls, probes, seed, weights=weights)
    witnesses = [net.witness(p) for p in probes_list]
    dist = psi2_distances(list(zip(probes_list, witnesses)), quad) if probes_list else np.zeros(0)
    trials = [
        TrialReport(i, seed, {"psi2_distance": float(dv)}, {"within_epsilon": bool(dv <= epsilon + tol)})
        for i, dv in enumerate(dist)
    ]
    worst = float(dist.max()) if dist.size else 0.0
    passed = worst <= epsilon + tol
    summary = {
        "cardinality": int(net.cardinality),
        "cardinality_bound": float(net.cardinality_bound),
        "cardinality_within_bound": net.cardinality <= net.cardinality_bound,
        "construction": net.construction,
        "max_distance": worst,
        "max_distance_semantics": "distance to the assigned member, an upper bound on the distance to the net",
        "tolerance": tol,
    }
    passed = passed and summary["cardinality_within_bound"]
    config = {"cls": cls.to_dict(), "epsilon": epsilon, "probes": probes, "seed": seed, "tol": tol,
              "weights": weights, "cover_seed": cover_seed, "quad": quad.to_dict()}
    return ExperimentReport("verify-net", config, trials, summary, [], passed)


def verify_radius(cls, count, seed, quad=DEFAULT_QUAD, tol=1e-4, weights="ball"):
    """psi_2 norms of sampled single neurons against the radius ``2 c_w``."""
    c1 = ParameterClass(1, cls.d, cls.c_w, cls.c_b)
    nets = sample_parameter_class(c1, count, seed, weights=weights)
    vals = np.array([e.value for e in psi2_norms(nets, quad)]) if nets else np.zeros(0)
    bound = 2.0 * cls.c_w
    trials = [
        TrialReport(i, seed, {"psi2": float(v)}, {"within_radius": bool(v <= bound + tol)})
        for i, v in enumerate(vals)
    ]
    violations = int(np.sum(vals > bound + tol))
    summary = {"bound": bound, "max_psi2": float(vals.max()) if vals.size else 0.0, "violations": violations}
    config = {"cls": c1.to_dict(), "count": count, "seed": seed, "tol": tol, "weights": weights,
              "quad": quad.to_dict()}
    return ExperimentReport("verify-radius", config, trials, summary, [], violations == 0)


# ---------------------------------------------------------------------------
# Sublevel-set experiments


PERTURBATION_SCALES = (0.01, 0.05, 0.2)


def project_to_class(W, b, cls):
    """Shrink weights into the ``c_w`` ball and clip bias ratios into the admissible interval."""
    W = np.array(W, dtype=float)
    b = np.array(b, dtype=float)
    nw = np.linalg.norm(W, axis=-1)
    shrink = np.where(nw > cls.c_w, cls.c_w / np.maximum(nw, 1e-300), 1.0)
    W = W * shrink[..., None]
    nw = nw * shrink
    b = np.clip(b, -cls.c_b * nw, SQRT_LN2 * nw)
    return W, b


def sample_candidates(cls, teacher, budget, seed, per_scale=None, stream_index=1):
    """Random class members plus Gaussian perturbations of the teacher at three scales.

    Returns stacked arrays ``(W, b, kappa)``; the teacher itself is row 0.
    """
    teacher = as_network(teacher)
    rng = stream(seed, stream_index)
    per_scale = budget // 10 if per_scale is None else per_scale
    Wr, br, kr = sample_neuron_arrays(cls, budget * cls.n, rng)
    Ws = [teacher.W[None], Wr.reshape(budget, cls.n, cls.d)]
    bs = [teacher.b[None], br.reshape(budget, cls.n)]
    ks = [teacher.kappa[None], kr.reshape(budget, cls.n)]
    for sc in PERTURBATION_SCALES:
        gW = rng.standard_normal((per_scale, cls.n, cls.d)) * sc * cls.c_w
        gb = rng.standard_normal((per_scale, cls.n)) * sc * cls.c_w
        W, b = project_to_class(teacher.W[None] + gW, teacher.b[None] + gb, cls)
        Ws.append(W)
        bs.append(b)
        ks.append(np.broadcast_to(teacher.kappa, (per_scale, cls.n)))
    return np.concatenate(Ws), np.concatenate(bs), np.concatenate(ks).astype(float)


def _check_teacher(cls, teacher):
    teacher = as_network(teacher)
    rep = validate_membership(teacher, cls)
    if not rep.passed:
        raise InvalidInputError("teacher is not admissible: " + "; ".join(rep.violations))
    return teacher


def teacher_student(cls, teacher, m, xi, t, search_budget, seed, per_scale=None, trial_id=0, envelope=False):
    """Noiseless teacher labels; sampled sublevel set versus the measured isometry on ``R_t``.

    ``R_t`` holds the sampled candidates at mu-distance above ``t`` from the
    teacher, each difference normalized to unit mu-norm.  Whenever its sup
    deviation is at most ``1 - xi^2/t^2``, every sampled member of the
    sublevel set must lie within mu-distance ``t``; ``implication_holds``
    records that.
    """
    if not (t > xi >= 0):
        raise InvalidInputError("need t > xi >= 0")
    teacher = _check_teacher(cls, teacher)
    S = draw_samples(m, cls.d, seed, teacher=teacher, index=3 * trial_id)
    W, b, k = sample_candidates(cls, teacher, search_budget, seed, per_scale, stream_index=3 * trial_id + 1)
    vals = _eval_stack(W, b, k, S.points)
    # Row 0 is the teacher, evaluated with the same arithmetic as every
    # candidate, so its residuals (and empirical risk) are exactly zero.
    resid = vals - vals[0][None, :]
    risk = np.sqrt((resid * resid).mean(axis=1))
    dist = np.sqrt(_mu_sq_diff(W, b, k, teacher))
    in_q = risk <= xi
    in_r = dist > t
    # the teacher labels are noiseless, so ||phi_q - phi_teacher||_m is the empirical risk
    s_tilde = float(np.max(np.abs(risk[in_r] ** 2 / dist[in_r] ** 2 - 1.0))) if in_r.any() else 0.0
    threshold = 1.0 - xi * xi / (t * t)
    premise = s_tilde <= threshold
    q_max = float(dist[in_q].max())
    holds = (not premise) or q_max <= t
    measured = {
        "candidates": int(W.shape[0]),
        "sublevel_size": int(in_q.sum()),
        "r_t_size": int(in_r.sum()),
        "s_tilde": s_tilde,
        "threshold": threshold,
        "max_sublevel_mu_distance": q_max,
    }
    rep = TrialReport(trial_id, seed, measured, {"premise": premise, "implication_holds": holds})
    if envelope:
        rep.envelope = (dist, risk)
    return rep


def teacher_student_runs(cls, m, xi, t, search_budget, runs, seed, teacher=None, per_scale=None, threads=None):
    """``runs`` independent teacher-student trials; teachers are drawn from the class unless given."""
    def one(r):
        tch = teacher
        if tch is None:
            Wt, bt, kt = sample_neuron_arrays(cls, cls.n, stream(seed, 3 * r + 2))
            tch = NetworkParams.from_arrays(Wt, bt, kt)
        return teacher_student(cls, tch, m, xi, t, search_budget, seed, per_scale, trial_id=r)

    trials = _parallel(one, range(runs), threads)
    holds = all(tr.flags["implication_holds"] for tr in trials)
    summary = {
        "runs": runs,
        "premise_count": int(sum(tr.flags["premise"] for tr in trials)),
        "implication_violations": int(sum(not tr.flags["implication_holds"] for tr in trials)),
        "s_tilde_semantics": SUP_NOTE,
    }
    config = {"cls": cls.to_dict(), "m": m, "xi": xi, "t": t, "search_budget": search_budget, "runs": runs,
              "seed": seed, "teacher": None if teacher is None else as_network(teacher).to_dict()}
    return ExperimentReport("teacher-student", config, trials, summary, [SUP_NOTE, SEARCH_NOTE, VACUOUS_NOTE],
                            holds)


def agnostic_experiment(cls, teacher, noise_psi2, m, omega, search_budget, seed, eta_inputs=None,
                        consts=DEFAULT_CONSTANTS, per_scale=None):
    """Noisy labels; expected risks of sampled sublevel members over a grid of ``omega``.

    The expected risk of ``q`` is ``sqrt(||phi_q - phi_teacher||_mu^2 + sigma^2)``
    for Gaussian noise of standard deviation ``sigma`` independent of the
    inputs.  ``eta_inputs`` (a :class:`~neurips_lab.bounds.GeneralizationInputs`
    without ``omega``) adds the theoretical tolerance per grid point.
    """
    if noise_psi2 < 0:
        raise InvalidInputError("noise_psi2 must be non-negative")
    omegas = [float(omega)] if np.ndim(omega) == 0 else [float(o) for o in omega]
    if any(o < 0 for o in omegas):
        raise InvalidInputError("omega must be non-negative")
    teacher = _check_teacher(cls, teacher)
    S = draw_samples(m, cls.d, seed, teacher=teacher, noise_psi2=noise_psi2, index=0)
    W, b, k = sample_candidates(cls, teacher, search_budget, seed, per_scale, stream_index=1)
    vals = _eval_stack(W, b, k, S.points)
    resid = vals - S.labels[None, :]
    risk = np.sqrt((resid * resid).mean(axis=1))
    sigma = noise_sigma(noise_psi2)
    expected = np.sqrt(_mu_sq_diff(W, b, k, teacher) + sigma * sigma)
    teacher_risk = float(risk[0])
    trials = []
    for i, o in enumerate(omegas):
        xi = math.sqrt(teacher_risk ** 2 + o * o)
        in_q = risk <= xi
        meas = {"omega": o, "xi": xi, "sublevel_size": int(in_q.sum()),
                "max_expected_risk": float(expected[in_q].max())}
        flags = {}
        if eta_inputs is not None:
            eta = agnostic_eta(replace(eta_inputs, omega=o), agnostic_alpha(cls, m), consts)
            meas["eta"] = eta
            flags["within_eta"] = bool(meas["max_expected_risk"] <= eta)
        trials.append(TrialReport(i, seed, meas, flags))
    summary = {"noise_sigma": sigma, "teacher_empirical_risk": teacher_risk, "candidates": int(W.shape[0]),
               "max_expected_risk_semantics": SUP_NOTE}
    config = {"cls": cls.to_dict(), "teacher": teacher.to_dict(), "noise_psi2": noise_psi2, "m": m,
              "omega": omegas, "search_budget": search_budget, "seed": seed}
    return ExperimentReport("agnostic", config, trials, summary, [SUP_NOTE, SEARCH_NOTE], True)


def multiplier_check(cls, noise_psi2, ms, trials, seed, family_size=20, quad=DEFAULT_QUAD, threads=None):
    """Sup over a sampled family of ``|<f, phi>_m - <f, phi>_mu|`` for independent Gaussian ``f``.

    ``f`` has psi_2 norm ``noise_psi2`` and is independent of the inputs, so
    ``<f, phi>_mu = 0``.  The mean sup gap is fitted against ``m`` on a
    log-log scale; the expected slope is ``-1/2``.
    """
    family = sample_parameter_class(cls, family_size, seed)
    W, b, k = _stack(family)
    sigma = noise_sigma(noise_psi2)
    ms = [int(m) for m in ms]

    def trial(t):
        meas = {}
        for i, m in enumerate(ms):
            rng = stream(seed, (t + 1) * len(ms) + i)
            X = rng.standard_normal((m, cls.d))
            f = sigma * rng.standard_normal(m)
            vals = _eval_stack(W, b, k, X)
            meas[f"sup_gap_m{m}"] = float(np.max(np.abs(vals @ f) / m))
        return TrialReport(t, seed, meas)

    reps = _parallel(trial, range(trials), threads)
    means = [float(np.mean([r.measured[f"sup_gap_m{m}"] for r in reps])) for m in ms]
    scale = cls.n ** 1.5 * cls.c_w * math.sqrt(8.0 * cls.c_b + cls.d + math.log(2.0) / 4.0)
    summary = {"ms": ms, "mean_sup_gap": means, "sup_gap_semantics": SUP_NOTE,
               "complexity_scale_over_sqrt_m": [scale / math.sqrt(m) for m in ms]}
    if sigma > 0:
        slope = _slope(ms, means)
        summary["slope"] = slope
        summary["slope_in_range"] = -0.65 <= slope <= -0.35
    config = {"cls": cls.to_dict(), "noise_psi2": noise_psi2, "ms": ms, "trials": trials, "seed": seed,
              "family_size": family_size}
    return ExperimentReport("multiplier-check", config, reps, summary, [SUP_NOTE], True)

"""Command-line front end.

Each subcommand declares its parameters once; values are resolved from
built-in defaults, then an optional flat JSON config file, then command-line
flags.  The resolved config, with the source of every value, is written into
each output.

Exit codes: 0 success, 1 a verification invariant failed, 2 bad input or
configuration, 3 a numerical routine failed to converge.
"""

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .bounds import (
    GeneralizationInputs,
    TheoremConstants,
    agnostic_alpha,
    agnostic_eta,
    agnostic_probability,
    alpha_requirement,
    neurips_confidence,
    neurips_min_deviation,
    neurips_regimes,
    neurips_sample_bound,
    recovery_sample_bound,
)
from .chaining import entropy_integral_closed_form, lambda_bound_class
from .covering import build_network_net, covering_number_bound, log_covering_number_bound, write_net
from .errors import (
    CardinalityCapError,
    ConvergenceError,
    DomainError,
    InvalidInputError,
    UnconfiguredConstantError,
    UnsupportedReductionError,
)
from .gaussian_analysis import network_mu_norm
from .harness import (
    NeuripsConfig,
    agnostic_experiment,
    default_threads,
    teacher_student,
    teacher_student_runs,
    verify_neurips,
    verify_net,
    verify_radius,
)
from .io import atomic_write_text, csv_text, dumps
from .quadrature import QuadratureSpec
from .relu_model import NetworkParams, ParameterClass, sample_neuron_arrays
from .rng import stream
from .subgaussian import psi2_norm

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class Param:
    name: str
    kind: type
    default: object = None
    help: str = ""
    check: object = None
    required: bool = False


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _at_least(k):
    return lambda v: v >= k


def _floats(text):
    if isinstance(text, list):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


CLASS = [
    Param("n", int, 1, "neurons per network", _at_least(1)),
    Param("d", int, 2, "input dimension", _at_least(1)),
    Param("cw", float, 1.0, "weight-norm cap c_w", _nonneg),
    Param("cb", float, 1.0, "bias-ratio cap c_b in [1, 3]", lambda v: 1.0 <= v <= 3.0),
]
QUAD = [
    Param("quad_order", int, 24, "Gauss-Legendre nodes per angular arc", _at_least(8)),
    Param("abs_tol", float, 1e-8, "absolute quadrature tolerance", _pos),
    Param("rel_tol", float, 1e-6, "relative quadrature tolerance", _pos),
]
OUTPUT = [
    Param("seed", int, 0, "master seed", _nonneg),
    Param("out", str, None, "output path (stdout when omitted)"),
    Param("format", str, "json", "csv or json", lambda v: v in ("csv", "json")),
]
THREADS = [Param("threads", int, None, "worker threads (default: NEURIPS_LAB_THREADS or 1)", _at_least(1))]
CONSTS = [
    Param("C3", float, None, "constant of the agnostic tolerance", _nonneg),
    Param("C4", float, None, "constant of the agnostic probability", _nonneg),
    Param("C5", float, None, "constant of the agnostic probability", _nonneg),
]

COMMANDS = {
    "bounds": CLASS
    + [
        Param("s", float, 0.5, "isometry deviation in (0, 1)", lambda v: 0 < v < 1),
        Param("u", float, 2.0, "confidence parameter (>= 2)", _at_least(2)),
        Param("t", float, None, "recovery radius", _pos),
        Param("xi", float, 0.0, "sublevel threshold", _nonneg),
        Param("m", int, None, "sample size for inversion and alpha", _at_least(1)),
        Param("epsilon", float, None, "radius for the covering-number formula", _pos),
        Param("omega", float, 0.0, "agnostic slack", _nonneg),
        Param("v1", float, 1.0, "agnostic parameter v1", _nonneg),
        Param("v2", float, 1.0, "agnostic parameter v2", _nonneg),
        Param("mu_risk", float, 0.0, "expected risk of the best network", _nonneg),
        Param("c_pstar", float, 0.0, "multiplier constant of the best network", _nonneg),
    ]
    + CONSTS
    + OUTPUT,
    "cover": CLASS
    + [
        Param("epsilon", float, None, "net radius", _pos, required=True),
        Param("cap", int, 10_000_000, "enumeration cap", _at_least(1)),
        Param("cover_seed", int, 0, "seed of the greedy angle cover (d >= 3)", _nonneg),
        Param("members", str, None, "JSON-lines path for the net members"),
    ]
    + OUTPUT,
    "verify-net": CLASS
    + [
        Param("epsilon", float, 0.5, "net radius", _pos),
        Param("probes", int, 200, "sampled probes", _at_least(1)),
        Param("tol", float, 1e-3, "quadrature slack", _nonneg),
        Param("weights", str, "ball", "ball or sphere", lambda v: v in ("ball", "sphere")),
        Param("cap", int, 10_000_000, "enumeration cap", _at_least(1)),
        Param("cover_seed", int, 0, "seed of the greedy angle cover (d >= 3)", _nonneg),
    ]
    + QUAD
    + OUTPUT,
    "verify-neurips": CLASS
    + [
        Param("family_size", int, 100, "normalized family size", _at_least(1)),
        Param("m", int, 10_000, "sample size", _at_least(1)),
        Param("s", float, 0.5, "isometry threshold", _pos),
        Param("u", float, 40.0, "confidence parameter (>= 2)", _at_least(2)),
        Param("trials", int, 200, "independent sample sets", _at_least(1)),
        Param("geometry", int, 1, "1 to measure family geometry and the deviation bound", lambda v: v in (0, 1)),
    ]
    + QUAD
    + THREADS
    + OUTPUT,
    "verify-radius": CLASS
    + [
        Param("count", int, 1000, "sampled neurons", _at_least(1)),
        Param("tol", float, 1e-4, "violation tolerance", _nonneg),
        Param("weights", str, "ball", "ball or sphere", lambda v: v in ("ball", "sphere")),
    ]
    + QUAD
    + OUTPUT,
    "teacher-student": CLASS
    + [
        Param("m", int, 1000, "sample size", _at_least(1)),
        Param("xi", float, 0.1, "sublevel threshold", _nonneg),
        Param("t", float, 0.5, "recovery radius (> xi)", _pos),
        Param("budget", int, 10_000, "random-search draws", _at_least(1)),
        Param("runs", int, 1, "independent teacher-student runs", _at_least(1)),
        Param("teacher", str, None, "teacher network as JSON (drawn from the class if omitted)"),
        Param("envelope", str, None, "CSV path for (mu-distance, empirical risk) of every candidate of run 0"),
    ]
    + THREADS
    + OUTPUT,
    "agnostic": CLASS
    + [
        Param("noise_psi2", float, 0.2, "psi_2 norm of the label noise", _nonneg),
        Param("m", int, 1000, "sample size", _at_least(1)),
        Param("omega", _floats, [0.0, 0.1, 0.2, 0.5], "comma-separated omega grid"),
        Param("budget", int, 10_000, "random-search draws", _at_least(1)),
        Param("teacher", str, None, "teacher network as JSON (drawn from the class if omitted)"),
        Param("s", float, None, "deviation for the theoretical tolerance", lambda v: 0 < v < 1),
        Param("v1", float, 1.0, "agnostic parameter v1", _nonneg),
        Param("v2", float, 1.0, "agnostic parameter v2", _nonneg),
        Param("mu_risk", float, 0.0, "expected risk of the best network", _nonneg),
        Param("c_pstar", float, 0.0, "multiplier constant of the best network", _nonneg),
    ]
    + CONSTS
    + OUTPUT,
    "psi2": [
        Param("network", str, None, "network as JSON text or a path to a JSON file", required=True),
    ]
    + QUAD
    + OUTPUT,
}

VERIFICATION = {"verify-net", "verify-neurips", "verify-radius", "teacher-student"}


def _flag(name):
    return "--" + name.replace("_", "-")


def build_parser():
    parser = argparse.ArgumentParser(prog="neurips-lab", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, params in COMMANDS.items():
        p = sub.add_parser(cmd)
        p.add_argument("--config", default=None, help="flat JSON config file; flags override its values")
        for prm in params:
            p.add_argument(_flag(prm.name), dest=prm.name, default=argparse.SUPPRESS, help=prm.help)
    return parser


def _coerce(prm, value, source):
    if value is None:
        return None
    try:
        if prm.kind is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(value)
            v = int(value)
        elif prm.kind is float:
            v = float(value)
            if not math.isfinite(v):
                raise ValueError(value)
        elif prm.kind is str:
            v = value if isinstance(value, str) else json.dumps(value)
        else:
            v = prm.kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{source}: field {prm.name!r}: cannot read {value!r} as {prm.kind.__name__}")
    if prm.check is not None and not prm.check(v):
        raise ConfigError(f"{source}: field {prm.name!r}: value {v!r} is out of range")
    return v


def load_config(path):
    """Parse a flat JSON object; errors name the line and column or the offending field."""
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        return {}
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    for k, v in data.items():
        if isinstance(v, dict):
            raise ConfigError(f"{path}: field {k!r}: nested objects are not allowed")
    return data


def resolve(command, flags, file_values):
    """Merge defaults, file values and flags; returns ``(values, provenance)``."""
    params = {p.name: p for p in COMMANDS[command]}
    for key in file_values:
        if key == "command":
            if file_values[key] != command:
                raise ConfigError(f"config: field 'command' is {file_values[key]!r}, not {command!r}")
            continue
        if key not in params:
            raise ConfigError(f"config: unknown field {key!r} for command {command!r}")
    values, prov = {}, {}
    for name, prm in params.items():
        if name in flags:
            values[name] = _coerce(prm, flags[name], "flag")
            prov[name] = "flag" if name not in file_values else "flag (overrides file)"
        elif name in file_values:
            values[name] = _coerce(prm, file_values[name], "config")
            prov[name] = "file"
        else:
            values[name] = prm.default
            prov[name] = "default"
        if prm.required and values[name] is None:
            raise ConfigError(f"missing required field {name!r}")
    return values, prov


def _cls(v, n=None):
    return ParameterClass(v["n"] if n is None else n, v["d"], v["cw"], v["cb"])


def _quad(v):
    return QuadratureSpec(order=v["quad_order"], abs_tol=v["abs_tol"], rel_tol=v["rel_tol"])


def _network(text):
    p = Path(text)
    try:
        if not text.lstrip().startswith("{") and p.exists():
            text = p.read_text(encoding="utf-8")
        return NetworkParams.from_json(text)
    except (json.JSONDecodeError, OSError) as exc:
        raise ConfigError(f"cannot read network: {exc}")


def _teacher(v, cls, index):
    if v["teacher"] is not None:
        return _network(v["teacher"])
    W, b, k = sample_neuron_arrays(cls, cls.n, stream(v["seed"], index))
    return NetworkParams.from_arrays(W, b, k)


def _constants(v):
    return TheoremConstants(C3=v.get("C3"), C4=v.get("C4"), C5=v.get("C5"))


@dataclass
class Result:
    doc: dict
    report: object = None
    passed: bool = True


# ---------------------------------------------------------------------------
# Commands


def cmd_bounds(v):
    cls = _cls(v)
    consts = _constants(v)
    s, u = v["s"], v["u"]
    conf = neurips_confidence(u)
    lin, quadratic = neurips_regimes(cls, s, u, consts)
    integral, gamma2 = entropy_integral_closed_form(cls)
    doc = {
        "neurips_sample_bound": neurips_sample_bound(cls, s, u, consts),
        "neurips_sample_bound_ceil": neurips_sample_bound(cls, s, u, consts, integer=True),
        "neurips_regimes": {"linear": lin, "quadratic": quadratic,
                            "active": "linear" if lin >= quadratic else "quadratic"},
        "confidence": conf.value,
        "confidence_vacuous": conf.vacuous,
        "entropy_integral": integral,
        "gamma2_bound": gamma2,
        "lambda_bound": lambda_bound_class(cls),
        "constants": consts.to_dict(),
    }
    if v["epsilon"] is not None:
        doc["covering_number_bound"] = covering_number_bound(cls, v["epsilon"])
        doc["log_covering_number_bound"] = log_covering_number_bound(cls, v["epsilon"])
    if v["t"] is not None:
        doc["recovery_sample_bound"] = recovery_sample_bound(cls, v["t"], v["xi"], u, consts)
    if v["m"] is not None:
        doc["min_deviation_at_m"] = neurips_min_deviation(cls, v["m"], u, consts)
        doc["alpha"] = agnostic_alpha(cls, v["m"])
    inputs = GeneralizationInputs(s=s, u=u, t=v["t"], xi=v["xi"], omega=v["omega"], v1=v["v1"], v2=v["v2"],
                                  mu_risk=v["mu_risk"], c_pstar=v["c_pstar"])
    req = alpha_requirement(inputs, cls, consts, m=v["m"])
    doc["alpha_requirement"] = {"value": req.value, "alpha": req.alpha, "satisfied": req.satisfied,
                                "flags": req.flags}
    if v["m"] is not None:
        try:
            doc["agnostic_eta"] = agnostic_eta(inputs, agnostic_alpha(cls, v["m"]), consts)
        except UnconfiguredConstantError as exc:
            doc["agnostic_eta"] = f"unconfigured: {exc}"
        try:
            p = agnostic_probability(v["m"], v["v1"], v["v2"], u, consts)
            doc["agnostic_probability"] = {"value": p.value, "vacuous": p.vacuous}
        except UnconfiguredConstantError as exc:
            doc["agnostic_probability"] = f"unconfigured: {exc}"
    return Result(doc)


def cmd_cover(v):
    cls = _cls(v)
    net = build_network_net(cls, v["epsilon"], cap=v["cap"], cover_seed=v["cover_seed"])
    doc = {"net": net.metadata(), "within_bound": net.cardinality <= net.cardinality_bound}
    if v["members"] is not None:
        meta_path = v["members"] + ".meta.json"
        write_net(net, v["members"], meta_path)
        doc["members_path"] = v["members"]
    return Result(doc)


def _report(rep):
    return Result(rep.to_dict(), rep, rep.passed)


def cmd_verify_net(v):
    return _report(verify_net(_cls(v), v["epsilon"], v["probes"], v["seed"], _quad(v), tol=v["tol"],
                              cap=v["cap"], weights=v["weights"], cover_seed=v["cover_seed"]))


def cmd_verify_neurips(v):
    cfg = NeuripsConfig(_cls(v), v["family_size"], v["m"], v["s"], v["u"], v["trials"], v["seed"])
    return _report(verify_neurips(cfg, _quad(v), threads=v["threads"], geometry=bool(v["geometry"])))


def cmd_verify_radius(v):
    return _report(verify_radius(_cls(v, n=1), v["count"], v["seed"], _quad(v), tol=v["tol"], weights=v["weights"]))


def cmd_teacher_student(v):
    cls = _cls(v)
    if not v["t"] > v["xi"]:
        raise ConfigError("t must exceed xi")
    teacher = _network(v["teacher"]) if v["teacher"] is not None else None
    rep = teacher_student_runs(cls, v["m"], v["xi"], v["t"], v["budget"], v["runs"], v["seed"], teacher=teacher, threads=v["threads"])
    if v["envelope"] is not None:
        tch = teacher if teacher is not None else _teacher({"teacher": None, "seed": v["seed"]}, cls, 2)
        tr = teacher_student(cls, tch, v["m"], v["xi"], v["t"], v["budget"], v["seed"], envelope=True)
        dist, risk = tr.envelope
        atomic_write_text(v["envelope"], csv_text(["mu_distance", "empirical_risk"], zip(dist, risk)))
    return _report(rep)


def cmd_agnostic(v):
    cls = _cls(v)
    teacher = _teacher(v, cls, 2)
    inputs = None
    if v["s"] is not None:
        inputs = GeneralizationInputs(s=v["s"], v1=v["v1"], v2=v["v2"], mu_risk=v["mu_risk"], c_pstar=v["c_pstar"])
    rep = agnostic_experiment(cls, teacher, v["noise_psi2"], v["m"], v["omega"], v["budget"], v["seed"], eta_inputs=inputs, consts=_constants(v))
    return _report(rep)


def cmd_psi2(v):
    net = _network(v["network"])
    quad = _quad(v)
    est = psi2_norm(net, quad)
    doc = {"network": net.to_dict(), "psi2": est.value, "bracket": list(est.bracket),
           "moment_at_value": est.moment_at_value, "mu_norm": network_mu_norm(net, quad)}
    return Result(doc)


HANDLERS = {
    "bounds": cmd_bounds,
    "cover": cmd_cover,
    "verify-net": cmd_verify_net,
    "verify-neurips": cmd_verify_neurips,
    "verify-radius": cmd_verify_radius,
    "teacher-student": cmd_teacher_student,
    "agnostic": cmd_agnostic,
    "psi2": cmd_psi2,
}


def _header(command, values, prov):
    return {
        "command": command,
        "version": __version__,
        "seed": values.get("seed"),
        # the output path is left out so that identical runs are byte-identical wherever they write
        "resolved_config": {k: {"value": values[k], "source": prov[k]} for k in values if k != "out"},
    }


def started_utc():
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def _trial_rows(rep):
    cols = rep.columns()
    return [dict(zip(cols, [t.trial_id, t.seed, *t.measured.values(), *t.flags.values()])) for t in rep.trials]


def _emit(command, values, prov, result, elapsed, started):
    """Write the artifact(s); wall-clock data goes to a ``.timing.json`` sidecar."""
    header = _header(command, values, prov)
    rep = result.report
    out, fmt = values.get("out"), values.get("format", "json")
    sidecar = None
    if fmt == "csv" and rep is not None:
        body = "# " + json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n" + rep.csv_text()
        sidecar = dumps({**header, "result": result.doc})
    else:
        doc = {**header, "result": result.doc}
        if rep is not None:
            doc["trials"] = _trial_rows(rep)
        body = dumps(doc)
    if out is None:
        sys.stdout.write(body)
        return
    atomic_write_text(out, body)
    if sidecar is not None:
        atomic_write_text(out + ".summary.json", sidecar)
    timing = {"elapsed_seconds": elapsed, "started_utc": started}
    if rep is not None and rep.timing()["total_seconds"] > 0:
        # only experiments that run trials through the worker pool time them individually
        timing["trials"] = rep.timing()
    atomic_write_text(out + ".timing.json", dumps({"command": command, "version": __version__, "wall_clock": timing}))


def run(argv=None):
    """Parse ``argv``, dispatch and return the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    command = args.command
    try:
        file_values = load_config(args.config) if args.config else {}
        values, prov = resolve(command, flags, file_values)
        if values.get("threads") is None and "threads" in values:
            values["threads"] = default_threads()
            if os.environ.get("NEURIPS_LAB_THREADS"):
                prov["threads"] = "environment"
        started, t0 = started_utc(), time.perf_counter()
        result = HANDLERS[command](values)
        _emit(command, values, prov, result, time.perf_counter() - t0, started)
    except (ConfigError, InvalidInputError, DomainError, UnconfiguredConstantError, CardinalityCapError,
            UnsupportedReductionError, OSError) as exc:
        print(f"neurips-lab {command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"neurips-lab {command}: numerical failure: {exc} (estimate {exc.estimate}, bracket {exc.bracket})",
              file=sys.stderr)
        return EXIT_NUMERIC
    if command in VERIFICATION and not result.passed:
        print(f"neurips-lab {command}: verification failed", file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

"""Command-line front end.

Every subcommand prints its primary result on stdout; with ``--out DIR``
the result (and any secondary files) are also written into ``DIR``.
JSON is written with fixed 17-digit floats so repeated runs are
byte-identical.

Exit codes: 0 success, 1 a verification check failed, 2 malformed input,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import jsonio
from .errors import InputError, MinPeriodError
from .norms import VectorNorm, induced_norm, lp, norm_eval
from .odesim import detect_period, integrate, max_step
from .spectral import ATTAINMENT_TOL, check_attainment, eigenvalues
from .systems import system_from_spec
from .verify import (
    DEFAULT_SHIFTS,
    LEMMA_TOL,
    MEAN_TOL,
    QUAD_BUDGET,
    REPORT_TOL,
    bound_check,
    check_lemma1,
    check_wirtinger,
    estimate_lipschitz,
    period_trajectory,
    periodic_initial_state,
    search_min_k,
    shifted_difference,
)

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

TOLERANCES = {
    "attainment": ATTAINMENT_TOL,
    "report": REPORT_TOL,
    "period": 1e-6,
    "lemma": LEMMA_TOL,
    "quad": QUAD_BUDGET,
    "mean": MEAN_TOL,
}
CONFIG_KEYS = {"command", "inputs", "out", "tolerances", "seed", "format"}

# per-command options: dest -> (flag, type, default, help)
COMMANDS = {
    "norm": {
        "vec": ("--vec", str, None, "vector: JSON array or file"),
        "norm": ("--norm", str, None, "norm spec: JSON object or file (default l2)"),
    },
    "induced": {
        "matrix": ("--matrix", str, None, "matrix: JSON rows or file"),
        "norm": ("--norm", str, None, "norm spec (default l2)"),
        "restarts": ("--restarts", int, 64, "multistart restarts"),
        "iterations": ("--iterations", int, 500, "iterations per restart"),
        "method": ("--method", str, "auto", "auto, exact or multistart"),
    },
    "spectrum": {
        "matrix": ("--matrix", str, None, "matrix: JSON rows or file"),
    },
    "attainment": {
        "matrix": ("--matrix", str, None, "matrix: JSON rows or file"),
        "norm": ("--norm", str, None, "norm spec (default l2)"),
        "restarts": ("--restarts", int, 64, "multistart restarts"),
    },
    "simulate": {
        "system": ("--system", str, None, "system spec: JSON object or file"),
        "x0": ("--x0", str, None, "initial state (default: on the dominant periodic orbit)"),
        "t_end": ("--t-end", float, None, "final time (default one detected period)"),
        "h": ("--h", float, None, "largest step (default 0.01/L)"),
    },
    "period": {
        "system": ("--system", str, None, "system spec"),
        "x0": ("--x0", str, None, "initial state"),
        "horizon": ("--horizon", float, None, "search horizon (default 4*pi/L, doubled)"),
        "h": ("--h", float, None, "largest step"),
    },
    "verify-bound": {
        "system": ("--system", str, None, "system spec"),
        "x0": ("--x0", str, None, "initial state"),
        "horizon": ("--horizon", float, None, "period search horizon"),
        "shifts": ("--shifts", str, None, "shifts as fractions of T, JSON array"),
        "allow_estimated": ("--allow-estimated", bool, False,
                            "accept a sampled (lower-bound) Lipschitz constant"),
    },
    "lemma1": {
        "system": ("--system", str, None, "system spec"),
        "x0": ("--x0", str, None, "initial state"),
        "tau": ("--tau", float, 0.5, "shift as a fraction of the period"),
        "component": ("--component", int, 0, "component index k"),
    },
    "wirtinger": {
        "system": ("--system", str, None, "system spec"),
        "x0": ("--x0", str, None, "initial state"),
        "tau": ("--tau", float, 0.5, "shift as a fraction of the period"),
        "component": ("--component", int, 0, "component index k"),
    },
    "lipschitz-est": {
        "system": ("--system", str, None, "system spec"),
        "box": ("--box", str, "[-1, 1]", "box: [lo, hi] or per-component pairs"),
        "pairs": ("--pairs", int, 10_000, "number of sampled pairs"),
    },
    "search": {
        "ensemble": ("--ensemble", str, None, "ensemble spec: JSON object, file or family name"),
        "count": ("--count", int, 100, "number of draws"),
        "workers": ("--workers", int, 1, "parallel workers"),
    },
}
REQUIRED = {"vec", "matrix", "system"}


@dataclass
class RunConfig:
    command: str
    inputs: dict = field(default_factory=dict)
    out: Optional[str] = None
    tolerances: dict = field(default_factory=lambda: dict(TOLERANCES))
    seed: int = 0
    format: Optional[str] = None

    @classmethod
    def from_json(cls, data) -> "RunConfig":
        """Strict: any unknown key is an error."""
        if not isinstance(data, dict):
            raise InputError("config must be a JSON object")
        extra = set(data) - CONFIG_KEYS
        if extra:
            raise InputError(f"unknown config keys {sorted(extra)}")
        tols = data.get("tolerances", {})
        bad = set(tols) - set(TOLERANCES)
        if bad:
            raise InputError(f"unknown tolerance names {sorted(bad)}")
        cfg = cls(command=data.get("command", ""))
        cfg.tolerances.update({k: float(v) for k, v in tols.items()})
        inputs = data.get("inputs", {})
        if cfg.command:
            if cfg.command not in COMMANDS:
                raise InputError(f"unknown command {cfg.command!r}")
            unknown = set(inputs) - set(COMMANDS[cfg.command])
            if unknown:
                raise InputError(f"unknown inputs for {cfg.command}: {sorted(unknown)}")
        elif inputs:
            raise InputError("config inputs need a command")
        cfg.inputs = dict(inputs)
        cfg.out = data.get("out")
        cfg.seed = int(data.get("seed", 0))
        cfg.format = data.get("format")
        if cfg.format not in (None, "json", "csv"):
            raise InputError(f"format must be json or csv, got {cfg.format!r}")
        return cfg


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--out", help="directory to write result files into")
    g.add_argument("--format", choices=("json", "csv"))
    g.add_argument("--seed", type=int)
    g.add_argument("--config", help="JSON run config (unknown keys rejected)")
    for name, default in TOLERANCES.items():
        g.add_argument(f"--tol-{name}", type=float, dest=f"tol_{name}",
                       help=f"tolerance override (default {default:g})")
    parser = argparse.ArgumentParser(
        prog="minperiod",
        description="Minimal periods of Lipschitz ODEs: norms, spectra, simulation and checks.")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, opts in COMMANDS.items():
        p = sub.add_parser(cmd, parents=[common])
        for dest, (flag, typ, default, hlp) in opts.items():
            if typ is bool:
                p.add_argument(flag, dest=dest, action="store_true", default=None, help=hlp)
            else:
                suffix = "" if default is None else f" (default {default})"
                p.add_argument(flag, dest=dest, type=typ, default=None, help=hlp + suffix)
    return parser


def resolve(args: argparse.Namespace) -> RunConfig:
    """Merge command-line flags over the config file over built-in defaults."""
    if args.config:
        cfg = RunConfig.from_json(jsonio.load_json_arg(args.config))
        if cfg.command and cfg.command != args.command:
            raise InputError(f"config is for {cfg.command!r}, not {args.command!r}")
        cfg.command = args.command
    else:
        cfg = RunConfig(args.command)
    for dest, (flag, _, default, _) in COMMANDS[args.command].items():
        value = getattr(args, dest)
        if value is not None:
            cfg.inputs[dest] = value
        elif dest not in cfg.inputs:
            if dest in REQUIRED:
                raise InputError(f"{args.command} needs {flag}")
            cfg.inputs[dest] = default
    for name in TOLERANCES:
        value = getattr(args, f"tol_{name}")
        if value is not None:
            cfg.tolerances[name] = value
    if args.out is not None:
        cfg.out = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if args.format is not None:
        cfg.format = args.format
    return cfg


class Output:
    """Writes the primary result to stdout and, with ``out``, files into a directory."""

    def __init__(self, out: Optional[str], stream=None):
        self.out = out
        self.stream = stream if stream is not None else sys.stdout
        if out:
            os.makedirs(out, exist_ok=True)

    def emit(self, text: str, filename: Optional[str] = None, primary: bool = True):
        if not text.endswith("\n"):
            text += "\n"
        if primary:
            self.stream.write(text)
        if self.out and filename:
            with open(os.path.join(self.out, filename), "w", newline="") as fh:
                fh.write(text)


def _inline(value):
    return value if not isinstance(value, str) else jsonio.load_json_arg(value)


def _norm_arg(value, scalar_field: str = "real") -> VectorNorm:
    if value is None:
        return lp(2, scalar_field)
    return VectorNorm.from_json(_inline(value), scalar_field)


def _matrix_arg(value) -> np.ndarray:
    return jsonio.parse_matrix(_inline(value))


def _system_arg(value):
    return system_from_spec(_inline(value))


def _x0_arg(system, value):
    if value is None:
        return periodic_initial_state(system)
    x0 = jsonio.parse_vector(_inline(value))
    if x0.shape != (system.dimension,):
        raise InputError(f"x0 has {x0.size} entries, system dimension is {system.dimension}")
    return x0


def cmd_norm(cfg: RunConfig, out: Output) -> int:
    v = jsonio.parse_vector(_inline(cfg.inputs["vec"]))
    sf = "complex" if np.iscomplexobj(v) else "real"
    value = float(norm_eval(v, _norm_arg(cfg.inputs["norm"], sf)))
    if cfg.format == "json":
        out.emit(jsonio.dumps({"value": value}), "norm.json")
    else:
        out.emit(format(value, ".17g"), "norm.txt")
    return EXIT_OK


def cmd_induced(cfg: RunConfig, out: Output) -> int:
    A = _matrix_arg(cfg.inputs["matrix"])
    sf = "complex" if np.iscomplexobj(A) else "real"
    res = induced_norm(A, _norm_arg(cfg.inputs["norm"], sf), restarts=cfg.inputs["restarts"],
                       iterations=cfg.inputs["iterations"], seed=cfg.seed,
                       method=cfg.inputs["method"])
    out.emit(jsonio.dumps(res), "induced.json")
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig, out: Output) -> int:
    info = eigenvalues(_matrix_arg(cfg.inputs["matrix"]))
    if cfg.format == "csv":
        lines = ["index,re,im,modulus"]
        for i, z in enumerate(info.eigenvalues):
            lines.append(",".join([str(i)] + [format(float(v), ".17g")
                                              for v in (z.real, z.imag, abs(z))]))
        out.emit("\n".join(lines), "spectrum.csv")
    else:
        out.emit(jsonio.dumps(info), "spectrum.json")
    return EXIT_OK


def cmd_attainment(cfg: RunConfig, out: Output) -> int:
    A = _matrix_arg(cfg.inputs["matrix"])
    sf = "complex" if np.iscomplexobj(A) else "real"
    res = check_attainment(A, _norm_arg(cfg.inputs["norm"], sf),
                           attainment_tol=cfg.tolerances["attainment"],
                           restarts=cfg.inputs["restarts"], seed=cfg.seed)
    out.emit(jsonio.dumps(res), "attainment.json")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, out: Output) -> int:
    system = _system_arg(cfg.inputs["system"])
    x0 = _x0_arg(system, cfg.inputs["x0"])
    h = cfg.inputs["h"] if cfg.inputs["h"] is not None else max_step(system.field)
    t_end = cfg.inputs["t_end"]
    if t_end is None:
        t_end = detect_period(system.field, x0, period_tol=cfg.tolerances["period"]).T
    if not math.isfinite(h):
        h = t_end
    traj = integrate(system.field, x0, t_end, h)
    if cfg.format == "json":
        summary = {"t0": traj.t0, "t_end": traj.t_end, "h": traj.h,
                   "steps": len(traj.states) - 1, "x0": jsonio.encode_vector(traj.states[0]),
                   "final_state": jsonio.encode_vector(traj.states[-1]),
                   "max_local_error": traj.max_local_error}
        out.emit(jsonio.dumps(summary), "simulate.json")
    else:
        out.emit(traj.to_csv(), "trajectory.csv")
    return EXIT_OK


def cmd_period(cfg: RunConfig, out: Output) -> int:
    system = _system_arg(cfg.inputs["system"])
    x0 = _x0_arg(system, cfg.inputs["x0"])
    est = detect_period(system.field, x0, search_horizon=cfg.inputs["horizon"],
                        h=cfg.inputs["h"], period_tol=cfg.tolerances["period"])
    out.emit(jsonio.dumps(est), "period.json")
    return EXIT_OK


def cmd_verify_bound(cfg: RunConfig, out: Output) -> int:
    system = _system_arg(cfg.inputs["system"])
    x0 = None if cfg.inputs["x0"] is None else _x0_arg(system, cfg.inputs["x0"])
    shifts = DEFAULT_SHIFTS
    if cfg.inputs["shifts"] is not None:
        shifts = _inline(cfg.inputs["shifts"])
        if not isinstance(shifts, list) or not all(isinstance(s, (int, float)) for s in shifts):
            raise InputError("shifts must be a JSON array of numbers")
    report = bound_check(system, x0, shifts=shifts, report_tol=cfg.tolerances["report"],
                         lemma_tol=cfg.tolerances["lemma"], quad_budget=cfg.tolerances["quad"],
                         mean_tol=cfg.tolerances["mean"], horizon=cfg.inputs["horizon"],
                         seed=cfg.seed, allow_estimated=bool(cfg.inputs["allow_estimated"]),
                         keep_trajectory=True, period_tol=cfg.tolerances["period"])
    out.emit(jsonio.dumps(report), "report.json")
    if report.trajectory is not None:
        out.emit(report.trajectory.to_csv(), "trajectory.csv", primary=False)
    if report.vacuous:
        print(f"warning: {report.message}", file=sys.stderr)
        return EXIT_OK
    return EXIT_OK if report.passed else EXIT_CHECK


def _shifted(cfg: RunConfig):
    """Detect the period and build the shifted difference for one (tau, k)."""
    system = _system_arg(cfg.inputs["system"])
    x0 = _x0_arg(system, cfg.inputs["x0"])
    fld = system.field
    frac = cfg.inputs["tau"]
    if not 0 < frac <= 1:
        raise InputError(f"tau is a fraction of the period in (0, 1], got {frac}")
    est = detect_period(fld, x0, period_tol=cfg.tolerances["period"])
    traj, N = period_trajectory(fld, x0, est.T, [frac])
    sd = shifted_difference(traj, frac * est.T, cfg.inputs["component"], T=N * traj.h)
    return fld, est, sd


def cmd_lemma1(cfg: RunConfig, out: Output) -> int:
    fld, est, sd = _shifted(cfg)
    rep = check_lemma1(sd, fld.L, cfg.tolerances["lemma"])
    data = {"T": est.T, "L": fld.L, "tau": sd.tau, "component": sd.k, **rep.to_json(),
            "asserted": fld.is_complex}
    if not fld.is_complex and not rep.passed:
        data["flag"] = "HypothesisMismatch"
    out.emit(jsonio.dumps(data), "lemma1.json")
    return EXIT_CHECK if fld.is_complex and not rep.passed else EXIT_OK


def cmd_wirtinger(cfg: RunConfig, out: Output) -> int:
    fld, est, sd = _shifted(cfg)
    rep = check_wirtinger(sd, fld.L, budget=cfg.tolerances["quad"],
                          mean_tol=cfg.tolerances["mean"])
    data = {"T": est.T, "L": fld.L, "tau": sd.tau, "component": sd.k, **rep.to_json()}
    out.emit(jsonio.dumps(data), "wirtinger.json")
    return EXIT_OK if rep.passed and rep.zero_mean else EXIT_CHECK


def cmd_lipschitz_est(cfg: RunConfig, out: Output) -> int:
    system = _system_arg(cfg.inputs["system"])
    box = _inline(cfg.inputs["box"])
    est = estimate_lipschitz(system.field, box, pairs=cfg.inputs["pairs"], seed=cfg.seed)
    data = {"estimate": est, "lower_bound": True, "pairs": cfg.inputs["pairs"],
            "seed": cfg.seed, "attached_L": system.L, "provenance": system.field.provenance}
    out.emit(jsonio.dumps(data), "lipschitz.json")
    return EXIT_OK


def cmd_search(cfg: RunConfig, out: Output) -> int:
    ens = cfg.inputs["ensemble"]
    if isinstance(ens, str) and ens.strip()[:1] not in "{[" and not os.path.exists(ens):
        spec = ens  # a bare family name
    else:
        spec = _inline(ens)
    res = search_min_k(spec, count=cfg.inputs["count"], seed=cfg.seed,
                       report_tol=cfg.tolerances["report"], workers=cfg.inputs["workers"])
    csv_text, json_text = res.to_csv(), jsonio.dumps(res)
    out.emit(csv_text, "distribution.csv", primary=cfg.format == "csv")
    out.emit(json_text, "summary.json", primary=cfg.format != "csv")
    return EXIT_OK if res.passed else EXIT_CHECK


HANDLERS = {
    "norm": cmd_norm,
    "induced": cmd_induced,
    "spectrum": cmd_spectrum,
    "attainment": cmd_attainment,
    "simulate": cmd_simulate,
    "period": cmd_period,
    "verify-bound": cmd_verify_bound,
    "lemma1": cmd_lemma1,
    "wirtinger": cmd_wirtinger,
    "lipschitz-est": cmd_lipschitz_est,
    "search": cmd_search,
}


def main(argv=None, stdout=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = resolve(args)
        out = Output(cfg.out, stdout)
        return HANDLERS[cfg.command](cfg, out)
    except MinPeriodError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, TypeError, KeyError) as exc:
        print(f"error: malformed input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ArithmeticError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()

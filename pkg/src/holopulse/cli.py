"""Command-line front end: gate simulations, adiabaticity studies, sweeps.

Experiment settings live in flat INI-style config files ([experiment] and
optional [sweep] sections, key = value lines); every key can be overridden
on the command line with --set.  Frequencies are entered in MHz and
converted once to rad/s at parse time (x 2 pi 1e6).  Data files carry no
timestamps, so re-running a config reproduces them byte for byte.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import adiabatic, gates, propagate, rydberg
from . import schedule as sched
from .qmat import distance_up_to_phase

MHZ = 2.0 * math.pi * 1e6  # rad/s per configured MHz

MODES = (
    "single-qubit",
    "two-qubit-effective",
    "two-qubit-full",
    "toggling",
    "adiabaticity",
)


class ConfigError(Exception):
    """Bad or missing experiment configuration."""


@dataclass
class ExperimentConfig:
    mode: str = "single-qubit"
    gate: str = "sx"
    cphase_gamma: float = math.pi
    theta0: float | None = None
    phi0: float | None = None
    gamma_plus: float | None = None
    omega: float = 2.0 * math.pi * 10e6
    n_per_step: dict = field(default_factory=dict)
    ramp_step_ns: float = 25.0
    initial: str = ""
    substep_divisor: int = 64
    trace_points: int = 512
    delta_ratio: float = 38.0
    v12_mode: str = "tracking"
    steps_per_period: int = 64
    output: str = "out"
    toy_phase_over_pi: list = field(default_factory=list)
    tau_scale_grid: list = field(default_factory=list)
    base_duration: float = 1e-6
    sweep_axis: str | None = None
    sweep_grid: list = field(default_factory=list)
    sweep_workers: int = 4


_DEFAULT_INITIAL = {
    "single-qubit": "0",
    "two-qubit-effective": "10",
    "two-qubit-full": "10",
}


def _get(parser, section, key, cast, default, where):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return cast(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: [{section}] {key} = {raw!r}: {exc}") from None


def _float_list(raw: str) -> list:
    items = [p.strip() for p in raw.split(",") if p.strip()]
    return [float(p) for p in items]


def load_config(path: str | Path, overrides=()) -> ExperimentConfig:
    """Parse a config file, applying section.key=value overrides in order."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not SECTION.KEY=VALUE")
        target, value = item.split("=", 1)
        if "." in target:
            section, key = target.split(".", 1)
        else:
            section, key = "experiment", target
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section.strip(), key.strip(), value.strip())

    where = str(path)
    cfg = ExperimentConfig()
    sec = "experiment"
    if not parser.has_section(sec):
        raise ConfigError(f"{where}: missing [experiment] section")
    cfg.mode = _get(parser, sec, "mode", str, cfg.mode, where).strip()
    if cfg.mode not in MODES:
        raise ConfigError(f"{where}: unknown mode {cfg.mode!r} (choose from {MODES})")
    cfg.gate = _get(parser, sec, "gate", str, cfg.gate, where).strip()
    cfg.cphase_gamma = _get(parser, sec, "cphase_gamma", float, cfg.cphase_gamma, where)
    cfg.theta0 = _get(parser, sec, "theta0", float, None, where)
    cfg.phi0 = _get(parser, sec, "phi0", float, None, where)
    cfg.gamma_plus = _get(parser, sec, "gamma_plus", float, None, where)
    omega_mhz = _get(parser, sec, "omega_mhz", float, 10.0, where)
    if omega_mhz <= 0:
        raise ConfigError(f"{where}: omega_mhz must be positive")
    cfg.omega = omega_mhz * MHZ
    n_all = _get(parser, sec, "n_per_step", int, None, where)
    steps = {}
    for step in (1, 2, 3, 5):
        v = _get(parser, sec, f"n_step{step}", int, None, where)
        if v is not None:
            steps[step] = v
    if n_all is not None:
        cfg.n_per_step = {k: n_all for k in (1, 2, 3, 5)}
    cfg.n_per_step.update(steps)
    cfg.ramp_step_ns = _get(parser, sec, "ramp_step_ns", float, cfg.ramp_step_ns, where)
    if cfg.ramp_step_ns <= 0:
        raise ConfigError(f"{where}: ramp_step_ns must be positive")
    cfg.initial = _get(parser, sec, "initial", str, "", where).strip()
    if not cfg.initial:
        cfg.initial = _DEFAULT_INITIAL.get(cfg.mode, "0")
    cfg.substep_divisor = _get(
        parser, sec, "substep_divisor", int, cfg.substep_divisor, where
    )
    cfg.trace_points = _get(parser, sec, "trace_points", int, cfg.trace_points, where)
    cfg.delta_ratio = _get(parser, sec, "delta_ratio", float, cfg.delta_ratio, where)
    cfg.v12_mode = _get(parser, sec, "v12_mode", str, cfg.v12_mode, where).strip()
    cfg.steps_per_period = _get(
        parser, sec, "steps_per_period", int, cfg.steps_per_period, where
    )
    cfg.output = _get(parser, sec, "output", str, cfg.output, where).strip()
    cfg.toy_phase_over_pi = _get(
        parser, sec, "toy_phase_over_pi", _float_list, [], where
    )
    cfg.tau_scale_grid = _get(parser, sec, "tau_scale_grid", _float_list, [], where)
    cfg.base_duration = _get(parser, sec, "base_duration_us", float, 1.0, where) * 1e-6

    if parser.has_section("sweep"):
        cfg.sweep_axis = _get(parser, "sweep", "axis", str, None, where)
        cfg.sweep_grid = _get(parser, "sweep", "grid", _float_list, [], where)
        cfg.sweep_workers = _get(parser, "sweep", "workers", int, 4, where)
        if cfg.sweep_axis is not None:
            cfg.sweep_axis = cfg.sweep_axis.strip()
    return cfg


def _gate_spec(cfg: ExperimentConfig) -> gates.GateSpec:
    two_qubit = cfg.mode.startswith("two-qubit")
    if cfg.gate.lower() == "custom" or (
        cfg.theta0 is not None or cfg.gamma_plus is not None
    ):
        missing = [
            k
            for k, v in (
                ("theta0", cfg.theta0),
                ("phi0", cfg.phi0),
                ("gamma_plus", cfg.gamma_plus),
            )
            if v is None
        ]
        if missing:
            raise ConfigError(f"custom gate requires keys: {', '.join(missing)}")
        return gates.from_triple(
            cfg.theta0, cfg.phi0, cfg.gamma_plus, two_qubit=two_qubit
        )
    try:
        spec = gates.table1(cfg.gate, gamma=cfg.cphase_gamma)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if two_qubit and not spec.two_qubit:
        return gates.from_triple(
            spec.theta0, spec.phi0, spec.gamma_plus, two_qubit=True, label=spec.label
        )
    if not two_qubit and spec.two_qubit:
        raise ConfigError(f"gate {spec.label!r} needs a two-qubit mode")
    return spec


_LAMBDA_STATES = {"e": 0, "0": 1, "1": 2}
_EFF_STATES = {"rr": 0, "10": 1, "11": 2}


def _initial_state(cfg: ExperimentConfig) -> np.ndarray:
    label = cfg.initial
    if cfg.mode == "single-qubit":
        v = np.zeros(3, dtype=complex)
        if label == "plus":
            v[1] = v[2] = 1.0 / math.sqrt(2.0)
        elif label in _LAMBDA_STATES:
            v[_LAMBDA_STATES[label]] = 1.0
        else:
            raise ConfigError(f"unknown single-qubit initial state {label!r}")
        return v
    if cfg.mode == "two-qubit-effective":
        v = np.zeros(3, dtype=complex)
        if label == "plus":
            v[1] = v[2] = 1.0 / math.sqrt(2.0)
        elif label in _EFF_STATES:
            v[_EFF_STATES[label]] = 1.0
        else:
            raise ConfigError(f"unknown effective-model initial state {label!r}")
        return v
    v = np.zeros(9, dtype=complex)
    if label == "plus":
        v[rydberg.BASIS.index("10")] = 1.0 / math.sqrt(2.0)
        v[rydberg.BASIS.index("11")] = 1.0 / math.sqrt(2.0)
    elif label in rydberg.BASIS:
        v[rydberg.BASIS.index(label)] = 1.0
    else:
        raise ConfigError(f"unknown two-qubit initial state {label!r}")
    return v


def _target_state(cfg, spec: gates.GateSpec, psi0: np.ndarray) -> np.ndarray:
    if cfg.mode == "single-qubit":
        if abs(psi0[0]) > 1e-12:
            raise ConfigError("single-qubit initial state must be logical (no |e>)")
        emb = np.eye(3, dtype=complex)
        emb[1:, 1:] = spec.target
        return emb @ psi0
    if cfg.mode == "two-qubit-effective":
        emb = np.eye(3, dtype=complex)
        emb[1:, 1:] = spec.target[2:, 2:]  # the controlled block drives {10, 11}
        return emb @ psi0
    comp = [rydberg.BASIS.index(lab) for lab in ("00", "01", "10", "11")]
    emb = np.eye(9, dtype=complex)
    emb[np.ix_(comp, comp)] = spec.target
    return emb @ psi0


def _build_schedule(cfg: ExperimentConfig, spec: gates.GateSpec):
    ramp_rate = math.pi / (cfg.ramp_step_ns * 1e-9)
    if cfg.mode == "single-qubit":
        n = cfg.n_per_step or 5
        return sched.plan_single_qubit(
            spec.theta0, spec.phi0, spec.gamma_plus, n_per_step=n,
            ramp_rate=ramp_rate, omega=cfg.omega, gate=spec,
        )
    delta = cfg.delta_ratio * cfg.omega
    omega_eff = 2.0 * cfg.omega**2 / delta
    n = cfg.n_per_step or None
    return sched.plan_two_qubit(
        spec.theta0, spec.phi0, spec.gamma_plus, n_per_step=n,
        ramp_rate=ramp_rate, omega=omega_eff, gate=spec,
    )


def _summary_core(cfg, spec, report, started) -> dict:
    return {
        "gate": spec.label,
        "mode": cfg.mode,
        "initial": cfg.initial,
        "area_mod_2pi": report.area_mod_2pi,
        "gamma_plus": report.gamma_plus_predicted,
        "per_step_area": report.per_step_area,
        "runtime_s": round(time.perf_counter() - started, 6),
    }


def _write_summary(outdir: Path, summary: dict):
    with open(outdir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_simulate(cfg: ExperimentConfig, outdir: Path) -> int:
    started = time.perf_counter()
    outdir.mkdir(parents=True, exist_ok=True)

    if cfg.mode == "adiabaticity":
        return run_adiabaticity(cfg, outdir, started)

    spec = _gate_spec(cfg)
    program = _build_schedule(cfg, spec)
    report = sched.audit(program)
    with open(outdir / "schedule.txt", "w", encoding="utf-8") as fh:
        fh.write(sched.schedule_to_text(program))
    if not report.ok:
        for v in report.violations:
            print(f"audit violation: {v}", file=sys.stderr)
        return 3

    if cfg.mode == "toggling":
        path, flips = sched.instantaneous_flip_model(program)
        ut = adiabatic.transition_operator(path, path.duration, flips)
        deviation = float(np.linalg.norm(ut - np.eye(3)))
        summary = _summary_core(cfg, spec, report, started)
        summary.update(
            {
                "fidelity": None,
                "gate_error": None,
                "leakage": None,
                "ut_deviation": deviation,
                "flip_count": len(flips),
            }
        )
        _write_summary(outdir, summary)
        print(f"toggling-frame deviation from identity: {deviation:.3e}")
        return 0

    psi0 = _initial_state(cfg)
    target = _target_state(cfg, spec, psi0)

    if cfg.mode == "two-qubit-full":
        delta = cfg.delta_ratio * cfg.omega
        result = rydberg.propagate_full(
            program, delta,
            steps_per_period=cfg.steps_per_period,
            initial=psi0, target=target,
            v12_mode=cfg.v12_mode, trace_points=cfg.trace_points,
        )
        labels = rydberg.BASIS
        logical = [rydberg.BASIS.index(lab) for lab in ("00", "01", "10", "11")]
        block_target = spec.target
    else:
        shortest = program.min_active_duration()
        result = propagate.evolve(
            program,
            substep=shortest / cfg.substep_divisor,
            initial=psi0, target=target,
            trace_points=cfg.trace_points,
            labels=(
                ("e", "0", "1")
                if cfg.mode == "single-qubit"
                else ("rr", "10", "11")
            ),
        )
        labels = (
            ("e", "0", "1") if cfg.mode == "single-qubit" else ("rr", "10", "11")
        )
        logical = [1, 2]
        block_target = (
            spec.target if cfg.mode == "single-qubit" else spec.target[2:, 2:]
        )

    psi_final = result.final_unitary @ psi0
    fidelity = float(np.abs(np.vdot(target, psi_final)) ** 2)
    leakage = propagate.subspace_leakage(result.final_unitary, logical)
    gate_err = propagate.gate_error(
        result.final_unitary, block_target, logical, max_leakage=0.5
    )

    propagate.write_trace_csv(result.trace, outdir / "trace.csv", labels)
    summary = _summary_core(cfg, spec, report, started)
    summary.update(
        {
            "fidelity": fidelity,
            "gate_error": gate_err,
            "leakage": leakage,
        }
    )
    if cfg.mode == "two-qubit-full":
        summary["delta_rad_s"] = cfg.delta_ratio * cfg.omega
        summary["steps_per_period"] = cfg.steps_per_period
        summary["v12_mode"] = cfg.v12_mode
    _write_summary(outdir, summary)
    print(
        f"{spec.label}: fidelity {fidelity:.6f}, gate error {gate_err:.3e}, "
        f"leakage {leakage:.3e}"
    )
    return 0


def run_adiabaticity(cfg: ExperimentConfig, outdir: Path, started=None) -> int:
    started = time.perf_counter() if started is None else started
    outdir.mkdir(parents=True, exist_ok=True)
    if not cfg.toy_phase_over_pi and not cfg.tau_scale_grid:
        raise ConfigError(
            "adiabaticity mode needs toy_phase_over_pi and/or tau_scale_grid"
        )

    toy_rows = [
        (x, adiabatic.toy_phase_integral_max(x * math.pi))
        for x in cfg.toy_phase_over_pi
    ]

    sweep_rows = []
    slope = None
    if cfg.tau_scale_grid:
        base = sched.naive_ramp_schedule(
            0.0, math.pi, cfg.omega, cfg.base_duration
        )
        for scale in cfg.tau_scale_grid:
            tau = scale * cfg.base_duration
            rep = adiabatic.f_integral(base, tau)
            sweep_rows.append((tau, rep.max_f_norm))
        if len(sweep_rows) >= 2:
            logs = np.log(np.array(sweep_rows))
            slope = float(np.polyfit(logs[:, 0], logs[:, 1], 1)[0])

    with open(outdir / "adiabaticity.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("kind,x,max_f_norm\n")
        for x, v in toy_rows:
            fh.write(f"toy_phase_over_pi,{x:.12g},{v:.12g}\n")
        for tau, v in sweep_rows:
            fh.write(f"tau,{tau:.12g},{v:.12g}\n")

    summary = {
        "mode": "adiabaticity",
        "toy": [{"phase_over_pi": x, "max_f_norm": v} for x, v in toy_rows],
        "tau_sweep": [{"tau": t, "max_f_norm": v} for t, v in sweep_rows],
        "loglog_slope": slope,
        "runtime_s": round(time.perf_counter() - started, 6),
    }
    _write_summary(outdir, summary)
    for x, v in toy_rows:
        print(f"toy phase {x:g} pi: max|F| = {v:.4f}")
    if slope is not None:
        print(f"log-log slope of max||F|| vs tau: {slope:+.3f}")
    return 0


def gatecheck_report(cphase_gamma: float = math.pi / 2):
    """Closed-form check of every named gate against its canonical matrix."""
    labels = list(gates.SINGLE_QUBIT_LABELS) + ["cnot", "cphase"]
    rows = []
    for label in labels:
        spec = gates.table1(label, gamma=cphase_gamma)
        dist = distance_up_to_phase(spec.realized(), spec.target)
        rows.append((spec.label, dist, spec.global_phase))
    return rows


def run_gatecheck(tol: float = 1e-10) -> int:
    rows = gatecheck_report()
    worst = 0.0
    for label, dist, phase in rows:
        status = "PASS" if dist <= tol else "FAIL"
        worst = max(worst, dist)
        print(f"{label:<12s} distance {dist:.3e}  global_phase {phase:+.6f}  {status}")
    return 0 if worst <= tol else 1


def run_audit(path: str) -> int:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"cannot read schedule: {exc}", file=sys.stderr)
        return 2
    program = sched.schedule_from_text(text)
    report = sched.audit(program)
    print(f"segments: {len(program.segments)}")
    print(f"total drive area: {report.total_area:.9g} rad")
    print(f"area mod 2pi: {report.area_mod_2pi:.3e} rad")
    print(f"predicted geometric phase: {report.gamma_plus_predicted:.9g} rad")
    if report.ok:
        print("audit: OK")
        return 0
    for v in report.violations:
        print(f"violation: {v}")
    return 4


_SWEEP_AXES = ("n_per_step", "omega_mhz", "delta_ratio")


def run_sweep(cfg: ExperimentConfig, outdir: Path) -> int:
    if cfg.sweep_axis is None or not cfg.sweep_grid:
        raise ConfigError("sweep needs [sweep] axis and a non-empty grid")
    if cfg.sweep_axis not in _SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {_SWEEP_AXES}")
    started = time.perf_counter()
    outdir.mkdir(parents=True, exist_ok=True)

    def at_point(value):
        point = replace(cfg, trace_points=0)
        if cfg.sweep_axis == "n_per_step":
            point.n_per_step = {k: int(value) for k in (1, 2, 3, 5)}
        elif cfg.sweep_axis == "omega_mhz":
            point.omega = value * MHZ
        else:
            point.delta_ratio = value
        spec = _gate_spec(point)
        program = _build_schedule(point, spec)
        report = sched.audit(program)
        if not report.ok:
            return {"value": value, "error": "; ".join(report.violations)}
        psi0 = _initial_state(point)
        target = _target_state(point, spec, psi0)
        if point.mode == "two-qubit-full":
            delta = point.delta_ratio * point.omega
            result = rydberg.propagate_full(
                program, delta, steps_per_period=point.steps_per_period,
                initial=psi0, target=target, v12_mode=point.v12_mode,
            )
            logical = [rydberg.BASIS.index(x) for x in ("00", "01", "10", "11")]
            block = spec.target
        else:
            result = propagate.evolve(
                program,
                substep=program.min_active_duration() / point.substep_divisor,
            )
            logical = [1, 2]
            block = (
                spec.target if point.mode == "single-qubit" else spec.target[2:, 2:]
            )
        psi_final = result.final_unitary @ psi0
        return {
            "value": value,
            "fidelity": float(np.abs(np.vdot(target, psi_final)) ** 2),
            "gate_error": propagate.gate_error(
                result.final_unitary, block, logical, max_leakage=0.5
            ),
            "leakage": propagate.subspace_leakage(result.final_unitary, logical),
        }

    workers = max(1, min(cfg.sweep_workers, len(cfg.sweep_grid)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(at_point, cfg.sweep_grid))

    with open(outdir / "sweep.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{cfg.sweep_axis},fidelity,gate_error,leakage\n")
        for row in rows:
            if "error" in row:
                fh.write(f"{row['value']:.12g},,,\n")
            else:
                fh.write(
                    f"{row['value']:.12g},{row['fidelity']:.12g},"
                    f"{row['gate_error']:.12g},{row['leakage']:.12g}\n"
                )
    _write_summary(
        outdir,
        {
            "mode": "sweep",
            "axis": cfg.sweep_axis,
            "points": rows,
            "runtime_s": round(time.perf_counter() - started, 6),
        },
    )
    bad = [r for r in rows if "error" in r]
    for r in bad:
        print(f"sweep point {r['value']}: {r['error']}", file=sys.stderr)
    print(f"sweep complete: {len(rows) - len(bad)}/{len(rows)} points")
    return 0 if not bad else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="holopulse",
        description="Simulate pulse-accelerated adiabatic holonomic gates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="experiment config file")
        p.add_argument(
            "--set", dest="overrides", action="append", default=[],
            metavar="SECTION.KEY=VALUE", help="override a config entry",
        )
        p.add_argument("--output", help="output directory (overrides config)")

    common(sub.add_parser("simulate", help="run one gate simulation"))
    common(sub.add_parser("sweep", help="run a parameter sweep"))
    common(sub.add_parser("adiabaticity", help="error-integral studies"))
    sub.add_parser("gatecheck", help="verify the named gates in closed form")
    audit_p = sub.add_parser("audit", help="audit a schedule text dump")
    audit_p.add_argument("schedule", help="schedule text file")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gatecheck":
            return run_gatecheck()
        if args.command == "audit":
            return run_audit(args.schedule)
        cfg = load_config(args.config, args.overrides)
        outdir = Path(args.output or cfg.output)
        if args.command == "simulate":
            return run_simulate(cfg, outdir)
        if args.command == "adiabaticity":
            cfg.mode = "adiabaticity"
            return run_adiabaticity(cfg, outdir)
        return run_sweep(cfg, outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

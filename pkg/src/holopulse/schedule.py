"""Control-program planner for geodesic holonomy loops with pulse bursts.

A planned program traverses the (theta, phi) parameter sphere in five steps:

  1. theta ramps from theta0 to pi with phi fixed (geodesic to the south pole);
  2. phi sweeps by 2*gamma_plus at theta = pi (accumulates the geometric phase);
  3. theta ramps from pi to 0;
  4. phi resets to its initial value at theta = 0, where the Hamiltonian is
     phi-independent, so the reset may be instantaneous;
  5. theta ramps from 0 back to theta0, closing the loop.

Ramps move the angles with the drive off; the drive fires as rectangular
bursts at the midpoint of each of the N equal sub-segments of a ramp step,
with the angles frozen.  Burst areas are chosen to flip the sign of the
relative-phase factor between the eigenpairs that the ramp couples (area pi
for theta ramps, pi/2 for the phi sweep).  A final closure burst at theta = 0
pads the total drive area to a multiple of 2*pi so no net dynamical phase
survives.

Because the angles never move while the drive is on, the evolution between
bursts is generated by a constant transition Hamiltonian whose sign the
bursts alternate, and the accumulated nonadiabatic error telescopes to zero
exactly, independent of how fast the ramps run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import gates
from .lambda_model import ControlPoint, accumulate_phases, _mean_sin2_half

__all__ = [
    "Segment",
    "FlipEvent",
    "Schedule",
    "AuditReport",
    "plan_single_qubit",
    "plan_two_qubit",
    "audit",
    "instantaneous_flip_model",
    "naive_ramp_schedule",
    "schedule_to_text",
    "schedule_from_text",
]

TWO_PI = 2.0 * math.pi

DEFAULT_OMEGA = TWO_PI * 10e6  # rad/s
DEFAULT_RAMP_RATE = math.pi / 25e-9  # rad/s; a full pi sweep lasts 25 ns

TAGS = ("ramp", "pulse", "hold")

# Relative dynamical-phase rate between eigenpairs, in units of the
# accumulated drive area: (+,-) separates twice as fast as (+,d) or (d,-).
_PAIR_RATE = {("+", "-"): 2.0, ("+", "d"): 1.0, ("-", "d"): 1.0}


@dataclass(frozen=True)
class Segment:
    """One piecewise-constant slice of the control program.

    Angles sweep linearly over the duration; omega is constant.  Tags:
    ramp (angles move, drive off in burst mode), pulse (drive burst with
    frozen angles), hold (drive-on pad with frozen angles).
    """

    duration: float
    omega: float
    theta_start: float
    theta_end: float
    phi_start: float
    phi_end: float
    tag: str = "ramp"

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("segment duration must be >= 0")
        if self.tag not in TAGS:
            raise ValueError(f"unknown segment tag {self.tag!r}")

    @property
    def area(self) -> float:
        return self.omega * self.duration


@dataclass(frozen=True)
class FlipEvent:
    """A drive burst reduced to its effect on the relative phase factors.

    ``area`` is the burst area in rad; ``pairs`` lists the eigenpairs whose
    phase factor it flips to -1 exactly (other pairs acquire the unit phase
    e^{i * rate * area}, which the toggling-frame propagator applies too).
    """

    time: float
    area: float
    pairs: tuple = ()


def pairs_for_area(area: float) -> tuple:
    """Eigenpairs whose relative-phase factor a burst of this area flips."""
    flipped = []
    for pair, rate in _PAIR_RATE.items():
        rem = math.remainder(rate * area, TWO_PI)
        if abs(abs(rem) - math.pi) < 1e-9:
            flipped.append(pair)
    return tuple(flipped)


@dataclass(frozen=True)
class Schedule:
    """An immutable, ordered control program."""

    segments: tuple
    gate: gates.GateSpec | None = None
    n_per_step: dict | None = None
    pulse_plan: tuple = ()
    mode: str = "burst"
    step_spans: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        bounds = np.concatenate(
            [[0.0], np.cumsum([s.duration for s in self.segments])]
        )
        object.__setattr__(self, "_bounds", bounds)

    @property
    def duration(self) -> float:
        return float(self._bounds[-1])

    @property
    def boundaries(self) -> np.ndarray:
        return self._bounds

    def locate(self, t: float) -> int:
        """Index of the segment active at time t (right-continuous)."""
        idx = int(np.searchsorted(self._bounds, t, side="right")) - 1
        return min(max(idx, 0), len(self.segments) - 1)

    def control_at(self, t: float) -> ControlPoint:
        i = self.locate(t)
        seg = self.segments[i]
        if seg.duration > 0:
            f = min(max((t - self._bounds[i]) / seg.duration, 0.0), 1.0)
        else:
            f = 1.0
        return ControlPoint(
            omega=seg.omega,
            theta=seg.theta_start + f * (seg.theta_end - seg.theta_start),
            phi=seg.phi_start + f * (seg.phi_end - seg.phi_start),
        )

    def rates_at(self, t: float) -> tuple:
        """(dtheta/dt, dphi/dt) of the active segment; zero if instantaneous."""
        seg = self.segments[self.locate(t)]
        if seg.duration <= 0:
            return (0.0, 0.0)
        return (
            (seg.theta_end - seg.theta_start) / seg.duration,
            (seg.phi_end - seg.phi_start) / seg.duration,
        )

    def min_active_duration(self) -> float:
        durs = [s.duration for s in self.segments if s.duration > 0]
        return min(durs) if durs else 0.0

    def total_area(self) -> float:
        return sum(s.area for s in self.segments)


def _burst(omega: float, area: float, theta: float, phi: float, tag="pulse") -> Segment:
    return Segment(
        duration=area / omega,
        omega=omega,
        theta_start=theta,
        theta_end=theta,
        phi_start=phi,
        phi_end=phi,
        tag=tag,
    )


def _normalize_n(n_per_step, defaults) -> dict:
    if n_per_step is None:
        n = dict(defaults)
    elif isinstance(n_per_step, int):
        n = {k: n_per_step for k in (1, 2, 3, 5)}
    else:
        n = dict(defaults)
        n.update({int(k): int(v) for k, v in dict(n_per_step).items() if int(k) != 4})
    for step, value in n.items():
        if value < 1:
            raise ValueError(f"step {step} needs at least one segment, got {value}")
    return n


def _plan_loop(
    theta0,
    phi0,
    gamma_plus,
    n_per_step,
    omega,
    ramp_rate,
    omit_step4,
    gate,
    two_qubit,
) -> Schedule:
    if not (0.0 <= theta0 <= math.pi):
        raise ValueError(f"theta0 must lie in [0, pi], got {theta0}")
    if omega <= 0 or ramp_rate <= 0:
        raise ValueError("omega and ramp_rate must be positive")

    phi1 = phi0 + 2.0 * gamma_plus
    # (step number, sweep axis, from, to, fixed other angle, burst area)
    step_defs = [
        (1, "theta", theta0, math.pi, phi0, math.pi),
        (2, "phi", phi0, phi1, math.pi, math.pi / 2.0),
        (3, "theta", math.pi, 0.0, phi1, math.pi),
        (5, "theta", 0.0, theta0, phi0 if not omit_step4 else phi1, math.pi),
    ]
    planned_area = sum(
        n_per_step[step] * area
        for step, _, a, b, _, area in step_defs
        if abs(b - a) > 1e-15
    )
    residue = math.remainder(planned_area, TWO_PI)
    closure_area = 0.0
    if abs(residue) > 1e-9:
        closure_area = (TWO_PI - residue) % TWO_PI

    segments: list[Segment] = []
    events: list[FlipEvent] = []
    spans: list[tuple] = []
    clock = 0.0

    def emit(seg: Segment):
        nonlocal clock
        segments.append(seg)
        clock += seg.duration

    def emit_burst(area, theta, phi, tag="pulse"):
        seg = _burst(omega, area, theta, phi, tag=tag)
        center = clock + 0.5 * seg.duration
        events.append(FlipEvent(time=center, area=area, pairs=pairs_for_area(area)))
        emit(seg)

    def emit_ramp_step(step, axis, start, stop, fixed, burst_area):
        sweep = stop - start
        if abs(sweep) <= 1e-15:
            return
        n = n_per_step[step]
        first = len(segments)
        delta = sweep / n
        half_dur = abs(delta) / 2.0 / ramp_rate
        for i in range(n):
            a = start + i * delta
            mid = a + delta / 2.0
            b = a + delta
            if axis == "theta":
                emit(Segment(half_dur, 0.0, a, mid, fixed, fixed, "ramp"))
                emit_burst(burst_area, mid, fixed)
                emit(Segment(half_dur, 0.0, mid, b, fixed, fixed, "ramp"))
            else:
                emit(Segment(half_dur, 0.0, fixed, fixed, a, mid, "ramp"))
                emit_burst(burst_area, fixed, mid)
                emit(Segment(half_dur, 0.0, fixed, fixed, mid, b, "ramp"))
        spans.append((step, first, len(segments)))

    for step, axis, start, stop, fixed, burst_area in step_defs[:3]:
        emit_ramp_step(step, axis, start, stop, fixed, burst_area)

    if not omit_step4 and abs(phi1 - phi0) > 1e-15:
        first = len(segments)
        # Instantaneous reset; at theta = 0 the drive is phi-independent and
        # the jump carries no geometric weight.
        emit(Segment(0.0, 0.0, 0.0, 0.0, phi1, phi0, "ramp"))
        spans.append((4, first, len(segments)))

    if closure_area > 0.0:
        first = len(segments)
        phi_here = phi0 if not omit_step4 else phi1
        emit_burst(closure_area, 0.0, phi_here, tag="hold")
        spans.append((0, first, len(segments)))

    emit_ramp_step(*step_defs[3])

    return Schedule(
        segments=tuple(segments),
        gate=gate,
        n_per_step=dict(n_per_step),
        pulse_plan=tuple(events),
        mode="burst",
        step_spans=tuple(spans),
    )


def _resolve_omega(omega, pulse_duration):
    if omega is not None and pulse_duration is not None:
        raise ValueError("give either omega or pulse_duration, not both")
    if pulse_duration is not None:
        if pulse_duration <= 0:
            raise ValueError("pulse_duration must be positive")
        return math.pi / pulse_duration
    return DEFAULT_OMEGA if omega is None else omega


def plan_single_qubit(
    theta0: float,
    phi0: float,
    gamma_plus: float,
    n_per_step=5,
    pulse_duration: float | None = None,
    ramp_rate: float = DEFAULT_RAMP_RATE,
    *,
    omega: float | None = None,
    gate: gates.GateSpec | None = None,
) -> Schedule:
    """Five-step geodesic program realizing the (theta0, phi0, gamma_plus) gate.

    ``n_per_step`` is an int applied to every ramp step or a {step: N} map;
    ``pulse_duration`` sets the length of a pi-area burst (equivalently pass
    the burst amplitude ``omega``).
    """
    n = _normalize_n(n_per_step, {1: 5, 2: 5, 3: 5, 5: 5})
    om = _resolve_omega(omega, pulse_duration)
    if gate is None:
        gate = gates._make_spec(
            "custom",
            theta0,
            phi0,
            gamma_plus,
            gates.holonomy_gate(theta0, phi0, gamma_plus),
        )
    return _plan_loop(
        theta0, phi0, gamma_plus, n, om, ramp_rate, omit_step4=False,
        gate=gate, two_qubit=False,
    )


def plan_two_qubit(
    theta0: float,
    phi0: float,
    gamma_plus: float,
    n_per_step=None,
    pulse_duration: float | None = None,
    ramp_rate: float = DEFAULT_RAMP_RATE,
    *,
    omega: float | None = None,
    gate: gates.GateSpec | None = None,
    omit_step4: bool = True,
) -> Schedule:
    """Geodesic program on the effective two-qubit (theta, phi) space.

    The phi reset step is omitted by default to shorten the evolution; this
    is harmless whenever the sweep is a multiple of 2*pi or theta0 sits at a
    pole, which covers the controlled gates of interest.  Ramp steps default
    to three segments and the phi sweep to five.
    """
    n = _normalize_n(n_per_step, {1: 3, 2: 5, 3: 3, 5: 3})
    om = _resolve_omega(omega, pulse_duration)
    if gate is None:
        base = gates.holonomy_gate(theta0, phi0, gamma_plus)
        gate = gates._make_spec(
            "custom", theta0, phi0, gamma_plus,
            gates.controlled_matrix(base), two_qubit=True,
        )
    if omit_step4:
        sweep = 2.0 * gamma_plus
        removable = (
            abs(math.remainder(sweep, TWO_PI)) < 1e-12 or theta0 < 1e-12
        )
        if not removable:
            omit_step4 = False
    return _plan_loop(
        theta0, phi0, gamma_plus, n, om, ramp_rate, omit_step4=omit_step4,
        gate=gate, two_qubit=True,
    )


@dataclass
class AuditReport:
    """Structural checks on a schedule plus its phase bookkeeping."""

    violations: list = field(default_factory=list)
    total_area: float = 0.0
    area_mod_2pi: float = 0.0
    per_step_area: dict = field(default_factory=dict)
    gamma_plus_predicted: float = 0.0
    closure_theta_error: float = 0.0
    closure_phi_error: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations


def audit(schedule: Schedule) -> AuditReport:
    """Verify continuity, loop closure, and drive-area closure.

    Violations are reported, never raised, so infeasible hand-built
    schedules can still be inspected.
    """
    report = AuditReport()
    segs = schedule.segments
    if not segs:
        report.violations.append("schedule has no segments")
        return report

    for i in range(len(segs) - 1):
        a, b = segs[i], segs[i + 1]
        if abs(a.theta_end - b.theta_start) > 1e-12:
            report.violations.append(
                f"theta discontinuity of {abs(a.theta_end - b.theta_start):.3e} "
                f"between segments {i} and {i + 1}"
            )
        if abs(a.phi_end - b.phi_start) > 1e-12:
            report.violations.append(
                f"phi discontinuity of {abs(a.phi_end - b.phi_start):.3e} "
                f"between segments {i} and {i + 1}"
            )

    for i, seg in enumerate(segs):
        if schedule.mode == "burst" and seg.tag == "ramp" and seg.omega != 0.0:
            report.violations.append(f"segment {i}: ramp with drive on")
        if seg.tag == "pulse":
            if seg.omega <= 0.0:
                report.violations.append(f"segment {i}: pulse with omega <= 0")
            if seg.theta_start != seg.theta_end or seg.phi_start != seg.phi_end:
                report.violations.append(f"segment {i}: pulse with moving angles")
        if seg.duration == 0.0:
            if abs(seg.theta_end - seg.theta_start) > 1e-12:
                report.violations.append(f"segment {i}: instantaneous theta jump")
            weight = abs(
                (seg.phi_end - seg.phi_start)
                * _mean_sin2_half(seg.theta_start, seg.theta_end)
            )
            if weight > 1e-12:
                report.violations.append(
                    f"segment {i}: instantaneous phi jump carries geometric weight"
                )

    theta_err = abs(segs[-1].theta_end - segs[0].theta_start)
    dphi = segs[-1].phi_end - segs[0].phi_start
    phi_err = abs(math.remainder(dphi, TWO_PI))
    at_pole = (
        math.sin(segs[0].theta_start) < 1e-12 and math.sin(segs[-1].theta_end) < 1e-12
    )
    report.closure_theta_error = theta_err
    report.closure_phi_error = 0.0 if at_pole else phi_err
    if theta_err > 1e-12:
        report.violations.append(f"loop does not close in theta ({theta_err:.3e})")
    if not at_pole and phi_err > 1e-12:
        report.violations.append(
            f"loop does not close in phi mod 2pi ({phi_err:.3e})"
        )

    report.total_area = schedule.total_area()
    report.area_mod_2pi = abs(math.remainder(report.total_area, TWO_PI))
    if report.area_mod_2pi > 1e-9:
        report.violations.append(
            f"total drive area is not a multiple of 2pi (off by "
            f"{report.area_mod_2pi:.3e} rad)"
        )

    names = {0: "closure", 1: "step1", 2: "step2", 3: "step3", 4: "step4", 5: "step5"}
    for step, i0, i1 in schedule.step_spans:
        key = names.get(step, f"step{step}")
        report.per_step_area[key] = sum(s.area for s in segs[i0:i1])

    report.gamma_plus_predicted = accumulate_phases(
        schedule, schedule.duration
    ).gamma["+"]
    return report


def instantaneous_flip_model(planned: Schedule) -> tuple:
    """Collapse every drive burst to an instantaneous flip event.

    Returns (path, flips): the same parameter path with the burst segments
    removed (timeline compressed) and the matching flip events at the points
    where the bursts sat.  Exact for burst-mode programs, where the angles
    are frozen while the drive is on.
    """
    path: list[Segment] = []
    flips: list[FlipEvent] = []
    clock = 0.0
    for seg in planned.segments:
        if seg.omega > 0.0 and seg.duration > 0.0:
            if seg.theta_start != seg.theta_end or seg.phi_start != seg.phi_end:
                raise ValueError("cannot collapse a burst with moving angles")
            if flips and abs(flips[-1].time - clock) < 1e-18:
                merged = flips[-1].area + seg.area
                flips[-1] = FlipEvent(clock, merged, pairs_for_area(merged))
            else:
                flips.append(FlipEvent(clock, seg.area, pairs_for_area(seg.area)))
        else:
            path.append(seg)
            clock += seg.duration
    return (
        Schedule(segments=tuple(path), mode="burst", gate=planned.gate),
        tuple(flips),
    )


def naive_ramp_schedule(
    theta_from: float,
    theta_to: float,
    omega: float,
    duration: float,
    phi: float = 0.0,
) -> Schedule:
    """Single continuous ramp with the drive held on (no bursts).

    The baseline an adiabaticity study compares against: its nonadiabatic
    error decays only as 1/duration.
    """
    seg = Segment(duration, omega, theta_from, theta_to, phi, phi, "ramp")
    return Schedule(segments=(seg,), mode="continuous")


_HEADER = "# holopulse schedule v1"


def schedule_to_text(schedule: Schedule) -> str:
    """Line-oriented text form: one segment per line, exact decimal fields."""
    lines = [
        _HEADER,
        f"# mode: {schedule.mode}",
        "# columns: duration omega theta_start theta_end phi_start phi_end tag",
    ]
    for s in schedule.segments:
        lines.append(
            f"{s.duration!r} {s.omega!r} {s.theta_start!r} {s.theta_end!r} "
            f"{s.phi_start!r} {s.phi_end!r} {s.tag}"
        )
    return "\n".join(lines) + "\n"


def schedule_from_text(text: str) -> Schedule:
    """Parse the text form back into a Schedule.

    Flip events are rebuilt from the drive-on segments; planner metadata
    (gate, per-step map) is not part of the wire form.
    """
    mode = "burst"
    segments = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if body.startswith("mode:"):
                mode = body.split(":", 1)[1].strip()
            continue
        parts = line.split()
        if len(parts) != 7:
            raise ValueError(f"line {lineno}: expected 7 fields, got {len(parts)}")
        try:
            nums = [float(p) for p in parts[:6]]
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        segments.append(Segment(*nums, tag=parts[6]))

    events = []
    clock = 0.0
    for seg in segments:
        if seg.omega > 0.0 and seg.duration > 0.0 and seg.theta_start == seg.theta_end:
            events.append(
                FlipEvent(
                    time=clock + 0.5 * seg.duration,
                    area=seg.area,
                    pairs=pairs_for_area(seg.area),
                )
            )
        clock += seg.duration
    return Schedule(segments=tuple(segments), pulse_plan=tuple(events), mode=mode)

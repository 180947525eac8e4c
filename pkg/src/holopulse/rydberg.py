"""Two-atom Rydberg model behind the controlled gates.

Atom 1 drives |1> <-> |r| and atom 2 drives both ground states to |r>, all
with bichromatic fields at symmetric detunings +-Delta.  In the rotated
frame the 9-level Hamiltonian splits into two harmonics,

    H(t) = h1 e^{-i Delta t} + h2 e^{-i 3 Delta t} + h.c.
           + (V12 - 2 Delta) |rr><rr|,

and second-order averaging of the fast terms leaves an effective
three-level Lambda system on {|rr>, |10>, |11>}: the doubly excited state
plays the excited level, with couplings 2*Omega11*Omega2x/Delta.  Tuning
the interaction V12 cancels the residual |rr> shift, making the two-photon
processes resonant.  Basis order is fixed to
{00, 01, 0r, 10, 11, 1r, r0, r1, rr}.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .lambda_model import ControlPoint
from .propagate import PropagationResult, TraceRow
from .schedule import Schedule

__all__ = [
    "BASIS",
    "LAMBDA_SUBSPACE",
    "RydbergParams",
    "OscillatingTerm",
    "hat_h1",
    "hat_h2",
    "full_hamiltonian",
    "full_hbuilder",
    "v12_condition",
    "james_effective",
    "effective_hamiltonian_9",
    "effective_lambda",
    "map_controls",
    "params_for_control",
    "propagate_full",
]

BASIS = ("00", "01", "0r", "10", "11", "1r", "r0", "r1", "rr")
_IDX = {lab: i for i, lab in enumerate(BASIS)}

# effective Lambda system: |rr> is the shared excited level
LAMBDA_SUBSPACE = ("rr", "10", "11")
LAMBDA_INDICES = tuple(_IDX[lab] for lab in LAMBDA_SUBSPACE)


@dataclass(frozen=True)
class RydbergParams:
    """Drive amplitudes (rad/s, complex), detuning, and interaction strength."""

    omega11: complex
    omega20: complex
    omega21: complex
    delta: float
    v12: float

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        worst = max(abs(self.omega11), abs(self.omega20), abs(self.omega21))
        if worst > self.delta / 10.0:
            warnings.warn(
                f"drive amplitude {worst:.3e} is not small against delta/10; "
                "the averaged model degrades",
                stacklevel=2,
            )

    def magnitudes_sq(self) -> float:
        return (
            abs(self.omega11) ** 2 + abs(self.omega20) ** 2 + abs(self.omega21) ** 2
        )


@dataclass(frozen=True)
class OscillatingTerm:
    """One harmonic h e^{-i omega t} (plus its conjugate) of a drive Hamiltonian."""

    h: np.ndarray
    omega: float

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("harmonic frequency must be positive")


def _op(row: str, col: str, coef: complex, out: np.ndarray):
    out[_IDX[row], _IDX[col]] += coef


def hat_h1(p: RydbergParams) -> np.ndarray:
    """Slow harmonic (frequency Delta) of the rotated-frame Hamiltonian."""
    h = np.zeros((9, 9), dtype=complex)
    herm = [
        ("r0", "10", p.omega11),
        ("r1", "11", p.omega11),
        ("0r", "00", p.omega20),
        ("1r", "10", p.omega20),
        ("0r", "01", p.omega21),
        ("1r", "11", p.omega21),
    ]
    for row, col, coef in herm:
        _op(row, col, coef, h)
        _op(col, row, np.conj(coef), h)
    for row, coef in (("1r", p.omega11), ("r0", p.omega20), ("r1", p.omega21)):
        _op(row, "rr", np.conj(coef), h)
    return h


def hat_h2(p: RydbergParams) -> np.ndarray:
    """Fast harmonic (frequency 3 Delta): the de-excitation paths out of |rr>."""
    h = np.zeros((9, 9), dtype=complex)
    for row, coef in (("1r", p.omega11), ("r0", p.omega20), ("r1", p.omega21)):
        _op(row, "rr", np.conj(coef), h)
    return h


def _rr_shift(p: RydbergParams) -> np.ndarray:
    d = np.zeros((9, 9), dtype=complex)
    d[_IDX["rr"], _IDX["rr"]] = p.v12 - 2.0 * p.delta
    return d


def full_hamiltonian(p: RydbergParams, t: float) -> np.ndarray:
    """Exact rotated-frame 9x9 Hamiltonian at absolute time t."""
    h1 = hat_h1(p)
    h2 = hat_h2(p)
    ph1 = np.exp(-1j * p.delta * t)
    ph2 = np.exp(-3j * p.delta * t)
    return (
        h1 * ph1
        + h1.conj().T * np.conj(ph1)
        + h2 * ph2
        + h2.conj().T * np.conj(ph2)
        + _rr_shift(p)
    )


def full_hbuilder(p: RydbergParams):
    """Time-dependent builder t -> H(t) with the harmonics precomputed."""
    h1 = hat_h1(p)
    h1d = h1.conj().T
    h2 = hat_h2(p)
    h2d = h2.conj().T
    d = _rr_shift(p)

    def build(t: float) -> np.ndarray:
        ph1 = np.exp(-1j * p.delta * t)
        ph2 = np.exp(-3j * p.delta * t)
        return h1 * ph1 + h1d * np.conj(ph1) + h2 * ph2 + h2d * np.conj(ph2) + d

    return build


def v12_condition(p: RydbergParams) -> float:
    """Interaction strength that cancels the averaged |rr> level shift."""
    return 2.0 * p.delta - 4.0 * p.magnitudes_sq() / (3.0 * p.delta)


def james_effective(terms, *, secular: bool = True):
    """Second-order averaged Hamiltonian builder for fast harmonics.

    Each harmonic pair contributes (1/2)(1/w_m + 1/w_n) [h_m^dag, h_n]
    e^{i(w_m - w_n)t}.  With ``secular`` (default) only the co-rotating
    m = n commutators are kept; the cross terms oscillate at the harmonic
    splittings, i.e. at the same scale the averaging already discarded, and
    are retained only for diagnostics via ``secular=False``.
    """
    terms = list(terms)
    freqs = [t.omega for t in terms]
    if len(set(freqs)) != len(freqs):
        raise ValueError("harmonic frequencies must be distinct")

    static = np.zeros_like(np.asarray(terms[0].h, dtype=complex))
    cross = []
    for m, tm in enumerate(terms):
        hm = np.asarray(tm.h, dtype=complex)
        for n, tn in enumerate(terms):
            hn = np.asarray(tn.h, dtype=complex)
            coef = 0.5 * (1.0 / tm.omega + 1.0 / tn.omega)
            mat = coef * (hm.conj().T @ hn - hn @ hm.conj().T)
            if m == n:
                static += mat
            elif not secular:
                cross.append((mat, tm.omega - tn.omega))

    def build(t: float) -> np.ndarray:
        out = static.copy()
        for mat, dw in cross:
            out += mat * np.exp(1j * dw * t)
        return out

    return build


def effective_hamiltonian_9(p: RydbergParams) -> np.ndarray:
    """Averaged 9x9 Hamiltonian: secular second-order terms plus the |rr> shift."""
    builder = james_effective(
        [OscillatingTerm(hat_h1(p), p.delta), OscillatingTerm(hat_h2(p), 3.0 * p.delta)]
    )
    return builder(0.0) + _rr_shift(p)


def effective_lambda(p: RydbergParams) -> np.ndarray:
    """Effective 3x3 Lambda Hamiltonian on {|rr>, |10>, |11>}.

    Valid once v12 is tuned by :func:`v12_condition` so the |rr> shift
    cancels; couplings are 2*Omega11*Omega2x/Delta.
    """
    g0 = 2.0 * p.omega11 * p.omega20 / p.delta
    g1 = 2.0 * p.omega11 * p.omega21 / p.delta
    h = np.zeros((3, 3), dtype=complex)
    h[0, 1] = g0
    h[1, 0] = np.conj(g0)
    h[0, 2] = g1
    h[2, 0] = np.conj(g1)
    return h


def map_controls(omega_eff: float, theta: float, phi: float, delta: float):
    """Physical drive amplitudes realizing an effective Lambda control point.

    Returns (Omega11, Omega20, Omega21) with Omega11 = sqrt(omega_eff *
    delta / 2); the atom-2 amplitudes carry the (theta, phi) dependence.
    """
    if omega_eff < 0 or delta <= 0:
        raise ValueError("omega_eff must be >= 0 and delta > 0")
    o11 = math.sqrt(omega_eff * delta / 2.0)
    o20 = o11 * math.sin(theta / 2.0) * np.exp(1j * phi)
    o21 = -o11 * math.cos(theta / 2.0)
    return complex(o11), complex(o20), complex(o21)


def params_for_control(
    c: ControlPoint,
    delta: float,
    *,
    v12_mode: str = "tracking",
    peak_omega: float | None = None,
) -> RydbergParams:
    """Rydberg drive settings for one effective control point.

    With the drive off, all physical fields are off and V12 sits at
    2*Delta (zero rotated-frame shift).  ``v12_mode`` "frozen" evaluates
    the tuning condition at ``peak_omega`` instead of the instantaneous
    envelope, modeling an interaction that cannot follow the pulses.
    """
    if c.omega == 0.0:
        return RydbergParams(0.0, 0.0, 0.0, delta, 2.0 * delta)
    o11, o20, o21 = map_controls(c.omega, c.theta, c.phi, delta)
    if v12_mode == "tracking":
        ref = RydbergParams(o11, o20, o21, delta, 0.0)
        v12 = v12_condition(ref)
    elif v12_mode == "frozen":
        if peak_omega is None:
            raise ValueError("frozen v12 mode needs peak_omega")
        po = map_controls(peak_omega, c.theta, c.phi, delta)
        v12 = v12_condition(RydbergParams(*po, delta, 0.0))
    else:
        raise ValueError(f"unknown v12 mode {v12_mode!r}")
    return RydbergParams(o11, o20, o21, delta, v12)


def _expm_stack(h_stack: np.ndarray, dt: float, order: int = 6) -> np.ndarray:
    """exp(-i H dt) for a stack of matrices via a Horner-evaluated Taylor series.

    Valid for ||H dt|| << 1; at the step sizes used the order-6 remainder
    is far below double precision.
    """
    m = (-1j * dt) * h_stack
    dim = m.shape[-1]
    eye = np.eye(dim, dtype=complex)
    p = eye + m / order
    for k in range(order - 1, 0, -1):
        p = eye + np.matmul(m, p) / k
    return p


def _ordered_product(stack: np.ndarray) -> np.ndarray:
    """Time-ordered product U_{n-1} ... U_1 U_0 by pairwise reduction."""
    cur = stack
    while cur.shape[0] > 1:
        n = cur.shape[0]
        even = n - (n % 2)
        paired = np.matmul(cur[1:even:2], cur[0:even:2])
        cur = np.concatenate([paired, cur[even:]], axis=0) if n % 2 else paired
    return cur[0]


def propagate_full(
    schedule: Schedule,
    delta: float,
    *,
    steps_per_period: int = 64,
    initial: np.ndarray | None = None,
    target: np.ndarray | None = None,
    v12_mode: str = "tracking",
    trace_points: int = 0,
    chunk: int = 16384,
) -> PropagationResult:
    """Propagate the exact 9-level model over an effective burst schedule.

    Ramps have every physical drive off (zero Hamiltonian), so only burst
    segments are stepped, at ``steps_per_period`` substeps per period of
    the fastest harmonic (3*Delta).  Absolute time is preserved across the
    gaps so the harmonic phases stay aligned.
    """
    bounds = schedule.boundaries
    period = 2.0 * math.pi / (3.0 * delta)
    dt_max = period / steps_per_period
    peak = max((s.omega for s in schedule.segments), default=0.0)

    tracing = trace_points > 0 and initial is not None
    sample_times = (
        np.linspace(0.0, schedule.duration, trace_points) if tracing else np.array([])
    )
    rows: list[TraceRow] = []
    psi = np.asarray(initial, dtype=complex).copy() if initial is not None else None
    next_sample = 0

    def emit_until(t_now):
        nonlocal next_sample
        while (
            tracing
            and next_sample < len(sample_times)
            and sample_times[next_sample] <= t_now + 1e-15 * max(t_now, 1.0)
        ):
            pops = {lab: float(np.abs(psi[i]) ** 2) for i, lab in enumerate(BASIS)}
            fid = (
                float(np.abs(np.vdot(target, psi)) ** 2)
                if target is not None
                else None
            )
            rows.append(TraceRow(float(sample_times[next_sample]), pops, fid))
            next_sample += 1

    u = np.eye(9, dtype=complex)
    emit_until(0.0)
    for i, seg in enumerate(schedule.segments):
        t0, t1 = float(bounds[i]), float(bounds[i + 1])
        if seg.duration <= 0.0:
            continue
        if seg.omega == 0.0:
            emit_until(t1)
            continue
        if seg.theta_start != seg.theta_end or seg.phi_start != seg.phi_end:
            raise ValueError("full-model propagation needs frozen angles per burst")
        p = params_for_control(
            schedule.control_at((t0 + t1) / 2.0),
            delta,
            v12_mode=v12_mode,
            peak_omega=peak,
        )
        h1 = hat_h1(p)
        h1d = h1.conj().T
        h2 = hat_h2(p)
        h2d = h2.conj().T
        d = _rr_shift(p)

        n = max(1, int(math.ceil((t1 - t0) / dt_max)))
        dt = (t1 - t0) / n
        for start in range(0, n, chunk):
            m = min(chunk, n - start)
            tm = t0 + (start + np.arange(m) + 0.5) * dt
            ph1 = np.exp(-1j * delta * tm)[:, None, None]
            ph2 = np.exp(-3j * delta * tm)[:, None, None]
            h_stack = h1 * ph1 + h1d * np.conj(ph1) + h2 * ph2 + h2d * np.conj(ph2) + d
            steps = _expm_stack(h_stack, dt)
            if tracing:
                for k in range(m):
                    psi = steps[k] @ psi
                    emit_until(t0 + (start + k + 1) * dt)
            u = _ordered_product(steps) @ u
        if tracing:
            emit_until(t1)
    emit_until(schedule.duration)
    return PropagationResult(final_unitary=u, trace=tuple(rows), substep=dt_max)

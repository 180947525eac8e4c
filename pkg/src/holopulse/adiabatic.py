"""Adiabatic-frame machinery: ideal evolution, nonadiabatic generator, error
integrals, and the toggling-frame transition propagator.

The true evolution factorizes as U(t) = U_A(t) U_T(t): U_A follows the
instantaneous eigenframe with its accumulated dynamical and geometric
phases, and U_T collects everything nonadiabatic.  In the initial-eigenframe
basis (+, -, d) the generator of U_T has zero diagonal and entries

    H_T[k, j] = P_kj * G_kj,

where G_kj = i <d/ds phi_k | phi_j> depends only on the angle rates and
P_kj is a unit-modulus phase factor driven by the dynamical-phase
difference.  Drive bursts advance that phase in jumps, flipping the sign of
P between targeted eigenpairs, which is what cancels the accumulated error.

All s coordinates are dimensionless fractions of the schedule; ``tau``
rescales the physical total time without touching the path, so the same
schedule can be swept over total durations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .lambda_model import EIGENLABELS, accumulate_phases, eigenframe
from .qmat import expm_skew
from .schedule import FlipEvent, Schedule

__all__ = [
    "TransitionReport",
    "PGFactors",
    "adiabatic_operator",
    "transition_hamiltonian",
    "pg_decompose",
    "f_integral",
    "transition_operator",
    "dyson_bound",
    "toy_phase_integral_max",
]

_IDX = {"+": 0, "-": 1, "d": 2}
_PAIRS = [(k, j) for k in EIGENLABELS for j in EIGENLABELS if k != j]
_INV_SQRT8 = 1.0 / (2.0 * math.sqrt(2.0))


@dataclass(frozen=True)
class TransitionReport:
    """Sampled nonadiabatic generator and its running integrals.

    ``samples`` holds (s, H_T) pairs on a decimated grid; ``f_integrals``
    maps each eigenpair to its cumulative integral on the same grid.  The
    norm curves (``s_grid``, ``ht_norms``, ``f_norms``) keep the full
    quadrature resolution since the error bound integrates over them.
    """

    tau: float
    samples: tuple
    f_integrals: Mapping[tuple, np.ndarray]
    sample_s: np.ndarray
    s_grid: np.ndarray
    ht_norms: np.ndarray
    f_norms: np.ndarray
    max_f_norm: float


@dataclass(frozen=True)
class PGFactors:
    """Phase factors P (unit modulus) and couplings G with H_T = P * G entrywise."""

    p: Mapping[tuple, complex]
    g: Mapping[tuple, complex]


def _segment_tables(schedule: Schedule):
    """Per-segment prefix tables for vectorized phase evaluation."""
    segs = schedule.segments
    bounds = schedule.boundaries
    omega = np.array([s.omega for s in segs])
    th_a = np.array([s.theta_start for s in segs])
    th_b = np.array([s.theta_end for s in segs])
    ph_a = np.array([s.phi_start for s in segs])
    ph_b = np.array([s.phi_end for s in segs])
    dur = np.array([s.duration for s in segs])

    d_alpha = omega * dur
    dth = th_b - th_a
    small = np.abs(dth) < 1e-7
    with np.errstate(divide="ignore", invalid="ignore"):
        w_full = 0.5 - (np.sin(th_b) - np.sin(th_a)) / (2.0 * dth)
    w_full = np.where(small, np.sin((th_a + th_b) / 4.0) ** 2, w_full)
    d_gamma = 0.5 * (ph_b - ph_a) * w_full

    prefix_alpha = np.concatenate([[0.0], np.cumsum(d_alpha)])
    prefix_gamma = np.concatenate([[0.0], np.cumsum(d_gamma)])
    return bounds, omega, th_a, th_b, ph_a, ph_b, dur, prefix_alpha, prefix_gamma


def _path_state(schedule: Schedule, t: np.ndarray):
    """Vectorized path data at native times t.

    Returns (theta, phi, dtheta_dt, dphi_dt, alpha_plus, gamma_plus).
    """
    (bounds, omega, th_a, th_b, ph_a, ph_b, dur, pre_a, pre_g) = _segment_tables(
        schedule
    )
    t = np.asarray(t, dtype=float)
    idx = np.searchsorted(bounds, t, side="right") - 1
    idx = np.clip(idx, 0, len(schedule.segments) - 1)

    local = t - bounds[idx]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(dur[idx] > 0, local / dur[idx], 1.0)
    frac = np.clip(frac, 0.0, 1.0)

    theta = th_a[idx] + frac * (th_b[idx] - th_a[idx])
    phi = ph_a[idx] + frac * (ph_b[idx] - ph_a[idx])
    with np.errstate(divide="ignore", invalid="ignore"):
        th_rate = np.where(dur[idx] > 0, (th_b[idx] - th_a[idx]) / dur[idx], 0.0)
        ph_rate = np.where(dur[idx] > 0, (ph_b[idx] - ph_a[idx]) / dur[idx], 0.0)

    alpha = pre_a[idx] + omega[idx] * dur[idx] * frac
    dth_part = theta - th_a[idx]
    small = np.abs(dth_part) < 1e-7
    with np.errstate(divide="ignore", invalid="ignore"):
        w = 0.5 - (np.sin(theta) - np.sin(th_a[idx])) / (2.0 * dth_part)
    w = np.where(small, np.sin((th_a[idx] + theta) / 4.0) ** 2, w)
    gamma = pre_g[idx] + 0.5 * (phi - ph_a[idx]) * w
    return theta, phi, th_rate, ph_rate, alpha, gamma


def _ht_stack(
    schedule: Schedule,
    s: np.ndarray,
    tau: float,
    extra_alpha: np.ndarray | None = None,
    signs: np.ndarray | None = None,
) -> np.ndarray:
    """H_T at the given s points as an (n, 3, 3) stack, in per-s units.

    ``extra_alpha`` adds a dynamical-phase offset (rad) per point, the
    bookkeeping hook for instantaneous flip events; ``signs`` applies a
    per-pair sign mask.
    """
    total = schedule.duration
    s = np.asarray(s, dtype=float)
    t = s * total
    theta, phi, th_rate, ph_rate, alpha, gamma = _path_state(schedule, t)

    # angle rates per unit s
    th_s = th_rate * total
    ph_s = ph_rate * total
    scale = tau / total

    a = scale * alpha
    if extra_alpha is not None:
        a = a + extra_alpha
    g = gamma

    sin_half = np.sin(theta / 2.0)
    g_pm = -0.5 * ph_s * sin_half**2
    g_pd = np.exp(1j * phi) * _INV_SQRT8 * (1j * th_s - ph_s * np.sin(theta))

    p_pm = np.exp(2j * a)
    p_pd = np.exp(1j * (a - 3.0 * g))
    p_md = np.exp(1j * (-a - 3.0 * g))

    ht = np.zeros(s.shape + (3, 3), dtype=complex)
    ht[..., 0, 1] = p_pm * g_pm
    ht[..., 1, 0] = np.conj(ht[..., 0, 1])
    ht[..., 0, 2] = p_pd * g_pd
    ht[..., 2, 0] = np.conj(ht[..., 0, 2])
    ht[..., 1, 2] = p_md * g_pd
    ht[..., 2, 1] = np.conj(ht[..., 1, 2])
    if signs is not None:
        ht = ht * signs
    return ht


def adiabatic_operator(schedule: Schedule, t: float) -> np.ndarray:
    """Ideal adiabatic evolution operator at native time t (3x3, basis e/0/1)."""
    rec = accumulate_phases(schedule, t)
    f0 = eigenframe(schedule.control_at(0.0))
    ft = eigenframe(schedule.control_at(t))
    u = np.zeros((3, 3), dtype=complex)
    for n in EIGENLABELS:
        phase = np.exp(-1j * rec.alpha[n] + 1j * rec.gamma[n])
        u += phase * np.outer(ft.vectors[n], np.conj(f0.vectors[n]))
    return u


def transition_hamiltonian(schedule: Schedule, s: float, tau: float) -> np.ndarray:
    """Nonadiabatic generator at scaled time s, in the initial eigenbasis."""
    if not (0.0 <= s <= 1.0):
        raise ValueError(f"s must lie in [0, 1], got {s}")
    return _ht_stack(schedule, np.array([s]), tau)[0]


def pg_decompose(schedule: Schedule, s: float, tau: float) -> PGFactors:
    """Split H_T(s) into phase factors and couplings, H_T = P * G entrywise."""
    total = schedule.duration
    t = s * total
    theta, phi, th_rate, ph_rate, alpha, gamma = (
        x.item() for x in _path_state(schedule, np.array([t]))
    )
    th_s = th_rate * total
    ph_s = ph_rate * total
    a = (tau / total) * alpha

    g_pm = -0.5 * ph_s * math.sin(theta / 2.0) ** 2
    g_pd = np.exp(1j * phi) * _INV_SQRT8 * (1j * th_s - ph_s * math.sin(theta))
    g = {
        ("+", "-"): g_pm,
        ("-", "+"): g_pm,
        ("+", "d"): g_pd,
        ("-", "d"): g_pd,
        ("d", "+"): np.conj(g_pd),
        ("d", "-"): np.conj(g_pd),
    }
    alpha_of = {"+": a, "-": -a, "d": 0.0}
    gamma_of = {"+": gamma, "-": gamma, "d": -2.0 * gamma}
    p = {
        (k, j): np.exp(1j * ((alpha_of[k] - alpha_of[j]) + (gamma_of[j] - gamma_of[k])))
        for (k, j) in _PAIRS
    }
    return PGFactors(p=p, g=g)


def _cumtrapz(y: np.ndarray, ds: float) -> np.ndarray:
    out = np.zeros_like(y)
    np.cumsum((y[1:] + y[:-1]) * (ds / 2.0), axis=0, out=out[1:])
    return out


def _oscillation_cycles(schedule: Schedule, tau: float) -> float:
    scale = tau / schedule.duration if schedule.duration > 0 else 0.0
    area = sum(abs(s.area) for s in schedule.segments)
    rec = accumulate_phases(schedule, schedule.duration)
    return (2.0 * scale * area + 3.0 * abs(rec.gamma["+"])) / (2.0 * math.pi)


def f_integral(
    schedule: Schedule,
    tau: float,
    *,
    n_grid: int | None = None,
    refine_rel_tol: float = 1e-6,
    max_refinements: int = 8,
) -> TransitionReport:
    """Integrate H_T over scaled time and report the error functional.

    The grid starts at 2000 points per unit s (or denser if the phase
    oscillates faster) and doubles until halving changes the peak integral
    norm by less than ``refine_rel_tol`` relatively.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    if n_grid is None:
        n = max(2000, int(40 * _oscillation_cycles(schedule, tau)))
    else:
        n = int(n_grid)

    def compute(n_points):
        s = np.linspace(0.0, 1.0, n_points + 1)
        ht = _ht_stack(schedule, s, tau)
        f = _cumtrapz(ht, 1.0 / n_points)
        f_norm = np.linalg.norm(f, axis=(1, 2))
        return s, ht, f, f_norm

    s, ht, f, f_norm = compute(n)
    peak = float(f_norm.max())
    for _ in range(max_refinements):
        if n_grid is not None:
            break
        n2 = 2 * n
        s2, ht2, f2, f_norm2 = compute(n2)
        peak2 = float(f_norm2.max())
        converged = abs(peak2 - peak) <= refine_rel_tol * max(peak2, 1e-300)
        s, ht, f, f_norm, n, peak = s2, ht2, f2, f_norm2, n2, peak2
        if converged:
            break

    ht_norm = np.linalg.norm(ht, axis=(1, 2))
    stride = max(1, len(s) // 512)
    keep = np.arange(0, len(s), stride)
    if keep[-1] != len(s) - 1:
        keep = np.append(keep, len(s) - 1)
    samples = tuple((float(s[i]), ht[i].copy()) for i in keep)
    f_map = {
        (k, j): f[keep, _IDX[k], _IDX[j]].copy() for (k, j) in _PAIRS
    }
    return TransitionReport(
        tau=tau,
        samples=samples,
        f_integrals=f_map,
        sample_s=s[keep].copy(),
        s_grid=s,
        ht_norms=ht_norm,
        f_norms=f_norm,
        max_f_norm=peak,
    )


def _flip_offsets(flips: Sequence[FlipEvent], total: float):
    """Sorted flip positions in s with cumulative alpha offsets / sign masks."""
    events = sorted(flips, key=lambda e: e.time)
    s_pos, offsets, signs = [], [], []
    acc = 0.0
    mask = np.ones((3, 3))
    for ev in events:
        if not (0.0 <= ev.time <= total * (1 + 1e-12)):
            raise ValueError(f"flip at t={ev.time} outside schedule")
        if ev.area is not None:
            acc += ev.area
        else:
            for k, j in ev.pairs:
                mask[_IDX[k], _IDX[j]] *= -1.0
                mask[_IDX[j], _IDX[k]] *= -1.0
        s_pos.append(ev.time / total if total > 0 else 0.0)
        offsets.append(acc)
        signs.append(mask.copy())
    return s_pos, offsets, signs


def transition_operator(
    schedule: Schedule,
    tau: float,
    flips: Sequence[FlipEvent] = (),
    *,
    s_stop: float = 1.0,
    samples_per_cycle: int = 64,
    min_slices: int = 1,
) -> np.ndarray:
    """Toggling-frame propagator U_T(s_stop) under H_T with flip events.

    Between events H_T is integrated as a product of midpoint-evaluated
    exponentials; intervals where the phase factors are static (drive off,
    constant-rate ramps) are exact with a single slice, so burst-mode
    programs incur no integration error at all.  A flip event either adds
    its burst area to the dynamical-phase offset (``area`` set) or toggles
    an explicit sign mask for the listed eigenpairs.
    """
    total = schedule.duration
    if total <= 0:
        return np.eye(3, dtype=complex)
    scale = tau / total

    s_flip, offsets, masks = _flip_offsets(flips, total)
    cuts = set(float(b) / total for b in schedule.boundaries)
    cuts.update(s_flip)
    cuts.add(0.0)
    cuts.add(s_stop)
    grid = sorted(c for c in cuts if 0.0 <= c <= s_stop + 1e-15)

    u = np.eye(3, dtype=complex)
    for s0, s1 in zip(grid[:-1], grid[1:]):
        if s1 - s0 <= 1e-18:
            continue
        k = np.searchsorted(s_flip, s0 + 1e-18 * max(1.0, abs(s0)), side="right") - 1
        ext = offsets[k] if k >= 0 else 0.0
        mask = masks[k] if k >= 0 else None

        seg = schedule.segments[schedule.locate((s0 + 1e-15) * total)]
        if seg.theta_start == seg.theta_end and seg.phi_start == seg.phi_end:
            continue  # frozen angles: G = 0 and U_T does not move
        # phase and angle sweep across the interval decide the slicing;
        # static-phase constant-rate pieces are exact with one slice
        frac = (s1 - s0) * total / seg.duration if seg.duration > 0 else 0.0
        dphi = abs(seg.phi_end - seg.phi_start) * frac
        dth = abs(seg.theta_end - seg.theta_start) * frac
        phase_sweep = 2.0 * scale * seg.omega * (s1 - s0) * total + 1.5 * dphi
        cycles = (abs(phase_sweep) + dth + dphi) / (2.0 * math.pi)
        n = max(min_slices, int(math.ceil(cycles * samples_per_cycle)))
        ds = (s1 - s0) / n
        mids = s0 + (np.arange(n) + 0.5) * ds
        ht = _ht_stack(
            schedule,
            mids,
            tau,
            extra_alpha=np.full(n, ext),
            signs=mask,
        )
        for i in range(n):
            u = expm_skew(ht[i], ds) @ u
    return u


def dyson_bound(report: TransitionReport) -> float:
    """Two-term bound on the deviation of U_T from the identity.

    max_s ||F(s)|| plus the integral of ||H_T|| * ||F||; valid while the
    series converges (slow-ramp regime), which is where it is used.
    """
    first = float(report.f_norms.max()) if len(report.f_norms) else 0.0
    second = float(np.trapezoid(report.ht_norms * report.f_norms, report.s_grid))
    return first + second


def toy_phase_integral_max(total_phase: float, n_grid: int = 20000) -> float:
    """max_s |integral_0^s e^{i * total_phase * s'} ds'| on [0, 1].

    The pure-phase model of a single H_T entry with a constant coupling;
    analytically 2/total_phase once the phase completes a half turn.
    """
    s = np.linspace(0.0, 1.0, n_grid + 1)
    integrand = np.exp(1j * total_phase * s)
    f = _cumtrapz(integrand, 1.0 / n_grid)
    return float(np.abs(f).max())

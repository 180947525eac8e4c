"""Exact time-domain propagation of control schedules.

Evolution is a time-ordered product of midpoint-evaluated piecewise-constant
exponentials.  Segments whose angles are frozen contribute a single exact
factor; only genuinely time-dependent stretches are substepped, and the
substep is tightened automatically until halving it no longer moves the
final operator (the convergence gate).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lambda_model import BASIS_LABELS, hamiltonian
from .qmat import DEFAULT_NUMERICS, Numerics, expm_skew, hs_norm
from .schedule import Schedule

__all__ = [
    "TraceRow",
    "PropagationResult",
    "evolve",
    "state_fidelity",
    "gate_error",
    "subspace_leakage",
    "write_trace_csv",
]


@dataclass(frozen=True)
class TraceRow:
    """One sampled instant: time, basis populations, and target fidelity."""

    t: float
    populations: dict
    fidelity: float | None = None


@dataclass(frozen=True)
class PropagationResult:
    final_unitary: np.ndarray
    trace: tuple
    substep: float


def _segment_windows(schedule: Schedule, t_start: float, t_stop: float):
    """Nonempty (t0, t1, segment) pieces of the window, in time order."""
    bounds = schedule.boundaries
    out = []
    for i, seg in enumerate(schedule.segments):
        a = max(float(bounds[i]), t_start)
        b = min(float(bounds[i + 1]), t_stop)
        if b - a > 0.0:
            out.append((a, b, seg))
    return out


def evolve(
    schedule: Schedule,
    hbuilder=None,
    substep: float | None = None,
    initial: np.ndarray | None = None,
    *,
    time_dependent: bool = False,
    target: np.ndarray | None = None,
    labels: tuple | None = None,
    trace_points: int = 0,
    t_start: float = 0.0,
    t_stop: float | None = None,
    refine: bool = True,
    refine_tol: float = 1e-7,
    max_refinements: int = 10,
    numerics: Numerics = DEFAULT_NUMERICS,
) -> PropagationResult:
    """Propagate a schedule under a Hamiltonian builder.

    ``hbuilder`` maps a ControlPoint to a Hermitian matrix (default: the
    three-level drive Hamiltonian); pass ``time_dependent=True`` for a
    builder that takes absolute time instead, e.g. a rotating-frame model
    with explicit oscillations.  ``initial`` enables the population /
    fidelity trace (``target`` is the ideal final state it is scored
    against).  The result carries the full evolution operator regardless.
    """
    if hbuilder is None:
        hbuilder = hamiltonian
    if t_stop is None:
        t_stop = schedule.duration
    if not (0.0 <= t_start < t_stop <= schedule.duration * (1 + 1e-12) + 1e-300):
        raise ValueError(f"bad window [{t_start}, {t_stop}]")

    shortest = schedule.min_active_duration()
    if substep is None:
        substep = shortest / 64.0 if shortest > 0 else (t_stop - t_start)
    if substep <= 0:
        raise ValueError("substep must be positive")
    if shortest > 0 and substep > shortest * (1 + 1e-12):
        raise ValueError(
            f"substep {substep:g} exceeds the shortest segment ({shortest:g})"
        )

    def build(seg_control, t_mid):
        h = hbuilder(t_mid) if time_dependent else hbuilder(seg_control)
        return np.asarray(h, dtype=complex)

    probe = schedule.control_at(t_start)
    dim = build(probe, t_start).shape[0]
    if initial is not None:
        initial = np.asarray(initial, dtype=complex)
        if initial.shape != (dim,):
            raise ValueError(f"initial state has dim {initial.shape}, expected {dim}")
    if labels is None:
        labels = BASIS_LABELS if dim == 3 else tuple(str(i) for i in range(dim))

    sample_times = (
        np.linspace(t_start, t_stop, trace_points)
        if (trace_points > 0 and initial is not None)
        else np.array([])
    )

    def run(h: float):
        u = np.eye(dim, dtype=complex)
        rows = []
        next_sample = 0

        def emit_until(t_now):
            nonlocal next_sample
            while (
                next_sample < len(sample_times)
                and sample_times[next_sample] <= t_now + 1e-15 * max(t_now, 1.0)
            ):
                psi = u @ initial
                pops = {
                    lab: float(np.abs(psi[i]) ** 2) for i, lab in enumerate(labels)
                }
                fid = (
                    float(np.abs(np.vdot(target, psi)) ** 2)
                    if target is not None
                    else None
                )
                rows.append(TraceRow(float(sample_times[next_sample]), pops, fid))
                next_sample += 1

        emit_until(t_start)
        for a, b, seg in _segment_windows(schedule, t_start, t_stop):
            frozen = (
                not time_dependent
                and seg.theta_start == seg.theta_end
                and seg.phi_start == seg.phi_end
            )
            # break constant pieces only at requested sample times
            inner = sample_times[(sample_times > a) & (sample_times < b)]
            edges = np.concatenate([[a], inner, [b]]) if frozen else None
            if frozen:
                hmat = build(schedule.control_at((a + b) / 2.0), (a + b) / 2.0)
                for ta, tb in zip(edges[:-1], edges[1:]):
                    if tb - ta <= 0:
                        continue
                    u = expm_skew(hmat, tb - ta, numerics) @ u
                    emit_until(tb)
            else:
                cut = np.concatenate([[a], inner, [b]])
                for ta, tb in zip(cut[:-1], cut[1:]):
                    if tb - ta <= 0:
                        continue
                    n = max(1, int(np.ceil((tb - ta) / h)))
                    dt = (tb - ta) / n
                    for k in range(n):
                        tm = ta + (k + 0.5) * dt
                        hmat = build(schedule.control_at(tm), tm)
                        u = expm_skew(hmat, dt, numerics) @ u
                    emit_until(tb)
        emit_until(t_stop)
        return u, rows

    u, rows = run(substep)
    if refine:
        for _ in range(max_refinements):
            u2, rows2 = run(substep / 2.0)
            drift = hs_norm(u2 - u)
            u, rows, substep = u2, rows2, substep / 2.0
            if drift < refine_tol:
                break
        else:
            raise RuntimeError(
                f"substep refinement did not converge below {refine_tol:g}"
            )
    return PropagationResult(final_unitary=u, trace=tuple(rows), substep=substep)


def state_fidelity(a, b) -> float:
    """|<a|b>|^2 for normalized state vectors."""
    va = np.asarray(a, dtype=complex)
    vb = np.asarray(b, dtype=complex)
    if va.shape != vb.shape:
        raise ValueError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    for v in (va, vb):
        if abs(np.linalg.norm(v) - 1.0) > 1e-8:
            raise ValueError("states must be normalized")
    return float(np.abs(np.vdot(va, vb)) ** 2)


def subspace_leakage(u, subspace) -> float:
    """||(I - P) U P||_HS: amplitude leaving the retained subspace."""
    m = np.asarray(u, dtype=complex)
    idx = list(subspace)
    rest = [i for i in range(m.shape[0]) if i not in idx]
    return float(np.linalg.norm(m[np.ix_(rest, idx)])) if rest else 0.0


def gate_error(realized, target, subspace, max_leakage: float = 0.05) -> float:
    """Phase-invariant distance between the retained block and the target.

    Verifies first that leakage out of the subspace stays below
    ``max_leakage`` so the block comparison is meaningful.
    """
    m = np.asarray(realized, dtype=complex)
    idx = list(subspace)
    leak = subspace_leakage(m, idx)
    if leak > max_leakage:
        raise ValueError(f"leakage {leak:.3e} exceeds threshold {max_leakage:g}")
    block = m[np.ix_(idx, idx)]
    tgt = np.asarray(target, dtype=complex)
    if tgt.shape != block.shape:
        raise ValueError(f"target shape {tgt.shape} does not match block {block.shape}")
    d = block.shape[0]
    return max(0.0, 1.0 - abs(np.trace(tgt.conj().T @ block)) / d)


def write_trace_csv(rows, path, labels) -> None:
    """CSV trace: header t,<labels...>,fidelity; 12 significant digits."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t," + ",".join(str(lab) for lab in labels) + ",fidelity\n")
        for row in rows:
            cells = [f"{row.t:.12g}"]
            cells += [f"{row.populations[lab]:.12g}" for lab in labels]
            cells.append("" if row.fidelity is None else f"{row.fidelity:.12g}")
            fh.write(",".join(cells) + "\n")

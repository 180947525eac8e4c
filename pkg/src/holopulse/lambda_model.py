"""Three-level Lambda system: Hamiltonian, smooth eigenframe, phases, holonomies.

Basis order is fixed to {|e>, |0>, |1>} everywhere (excited state first,
logical qubit in rows/cols 1 and 2).  The drive couples both ground states
to |e> with polar/azimuthal control angles (theta, phi) and envelope omega:

    H = omega * sin(theta/2) e^{i phi} |e><0|  -  omega * cos(theta/2) |e><1|  + h.c.

The instantaneous eigenvectors are taken from the explicit angle
parameterization (never from a numeric eigensolver) so the frame is smooth
in (theta, phi) and the accumulated geometric phases are gauge-meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .schedule import Schedule

__all__ = [
    "BASIS_LABELS",
    "EIGENLABELS",
    "ControlPoint",
    "EigenFrame",
    "PhaseRecord",
    "hamiltonian",
    "eigenframe",
    "accumulate_phases",
    "holonomy_gate",
    "loop_unitary_3level",
]

BASIS_LABELS = ("e", "0", "1")
EIGENLABELS = ("+", "-", "d")

_ANGLE_SLACK = 1e-12


@dataclass(frozen=True)
class ControlPoint:
    """Instantaneous drive settings: envelope (rad/s) and sphere angles (rad)."""

    omega: float
    theta: float
    phi: float

    def __post_init__(self):
        if self.omega < 0:
            raise ValueError(f"omega must be >= 0, got {self.omega}")
        if not (-_ANGLE_SLACK <= self.theta <= math.pi + _ANGLE_SLACK):
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")


@dataclass(frozen=True)
class EigenFrame:
    """Instantaneous eigensystem in the fixed gauge.

    ``energies`` maps eigenlabel to +omega / -omega / 0 and ``vectors``
    maps eigenlabel to the corresponding unit vector in basis {e, 0, 1}.
    """

    energies: Mapping[str, float]
    vectors: Mapping[str, np.ndarray]


@dataclass(frozen=True)
class PhaseRecord:
    """Accumulated dynamical (alpha) and geometric (gamma) phases per eigenlabel."""

    alpha: Mapping[str, float]
    gamma: Mapping[str, float]


def hamiltonian(c: ControlPoint) -> np.ndarray:
    """3x3 Hermitian drive Hamiltonian in basis {e, 0, 1}."""
    s = math.sin(c.theta / 2.0)
    co = math.cos(c.theta / 2.0)
    g0 = c.omega * s * complex(math.cos(c.phi), math.sin(c.phi))  # <e|H|0>
    g1 = -c.omega * co  # <e|H|1>
    h = np.zeros((3, 3), dtype=complex)
    h[0, 1] = g0
    h[1, 0] = np.conj(g0)
    h[0, 2] = g1
    h[2, 0] = np.conj(g1)
    return h


def eigenframe(c: ControlPoint) -> EigenFrame:
    """Eigenvalues (+omega, -omega, 0) and the fixed-gauge eigenvectors.

    The bright pair mixes the coupled ground-state combination with |e>;
    the dark state has no |e> component.  The parameterization stays
    defined at omega = 0 (angles still select the frame).
    """
    s = math.sin(c.theta / 2.0)
    co = math.cos(c.theta / 2.0)
    emphi = complex(math.cos(c.phi), -math.sin(c.phi))  # e^{-i phi}
    inv = 1.0 / math.sqrt(2.0)
    v_plus = np.array([inv, inv * s * emphi, -inv * co], dtype=complex)
    v_minus = np.array([-inv, inv * s * emphi, -inv * co], dtype=complex)
    v_dark = np.array([0.0, co, s * np.conj(emphi)], dtype=complex)
    return EigenFrame(
        energies={"+": c.omega, "-": -c.omega, "d": 0.0},
        vectors={"+": v_plus, "-": v_minus, "d": v_dark},
    )


def _mean_sin2_half(theta_a: float, theta_b: float) -> float:
    """Average of sin^2(theta/2) over a linear sweep theta_a -> theta_b."""
    dth = theta_b - theta_a
    if abs(dth) < 1e-7:  # midpoint value; O(dth^2) below float precision
        return math.sin((theta_a + theta_b) / 4.0) ** 2
    return 0.5 - (math.sin(theta_b) - math.sin(theta_a)) / (2.0 * dth)


def accumulate_phases(schedule: "Schedule", t: float) -> PhaseRecord:
    """Dynamical and geometric phases accumulated over [0, t].

    Segments sweep angles linearly and hold omega constant, so both
    integrals have closed forms per segment:

        alpha_+ = integral of omega dt
        gamma_+ = integral of (dphi/dt / 2) sin^2(theta/2) dt

    with alpha_- = -alpha_+, alpha_d = 0, gamma_- = gamma_+ and
    gamma_d = -2 gamma_+.
    """
    total = schedule.duration
    if t < -1e-15 or t > total * (1 + 1e-12) + 1e-15:
        raise ValueError(f"time {t} outside schedule duration {total}")
    t = min(max(t, 0.0), total)

    alpha = 0.0
    gamma = 0.0
    elapsed = 0.0
    for seg in schedule.segments:
        if t >= elapsed + seg.duration - 1e-18:
            frac = 1.0
        elif t <= elapsed:
            break
        else:
            frac = (t - elapsed) / seg.duration
        theta_to = seg.theta_start + frac * (seg.theta_end - seg.theta_start)
        dphi = frac * (seg.phi_end - seg.phi_start)
        alpha += seg.omega * seg.duration * frac
        gamma += 0.5 * dphi * _mean_sin2_half(seg.theta_start, theta_to)
        elapsed += seg.duration
        if frac < 1.0:
            break
    return PhaseRecord(
        alpha={"+": alpha, "-": -alpha, "d": 0.0},
        gamma={"+": gamma, "-": gamma, "d": -2.0 * gamma},
    )


def holonomy_gate(theta0: float, phi0: float, gamma_plus: float) -> np.ndarray:
    """Closed-loop holonomy on the logical {|0>, |1>} subspace.

    The loop starting at (theta0, phi0) that gathers geometric phase
    gamma_plus on the bright pair acts as e^{i gamma_plus} on the bright
    ground-state combination and e^{-2i gamma_plus} on the dark state:

        U = e^{i g} (I - (1 - e^{-3i g}) P_dark)
    """
    s2 = math.sin(theta0 / 2.0) ** 2
    c2 = math.cos(theta0 / 2.0) ** 2
    half_sin = 0.5 * math.sin(theta0)
    eb = np.exp(1j * gamma_plus)
    ed = np.exp(-2j * gamma_plus)
    off = half_sin * (ed - eb)
    emphi = np.exp(-1j * phi0)
    return np.array(
        [
            [eb * s2 + ed * c2, off * emphi],
            [off * np.conj(emphi), eb * c2 + ed * s2],
        ],
        dtype=complex,
    )


def loop_unitary_3level(theta0: float, phi0: float, gamma_plus: float) -> np.ndarray:
    """Full 3x3 cyclic evolution operator in basis {e, 0, 1}.

    The |e> entry is the bright-pair phase e^{i gamma_plus}; the logical
    block equals :func:`holonomy_gate`.
    """
    u = np.zeros((3, 3), dtype=complex)
    u[0, 0] = np.exp(1j * gamma_plus)
    u[1:, 1:] = holonomy_gate(theta0, phi0, gamma_plus)
    return u

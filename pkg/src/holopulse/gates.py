"""Target-gate library: named gates, axis-angle decomposition, controlled lifts.

A gate is specified by the holonomy triple (theta0, phi0, gamma_plus):
the loop base point fixes the rotation axis on the Bloch sphere and the
accumulated geometric phase fixes the rotation angle (chi = 3 gamma_plus).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lambda_model import holonomy_gate
from .qmat import distance_up_to_phase, require_unitary

__all__ = ["GateSpec", "table1", "decompose", "controlled", "SINGLE_QUBIT_LABELS"]

_SQ2 = 1.0 / math.sqrt(2.0)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex)
S_GATE = np.array([[1, 0], [0, 1j]], dtype=complex)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)

SINGLE_QUBIT_LABELS = ("sx", "sy", "sz", "h", "s")

_ALIASES = {
    "sx": "sx", "sigma_x": "sx", "x": "sx",
    "sy": "sy", "sigma_y": "sy", "y": "sy",
    "sz": "sz", "sigma_z": "sz", "z": "sz",
    "h": "h", "hadamard": "h",
    "s": "s", "phase": "s",
    "cnot": "cnot", "cx": "cnot",
    "cphase": "cphase", "cz": "cphase", "controlled-phase": "cphase",
}


@dataclass(frozen=True)
class GateSpec:
    """Holonomy parameters plus the unitary they induce.

    ``target`` is 2x2 for single-qubit gates and 4x4 for controlled ones
    (first qubit is the control).  ``global_phase`` is the angle delta with
    target ~ e^{i delta} * realized gate, reported because the holonomy
    formulas fix gates only up to a global phase.
    """

    theta0: float
    phi0: float
    gamma_plus: float
    target: np.ndarray
    label: str
    global_phase: float = 0.0
    two_qubit: bool = field(default=False)

    def realized(self) -> np.ndarray:
        """Gate predicted by the closed-form holonomy for these parameters."""
        u = holonomy_gate(self.theta0, self.phi0, self.gamma_plus)
        return controlled_matrix(u) if self.two_qubit else u

    def validate(self, tol: float = 1e-10) -> float:
        d = distance_up_to_phase(self.realized(), self.target)
        if d > tol:
            raise ValueError(f"gate spec {self.label!r} off target by {d:.3e}")
        return d


def controlled_matrix(u: np.ndarray) -> np.ndarray:
    """|0><0| x I + |1><1| x U with the first qubit as control."""
    out = np.eye(4, dtype=complex)
    out[2:, 2:] = np.asarray(u, dtype=complex)
    return out


def _phase_between(target: np.ndarray, realized: np.ndarray) -> float:
    tr = np.trace(realized.conj().T @ target)
    return float(np.angle(tr)) if abs(tr) > 1e-12 else 0.0


def _make_spec(label, theta0, phi0, gamma_plus, target, two_qubit=False) -> GateSpec:
    base = holonomy_gate(theta0, phi0, gamma_plus)
    realized = controlled_matrix(base) if two_qubit else base
    return GateSpec(
        theta0=theta0,
        phi0=phi0,
        gamma_plus=gamma_plus,
        target=np.asarray(target, dtype=complex),
        label=label,
        global_phase=_phase_between(np.asarray(target, dtype=complex), realized),
        two_qubit=two_qubit,
    )


def from_triple(
    theta0: float,
    phi0: float,
    gamma_plus: float,
    *,
    two_qubit: bool = False,
    label: str = "custom",
) -> GateSpec:
    """GateSpec for an arbitrary holonomy triple (target = the induced gate)."""
    base = holonomy_gate(theta0, phi0, gamma_plus)
    target = controlled_matrix(base) if two_qubit else base
    return _make_spec(label, theta0, phi0, gamma_plus, target, two_qubit=two_qubit)


def _cphase_target(gamma: float) -> np.ndarray:
    # Conditional phase gamma on |11>, with the by-product phase the
    # theta0 = 0 loop leaves on the controlled block.
    block = np.exp(-2j * gamma / 3.0) * np.diag([1.0, np.exp(1j * gamma)])
    return controlled_matrix(block)


def table1(label: str, gamma: float | None = None) -> GateSpec:
    """Look up a named gate's holonomy parameters.

    Known labels: sx, sy, sz, h, s, cnot, cphase (cphase needs the
    conditional phase ``gamma``; the loop then uses gamma_plus = gamma / 3).
    """
    key = _ALIASES.get(label.strip().lower())
    if key is None:
        raise ValueError(f"unknown gate label {label!r}")
    if key == "sx":
        return _make_spec("sx", math.pi / 2, 0.0, math.pi, SIGMA_X)
    if key == "sy":
        return _make_spec("sy", math.pi / 2, math.pi / 2, math.pi, SIGMA_Y)
    if key == "sz":
        return _make_spec("sz", 0.0, 0.0, math.pi, SIGMA_Z)
    if key == "h":
        return _make_spec("h", math.pi / 4, 0.0, math.pi, HADAMARD)
    if key == "s":
        return _make_spec("s", 0.0, 0.0, math.pi / 6, S_GATE)
    if key == "cnot":
        return _make_spec("cnot", math.pi / 2, 0.0, math.pi, CNOT, two_qubit=True)
    if gamma is None:
        raise ValueError("cphase requires the conditional phase gamma")
    return _make_spec(
        f"cphase({gamma:g})", 0.0, 0.0, gamma / 3.0, _cphase_target(gamma),
        two_qubit=True,
    )


def decompose(target) -> GateSpec:
    """Invert an arbitrary single-qubit unitary into a holonomy triple.

    Strips the global phase, reads the rotation as exp(-i chi/2 n.sigma)
    with chi in [0, 2pi), and maps gamma_plus = chi/3, theta0 = arccos(n_z),
    phi0 = atan2(n_y, n_x).  The chi -> 0 axis degeneracy returns (0, 0, 0).
    """
    u = require_unitary(target)
    if u.shape != (2, 2):
        raise ValueError(f"expected a 2x2 unitary, got {u.shape}")
    # det(e^{-i alpha} U) = 1; pick alpha = arg(det)/2 and fold the leftover
    # sign ambiguity into the rotation angle below.
    alpha = 0.5 * np.angle(np.linalg.det(u))
    r = np.exp(-1j * alpha) * u
    cos_half = float(np.clip(np.real(np.trace(r)) / 2.0, -1.0, 1.0))
    chi = 2.0 * math.acos(cos_half)
    sin_half = math.sin(chi / 2.0)
    if sin_half < 1e-9 or abs(chi - 2.0 * math.pi) < 1e-9:
        theta0, phi0, gamma_plus = 0.0, 0.0, 0.0
    else:
        axis = np.array(
            [
                np.real(1j * np.trace(SIGMA_X @ r)),
                np.real(1j * np.trace(SIGMA_Y @ r)),
                np.real(1j * np.trace(SIGMA_Z @ r)),
            ]
        ) / (2.0 * sin_half)
        axis /= np.linalg.norm(axis)
        theta0 = math.acos(float(np.clip(axis[2], -1.0, 1.0)))
        phi0 = math.atan2(axis[1], axis[0])
        gamma_plus = chi / 3.0
    return _make_spec("custom", theta0, phi0, gamma_plus, u)


def controlled(spec: GateSpec) -> np.ndarray:
    """4x4 controlled version of a single-qubit gate spec (control = qubit 1)."""
    if spec.two_qubit:
        return spec.realized()
    return controlled_matrix(holonomy_gate(spec.theta0, spec.phi0, spec.gamma_plus))

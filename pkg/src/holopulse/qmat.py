"""Dense complex linear algebra for small quantum operators.

Everything in the simulator runs on 2x2 .. 9x9 matrices, so exact
Hermitian eigendecompositions are used for propagators instead of
scaling-and-squaring.  All functions are pure and operate on plain
numpy arrays (complex128).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Numerics",
    "DEFAULT_NUMERICS",
    "hermiticity_defect",
    "unitarity_defect",
    "require_hermitian",
    "require_unitary",
    "expm_skew",
    "hs_norm",
    "commutator",
    "distance_up_to_phase",
]


@dataclass(frozen=True)
class Numerics:
    """Shared numeric tolerances (one record so they are set in one place)."""

    hermitian_tol: float = 1e-12
    unitary_tol: float = 1e-10


DEFAULT_NUMERICS = Numerics()


def _as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def hermiticity_defect(m) -> float:
    """Largest entrywise deviation from M = M-dagger, relative to scale."""
    a = _as_matrix(m)
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    return float(np.max(np.abs(a - a.conj().T))) / scale if a.size else 0.0


def unitarity_defect(u) -> float:
    """Hilbert-Schmidt norm of U-dagger U minus identity."""
    a = _as_matrix(u)
    return float(np.linalg.norm(a.conj().T @ a - np.eye(a.shape[0])))


def require_hermitian(m, numerics: Numerics = DEFAULT_NUMERICS) -> np.ndarray:
    a = _as_matrix(m)
    defect = hermiticity_defect(a)
    if defect > numerics.hermitian_tol:
        raise ValueError(f"matrix is not Hermitian (relative defect {defect:.3e})")
    return a


def require_unitary(u, numerics: Numerics = DEFAULT_NUMERICS) -> np.ndarray:
    a = _as_matrix(u)
    defect = unitarity_defect(a)
    if defect > numerics.unitary_tol:
        raise ValueError(f"matrix is not unitary (defect {defect:.3e})")
    return a


def expm_skew(h, t: float, numerics: Numerics = DEFAULT_NUMERICS) -> np.ndarray:
    """exp(-i H t) for Hermitian H, via eigendecomposition.

    Exact (to floating point) at any step size, which keeps piecewise
    constant propagation free of integrator error.
    """
    a = require_hermitian(h, numerics)
    if not np.isfinite(t):
        raise ValueError("time must be finite")
    w, v = np.linalg.eigh(a)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def hs_norm(m) -> float:
    """Hilbert-Schmidt (Frobenius) norm sqrt(sum |m_ij|^2)."""
    return float(np.linalg.norm(np.asarray(m, dtype=complex)))


def commutator(a, b) -> np.ndarray:
    """AB - BA for equal-dimension square matrices."""
    ma, mb = _as_matrix(a), _as_matrix(b)
    if ma.shape != mb.shape:
        raise ValueError(f"dimension mismatch: {ma.shape} vs {mb.shape}")
    return ma @ mb - mb @ ma


def distance_up_to_phase(u, v, numerics: Numerics = DEFAULT_NUMERICS) -> float:
    """Global-phase-invariant distance 1 - |Tr(U-dagger V)| / dim, in [0, 1]."""
    mu = require_unitary(u, numerics)
    mv = require_unitary(v, numerics)
    if mu.shape != mv.shape:
        raise ValueError(f"dimension mismatch: {mu.shape} vs {mv.shape}")
    d = mu.shape[0]
    return max(0.0, 1.0 - abs(np.trace(mu.conj().T @ mv)) / d)

"""Error-quaternion rigid-body dynamics, energies and pcH structure matrices.

The state ``zeta`` is a length-7 array ``(eps0, epsr, omega)``.  Structure
matrices act on gradients written in the momentum-like coordinates
``(eps0, epsr - 1, M omega)`` and return ``(eps0_dot, epsr_dot, M omega_dot)``;
``weight_matrix(M)`` converts between the two layouts.
"""

from __future__ import annotations

import numpy as np

from .attitude_math import skew

PD_TOL = 1e-10
SYM_TOL = 1e-12

ZETA_STAR = np.array([0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0])

# Input matrix in momentum coordinates: the torque enters M omega_dot directly.
B_INPUT = np.vstack([np.zeros((4, 3)), np.eye(3)])


def validate_inertia(M) -> np.ndarray:
    """Return ``M`` as a float array after checking symmetry and definiteness."""
    M = np.array(M, dtype=float)
    if M.shape != (3, 3) or not np.all(np.isfinite(M)):
        raise ValueError(f"inertia must be a finite 3x3 matrix, got shape {M.shape}")
    if np.max(np.abs(M - M.T)) > SYM_TOL * max(1.0, np.max(np.abs(M))):
        raise ValueError("inertia matrix is not symmetric")
    eig = np.linalg.eigvalsh(M)
    if eig[0] <= PD_TOL:
        raise ValueError(f"inertia matrix is not positive definite (min eigenvalue {eig[0]:.3g})")
    return M


def weight_matrix(M: np.ndarray) -> np.ndarray:
    """``P = blockdiag(I4, M)``."""
    P = np.eye(7)
    P[4:, 4:] = M
    return P


def to_momentum(zeta: np.ndarray, M: np.ndarray) -> np.ndarray:
    """``x = P zeta = (eps, M omega)``; batched over leading axes."""
    zeta = np.asarray(zeta, dtype=float)
    return np.concatenate([zeta[..., :4], zeta[..., 4:] @ M.T], axis=-1)


def from_momentum(x: np.ndarray, M: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.concatenate([x[..., :4], np.linalg.solve(M, x[..., 4:].T).T], axis=-1)


def split(zeta: np.ndarray):
    zeta = np.asarray(zeta, dtype=float)
    return zeta[..., :3], zeta[..., 3], zeta[..., 4:]


def rhs(zeta: np.ndarray, u: np.ndarray, M: np.ndarray, Minv: np.ndarray | None = None) -> np.ndarray:
    """Time derivative of ``zeta`` under torque ``u``.

    ``eps0' = 1/2 S(w) eps0 + 1/2 w epsr``, ``epsr' = -1/2 w.eps0`` and
    ``M w' = S(w) M w + u``.  Accepts ``(..., 7)`` states with broadcastable
    ``(..., 3)`` torques.
    """
    zeta = np.asarray(zeta, dtype=float)
    u = np.asarray(u, dtype=float)
    if Minv is None:
        Minv = np.linalg.inv(M)
    e0 = zeta[..., :3]
    er = zeta[..., 3:4]
    w = zeta[..., 4:]
    de0 = 0.5 * (np.cross(w, e0) + w * er)
    der = -0.5 * np.sum(w * e0, axis=-1, keepdims=True)
    dw = (np.cross(w, w @ M.T) + u) @ Minv.T
    return np.concatenate([de0, der, dw], axis=-1)


def hamiltonian_H(zeta: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Open-loop energy ``1/2 (eps.eps + w.M w)``."""
    zeta = np.asarray(zeta, dtype=float)
    w = zeta[..., 4:]
    return 0.5 * (np.sum(zeta[..., :4] ** 2, axis=-1) + np.sum(w * (w @ M.T), axis=-1))


def hamiltonian_Hd(zeta: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Target energy ``1/2 (eps0.eps0 + (epsr - 1)^2 + w.M w)``."""
    zeta = np.asarray(zeta, dtype=float)
    e0, er, w = zeta[..., :3], zeta[..., 3], zeta[..., 4:]
    return 0.5 * (np.sum(e0**2, axis=-1) + (er - 1.0) ** 2 + np.sum(w * (w @ M.T), axis=-1))


def hamiltonian_Hd_hat(zeta: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Anti-unwinding energy ``1/2 (eps0.eps0 + 1 - epsr^2 + w.M w)``, minimal at both poles."""
    zeta = np.asarray(zeta, dtype=float)
    e0, er, w = zeta[..., :3], zeta[..., 3], zeta[..., 4:]
    return 0.5 * (np.sum(e0**2, axis=-1) + 1.0 - er**2 + np.sum(w * (w @ M.T), axis=-1))


def hamiltonian_Hd_momentum(zeta: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Shaped storage function ``1/2 |P (zeta - zeta*)|^2``.

    This is the energy the closed-loop structure ``(J_d - R_d)`` actually
    shapes: with ``x = (eps, M w)`` it reads ``1/2 |x - x*|^2`` and its
    gradient in ``x`` is ``(eps0, epsr - 1, M w)``.  It is conserved by the
    continuous energy-shaping drift for any inertia, which ``hamiltonian_Hd``
    is only when ``M = I``.
    """
    zeta = np.asarray(zeta, dtype=float)
    e0, er, w = zeta[..., :3], zeta[..., 3], zeta[..., 4:]
    Mw = w @ M.T
    return 0.5 * (np.sum(e0**2, axis=-1) + (er - 1.0) ** 2 + np.sum(Mw**2, axis=-1))


def grad_Hd(zeta: np.ndarray, M: np.ndarray) -> np.ndarray:
    """``(eps0, epsr - 1, M w) = P (zeta - zeta*)``."""
    return to_momentum(np.asarray(zeta, dtype=float) - ZETA_STAR, M)


def grad_H(zeta: np.ndarray, M: np.ndarray) -> np.ndarray:
    return to_momentum(zeta, M)


def discrete_gradient_Hd(zeta: np.ndarray, zeta_plus: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Midpoint discrete gradient ``1/2 P (zeta+ + zeta - 2 zeta*)``.

    ``(zeta+ - zeta) . result`` equals ``Hd(zeta+) - Hd(zeta)`` exactly, and
    in momentum coordinates ``(x+ - x) . result`` equals the change of
    ``hamiltonian_Hd_momentum``.
    """
    zeta = np.asarray(zeta, dtype=float)
    zeta_plus = np.asarray(zeta_plus, dtype=float)
    return 0.5 * to_momentum(zeta_plus + zeta - 2.0 * ZETA_STAR, M)


def J_matrix(w: np.ndarray) -> np.ndarray:
    """Open-loop interconnection matrix ``J(w)``."""
    w = np.asarray(w, dtype=float)
    J = np.zeros((7, 7))
    J[:3, :3] = 0.5 * skew(w)
    J[:3, 3] = 0.5 * w
    J[3, :3] = -0.5 * w
    J[4:, 4:] = skew(w)
    return J


def Jd_matrix(w: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Closed-loop interconnection ``J_d(w)``: ``J(w)`` plus the ``+-1/2 M^-1`` coupling."""
    J = J_matrix(w)
    Minv = np.linalg.inv(M)
    J[:3, 4:] = 0.5 * Minv
    J[4:, :3] = -0.5 * Minv
    return J


def Rd_matrix(M: np.ndarray, kappa_di: np.ndarray) -> np.ndarray:
    """Damping matrix ``blockdiag(0, 0, kappa_di M^-1)``.

    The lower block is not symmetric unless ``kappa_di`` and ``M`` commute;
    the dissipated power only sees its symmetric part.
    """
    R = np.zeros((7, 7))
    R[4:, 4:] = np.asarray(kappa_di, dtype=float) @ np.linalg.inv(M)
    return R

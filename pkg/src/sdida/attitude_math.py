"""Quaternion algebra and small dense linear-algebra helpers.

Quaternions are stored vector-part first, ``q = (q0x, q0y, q0z, qr)``, so the
layout matches ``col{q0, qr}``.  Every function accepts a leading batch
dimension where that is cheap to support.
"""

from __future__ import annotations

import numpy as np

UNIT_TOL = 1e-6

IDENTITY_QUATERNION = np.array([0.0, 0.0, 0.0, 1.0])


def skew(w: np.ndarray) -> np.ndarray:
    """Return ``S(w)`` such that ``S(w) @ v == np.cross(w, v)``.

    Works on ``(..., 3)`` input and returns ``(..., 3, 3)``.
    """
    w = np.asarray(w, dtype=float)
    out = np.zeros(w.shape[:-1] + (3, 3))
    out[..., 0, 1] = -w[..., 2]
    out[..., 0, 2] = w[..., 1]
    out[..., 1, 0] = w[..., 2]
    out[..., 1, 2] = -w[..., 0]
    out[..., 2, 0] = -w[..., 1]
    out[..., 2, 1] = w[..., 0]
    return out


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Quaternion product ``a (x) b`` in vector-first storage.

    ``(a0, ar) (x) (b0, br) = (ar b0 + br a0 + a0 x b0, ar br - a0.b0)``, the
    product under which ``q_dot = 1/2 (w, 0) (x) q`` reproduces the attitude
    kinematics used throughout the package.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a0, ar = a[..., :3], a[..., 3:]
    b0, br = b[..., :3], b[..., 3:]
    vec = ar * b0 + br * a0 + np.cross(a0, b0)
    sca = ar * br - np.sum(a0 * b0, axis=-1, keepdims=True)
    return np.concatenate([vec, sca], axis=-1)


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.concatenate([-q[..., :3], q[..., 3:]], axis=-1)


def check_unit(q: np.ndarray, tol: float = UNIT_TOL, name: str = "quaternion") -> None:
    dev = np.abs(np.linalg.norm(np.asarray(q, dtype=float), axis=-1) - 1.0)
    if np.any(~np.isfinite(dev)) or np.any(dev > tol):
        raise ValueError(f"{name} is not unit-norm (deviation {np.max(dev):.3g} > {tol:g})")


def normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def error_quaternion(q: np.ndarray, q_star: np.ndarray) -> np.ndarray:
    """Error quaternion ``eps = q (x) conj(q_star)``.

    Componentwise, with ``p = conj(q_star)``::

        eps0 = qr p0 + pr q0 + S(q0) p0
        epsr = qr pr - q0.p0

    so that ``error_quaternion(q, q)`` is the identity ``(0, 0, 0, 1)`` and the
    error obeys the same kinematics as ``q`` because ``q_star`` is constant.
    """
    check_unit(q, name="q")
    check_unit(q_star, name="q_star")
    return quat_multiply(q, quat_conjugate(q_star))


def select_sign(q: np.ndarray, q_prev: np.ndarray | None) -> np.ndarray:
    """Pick the sign of ``q`` that keeps it closest to ``q_prev``.

    The sampled feedback depends on the quaternion sign, so measurements are
    made continuous: ``-q`` is returned whenever ``q . q_prev < 0``.
    """
    q = np.asarray(q, dtype=float)
    if q_prev is None:
        return q.copy()
    return -q if float(np.dot(q, q_prev)) < 0.0 else q.copy()


def rpy_to_quaternion(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Roll-pitch-yaw angles to a unit quaternion (Z-Y-X intrinsic sequence).

    The rotation is ``Rz(yaw) Ry(pitch) Rx(roll)``.  Returned vector-first.
    """
    cr, sr = np.cos(roll / 2), np.sin(roll / 2)
    cp, sp = np.cos(pitch / 2), np.sin(pitch / 2)
    cy, sy = np.cos(yaw / 2), np.sin(yaw / 2)
    return np.array(
        [
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy,
            cr * cp * cy + sr * sp * sy,
        ]
    )


def vec(A: np.ndarray) -> np.ndarray:
    """Row-major vectorization ``col{a11, ..., a1n, ..., an1, ..., ann}``.

    With this ordering ``A @ b == kron(I, b.T) @ vec(A)``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError(f"vec expects a 2-D matrix, got shape {A.shape}")
    return A.reshape(-1).copy()


def unvec(a: np.ndarray, n_rows: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or a.size % n_rows:
        raise ValueError(f"cannot reshape length-{a.size} vector into {n_rows} rows")
    return a.reshape(n_rows, -1).copy()


def kron(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Kronecker product of two 2-D arrays."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.ndim != 2 or B.ndim != 2:
        raise ValueError("kron expects 2-D operands")
    return np.kron(A, B)


def matvec_operator(b: np.ndarray, n_rows: int) -> np.ndarray:
    """The matrix ``kron(I_n, b.T)`` mapping ``vec(A)`` to ``A @ b``."""
    b = np.asarray(b, dtype=float).reshape(1, -1)
    return kron(np.eye(n_rows), b)


def skew_part(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    return 0.5 * (A - np.swapaxes(A, -1, -2))

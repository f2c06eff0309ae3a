"""Feedback laws: continuous IDA-PBC, its anti-unwinding variant, the
sampled-data series controller with explicit order-1/2 corrections, and a
discrete LQR baseline on the linearized error dynamics.

All laws take the error state ``zeta = (eps0, epsr, omega)`` and return a
torque.  The explicit correction terms are written in error coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .attitude_math import skew, skew_part
from . import matching
from .dynamics import J_matrix, Jd_matrix, ZETA_STAR, rhs

KINDS = ("ct-ida", "ct-ida-unwind", "sd-ida", "lqr")
JACOBIAN_STEP = 1e-6


def _split(zeta):
    zeta = np.asarray(zeta, dtype=float)
    return zeta[:3], float(zeta[3]), zeta[4:]


def u_es(zeta: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Energy shaping ``-1/2 M^-1 eps0``."""
    return -0.5 * np.linalg.solve(M, np.asarray(zeta, dtype=float)[:3])


def u_di(zeta: np.ndarray, kappa_di: np.ndarray) -> np.ndarray:
    """Damping injection ``-kappa_di omega``."""
    return -np.asarray(kappa_di, dtype=float) @ np.asarray(zeta, dtype=float)[4:]


def u_ct_ida(zeta: np.ndarray, M: np.ndarray, kappa_di: np.ndarray) -> np.ndarray:
    return u_es(zeta, M) + u_di(zeta, kappa_di)


def u_es_unwinding_safe(zeta: np.ndarray, M: np.ndarray) -> np.ndarray:
    e0, er, _ = _split(zeta)
    return -er * np.linalg.solve(M, e0)


def u_ct_unwinding_safe(zeta: np.ndarray, M: np.ndarray, kappa_di: np.ndarray) -> np.ndarray:
    """``-epsr M^-1 eps0 - kappa_di omega``; vanishes at both ``+-zeta*``."""
    return u_es_unwinding_safe(zeta, M) + u_di(zeta, kappa_di)


def omega_derivatives(zeta: np.ndarray, M: np.ndarray):
    """First and second derivative of ``omega`` under the held torque ``u_es(zeta)``."""
    e0, _, w = _split(zeta)
    Minv = np.linalg.inv(M)
    Mw = M @ w
    w_dot = Minv @ np.cross(w, Mw) - 0.5 * Minv @ Minv @ e0
    w_ddot = Minv @ np.cross(w_dot, Mw) + Minv @ np.cross(w, np.cross(w, Mw) - 0.5 * Minv @ e0)
    return w_dot, w_ddot


@dataclass(frozen=True)
class CorrectionTerms:
    u_es1: np.ndarray
    u_es2: np.ndarray
    u_di1: np.ndarray
    u_di2: np.ndarray
    omega_dot0: np.ndarray
    omega_ddot0: np.ndarray
    J1: np.ndarray
    J2: np.ndarray


def u_es1_term(zeta: np.ndarray, M: np.ndarray) -> np.ndarray:
    e0, er, w = _split(zeta)
    return -0.25 * np.linalg.solve(M, np.cross(w, e0) + er * w)


def u_es2_closed(zeta: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Second energy-shaping correction in closed form.

    Grouping used::

        3/8 (1/2 S(wd) - S(w)^2) M^-1 eps0
        + 1/2 (1/8 (3I - M^-1) w w^T - M^-1 S(wd) - 3/8 M^-1 S(w)^2) eps0
        - 3/8 M^-1 wd epsr
    """
    e0, er, w = _split(zeta)
    Minv = np.linalg.inv(M)
    wd, _ = omega_derivatives(zeta, M)
    Sw, Swd = skew(w), skew(wd)
    I3 = np.eye(3)
    t1 = 0.375 * (0.5 * Swd - Sw @ Sw) @ Minv @ e0
    t2 = 0.5 * ((1.0 / 8.0) * (3 * I3 - Minv) @ np.outer(w, w) - Minv @ Swd - 0.375 * Minv @ Sw @ Sw) @ e0
    t3 = -0.375 * Minv @ wd * er
    return t1 + t2 + t3


def J1_term(zeta: np.ndarray, M: np.ndarray) -> np.ndarray:
    """First interconnection correction: the velocity structure ``J(omega_dot0)``."""
    wd, _ = omega_derivatives(zeta, M)
    return J_matrix(wd)


def J2_closed(zeta: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Second interconnection correction assembled from its closed-form blocks.

    ``omega wd^T - wd omega^T`` replaces the dimensionally inconsistent term in
    the (1,1) block; diagonal blocks are skew-symmetrized and the lower
    triangle is mirrored, so the result is exactly skew.
    """
    e0, er, w = _split(zeta)
    Minv = np.linalg.inv(M)
    wd, wdd = omega_derivatives(zeta, M)
    ue1 = u_es1_term(zeta, M)
    Sw, Swd = skew(w), skew(wd)
    S_mu = skew(Minv @ ue1)
    J11 = (
        0.5 * skew(wdd)
        + 0.125 * Minv @ Sw @ Minv
        + 0.75 * S_mu
        - Sw @ Sw @ Sw / 6.0
        + 0.5 * (Sw @ Swd - Swd @ Sw + np.outer(w, wd) - np.outer(wd, w))
    )
    J12 = 0.75 * Minv @ ue1 + np.dot(w, w) * w / 16.0 + 0.5 * wdd
    J13 = np.outer(w, w) @ Minv / 16.0 + 0.5 * Minv @ Sw @ Sw + 0.125 * (Minv @ Swd - Swd @ Minv)
    J33 = skew(wdd) + 1.5 * S_mu - 0.5 * Sw @ Sw @ Sw + 0.5 * (Swd @ Sw - Sw @ Swd)
    J = np.zeros((7, 7))
    J[:3, :3] = skew_part(J11)
    J[:3, 3] = J12
    J[3, :3] = -J12
    J[:3, 4:] = J13
    J[4:, :3] = -J13.T
    J[4:, 4:] = skew_part(J33)
    return J


def u_di1_term(zeta: np.ndarray, M: np.ndarray, kappa_di: np.ndarray) -> np.ndarray:
    e0, _, w = _split(zeta)
    K = np.asarray(kappa_di, dtype=float)
    Minv = np.linalg.inv(M)
    return -K @ Minv @ (np.cross(w, M @ w) - K @ w) + 0.5 * K @ Minv @ Minv @ e0


def _directional_derivative(fun, zeta, direction, h=JACOBIAN_STEP):
    zeta = np.asarray(zeta, dtype=float)
    scale = h * max(1.0, float(np.linalg.norm(zeta)))
    return (fun(zeta + scale * direction) - fun(zeta - scale * direction)) / (2 * scale)


def u_di2_closed(zeta: np.ndarray, M: np.ndarray, kappa_di: np.ndarray) -> np.ndarray:
    """``d/dt u_di1 - kappa_di M (u_es1 + 1/2 u_di1)``, derivative along ``f + B u_ida``."""
    K = np.asarray(kappa_di, dtype=float)
    flow_dir = rhs(zeta, u_ct_ida(zeta, M, K), M)
    du1 = _directional_derivative(lambda z: u_di1_term(z, M, K), zeta, flow_dir)
    return du1 - K @ M @ (u_es1_term(zeta, M) + 0.5 * u_di1_term(zeta, M, K))


def correction_terms(
    zeta: np.ndarray,
    M: np.ndarray,
    kappa_di: np.ndarray,
    source: str = "solved",
    method: str = "taylor",
) -> CorrectionTerms:
    """Order-1 and order-2 correction terms at ``zeta``.

    Order 1 always uses the closed forms.  With ``source="closed"`` the
    order-2 terms are the closed forms above; with the default
    ``source="solved"`` they come from the numeric per-order solves
    (``matching.solve_order_i`` seeded with the closed-form ``J2``, and
    ``matching.damping_order_terms``), which satisfy the matching and damping
    equations at second order where the closed forms do not.  At the
    equilibrium every term is zero.
    """
    zeta = np.asarray(zeta, dtype=float)
    wd, wdd = omega_derivatives(zeta, M)
    ue1 = u_es1_term(zeta, M)
    ud1 = u_di1_term(zeta, M, kappa_di)
    J1 = J1_term(zeta, M)
    J2 = J2_closed(zeta, M)
    if source == "closed":
        ue2 = u_es2_closed(zeta, M)
        ud2 = u_di2_closed(zeta, M, kappa_di)
    elif source == "solved":
        if np.linalg.norm(zeta - ZETA_STAR) < matching.RANK_TOL:
            z3, z7 = np.zeros(3), np.zeros((7, 7))
            return CorrectionTerms(z3, z3, z3, z3, z3, z3, z7, z7)
        u0 = u_es(zeta, M)
        lower = [(u0, Jd_matrix(zeta[4:], M)), (ue1, J1)]
        sol = matching.solve_order_i(zeta, M, lower, 2, J_seed=J2, method=method)
        ue2, J2 = sol.u_i, sol.J_i
        ud2 = matching.damping_order_terms(zeta, M, kappa_di, [u0, ue1], order=2, method=method)[2]
    else:
        raise ValueError(f"unknown correction source {source!r}")
    return CorrectionTerms(ue1, ue2, ud1, ud2, wd, wdd, J1, J2)


def series_weights(delta: float, p: int) -> np.ndarray:
    """``delta^l / (l+1)!`` for ``l = 0..p``."""
    return np.array([delta**l / math.factorial(l + 1) for l in range(p + 1)])


def u_es_series(zeta, M, delta, p, terms: CorrectionTerms | None = None) -> np.ndarray:
    """Order-``p`` truncation of the sampled energy-shaping feedback."""
    u = u_es(zeta, M)
    if p == 0:
        return u
    terms = correction_terms(zeta, M, np.eye(3)) if terms is None else terms
    w = series_weights(delta, p)
    u = u + w[1] * terms.u_es1
    if p >= 2:
        u = u + w[2] * terms.u_es2
    return u


def Jd_series(zeta, M, delta, p, terms: CorrectionTerms | None = None) -> np.ndarray:
    """Order-``p`` truncation of the sampled interconnection matrix."""
    J = Jd_matrix(np.asarray(zeta, dtype=float)[4:], M)
    if p == 0:
        return J
    terms = correction_terms(zeta, M, np.eye(3)) if terms is None else terms
    w = series_weights(delta, p)
    J = J + w[1] * terms.J1
    if p >= 2:
        J = J + w[2] * terms.J2
    return J


def u_di_series(zeta, M, kappa_di, delta, p, terms: CorrectionTerms | None = None) -> np.ndarray:
    """Order-``p`` truncation of the sampled damping feedback."""
    v = u_di(zeta, kappa_di)
    if p == 0:
        return v
    terms = correction_terms(zeta, M, kappa_di) if terms is None else terms
    w = series_weights(delta, p)
    v = v + w[1] * terms.u_di1
    if p >= 2:
        v = v + w[2] * terms.u_di2
    return v


def u_sd_ida(zeta, M, kappa_di, delta, p, terms: CorrectionTerms | None = None, source: str = "solved"):
    """Approximate sampled-data IDA-PBC of order ``p``.

    ``sum_{l<=p} delta^l/(l+1)! (u_es^l + u_di^l)``.  ``p = 0`` is the
    emulation of the continuous law and returns ``u_ct_ida`` unchanged.
    """
    if p not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {p}")
    if p == 0:
        return u_ct_ida(zeta, M, kappa_di)
    if terms is None:
        terms = correction_terms(zeta, M, kappa_di, source=source)
    w = series_weights(delta, p)
    u = u_ct_ida(zeta, M, kappa_di) + w[1] * (terms.u_es1 + terms.u_di1)
    if p >= 2:
        u = u + w[2] * (terms.u_es2 + terms.u_di2)
    return u


# --- discrete LQR baseline -------------------------------------------------


def reduced_linearization(M: np.ndarray, h: float = 1e-6):
    """Jacobians of ``(eps0_dot, omega_dot)`` in ``(eps0, omega, u)`` at the equilibrium.

    ``epsr`` is eliminated through the unit constraint.
    """

    def reduced(s, u):
        e0, w = s[:3], s[3:]
        er = math.sqrt(max(0.0, 1.0 - float(e0 @ e0)))
        d = rhs(np.concatenate([e0, [er], w]), u, M)
        return np.concatenate([d[:3], d[4:]])

    s0, u0 = np.zeros(6), np.zeros(3)
    A = np.column_stack([(reduced(s0 + h * ei, u0) - reduced(s0 - h * ei, u0)) / (2 * h) for ei in np.eye(6)])
    B = np.column_stack([(reduced(s0, u0 + h * ei) - reduced(s0, u0 - h * ei)) / (2 * h) for ei in np.eye(3)])
    return A, B


def zoh_discretize(A: np.ndarray, B: np.ndarray, delta: float):
    n, m = B.shape
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = A
    aug[:n, n:] = B
    E = expm(aug * delta)
    return E[:n, :n], E[:n, n:]


def dare_fixed_point(A, B, Q, R, tol: float = 1e-10, max_iter: int = 100000):
    """Solve the discrete algebraic Riccati equation by value iteration.

    Returns ``(X, K)`` with ``K = (R + B^T X B)^-1 B^T X A``.  Raises
    ``RuntimeError`` when the iteration diverges or stalls.
    """
    A, B, Q, R = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (A, B, Q, R))
    X = Q.copy()
    for _ in range(max_iter):
        with np.errstate(over="ignore", invalid="ignore"):
            G = np.linalg.solve(R + B.T @ X @ B, B.T @ X @ A)
            X_new = Q + A.T @ X @ A - A.T @ X @ B @ G
        X_new = 0.5 * (X_new + X_new.T)
        if not np.all(np.isfinite(X_new)):
            raise RuntimeError("Riccati iteration diverged")
        step = np.max(np.abs(X_new - X))
        X = X_new
        if step < tol:
            break
    else:
        raise RuntimeError(f"Riccati iteration did not converge in {max_iter} iterations")
    K = np.linalg.solve(R + B.T @ X @ B, B.T @ X @ A)
    return X, K


def dare_residual(A, B, Q, R, X) -> float:
    A, B, Q, R, X = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (A, B, Q, R, X))
    G = np.linalg.solve(R + B.T @ X @ B, B.T @ X @ A)
    return float(np.max(np.abs(Q + A.T @ X @ A - A.T @ X @ B @ G - X)))


def lqr_baseline_gain(M, delta, Q=None, R=None) -> np.ndarray:
    """3x7 state-feedback gain for the ZOH-discretized linearization.

    Designed on the reduced state ``(eps0, omega)`` with defaults ``Q = I6``,
    ``R = I3``; the ``epsr`` column is zero.  Raises if the Riccati residual
    exceeds 1e-10 or the closed loop is not Schur stable.
    """
    Q = np.eye(6) if Q is None else np.asarray(Q, dtype=float)
    R = np.eye(3) if R is None else np.asarray(R, dtype=float)
    A, B = reduced_linearization(M)
    Ad, Bd = zoh_discretize(A, B, delta)
    X, K = dare_fixed_point(Ad, Bd, Q, R)
    res = dare_residual(Ad, Bd, Q, R, X)
    if res > 1e-10:
        raise RuntimeError(f"Riccati solution residual too large ({res:.3g})")
    rho = max(abs(np.linalg.eigvals(Ad - Bd @ K)))
    if rho >= 1.0:
        raise RuntimeError(f"LQR closed loop not Schur stable (spectral radius {rho:.4f})")
    return np.insert(K, 3, 0.0, axis=1)


def u_lqr(zeta: np.ndarray, K: np.ndarray) -> np.ndarray:
    zeta = np.asarray(zeta, dtype=float)
    return -np.asarray(K, dtype=float) @ zeta


# --- controller specification ----------------------------------------------


DEFAULT_KAPPA_DI = np.diag([1.1, 0.7, 0.9])


@dataclass(frozen=True)
class ControllerSpec:
    """Which feedback law to run and with which parameters.

    ``order`` and ``delta`` matter for the sampled kinds only; ``lqr_Q`` and
    ``lqr_R`` default to identities.
    """

    kind: str
    order: int = 0
    kappa_di: np.ndarray = field(default_factory=lambda: DEFAULT_KAPPA_DI.copy())
    delta: float = 1.0
    lqr_Q: np.ndarray | None = None
    lqr_R: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown controller kind {self.kind!r}; expected one of {KINDS}")
        if self.order not in (0, 1, 2):
            raise ValueError(f"order must be 0, 1 or 2, got {self.order}")
        if not self.delta > 0:
            raise ValueError("sampling period must be positive")
        K = np.asarray(self.kappa_di, dtype=float)
        if K.shape != (3, 3) or np.max(np.abs(K - K.T)) > 1e-12 or np.linalg.eigvalsh(K)[0] <= 0:
            raise ValueError("kappa_di must be a symmetric positive definite 3x3 matrix")

    @property
    def sampled(self) -> bool:
        return self.kind in ("sd-ida", "lqr")

    @property
    def label(self) -> str:
        return f"{self.kind}-p{self.order}" if self.kind == "sd-ida" else self.kind


def make_controller(spec: ControllerSpec, M_model: np.ndarray):
    """Return ``zeta -> u`` for ``spec`` using the controller's inertia model."""
    K = np.asarray(spec.kappa_di, dtype=float)
    if spec.kind in ("ct-ida", "ct-ida-unwind"):
        # evaluated at every integrator stage, so the inverse is formed once
        half_Minv = 0.5 * np.linalg.inv(M_model)
        if spec.kind == "ct-ida":
            return lambda z: -half_Minv @ z[:3] - K @ z[4:]
        return lambda z: -2.0 * z[3] * (half_Minv @ z[:3]) - K @ z[4:]
    if spec.kind == "sd-ida":
        return lambda z: u_sd_ida(z, M_model, K, spec.delta, spec.order)
    gain = lqr_baseline_gain(M_model, spec.delta, spec.lqr_Q, spec.lqr_R)
    return lambda z: u_lqr(z, gain)

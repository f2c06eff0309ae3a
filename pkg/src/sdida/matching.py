"""Discrete matching equation, conjugate output and damping equality.

All residuals are formed in the momentum coordinates ``x = P zeta`` in which
the closed-loop structure is written: the sampled model reads
``x+ = x + delta P F^delta`` and the matching equation is

    J (x - x* + delta/2 P F) = P F.

The per-order solver builds the right-hand side of
``B u_i - J_i (x - x*) = l_i`` from numerical Lie-series coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import flow
from .attitude_math import skew, skew_part
from .dynamics import B_INPUT, ZETA_STAR, discrete_gradient_Hd, hamiltonian_Hd_momentum, to_momentum, weight_matrix

RANK_TOL = 1e-6
GL_NODES = 4
PROBE_STEP = 1e-5


@dataclass(frozen=True)
class DMEResidual:
    residual: np.ndarray
    delta: float
    order_estimate: float = float("nan")


@dataclass(frozen=True)
class OrderSolveResult:
    u_i: np.ndarray
    J_i: np.ndarray
    ell_i: np.ndarray
    equation_residual: float


def dme_residual(zeta: np.ndarray, u: np.ndarray, J: np.ndarray, delta: float, M: np.ndarray) -> np.ndarray:
    """``J P (zeta - zeta* + delta/2 F) - P F`` with ``F`` from the reference flow."""
    zeta = np.asarray(zeta, dtype=float)
    F = flow.sampled_increment(zeta, u, delta, M)
    P = weight_matrix(M)
    return J @ (P @ (zeta - ZETA_STAR + 0.5 * delta * F)) - P @ F


def loglog_slope(deltas, values) -> float:
    """Least-squares slope of ``log(values)`` against ``log(deltas)``."""
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        return float("nan")
    return float(np.polyfit(np.log(np.asarray(deltas, dtype=float)), np.log(values), 1)[0])


def dme_order_study(zeta, u_of_delta, J_of_delta, deltas, M) -> list[DMEResidual]:
    """Residual norms over a grid of sampling periods plus the fitted order."""
    out = [dme_residual(zeta, u_of_delta(dl), J_of_delta(dl), dl, M) for dl in deltas]
    slope = loglog_slope(deltas, [np.linalg.norm(r) for r in out])
    return [DMEResidual(r, dl, slope) for r, dl in zip(out, deltas)]


# --- conjugate output and damping equality ---------------------------------


def _flows(zeta, torques, delta, M):
    zeta = np.asarray(zeta, dtype=float)
    batch = np.broadcast_to(zeta, (len(torques), 7))
    return flow.zoh_flow(batch, np.asarray(torques), delta, M).zeta_plus


def conjugate_output(zeta, v, delta, M, u_es_fn) -> np.ndarray:
    """Passive output paired with ``v`` on the sampled closed loop.

    ``Y = g_d(zeta, v)^T dgrad``, where ``dgrad`` is the midpoint discrete
    gradient between ``x+(u_es)`` and ``x+(u_es + v)`` and
    ``g_d(zeta, v) = 1/delta int_0^1 d x+(u_es + w)/dw |_{w = s v} ds``.
    That mean-Jacobian factorization makes ``g_d(zeta, v) v`` the exact flow
    difference, so ``v . Y = (Hd(x+(u_es + v)) - Hd(x+(u_es))) / delta`` with
    ``Hd = hamiltonian_Hd_momentum``.  The integral is 4-point Gauss-Legendre,
    the Jacobian-transpose products central differences.  Tends to ``M omega``
    as ``delta -> 0``.
    """
    zeta = np.asarray(zeta, dtype=float)
    v = np.asarray(v, dtype=float)
    ue = np.asarray(u_es_fn(zeta), dtype=float)
    nodes, weights = np.polynomial.legendre.leggauss(GL_NODES)
    s = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights
    h = PROBE_STEP * max(1.0, float(np.linalg.norm(ue)), float(np.linalg.norm(v)))
    torques = [ue, ue + v]
    for sk in s:
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            torques.append(ue + sk * v + e)
            torques.append(ue + sk * v - e)
    plus = _flows(zeta, torques, delta, M)
    x_plus = to_momentum(plus, M)
    dgrad = discrete_gradient_Hd(plus[0], plus[1], M)
    probes = (x_plus[2::2] - x_plus[3::2]) @ dgrad / (2 * h * delta)
    return weights @ probes.reshape(GL_NODES, 3)


def energy_balance_defect(zeta, v, delta, M, u_es_fn) -> float:
    """``Hd(x+(u_es + v)) - Hd(x) - delta v . Y`` for the momentum storage function."""
    zeta = np.asarray(zeta, dtype=float)
    ue = np.asarray(u_es_fn(zeta), dtype=float)
    zp = flow.zoh_flow(zeta, ue + v, delta, M).zeta_plus
    Y = conjugate_output(zeta, v, delta, M, u_es_fn)
    return float(hamiltonian_Hd_momentum(zp, M) - hamiltonian_Hd_momentum(zeta, M) - delta * np.dot(v, Y))


def damping_residual(zeta, v, delta, M, kappa_di, u_es_fn) -> np.ndarray:
    """``v + kappa_di M^-1 Y(zeta, v)``.

    The output ``Y`` is the momentum-coordinate conjugate output, so the
    damping gain acting on it is ``kappa_di M^-1``, the same block that
    appears in ``Rd_matrix``.  At ``delta -> 0`` this vanishes for
    ``v = -kappa_di omega``.
    """
    K = np.asarray(kappa_di, dtype=float)
    Y = conjugate_output(zeta, v, delta, M, u_es_fn)
    return np.asarray(v, dtype=float) + K @ np.linalg.solve(M, Y)


def solve_damping_fixed_point(zeta, delta, M, kappa_di, u_es_fn, v0=None, max_iter=50, tol=1e-10):
    """Reference solution of the damping equality by ``v <- -kappa_di M^-1 Y(v)``.

    Returns ``(v, iterations)``; raises if the iteration does not settle.
    """
    K = np.asarray(kappa_di, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    v = -K @ zeta[4:] if v0 is None else np.asarray(v0, dtype=float)
    for it in range(1, max_iter + 1):
        v_new = -K @ np.linalg.solve(M, conjugate_output(zeta, v, delta, M, u_es_fn))
        if np.max(np.abs(v_new - v)) < tol:
            return v_new, it
        v = v_new
    raise RuntimeError(f"damping fixed point did not converge in {max_iter} iterations")


# --- per-order solve of the matching equation ------------------------------


def _top_rows_operator(e: np.ndarray) -> np.ndarray:
    """Linear map from the free top-block parameters of a skew ``J`` to ``(J e)[:4]``.

    Parameters: ``J11 = S(a)`` (3), ``J12`` (3), ``J13`` (9, row-major), ``J23`` (3).
    """
    e0, er1, p = e[:3], e[3], e[4:]
    A = np.zeros((4, 18))
    A[:3, 0:3] = -skew(e0)
    A[:3, 3:6] = er1 * np.eye(3)
    A[:3, 6:15] = np.kron(np.eye(3), p.reshape(1, 3))
    A[3, 3:6] = -e0
    A[3, 15:18] = p
    return A


def _assemble(theta: np.ndarray) -> np.ndarray:
    J = np.zeros((7, 7))
    J[:3, :3] = skew(theta[0:3])
    J[:3, 3] = theta[3:6]
    J[3, :3] = -theta[3:6]
    J13 = theta[6:15].reshape(3, 3)
    J[:3, 4:] = J13
    J[4:, :3] = -J13.T
    J[3, 4:] = theta[15:18]
    J[4:, 3] = -theta[15:18]
    return J


def _increment_coeffs(zeta, M, lower_u, order, method="fd"):
    """Momentum-coordinate Taylor coefficients ``phi_0..phi_order`` of ``P F^delta(zeta, u(delta))``.

    ``u(delta) = sum_l delta^l/(l+1)! lower_u[l]``.  Uses that ``c_0`` and
    ``c_1`` are affine in the held torque.
    """
    if order > 2:
        raise ValueError("increment coefficients implemented up to order 2")
    P = weight_matrix(M)
    b = flow.input_matrix_zeta(M)
    u0 = lower_u[0] if lower_u else np.zeros(3)
    K = order
    base = flow.lie_series_coeffs(zeta, u0, M, K, method=method).coeffs
    phi = [base[k].copy() for k in range(K + 1)]
    for l in range(1, len(lower_u)):
        scale = 1.0 / math.factorial(l + 1)
        if l <= K:
            phi[l] += scale * (b @ lower_u[l])
        if l + 1 <= K:
            shifted = flow.lie_series_coeffs(zeta, u0 + lower_u[l], M, 1, method=method).coeffs[1]
            phi[l + 1] += scale * (shifted - base[1])
    return [P @ ph for ph in phi]


def ell_rhs(zeta, M, lower_terms, i, method="fd") -> np.ndarray:
    """Right-hand side ``l_i`` of ``B u_i - J_i (x - x*) = l_i``.

    ``lower_terms`` lists ``(u_l, J_l)`` for ``l < i``.  ``l_i`` is
    ``(i+1)!`` times the ``delta^i`` coefficient of the matching residual
    evaluated with the lower-order truncations only.
    """
    lower_terms = list(lower_terms)
    if len(lower_terms) != i:
        raise ValueError(f"order {i} needs {i} lower-order terms, got {len(lower_terms)}")
    zeta = np.asarray(zeta, dtype=float)
    e = to_momentum(zeta - ZETA_STAR, M)
    phi = _increment_coeffs(zeta, M, [t[0] for t in lower_terms], i, method=method)
    r = -phi[i]
    for a, (_, Ja) in enumerate(lower_terms):
        coef = Ja / math.factorial(a + 1)
        r = r + coef @ (e if i - a == 0 else 0.5 * phi[i - a - 1])
    return math.factorial(i + 1) * r


def solve_order_i(zeta, M, lower_terms, i, J_seed=None, method="fd") -> OrderSolveResult:
    """Solve the order-``i`` matching equation for ``(u_i, J_i)``.

    The top four rows constrain the blocks ``J11, J12, J13, J23``; the
    minimum-norm correction to ``J_seed`` (zero by default) is taken there,
    ``J33`` keeps its seed value, and ``u_i = B^T (l_i + J_i (x - x*))``.
    """
    if i > 2:
        raise ValueError("per-order solve supports i <= 2")
    zeta = np.asarray(zeta, dtype=float)
    if np.linalg.norm(zeta - ZETA_STAR) < RANK_TOL:
        raise np.linalg.LinAlgError("matching equation is rank deficient at the equilibrium")
    e = to_momentum(zeta - ZETA_STAR, M)
    ell = ell_rhs(zeta, M, lower_terms, i, method=method)
    J0 = np.zeros((7, 7)) if J_seed is None else skew_part(np.asarray(J_seed, dtype=float))
    A = _top_rows_operator(e)
    target = -ell[:4] - (J0 @ e)[:4]
    theta, *_ = np.linalg.lstsq(A, target, rcond=None)
    J = J0 + _assemble(theta)
    u = B_INPUT.T @ (ell + J @ e)
    resid = float(np.max(np.abs(B_INPUT @ u - J @ e - ell)))
    return OrderSolveResult(u, J, ell, resid)


def damping_order_terms(zeta, M, kappa_di, u_es_terms, order=2, method="fd"):
    """Series terms ``v_0 .. v_order`` solving the damping equality order by order.

    ``u_es_terms`` holds the energy-shaping terms ``(u_0, u_1, ...)``; only
    ``u_0`` and ``u_1`` enter up to order 2.  Expanding the conjugate output
    as ``Y = Y_0 + delta Y_1(v) + delta^2 Y_2(v) + O(delta^3)`` from the
    momentum-coordinate Lie coefficients ``phi_k`` (``phi_1`` affine and
    ``phi_2`` quadratic in the torque) gives

        v_0 = -K M w,  v_1 = -2 K Y_1(v_0),  v_2 = -6 K (Y_2(v_0) + v_1 / 4)

    with ``K = kappa_di M^-1``.
    """
    if order > 2:
        raise ValueError("damping series implemented up to order 2")
    zeta = np.asarray(zeta, dtype=float)
    Kt = np.asarray(kappa_di, dtype=float) @ np.linalg.inv(M)
    P = weight_matrix(M)
    e = to_momentum(zeta - ZETA_STAR, M)
    u0 = np.asarray(u_es_terms[0], dtype=float)

    def phi(u, k):
        return P @ flow.lie_series_coeffs(zeta, u, M, k, method=method).coeffs[k]

    v0 = -Kt @ e[4:]
    terms = [v0]
    if order == 0:
        return terms
    phi0 = P @ flow.rhs(zeta, u0, M)
    phi1_u0 = phi(u0, 1)
    G1 = np.stack([phi(u0 + np.eye(3)[j], 1) - phi1_u0 for j in range(3)], axis=1)
    Y1 = B_INPUT.T @ phi0 + 0.5 * v0 + G1.T @ e
    v1 = -2.0 * Kt @ Y1
    terms.append(v1)
    if order == 1:
        return terms
    u1 = np.asarray(u_es_terms[1], dtype=float)
    mid = u0 + 0.5 * v0
    grad_q = np.array([e @ (phi(mid + np.eye(3)[j], 2) - phi(mid - np.eye(3)[j], 2)) / 2.0 for j in range(3)])
    Y2 = (
        0.5 * u1
        + 0.5 * B_INPUT.T @ (phi1_u0 + phi(u0 + v0, 1))
        + G1.T @ phi0
        + 0.5 * G1.T @ (B_INPUT @ v0)
        + grad_q
    )
    terms.append(-6.0 * Kt @ (Y2 + 0.25 * v1))
    return terms

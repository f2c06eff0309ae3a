"""Sampled-data equivalent model of the error dynamics.

``zoh_flow`` integrates the vector field with the torque held constant over
one sampling period and is the numerical stand-in for the exact one-step map.
``lie_series_coeffs`` returns the Taylor coefficients of the same map in
powers of the sampling period, computed either by nested central differences
of the vector field along itself or by an exact Taylor recursion (the vector
field is quadratic).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .attitude_math import normalize
from .dynamics import B_INPUT, rhs

MIN_SUBSTEPS = 32
MAX_SUBSTEP = 0.005

# Central-difference step for the Lie coefficient of order i (time units,
# scaled by max(1, |zeta|)).  With one Richardson level the nested scheme is
# exact for polynomials of degree <= 4 along each direction, so only
# round-off limits the larger steps used at depth.
FD_STEPS = {1: 1e-4, 2: 2e-3, 3: 1e-2, 4: 3e-2}


@dataclass(frozen=True)
class FlowResult:
    zeta_plus: np.ndarray
    integrator_error_estimate: float


@dataclass(frozen=True)
class LieSeriesCoeffs:
    """``coeffs[i]`` multiplies ``delta**i`` in ``F^delta = (zeta+ - zeta) / delta``."""

    coeffs: np.ndarray

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    def increment(self, delta: float, K: int | None = None) -> np.ndarray:
        K = self.order if K is None else K
        powers = delta ** np.arange(K + 1)
        return np.tensordot(powers, self.coeffs[: K + 1], axes=1)


def substeps(delta: float) -> int:
    return max(MIN_SUBSTEPS, math.ceil(delta / MAX_SUBSTEP))


def _rk4(fun, z, h, n, record=False):
    path = [z] if record else None
    for _ in range(n):
        k1 = fun(z)
        k2 = fun(z + 0.5 * h * k1)
        k3 = fun(z + 0.5 * h * k2)
        k4 = fun(z + h * k3)
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if record:
            path.append(z)
    return (z, np.stack(path)) if record else z


def _renormalize(z: np.ndarray) -> np.ndarray:
    out = np.array(z, dtype=float)
    out[..., :4] = normalize(out[..., :4])
    return out


def zoh_flow(
    zeta: np.ndarray,
    u: np.ndarray,
    delta: float,
    M: np.ndarray,
    n_sub: int | None = None,
    estimate_error: bool = False,
) -> FlowResult:
    """Propagate ``zeta`` over ``[0, delta]`` with ``u`` held constant.

    Fixed-step classical RK4 with ``substeps(delta)`` steps, quaternion
    renormalized at the end.  Batched over leading axes of ``zeta`` / ``u``.
    ``integrator_error_estimate`` is the unit-norm drift before
    renormalization, or, with ``estimate_error=True``, the max-norm change
    when the step count is doubled.
    """
    if not delta > 0:
        raise ValueError(f"sampling period must be positive, got {delta}")
    zeta = np.asarray(zeta, dtype=float)
    u = np.broadcast_to(np.asarray(u, dtype=float), zeta.shape[:-1] + (3,))
    n = substeps(delta) if n_sub is None else int(n_sub)
    Minv = np.linalg.inv(M)

    if zeta.shape == (7,):
        f = _single_state_rhs(np.asarray(M, dtype=float), Minv)
        ut = tuple(u.tolist())

        def integrate(steps):
            return np.array(_rk4_single(f, tuple(zeta.tolist()), ut, delta / steps, steps))
    else:

        def integrate(steps):
            return _rk4(lambda y: rhs(y, u, M, Minv), zeta, delta / steps, steps)

    z = integrate(n)
    if not np.all(np.isfinite(z)):
        raise FloatingPointError("non-finite state during zoh_flow integration")
    if estimate_error:
        z2 = integrate(2 * n)
        err = float(np.max(np.abs(z2 - z)))
    else:
        err = float(np.max(np.abs(np.linalg.norm(z[..., :4], axis=-1) - 1.0)))
    return FlowResult(_renormalize(z), err)


def _single_state_rhs(M: np.ndarray, Minv: np.ndarray):
    """Scalar-arithmetic ``rhs`` for one state; avoids numpy call overhead in long simulations."""
    (m00, m01, m02), (m10, m11, m12), (m20, m21, m22) = M.tolist()
    (n00, n01, n02), (n10, n11, n12), (n20, n21, n22) = Minv.tolist()

    def f(z, u):
        ex, ey, ez, er, wx, wy, wz = z
        hx = m00 * wx + m01 * wy + m02 * wz
        hy = m10 * wx + m11 * wy + m12 * wz
        hz = m20 * wx + m21 * wy + m22 * wz
        tx = wy * hz - wz * hy + u[0]
        ty = wz * hx - wx * hz + u[1]
        tz = wx * hy - wy * hx + u[2]
        return (
            0.5 * (wy * ez - wz * ey + wx * er),
            0.5 * (wz * ex - wx * ez + wy * er),
            0.5 * (wx * ey - wy * ex + wz * er),
            -0.5 * (wx * ex + wy * ey + wz * ez),
            n00 * tx + n01 * ty + n02 * tz,
            n10 * tx + n11 * ty + n12 * tz,
            n20 * tx + n21 * ty + n22 * tz,
        )

    return f


def _rk4_single(f, z, u, h, n):
    for _ in range(n):
        k1 = f(z, u)
        k2 = f(tuple(a + 0.5 * h * b for a, b in zip(z, k1)), u)
        k3 = f(tuple(a + 0.5 * h * b for a, b in zip(z, k2)), u)
        k4 = f(tuple(a + h * b for a, b in zip(z, k3)), u)
        z = tuple(a + (h / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4) for a, b1, b2, b3, b4 in zip(z, k1, k2, k3, k4))
    return z


def zoh_path(zeta: np.ndarray, torque, delta: float, M: np.ndarray, n_sub: int | None = None):
    """Substep-resolved trajectory of a single state over one period.

    ``torque`` is either a constant 3-vector or a callable ``zeta -> u``
    (continuous feedback, evaluated at every RK4 stage).  Same integrator
    and step rule as ``zoh_flow``.  Returns ``(times, states, torques)``
    with ``n_sub + 1`` rows; the final state is renormalized.
    """
    zeta = np.asarray(zeta, dtype=float)
    if zeta.shape != (7,):
        raise ValueError(f"zoh_path integrates a single 7-state, got shape {zeta.shape}")
    n = substeps(delta) if n_sub is None else int(n_sub)
    M = np.asarray(M, dtype=float)
    f = _single_state_rhs(M, np.linalg.inv(M))
    h = delta / n
    if callable(torque):
        def u_of(z):
            return tuple(np.asarray(torque(np.array(z)), dtype=float).tolist())
    else:
        u_const = tuple(np.asarray(torque, dtype=float).tolist())

        def u_of(z):
            return u_const

    z = tuple(zeta.tolist())
    path = [z]
    torques = []
    for _ in range(n):
        u1 = u_of(z)
        k1 = f(z, u1)
        z2 = tuple(a + 0.5 * h * b for a, b in zip(z, k1))
        k2 = f(z2, u_of(z2))
        z3 = tuple(a + 0.5 * h * b for a, b in zip(z, k2))
        k3 = f(z3, u_of(z3))
        z4 = tuple(a + h * b for a, b in zip(z, k3))
        k4 = f(z4, u_of(z4))
        z = tuple(a + (h / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4) for a, b1, b2, b3, b4 in zip(z, k1, k2, k3, k4))
        path.append(z)
        torques.append(u1)
    path = _renormalize(np.array(path))
    torques.append(u_of(tuple(path[-1].tolist())))
    return np.linspace(0.0, delta, n + 1), path, np.array(torques)


def sampled_increment(zeta: np.ndarray, u: np.ndarray, delta: float, M: np.ndarray) -> np.ndarray:
    """``F^delta(zeta, u) = (zeta+(u) - zeta) / delta``."""
    zeta = np.asarray(zeta, dtype=float)
    return (zoh_flow(zeta, u, delta, M).zeta_plus - zeta) / delta


def gdelta_times_u(zeta: np.ndarray, u: np.ndarray, delta: float, M: np.ndarray) -> np.ndarray:
    """Controlled part ``F^delta(zeta, u) - F^delta(zeta, 0)`` of the sampled model."""
    zeta = np.asarray(zeta, dtype=float)
    u = np.asarray(u, dtype=float)
    both = np.stack([zeta, zeta])
    torques = np.stack([u, np.zeros(3)])
    plus = zoh_flow(both, torques, delta, M).zeta_plus
    return (plus[0] - plus[1]) / delta


def _lie_fd(zeta, u, M, Minv, depth, h):
    """``L^depth_{f+Bu}(f + Bu)`` at a batch of points by nested central differences."""
    F = rhs(zeta, u, M, Minv)
    if depth == 0:
        return F
    pts = np.stack([zeta + h * F, zeta - h * F, zeta + 0.5 * h * F, zeta - 0.5 * h * F])
    g = _lie_fd(pts, u, M, Minv, depth - 1, h)
    d_h = (g[0] - g[1]) / (2 * h)
    d_h2 = (g[2] - g[3]) / h
    return (4.0 * d_h2 - d_h) / 3.0


def taylor_coeffs(zeta: np.ndarray, u: np.ndarray, M: np.ndarray, K: int) -> np.ndarray:
    """Exact Taylor coefficients ``a_1 .. a_{K+1}`` of the constant-input flow.

    Cauchy-product recursion on the quadratic vector field; ``a_{i+1}`` is the
    Lie-series coefficient of ``delta**i`` in ``F^delta``.
    """
    zeta = np.asarray(zeta, dtype=float)
    u = np.asarray(u, dtype=float)
    Minv = np.linalg.inv(M)
    e0 = [zeta[:3]]
    er = [zeta[3]]
    w = [zeta[4:]]
    Mw = [M @ zeta[4:]]
    out = []
    for k in range(K + 1):
        s_e0 = np.zeros(3)
        s_er = 0.0
        s_w = np.zeros(3)
        for j in range(k + 1):
            s_e0 += np.cross(w[j], e0[k - j]) + w[j] * er[k - j]
            s_er += float(np.dot(w[j], e0[k - j]))
            s_w += np.cross(w[j], Mw[k - j])
        if k == 0:
            s_w = s_w + u
        a_e0 = 0.5 * s_e0 / (k + 1)
        a_er = -0.5 * s_er / (k + 1)
        a_w = Minv @ s_w / (k + 1)
        e0.append(a_e0)
        er.append(a_er)
        w.append(a_w)
        Mw.append(M @ a_w)
        out.append(np.concatenate([a_e0, [a_er], a_w]))
    # the leading coefficient is the vector field itself, bit for bit
    out[0] = rhs(zeta, u, M, Minv)
    return np.stack(out)


def lie_series_coeffs(
    zeta: np.ndarray,
    u: np.ndarray,
    M: np.ndarray,
    K: int,
    method: str = "fd",
    steps: dict | None = None,
) -> LieSeriesCoeffs:
    """Coefficients ``c_i = L^i_{f+Bu}(f + Bu) / (i+1)!`` for ``i = 0..K``.

    ``method="fd"`` differentiates the vector field numerically (one
    Richardson level per nesting); ``method="taylor"`` uses the exact
    recursion and serves as the cross-check.
    """
    if K > 4 or K < 0:
        raise ValueError(f"Lie series order must be in 0..4, got {K}")
    zeta = np.asarray(zeta, dtype=float)
    u = np.asarray(u, dtype=float)
    if method == "taylor":
        return LieSeriesCoeffs(taylor_coeffs(zeta, u, M, K))
    if method != "fd":
        raise ValueError(f"unknown method {method!r}")
    steps = FD_STEPS if steps is None else steps
    Minv = np.linalg.inv(M)
    scale = max(1.0, float(np.linalg.norm(zeta)))
    coeffs = [rhs(zeta, u, M, Minv)]
    for i in range(1, K + 1):
        coeffs.append(_lie_fd(zeta, u, M, Minv, i, steps[i] * scale) / math.factorial(i + 1))
    return LieSeriesCoeffs(np.stack(coeffs))


def input_matrix_zeta(M: np.ndarray) -> np.ndarray:
    """Input matrix in ``zeta`` coordinates, ``blockdiag(0, M^-1) B``."""
    out = B_INPUT.copy()
    out[4:] = np.linalg.inv(M)
    return out

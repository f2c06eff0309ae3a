"""Order-of-accuracy suites for the approximate sampled-data controller.

Each metric is evaluated on a set of states over a grid of sampling
periods; the per-period values are aggregated as the RMS over states and a
log-log slope is fitted.  Expected slopes are ``p + 1`` for the matching and
damping residuals and ``p + 2`` for the energy change under pure shaping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import controllers, matching
from .dynamics import hamiltonian_Hd_momentum
from .flow import zoh_flow

DEFAULT_DELTAS = (0.4, 0.2, 0.1, 0.05)
METRICS = ("dme", "energy", "damping")
EXPECTED_OFFSET = {"dme": 1, "energy": 2, "damping": 1}
SLOPE_TOL = 0.3


@dataclass(frozen=True)
class OrderRow:
    metric: str
    order: int
    expected: int
    slope: float
    rms: tuple[float, ...]

    @property
    def ok(self) -> bool:
        return abs(self.slope - self.expected) <= SLOPE_TOL


def random_states(n: int, seed: int = 0, omega_scale: float = 0.5) -> np.ndarray:
    """Unit error quaternions uniform on the sphere, Gaussian rates."""
    rng = np.random.default_rng(seed)
    eps = rng.normal(size=(n, 4))
    eps /= np.linalg.norm(eps, axis=1, keepdims=True)
    return np.column_stack([eps, omega_scale * rng.normal(size=(n, 3))])


def _state_metrics(zeta, M, kappa_di, deltas, orders):
    terms = controllers.correction_terms(zeta, M, kappa_di)
    out = {}
    for p in orders:
        for dl in deltas:
            ue = controllers.u_es_series(zeta, M, dl, p, terms)
            J = controllers.Jd_series(zeta, M, dl, p, terms)
            v = controllers.u_di_series(zeta, M, kappa_di, dl, p, terms)
            zp = zoh_flow(zeta, ue, dl, M).zeta_plus
            out["dme", p, dl] = np.linalg.norm(matching.dme_residual(zeta, ue, J, dl, M))
            out["energy", p, dl] = abs(float(hamiltonian_Hd_momentum(zp, M) - hamiltonian_Hd_momentum(zeta, M)))
            out["damping", p, dl] = np.linalg.norm(matching.damping_residual(zeta, v, dl, M, kappa_di, lambda _z, u=ue: u))
    return out


def order_suite(M, kappa_di, states, deltas=DEFAULT_DELTAS, orders=(0, 1, 2)) -> list[OrderRow]:
    deltas = tuple(float(d) for d in deltas)
    per_state = [_state_metrics(np.asarray(z, dtype=float), M, kappa_di, deltas, orders) for z in states]
    rows = []
    for metric in METRICS:
        for p in orders:
            rms = tuple(float(np.sqrt(np.mean([m[metric, p, dl] ** 2 for m in per_state]))) for dl in deltas)
            rows.append(OrderRow(metric, p, p + EXPECTED_OFFSET[metric], matching.loglog_slope(deltas, rms), rms))
    return rows


def format_table(rows: list[OrderRow]) -> str:
    lines = [f"{'metric':<8} {'p':>2} {'expected':>8} {'slope':>7}  status"]
    for r in rows:
        lines.append(f"{r.metric:<8} {r.order:>2} {r.expected:>8d} {r.slope:>7.3f}  {'ok' if r.ok else 'FAIL'}")
    return "\n".join(lines)

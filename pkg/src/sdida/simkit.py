"""Closed-loop sampled-data simulation, uncertainty sweeps and CSV output."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import flow
from .attitude_math import (
    IDENTITY_QUATERNION,
    check_unit,
    error_quaternion,
    quat_multiply,
    rpy_to_quaternion,
    select_sign,
)
from .controllers import ControllerSpec, make_controller
from .dynamics import hamiltonian_Hd_momentum, validate_inertia

NOMINAL_INERTIA = np.array(
    [
        [1.42, 0.00867, 0.01357],
        [0.00867, 1.73, 0.06016],
        [0.01357, 0.06016, 2.03],
    ]
)
NOMINAL_RPY = (math.pi / 4, math.pi / 2, math.pi)
DEFAULT_GRID = (0.0, 10.0, 20.0, 30.0, 40.0)
CONVERGENCE_TOL = 0.05
OMEGA_LIMIT = 1e3

TRAJECTORY_COLUMNS = ["t", "q0x", "q0y", "q0z", "qr", "wx", "wy", "wz", "ex", "ey", "ez", "er", "ux", "uy", "uz", "Hd"]
SWEEP_COLUMNS = ["controller", "order", "uncertainty_pct", "converged", "settling_time", "final_error", "max_torque"]


@dataclass(frozen=True)
class Scenario:
    controller: ControllerSpec
    M_true: np.ndarray = field(default_factory=lambda: NOMINAL_INERTIA.copy())
    M_model: np.ndarray = field(default_factory=lambda: NOMINAL_INERTIA.copy())
    delta_true: float = 1.0
    delta_model: float = 1.0
    q_init: np.ndarray = field(default_factory=lambda: rpy_to_quaternion(*NOMINAL_RPY))
    omega_init: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q_star: np.ndarray = field(default_factory=lambda: IDENTITY_QUATERNION.copy())
    t_final: float = 60.0

    def __post_init__(self):
        validate_inertia(self.M_true)
        validate_inertia(self.M_model)
        check_unit(self.q_init, name="q_init")
        check_unit(self.q_star, name="q_star")
        if not (self.delta_true > 0 and self.delta_model > 0):
            raise ValueError("sampling periods must be positive")
        if self.t_final < self.delta_true:
            raise ValueError("t_final must be at least one sampling period")


@dataclass
class Trajectory:
    t: np.ndarray
    q: np.ndarray
    omega: np.ndarray
    eps: np.ndarray
    u: np.ndarray
    Hd: np.ndarray
    sample_rows: np.ndarray
    diverged: bool = False

    @property
    def attitude_error(self) -> np.ndarray:
        return np.linalg.norm(self.eps[:, :3], axis=1)

    @property
    def final_error(self) -> float:
        return math.inf if self.diverged else float(self.attitude_error[-1])

    def converged(self, tol: float = CONVERGENCE_TOL) -> bool:
        return (not self.diverged) and self.final_error < tol

    def settling_time(self, tol: float = CONVERGENCE_TOL) -> float:
        """First time after which the attitude error stays below ``tol``."""
        if not self.converged(tol):
            return math.nan
        above = np.nonzero(self.attitude_error >= tol)[0]
        return float(self.t[0]) if above.size == 0 else float(self.t[min(above[-1] + 1, len(self.t) - 1)])

    @property
    def max_torque(self) -> float:
        return float(np.max(np.abs(self.u))) if self.u.size else 0.0

    def rows(self) -> np.ndarray:
        return np.column_stack([self.t, self.q, self.omega, self.eps, self.u, self.Hd])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRAJECTORY_COLUMNS)
            for row in self.rows():
                writer.writerow([f"{x:.17g}" for x in row])


def _errors(q_path: np.ndarray, q_star_conj: np.ndarray) -> np.ndarray:
    return quat_multiply(q_path, np.broadcast_to(q_star_conj, q_path.shape))


def _diverging(path: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return ~np.all(np.isfinite(path), axis=1) | ~(np.linalg.norm(path[:, 4:], axis=1) < OMEGA_LIMIT)


def simulate(s: Scenario) -> Trajectory:
    """Run one closed loop.

    Sampled kinds compute ``u_k`` at every sample instant from the measured
    quaternion (sign-continuity rule), using ``M_model`` and ``delta_model``;
    the plant then evolves with ``M_true`` over ``delta_true`` with ``u_k``
    held.  Continuous kinds evaluate the feedback at every integrator stage.

    The plant is propagated in error coordinates ``(eps, w)``: right
    multiplication by the constant ``conj(q_star)`` commutes with the
    kinematics, and ``q = eps (x) q_star`` is recovered for the record.
    """
    spec = replace(s.controller, delta=s.delta_model)
    law = make_controller(spec, s.M_model)
    n_periods = max(1, math.ceil(s.t_final / s.delta_true - 1e-9))
    n_sub = flow.substeps(s.delta_true)

    eps_init = error_quaternion(s.q_init, s.q_star)
    z = np.concatenate([eps_init, np.asarray(s.omega_init, dtype=float)])
    times, states, torques, sample_rows = [], [], [], []
    eps_meas = None
    diverged = False

    for k in range(n_periods):
        # measured error quaternion, sign kept continuous between samples
        eps_meas = select_sign(z[:4], eps_meas)
        sign = 1.0 if float(np.dot(eps_meas, z[:4])) >= 0 else -1.0
        if spec.sampled:
            u = np.asarray(law(np.concatenate([eps_meas, z[4:]])), dtype=float)
            if not np.all(np.isfinite(u)):
                diverged = True
                break
            torque = u
        elif sign > 0:
            torque = law
        else:
            def torque(st):
                return law(np.concatenate([-st[:4], st[4:]]))

        with np.errstate(all="ignore"):
            tt, path, uu = flow.zoh_path(z, torque, s.delta_true, s.M_true, n_sub)
        sample_rows.append(len(times))
        bad = _diverging(path)
        t0 = k * s.delta_true
        if np.any(bad):
            keep = int(np.argmax(bad))
            times.extend(t0 + tt[:keep])
            states.extend(path[:keep])
            torques.extend(uu[:keep])
            diverged = True
            break
        last = k == n_periods - 1
        stop = None if last else -1
        times.extend(t0 + tt[:stop])
        states.extend(path[:stop])
        torques.extend(uu[:stop])
        z = path[-1]

    states = np.array(states, dtype=float).reshape(-1, 7)
    eps = states[:, :4]
    q = quat_multiply(eps, np.broadcast_to(s.q_star, eps.shape))
    return Trajectory(
        t=np.array(times, dtype=float),
        q=q,
        omega=states[:, 4:],
        eps=eps,
        u=np.array(torques, dtype=float).reshape(-1, 3),
        Hd=hamiltonian_Hd_momentum(states, s.M_model),
        sample_rows=np.array(sample_rows, dtype=int),
        diverged=diverged,
    )


def perturb_inertia(M: np.ndarray, pct: float) -> np.ndarray:
    """Scale entries (2,2), (2,3), (3,2) by ``1 + pct/100``, keeping symmetry."""
    out = np.array(M, dtype=float)
    f = 1.0 + pct / 100.0
    out[1, 1] *= f
    out[1, 2] *= f
    out[2, 1] *= f
    return validate_inertia(out)


def uncertain_scenario(base: Scenario, pct: float) -> Scenario:
    """Plant inertia and sampling period perturbed by ``pct`` percent; model untouched."""
    return replace(
        base,
        M_true=perturb_inertia(base.M_model, pct),
        delta_true=(1.0 + pct / 100.0) * base.delta_model,
    )


@dataclass(frozen=True)
class SweepRow:
    controller: str
    order: int
    uncertainty_pct: float
    converged: bool
    settling_time: float
    final_error: float
    max_torque: float


@dataclass
class SweepReport:
    rows: list[SweepRow]

    def converged_cells(self, label: str) -> set[float]:
        return {r.uncertainty_pct for r in self.rows if _label(r) == label and r.converged}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SWEEP_COLUMNS)
            for r in self.rows:
                writer.writerow(
                    [r.controller, r.order, f"{r.uncertainty_pct:g}", int(r.converged),
                     f"{r.settling_time:.17g}", f"{r.final_error:.17g}", f"{r.max_torque:.17g}"]
                )


def _label(row: SweepRow) -> str:
    return f"{row.controller}-p{row.order}" if row.controller == "sd-ida" else row.controller


def nominal_controllers(kappa_di=None) -> list[ControllerSpec]:
    kw = {} if kappa_di is None else {"kappa_di": np.asarray(kappa_di, dtype=float)}
    return [
        ControllerSpec("ct-ida", **kw),
        ControllerSpec("sd-ida", order=0, **kw),
        ControllerSpec("sd-ida", order=2, **kw),
        ControllerSpec("lqr", **kw),
    ]


def _run_cell(args):
    base, spec, pct, tol = args
    traj = simulate(uncertain_scenario(replace(base, controller=spec), pct))
    return SweepRow(
        controller=spec.kind,
        order=spec.order if spec.kind == "sd-ida" else 0,
        uncertainty_pct=float(pct),
        converged=traj.converged(tol),
        settling_time=traj.settling_time(tol),
        final_error=traj.final_error,
        max_torque=traj.max_torque,
    )


def sweep(base: Scenario, uncertainty_grid=DEFAULT_GRID, controllers=None, tol: float = CONVERGENCE_TOL, workers: int = 1) -> SweepReport:
    """Run every (uncertainty level, controller) cell independently.

    Deterministic; with ``workers > 1`` the cells are distributed over a
    process pool and collected in grid order.
    """
    grid = list(uncertainty_grid)
    if not grid:
        raise ValueError("uncertainty grid is empty")
    controllers = nominal_controllers(base.controller.kappa_di) if controllers is None else list(controllers)
    jobs = [(base, spec, pct, tol) for pct in grid for spec in controllers]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell, jobs))
    else:
        rows = [_run_cell(j) for j in jobs]
    return SweepReport(rows)


def largest_stabilizing_delta(base: Scenario, deltas, tol: float = CONVERGENCE_TOL) -> float:
    """Largest sampling period on the tested grid for which ``base`` converges.

    Plant and model share each tested period.  Returns ``nan`` when none of
    them stabilizes; no claim is made about untested periods.
    """
    ok = [float(d) for d in deltas if simulate(replace(base, delta_true=float(d), delta_model=float(d))).converged(tol)]
    return max(ok) if ok else math.nan

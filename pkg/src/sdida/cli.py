"""Command-line interface: ``simulate``, ``sweep`` and ``verify``."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import simkit, verification
from .attitude_math import rpy_to_quaternion
from .controllers import DEFAULT_KAPPA_DI, KINDS, ControllerSpec

DEFAULTS = {
    "controller": "sd-ida",
    "order": 2,
    "dt": 1.0,
    "t_final": 60.0,
    "kdi": None,
    "inertia": None,
    "init_rpy": None,
    "init_omega": None,
    "uncertainty": None,
    "out": None,
    "seed": 0,
    "states": 20,
}


def _floats(text: str, n: int | None = None, what: str = "value") -> list[float]:
    parts = [p for p in text.replace(",", " ").split() if p]
    try:
        vals = [float(p) for p in parts]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad {what} {text!r}") from exc
    if n is not None and len(vals) != n:
        raise argparse.ArgumentTypeError(f"{what} needs {n} numbers, got {len(vals)}")
    return vals


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment; dashes in keys map to underscores."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in DEFAULTS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def parse_inertia(text: str) -> np.ndarray:
    p = Path(text)
    source = p.read_text() if p.is_file() else text
    return np.array(_floats(source, 9, "inertia")).reshape(3, 3)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file; command-line flags override it")
    p.add_argument("--controller", choices=KINDS)
    p.add_argument("--order", type=int, choices=(0, 1, 2))
    p.add_argument("--dt", type=float, help="sampling period of the controller model [s]")
    p.add_argument("--t-final", dest="t_final", type=float)
    p.add_argument("--kdi", help="damping gains d1,d2,d3")
    p.add_argument("--inertia", help="file or 9 inline values (row-major)")
    p.add_argument("--init-rpy", dest="init_rpy", help="roll,pitch,yaw [rad]")
    p.add_argument("--init-omega", dest="init_omega", help="wx,wy,wz [rad/s]")
    p.add_argument("--uncertainty", help="percent (simulate) or comma list of percents (sweep)")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--seed", type=int, help="reserved; core runs are deterministic")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdida", description="Sampled-data IDA-PBC attitude control.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("simulate", "run one closed loop and write the trajectory CSV"),
        ("sweep", "run the uncertainty grid and write the report CSV"),
    ):
        _add_common(sub.add_parser(name, help=text))
    ver = sub.add_parser("verify", help="run the order-of-accuracy suites and print slope tables")
    _add_common(ver)
    ver.add_argument("--states", type=int, help="number of random states (default 20)")
    return parser


def _settings(parser, args) -> dict:
    values = dict(DEFAULTS)
    if args.config:
        try:
            values.update(read_config(args.config))
        except (OSError, ValueError) as exc:
            parser.error(str(exc))
    for key in DEFAULTS:
        given = getattr(args, key, None)
        if given is not None:
            values[key] = given
    if values["controller"] not in KINDS:
        parser.error(f"unknown controller {values['controller']!r}; choose from {', '.join(KINDS)}")
    try:
        values["order"] = int(values["order"])
        for key in ("dt", "t_final"):
            values[key] = float(values[key])
        values["seed"] = int(values["seed"])
        values["states"] = int(values["states"])
        K = DEFAULT_KAPPA_DI if values["kdi"] is None else np.diag(_floats(values["kdi"], 3, "kdi"))
        M = simkit.NOMINAL_INERTIA if values["inertia"] is None else parse_inertia(values["inertia"])
        rpy = simkit.NOMINAL_RPY if values["init_rpy"] is None else _floats(values["init_rpy"], 3, "init-rpy")
        omega = np.zeros(3) if values["init_omega"] is None else np.array(_floats(values["init_omega"], 3, "init-omega"))
        pct = [] if values["uncertainty"] is None else _floats(values["uncertainty"], None, "uncertainty")
        spec = ControllerSpec(values["controller"], order=values["order"], kappa_di=K, delta=values["dt"])
        base = simkit.Scenario(
            controller=spec,
            M_true=M,
            M_model=M,
            delta_true=values["dt"],
            delta_model=values["dt"],
            q_init=rpy_to_quaternion(*rpy),
            omega_init=omega,
            t_final=values["t_final"],
        )
    except (ValueError, argparse.ArgumentTypeError) as exc:
        parser.error(str(exc))
    values.update(kappa=K, inertia_matrix=M, base=base, pct=pct)
    return values


def _cmd_simulate(parser, cfg) -> int:
    if len(cfg["pct"]) > 1:
        parser.error("simulate takes a single --uncertainty value")
    scenario = simkit.uncertain_scenario(cfg["base"], cfg["pct"][0]) if cfg["pct"] else cfg["base"]
    traj = simkit.simulate(scenario)
    if cfg["out"]:
        traj.to_csv(cfg["out"])
    status = "diverged" if traj.diverged else ("converged" if traj.converged() else "not converged")
    print(
        f"{scenario.controller.label}: {status}, final |eps0| = {traj.final_error:.3e}, "
        f"settling time = {traj.settling_time():.3f} s, max |u| = {traj.max_torque:.4f} N m"
    )
    return 0


def _cmd_sweep(parser, cfg, explicit_controller: bool) -> int:
    grid = cfg["pct"] or list(simkit.DEFAULT_GRID)
    controllers = [cfg["base"].controller] if explicit_controller else None
    report = simkit.sweep(cfg["base"], grid, controllers)
    if cfg["out"]:
        report.to_csv(cfg["out"])
    for r in report.rows:
        label = f"{r.controller}-p{r.order}" if r.controller == "sd-ida" else r.controller
        print(f"{label:<12} {r.uncertainty_pct:>5g}%  converged={int(r.converged)}  final={r.final_error:.3e}")
    return 0


def _cmd_verify(parser, cfg) -> int:
    if cfg["states"] < 1:
        parser.error("--states must be positive")
    t0 = time.perf_counter()
    states = verification.random_states(cfg["states"], seed=cfg["seed"])
    rows = verification.order_suite(cfg["inertia_matrix"], cfg["kappa"], states)
    print(verification.format_table(rows))
    print(f"{len(states)} states, deltas {verification.DEFAULT_DELTAS}, {time.perf_counter() - t0:.1f} s")
    return 0 if all(r.ok for r in rows) else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = _settings(parser, args)
    if args.command == "simulate":
        return _cmd_simulate(parser, cfg)
    if args.command == "sweep":
        explicit = args.controller is not None or (args.config is not None and "controller" in read_config(args.config))
        return _cmd_sweep(parser, cfg, explicit)
    return _cmd_verify(parser, cfg)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: configuration, experiment orchestration, emission.

Config files are flat ``key = value`` text with ``#`` comments.  Strategies
are selected as ``none``, ``builtin:<0..15>``, ``world_record``, or
``file:<path>`` (CSV lines ``id,time_min,energy_kJ``).  The output directory
comes from the config / --out flag and can be overridden with the
PACEOPT_OUT_DIR environment variable.  All files are written atomically and
runs are deterministic, so re-running a command reproduces its outputs byte
for byte.

Exit codes: 0 ok, 2 input error, 3 solver hit the iteration cap, 4 problem
infeasible.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .bioenergetics import Mesh, RunnerParams, distance, simulate
from .nutrition import (
    NutritionStrategy,
    builtin_strategy,
    strategy_from_csv,
    world_record_strategy,
)
from .pmp import pmp_csv, verify_instance
from .solver import SolveStatus, SolverConfig, SolverReport, solve
from .transcription import assemble, unpack

__all__ = ["ExperimentConfig", "load_config", "main"]

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_MAX_ITER = 3
EXIT_INFEASIBLE = 4

_STATUS_EXIT = {
    SolveStatus.CONVERGED: EXIT_OK,
    SolveStatus.MAX_ITER: EXIT_MAX_ITER,
    SolveStatus.INFEASIBLE: EXIT_INFEASIBLE,
}

# Ordered worst-case ranking for multi-row commands.
_SEVERITY = {EXIT_OK: 0, EXIT_MAX_ITER: 1, EXIT_INFEASIBLE: 2}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: runner, mesh, objective, strategy, solver, output."""

    params: RunnerParams = RunnerParams()
    t_final: float = 120.0
    n_nodes: int | None = None          # default: one-minute grid
    tv_weight: float = 0.5
    strategy_spec: str = "none"
    f_min: float = 0.0
    solver: SolverConfig = SolverConfig()
    out_dir: Path = Path("paceopt-out")
    run_pmp: bool = True
    explicit: frozenset[str] = frozenset()

    def mesh(self) -> Mesh:
        if self.n_nodes is not None:
            return Mesh(t_final=self.t_final, n_nodes=self.n_nodes)
        return Mesh.minute_grid(self.t_final)

    def strategy(self) -> NutritionStrategy | None:
        return _parse_strategy(self.strategy_spec, self.t_final)


_PARAM_KEYS = {"mass", "tau", "vvo2max", "d", "c4", "a", "sm", "f_max",
               "eg0", "ef0", "vla"}
_SOLVER_KEYS = {"tol_constraint", "tol_optimality", "max_outer", "max_inner",
                "rho_init"}
_OTHER_KEYS = {"t_final", "n_nodes", "tv_weight", "strategy", "f_min",
               "out_dir", "run_pmp"}


def _parse_strategy(spec: str, t_final: float) -> NutritionStrategy | None:
    spec = spec.strip()
    if spec == "none":
        return None
    if spec == "world_record":
        return world_record_strategy()
    if spec.startswith("builtin:"):
        try:
            index = int(spec.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"bad builtin strategy index in {spec!r}") from exc
        try:
            return builtin_strategy(index, t_final)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if spec.startswith("file:"):
        path = Path(spec.split(":", 1)[1])
        if not path.exists():
            raise ConfigError(f"strategy file not found: {path}")
        try:
            return strategy_from_csv(path.read_text())
        except ValueError as exc:
            raise ConfigError(f"bad strategy file {path}: {exc}") from exc
    raise ConfigError(f"unknown strategy spec {spec!r}")


def load_config(path: Path | None, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    """Parse a flat key = value config file; later keys win."""
    values: dict[str, str] = {}
    if path is not None:
        if not Path(path).exists():
            raise ConfigError(f"config file not found: {path}")
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, val = (part.strip() for part in line.split("=", 1))
            values[key] = val
    if overrides:
        values.update(overrides)
    return config_from_values(values)


def config_from_values(values: dict[str, str]) -> ExperimentConfig:
    known = _PARAM_KEYS | _SOLVER_KEYS | _OTHER_KEYS
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

    def num(key, default, kind=float):
        if key not in values:
            return default
        try:
            return kind(values[key])
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {values[key]!r}") from exc

    try:
        params = RunnerParams(
            mass=num("mass", 55.0),
            tau=num("tau", 1.0 / 60.0),
            vvo2max=num("vvo2max", 402.0),
            d=num("d", 0.005),
            c4=num("c4", 1.0 / 6.0),
            a=num("a", 1.0e-3),
            sm=num("sm", 1.0 / 3600.0),
            f_max=num("f_max", 36000.0),
            eg0=num("eg0", 144.0),
            ef0=num("ef0", 3439.0),
            vla=values.get("vla", "good").strip(),
        )
        solver = SolverConfig(
            tol_constraint=num("tol_constraint", 1.0e-6),
            tol_optimality=num("tol_optimality", 1.0e-4),
            max_outer=num("max_outer", 60, int),
            max_inner=num("max_inner", 900, int),
            rho_init=num("rho_init", 10.0),
        )
        cfg = ExperimentConfig(
            params=params,
            t_final=num("t_final", 120.0),
            n_nodes=num("n_nodes", None, int) if "n_nodes" in values else None,
            tv_weight=num("tv_weight", 0.5),
            strategy_spec=values.get("strategy", "none").strip(),
            f_min=num("f_min", 0.0),
            solver=solver,
            out_dir=Path(values.get("out_dir", "paceopt-out").strip()),
            run_pmp=values.get("run_pmp", "true").strip().lower() not in ("false", "0", "no"),
            explicit=frozenset(values),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    # Validate the strategy spec eagerly so input errors exit with code 2.
    cfg.strategy()
    return cfg


def _out_dir(cfg: ExperimentConfig, cli_out: str | None) -> Path:
    env = os.environ.get("PACEOPT_OUT_DIR")
    if env:
        return Path(env)
    if cli_out:
        return Path(cli_out)
    return cfg.out_dir


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _kcal(strategy: NutritionStrategy | None) -> float:
    return 0.0 if strategy is None else strategy.total_energy / 4.184


def _optimize_instance(cfg: ExperimentConfig):
    """Assemble and solve one instance; returns (report, trajectory)."""
    prob = assemble(cfg.params, cfg.strategy(), cfg.mesh(), cfg.tv_weight,
                    f_min=cfg.f_min)
    report = solve(prob, cfg=cfg.solver)
    traj, _, _ = unpack(prob, report.x)
    return prob, report, traj


def _summary_text(report: SolverReport, traj) -> str:
    return (
        f"{report.summary_line()}\n"
        f"distance_km = {distance(traj):.6f}\n"
        f"final_E_F_kJ_per_kg = {traj.ef[-1]:.6f}\n"
        f"final_E_G_kJ_per_kg = {traj.eg[-1]:.6f}\n"
        f"final_N_kJ = {traj.n[-1]:.6f}\n"
    )


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------

def cmd_simulate(cfg: ExperimentConfig, profile_path: Path, mode: str,
                 out: Path) -> int:
    mesh = cfg.mesh()
    try:
        rows = [line.split("#", 1)[0].strip()
                for line in Path(profile_path).read_text().splitlines()]
        f = np.array([float(tok) for tok in rows if tok])
    except (OSError, ValueError) as exc:
        print(f"error: bad force profile: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if f.shape != (mesh.n_steps,):
        print(
            f"error: force profile has {len(f)} entries, mesh needs {mesh.n_steps}",
            file=sys.stderr,
        )
        return EXIT_INPUT
    if np.any(f < 0.0) or np.any(f > cfg.params.f_max):
        print("error: force profile outside [0, f_max]", file=sys.stderr)
        return EXIT_INPUT
    traj = simulate(f, cfg.strategy(), cfg.params, mesh, mode=mode)
    _write_atomic(out / "trajectory.csv", traj.to_csv())
    summary = (
        f"distance_km = {distance(traj):.3f}\n"
        f"final_E_F_kJ_per_kg = {traj.ef[-1]:.6f}\n"
        f"final_E_G_kJ_per_kg = {traj.eg[-1]:.6f}\n"
        f"final_N_kJ = {traj.n[-1]:.6f}\n"
    )
    _write_atomic(out / "summary.txt", summary)
    print(summary, end="")
    return EXIT_OK


def cmd_optimize(cfg: ExperimentConfig, out: Path, dump_problem: bool = False) -> int:
    prob, report, traj = _optimize_instance(cfg)
    if dump_problem:
        _write_atomic(out / "problem.txt", prob.debug_dump())
    _write_atomic(out / "solution.csv", traj.to_csv())
    _write_atomic(out / "summary.txt", _summary_text(report, traj))
    if cfg.run_pmp:
        pmp_report = verify_instance(cfg.params, cfg.strategy(), cfg.t_final)
        _write_atomic(out / "pmp.csv", pmp_csv(pmp_report))
    print(report.summary_line())
    return _STATUS_EXIT[report.status]


def cmd_sweep(cfg: ExperimentConfig, indices: list[int], out: Path) -> int:
    # Sweep defaults: 135-minute horizon, average lactate class.  The
    # scenario table is reproducible with those settings; explicit config
    # keys still win.
    if "t_final" not in cfg.explicit:
        cfg = replace(cfg, t_final=135.0)
    if "vla" not in cfg.explicit:
        cfg = replace(cfg, params=replace(cfg.params, vla="average"))
    lines = ["# strategy, total_kcal, distance_km, status",
             "strategy,total_kcal,distance_km,status"]
    worst = EXIT_OK
    for idx in indices:
        strat = builtin_strategy(idx, cfg.t_final)
        row_cfg = replace(cfg, strategy_spec=f"builtin:{idx}")
        _, report, traj = _optimize_instance(row_cfg)
        lines.append(
            f"s{idx},{_kcal(strat):.1f},{distance(traj):.3f},{report.status.value}"
        )
        code = _STATUS_EXIT[report.status]
        if _SEVERITY[code] > _SEVERITY[worst]:
            worst = code
        print(lines[-1])
    _write_atomic(out / "sweep.csv", "\n".join(lines) + "\n")
    return worst


def cmd_vla(cfg: ExperimentConfig, out: Path) -> int:
    lines = ["# vla, nutrition_kcal, distance_km, status",
             "vla,nutrition_kcal,distance_km,status"]
    worst = EXIT_OK
    for vla in ("good", "average", "bad"):
        for spec in ("none", "builtin:4"):
            row_cfg = replace(
                cfg,
                params=replace(cfg.params, vla=vla),
                strategy_spec=spec,
            )
            _, report, traj = _optimize_instance(row_cfg)
            lines.append(
                f"{vla},{_kcal(row_cfg.strategy()):.1f},"
                f"{distance(traj):.3f},{report.status.value}"
            )
            code = _STATUS_EXIT[report.status]
            if _SEVERITY[code] > _SEVERITY[worst]:
                worst = code
            print(lines[-1])
    _write_atomic(out / "vla.csv", "\n".join(lines) + "\n")
    return worst


# The eight benchmark runner levels: (t_final, vvo2max, mass, vla,
# hundred_kcal_gels, eg0).
LEVEL_ROWS = (
    (155.0, 320.0, 73.0, "average", 4, 150.0),
    (155.0, 320.0, 73.0, "average", 0, 150.0),
    (155.0, 320.0, 73.0, "good", 4, 150.0),
    (155.0, 320.0, 73.0, "bad", 4, 150.0),
    (180.0, 250.0, 80.0, "average", 0, 140.0),
    (180.0, 250.0, 80.0, "average", 4, 140.0),
    (215.0, 200.0, 80.0, "bad", 0, 140.0),
    (210.0, 200.0, 80.0, "average", 4, 144.0),
)


def cmd_levels(cfg: ExperimentConfig, out: Path) -> int:
    lines = ["# t_final_min, vvo2max, mass_kg, vla, gels_kcal, eg0, distance_km, status",
             "t_final,vvo2max,mass_kg,vla,gels_kcal,eg0,distance_km,status"]
    worst = EXIT_OK
    for t_final, vvo2max, mass, vla, gels, eg0 in LEVEL_ROWS:
        row_cfg = replace(
            cfg,
            params=replace(cfg.params, vvo2max=vvo2max, mass=mass, vla=vla, eg0=eg0),
            t_final=t_final,
            n_nodes=None,
            strategy_spec=f"builtin:{4 if gels else 0}",
        )
        _, report, traj = _optimize_instance(row_cfg)
        lines.append(
            f"{t_final:g},{vvo2max:g},{mass:g},{vla},{gels * 100},{eg0:g},"
            f"{distance(traj):.3f},{report.status.value}"
        )
        code = _STATUS_EXIT[report.status]
        if _SEVERITY[code] > _SEVERITY[worst]:
            worst = code
        print(lines[-1])
    _write_atomic(out / "levels.csv", "\n".join(lines) + "\n")
    return worst


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(
        prog="paceopt",
        description="Optimal pacing and in-race fueling for endurance running",
    )
    ap.add_argument("--config", type=Path, default=None, help="key = value config file")
    ap.add_argument("--out", type=str, default=None, help="output directory")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="integrate a given force profile")
    sim.add_argument("--profile", type=Path, required=True,
                     help="file with one force value per step")
    sim.add_argument("--mode", choices=("transcription", "refined"),
                     default="transcription")

    opt = sub.add_parser("optimize", help="solve for the optimal force profile")
    opt.add_argument("--dump-problem", action="store_true",
                     help="also write the NLP debug dump")

    swp = sub.add_parser("sweep", help="optimize across the strategy catalog")
    swp.add_argument("--strategies", type=str, default="0-15",
                     help="comma list and ranges, e.g. 0-7,11")

    sub.add_parser("vla", help="compare lactate-capacity classes")
    sub.add_parser("levels", help="benchmark runner levels")

    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = _out_dir(cfg, args.out)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.profile, args.mode, out)
        if args.command == "optimize":
            return cmd_optimize(cfg, out, dump_problem=args.dump_problem)
        if args.command == "sweep":
            indices = _parse_indices(args.strategies)
            return cmd_sweep(cfg, indices, out)
        if args.command == "vla":
            return cmd_vla(cfg, out)
        if args.command == "levels":
            return cmd_levels(cfg, out)
        raise AssertionError("unreachable")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def _parse_indices(spec: str) -> list[int]:
    out: list[int] = []
    for chunk in spec.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "-" in chunk:
            lo, hi = chunk.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(chunk))
    bad = [i for i in out if not 0 <= i <= 15]
    if bad or not out:
        raise ConfigError(f"strategy indices must be in 0..15, got {spec!r}")
    return out


if __name__ == "__main__":
    sys.exit(main())

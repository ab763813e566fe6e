"""Augmented-Lagrangian solver for the transcribed pacing NLP.

Outer loop: classic method of multipliers over all equality constraints, with
first-order multiplier updates gated on sufficient feasibility progress and a
penalty escalation otherwise.  Inner loop: projected limited-memory BFGS on
the box constraints with an Armijo backtracking line search along projected
steps.  Variables are scaled by their bound ranges and residuals by a natural
per-family magnitude, so the tolerances apply in scaled space.

The solver is deterministic: no randomization, fixed iteration order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .bioenergetics import distance
from .transcription import NlpProblem, default_start, unpack

__all__ = ["SolveStatus", "SolverConfig", "SolverReport", "solve"]


class SolveStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class SolverConfig:
    max_outer: int = 60
    max_inner: int = 900
    tol_constraint: float = 1.0e-6   # scaled infinity norm of residuals
    tol_optimality: float = 1.0e-4   # scaled projected-gradient infinity norm
    rho_init: float = 10.0
    rho_max: float = 1.0e10
    rho_growth: float = 5.0
    eta_init: float = 0.1            # feasibility gate for multiplier updates
    eta_shrink: float = 0.2
    omega_init: float = 1.0e-2       # first inner projected-gradient tolerance
    omega_shrink: float = 0.2
    lbfgs_memory: int = 16
    stall_outer: int = 5

    def __post_init__(self) -> None:
        for name in ("tol_constraint", "tol_optimality", "rho_init", "omega_init"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class SolverReport:
    """Solution and convergence diagnostics of one solve."""

    x: np.ndarray
    objective: float
    distance_km: float
    constraint_violation: float
    projected_grad_norm: float
    outer_iters: int
    inner_iters: int
    status: SolveStatus
    violation_history: tuple[float, ...]

    def summary_line(self) -> str:
        return (
            f"status={self.status.value} distance_km={self.distance_km:.3f} "
            f"violation={self.constraint_violation:.3e} "
            f"pgnorm={self.projected_grad_norm:.3e} outer={self.outer_iters} "
            f"inner={self.inner_iters}"
        )


def _project(x: np.ndarray, lb: np.ndarray, ub: np.ndarray) -> np.ndarray:
    return np.minimum(np.maximum(x, lb), ub)


def _projected_lbfgs(value_grad, x0, lb, ub, tol, max_iter, memory):
    """Minimize a smooth function over a box.

    Search directions come from an L-BFGS two-loop restricted to the free
    variables (active bounds with inward-pointing gradient are frozen); steps
    are globalized by Armijo backtracking along the projected path.  Returns
    (x, f, g, pg_norm, iterations).
    """
    x = _project(np.asarray(x0, dtype=float), lb, ub)
    f, g = value_grad(x)
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    rho_hist: list[float] = []
    pg_norm = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        pg = x - _project(x - g, lb, ub)
        pg_norm = float(np.max(np.abs(pg))) if pg.size else 0.0
        if pg_norm <= tol:
            break

        at_lower = np.isfinite(lb) & (x - lb <= 1e-12 * (1.0 + np.abs(lb)))
        at_upper = np.isfinite(ub) & (ub - x <= 1e-12 * (1.0 + np.abs(ub)))
        active = (at_lower & (g > 0.0)) | (at_upper & (g < 0.0))
        g_free = np.where(active, 0.0, g)

        # Two-loop recursion on the free subspace.
        d = -g_free
        if s_hist:
            alphas = []
            for s, y, r in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
                a = r * float(np.dot(s, d))
                alphas.append(a)
                d = d - a * y
            s_last, y_last = s_hist[-1], y_hist[-1]
            gamma = float(np.dot(s_last, y_last) / np.dot(y_last, y_last))
            d = gamma * d
            for s, y, r, a in zip(s_hist, y_hist, rho_hist, reversed(alphas)):
                b = r * float(np.dot(y, d))
                d = d + (a - b) * s
        d = np.where(active, 0.0, d)
        descent = float(np.dot(d, g))
        if not np.isfinite(descent) or descent >= 0.0:
            d = -g_free
            descent = float(np.dot(d, g))
            if descent >= 0.0:
                break

        step = 1.0
        accepted = False
        for _ in range(60):
            x_new = _project(x + step * d, lb, ub)
            dx = x_new - x
            slope = float(np.dot(g, dx))
            f_new, g_new = value_grad(x_new)
            if np.isfinite(f_new) and f_new <= f + 1e-4 * min(slope, 0.0):
                accepted = True
                break
            step *= 0.5
        if not accepted or not np.any(dx):
            break

        s_vec = dx
        y_vec = g_new - g
        sy = float(np.dot(s_vec, y_vec))
        if sy > 1e-12 * float(np.linalg.norm(s_vec) * np.linalg.norm(y_vec) + 1e-300):
            s_hist.append(s_vec)
            y_hist.append(y_vec)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
        x, f, g = x_new, f_new, g_new
    return x, f, g, pg_norm, it


def solve(
    prob: NlpProblem,
    x0: np.ndarray | None = None,
    cfg: SolverConfig | None = None,
) -> SolverReport:
    """Solve the NLP; returns the best feasible-enough iterate with diagnostics."""
    cfg = cfg or SolverConfig()
    if x0 is None:
        x0 = default_start(prob)
    x0 = np.asarray(x0, dtype=float)
    prob._check_dim(x0)

    var_scale = prob.variable_scales()
    con_scale = prob.residual_scales()
    obj_scale = prob.objective_scale
    lb_s = prob.lower / var_scale
    ub_s = prob.upper / var_scale

    def scaled_residuals(xs: np.ndarray) -> np.ndarray:
        return prob.residuals(xs * var_scale) / con_scale

    def al_value_grad(lam: np.ndarray, rho: float):
        def value_grad(xs: np.ndarray):
            x = xs * var_scale
            jval, jgrad = prob.objective(x)
            c = prob.residuals(x) / con_scale
            mult = lam + rho * c
            val = jval / obj_scale + float(np.dot(lam, c)) + 0.5 * rho * float(np.dot(c, c))
            grad = jgrad / obj_scale + prob.jacobian_t_product(x, mult / con_scale)
            return val, grad * var_scale
        return value_grad

    xs = _project(x0 / var_scale, lb_s, ub_s)
    lam = np.zeros(prob.n_constraints)
    rho = cfg.rho_init
    omega = cfg.omega_init
    eta = cfg.eta_init
    inner_total = 0
    viol_hist: list[float] = []
    status = SolveStatus.MAX_ITER
    prev_viol = np.inf
    best_viol = np.inf
    stall = 0
    pg_norm = np.inf
    outer = 0

    for outer in range(1, cfg.max_outer + 1):
        inner_tol = max(omega, 0.5 * cfg.tol_optimality)
        xs_new, _, _, pg_norm, its = _projected_lbfgs(
            al_value_grad(lam, rho), xs, lb_s, ub_s,
            inner_tol, cfg.max_inner, cfg.lbfgs_memory,
        )
        inner_total += its
        c = scaled_residuals(xs_new)
        viol = float(np.max(np.abs(c)))

        if viol > 1.1 * prev_viol and viol > cfg.tol_constraint and rho < cfg.rho_max:
            # Feasibility regressed: reject the step, retry from the previous
            # iterate with a stiffer penalty.
            rho = min(rho * cfg.rho_growth, cfg.rho_max)
            viol_hist.append(prev_viol)
            continue

        xs = xs_new
        viol_hist.append(viol)
        if viol <= cfg.tol_constraint and pg_norm <= cfg.tol_optimality:
            status = SolveStatus.CONVERGED
            prev_viol = viol
            break

        if viol <= max(cfg.tol_constraint, eta):
            # Feasibility on track: first-order multiplier update, tighten
            # the targets, keep the penalty.
            lam = lam + rho * c
            eta = max(cfg.eta_shrink * min(eta, viol), 0.1 * cfg.tol_constraint)
            omega = max(omega * cfg.omega_shrink, 0.25 * cfg.tol_optimality)
        else:
            rho = min(rho * cfg.rho_growth, cfg.rho_max)

        if viol > cfg.tol_constraint and viol > 0.9 * best_viol:
            stall += 1
            if stall >= cfg.stall_outer:
                status = SolveStatus.INFEASIBLE
                prev_viol = viol
                break
        else:
            stall = 0
        best_viol = min(best_viol, viol)
        prev_viol = min(prev_viol, viol)

    x = xs * var_scale
    traj, _, _ = unpack(prob, x)
    obj, _ = prob.objective(x)
    final_viol = float(np.max(np.abs(scaled_residuals(xs))))
    return SolverReport(
        x=x,
        objective=obj,
        distance_km=distance(traj),
        constraint_violation=final_viol,
        projected_grad_norm=pg_norm,
        outer_iters=outer,
        inner_iters=inner_total,
        status=status,
        violation_history=tuple(viol_hist),
    )

import itertools

import numpy as np
import pytest

from paceopt.bioenergetics import Mesh, RunnerParams
from paceopt.glyc import build_glyc_curve
from paceopt.nutrition import builtin_strategy
from paceopt.solver import SolveStatus, SolverConfig, solve
from paceopt.transcription import assemble, default_start, unpack


def brute_force_best(p, mesh, levels, tv_weight, curve):
    """Independent grid oracle: states by direct recurrence, objective by
    hand; grid points with out-of-bound states are discarded."""
    h = mesh.h
    best = np.inf
    for combo in itertools.product(levels, repeat=mesh.n_steps):
        v, ef, eg, n = 0.0, p.ef0, p.eg0, 0.0
        vs = [v]
        ok = True
        for f in combo:
            g = curve(v / p.vvo2max)
            w = p.a * p.sm * f * v
            v_next = v + h * (f - v / p.tau)
            ef = ef + h * (-w * (1.0 - g))
            eg = eg + h * (p.c3 * p.c4 * n - w * g)
            n = n + h * (-(p.d + p.c4) * n)
            if not (0.0 <= v_next <= p.v_max) or eg < 0.0 or ef < 0.0:
                ok = False
                break
            v = v_next
            vs.append(v)
        if not ok:
            continue
        dist_term = -h * sum(vs[:-1])
        tv = sum(abs(b - a) for a, b in zip(combo, combo[1:]))
        best = min(best, dist_term + tv_weight * tv)
    return best


@pytest.mark.parametrize("tv_weight,eg0", [(0.0, 144.0), (0.01, 144.0), (0.0, 0.002)])
def test_tiny_instance_beats_grid_oracle(tv_weight, eg0):
    p = RunnerParams(eg0=eg0)
    mesh = Mesh.minute_grid(3)
    curve = p.curve()
    best = brute_force_best(p, mesh, (0.0, 300.0, 600.0), tv_weight, curve)
    prob = assemble(p, None, mesh, tv_weight)
    report = solve(prob)
    assert report.constraint_violation <= 1e-6
    assert report.objective <= best + 1e-3 * abs(best)


def test_determinism():
    p = RunnerParams(vla="average")
    prob = assemble(p, builtin_strategy(1, 30.0), Mesh.minute_grid(30), 0.5)
    a = solve(prob)
    b = solve(prob)
    assert np.array_equal(a.x, b.x)
    assert a.objective == b.objective
    assert a.violation_history == b.violation_history
    assert a.status == b.status


def test_small_marathon_converges_and_is_feasible():
    p = RunnerParams(vla="average")
    prob = assemble(p, builtin_strategy(1, 30.0), Mesh.minute_grid(30), 0.5)
    report = solve(prob)
    assert report.status == SolveStatus.CONVERGED
    assert report.constraint_violation <= 1e-6
    assert report.projected_grad_norm <= 1e-4
    # bounds hold exactly by projection
    assert np.all(report.x >= prob.lower) and np.all(report.x <= prob.upper)
    # outer-loop feasibility is monotone up to 10% slack
    hist = report.violation_history
    assert all(b <= 1.1 * a for a, b in zip(hist, hist[1:]))


def test_huge_tv_weight_freezes_control():
    p = RunnerParams()
    prob = assemble(p, None, Mesh.minute_grid(20), 1.0e6)
    report = solve(prob)
    traj, _, _ = unpack(prob, report.x)
    assert np.ptp(traj.f[1:]) <= 1e-4 * p.f_max


def test_infeasible_detection():
    p = RunnerParams(eg0=0.0)
    prob = assemble(p, None, Mesh.minute_grid(20), 0.5, f_min=1000.0)
    report = solve(prob)
    assert report.status == SolveStatus.INFEASIBLE


def test_out_of_bounds_start_is_clipped():
    p = RunnerParams()
    prob = assemble(p, None, Mesh.minute_grid(5), 0.5)
    x0 = default_start(prob) * 10.0 - 1.0
    report = solve(prob, x0=x0)
    assert np.all(report.x >= prob.lower) and np.all(report.x <= prob.upper)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tol_constraint=0.0)
    with pytest.raises(ValueError):
        SolverConfig(rho_init=-1.0)


def test_report_summary_line():
    p = RunnerParams()
    prob = assemble(p, None, Mesh.minute_grid(5), 0.5)
    report = solve(prob)
    line = report.summary_line()
    assert "status=" in line and "distance_km=" in line and "violation=" in line

import numpy as np
import pytest

from paceopt.bioenergetics import Mesh, RunnerParams, distance, simulate
from paceopt.nutrition import builtin_strategy, world_record_strategy
from paceopt.transcription import (
    DecisionLayout,
    assemble,
    default_start,
    objective_eval,
    pack,
    tv_split,
    unpack,
)


def wr_problem(tv_weight=0.5):
    p = RunnerParams()
    return assemble(p, world_record_strategy(), Mesh.minute_grid(120), tv_weight)


def test_layout_blocks_cover_vector():
    lay = DecisionLayout(121)
    blocks = [lay.f, lay.ef, lay.eg, lay.v, lay.n, lay.zeta, lay.iota]
    sizes = [sl.stop - sl.start for sl in blocks]
    assert sizes == [120, 121, 121, 121, 121, 119, 119]
    # contiguous, non-overlapping, covering the whole vector
    pos = 0
    for sl in blocks:
        assert sl.start == pos
        pos = sl.stop
    assert pos == lay.dim == 7 * 121 - 5


def test_bounds_and_pinned_initial_conditions():
    prob = wr_problem()
    p = prob.params
    lay = prob.layout
    assert np.all(prob.lower[lay.f] == 0.0)
    assert np.all(prob.upper[lay.f] == p.f_max)
    assert prob.upper[lay.v][5] == p.f_max * p.tau
    total = world_record_strategy().total_energy
    assert prob.upper[lay.eg][5] == pytest.approx(p.eg0 + p.c3 * total)
    # node-0 pins
    for block, value in (("v", 0.0), ("ef", p.ef0), ("eg", p.eg0), ("n", 0.0)):
        idx = getattr(lay, block).start
        assert prob.lower[idx] == prob.upper[idx] == value


def test_default_start_matches_classic_guess():
    prob = wr_problem()
    x0 = default_start(prob)
    traj, zeta, iota = unpack(prob, x0)
    assert np.all(traj.f == prob.params.f_max)
    assert np.all(traj.v == 0.0) and np.all(traj.ef == 0.0)
    assert np.all(zeta == 0.0) and np.all(iota == 0.0)


def test_objective_value_and_gradient():
    prob = wr_problem()
    lay = prob.layout
    x = np.zeros(lay.dim)
    assert objective_eval(prob, x)[0] == 0.0
    x[lay.v] = 357.0
    value, grad = objective_eval(prob, x)
    assert value == pytest.approx(-42840.0, rel=1e-14)
    assert np.all(grad[lay.v][:-1] == -1.0)
    assert grad[lay.v][-1] == 0.0
    assert np.all(grad[lay.zeta] == 0.5)
    with pytest.raises(ValueError):
        objective_eval(prob, np.zeros(3))


def test_objective_gradient_matches_central_differences():
    prob = wr_problem()
    rng = np.random.default_rng(0)
    x = rng.uniform(0.0, 1.0, prob.layout.dim) * 100.0
    value, grad = objective_eval(prob, x)
    for idx in rng.integers(0, prob.layout.dim, 25):
        e = np.zeros(prob.layout.dim)
        e[idx] = 1e-3
        fd = (prob.objective(x + e)[0] - prob.objective(x - e)[0]) / 2e-3
        assert grad[idx] == pytest.approx(fd, rel=1e-8, abs=1e-10)


def test_tv_split_cases():
    zeta, iota = tv_split(np.array([10.0, 30.0, 20.0]))
    assert list(zeta) == [20.0, 0.0]
    assert list(iota) == [0.0, 10.0]
    assert float(np.sum(zeta + iota)) == 30.0
    zeta, iota = tv_split(np.full(6, 7.0))
    assert not np.any(zeta) and not np.any(iota)
    f = np.array([0.0, 5.0, 9.0, 14.0])
    zeta, iota = tv_split(f)
    assert not np.any(iota)
    assert float(np.sum(zeta)) == pytest.approx(f[-1] - f[0])
    assert np.all(zeta * iota == 0.0)
    with pytest.raises(ValueError):
        tv_split(np.array([1.0]))


def test_pack_unpack_round_trip():
    prob = wr_problem()
    p = prob.params
    f = np.full(120, 21420.0)
    f[0] = 357.0
    traj = simulate(f, world_record_strategy(), p, prob.mesh)
    x = pack(prob, traj)
    back, zeta, iota = unpack(prob, x)
    for name in ("f", "v", "ef", "eg", "n"):
        assert np.array_equal(getattr(back, name), getattr(traj, name))
    assert np.array_equal(x, pack(prob, back, zeta, iota))
    # a single perturbed entry shows up in exactly one block
    x2 = x.copy()
    x2[prob.layout.eg.start + 7] += 1.0
    t2, z2, i2 = unpack(prob, x2)
    assert np.array_equal(t2.f, traj.f) and np.array_equal(t2.v, traj.v)
    assert np.count_nonzero(t2.eg - traj.eg) == 1


def test_simulator_consistency_zero_residuals():
    """The assembler and simulator encode identical recurrences."""
    prob = wr_problem()
    f = np.full(120, 21420.0)
    f[0] = 357.0
    traj = simulate(f, world_record_strategy(), prob.params, prob.mesh)
    x = pack(prob, traj)
    scaled = prob.residuals(x) / prob.residual_scales()
    assert np.max(np.abs(scaled)) <= 1e-12

    # random forces on a contraction mesh exercise the nonlinear rows
    p = prob.params
    mesh = Mesh(t_final=1.0, n_nodes=121)
    prob2 = assemble(p, None, mesh, 0.5)
    rng = np.random.default_rng(5)
    f2 = rng.uniform(0.0, p.f_max, 120)
    traj2 = simulate(f2, None, p, mesh)
    x2 = pack(prob2, traj2)
    scaled2 = prob2.residuals(x2) / prob2.residual_scales()
    assert np.max(np.abs(scaled2)) <= 1e-12


def test_objective_equals_distance_plus_tv_at_feasible_points():
    prob = wr_problem(tv_weight=0.7)
    f = np.full(120, 21000.0)
    f[0] = 350.0
    f[60:] = 20000.0
    traj = simulate(f, world_record_strategy(), prob.params, prob.mesh)
    x = pack(prob, traj)
    value, _ = objective_eval(prob, x)
    tv = float(np.sum(np.abs(np.diff(f))))
    assert value == pytest.approx(-distance(traj) * 1000.0 + 0.7 * tv, rel=1e-12)


def test_constraint_jacobian_matches_finite_differences():
    p = RunnerParams()
    mesh = Mesh(t_final=5.0, n_nodes=6)
    prob = assemble(p, builtin_strategy(1, 5.0), mesh, 0.5)
    rng = np.random.default_rng(11)
    lo = np.where(np.isfinite(prob.lower), prob.lower, 0.0)
    hi = np.where(np.isfinite(prob.upper), prob.upper, 1000.0)
    x = lo + rng.uniform(0.05, 0.95, prob.layout.dim) * (hi - lo)
    jac = prob.jacobian_dense(x)
    scales = np.maximum(np.abs(x), 1.0)
    worst = 0.0
    for j in range(prob.layout.dim):
        e = np.zeros(prob.layout.dim)
        e[j] = 1e-6 * scales[j]
        fd = (prob.residuals(x + e) - prob.residuals(x - e)) / (2 * e[j])
        denom = np.maximum(np.abs(jac[:, j]), 1.0)
        worst = max(worst, float(np.max(np.abs(jac[:, j] - fd) / denom)))
    assert worst <= 1e-6


def test_jacobian_t_product_matches_dense():
    p = RunnerParams()
    mesh = Mesh(t_final=4.0, n_nodes=5)
    prob = assemble(p, None, mesh, 0.2)
    rng = np.random.default_rng(2)
    x = rng.uniform(0.0, 1.0, prob.layout.dim) * 50.0
    x[prob.layout.v] = rng.uniform(0.0, 600.0, 5)
    jac = prob.jacobian_dense(x)
    y = rng.standard_normal(prob.n_constraints)
    assert np.allclose(prob.jacobian_t_product(x, y), jac.T @ y, rtol=1e-12, atol=1e-12)


def test_assemble_validation():
    p = RunnerParams()
    mesh = Mesh.minute_grid(10)
    with pytest.raises(ValueError):
        assemble(p, None, mesh, -0.1)
    with pytest.raises(ValueError):
        assemble(p, None, mesh, 0.5, f_min=-1.0)
    with pytest.raises(ValueError):
        assemble(p, None, mesh, 0.5, f_min=1e9)


def test_debug_dump_mentions_dimensions():
    prob = wr_problem()
    dump = prob.debug_dump()
    assert "dim 842" in dump
    assert "constraints 599" in dump
    assert "rows eg" in dump and "block zeta" in dump

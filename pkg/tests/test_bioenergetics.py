import numpy as np
import pytest

from paceopt.bioenergetics import (
    Mesh,
    RunnerParams,
    State,
    Trajectory,
    distance,
    energy_audit,
    euler_step,
    simulate,
)
from paceopt.glyc import build_glyc_curve
from paceopt.nutrition import world_record_strategy

FLAT_08 = build_glyc_curve(knots=((0.0, 0.8), (1.0, 0.8)))


def test_params_defaults_and_identities():
    p = RunnerParams()
    assert p.c3 * p.mass == 1.0
    assert p.v_max == 600.0
    for mass in (55.0, 73.0, 80.0):
        q = RunnerParams(mass=mass)
        assert q.c3 * q.mass == 1.0


@pytest.mark.parametrize(
    "kwargs",
    [dict(mass=0.0), dict(tau=-1.0), dict(vvo2max=0.0), dict(f_max=0.0),
     dict(eg0=-1.0), dict(ef0=-5.0), dict(d=-0.1), dict(c4=0.0),
     dict(vla="excellent")],
)
def test_params_validation(kwargs):
    with pytest.raises(ValueError):
        RunnerParams(**kwargs)


def test_mesh_invariants():
    mesh = Mesh.minute_grid(120)
    assert mesh.n_nodes == 121
    assert mesh.h == 1.0
    assert mesh.times()[0] == 0.0 and mesh.times()[-1] == 120.0
    with pytest.raises(ValueError):
        Mesh(t_final=10.0, n_nodes=1)
    with pytest.raises(ValueError):
        Mesh(t_final=0.0, n_nodes=5)


def test_euler_step_fixed_point():
    # f = V / tau leaves the velocity unchanged, exactly.
    p = RunnerParams()
    state = State(v=357.0, ef=3400.0, eg=100.0, n=0.0)
    nxt = euler_step(state, 21420.0, 0.0, p, h=1.0)
    assert nxt.v == 357.0


def test_euler_step_rest_state():
    p = RunnerParams()
    state = State(v=0.0, ef=p.ef0, eg=p.eg0, n=0.0)
    nxt = euler_step(state, 0.0, 0.0, p, h=2.5)
    assert nxt == state


def test_euler_step_energy_drawdown_hand_values():
    # At f = 21420, V = 357 and an 80% carbohydrate share the energy rates
    # are 21420*357/3.6e6 * (0.8, 0.2) kJ/kg per minute.
    p = RunnerParams()
    state = State(v=357.0, ef=3439.0, eg=144.0, n=0.0)
    nxt = euler_step(state, 21420.0, 0.0, p, h=1.0, curve=FLAT_08)
    work = 21420.0 * 357.0 / 3.6e6
    assert nxt.eg - state.eg == pytest.approx(-work * 0.8, rel=1e-12)
    assert nxt.ef - state.ef == pytest.approx(-work * 0.2, rel=1e-12)
    assert nxt.eg - state.eg == pytest.approx(-1.699, abs=5e-4)
    assert nxt.ef - state.ef == pytest.approx(-0.425, abs=2e-4)


def test_euler_step_nutrition_decay_hand_value():
    p = RunnerParams()
    state = State(v=0.0, ef=p.ef0, eg=p.eg0, n=418.4)
    nxt = euler_step(state, 0.0, 0.0, p, h=1.0)
    assert nxt.n == pytest.approx(418.4 * (1.0 - 0.005 - 1.0 / 6.0), rel=1e-12)
    assert nxt.n == pytest.approx(346.57, abs=0.01)


def test_euler_step_preconditions():
    p = RunnerParams()
    state = State.initial(p)
    with pytest.raises(ValueError):
        euler_step(state, -1.0, 0.0, p, 1.0)
    with pytest.raises(ValueError):
        euler_step(state, p.f_max + 1.0, 0.0, p, 1.0)
    with pytest.raises(ValueError):
        euler_step(state, 0.0, -1.0, p, 1.0)
    with pytest.raises(ValueError):
        euler_step(state, 0.0, 0.0, p, 0.0)


def test_simulate_zero_force_is_static():
    p = RunnerParams()
    mesh = Mesh.minute_grid(60)
    traj = simulate(np.zeros(60), None, p, mesh)
    assert np.all(traj.v == 0.0)
    assert np.all(traj.ef == p.ef0)
    assert np.all(traj.eg == p.eg0)
    assert np.all(traj.n == 0.0)


def test_simulate_constant_force_marathon_reference():
    # One ramp step then the fixed-point force: distance close to the
    # marathon benchmark and glycogen nearly exhausted.
    p = RunnerParams()
    mesh = Mesh.minute_grid(120)
    f = np.full(120, 21420.0)
    f[0] = 357.0
    traj = simulate(f, world_record_strategy(), p, mesh)
    assert distance(traj) == pytest.approx(42.5, rel=0.03)
    assert traj.eg[-1] <= 0.1 * p.eg0
    assert np.all(traj.v[1:] == 357.0)


def test_simulate_shape_and_bounds_errors():
    p = RunnerParams()
    mesh = Mesh.minute_grid(10)
    with pytest.raises(ValueError):
        simulate(np.zeros(9), None, p, mesh)
    with pytest.raises(ValueError):
        simulate(np.full(10, -1.0), None, p, mesh)
    with pytest.raises(ValueError):
        simulate(np.zeros(10), None, p, mesh, mode="magic")


def test_single_gel_uptake_closed_form():
    # With f = 0 the glycogen gain from one gel approaches
    # c4/(c4+d) * energy / mass as the horizon grows; the refined
    # integrator reproduces the h -> 0 value to sub-percent accuracy.
    p = RunnerParams()
    mesh = Mesh.minute_grid(60)
    s = np.zeros(60)
    s[0] = 418.4
    traj = simulate(np.zeros(60), s, p, mesh, mode="refined")
    expected = (p.c4 / (p.c4 + p.d)) * 418.4 * p.c3
    assert expected == pytest.approx(7.386, abs=5e-4)
    assert traj.eg[-1] - p.eg0 == pytest.approx(expected, rel=1e-2)


def test_energy_audit_machine_zero_on_simulated():
    p = RunnerParams()
    mesh = Mesh.minute_grid(120)
    f = np.full(120, 21420.0)
    f[0] = 357.0
    traj = simulate(f, world_record_strategy(), p, mesh)
    res = energy_audit(traj, p)
    scale = max(1.0, float(np.max(np.abs(traj.ef))), float(np.max(np.abs(traj.eg))))
    assert np.max(np.abs(res)) <= 1e-12 * scale / mesh.h


def test_energy_audit_detects_tampering():
    p = RunnerParams()
    mesh = Mesh.minute_grid(30)
    f = np.full(30, 12000.0)
    f[0] = 200.0
    traj = simulate(f, None, p, mesh)
    eg = traj.eg.copy()
    eg[10] += 1.0
    bad = Trajectory(mesh=mesh, f=traj.f, v=traj.v, ef=traj.ef, eg=eg, n=traj.n)
    res = energy_audit(bad, p)
    assert res[9] == pytest.approx(+1.0 / mesh.h, rel=1e-9)
    assert res[10] == pytest.approx(-1.0 / mesh.h, rel=1e-9)
    assert np.max(np.abs(np.delete(res, (9, 10)))) < 1e-10


def test_energy_audit_zero_force_budget_is_pure_inflow():
    p = RunnerParams()
    mesh = Mesh.minute_grid(40)
    s = np.zeros(40)
    s[5] = 418.4
    traj = simulate(np.zeros(40), s, p, mesh)
    total = traj.ef + traj.eg
    inflow = p.c3 * p.c4 * traj.n[:-1]
    assert np.allclose((total[1:] - total[:-1]) / mesh.h, inflow, atol=1e-12)
    scale = max(1.0, float(np.max(np.abs(traj.ef))))
    assert np.max(np.abs(energy_audit(traj, p))) < 1e-12 * scale


def test_distance_values():
    p = RunnerParams()
    mesh = Mesh.minute_grid(120)
    zero = simulate(np.zeros(120), None, p, mesh)
    assert distance(zero) == 0.0
    v = np.full(121, 357.0)
    traj = Trajectory(mesh=mesh, f=np.full(120, 21420.0), v=v,
                      ef=np.full(121, p.ef0), eg=np.full(121, p.eg0),
                      n=np.zeros(121))
    assert distance(traj) == pytest.approx(42.84, rel=1e-12)


def test_monotone_depletion_without_fuel():
    p = RunnerParams()
    mesh = Mesh(t_final=1.0, n_nodes=121)  # stable step h = tau/2
    f = np.full(120, 9000.0)
    traj = simulate(f, None, p, mesh)
    assert np.all(np.diff(traj.ef[2:]) < 0.0)
    assert np.all(np.diff(traj.eg[2:]) < 0.0)


def test_allocation_shares_sum_to_total_work():
    p = RunnerParams()
    mesh = Mesh.minute_grid(60)
    f = np.full(60, 18000.0)
    f[0] = 300.0
    traj = simulate(f, None, p, mesh)
    lhs = np.diff(traj.ef + traj.eg)
    rhs = -mesh.h * p.a * p.sm * traj.f * traj.v[:-1]
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_refined_matches_transcription_to_first_order():
    p = RunnerParams()
    f_level = 15000.0
    errors = []
    for k in range(3):
        n_steps = int(2.0 * 60 * 2**k)  # h = tau / 2^k
        mesh = Mesh(t_final=2.0, n_nodes=n_steps + 1)
        f = np.full(n_steps, f_level)
        d_t = distance(simulate(f, None, p, mesh, mode="transcription"))
        d_r = distance(simulate(f, None, p, mesh, mode="refined"))
        errors.append(abs(d_t - d_r))
    assert errors[0] > errors[1] > errors[2]
    assert errors[0] / errors[1] == pytest.approx(2.0, rel=0.5)


def test_trajectory_csv_round_shape():
    p = RunnerParams()
    mesh = Mesh.minute_grid(5)
    traj = simulate(np.zeros(5), None, p, mesh)
    text = traj.to_csv()
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    assert lines[0] == "t,f,V,E_F,E_G,N"
    assert len(lines) == 1 + mesh.n_nodes
    assert lines[-1].split(",")[1] == ""  # no force at the final node

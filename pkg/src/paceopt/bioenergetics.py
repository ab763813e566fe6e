"""Runner bioenergetics: domain types, step recurrences, forward simulation.

State per unit time (minutes): velocity V [m/min], fat energy E_F [kJ/kg],
glycogen energy E_G [kJ/kg], and the nutrition compartment N [kJ] fed by
in-race carbohydrate pulses.  Propulsion force per unit mass f [m/min^2] is
the control.  Work splits between the two energy stores through the
fuel-allocation curve evaluated at V / VVO2max.

All types are immutable and all operations are pure; everything is safe to
evaluate concurrently.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .glyc import VLA_TYPES, GlycCurve, build_glyc_curve

__all__ = [
    "RunnerParams",
    "State",
    "Mesh",
    "Trajectory",
    "euler_step",
    "simulate",
    "energy_audit",
    "distance",
    "work_rate",
]


@dataclass(frozen=True)
class RunnerParams:
    """Physiological and unit-conversion constants for one runner.

    Defaults describe an elite marathoner.  ``c3 = 1/mass`` converts kJ to
    kJ/kg; ``a`` converts J to kJ; ``sm`` converts (m/min)^2 to J/kg so that
    ``a * sm * f * V`` is the mechanical power per unit mass in kJ/kg/min.
    """

    mass: float = 55.0            # kg
    tau: float = 1.0 / 60.0       # min, internal resistance time constant
    vvo2max: float = 402.0        # m/min, velocity at 100% VO2max
    d: float = 0.005              # 1/min, nutrition basal loss
    c4: float = 1.0 / 6.0         # 1/min, nutrition uptake rate
    a: float = 1.0e-3             # kJ/J
    sm: float = 1.0 / 3600.0      # (m/min)^2 -> J/kg
    f_max: float = 36000.0        # m/min^2, force-per-mass ceiling
    eg0: float = 144.0            # kJ/kg, initial glycogen energy
    ef0: float = 3439.0           # kJ/kg, initial fat energy
    vla: str = "good"             # lactate-capacity class

    def __post_init__(self) -> None:
        for name in ("mass", "tau", "vvo2max", "f_max", "c4"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        for name in ("eg0", "ef0", "d"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        if self.vla not in VLA_TYPES:
            raise ValueError(f"vla must be one of {VLA_TYPES}")

    @property
    def c3(self) -> float:
        """Mass conversion 1/mass [1/kg]; c3 * mass == 1 by construction."""
        return 1.0 / self.mass

    @property
    def v_max(self) -> float:
        """Velocity ceiling implied by the force bound: f_max * tau [m/min]."""
        return self.f_max * self.tau

    def curve(self) -> GlycCurve:
        return build_glyc_curve(vla=self.vla)


@dataclass(frozen=True)
class State:
    """Instantaneous runner state."""

    v: float    # m/min
    ef: float   # kJ/kg
    eg: float   # kJ/kg
    n: float    # kJ

    @staticmethod
    def initial(p: RunnerParams) -> "State":
        return State(v=0.0, ef=p.ef0, eg=p.eg0, n=0.0)


@dataclass(frozen=True)
class Mesh:
    """Uniform time grid over [0, t_final] with n_nodes nodes."""

    t_final: float
    n_nodes: int

    def __post_init__(self) -> None:
        if self.t_final <= 0.0:
            raise ValueError("t_final must be positive")
        if self.n_nodes < 2:
            raise ValueError("need at least two mesh nodes")

    @property
    def h(self) -> float:
        return self.t_final / (self.n_nodes - 1)

    @property
    def n_steps(self) -> int:
        return self.n_nodes - 1

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.n_nodes)

    @staticmethod
    def minute_grid(t_final: float) -> "Mesh":
        """One-minute spacing: t_final + 1 nodes (t_final integral, minutes)."""
        return Mesh(t_final=float(t_final), n_nodes=int(round(t_final)) + 1)


@dataclass(frozen=True)
class Trajectory:
    """Mesh-aligned force and state histories.

    ``f`` has one entry per step (length M-1); the state arrays have one per
    node (length M).
    """

    mesh: Mesh
    f: np.ndarray
    v: np.ndarray
    ef: np.ndarray
    eg: np.ndarray
    n: np.ndarray

    def __post_init__(self) -> None:
        m = self.mesh.n_nodes
        if len(self.f) != m - 1:
            raise ValueError("force array must have one entry per step")
        for name in ("v", "ef", "eg", "n"):
            if len(getattr(self, name)) != m:
                raise ValueError(f"state array {name} must have one entry per node")

    def to_csv(self) -> str:
        """Serialize as CSV; the final row has no force entry."""
        buf = io.StringIO()
        buf.write("# t [min], f [m/min^2], V [m/min], E_F [kJ/kg], E_G [kJ/kg], N [kJ]\n")
        buf.write("t,f,V,E_F,E_G,N\n")
        t = self.mesh.times()
        for k in range(self.mesh.n_nodes):
            fk = f"{self.f[k]:.12g}" if k < self.mesh.n_steps else ""
            buf.write(
                f"{t[k]:.12g},{fk},{self.v[k]:.12g},{self.ef[k]:.12g},"
                f"{self.eg[k]:.12g},{self.n[k]:.12g}\n"
            )
        return buf.getvalue()


def work_rate(f, v, p: RunnerParams):
    """Mechanical power per unit mass a * sm * f * V [kJ/kg/min]."""
    return p.a * p.sm * f * v


def euler_step(
    state: State,
    f_k: float,
    s_k: float,
    p: RunnerParams,
    h: float,
    curve: GlycCurve | None = None,
) -> State:
    """One forward-Euler step of the state recurrences."""
    if not 0.0 <= f_k <= p.f_max:
        raise ValueError("force outside [0, f_max]")
    if s_k < 0.0:
        raise ValueError("nutrition source must be non-negative")
    if h <= 0.0:
        raise ValueError("step size must be positive")
    if curve is None:
        curve = p.curve()
    g = curve(max(state.v, 0.0) / p.vvo2max)
    w = work_rate(f_k, state.v, p)
    return State(
        v=state.v + h * (f_k - state.v / p.tau),
        ef=state.ef + h * (-w * (1.0 - g)),
        eg=state.eg + h * (p.c3 * p.c4 * state.n - w * g),
        n=state.n + h * (s_k - p.d * state.n - p.c4 * state.n),
    )


def _pulse_array(strategy, mesh: Mesh) -> np.ndarray:
    """Accept a prebuilt source array or rasterize a NutritionStrategy."""
    if strategy is None:
        return np.zeros(mesh.n_steps)
    if hasattr(strategy, "events"):
        from .nutrition import pulse_profile

        return pulse_profile(strategy, mesh)
    s = np.asarray(strategy, dtype=float)
    if s.shape != (mesh.n_steps,):
        raise ValueError("source array must have one entry per step")
    return s


def simulate(
    f,
    strategy,
    p: RunnerParams,
    mesh: Mesh,
    mode: str = "transcription",
    curve: GlycCurve | None = None,
) -> Trajectory:
    """Integrate the model forward under a force profile.

    ``transcription`` mode repeats the exact step recurrences at mesh
    resolution, matching the optimizer's equality constraints bit for bit.
    Note the velocity recurrence amplifies roundoff when h > 2*tau, so on
    coarse meshes this mode is only meaningful for recurrence-consistent
    inputs.  ``refined`` mode integrates the velocity equation exactly over
    each interval (linear ODE, piecewise-constant force) and sub-steps the
    energy/nutrition equations at h_sub <= tau/2; it is a diagnostic, not the
    optimization target.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (mesh.n_steps,):
        raise ValueError("force profile must have one entry per step")
    if np.any(f < 0.0) or np.any(f > p.f_max):
        raise ValueError("force profile outside [0, f_max]")
    if curve is None:
        curve = p.curve()
    s = _pulse_array(strategy, mesh)
    if mode == "transcription":
        return _simulate_transcription(f, s, p, mesh, curve)
    if mode == "refined":
        return _simulate_refined(f, s, p, mesh, curve)
    raise ValueError(f"unknown simulation mode {mode!r}")


def _simulate_transcription(f, s, p, mesh, curve) -> Trajectory:
    m = mesh.n_nodes
    h = mesh.h
    v = np.zeros(m)
    ef = np.zeros(m)
    eg = np.zeros(m)
    n = np.zeros(m)
    ef[0], eg[0] = p.ef0, p.eg0
    for k in range(m - 1):
        g = curve(max(v[k], 0.0) / p.vvo2max)
        w = p.a * p.sm * f[k] * v[k]
        v[k + 1] = v[k] + h * (f[k] - v[k] / p.tau)
        ef[k + 1] = ef[k] + h * (-w * (1.0 - g))
        eg[k + 1] = eg[k] + h * (p.c3 * p.c4 * n[k] - w * g)
        n[k + 1] = n[k] + h * (s[k] - p.d * n[k] - p.c4 * n[k])
    return Trajectory(mesh=mesh, f=f, v=v, ef=ef, eg=eg, n=n)


def _simulate_refined(f, s, p, mesh, curve) -> Trajectory:
    m = mesh.n_nodes
    h = mesh.h
    n_sub = max(1, int(np.ceil(h / (p.tau / 2.0))))
    h_sub = h / n_sub
    decay = np.exp(-h_sub / p.tau)

    # Exact velocity at every substep: V(t) = f*tau + (V_k - f*tau) e^{-dt/tau}.
    v_nodes = np.zeros(m)
    v_sub = np.zeros((m - 1, n_sub))  # velocity at substep left endpoints
    for k in range(m - 1):
        target = f[k] * p.tau
        vcur = v_nodes[k]
        for j in range(n_sub):
            v_sub[k, j] = vcur
            vcur = target + (vcur - target) * decay
        v_nodes[k + 1] = vcur

    fv = np.repeat(f, n_sub) * v_sub.reshape(-1)
    g = curve(np.maximum(v_sub.reshape(-1), 0.0) / p.vvo2max)
    w = p.a * p.sm * fv
    s_sub = np.repeat(s, n_sub)

    # N is a stable linear recurrence over the substep grid.
    total_sub = (m - 1) * n_sub
    n_flat = np.zeros(total_sub + 1)
    alpha = 1.0 - h_sub * (p.d + p.c4)
    for i in range(total_sub):
        n_flat[i + 1] = alpha * n_flat[i] + h_sub * s_sub[i]

    d_ef = -h_sub * w * (1.0 - g)
    d_eg = h_sub * (p.c3 * p.c4 * n_flat[:-1] - w * g)
    ef_flat = p.ef0 + np.concatenate(([0.0], np.cumsum(d_ef)))
    eg_flat = p.eg0 + np.concatenate(([0.0], np.cumsum(d_eg)))

    idx = np.arange(0, total_sub + 1, n_sub)
    return Trajectory(
        mesh=mesh,
        f=f,
        v=v_nodes,
        ef=ef_flat[idx],
        eg=eg_flat[idx],
        n=n_flat[idx],
    )


def energy_audit(traj: Trajectory, p: RunnerParams) -> np.ndarray:
    """Per-step residual of the energy balance.

    The recurrences force Delta(E_F + E_G) = h * (c3*c4*N_k - a*sm*f_k*V_k)
    regardless of the allocation split; the returned array is the residual of
    that identity divided by h, so a +1 tamper of one energy node shows up as
    a 1/h residual at the adjoining step.
    """
    h = traj.mesh.h
    total = traj.ef + traj.eg
    inflow = p.c3 * p.c4 * traj.n[:-1]
    burn = work_rate(traj.f, traj.v[:-1], p)
    return (total[1:] - total[:-1]) / h - (inflow - burn)


def distance(traj: Trajectory) -> float:
    """Distance covered in km: left-rectangle quadrature of velocity."""
    return traj.mesh.h * float(np.sum(traj.v[:-1])) / 1000.0

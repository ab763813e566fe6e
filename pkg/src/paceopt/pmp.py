"""Necessary-condition checks on candidate optimal trajectories.

Adjoint variables for (V, E_F, E_G, N) are integrated backward through the
transpose of the discrete step map, starting from zero terminal values.  On
boundary segments, where the glycogen floor is active, the state-constraint
multiplier eta is chosen node by node so the switching function vanishes
there (the discrete analogue of solving phi' = 0 for eta); off the boundary
eta is zero.  The switching function phi_k pairs the step-k state with the
right-endpoint adjoints, which makes -h * phi exactly the reduced gradient
of the distance objective.

The backward recursion inherits the forward amplification factor
|1 - h/tau|, so these diagnostics are computed on a refined mesh
(``verify_instance`` reconstructs the plateau optimum at h << tau); the
one-minute optimizer grid is far outside that stability region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bioenergetics import Mesh, RunnerParams, Trajectory, simulate
from .glyc import GlycCurve
from .nutrition import NutritionStrategy, pulse_profile

__all__ = [
    "AdjointTrajectory",
    "ArcSegmentation",
    "GlcWindow",
    "PmpReport",
    "MAX_FORCE",
    "ZERO_FORCE",
    "SINGULAR_INTERIOR",
    "SINGULAR_BOUNDARY",
    "INDETERMINATE",
    "adjoint_backward",
    "switching_function",
    "classify_arcs",
    "glc_check",
    "boundary_force",
    "verify_instance",
    "pmp_csv",
]

MAX_FORCE = "max_force"
ZERO_FORCE = "zero_force"
SINGULAR_INTERIOR = "singular_interior"
SINGULAR_BOUNDARY = "singular_boundary"
INDETERMINATE = "indeterminate"

DEFAULT_TOL_PHI = 1.0e-3   # |phi| threshold, scaled by max |lam1|
DEFAULT_TOL_E = 1.0        # kJ/kg below which the glycogen floor counts as active
DEFAULT_TOL_F = 1.0e-3     # relative force threshold for bang arcs


def _affine_scan(alpha: float, b: np.ndarray) -> np.ndarray:
    """y_t = alpha * y_{t-1} + b_t with y_{-1} = 0, via doubling passes.

    Only sensible for |alpha| <= 1; used to evaluate the stable-mesh
    recurrences without a Python loop.
    """
    y = b.astype(float).copy()
    a = np.full(len(b), alpha)
    shift = 1
    while shift < len(b):
        y[shift:] += a[shift:] * y[:-shift]
        a[shift:] = a[shift:] * a[:-shift]
        shift *= 2
    return y


def _states_stable(f, s, p: RunnerParams, mesh: Mesh, curve: GlycCurve) -> Trajectory:
    """Vectorized forward states on a contractive mesh (h < 2*tau)."""
    h = mesh.h
    v = np.empty(mesh.n_nodes)
    v[0] = 0.0
    v[1:] = _affine_scan(1.0 - h / p.tau, h * np.asarray(f, dtype=float))
    n = np.empty(mesh.n_nodes)
    n[0] = 0.0
    n[1:] = _affine_scan(1.0 - h * (p.d + p.c4), h * np.asarray(s, dtype=float))
    g = curve(np.maximum(v[:-1], 0.0) / p.vvo2max)
    w = p.a * p.sm * f * v[:-1]
    ef = p.ef0 + np.concatenate(([0.0], np.cumsum(-h * w * (1.0 - g))))
    eg = p.eg0 + np.concatenate(([0.0], np.cumsum(h * (p.c3 * p.c4 * n[:-1] - w * g))))
    return Trajectory(mesh=mesh, f=np.asarray(f, dtype=float), v=v, ef=ef, eg=eg, n=n)


@dataclass(frozen=True)
class AdjointTrajectory:
    """Adjoints (one per state), floor multiplier eta, switching function."""

    lam1: np.ndarray
    lam2: np.ndarray
    lam3: np.ndarray
    lam4: np.ndarray
    eta: np.ndarray
    phi: np.ndarray

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.lam1)))


@dataclass(frozen=True)
class ArcSegmentation:
    """Contiguous force-node segments [start, stop) with structure labels."""

    segments: tuple[tuple[int, int, str], ...]

    def labels(self) -> tuple[str, ...]:
        return tuple(label for _, _, label in self.segments)

    def major_labels(self) -> tuple[str, ...]:
        return tuple(label for _, _, label in self.segments if label != INDETERMINATE)

    def count(self, label: str) -> int:
        return sum(stop - start for start, stop, lab in self.segments if lab == label)


@dataclass(frozen=True)
class GlcWindow:
    start: int
    stop: int
    node: int
    value: float
    skipped: bool
    note: str = ""


def adjoint_backward(
    traj: Trajectory,
    p: RunnerParams,
    curve: GlycCurve | None = None,
    boundary_tol: float = DEFAULT_TOL_E,
) -> AdjointTrajectory:
    """Integrate the adjoint system backward along a trajectory."""
    if curve is None:
        curve = p.curve()
    h = traj.mesh.h
    m = traj.mesh.n_nodes
    v = np.maximum(traj.v[:-1], 0.0)
    eg, f = traj.eg, traj.f
    asm = p.a * p.sm
    alpha = 1.0 - h / p.tau
    beta = 1.0 - h * (p.d + p.c4)

    ratio = v / p.vvo2max
    g = curve(ratio)
    gp = np.where(v > 0.0, curve.deriv(ratio), 0.0) / p.vvo2max
    vg = asm * v * g
    b_fat = asm * f * ((1.0 - g) - v * gp)
    b_gly = asm * f * (g + v * gp)

    lam1 = np.zeros(m)
    lam2 = np.zeros(m)
    lam3 = np.zeros(m)
    lam4 = np.zeros(m)
    eta = np.zeros(m)
    phi = np.zeros(m - 1)

    for j in range(m - 2, -1, -1):
        # Floor active at the right endpoint: raise lam3 so phi_j vanishes.
        if eg[j + 1] <= boundary_tol and vg[j] > 0.0:
            target = lam1[j + 1] / vg[j]
            if target > lam3[j + 1]:
                eta[j + 1] = (target - lam3[j + 1]) / h
                lam3[j + 1] = target
        phi[j] = lam1[j + 1] - lam3[j + 1] * vg[j]
        lam1[j] = (h + alpha * lam1[j + 1] - h * b_fat[j] * lam2[j + 1]
                   - h * b_gly[j] * lam3[j + 1])
        lam2[j] = lam2[j + 1]
        lam3[j] = lam3[j + 1]
        lam4[j] = beta * lam4[j + 1] + h * p.c3 * p.c4 * lam3[j + 1]
    return AdjointTrajectory(lam1=lam1, lam2=lam2, lam3=lam3, lam4=lam4, eta=eta, phi=phi)


def switching_function(
    adj: AdjointTrajectory,
    traj: Trajectory,
    p: RunnerParams,
    curve: GlycCurve | None = None,
) -> np.ndarray:
    """Recompute phi_k = lam1 - lam3 * a * sm * V * glyc at each force node."""
    if curve is None:
        curve = p.curve()
    v = np.maximum(traj.v[:-1], 0.0)
    g = curve(v / p.vvo2max)
    return adj.lam1[1:] - adj.lam3[1:] * p.a * p.sm * v * g


def classify_arcs(
    phi: np.ndarray,
    f: np.ndarray,
    e_g: np.ndarray,
    f_max: float,
    scale: float,
    tol_f: float = DEFAULT_TOL_F,
    tol_phi: float = DEFAULT_TOL_PHI,
    tol_e: float = DEFAULT_TOL_E,
) -> ArcSegmentation:
    """Label each force node and merge adjacent equal labels.

    Bang labels are decided by the force value; singular labels require a
    vanishing switching function (relative to the adjoint scale) and split on
    whether the glycogen floor is active at the step's right endpoint.
    Unclassifiable nodes become ``indeterminate``; they are reported, not an
    error.
    """
    n = len(f)
    if len(phi) != n or len(e_g) != n + 1:
        raise ValueError("phi/f/e_g lengths are inconsistent")
    labels = []
    phi_tol = tol_phi * max(scale, 1e-300)
    for k in range(n):
        if f[k] >= f_max * (1.0 - tol_f):
            labels.append(MAX_FORCE)
        elif f[k] <= f_max * tol_f:
            labels.append(ZERO_FORCE)
        elif abs(phi[k]) <= phi_tol:
            if e_g[k + 1] <= tol_e:
                labels.append(SINGULAR_BOUNDARY)
            else:
                labels.append(SINGULAR_INTERIOR)
        else:
            labels.append(INDETERMINATE)
    segments = []
    start = 0
    for k in range(1, n + 1):
        if k == n or labels[k] != labels[start]:
            segments.append((start, k, labels[start]))
            start = k
    return ArcSegmentation(segments=tuple(segments))


def glc_check(
    traj: Trajectory,
    adj: AdjointTrajectory,
    p: RunnerParams,
    segments: ArcSegmentation,
    s: np.ndarray | None = None,
    curve: GlycCurve | None = None,
    eps: float = 1.0e-3,
    boundary_tol: float = DEFAULT_TOL_E,
    min_window: int = 5,
) -> tuple[GlcWindow, ...]:
    """Finite-difference generalized Legendre-Clebsch estimate per window.

    For every singular window, the force around the window midpoint is
    raised by a smooth half-cosine bump peaking at +eps*f_max at the probe
    node, the trajectory is re-simulated (``s`` is the nutrition source it
    was generated under), the adjoints are recomputed, and the change of the
    second time-difference of phi at the probe node divided by the peak
    perturbation is reported.  The response of phi to a smooth sustained
    control variation carries the sign of the Legendre-Clebsch quantity, so
    a materially negative estimate flags a violated necessary condition.  A
    width-h impulse would instead be dominated by the O(1/h) kink it leaves
    in phi, which is why the bump is tapered.  Windows shorter than
    ``min_window`` nodes are skipped with a notice, as are windows whose
    probe force has no room to perturb.
    """
    if curve is None:
        curve = p.curve()
    h = traj.mesh.h
    out = []
    for start, stop, label in segments.segments:
        if label not in (SINGULAR_INTERIOR, SINGULAR_BOUNDARY):
            continue
        if stop - start < min_window:
            out.append(GlcWindow(start, stop, -1, float("nan"), True,
                                 f"window shorter than {min_window} nodes"))
            continue
        node = min(max((start + stop) // 2, 1), len(traj.f) - 2)
        delta = min(eps * p.f_max, p.f_max - traj.f[node])
        if delta <= 0.0:
            out.append(GlcWindow(start, stop, node, float("nan"), True,
                                 "force at ceiling, no room to perturb"))
            continue
        half = max(2, min((stop - start) // 3, node - start, stop - 1 - node,
                          int(round(0.5 / h))))
        ks = np.arange(-half, half + 1)
        bump = 0.5 * (1.0 + np.cos(np.pi * ks / half))
        f_pert = traj.f.copy()
        f_pert[node + ks] = np.minimum(f_pert[node + ks] + delta * bump, p.f_max)
        d2_base = (adj.phi[node + 1] - 2.0 * adj.phi[node] + adj.phi[node - 1]) / h**2
        if abs(1.0 - h / p.tau) < 1.0:
            pert = _states_stable(f_pert, s if s is not None else np.zeros(len(f_pert)),
                                  p, traj.mesh, curve)
        else:
            pert = simulate(f_pert, s, p, traj.mesh, mode="transcription", curve=curve)
        adj_pert = adjoint_backward(pert, p, curve=curve, boundary_tol=boundary_tol)
        d2_pert = (adj_pert.phi[node + 1] - 2.0 * adj_pert.phi[node]
                   + adj_pert.phi[node - 1]) / h**2
        out.append(GlcWindow(start, stop, node, (d2_pert - d2_base) / delta, False))
    return tuple(out)


def boundary_force(v: float, n: float, p: RunnerParams,
                   curve: GlycCurve | None = None) -> float:
    """Force sustaining zero glycogen drawdown: c3*c4*N / (a*sm*V*glyc)."""
    if curve is None:
        curve = p.curve()
    if v <= 0.0:
        raise ValueError("boundary force is undefined at zero velocity")
    g = curve(v / p.vvo2max)
    if v * g <= 0.0:
        raise ValueError("boundary force is undefined where V*glyc vanishes")
    return p.c3 * p.c4 * n / (p.a * p.sm * v * g)


@dataclass(frozen=True)
class PmpReport:
    """Refined reconstruction of a candidate optimum plus its diagnostics."""

    trajectory: Trajectory
    adjoint: AdjointTrajectory
    segments: ArcSegmentation
    glc: tuple[GlcWindow, ...]
    plateau_velocity: float
    notes: tuple[str, ...]


def verify_instance(
    p: RunnerParams,
    strategy: NutritionStrategy | None,
    t_final: float,
    curve: GlycCurve | None = None,
    nodes_per_minute: int = 480,
    boundary_tol: float = DEFAULT_TOL_E,
    tol_phi: float = DEFAULT_TOL_PHI,
    tol_f: float = DEFAULT_TOL_F,
    glc_eps: float = 1.0e-3,
) -> PmpReport:
    """Reconstruct the plateau optimum on a fine mesh and check PMP structure.

    The candidate control is full force until the velocity catches a plateau
    level V*, then the exact hold force V*/tau; V* is bisected so the
    glycogen store reaches the floor exactly at the final time.  The mesh
    must keep the adjoint recursion contractive; h <= tau/8 additionally
    keeps the boundary-window multiplier ratchet monotone (the backward
    lam1 transient then approaches its fixed point from below), which is
    what pins the post-window switching function at zero.
    """
    if curve is None:
        curve = p.curve()
    if nodes_per_minute * p.tau < 8.0:
        raise ValueError("refinement mesh must satisfy h <= tau/8")
    mesh = Mesh(t_final=float(t_final),
                n_nodes=int(round(t_final * nodes_per_minute)) + 1)
    h = mesh.h
    s = pulse_profile(strategy, mesh) if strategy is not None else np.zeros(mesh.n_steps)

    # Nutrition path is independent of the force profile: compute once.
    n_path = np.zeros(mesh.n_nodes)
    beta = 1.0 - h * (p.d + p.c4)
    for k in range(mesh.n_steps):
        n_path[k + 1] = beta * n_path[k] + h * s[k]
    inflow = h * p.c3 * p.c4 * n_path[:-1]

    alpha = 1.0 - h / p.tau

    def profile(v_star: float):
        v = np.empty(mesh.n_nodes)
        f = np.empty(mesh.n_steps)
        vk = 0.0
        k = 0
        while k < mesh.n_steps:
            nxt = alpha * vk + h * p.f_max
            if nxt > v_star:
                break
            f[k] = p.f_max
            v[k] = vk
            vk = nxt
            k += 1
        if k < mesh.n_steps:
            f[k] = (v_star - alpha * vk) / h
            v[k] = vk
            v[k + 1:] = v_star
            f[k + 1:] = v_star / p.tau
        v[0] = 0.0
        return f, v

    def min_eg(v_star: float) -> float:
        f, v = profile(v_star)
        g = curve(v[:-1] / p.vvo2max)
        burn = h * p.a * p.sm * f * v[:-1] * g
        eg = p.eg0 + np.concatenate(([0.0], np.cumsum(inflow - burn)))
        return float(np.min(eg))

    lo, hi = 0.0, p.v_max
    if min_eg(hi) >= 0.0:
        lo = hi
    else:
        for _ in range(90):
            mid = 0.5 * (lo + hi)
            if min_eg(mid) >= 0.0:
                lo = mid
            else:
                hi = mid
    v_star = lo

    f, _ = profile(v_star)
    traj = _states_stable(f, s, p, mesh, curve)
    adj = adjoint_backward(traj, p, curve=curve, boundary_tol=boundary_tol)
    segments = classify_arcs(adj.phi, traj.f, traj.eg, p.f_max, adj.scale,
                             tol_f=tol_f, tol_phi=tol_phi, tol_e=boundary_tol)

    glc = glc_check(traj, adj, p, segments, s=s, curve=curve, eps=glc_eps,
                    boundary_tol=boundary_tol)

    notes = []
    eg_min_node = int(np.argmin(traj.eg))
    if eg_min_node != mesh.n_nodes - 1:
        notes.append(
            f"glycogen floor first binds at node {eg_min_node} of {mesh.n_nodes - 1}; "
            "plateau reconstruction assumes a terminal contact"
        )
    return PmpReport(
        trajectory=traj,
        adjoint=adj,
        segments=segments,
        glc=tuple(glc),
        plateau_velocity=v_star,
        notes=tuple(notes),
    )


def pmp_csv(report: PmpReport) -> str:
    """Arc diagnostics as CSV: node, t, f, phi, E_G, label."""
    traj, adj = report.trajectory, report.adjoint
    t = traj.mesh.times()
    labels = np.empty(traj.mesh.n_steps, dtype=object)
    for start, stop, label in report.segments.segments:
        labels[start:stop] = label
    lines = ["# node, t [min], f [m/min^2], phi, E_G [kJ/kg], label",
             "node,t,f,phi,E_G,label"]
    for k in range(traj.mesh.n_steps):
        lines.append(
            f"{k},{t[k]:.12g},{traj.f[k]:.12g},{adj.phi[k]:.12g},"
            f"{traj.eg[k]:.12g},{labels[k]}"
        )
    return "\n".join(lines) + "\n"

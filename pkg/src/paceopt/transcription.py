"""Direct transcription of the pacing problem into a bound-constrained NLP.

Decision vector blocks, in order: forces f (M-1), fat energy E_F (M),
glycogen energy E_G (M), velocity V (M), nutrition N (M), and the
total-variation split variables zeta / iota (M-2 each); 7M-5 unknowns in
total.  The velocity and nutrition recurrences and the TV split rows are
linear equalities; the two energy recurrences are nonlinear equalities.
Initial conditions are enforced by pinning the node-0 bounds.  The objective
is the negated left-rectangle distance plus the TV penalty, to be minimized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bioenergetics import Mesh, RunnerParams, Trajectory
from .glyc import GlycCurve
from .nutrition import NutritionStrategy, pulse_profile

__all__ = [
    "DecisionLayout",
    "NlpProblem",
    "assemble",
    "objective_eval",
    "tv_split",
    "pack",
    "unpack",
    "default_start",
]

_FAMILIES = ("v", "n", "tv", "ef", "eg")


@dataclass(frozen=True)
class DecisionLayout:
    """Contiguous block offsets for the decision vector."""

    n_nodes: int

    @property
    def dim(self) -> int:
        return 7 * self.n_nodes - 5

    def _blocks(self) -> dict[str, slice]:
        m = self.n_nodes
        sizes = (("f", m - 1), ("ef", m), ("eg", m), ("v", m), ("n", m),
                 ("zeta", m - 2), ("iota", m - 2))
        out = {}
        start = 0
        for name, size in sizes:
            out[name] = slice(start, start + size)
            start += size
        return out

    def __getattr__(self, name: str) -> slice:
        blocks = self._blocks()
        if name in blocks:
            return blocks[name]
        raise AttributeError(name)


@dataclass(frozen=True)
class NlpProblem:
    """Immutable problem data plus evaluation callables for the solver.

    Constraint residuals are stacked per family in the order
    (V-recurrence, N-recurrence, TV-split, E_F-recurrence, E_G-recurrence);
    ``residual_scales`` gives one natural magnitude per row so feasibility
    can be measured in a scaled infinity norm.
    """

    params: RunnerParams
    mesh: Mesh
    curve: GlycCurve
    s: np.ndarray
    tv_weight: float
    layout: DecisionLayout
    lower: np.ndarray
    upper: np.ndarray
    n_scale: float

    # -- residual layout -------------------------------------------------

    @property
    def n_constraints(self) -> int:
        return 5 * self.layout.n_nodes - 6

    def family_slices(self) -> dict[str, slice]:
        m = self.layout.n_nodes
        sizes = (("v", m - 1), ("n", m - 1), ("tv", m - 2),
                 ("ef", m - 1), ("eg", m - 1))
        out = {}
        start = 0
        for name, size in sizes:
            out[name] = slice(start, start + size)
            start += size
        return out

    def residual_scales(self) -> np.ndarray:
        """Per-row magnitudes chosen so scaled Jacobian entries are O(1).

        Each recurrence row is scaled by the range of the state it advances
        (the dominant Jacobian entry); the TV rows by the force range.
        """
        p, h = self.params, self.mesh.h
        fam = {
            "v": max(p.f_max * h, p.v_max),
            "n": self.n_scale,
            "tv": p.f_max,
            "ef": max(p.ef0, 1.0),
            "eg": max(float(self.upper[self.layout.eg][0]), 1.0),
        }
        scales = np.empty(self.n_constraints)
        for name, sl in self.family_slices().items():
            scales[sl] = fam[name]
        return scales

    def variable_scales(self) -> np.ndarray:
        p = self.params
        lay = self.layout
        scales = np.empty(lay.dim)
        scales[lay.f] = p.f_max
        scales[lay.ef] = max(p.ef0, 1.0)
        scales[lay.eg] = max(float(self.upper[lay.eg][0]), 1.0)
        scales[lay.v] = p.v_max
        scales[lay.n] = self.n_scale
        scales[lay.zeta] = p.f_max
        scales[lay.iota] = p.f_max
        return scales

    @property
    def objective_scale(self) -> float:
        """Distance of a full race at the velocity ceiling, in meters."""
        return self.mesh.h * self.mesh.n_steps * self.params.v_max

    # -- evaluations ------------------------------------------------------

    def _check_dim(self, x: np.ndarray) -> None:
        if x.shape != (self.layout.dim,):
            raise ValueError(
                f"decision vector has shape {x.shape}, expected ({self.layout.dim},)"
            )

    def objective(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        self._check_dim(x)
        lay = self.layout
        h = self.mesh.h
        v = x[lay.v]
        value = -h * float(np.sum(v[:-1]))
        value += self.tv_weight * float(np.sum(x[lay.zeta]) + np.sum(x[lay.iota]))
        grad = np.zeros(lay.dim)
        grad[lay.v][:-1] = -h
        grad[lay.zeta] = self.tv_weight
        grad[lay.iota] = self.tv_weight
        return value, grad

    def _states(self, x: np.ndarray):
        lay = self.layout
        return x[lay.f], x[lay.ef], x[lay.eg], x[lay.v], x[lay.n]

    def residuals(self, x: np.ndarray) -> np.ndarray:
        """Stacked equality residuals (unscaled)."""
        self._check_dim(x)
        p, h = self.params, self.mesh.h
        f, ef, eg, v, n = self._states(x)
        g = self.curve(np.maximum(v[:-1], 0.0) / p.vvo2max)
        w = p.a * p.sm * f * v[:-1]
        r_v = v[1:] - v[:-1] - h * (f - v[:-1] / p.tau)
        r_n = n[1:] - n[:-1] - h * (self.s - p.d * n[:-1] - p.c4 * n[:-1])
        r_tv = -f[1:] + f[:-1] + x[self.layout.zeta] - x[self.layout.iota]
        r_ef = ef[1:] - ef[:-1] + h * w * (1.0 - g)
        r_eg = eg[1:] - eg[:-1] - h * (p.c3 * p.c4 * n[:-1] - w * g)
        return np.concatenate([r_v, r_n, r_tv, r_ef, r_eg])

    def jacobian_t_product(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """J(x)^T y without materializing the constraint Jacobian."""
        self._check_dim(x)
        if y.shape != (self.n_constraints,):
            raise ValueError("multiplier vector has wrong length")
        p, h = self.params, self.mesh.h
        lay = self.layout
        fam = self.family_slices()
        f, ef, eg, v, n = self._states(x)
        ratio = np.maximum(v[:-1], 0.0) / p.vvo2max
        g = self.curve(ratio)
        gp = self.curve.deriv(ratio) / p.vvo2max
        asm = p.a * p.sm

        y_v, y_n = y[fam["v"]], y[fam["n"]]
        y_tv = y[fam["tv"]]
        y_ef, y_eg = y[fam["ef"]], y[fam["eg"]]

        out = np.zeros(lay.dim)
        # V-recurrence rows.
        gv = out[lay.v]
        gv[1:] += y_v
        gv[:-1] += y_v * (-1.0 + h / p.tau)
        out[lay.f] += -h * y_v
        # N-recurrence rows.
        gn = out[lay.n]
        gn[1:] += y_n
        gn[:-1] += y_n * (-1.0 + h * (p.d + p.c4))
        # TV split rows.
        gf = out[lay.f]
        gf[1:] += -y_tv
        gf[:-1] += y_tv
        out[lay.zeta] += y_tv
        out[lay.iota] += -y_tv
        # Energy recurrence rows.
        ge = out[lay.ef]
        ge[1:] += y_ef
        ge[:-1] += -y_ef
        gg = out[lay.eg]
        gg[1:] += y_eg
        gg[:-1] += -y_eg
        gn[:-1] += -h * p.c3 * p.c4 * y_eg
        gf += h * asm * v[:-1] * ((1.0 - g) * y_ef + g * y_eg)
        dv_ef = h * asm * f * ((1.0 - g) - v[:-1] * gp)
        dv_eg = h * asm * f * (g + v[:-1] * gp)
        gv[:-1] += dv_ef * y_ef + dv_eg * y_eg
        return out

    def jacobian_dense(self, x: np.ndarray) -> np.ndarray:
        """Dense constraint Jacobian; intended for small meshes and tests."""
        rows = self.n_constraints
        jac = np.empty((rows, self.layout.dim))
        unit = np.zeros(rows)
        for i in range(rows):
            unit[i] = 1.0
            jac[i] = self.jacobian_t_product(x, unit)
            unit[i] = 0.0
        return jac

    def debug_dump(self) -> str:
        """Plain-text snapshot of dimensions, bounds and sparsity counts."""
        lay = self.layout
        fam = self.family_slices()
        m = lay.n_nodes
        nnz = {"v": 3 * (m - 1), "n": 2 * (m - 1), "tv": 4 * (m - 2),
               "ef": 4 * (m - 1), "eg": 5 * (m - 1)}
        lines = [
            "nlp-problem",
            f"nodes {m}  step_min {self.mesh.h:.12g}  dim {lay.dim}  "
            f"constraints {self.n_constraints}",
            f"tv_weight {self.tv_weight:.12g}  pulse_total_kJ "
            f"{self.mesh.h * float(np.sum(self.s)):.12g}",
        ]
        for name in _FAMILIES:
            sl = fam[name]
            lines.append(f"rows {name:3s} count {sl.stop - sl.start:5d} nnz {nnz[name]}")
        for name in ("f", "ef", "eg", "v", "n", "zeta", "iota"):
            sl = getattr(lay, name)
            lo, hi = self.lower[sl], self.upper[sl]
            lines.append(
                f"block {name:4s} len {sl.stop - sl.start:5d} "
                f"lb [{lo.min():.6g}, {lo.max():.6g}] ub [{hi.min():.6g}, {hi.max():.6g}]"
            )
        return "\n".join(lines) + "\n"


def assemble(
    p: RunnerParams,
    strategy: NutritionStrategy | None,
    mesh: Mesh,
    tv_weight: float,
    curve: GlycCurve | None = None,
    f_min: float = 0.0,
) -> NlpProblem:
    """Build the NLP for one runner / strategy / mesh instance."""
    if tv_weight < 0.0:
        raise ValueError("tv_weight must be non-negative")
    if not 0.0 <= f_min <= p.f_max:
        raise ValueError("f_min must lie in [0, f_max]")
    if curve is None:
        curve = p.curve()
    if strategy is None:
        s = np.zeros(mesh.n_steps)
        total = 0.0
    else:
        s = pulse_profile(strategy, mesh)
        total = strategy.total_energy
    lay = DecisionLayout(mesh.n_nodes)
    lower = np.zeros(lay.dim)
    upper = np.empty(lay.dim)
    lower[lay.f] = f_min
    upper[lay.f] = p.f_max
    upper[lay.ef] = p.ef0
    upper[lay.eg] = p.eg0 + p.c3 * total
    upper[lay.v] = p.v_max
    upper[lay.n] = np.inf
    upper[lay.zeta] = np.inf
    upper[lay.iota] = np.inf
    # Initial conditions as pinned bounds at node 0.
    for block, value in (("ef", p.ef0), ("eg", p.eg0), ("v", 0.0), ("n", 0.0)):
        idx = getattr(lay, block).start
        lower[idx] = upper[idx] = value
    return NlpProblem(
        params=p,
        mesh=mesh,
        curve=curve,
        s=s,
        tv_weight=tv_weight,
        layout=lay,
        lower=lower,
        upper=upper,
        n_scale=max(1.0, total),
    )


def objective_eval(prob: NlpProblem, x: np.ndarray) -> tuple[float, np.ndarray]:
    """Objective value and exact gradient at x."""
    return prob.objective(np.asarray(x, dtype=float))


def tv_split(f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Canonical nonnegative split of successive force differences."""
    f = np.asarray(f, dtype=float)
    if f.size < 2:
        raise ValueError("need at least two force values")
    diff = f[1:] - f[:-1]
    return np.maximum(diff, 0.0), np.maximum(-diff, 0.0)


def pack(
    prob: NlpProblem,
    traj: Trajectory,
    zeta: np.ndarray | None = None,
    iota: np.ndarray | None = None,
) -> np.ndarray:
    """Place a trajectory (plus optional TV split) into a decision vector."""
    lay = prob.layout
    if zeta is None or iota is None:
        zeta, iota = tv_split(traj.f)
    x = np.zeros(lay.dim)
    x[lay.f] = traj.f
    x[lay.ef] = traj.ef
    x[lay.eg] = traj.eg
    x[lay.v] = traj.v
    x[lay.n] = traj.n
    x[lay.zeta] = zeta
    x[lay.iota] = iota
    return x


def unpack(prob: NlpProblem, x: np.ndarray) -> tuple[Trajectory, np.ndarray, np.ndarray]:
    """Inverse of pack: decision vector -> (trajectory, zeta, iota)."""
    x = np.asarray(x, dtype=float)
    prob._check_dim(x)
    lay = prob.layout
    traj = Trajectory(
        mesh=prob.mesh,
        f=x[lay.f].copy(),
        v=x[lay.v].copy(),
        ef=x[lay.ef].copy(),
        eg=x[lay.eg].copy(),
        n=x[lay.n].copy(),
    )
    return traj, x[lay.zeta].copy(), x[lay.iota].copy()


def default_start(prob: NlpProblem) -> np.ndarray:
    """Classic cold start: forces at the ceiling, everything else zero."""
    x = np.zeros(prob.layout.dim)
    x[prob.layout.f] = prob.params.f_max
    return x

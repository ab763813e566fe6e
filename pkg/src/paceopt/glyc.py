"""Fuel-allocation curves.

The carbohydrate (glycogen) share of mechanical work is modeled as a smooth
function of the velocity ratio ``r = V / VVO2max``.  Each lactate-capacity
class (good / average / bad) gets its own knot table; a natural cubic spline
through the knots gives a C2 curve whose value and first derivative feed the
dynamics and the adjoint equations.

Knot tables live in ``data/glyc_knots_v1.txt`` (one knot pair per line) and
were frozen after calibrating the mid-curve values against the reference
marathon scenarios; the anchor points glyc(0) = 0.30 and glyc(1) = 1.0 are
physiological (resting carbohydrate share, all-glycogen at VVO2max).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

__all__ = [
    "GlycCurve",
    "InvalidCurveError",
    "VLA_TYPES",
    "build_glyc_curve",
    "glyc_eval",
    "glyc_deriv",
    "load_knot_tables",
]

VLA_TYPES = ("good", "average", "bad")

_DATA_FILE = "glyc_knots_v1.txt"


class InvalidCurveError(ValueError):
    """Raised for knot tables that cannot define a valid allocation curve."""


def _natural_spline_second_derivs(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Second derivatives of the natural cubic spline through (x, y).

    Classic tridiagonal solve with zero second derivative at both ends.
    """
    n = len(x)
    hseg = np.diff(x)
    rhs = np.zeros(n)
    rhs[1:-1] = 6.0 * ((y[2:] - y[1:-1]) / hseg[1:] - (y[1:-1] - y[:-2]) / hseg[:-1])

    # Thomas algorithm on the tridiagonal system; natural end conditions give
    # identity rows at the boundary.
    diag = np.ones(n)
    lower = np.zeros(n)
    upper = np.zeros(n)
    diag[1:-1] = 2.0 * (hseg[:-1] + hseg[1:])
    lower[1:-1] = hseg[:-1]
    upper[1:-1] = hseg[1:]

    cp = np.zeros(n)
    dp = np.zeros(n)
    cp[0] = upper[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / denom
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / denom
    m = np.zeros(n)
    m[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        m[i] = dp[i] - cp[i] * m[i + 1]
    return m


@dataclass(frozen=True)
class GlycCurve:
    """Natural cubic spline through fuel-allocation knots on r in [0, 1].

    Evaluation is clamped: inputs above the last knot return the last knot
    value, and outputs are clamped into [0, 1].  Negative ratios are a domain
    error.  ``deriv`` returns the derivative of the clamped evaluation with
    respect to the ratio (zero wherever the clamp is active).
    """

    ratios: tuple[float, ...]
    fractions: tuple[float, ...]
    label: str = "custom"

    def __post_init__(self) -> None:
        r = np.asarray(self.ratios, dtype=float)
        g = np.asarray(self.fractions, dtype=float)
        if r.ndim != 1 or r.size < 2 or g.shape != r.shape:
            raise InvalidCurveError("need at least two (ratio, fraction) knots")
        if np.any(np.diff(r) <= 0.0):
            raise InvalidCurveError("knot ratios must be strictly increasing")
        if r[0] != 0.0 or r[-1] != 1.0:
            raise InvalidCurveError("knot ratios must start at 0 and end at 1")
        if np.any(g < 0.0) or np.any(g > 1.0):
            raise InvalidCurveError("knot fractions must lie in [0, 1]")
        object.__setattr__(self, "_r", r)
        object.__setattr__(self, "_g", g)
        object.__setattr__(self, "_m", _natural_spline_second_derivs(r, g))

    @property
    def knots(self) -> tuple[tuple[float, float], ...]:
        return tuple(zip(self.ratios, self.fractions))

    def _segments(self, ratio: np.ndarray) -> tuple[np.ndarray, ...]:
        r = self._r
        idx = np.clip(np.searchsorted(r, ratio, side="right") - 1, 0, len(r) - 2)
        lo, hi = r[idx], r[idx + 1]
        seg = hi - lo
        a = (hi - ratio) / seg
        b = (ratio - lo) / seg
        return idx, seg, a, b

    def _raw(self, ratio: np.ndarray) -> np.ndarray:
        idx, seg, a, b = self._segments(ratio)
        g, m = self._g, self._m
        return (
            a * g[idx]
            + b * g[idx + 1]
            + ((a**3 - a) * m[idx] + (b**3 - b) * m[idx + 1]) * seg**2 / 6.0
        )

    def _raw_deriv(self, ratio: np.ndarray) -> np.ndarray:
        idx, seg, a, b = self._segments(ratio)
        g, m = self._g, self._m
        return (
            (g[idx + 1] - g[idx]) / seg
            - (3.0 * a**2 - 1.0) / 6.0 * seg * m[idx]
            + (3.0 * b**2 - 1.0) / 6.0 * seg * m[idx + 1]
        )

    def __call__(self, ratio):
        r = np.asarray(ratio, dtype=float)
        if np.any(r < 0.0):
            raise ValueError("velocity ratio must be non-negative")
        inside = np.minimum(r, 1.0)
        val = np.clip(self._raw(inside), 0.0, 1.0)
        val = np.where(r >= 1.0, self._g[-1], val)
        return float(val) if np.isscalar(ratio) else val

    def deriv(self, ratio):
        r = np.asarray(ratio, dtype=float)
        if np.any(r < 0.0):
            raise ValueError("velocity ratio must be non-negative")
        inside = np.minimum(r, 1.0)
        raw = self._raw(inside)
        der = self._raw_deriv(inside)
        der = np.where((raw < 0.0) | (raw > 1.0), 0.0, der)
        der = np.where(r >= 1.0, 0.0, der)
        return float(der) if np.isscalar(ratio) else der

    def second_deriv(self, ratio):
        """Spline second derivative (no clamping); linear within segments."""
        r = np.asarray(np.minimum(ratio, 1.0), dtype=float)
        idx, seg, a, b = self._segments(r)
        m = self._m
        val = a * m[idx] + b * m[idx + 1]
        return float(val) if np.isscalar(ratio) else val


def load_knot_tables() -> dict[str, tuple[tuple[float, float], ...]]:
    """Parse the packaged knot-table file into {vla: ((ratio, fraction), ...)}."""
    text = resources.files("paceopt.data").joinpath(_DATA_FILE).read_text()
    tables: dict[str, list[tuple[float, float]]] = {}
    current: list[tuple[float, float]] | None = None
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("table "):
            name = line.split(None, 1)[1].strip()
            current = tables.setdefault(name, [])
            continue
        if current is None:
            raise InvalidCurveError(f"knot line outside a table block: {line!r}")
        parts = line.split()
        if len(parts) != 2:
            raise InvalidCurveError(f"malformed knot line: {line!r}")
        current.append((float(parts[0]), float(parts[1])))
    return {name: tuple(knots) for name, knots in tables.items()}


@lru_cache(maxsize=None)
def _builtin_curve(vla: str) -> GlycCurve:
    tables = load_knot_tables()
    if vla not in tables:
        raise InvalidCurveError(f"unknown lactate-capacity class {vla!r}")
    ratios, fractions = zip(*tables[vla])
    return GlycCurve(ratios=ratios, fractions=fractions, label=vla)


def build_glyc_curve(
    vla: str | None = None,
    knots: tuple[tuple[float, float], ...] | None = None,
) -> GlycCurve:
    """Build the allocation curve for a named class or from custom knots."""
    if (vla is None) == (knots is None):
        raise ValueError("pass exactly one of vla or knots")
    if vla is not None:
        return _builtin_curve(vla)
    ratios, fractions = zip(*knots)
    return GlycCurve(ratios=ratios, fractions=fractions)


def glyc_eval(curve: GlycCurve, ratio):
    """Carbohydrate work share at the given velocity ratio (clamped to [0, 1])."""
    return curve(ratio)


def glyc_deriv(curve: GlycCurve, ratio):
    """d(glyc)/d(ratio); divide by VVO2max for the derivative w.r.t. velocity."""
    return curve.deriv(ratio)

"""In-race nutrition strategies and their rasterization onto a mesh.

A strategy is a timed list of carbohydrate pulses (minute, kJ).  The builtin
catalog covers the sixteen standard scenarios s0..s15 (gel counts and sizes
varying, even or skewed spacing) plus the world-record fueling plan.  Pulses
are realized on a mesh by injecting the full gel energy at the nearest step
node, which keeps the integral of the source term equal to the consumed
energy independent of the step size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bioenergetics import Mesh

__all__ = [
    "KCAL_TO_KJ",
    "NutritionStrategy",
    "builtin_strategy",
    "world_record_strategy",
    "pulse_profile",
    "strategy_to_csv",
    "strategy_from_csv",
    "BUILTIN_LABELS",
]

KCAL_TO_KJ = 4.184

# Builtin catalog: (gel sizes in kcal, timing rule).  "even" places n gels at
# i*T/(n+1); a float rule places one gel per size at the given fraction of T.
_EVEN = "even"
_CATALOG: dict[int, tuple[tuple[float, ...], object]] = {
    0: ((), _EVEN),
    1: ((100.0,), _EVEN),
    2: ((100.0,) * 2, _EVEN),
    3: ((100.0,) * 3, _EVEN),
    4: ((100.0,) * 4, _EVEN),
    5: ((100.0,) * 5, _EVEN),
    6: ((100.0,) * 11, _EVEN),
    7: ((100.0,) * 24, _EVEN),
    8: ((100.0,), (0.15,)),
    9: ((100.0,), (0.80,)),
    10: ((100.0,) * 4, (0.10, 0.20, 0.75, 0.85)),
    11: ((200.0,) * 4, _EVEN),
    12: ((250.0,) * 2, _EVEN),
    13: ((250.0,) * 4, _EVEN),
    14: ((50.0,) * 10, _EVEN),
    15: ((250.0, 100.0, 250.0), (0.20, 0.50, 0.80)),
}

BUILTIN_LABELS = tuple(f"s{i}" for i in sorted(_CATALOG))


@dataclass(frozen=True)
class NutritionStrategy:
    """Timed carbohydrate pulses: events are (minute, kJ) pairs."""

    id: str
    events: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        times = [t for t, _ in self.events]
        if any(t < 0.0 for t in times):
            raise ValueError("event times must be non-negative")
        if any(t2 < t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("event times must be non-decreasing")
        if any(e <= 0.0 for _, e in self.events):
            raise ValueError("event energies must be positive")

    @property
    def total_energy(self) -> float:
        return float(sum(e for _, e in self.events))


def builtin_strategy(index: int, t_final: float) -> NutritionStrategy:
    """Instantiate catalog entry s<index> on a race of t_final minutes."""
    if index not in _CATALOG:
        raise ValueError(f"strategy index must be in 0..15, got {index}")
    if t_final <= 0.0:
        raise ValueError("t_final must be positive")
    sizes, rule = _CATALOG[index]
    if rule == _EVEN:
        n = len(sizes)
        times = [(i + 1) * t_final / (n + 1) for i in range(n)]
    else:
        times = [frac * t_final for frac in rule]
    events = tuple(
        (t, kcal * KCAL_TO_KJ) for t, kcal in sorted(zip(times, sizes))
    )
    return NutritionStrategy(id=f"s{index}", events=events)


def world_record_strategy() -> NutritionStrategy:
    """Four 200-kcal gels at minutes 20, 46, 71, 97 (two-hour race plan)."""
    energy = 200.0 * KCAL_TO_KJ
    return NutritionStrategy(
        id="world_record",
        events=tuple((t, energy) for t in (20.0, 46.0, 71.0, 97.0)),
    )


def _event_node(t: float, mesh: Mesh) -> int:
    """Nearest step node to time t, ties resolved toward the earlier node."""
    k = int(np.ceil(t / mesh.h - 0.5))
    return min(max(k, 0), mesh.n_steps - 1)


def pulse_profile(strategy: NutritionStrategy, mesh: Mesh) -> np.ndarray:
    """Source term s_k [kJ/min] with h * sum(s) equal to the total energy."""
    for t, _ in strategy.events:
        if t > mesh.t_final:
            raise ValueError(f"event at {t} min lies beyond the {mesh.t_final} min horizon")
    s = np.zeros(mesh.n_steps)
    for t, energy in strategy.events:
        s[_event_node(t, mesh)] += energy / mesh.h
    return s


def strategy_to_csv(strategy: NutritionStrategy) -> str:
    lines = ["# id,time_min,energy_kJ"]
    for t, e in strategy.events:
        lines.append(f"{strategy.id},{t:.12g},{e:.12g}")
    return "\n".join(lines) + "\n"


def strategy_from_csv(text: str) -> NutritionStrategy:
    """Parse `id,time_min,energy_kJ` lines (comments and blanks ignored)."""
    label = "custom"
    events: list[tuple[float, float]] = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [part.strip() for part in line.split(",")]
        if len(parts) != 3:
            raise ValueError(f"malformed strategy line: {raw!r}")
        label = parts[0] or label
        events.append((float(parts[1]), float(parts[2])))
    events.sort()
    return NutritionStrategy(id=label, events=tuple(events))

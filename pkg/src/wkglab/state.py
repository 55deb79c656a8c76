from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .foliation import SliceChart, radial_derivative


class NonFiniteError(FloatingPointError):
    """A grid function became NaN or infinite."""

    def __init__(self, message: str, unknown: str | None = None, node: int | None = None,
                 step: int | None = None):
        super().__init__(message)
        self.unknown = unknown
        self.node = node
        self.step = step


class Jet(NamedTuple):
    """Pointwise value and first Minkowski derivatives of one unknown."""

    value: np.ndarray
    dt: np.ndarray
    dr: np.ndarray


@dataclass
class EvolutionState:
    """Values and first time derivatives of every unknown on one slice."""

    chart: SliceChart
    values: dict[str, np.ndarray]
    rates: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def time(self) -> float:
        return self.chart.time

    @property
    def mode(self) -> str:
        return self.chart.kind

    @property
    def unknowns(self) -> tuple[str, ...]:
        return tuple(self.values)

    def copy(self) -> "EvolutionState":
        return EvolutionState(self.chart, {k: v.copy() for k, v in self.values.items()},
                              {k: v.copy() for k, v in self.rates.items()})

    def jets(self) -> dict[str, Jet]:
        out = {}
        for name, u in self.values.items():
            ut = self.rates[name]
            out[name] = Jet(u, ut, radial_derivative(u, ut, self.chart))
        return out

    def check_finite(self, step: int | None = None) -> None:
        for name in self.values:
            for channel, arr in (("value", self.values[name]), ("rate", self.rates.get(name))):
                if arr is None:
                    continue
                bad = ~np.isfinite(arr)
                if bad.any():
                    node = int(np.argmax(bad))
                    where = f" at step {step}" if step is not None else ""
                    raise NonFiniteError(
                        f"non-finite {channel} of {name!r} at node {node} "
                        f"(r={self.chart.r[node]:.6g}, time={self.time:.6g}){where}",
                        name, node, step)

    @classmethod
    def zeros(cls, chart: SliceChart, unknowns) -> "EvolutionState":
        return cls(chart, {k: np.zeros_like(chart.r) for k in unknowns},
                   {k: np.zeros_like(chart.r) for k in unknowns})

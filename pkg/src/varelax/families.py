"""Composite integrands of the form base(y) + factor(t) * modulation(y)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import ShapeFunction, TimeFactor, time_factor
from .convex import Grid1D, SampledFunction
from .errors import SchemaError


@dataclass(frozen=True, eq=False)
class IntegrandFamily:
    """One integrand slice family: value(t, y) = base(y) + factor(t) * modulation(y)."""

    base: ShapeFunction
    modulation: ShapeFunction | None = None
    factor: TimeFactor | None = None

    def __post_init__(self):
        if self.modulation is not None and self.factor is None:
            object.__setattr__(self, "factor", time_factor("const", {"value": 1.0}))
        if self.modulation is None and self.factor is not None:
            raise SchemaError("time factor given without a modulation shape")

    @property
    def autonomous(self) -> bool:
        return self.modulation is None or self.factor.constant

    def value(self, t: float, y) -> np.ndarray:
        out = self.base(y)
        if self.modulation is not None:
            out = out + float(self.factor(t)) * self.modulation(y)
        return out

    def sample(self, t: float, grid: Grid1D) -> SampledFunction:
        return SampledFunction(grid, self.value(t, grid.points))

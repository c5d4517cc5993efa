"""Tissue parameter vector and tissue ranges."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import PhysicalPlausibilityWarning


@dataclass(frozen=True)
class TissueParams:
    """Unknown parameter vector ``[m0, t1, t2]`` (t1, t2 in ms)."""

    m0: float
    t1: float
    t2: float

    def __post_init__(self):
        for name in ("m0", "t1", "t2"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")
        if self.t2 > self.t1:
            warnings.warn(
                f"t2={self.t2} ms exceeds t1={self.t1} ms",
                PhysicalPlausibilityWarning,
                stacklevel=3,
            )


@dataclass(frozen=True)
class TissueRange:
    """Rectangular T1/T2 region at fixed M0, sampled on a uniform grid.

    The grid defines both the worst case taken by the optimizer and the
    range averages reported for a protocol.
    """

    t1_min: float = 1000.0
    t1_max: float = 2000.0
    t2_min: float = 60.0
    t2_max: float = 110.0
    m0_fixed: float = 3000.0
    grid_t1: int = 21
    grid_t2: int = 11

    def __post_init__(self):
        if not (0 < self.t1_min <= self.t1_max):
            raise ValueError("need 0 < t1_min <= t1_max")
        if not (0 < self.t2_min <= self.t2_max):
            raise ValueError("need 0 < t2_min <= t2_max")
        if self.m0_fixed <= 0:
            raise ValueError("m0_fixed must be > 0")
        if self.t1_min < self.t1_max and self.grid_t1 < 2:
            raise ValueError("grid_t1 must be >= 2 for a non-degenerate T1 range")
        if self.t2_min < self.t2_max and self.grid_t2 < 2:
            raise ValueError("grid_t2 must be >= 2 for a non-degenerate T2 range")

    def t1_values(self) -> np.ndarray:
        if self.t1_min == self.t1_max:
            return np.array([self.t1_min])
        return np.linspace(self.t1_min, self.t1_max, self.grid_t1)

    def t2_values(self) -> np.ndarray:
        if self.t2_min == self.t2_max:
            return np.array([self.t2_min])
        return np.linspace(self.t2_min, self.t2_max, self.grid_t2)

    def grid(self, joint: bool = True) -> tuple[np.ndarray, np.ndarray]:
        """Flattened (t1, t2) grid, T1 varying slowest.

        For T1-only sequences the weighting vector does not depend on T2, so
        the T2 axis collapses to the range midpoint.
        """
        t1 = self.t1_values()
        if joint:
            t2 = self.t2_values()
        else:
            t2 = np.array([0.5 * (self.t2_min + self.t2_max)])
        g1, g2 = np.meshgrid(t1, t2, indexing="ij")
        return g1.ravel(), g2.ravel()

    def points(self, joint: bool = True) -> list[TissueParams]:
        t1, t2 = self.grid(joint)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", PhysicalPlausibilityWarning)
            return [TissueParams(self.m0_fixed, float(a), float(b)) for a, b in zip(t1, t2)]

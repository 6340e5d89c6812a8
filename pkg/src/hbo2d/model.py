"""PDE instance parameters.

The model is

    u_t + nu1 d_x (-Delta)^s u + (nu2/m) d_x (u^m) = 0,

with the higher-dimensional Benjamin-Ono (HBO) case s=1/2, m=2, nu1=-1, nu2=1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import InvalidArgumentError


def critical_index(s: float, m: float) -> float:
    return 1.0 - 2.0 * s / (m - 1.0)


def energy_critical_power(s: float) -> float:
    return (1.0 + s) / (1.0 - s) if s < 1 else math.inf


@dataclass(frozen=True)
class ModelParams:
    s: float = 0.5
    m: int = 2
    nu1: float = -1.0
    nu2: float = 1.0
    # test hook: drop the nonlinear term from the right-hand side
    nonlinear: bool = True
    r_c: float = field(init=False)

    def __post_init__(self):
        if not (0.0 < self.s <= 1.0):
            raise InvalidArgumentError(f"s must lie in (0,1], got {self.s}")
        if int(self.m) != self.m or self.m < 2:
            raise InvalidArgumentError(f"m must be an integer > 1, got {self.m}")
        if self.nu1 == 0 or not math.isfinite(self.nu1):
            raise InvalidArgumentError("nu1 must be a nonzero real")
        if self.nu2 not in (-1, 1):
            raise InvalidArgumentError(f"nu2 must be +1 or -1, got {self.nu2}")
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "nu1", float(self.nu1))
        object.__setattr__(self, "nu2", float(self.nu2))
        object.__setattr__(self, "r_c", critical_index(self.s, self.m))

    @classmethod
    def hbo(cls) -> "ModelParams":
        return cls(0.5, 2, -1.0, 1.0)

    @property
    def nu2_effective(self) -> float:
        return self.nu2 if self.nonlinear else 0.0

    @property
    def is_energy_critical(self) -> bool:
        return self.s < 1 and math.isclose(self.m, energy_critical_power(self.s))

    def linear_only(self) -> "ModelParams":
        return replace(self, nonlinear=False)

    def check_consistency(self) -> bool:
        return self.r_c == critical_index(self.s, self.m)
